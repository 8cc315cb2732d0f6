//! Graphs, GIG samples, and the similarity measures used to wire them.

mod adjacency;
mod sample;
mod similarity;

pub use adjacency::{AdjacencyIndex, FlatEdges, InEdge};
pub use sample::{GigEdge, GigSample, ProxyEdge, Wiring};
pub use similarity::{similarity, Metric};

use crate::error::{Error, Result};

pub fn build_adjacency(sample: &GigSample) -> AdjacencyIndex {
    AdjacencyIndex::build(sample)
}

/// Supervision attached to a graph.
#[derive(Clone, Debug, PartialEq)]
pub enum Label {
    Class(usize),
    Value(f64),
    VertexClasses(Vec<usize>),
    EdgeClasses(Vec<usize>),
}

/// A directed graph with per-vertex and (optional) per-edge feature vectors.
///
/// `edge_features` is either empty (no edge features) or parallel to `edges`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Graph {
    pub vertex_features: Vec<Vec<f64>>,
    pub edges: Vec<(usize, usize)>,
    pub edge_features: Vec<Vec<f64>>,
    pub label: Option<Label>,
}

impl Graph {
    pub fn new(vertex_features: Vec<Vec<f64>>, edges: Vec<(usize, usize)>) -> Self {
        Self {
            vertex_features,
            edges,
            ..Self::default()
        }
    }

    /// Stores every undirected pair `{a, b}` as the two directed edges
    /// `a → b` and `b → a`, in that order.
    pub fn undirected(vertex_features: Vec<Vec<f64>>, pairs: &[(usize, usize)]) -> Self {
        let edges = pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        Self::new(vertex_features, edges)
    }

    pub fn with_edge_features(mut self, features: Vec<Vec<f64>>) -> Self {
        self.edge_features = features;
        self
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_features.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_dim(&self) -> usize {
        self.vertex_features.first().map_or(0, Vec::len)
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_features.first().map_or(0, Vec::len)
    }

    /// In-edges of every vertex, ordered by ascending edge index.
    pub fn in_edges(&self) -> Vec<Vec<InEdge>> {
        let mut lists = vec![Vec::new(); self.num_vertices()];
        for (edge, &(src, dst)) in self.edges.iter().enumerate() {
            lists[dst].push(InEdge { edge, src });
        }
        lists
    }

    pub fn validate(&self) -> Result<()> {
        validate_graph(self, false)
    }
}

/// Checks the structural invariants of `g`: equal-length vertex features,
/// equal-length edge features (one per edge when present), edge endpoints in
/// range, and no self-loops unless `allow_self_loops`.
pub fn validate_graph(g: &Graph, allow_self_loops: bool) -> Result<()> {
    let n = g.num_vertices();
    let dv = g.vertex_dim();
    for (vertex, f) in g.vertex_features.iter().enumerate() {
        if f.len() != dv {
            return Err(Error::RaggedVertexFeatures {
                vertex,
                expected: dv,
                found: f.len(),
            });
        }
    }
    for (edge, &(src, dst)) in g.edges.iter().enumerate() {
        if src >= n || dst >= n {
            return Err(Error::EdgeOutOfRange {
                edge,
                src,
                dst,
                vertices: n,
            });
        }
        if src == dst && !allow_self_loops {
            return Err(Error::SelfLoop { edge, vertex: src });
        }
    }
    if !g.edge_features.is_empty() {
        if g.edge_features.len() != g.edges.len() {
            return Err(Error::EdgeFeatureCount {
                edges: g.edges.len(),
                features: g.edge_features.len(),
            });
        }
        let de = g.edge_dim();
        for (edge, f) in g.edge_features.iter().enumerate() {
            if f.len() != de {
                return Err(Error::RaggedEdgeFeatures {
                    edge,
                    expected: de,
                    found: f.len(),
                });
            }
        }
    }
    if let Some(label) = &g.label {
        match label {
            Label::VertexClasses(c) if c.len() != n => {
                return Err(Error::LengthMismatch(n, c.len()));
            }
            Label::EdgeClasses(c) if c.len() != g.edges.len() => {
                return Err(Error::LengthMismatch(g.edges.len(), c.len()));
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64; d]).collect()
    }

    #[test]
    fn two_way_edge_is_valid() {
        let g = Graph::new(feats(3, 2), vec![(0, 1), (1, 0)]);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn out_of_range_edge_is_named() {
        let g = Graph::new(feats(3, 2), vec![(0, 5)]);
        assert!(matches!(
            g.validate(),
            Err(Error::EdgeOutOfRange { edge: 0, src: 0, dst: 5, vertices: 3 })
        ));
    }

    #[test]
    fn ragged_vertex_features_point_at_the_vertex() {
        let g = Graph::new(vec![vec![0.0; 4], vec![0.0; 4], vec![0.0; 3]], vec![]);
        assert!(matches!(
            g.validate(),
            Err(Error::RaggedVertexFeatures { vertex: 2, expected: 4, found: 3 })
        ));
    }

    #[test]
    fn self_loops_need_permission() {
        let g = Graph::new(feats(2, 1), vec![(1, 1)]);
        assert!(matches!(g.validate(), Err(Error::SelfLoop { edge: 0, vertex: 1 })));
        assert!(validate_graph(&g, true).is_ok());
    }

    #[test]
    fn edge_features_must_be_parallel_and_even() {
        let g = Graph::new(feats(2, 1), vec![(0, 1), (1, 0)]).with_edge_features(vec![vec![1.0]]);
        assert!(matches!(g.validate(), Err(Error::EdgeFeatureCount { edges: 2, features: 1 })));
        let g = Graph::new(feats(2, 1), vec![(0, 1), (1, 0)])
            .with_edge_features(vec![vec![1.0, 2.0], vec![1.0]]);
        assert!(matches!(g.validate(), Err(Error::RaggedEdgeFeatures { edge: 1, .. })));
    }

    #[test]
    fn undirected_pairs_become_both_directions() {
        let g = Graph::undirected(feats(3, 1), &[(0, 1), (1, 2)]);
        assert_eq!(g.edges, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
    }

    #[test]
    fn chain_in_edges() {
        let g = Graph::new(feats(3, 1), vec![(0, 1), (1, 2)]);
        let ins = g.in_edges();
        assert_eq!(ins[1], vec![InEdge { edge: 0, src: 0 }]);
        assert!(ins[0].is_empty());
    }
}
