use std::collections::BTreeSet;

use super::{validate_graph, Graph};
use crate::error::{Error, Result};

/// A proxy edge between a graph vertex of one GIG vertex and that GIG
/// vertex's local (inbound) or global (outbound) proxy.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxyEdge {
    pub vertex: usize,
    pub feature: Vec<f64>,
}

/// A directed edge from the local proxy of `src` to the global proxy of `dst`.
#[derive(Clone, Debug, PartialEq)]
pub struct GigEdge {
    pub src: usize,
    pub dst: usize,
    pub feature: Vec<f64>,
}

/// A graph of graphs: `I` inner graphs, one local and one global proxy per
/// inner graph, and the edges wiring them together.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GigSample {
    pub gig_vertices: Vec<Graph>,
    pub local_proxies: Vec<Vec<f64>>,
    pub global_proxies: Vec<Vec<f64>>,
    /// Per GIG vertex: graph vertex → local proxy.
    pub proxy_edges_in: Vec<Vec<ProxyEdge>>,
    /// Per GIG vertex: global proxy → graph vertex.
    pub proxy_edges_out: Vec<Vec<ProxyEdge>>,
    pub gig_edges: Vec<GigEdge>,
}

impl GigSample {
    pub fn len(&self) -> usize {
        self.gig_vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gig_vertices.is_empty()
    }

    pub fn total_vertices(&self) -> usize {
        self.gig_vertices.iter().map(Graph::num_vertices).sum()
    }

    pub fn total_edges(&self) -> usize {
        self.gig_vertices.iter().map(Graph::num_edges).sum()
    }

    /// Undirected GIG degree of every GIG vertex (distinct neighbours).
    pub fn gig_degrees(&self) -> Vec<usize> {
        let mut nb = vec![BTreeSet::new(); self.len()];
        for e in &self.gig_edges {
            nb[e.src].insert(e.dst);
            nb[e.dst].insert(e.src);
        }
        nb.iter().map(BTreeSet::len).collect()
    }

    /// The index structure of the sample, without any feature values.
    pub fn wiring(&self) -> Wiring {
        Wiring {
            graph_edges: self.gig_vertices.iter().map(|g| g.edges.clone()).collect(),
            proxy_in: self
                .proxy_edges_in
                .iter()
                .map(|es| es.iter().map(|e| e.vertex).collect())
                .collect(),
            proxy_out: self
                .proxy_edges_out
                .iter()
                .map(|es| es.iter().map(|e| e.vertex).collect())
                .collect(),
            gig_edges: self.gig_edges.iter().map(|e| (e.src, e.dst)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let i = self.len();
        let bad = |msg: String| Err(Error::InvalidSample(msg));
        if self.local_proxies.len() != i
            || self.global_proxies.len() != i
            || self.proxy_edges_in.len() != i
            || self.proxy_edges_out.len() != i
        {
            return bad(format!(
                "{i} GIG vertices but {} local proxies, {} global proxies, {}/{} proxy-edge lists",
                self.local_proxies.len(),
                self.global_proxies.len(),
                self.proxy_edges_in.len(),
                self.proxy_edges_out.len()
            ));
        }
        for g in &self.gig_vertices {
            validate_graph(g, false)?;
        }
        let mut edge_dim = None;
        let mut check_dim = |len: usize, what: &str| -> Result<()> {
            match edge_dim {
                None => {
                    edge_dim = Some(len);
                    Ok(())
                }
                Some(d) if d == len => Ok(()),
                Some(d) => Err(Error::InvalidSample(format!("{what} has {len} features, expected {d}"))),
            }
        };
        for (k, g) in self.gig_vertices.iter().enumerate() {
            let n = g.num_vertices();
            for (dir, edges) in [("inbound", &self.proxy_edges_in[k]), ("outbound", &self.proxy_edges_out[k])] {
                for e in edges {
                    if e.vertex >= n {
                        return bad(format!(
                            "{dir} proxy edge of GIG vertex {k} targets vertex {} of {n}",
                            e.vertex
                        ));
                    }
                    check_dim(e.feature.len(), "proxy edge")?;
                }
            }
        }
        let pairs: BTreeSet<(usize, usize)> = self.gig_edges.iter().map(|e| (e.src, e.dst)).collect();
        for e in &self.gig_edges {
            if e.src >= i || e.dst >= i {
                return bad(format!("GIG edge {}->{} outside 0..{i}", e.src, e.dst));
            }
            if e.src == e.dst {
                return bad(format!("GIG edge loop on {}", e.src));
            }
            if !pairs.contains(&(e.dst, e.src)) {
                return bad(format!("GIG edge {}->{} has no reverse", e.src, e.dst));
            }
            check_dim(e.feature.len(), "GIG edge")?;
        }
        Ok(())
    }
}

/// Index structure of a [`GigSample`]; equal before and after training.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Wiring {
    pub graph_edges: Vec<Vec<(usize, usize)>>,
    pub proxy_in: Vec<Vec<usize>>,
    pub proxy_out: Vec<Vec<usize>>,
    pub gig_edges: Vec<(usize, usize)>,
}
