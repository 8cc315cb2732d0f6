use super::GigSample;

/// One incoming edge: its index in the owning edge list and its source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InEdge {
    pub edge: usize,
    pub src: usize,
}

/// In-neighbour lists of a [`GigSample`], each ordered by ascending edge index.
///
/// For proxy-in lists the source is a graph vertex; for proxy-out lists it is
/// the owning GIG vertex (the global proxy); for GIG lists it is the GIG
/// vertex whose local proxy sends the message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyIndex {
    /// `[gig vertex][graph vertex]`
    pub graph: Vec<Vec<Vec<InEdge>>>,
    /// `[gig vertex]`, in-edges of the local proxy
    pub proxy_in: Vec<Vec<InEdge>>,
    /// `[gig vertex][graph vertex]`
    pub proxy_out: Vec<Vec<Vec<InEdge>>>,
    /// `[gig vertex]`, in-edges of the global proxy
    pub gig: Vec<Vec<InEdge>>,
}

/// Edge lists recovered from an [`AdjacencyIndex`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatEdges {
    pub graph: Vec<Vec<(usize, usize)>>,
    pub proxy_in: Vec<Vec<usize>>,
    pub proxy_out: Vec<Vec<usize>>,
    pub gig: Vec<(usize, usize)>,
}

impl AdjacencyIndex {
    pub fn build(sample: &GigSample) -> Self {
        let graph = sample.gig_vertices.iter().map(|g| g.in_edges()).collect();
        let proxy_in = sample
            .proxy_edges_in
            .iter()
            .map(|es| {
                es.iter()
                    .enumerate()
                    .map(|(edge, e)| InEdge { edge, src: e.vertex })
                    .collect()
            })
            .collect();
        let proxy_out = sample
            .proxy_edges_out
            .iter()
            .zip(&sample.gig_vertices)
            .enumerate()
            .map(|(i, (es, g))| {
                let mut lists = vec![Vec::new(); g.num_vertices()];
                for (edge, e) in es.iter().enumerate() {
                    lists[e.vertex].push(InEdge { edge, src: i });
                }
                lists
            })
            .collect();
        let mut gig = vec![Vec::new(); sample.len()];
        for (edge, e) in sample.gig_edges.iter().enumerate() {
            gig[e.dst].push(InEdge { edge, src: e.src });
        }
        Self {
            graph,
            proxy_in,
            proxy_out,
            gig,
        }
    }

    /// Reassembles the edge lists in their original order.
    pub fn flatten(&self) -> FlatEdges {
        fn unsort<T: Copy>(mut tagged: Vec<(usize, T)>) -> Vec<T> {
            tagged.sort_by_key(|&(edge, _)| edge);
            tagged.into_iter().map(|(_, x)| x).collect()
        }
        let graph = self
            .graph
            .iter()
            .map(|lists| {
                unsort(
                    lists
                        .iter()
                        .enumerate()
                        .flat_map(|(dst, l)| l.iter().map(move |e| (e.edge, (e.src, dst))))
                        .collect(),
                )
            })
            .collect();
        let proxy_in = self
            .proxy_in
            .iter()
            .map(|l| unsort(l.iter().map(|e| (e.edge, e.src)).collect()))
            .collect();
        let proxy_out = self
            .proxy_out
            .iter()
            .map(|lists| {
                unsort(
                    lists
                        .iter()
                        .enumerate()
                        .flat_map(|(v, l)| l.iter().map(move |e| (e.edge, v)))
                        .collect(),
                )
            })
            .collect();
        let gig = unsort(
            self.gig
                .iter()
                .enumerate()
                .flat_map(|(dst, l)| l.iter().map(move |e| (e.edge, (e.src, dst))))
                .collect(),
        );
        FlatEdges {
            graph,
            proxy_in,
            proxy_out,
            gig,
        }
    }
}
