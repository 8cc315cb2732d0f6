use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::GigSample;
use crate::tensor::Tensor;

/// Flat row indices for one [`GigSample`]. Graph vertices of every GIG
/// vertex are stacked into one `[N_total×d]` matrix (GIG vertex `i` owns rows
/// `vertex_offsets[i]..vertex_offsets[i + 1]`), and likewise for graph
/// edges, proxy edges and GIG edges.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleLayout {
    pub num_gig: usize,
    pub vertex_offsets: Vec<usize>,
    pub edge_offsets: Vec<usize>,
    pub vertex_owner: Arc<[usize]>,
    pub edge_src: Arc<[usize]>,
    pub edge_dst: Arc<[usize]>,
    pub pin_vertex: Arc<[usize]>,
    pub pin_owner: Arc<[usize]>,
    pub pout_vertex: Arc<[usize]>,
    pub pout_owner: Arc<[usize]>,
    /// Position of each outbound proxy edge's vertex within `connected`.
    pub pout_slot: Arc<[usize]>,
    pub gig_src: Arc<[usize]>,
    pub gig_dst: Arc<[usize]>,
    /// Vertex rows reached by an outbound proxy edge, ascending.
    pub connected: Arc<[usize]>,
    pub unconnected: Arc<[usize]>,
    /// 1 for unconnected rows, 0 for connected ones.
    pub keep_unconnected: Arc<[f64]>,
    /// 1 for connected rows, 0 for unconnected ones.
    pub keep_connected: Arc<[f64]>,
    /// Graph edges ending at an unconnected vertex, with their sources and
    /// the position of their destination within `unconnected`.
    pub residual_edges: Arc<[usize]>,
    pub residual_src: Arc<[usize]>,
    pub residual_slot: Arc<[usize]>,
    /// `1 / N_i` per GIG vertex.
    pub inv_sizes: Arc<[f64]>,
}

impl SampleLayout {
    pub fn new(sample: &GigSample) -> Result<Self> {
        sample.validate()?;
        if sample.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let i_count = sample.len();
        let mut vertex_offsets = vec![0];
        let mut edge_offsets = vec![0];
        let (mut owner, mut src, mut dst) = (Vec::new(), Vec::new(), Vec::new());
        for (i, g) in sample.gig_vertices.iter().enumerate() {
            if g.num_vertices() == 0 {
                return Err(Error::EmptyGraph);
            }
            let off = *vertex_offsets.last().unwrap();
            owner.extend(std::iter::repeat_n(i, g.num_vertices()));
            for &(s, d) in &g.edges {
                src.push(off + s);
                dst.push(off + d);
            }
            vertex_offsets.push(off + g.num_vertices());
            edge_offsets.push(src.len());
        }
        let total = *vertex_offsets.last().unwrap();

        let flatten = |lists: &[Vec<crate::graph::ProxyEdge>]| {
            let mut vertex = Vec::new();
            let mut own = Vec::new();
            for (i, es) in lists.iter().enumerate() {
                for e in es {
                    vertex.push(vertex_offsets[i] + e.vertex);
                    own.push(i);
                }
            }
            (vertex, own)
        };
        let (pin_vertex, pin_owner) = flatten(&sample.proxy_edges_in);
        let (pout_vertex, pout_owner) = flatten(&sample.proxy_edges_out);

        let mut is_connected = vec![false; total];
        for &v in &pout_vertex {
            is_connected[v] = true;
        }
        let connected: Vec<usize> = (0..total).filter(|&v| is_connected[v]).collect();
        let unconnected: Vec<usize> = (0..total).filter(|&v| !is_connected[v]).collect();
        let mut slot = vec![usize::MAX; total];
        for (k, &v) in connected.iter().enumerate() {
            slot[v] = k;
        }
        for (k, &v) in unconnected.iter().enumerate() {
            slot[v] = k;
        }
        let pout_slot: Vec<usize> = pout_vertex.iter().map(|&v| slot[v]).collect();
        let residual_edges: Vec<usize> = (0..dst.len()).filter(|&e| !is_connected[dst[e]]).collect();
        let residual_src = residual_edges.iter().map(|&e| src[e]).collect();
        let residual_slot = residual_edges.iter().map(|&e| slot[dst[e]]).collect();

        Ok(Self {
            num_gig: i_count,
            inv_sizes: vertex_offsets.windows(2).map(|w| 1.0 / (w[1] - w[0]) as f64).collect(),
            vertex_offsets,
            edge_offsets,
            vertex_owner: owner.into(),
            edge_src: src.into(),
            edge_dst: dst.into(),
            pin_vertex: pin_vertex.into(),
            pin_owner: pin_owner.into(),
            pout_vertex: pout_vertex.into(),
            pout_owner: pout_owner.into(),
            pout_slot: pout_slot.into(),
            gig_src: sample.gig_edges.iter().map(|e| e.src).collect(),
            gig_dst: sample.gig_edges.iter().map(|e| e.dst).collect(),
            keep_unconnected: is_connected.iter().map(|&c| if c { 0.0 } else { 1.0 }).collect(),
            keep_connected: is_connected.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
            connected: connected.into(),
            unconnected: unconnected.into(),
            residual_edges: residual_edges.into(),
            residual_src,
            residual_slot,
        })
    }

    pub fn total_vertices(&self) -> usize {
        *self.vertex_offsets.last().unwrap()
    }

    pub fn total_edges(&self) -> usize {
        *self.edge_offsets.last().unwrap()
    }

    pub fn vertex_rows(&self, gig: usize) -> std::ops::Range<usize> {
        self.vertex_offsets[gig]..self.vertex_offsets[gig + 1]
    }

    pub fn edge_rows(&self, gig: usize) -> std::ops::Range<usize> {
        self.edge_offsets[gig]..self.edge_offsets[gig + 1]
    }
}

/// A sample with its layout and stacked raw input features, ready for any
/// number of forward passes.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub layout: SampleLayout,
    /// `[N_total×d_v]`
    pub vertex_features: Tensor,
    /// `[E_total×d_e]`
    pub edge_features: Tensor,
    /// `[I×d_v]`
    pub local_proxies: Tensor,
}

impl PreparedSample {
    pub fn new(sample: &GigSample) -> Result<Self> {
        let layout = SampleLayout::new(sample)?;
        let dv = sample.gig_vertices[0].vertex_dim();
        let de = sample.gig_vertices.iter().map(|g| g.edge_dim()).max().unwrap_or(0);
        let vrows: Vec<&Vec<f64>> = sample.gig_vertices.iter().flat_map(|g| &g.vertex_features).collect();
        let mut edata = Vec::with_capacity(layout.total_edges() * de);
        for g in &sample.gig_vertices {
            if de > 0 && g.edge_features.len() != g.num_edges() {
                return Err(Error::EdgeFeatureCount {
                    edges: g.num_edges(),
                    features: g.edge_features.len(),
                });
            }
            for f in &g.edge_features {
                if f.len() != de {
                    return Err(Error::InvalidSample(format!(
                        "graphs in one sample disagree on edge feature width ({de} vs {})",
                        f.len()
                    )));
                }
                edata.extend_from_slice(f);
            }
        }
        let stack = |rows: &[&Vec<f64>], width: usize| -> Result<Tensor> {
            let mut data = Vec::with_capacity(rows.len() * width);
            for r in rows {
                if r.len() != width {
                    return Err(Error::InvalidSample(format!(
                        "feature width {} where {width} was expected",
                        r.len()
                    )));
                }
                data.extend_from_slice(r);
            }
            Tensor::new(vec![rows.len(), width], data)
        };
        Ok(Self {
            vertex_features: stack(&vrows, dv)?,
            edge_features: Tensor::new(vec![layout.total_edges(), de], edata)?,
            local_proxies: stack(&sample.local_proxies.iter().collect::<Vec<_>>(), dv)?,
            layout,
        })
    }

    pub fn vertex_dim(&self) -> usize {
        self.vertex_features.shape()[1]
    }

    pub fn edge_dim(&self) -> usize {
        self.edge_features.shape()[1]
    }
}
