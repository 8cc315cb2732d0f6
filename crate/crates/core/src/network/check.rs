use super::{GigNetwork, ModelDims, NetworkConfig, PreparedSample, Readout};
use crate::autodiff::{grad_check, GradCheckReport};
use crate::error::Result;
use crate::graph::Graph;
use crate::gsg::{generate_gig_sample, GsgConfig};
use crate::rng::GigRng;

pub const CHECK_GIG_VERTICES: usize = 3;
pub const CHECK_MAX_VERTICES: usize = 6;
pub const CHECK_HIDDEN_DIM: usize = 4;
pub const CHECK_FEATURE_DIM: usize = 4;
pub const CHECK_STEP: f64 = 1e-5;

/// Finite-difference check of every parameter of a random two-hidden-layer
/// gated-GCN GIG network: 3 GIG vertices of 2 to 6 graph vertices, width 4,
/// 4 vertex and 2 edge input features, cross-entropy on random classes.
/// Biases and norm parameters are jittered away from their initial values.
pub fn random_network_gradcheck(seed: u64, tol: f64) -> Result<GradCheckReport> {
    let mut rng = GigRng::new(seed);
    let (dv, de, classes) = (CHECK_FEATURE_DIM, 2, 3);
    let graphs: Vec<Graph> = (0..CHECK_GIG_VERTICES)
        .map(|_| {
            let n = 2 + rng.below(CHECK_MAX_VERTICES - 1);
            let feats = (0..n).map(|_| (0..dv).map(|_| rng.normal(0.0, 1.0)).collect()).collect();
            let mut pairs = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.bernoulli(0.5) {
                        pairs.push((a, b));
                    }
                }
            }
            let g = Graph::undirected(feats, &pairs);
            let ef = (0..g.num_edges()).map(|_| (0..de).map(|_| rng.normal(0.0, 1.0)).collect()).collect();
            g.with_edge_features(ef)
        })
        .collect();
    let prep = PreparedSample::new(&generate_gig_sample(&graphs, &GsgConfig::default(), seed)?)?;
    let cfg = NetworkConfig {
        num_hidden_layers: 2,
        hidden_dim: CHECK_HIDDEN_DIM,
        updater: "gatedgcn".into(),
        readout: Readout::GraphClass,
        ..NetworkConfig::default()
    };
    let dims = ModelDims {
        vertex_dim: dv,
        edge_dim: de,
        outputs: classes,
    };
    let network = GigNetwork::new(cfg, dims)?;
    let mut params = network.init_params(rng.next_u64());
    for (name, t) in params.iter_mut() {
        if name.contains(".ln_") || name.ends_with(".b") || name.ends_with(".const") {
            t.data_mut().iter_mut().for_each(|x| *x += rng.normal(0.0, 0.2));
        }
    }
    let targets: Vec<usize> = (0..CHECK_GIG_VERTICES).map(|_| rng.below(classes)).collect();
    grad_check(
        |tape, bound| {
            let out = network.forward(tape, bound, &prep)?;
            tape.cross_entropy(out, &targets)
        },
        &mut params,
        CHECK_STEP,
        tol,
    )
}
