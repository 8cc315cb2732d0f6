//! Seeded synthetic tasks. Each split draws from its own RNG stream, so the
//! same seed always regenerates byte-identical files.

use super::dataset::{Dataset, DatasetMeta, Record, Split, SplitCounts};
use crate::error::{Error, Result};
use crate::graph::{Graph, Label};
use crate::network::Readout;
use crate::rng::GigRng;

/// Validation and test splits each hold half as many samples as training
/// (rounded up).
fn split_sizes(n: usize) -> [(Split, usize); 3] {
    let held = n.div_ceil(2);
    [(Split::Train, n), (Split::Val, held), (Split::Test, held)]
}

/// `one(rng, k)` makes the records of the `k`-th sample of a split.
fn build(meta: DatasetMeta, n: usize, seed: u64, mut one: impl FnMut(&mut GigRng, usize) -> Vec<Record>) -> Dataset {
    let root = GigRng::new(seed);
    let mut splits = split_sizes(n).map(|(split, count)| {
        let mut rng = root.stream(split as u64);
        (0..count).flat_map(|k| one(&mut rng, k)).collect::<Vec<_>>()
    });
    let [train, val, test] = std::array::from_fn(|i| std::mem::take(&mut splits[i]));
    Dataset { meta, train, val, test }.with_counts()
}

fn random_pairs(rng: &mut GigRng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.bernoulli(p) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

pub const MEDIAN_VERTEX_DIM: usize = 8;
/// Half-width of the per-sample shift added to every mean of a sample.
pub const MEDIAN_OFFSET: f64 = 6.0;

/// Means for one batch-median sample: one draw per equal-width stratum of
/// `[−1, 1]`, shuffled, then shifted together by a common offset. Returns
/// `None` on a tie.
fn median_means(rng: &mut GigRng, b: usize) -> Option<Vec<f64>> {
    let offset = rng.uniform_range(-MEDIAN_OFFSET, MEDIAN_OFFSET);
    let mut mu: Vec<f64> = (0..b)
        .map(|k| -1.0 + 2.0 * (k as f64 + rng.uniform()) / b as f64 + offset)
        .collect();
    rng.shuffle(&mut mu);
    let mut sorted = mu.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).all(|w| w[0] < w[1]).then_some(mu)
}

/// 1 for every mean strictly above the median, 0 otherwise.
pub fn median_labels(mu: &[f64]) -> Vec<usize> {
    let mut sorted = mu.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    mu.iter().map(|&m| usize::from(m > median)).collect()
}

/// `n_samples` groups of `graphs_per_sample` graphs. Graph `i` has 8 to 10
/// vertices with features drawn from `Normal(μ_i, 1)`; its label says
/// whether `μ_i` lies above the median of its group. The group offset hides
/// the absolute level, so a graph on its own says nothing about its label.
pub fn gen_batch_median_task(n_samples: usize, graphs_per_sample: usize, seed: u64) -> Result<Dataset> {
    if graphs_per_sample.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "graphs_per_sample must be odd for a median, got {graphs_per_sample}"
        )));
    }
    let meta = DatasetMeta {
        task_type: Readout::GraphClass,
        num_classes: 2,
        vertex_feat_dim: MEDIAN_VERTEX_DIM,
        edge_feat_dim: 0,
        counts: SplitCounts::default(),
        graphs_per_sample: Some(graphs_per_sample),
    };
    Ok(build(meta, n_samples, seed, |rng, _| {
        let mu = loop {
            if let Some(mu) = median_means(rng, graphs_per_sample) {
                break mu;
            }
        };
        let labels = median_labels(&mu);
        mu.iter()
            .zip(labels)
            .map(|(&m, label)| {
                let n = 8 + rng.below(3);
                let feats = (0..n)
                    .map(|_| (0..MEDIAN_VERTEX_DIM).map(|_| rng.normal(m, 1.0)).collect())
                    .collect();
                let pairs = random_pairs(rng, n, 0.3);
                Record::Graph(Graph::undirected(feats, &pairs).with_label(Label::Class(label)))
            })
            .collect()
    }))
}

pub const CLIP_CHAIN: usize = 5;

/// Position of the activation in each frame: one step per frame from
/// `start`, wrapping around the chain; rightwards for label 0.
pub fn clip_positions(start: usize, frames: usize, label: usize) -> Vec<usize> {
    (0..frames)
        .map(|t| {
            let step = t % CLIP_CHAIN;
            if label == 0 {
                (start + step) % CLIP_CHAIN
            } else {
                (start + CLIP_CHAIN - step) % CLIP_CHAIN
            }
        })
        .collect()
}

/// Frame `t` of a clip: a 5-vertex chain whose vertex features are
/// `[active, one-hot position (5), one-hot frame index (T)]`.
pub fn clip_frame(active: usize, t: usize, frames: usize) -> Graph {
    let feats = (0..CLIP_CHAIN)
        .map(|n| {
            let mut f = vec![0.0; 1 + CLIP_CHAIN + frames];
            f[0] = f64::from(u8::from(n == active));
            f[1 + n] = 1.0;
            f[1 + CLIP_CHAIN + t] = 1.0;
            f
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (1..CLIP_CHAIN).map(|n| (n - 1, n)).collect();
    Graph::undirected(feats, &pairs)
}

/// Clips of `frames_per_clip` frames. Each run of ten clips in a split holds
/// every (start, direction) pair once, in random order. Every single frame
/// is equally likely under both directions. Over the five starts, the
/// frame-type counts of the two directions sum to the same vector, so a
/// linear function of pooled per-frame features has its balanced
/// cross-entropy optimum at zero logits, i.e. chance.
pub fn gen_clip_direction_task(n_clips: usize, frames_per_clip: usize, seed: u64) -> Result<Dataset> {
    if frames_per_clip < 3 {
        return Err(Error::Config(format!("a clip needs at least 3 frames, got {frames_per_clip}")));
    }
    let meta = DatasetMeta {
        task_type: Readout::ClipClass,
        num_classes: 2,
        vertex_feat_dim: 1 + CLIP_CHAIN + frames_per_clip,
        edge_feat_dim: 0,
        counts: SplitCounts::default(),
        graphs_per_sample: None,
    };
    let mut deck: Vec<usize> = (0..2 * CLIP_CHAIN).collect();
    Ok(build(meta, n_clips, seed, move |rng, k| {
        if k % deck.len() == 0 {
            rng.shuffle(&mut deck);
        }
        let pair = deck[k % deck.len()];
        let (label, start) = (pair / CLIP_CHAIN, pair % CLIP_CHAIN);
        let frames = clip_positions(start, frames_per_clip, label)
            .into_iter()
            .enumerate()
            .map(|(t, p)| clip_frame(p, t, frames_per_clip))
            .collect();
        vec![Record::Clip { frames, label }]
    }))
}

pub const SUM_VERTICES: usize = 5;

/// Sum of every vertex feature of `g`.
pub fn sum_target(g: &Graph) -> Result<f64> {
    if g.vertex_dim() == 0 {
        return Err(Error::Config("sum target needs at least one vertex feature".into()));
    }
    Ok(g.vertex_features.iter().flatten().sum())
}

/// Random 5-vertex graphs with one feature per vertex, uniform in `[0, 1)`,
/// labelled with the sum of their features.
pub fn gen_sum_regression_task(n_samples: usize, seed: u64) -> Result<Dataset> {
    let meta = DatasetMeta {
        task_type: Readout::GraphReg,
        num_classes: 0,
        vertex_feat_dim: 1,
        edge_feat_dim: 0,
        counts: SplitCounts::default(),
        graphs_per_sample: None,
    };
    let mut err = None;
    let data = build(meta, n_samples, seed, |rng, _| {
        let feats: Vec<Vec<f64>> = (0..SUM_VERTICES).map(|_| vec![rng.uniform()]).collect();
        let pairs = random_pairs(rng, SUM_VERTICES, 0.5);
        let g = Graph::undirected(feats, &pairs);
        match sum_target(&g) {
            Ok(y) => vec![Record::Graph(g.with_label(Label::Value(y)))],
            Err(e) => {
                err.get_or_insert(e);
                vec![]
            }
        }
    });
    err.map_or(Ok(data), Err)
}
