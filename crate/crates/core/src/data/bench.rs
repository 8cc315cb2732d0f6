use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use super::config::Config;
use crate::autodiff::{Axis, Tape};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::gsg::{estimate_gsg_complexity, generate_gig_sample};
use crate::network::{GigNetwork, ModelDims, PreparedSample, Readout};
use crate::rng::GigRng;

/// GIG vertices, graph vertices per GIG vertex, feature width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BenchSize {
    pub i: usize,
    pub n: usize,
    pub d: usize,
}

/// Parses `"I,N,d;I,N,d;..."`.
pub fn parse_sizes(s: &str) -> Result<Vec<BenchSize>> {
    let bad = |part: &str| Error::Config(format!("bench size `{part}` is not I,N,d with positive integers"));
    s.split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let v: Vec<usize> = part
                .split(',')
                .map(|x| usize::from_str(x.trim()).map_err(|_| bad(part)))
                .collect::<Result<_>>()?;
            match v[..] {
                [i, n, d] if i > 0 && n > 0 && d > 0 => Ok(BenchSize { i, n, d }),
                _ => Err(bad(part)),
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    #[serde(flatten)]
    pub size: BenchSize,
    pub gsg_ms: f64,
    pub gsg_estimate: u128,
    pub forward_ms: f64,
    pub forward_backward_ms: f64,
    pub forward_no_ggu_ms: f64,
}

/// Least-squares slope of log GSG time against log I, over rows sharing
/// `n` and `d`.
#[derive(Clone, Debug, Serialize)]
pub struct GsgSlope {
    pub n: usize,
    pub d: usize,
    pub points: usize,
    pub slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub gsg_time_slopes: Vec<GsgSlope>,
}

/// Milliseconds per call: the best of three batches, each batch repeated
/// until it takes at least 20 ms.
fn time_ms(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let mut reps = 1usize;
        loop {
            let t = Instant::now();
            for _ in 0..reps {
                f()?;
            }
            let el = t.elapsed().as_secs_f64();
            if el >= 0.02 || reps >= 1 << 20 {
                best = best.min(el * 1e3 / reps as f64);
                break;
            }
            reps *= 2;
        }
    }
    Ok(best)
}

fn bench_graphs(rng: &mut GigRng, size: BenchSize) -> Vec<Graph> {
    (0..size.i)
        .map(|_| {
            let feats = (0..size.n).map(|_| (0..size.d).map(|_| rng.normal(0.0, 1.0)).collect()).collect();
            let mut pairs = Vec::new();
            for a in 0..size.n {
                for b in a + 1..size.n {
                    if rng.bernoulli(0.3) {
                        pairs.push((a, b));
                    }
                }
            }
            Graph::undirected(feats, &pairs)
        })
        .collect()
}

pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Times GSG, forward, forward+backward and GGU-free forward for each size.
/// The network uses the configuration's layers and width with `d` input
/// features and a two-class graph head.
pub fn bench(cfg: &Config, sizes: &[BenchSize]) -> Result<BenchReport> {
    let gsg = cfg.gsg();
    gsg.validate()?;
    let root = GigRng::new(cfg.seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for (k, &size) in sizes.iter().enumerate() {
        let graphs = bench_graphs(&mut root.stream(k as u64), size);
        let gsg_ms = time_ms(|| {
            black_box(generate_gig_sample(black_box(&graphs), &gsg, cfg.seed)?);
            Ok(())
        })?;
        let prep = PreparedSample::new(&generate_gig_sample(&graphs, &gsg, cfg.seed)?)?;
        let dims = ModelDims {
            vertex_dim: size.d,
            edge_dim: 0,
            outputs: 2,
        };
        let full = GigNetwork::new(cfg.network(Readout::GraphClass), dims)?;
        let params = full.init_params(cfg.seed);
        let lite_cfg = Config {
            disable_ggu: true,
            ..cfg.clone()
        };
        let lite = GigNetwork::new(lite_cfg.network(Readout::GraphClass), dims)?;
        let lite_params = lite.init_params(cfg.seed);
        let forward = |net: &GigNetwork, p| {
            time_ms(|| {
                black_box(net.predict(p, &prep)?);
                Ok(())
            })
        };
        let forward_ms = forward(&full, &params)?;
        let forward_no_ggu_ms = forward(&lite, &lite_params)?;
        let forward_backward_ms = time_ms(|| {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let out = full.forward(&mut tape, &bound, &prep)?;
            let loss = tape.sum(out, Axis::All)?;
            black_box(tape.backward(loss)?);
            Ok(())
        })?;
        rows.push(BenchRow {
            size,
            gsg_ms,
            gsg_estimate: estimate_gsg_complexity(size.i as u64, size.n as u64, size.d as u64),
            forward_ms,
            forward_backward_ms,
            forward_no_ggu_ms,
        });
    }
    Ok(BenchReport {
        gsg_time_slopes: slopes(&rows),
        rows,
    })
}

fn slopes(rows: &[BenchRow]) -> Vec<GsgSlope> {
    let mut keys: Vec<(usize, usize)> = rows.iter().map(|r| (r.size.n, r.size.d)).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(n, d)| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| (r.size.n, r.size.d) == (n, d))
                .map(|r| (r.size.i as f64, r.gsg_ms))
                .collect();
            let mut is: Vec<u64> = pts.iter().map(|p| p.0 as u64).collect();
            is.dedup();
            (is.len() >= 2).then(|| GsgSlope {
                n,
                d,
                points: pts.len(),
                slope: log_log_slope(&pts),
            })
        })
        .collect()
}
