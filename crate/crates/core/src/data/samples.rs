use std::collections::BTreeMap;

use serde::Serialize;

use super::dataset::{DatasetMeta, Record, Split};
use crate::error::{Error, Result};
use crate::graph::{Graph, Label};
use crate::gsg::{estimate_gsg_complexity, generate_gig_sample, GsgConfig};
use crate::network::{ModelDims, Readout};
use crate::rng::GigRng;
use crate::tensor::Tensor;
use crate::training::{Targets, TrainSample};

pub fn model_dims(meta: &DatasetMeta) -> ModelDims {
    ModelDims {
        vertex_dim: meta.vertex_feat_dim,
        edge_dim: meta.edge_feat_dim,
        outputs: meta.outputs(),
    }
}

/// The graphs of each GIG sample: clips are one sample each, graph records
/// are taken in consecutive groups (`graphs_per_sample` from the metadata
/// when set, `samples_per_gig` otherwise; the last group may be short).
pub fn group_records(records: &[Record], meta: &DatasetMeta, samples_per_gig: usize) -> Result<Vec<(Vec<Graph>, Option<usize>)>> {
    if meta.task_type == Readout::ClipClass {
        return records
            .iter()
            .map(|r| match r {
                Record::Clip { frames, label } => Ok((frames.clone(), Some(*label))),
                Record::Graph(_) => Err(Error::Config("graph record in a clip dataset".into())),
            })
            .collect();
    }
    let size = meta.graphs_per_sample.unwrap_or(samples_per_gig).max(1);
    records
        .chunks(size)
        .map(|chunk| {
            chunk
                .iter()
                .map(|r| match r {
                    Record::Graph(g) => Ok(g.clone()),
                    Record::Clip { .. } => Err(Error::Config("clip record in a graph dataset".into())),
                })
                .collect::<Result<Vec<_>>>()
                .map(|gs| (gs, None))
        })
        .collect()
}

fn missing(what: &str) -> Error {
    Error::Config(format!("a graph is missing its {what} label"))
}

pub fn targets_for(readout: Readout, graphs: &[Graph], clip_label: Option<usize>) -> Result<Targets> {
    let each = |f: &dyn Fn(&Label) -> Option<Vec<usize>>, what: &str| -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for g in graphs {
            out.extend(g.label.as_ref().and_then(f).ok_or_else(|| missing(what))?);
        }
        Ok(out)
    };
    Ok(match readout {
        Readout::GraphClass => Targets::Classes(each(
            &|l| match l {
                Label::Class(c) => Some(vec![*c]),
                _ => None,
            },
            "class",
        )?),
        Readout::GraphReg => {
            let ys = graphs
                .iter()
                .map(|g| match g.label {
                    Some(Label::Value(y)) => Ok(y),
                    _ => Err(missing("value")),
                })
                .collect::<Result<Vec<_>>>()?;
            Targets::Values(Tensor::new(vec![ys.len(), 1], ys)?)
        }
        Readout::VertexClass => Targets::Classes(each(
            &|l| match l {
                Label::VertexClasses(c) => Some(c.clone()),
                _ => None,
            },
            "vertex",
        )?),
        Readout::EdgeClass => Targets::Classes(each(
            &|l| match l {
                Label::EdgeClasses(c) => Some(c.clone()),
                _ => None,
            },
            "edge",
        )?),
        Readout::ClipClass => Targets::Classes(vec![clip_label.ok_or_else(|| missing("clip"))?]),
    })
}

/// GSG seed for the samples of one split, so that training, evaluation and
/// inspection wire a split identically.
pub fn split_seed(seed: u64, split: Split) -> u64 {
    GigRng::new(seed).stream(split as u64).seed()
}

/// Runs GSG once per group and attaches targets. Group `k` uses RNG
/// stream `k` of `seed`.
pub fn make_samples(
    records: &[Record],
    meta: &DatasetMeta,
    readout: Readout,
    gsg: &GsgConfig,
    samples_per_gig: usize,
    seed: u64,
) -> Result<Vec<TrainSample>> {
    let root = GigRng::new(seed);
    group_records(records, meta, samples_per_gig)?
        .into_iter()
        .enumerate()
        .map(|(k, (graphs, label))| {
            let sample = generate_gig_sample(&graphs, gsg, root.stream(k as u64).seed())?;
            TrainSample::new(sample, targets_for(readout, &graphs, label)?)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleWiring {
    pub gig_vertices: usize,
    pub proxy_edges_in: Vec<usize>,
    pub proxy_edges_out: Vec<usize>,
    pub gig_edges: usize,
    pub complexity_estimate: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct GsgReport {
    pub samples: Vec<SampleWiring>,
    /// GIG degree → number of GIG vertices with it.
    pub gig_degree_histogram: BTreeMap<usize, usize>,
    pub total_complexity_estimate: u128,
}

pub fn inspect_gsg(records: &[Record], meta: &DatasetMeta, gsg: &GsgConfig, samples_per_gig: usize, seed: u64) -> Result<GsgReport> {
    let root = GigRng::new(seed);
    let mut samples = Vec::new();
    let mut hist = BTreeMap::new();
    for (k, (graphs, _)) in group_records(records, meta, samples_per_gig)?.into_iter().enumerate() {
        let s = generate_gig_sample(&graphs, gsg, root.stream(k as u64).seed())?;
        for d in s.gig_degrees() {
            *hist.entry(d).or_insert(0) += 1;
        }
        let max_vs = graphs.iter().map(Graph::num_vertices).max().unwrap_or(0);
        samples.push(SampleWiring {
            gig_vertices: s.len(),
            proxy_edges_in: s.proxy_edges_in.iter().map(Vec::len).collect(),
            proxy_edges_out: s.proxy_edges_out.iter().map(Vec::len).collect(),
            gig_edges: s.gig_edges.len(),
            complexity_estimate: estimate_gsg_complexity(s.len() as u64, max_vs as u64, meta.vertex_feat_dim as u64),
        });
    }
    Ok(GsgReport {
        total_complexity_estimate: samples.iter().map(|s| s.complexity_estimate).sum(),
        samples,
        gig_degree_histogram: hist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generators::{gen_batch_median_task, gen_clip_direction_task, gen_sum_regression_task};

    #[test]
    fn median_groups_follow_the_metadata() {
        let data = gen_batch_median_task(4, 5, 0).unwrap();
        let s = make_samples(&data.train, &data.meta, Readout::GraphClass, &GsgConfig::default(), 32, 0).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|x| x.targets.rows() == 5 && x.sample.len() == 5));
    }

    #[test]
    fn graph_groups_use_samples_per_gig() {
        let data = gen_sum_regression_task(10, 0).unwrap();
        let s = make_samples(&data.train, &data.meta, Readout::GraphReg, &GsgConfig::default(), 4, 0).unwrap();
        assert_eq!(s.iter().map(|x| x.sample.len()).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert!(matches!(&s[2].targets, Targets::Values(t) if t.shape() == [2, 1]));
    }

    #[test]
    fn clips_are_one_sample_each() {
        let data = gen_clip_direction_task(3, 4, 0).unwrap();
        let s = make_samples(&data.train, &data.meta, Readout::ClipClass, &GsgConfig::default(), 32, 0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|x| x.sample.len() == 4 && x.targets.rows() == 1));
    }

    #[test]
    fn vertex_and_edge_targets_concatenate() {
        let g = |n: usize| {
            Graph::undirected(vec![vec![1.0]; n], &[(0, 1)])
                .with_label(Label::VertexClasses(vec![1; n]))
        };
        let t = targets_for(Readout::VertexClass, &[g(2), g(3)], None).unwrap();
        assert_eq!(t, Targets::Classes(vec![1; 5]));
        assert!(targets_for(Readout::EdgeClass, &[g(2)], None).is_err());
    }

    #[test]
    fn inspection_counts_edges() {
        let data = gen_sum_regression_task(10, 1).unwrap();
        let r = inspect_gsg(&data.train, &data.meta, &GsgConfig::default(), 5, 0).unwrap();
        assert_eq!(r.samples.len(), 2);
        // 5 GIG vertices, k = 4: every ordered pair is present
        assert!(r.samples.iter().all(|s| s.gig_edges == 20 && s.proxy_edges_in == vec![1; 5]));
        assert_eq!(r.gig_degree_histogram, BTreeMap::from([(4, 10)]));
        assert_eq!(r.samples[0].complexity_estimate, estimate_gsg_complexity(5, 5, 1));
    }
}
