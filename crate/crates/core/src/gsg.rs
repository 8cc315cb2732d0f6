//! GIG sample generation: turns a batch of graphs (or the frames of a clip)
//! into a wired [`GigSample`]. Runs once per sample, before training.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{similarity, validate_graph, GigEdge, GigSample, Graph, Metric, ProxyEdge};
use crate::rng::GigRng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyInit {
    #[default]
    Mean,
    RandomVertex,
    MaxL2,
    MinL2,
}

impl FromStr for ProxyInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "random_vertex" => Ok(Self::RandomVertex),
            "max_l2" => Ok(Self::MaxL2),
            "min_l2" => Ok(Self::MinL2),
            _ => Err(Error::Unknown {
                kind: "proxy init",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for ProxyInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::RandomVertex => "random_vertex",
            Self::MaxL2 => "max_l2",
            Self::MinL2 => "min_l2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsgConfig {
    pub rho_proxy: f64,
    pub k_gig: usize,
    pub similar_fraction: f64,
    pub metric: Metric,
    pub proxy_init: ProxyInit,
}

impl Default for GsgConfig {
    fn default() -> Self {
        Self {
            rho_proxy: 0.10,
            k_gig: 8,
            similar_fraction: 0.5,
            metric: Metric::Cosine,
            proxy_init: ProxyInit::Mean,
        }
    }
}

impl GsgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_proxy > 0.0 && self.rho_proxy <= 1.0) {
            return Err(Error::Config(format!("rho_proxy must be in (0, 1], got {}", self.rho_proxy)));
        }
        if self.k_gig == 0 {
            return Err(Error::Config("k_gig must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.similar_fraction) {
            return Err(Error::Config(format!(
                "similar_fraction must be in [0, 1], got {}",
                self.similar_fraction
            )));
        }
        Ok(())
    }

    /// Proxy edges per direction for a graph of `n` vertices.
    pub fn proxy_edge_count(&self, n: usize) -> usize {
        // The slack keeps products like 0.1 * 30 = 3.0000000000000004 from
        // rounding up to an extra edge.
        let m = (self.rho_proxy * n as f64 - 1e-9).ceil().max(1.0) as usize;
        m.min(n)
    }
}

pub fn init_local_proxy(g: &Graph, mode: ProxyInit, seed: u64) -> Result<Vec<f64>> {
    let vs = &g.vertex_features;
    if vs.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
    Ok(match mode {
        ProxyInit::Mean => {
            let mut acc = vec![0.0; g.vertex_dim()];
            for v in vs {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
            }
            let n = vs.len() as f64;
            acc.iter().map(|a| a / n).collect()
        }
        ProxyInit::RandomVertex => vs[GigRng::new(seed).below(vs.len())].clone(),
        // first index wins on ties
        ProxyInit::MaxL2 => vs
            .iter()
            .reduce(|best, v| if norm(v) > norm(best) { v } else { best })
            .unwrap()
            .clone(),
        ProxyInit::MinL2 => vs
            .iter()
            .reduce(|best, v| if norm(v) < norm(best) { v } else { best })
            .unwrap()
            .clone(),
    })
}

/// Indices `0..sims.len()` ordered by descending similarity, ties by index.
fn rank_most_similar(sims: &[(usize, f64)]) -> Vec<usize> {
    let mut order = sims.to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(i, _)| i).collect()
}

/// Indices ordered by ascending similarity, ties by index.
fn rank_least_similar(sims: &[(usize, f64)]) -> Vec<usize> {
    let mut order = sims.to_vec();
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    order.into_iter().map(|(i, _)| i).collect()
}

/// Inbound edges from the `m` vertices least similar to `p_l`, outbound edges
/// to the `m` most similar. The two sets may overlap when `2m > N`.
pub fn build_proxy_edges(
    g: &Graph,
    p_l: &[f64],
    cfg: &GsgConfig,
    edge_dim: usize,
) -> Result<(Vec<ProxyEdge>, Vec<ProxyEdge>)> {
    let sims = g
        .vertex_features
        .iter()
        .enumerate()
        .map(|(i, v)| Ok((i, similarity(v, p_l, cfg.metric)?)))
        .collect::<Result<Vec<_>>>()?;
    let m = cfg.proxy_edge_count(g.num_vertices());
    let edge = |vertex| ProxyEdge {
        vertex,
        feature: vec![0.0; edge_dim],
    };
    let inbound = rank_least_similar(&sims).into_iter().take(m).map(edge).collect();
    let outbound = rank_most_similar(&sims).into_iter().take(m).map(edge).collect();
    Ok((inbound, outbound))
}

/// The other GIG vertices each GIG vertex picks as neighbours: the
/// `round(similar_fraction * k)` most similar local proxies followed by the
/// remaining least similar ones, with `k = min(k_gig, I - 1)`.
pub fn select_gig_neighbors(local_proxies: &[Vec<f64>], cfg: &GsgConfig) -> Result<Vec<Vec<usize>>> {
    let i_count = local_proxies.len();
    let k = cfg.k_gig.min(i_count.saturating_sub(1));
    let n_similar = (cfg.similar_fraction * k as f64).round() as usize;
    let n_dissimilar = k - n_similar;
    let mut picks = Vec::with_capacity(i_count);
    for (i, p) in local_proxies.iter().enumerate() {
        let sims = local_proxies
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, q)| Ok((j, similarity(p, q, cfg.metric)?)))
            .collect::<Result<Vec<_>>>()?;
        let most = rank_most_similar(&sims);
        // most and least come from opposite ends of one ranking, and
        // n_similar + n_dissimilar <= I - 1, so the two sets are disjoint
        let mut chosen: Vec<usize> = most[..n_similar].to_vec();
        chosen.extend(most.iter().rev().take(n_dissimilar));
        picks.push(chosen);
    }
    Ok(picks)
}

/// Directed GIG edge pairs for every selection, deduplicated and sorted by
/// `(src, dst)`.
pub fn build_gig_edges(local_proxies: &[Vec<f64>], cfg: &GsgConfig, edge_dim: usize) -> Result<Vec<GigEdge>> {
    let mut pairs = BTreeSet::new();
    for (i, chosen) in select_gig_neighbors(local_proxies, cfg)?.into_iter().enumerate() {
        for j in chosen {
            pairs.insert((i, j));
            pairs.insert((j, i));
        }
    }
    Ok(pairs
        .into_iter()
        .map(|(src, dst)| GigEdge {
            src,
            dst,
            feature: vec![0.0; edge_dim],
        })
        .collect())
}

pub fn generate_gig_sample(batch: &[Graph], cfg: &GsgConfig, seed: u64) -> Result<GigSample> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    for g in batch {
        validate_graph(g, false)?;
    }
    let dv = batch[0].vertex_dim();
    if let Some(g) = batch.iter().find(|g| g.vertex_dim() != dv) {
        return Err(Error::InvalidSample(format!(
            "graphs in one sample disagree on vertex feature width ({dv} vs {})",
            g.vertex_dim()
        )));
    }
    let edge_dim = batch.iter().map(Graph::edge_dim).max().unwrap_or(0);
    let rng = GigRng::new(seed);
    let local_proxies = batch
        .iter()
        .enumerate()
        .map(|(i, g)| init_local_proxy(g, cfg.proxy_init, rng.stream(i as u64).next_u64()))
        .collect::<Result<Vec<_>>>()?;
    let mut proxy_edges_in = Vec::with_capacity(batch.len());
    let mut proxy_edges_out = Vec::with_capacity(batch.len());
    for (g, p) in batch.iter().zip(&local_proxies) {
        let (pin, pout) = build_proxy_edges(g, p, cfg, edge_dim)?;
        proxy_edges_in.push(pin);
        proxy_edges_out.push(pout);
    }
    let gig_edges = build_gig_edges(&local_proxies, cfg, edge_dim)?;
    Ok(GigSample {
        gig_vertices: batch.to_vec(),
        global_proxies: vec![vec![0.0; dv]; batch.len()],
        local_proxies,
        proxy_edges_in,
        proxy_edges_out,
        gig_edges,
    })
}

/// Dominant-term operation count of GIG sample generation:
/// `I·max_vs·n` for the proxy wiring plus `I²·n` for the GIG wiring.
pub fn estimate_gsg_complexity(i: u64, max_vs: u64, n: u64) -> u128 {
    let (i, max_vs, n) = (i as u128, max_vs as u128, n as u128);
    i * max_vs * n + i * i * n
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn cfg() -> GsgConfig {
        GsgConfig::default()
    }

    fn random_batch(rng: &mut GigRng, count: usize, max_n: usize, dv: usize) -> Vec<Graph> {
        (0..count)
            .map(|_| {
                let n = 1 + rng.below(max_n);
                let feats = (0..n).map(|_| (0..dv).map(|_| rng.normal(0.0, 1.0)).collect()).collect();
                let mut pairs = Vec::new();
                for a in 0..n {
                    for b in a + 1..n {
                        if rng.bernoulli(0.3) {
                            pairs.push((a, b));
                        }
                    }
                }
                Graph::undirected(feats, &pairs)
            })
            .collect()
    }

    #[test]
    fn mean_proxy() {
        let g = Graph::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![]);
        assert_eq!(init_local_proxy(&g, ProxyInit::Mean, 0).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn single_vertex_proxy_is_that_vertex() {
        let g = Graph::new(vec![vec![0.5, -1.5]], vec![]);
        for mode in [ProxyInit::Mean, ProxyInit::RandomVertex, ProxyInit::MaxL2, ProxyInit::MinL2] {
            assert_eq!(init_local_proxy(&g, mode, 9).unwrap(), vec![0.5, -1.5]);
        }
    }

    #[test]
    fn norm_extremes() {
        let g = Graph::new(vec![vec![3.0, 4.0], vec![1.0, 1.0]], vec![]);
        assert_eq!(init_local_proxy(&g, ProxyInit::MaxL2, 0).unwrap(), vec![3.0, 4.0]);
        assert_eq!(init_local_proxy(&g, ProxyInit::MinL2, 0).unwrap(), vec![1.0, 1.0]);
        let tie = Graph::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![]);
        assert_eq!(init_local_proxy(&tie, ProxyInit::MaxL2, 0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn empty_graph_has_no_proxy() {
        assert!(matches!(
            init_local_proxy(&Graph::default(), ProxyInit::Mean, 0),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn random_vertex_is_seeded() {
        let g = Graph::new((0..10).map(|i| vec![i as f64]).collect(), vec![]);
        let a = init_local_proxy(&g, ProxyInit::RandomVertex, 5).unwrap();
        assert_eq!(a, init_local_proxy(&g, ProxyInit::RandomVertex, 5).unwrap());
        assert!(g.vertex_features.contains(&a));
    }

    #[test]
    fn proxy_edge_counts() {
        let c = cfg();
        assert_eq!(c.proxy_edge_count(23), 3);
        assert_eq!(c.proxy_edge_count(1), 1);
        assert_eq!(c.proxy_edge_count(30), 3);
        assert_eq!(c.proxy_edge_count(31), 4);
        let all = GsgConfig { rho_proxy: 1.0, ..cfg() };
        assert_eq!(all.proxy_edge_count(7), 7);
    }

    #[test]
    fn single_vertex_wires_both_ways_to_it() {
        let g = Graph::new(vec![vec![1.0]], vec![]);
        let (pin, pout) = build_proxy_edges(&g, &[1.0], &cfg(), 0).unwrap();
        assert_eq!(pin, vec![ProxyEdge { vertex: 0, feature: vec![] }]);
        assert_eq!(pout, pin);
    }

    #[test]
    fn proxy_edges_pick_least_and_most_similar() {
        let g = Graph::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]], vec![]);
        let c = GsgConfig { rho_proxy: 0.34, ..cfg() };
        let (pin, pout) = build_proxy_edges(&g, &[1.0, 0.0], &c, 2).unwrap();
        // ceil(0.34 * 3) = 2: the extreme vertex first, then the orthogonal one
        assert_eq!(pin.iter().map(|e| e.vertex).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(pout.iter().map(|e| e.vertex).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(pin[0].feature, vec![0.0, 0.0]);
    }

    #[test]
    fn three_proxies_form_a_complete_graph() {
        let proxies = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let edges = build_gig_edges(&proxies, &cfg(), 0).unwrap();
        let pairs: Vec<_> = edges.iter().map(|e| (e.src, e.dst)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]);
    }

    #[test]
    fn single_proxy_has_no_gig_edges() {
        assert!(build_gig_edges(&[vec![1.0]], &cfg(), 0).unwrap().is_empty());
    }

    #[test]
    fn five_proxies_pick_two_nearest_and_two_farthest() {
        // angles spread unevenly so every cosine is distinct
        let angles = [0.0f64, 0.3, 1.1, 2.0, 2.9];
        let proxies: Vec<Vec<f64>> = angles.iter().map(|a| vec![a.cos(), a.sin()]).collect();
        let c = GsgConfig { k_gig: 4, ..cfg() };
        let picks = select_gig_neighbors(&proxies, &c).unwrap();
        for (i, chosen) in picks.iter().enumerate() {
            // brute force: sort the others by angular distance
            let mut others: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                let da = (angles[a] - angles[i]).abs();
                let db = (angles[b] - angles[i]).abs();
                da.partial_cmp(&db).unwrap()
            });
            let mut expected = vec![others[0], others[1], others[3], others[2]];
            let mut got = chosen.clone();
            expected.sort();
            got.sort();
            assert_eq!(got, expected, "GIG vertex {i}");
        }
    }

    #[test]
    fn identical_single_vertex_graphs() {
        let batch = vec![Graph::new(vec![vec![0.7, 0.2]], vec![]); 3];
        let s = generate_gig_sample(&batch, &cfg(), 0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.local_proxies.iter().all(|p| p == &vec![0.7, 0.2]));
        assert_eq!(s.gig_edges.len(), 6);
        assert!(s.global_proxies.iter().flatten().all(|&x| x == 0.0));
        s.validate().unwrap();
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(matches!(generate_gig_sample(&[], &cfg(), 0), Err(Error::EmptyBatch)));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let batch = vec![Graph::new(vec![vec![1.0]], vec![])];
        for bad in [
            GsgConfig { rho_proxy: 0.0, ..cfg() },
            GsgConfig { rho_proxy: 1.5, ..cfg() },
            GsgConfig { k_gig: 0, ..cfg() },
            GsgConfig { similar_fraction: -0.1, ..cfg() },
        ] {
            assert!(matches!(generate_gig_sample(&batch, &bad, 0), Err(Error::Config(_))));
        }
    }

    #[test]
    fn thirty_two_graphs_recount() {
        let mut rng = GigRng::new(3);
        let batch = random_batch(&mut rng, 32, 40, 5);
        let s = generate_gig_sample(&batch, &cfg(), 1).unwrap();
        for (g, (pin, pout)) in batch.iter().zip(s.proxy_edges_in.iter().zip(&s.proxy_edges_out)) {
            let m = g.num_vertices().div_ceil(10);
            assert_eq!(pin.len(), m);
            assert_eq!(pout.len(), m);
        }
        let picks = select_gig_neighbors(&s.local_proxies, &cfg()).unwrap();
        assert!(picks.iter().all(|p| p.len() == 8));
        // every directed pair must trace back to a pick in one direction
        for e in &s.gig_edges {
            assert!(picks[e.src].contains(&e.dst) || picks[e.dst].contains(&e.src));
        }
        let mut recount = [0usize; 32];
        for e in &s.gig_edges {
            recount[e.dst] += 1;
        }
        assert_eq!(recount.to_vec(), s.gig_degrees());
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(estimate_gsg_complexity(4, 5, 8), 288);
        assert_eq!(estimate_gsg_complexity(1, 1, 1), 2);
        assert!(estimate_gsg_complexity(20, 5, 8) > 2 * estimate_gsg_complexity(10, 5, 8));
    }

    proptest! {
        #[test]
        fn generated_samples_hold_their_invariants(seed in any::<u64>(), count in 1usize..12) {
            let mut rng = GigRng::new(seed);
            let batch = random_batch(&mut rng, count, 15, 3);
            let c = cfg();
            let s = generate_gig_sample(&batch, &c, seed).unwrap();
            s.validate().unwrap();
            for (k, g) in batch.iter().enumerate() {
                let m = g.num_vertices().div_ceil(10);
                prop_assert_eq!(s.proxy_edges_in[k].len(), m.max(1));
                prop_assert_eq!(s.proxy_edges_out[k].len(), m.max(1));
                let n = g.num_vertices() as f64;
                for d in 0..3 {
                    let mean = g.vertex_features.iter().map(|v| v[d]).sum::<f64>() / n;
                    prop_assert!((s.local_proxies[k][d] - mean).abs() <= 1e-12);
                }
            }
            prop_assert!(s.global_proxies.iter().flatten().all(|&x| x == 0.0));
            prop_assert!(s.gig_edges.iter().all(|e| e.feature.is_empty()));
            let pairs: BTreeSet<_> = s.gig_edges.iter().map(|e| (e.src, e.dst)).collect();
            for &(a, b) in &pairs {
                prop_assert!(a != b);
                prop_assert!(pairs.contains(&(b, a)));
            }
            let cap = c.k_gig.min(count - 1);
            for p in select_gig_neighbors(&s.local_proxies, &c).unwrap() {
                prop_assert!(p.len() <= cap);
            }
            prop_assert_eq!(&s, &generate_gig_sample(&batch, &c, seed).unwrap());
        }

        #[test]
        fn batch_order_permutes_the_sample(seed in any::<u64>(), count in 2usize..10) {
            let mut rng = GigRng::new(seed);
            let batch = random_batch(&mut rng, count, 8, 4);
            let mut perm: Vec<usize> = (0..count).collect();
            rng.shuffle(&mut perm);
            let shuffled: Vec<Graph> = perm.iter().map(|&p| batch[p].clone()).collect();
            let c = cfg();
            let a = generate_gig_sample(&batch, &c, 0).unwrap();
            let b = generate_gig_sample(&shuffled, &c, 0).unwrap();
            for (new, &old) in perm.iter().enumerate() {
                prop_assert_eq!(&b.proxy_edges_in[new], &a.proxy_edges_in[old]);
                prop_assert_eq!(&b.proxy_edges_out[new], &a.proxy_edges_out[old]);
                for (x, y) in b.local_proxies[new].iter().zip(&a.local_proxies[old]) {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
            }
            let mapped: BTreeSet<_> = b.gig_edges.iter().map(|e| (perm[e.src], perm[e.dst])).collect();
            let orig: BTreeSet<_> = a.gig_edges.iter().map(|e| (e.src, e.dst)).collect();
            prop_assert_eq!(mapped, orig);
        }

        #[test]
        fn complexity_matches_the_formula(i in 1u64..10_000, v in 1u64..10_000, n in 1u64..1_000) {
            let expect = (i * v * n + i * i * n) as u128;
            prop_assert_eq!(estimate_gsg_complexity(i, v, n), expect);
        }
    }
}
