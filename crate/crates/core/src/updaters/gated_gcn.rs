use super::{Init, Messages, ParamSpec, Scope, Updater, UpdaterOptions};
use crate::autodiff::{Tape, Var};
use crate::error::Result;

const LN_EPS: f64 = 1e-5;
const GATE_EPS: f64 = 1e-6;

/// Residual gated graph convolution with explicit edge features.
///
/// Edges: `ê = e + relu(norm(src·W_A + dst·W_B + e·W_C))`.
/// Vertices: `v + relu(norm(v·W_U + Σ η ⊙ nb·W_V / (Σ η + 1e-6)))` with
/// gates `η = σ(ê)`; `norm` is per-row layer normalisation.
#[derive(Clone, Copy, Debug, Default)]
pub struct GatedGcn {
    layer_norm: bool,
}

impl GatedGcn {
    pub fn new(options: UpdaterOptions) -> Self {
        Self {
            layer_norm: options.layer_norm,
        }
    }

    fn norm(&self, tape: &mut Tape, p: Scope<'_>, x: Var, which: &str) -> Result<Var> {
        if !self.layer_norm {
            return Ok(x);
        }
        let gain = p.get(&format!("ln_{which}_gain"))?;
        let bias = p.get(&format!("ln_{which}_bias"))?;
        tape.layer_norm_rows(x, gain, bias, LN_EPS)
    }
}

impl Updater for GatedGcn {
    fn name(&self) -> &'static str {
        "gatedgcn"
    }

    fn param_specs(&self, d: usize) -> Vec<ParamSpec> {
        let mut specs: Vec<ParamSpec> = ["W_A", "W_B", "W_C", "W_U", "W_V"]
            .into_iter()
            .map(|n| ParamSpec::new(n, vec![d, d], Init::Xavier))
            .collect();
        if self.layer_norm {
            specs.extend([
                ParamSpec::new("ln_e_gain", vec![1, d], Init::Ones),
                ParamSpec::new("ln_e_bias", vec![1, d], Init::Zeros),
                ParamSpec::new("ln_v_gain", vec![1, d], Init::Ones),
                ParamSpec::new("ln_v_bias", vec![1, d], Init::Zeros),
            ]);
        }
        specs
    }

    fn edge_update(&self, tape: &mut Tape, p: Scope<'_>, e: Var, src: Var, dst: Var) -> Result<Var> {
        let a = tape.matmul(src, p.get("W_A")?)?;
        let b = tape.matmul(dst, p.get("W_B")?)?;
        let c = tape.matmul(e, p.get("W_C")?)?;
        let pre = tape.add(a, b)?;
        let pre = tape.add(pre, c)?;
        let pre = self.norm(tape, p, pre, "e")?;
        let act = tape.relu(pre)?;
        tape.add(e, act)
    }

    fn vertex_update(&self, tape: &mut Tape, p: Scope<'_>, v: Var, msgs: &Messages) -> Result<Var> {
        let rows = tape.shape(v)?[0];
        let gates = tape.sigmoid(msgs.edges)?;
        let vals = tape.matmul(msgs.neighbors, p.get("W_V")?)?;
        let gated = tape.mul(gates, vals)?;
        let num = tape.scatter_add_rows(gated, &msgs.targets, rows)?;
        let den = tape.scatter_add_rows(gates, &msgs.targets, rows)?;
        let den = tape.shift(den, GATE_EPS)?;
        let agg = tape.div(num, den)?;
        let own = tape.matmul(v, p.get("W_U")?)?;
        let pre = tape.add(own, agg)?;
        let pre = self.norm(tape, p, pre, "v")?;
        let act = tape.relu(pre)?;
        tape.add(v, act)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::autodiff::{grad_check, ParamStore};
    use crate::rng::GigRng;
    use crate::tensor::Tensor;
    use crate::updaters::init_params;

    fn random(rng: &mut GigRng, rows: usize, cols: usize) -> Tensor {
        Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.normal(0.0, 1.0)).collect()).unwrap()
    }

    fn store_for(u: &GatedGcn, d: usize, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = GigRng::new(seed);
        init_params(&u.param_specs(d), "u", &mut store, &mut rng);
        // perturb norm params away from 1/0 so their gradients are exercised
        for (name, t) in store.iter_mut() {
            if name.contains("ln_") {
                for x in t.data_mut() {
                    *x += rng.normal(0.0, 0.3);
                }
            }
        }
        store
    }

    fn zero_store(u: &GatedGcn, d: usize) -> ParamStore {
        let mut store = ParamStore::new();
        for spec in u.param_specs(d) {
            let n = spec.shape.iter().product();
            let fill = if spec.name.ends_with("gain") { 1.0 } else { 0.0 };
            store.insert(format!("u.{}", spec.name), Tensor::new(spec.shape, vec![fill; n]).unwrap());
        }
        store
    }

    #[test]
    fn zero_weights_keep_the_edge() {
        let u = GatedGcn::new(UpdaterOptions::default());
        let store = zero_store(&u, 3);
        let mut rng = GigRng::new(0);
        let e = random(&mut rng, 2, 3);
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let (ev, s, t) = (tape.leaf(&e), tape.leaf(&random(&mut rng, 2, 3)), tape.leaf(&random(&mut rng, 2, 3)));
        let out = u.edge_update(&mut tape, Scope::new(&bound, "u"), ev, s, t).unwrap();
        assert_eq!(tape.value(out).unwrap(), e.data());
    }

    #[test]
    fn zero_weights_and_no_messages_keep_the_vertex() {
        let u = GatedGcn::new(UpdaterOptions::default());
        let store = zero_store(&u, 3);
        let v = Tensor::new(vec![1, 3], vec![0.5, -2.0, 4.0]).unwrap();
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let vv = tape.leaf(&v);
        let empty = tape.leaf(&Tensor::zeros(&[0, 3]));
        let msgs = Messages {
            edges: empty,
            neighbors: empty,
            targets: Arc::from(Vec::new()),
        };
        let out = u.vertex_update(&mut tape, Scope::new(&bound, "u"), vv, &msgs).unwrap();
        assert_eq!(tape.value(out).unwrap(), v.data());
    }

    #[test]
    fn hand_checked_without_norm() {
        // d = 1: e' = e + relu(a·s + b·t + c·e); v' = v + relu(u·v + Σση·w·nb / (Σση + ε))
        let u = GatedGcn::new(UpdaterOptions { layer_norm: false });
        let mut store = ParamStore::new();
        for (n, w) in [("W_A", 0.5), ("W_B", -1.0), ("W_C", 2.0), ("W_U", 0.25), ("W_V", 3.0)] {
            store.insert(format!("u.{n}"), Tensor::new(vec![1, 1], vec![w]).unwrap());
        }
        let mut tape = Tape::new();
        let bound = store.bind(&mut tape);
        let p = Scope::new(&bound, "u");
        let e = tape.leaf(&Tensor::new(vec![2, 1], vec![0.3, -0.7]).unwrap());
        let s = tape.leaf(&Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap());
        let t = tape.leaf(&Tensor::new(vec![2, 1], vec![0.2, 0.4]).unwrap());
        let ehat = u.edge_update(&mut tape, p, e, s, t).unwrap();
        let want_e = [0.3 + (0.5 * 1.0 - 0.2 + 0.6f64).max(0.0), -0.7 + (1.0 - 0.4 - 1.4f64).max(0.0)];
        assert_eq!(tape.value(ehat).unwrap(), &want_e);

        let v = tape.leaf(&Tensor::new(vec![1, 1], vec![1.5]).unwrap());
        let msgs = Messages {
            edges: ehat,
            neighbors: s,
            targets: Arc::from(vec![0, 0]),
        };
        let out = u.vertex_update(&mut tape, p, v, &msgs).unwrap();
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let (g0, g1) = (sig(want_e[0]), sig(want_e[1]));
        let agg = (g0 * 3.0 * 1.0 + g1 * 3.0 * 2.0) / (g0 + g1 + 1e-6);
        let want = 1.5 + (0.25 * 1.5 + agg).max(0.0);
        assert!((tape.value(out).unwrap()[0] - want).abs() < 1e-14);
    }

    #[test]
    fn edge_weight_gradients_match_finite_differences() {
        let u = GatedGcn::new(UpdaterOptions::default());
        let d = 4;
        let mut store = store_for(&u, d, 2);
        let mut rng = GigRng::new(3);
        let (e, s, t, w) = (
            random(&mut rng, 5, d),
            random(&mut rng, 5, d),
            random(&mut rng, 5, d),
            random(&mut rng, 5, d),
        );
        let report = grad_check(
            |tape, bound| {
                let (ev, sv, tv, wv) = (tape.leaf(&e), tape.leaf(&s), tape.leaf(&t), tape.leaf(&w));
                let out = u.edge_update(tape, Scope::new(bound, "u"), ev, sv, tv)?;
                let weighted = tape.mul(out, wv)?;
                tape.sum(weighted, crate::autodiff::Axis::All)
            },
            &mut store,
            1e-6,
            1e-6,
        )
        .unwrap();
        let wa = report.tensors.iter().find(|c| c.name == "u.W_A").unwrap();
        assert!(wa.passed, "{wa:?}");
        assert!(report.passed(), "{report:?}");
    }

    fn five_messages(rng: &mut GigRng, d: usize) -> (Tensor, Tensor, Tensor, Vec<usize>) {
        let v = random(rng, 3, d);
        let e = random(rng, 5, d);
        let nb = random(rng, 5, d);
        (v, e, nb, vec![0, 2, 0, 1, 0])
    }

    #[test]
    fn vertex_gradients_match_finite_differences() {
        let u = GatedGcn::new(UpdaterOptions::default());
        let d = 3;
        let mut store = store_for(&u, d, 4);
        let mut rng = GigRng::new(5);
        let (v, e, nb, targets) = five_messages(&mut rng, d);
        let w = random(&mut rng, 3, d);
        let targets: Arc<[usize]> = Arc::from(targets);
        let report = grad_check(
            |tape, bound| {
                let msgs = Messages {
                    edges: tape.leaf(&e),
                    neighbors: tape.leaf(&nb),
                    targets: targets.clone(),
                };
                let vv = tape.leaf(&v);
                let out = u.vertex_update(tape, Scope::new(bound, "u"), vv, &msgs)?;
                let wv = tape.leaf(&w);
                let weighted = tape.mul(out, wv)?;
                tape.sum(weighted, crate::autodiff::Axis::All)
            },
            &mut store,
            1e-6,
            1e-6,
        )
        .unwrap();
        // edge-only weights get exact zeros on both sides
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn message_order_does_not_matter() {
        let u = GatedGcn::new(UpdaterOptions::default());
        let d = 4;
        let store = store_for(&u, d, 6);
        let mut rng = GigRng::new(7);
        let (v, e, nb, targets) = five_messages(&mut rng, d);
        let run = |perm: &[usize]| {
            let pick = |t: &Tensor| Tensor::from_rows(&perm.iter().map(|&i| t.row_slice(i).to_vec()).collect::<Vec<_>>()).unwrap();
            let mut tape = Tape::new();
            let bound = store.bind(&mut tape);
            let msgs = Messages {
                edges: tape.leaf(&pick(&e)),
                neighbors: tape.leaf(&pick(&nb)),
                targets: perm.iter().map(|&i| targets[i]).collect(),
            };
            let vv = tape.leaf(&v);
            let out = u.vertex_update(&mut tape, Scope::new(&bound, "u"), vv, &msgs).unwrap();
            tape.value(out).unwrap().to_vec()
        };
        let base = run(&[0, 1, 2, 3, 4]);
        let mut perm = vec![0, 1, 2, 3, 4];
        for _ in 0..10 {
            rng.shuffle(&mut perm);
            let other = run(&perm);
            for (a, b) in base.iter().zip(&other) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
