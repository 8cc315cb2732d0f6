//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod gradcheck;
mod params;
mod tape;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, TensorCheck};
pub use params::{BoundParams, ParamStore};
pub use tape::{Axis, ElementwiseOp, Gradients, ReduceOp, Tape, Var};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::error::Error;
    use crate::rng::GigRng;
    use crate::tensor::Tensor;

    fn random(shape: &[usize], rng: &mut GigRng, scale: f64) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform_range(-scale, scale)).collect()).unwrap()
    }

    /// Independent central-difference gradient of `f` at `x`.
    fn numeric_grad(f: impl Fn(&Tensor) -> f64, x: &Tensor) -> Vec<f64> {
        let mut probe = x.clone();
        (0..x.len())
            .map(|i| {
                let theta = x.data()[i];
                let h = 1e-6 * theta.abs().max(1.0);
                probe.data_mut()[i] = theta + h;
                let up = f(&probe);
                probe.data_mut()[i] = theta - h;
                let down = f(&probe);
                probe.data_mut()[i] = theta;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    /// Gradient of `f` w.r.t. its first argument via the tape.
    fn tape_grad(f: impl Fn(&mut Tape, Var) -> Var, x: &Tensor) -> (f64, Vec<f64>) {
        let mut tape = Tape::new();
        let v = tape.param(x);
        let out = f(&mut tape, v);
        let value = tape.value(out).unwrap()[0];
        let grads = tape.backward(out).unwrap();
        (value, grads.get(v).unwrap().to_vec())
    }

    fn tape_value(f: impl Fn(&mut Tape, Var) -> Var, x: &Tensor) -> f64 {
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let out = f(&mut tape, v);
        tape.value(out).unwrap()[0]
    }

    fn assert_matches_fd(f: impl Fn(&mut Tape, Var) -> Var, x: &Tensor, tol: f64) {
        let (_, analytic) = tape_grad(&f, x);
        let numeric = numeric_grad(|t| tape_value(&f, t), x);
        for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
            let err = relative_error(*a, *n);
            assert!(err <= tol, "element {i}: analytic {a} numeric {n} rel err {err}");
        }
    }

    #[test]
    fn matmul_identity_and_hand_values() {
        let mut tape = Tape::new();
        let eye = tape.constant(Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap());
        let b = tape.constant(Tensor::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap());
        let c = tape.matmul(eye, b).unwrap();
        assert_eq!(tape.value(c).unwrap(), &[5.0, 6.0, 7.0, 8.0]);

        let a = tape.constant(Tensor::row(&[1.0, 2.0]));
        let b = tape.constant(Tensor::from_rows(&[[3.0], [4.0]]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).unwrap(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        match tape.matmul(a, b) {
            Err(Error::Shape { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn matmul_sum_gradient_is_row_sums_of_b() {
        let mut rng = GigRng::new(1);
        let a = random(&[3, 4], &mut rng, 2.0);
        let b = random(&[4, 2], &mut rng, 2.0);
        let bc = b.clone();
        let f = move |t: &mut Tape, x: Var| {
            let bv = t.constant(bc.clone());
            let c = t.matmul(x, bv).unwrap();
            t.sum(c, Axis::All).unwrap()
        };
        let (_, g) = tape_grad(&f, &a);
        // d sum(AB)/dA[i,k] = sum_j B[k,j]
        for i in 0..3 {
            for k in 0..4 {
                let expect: f64 = b.row_slice(k).iter().sum();
                assert!((g[i * 4 + k] - expect).abs() < 1e-12);
            }
        }
        let numeric = numeric_grad(|t| tape_value(&f, t), &a);
        for (x, y) in g.iter().zip(&numeric) {
            assert!(relative_error(*x, *y) < 1e-6);
        }
    }

    #[test]
    fn matmul_gradient_wrt_right_operand() {
        let mut rng = GigRng::new(2);
        let a = random(&[3, 4], &mut rng, 3.0);
        let w = random(&[3, 2], &mut rng, 1.0);
        let b = random(&[4, 2], &mut rng, 3.0);
        assert_matches_fd(
            |t, x| {
                let av = t.constant(a.clone());
                let wv = t.constant(w.clone());
                let c = t.matmul(av, x).unwrap();
                let c = t.mul(c, wv).unwrap();
                t.sum(c, Axis::All).unwrap()
            },
            &b,
            1e-6,
        );
    }

    #[test]
    fn elementwise_values() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(z).unwrap();
        assert_eq!(tape.value(s).unwrap(), &[0.5]);
        let x = tape.constant(Tensor::row(&[-3.0, 3.0]));
        let r = tape.relu(x).unwrap();
        assert_eq!(tape.value(r).unwrap(), &[0.0, 3.0]);
        let big = tape.constant(Tensor::row(&[-800.0, 800.0]));
        let s = tape.sigmoid(big).unwrap();
        assert_eq!(tape.value(s).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn binary_ops_reject_mismatched_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[3, 2]));
        for op in [ElementwiseOp::Add, ElementwiseOp::Sub, ElementwiseOp::Mul, ElementwiseOp::Div] {
            assert!(matches!(tape.elementwise(op, a, Some(b)), Err(Error::Shape { .. })));
        }
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let (_, g) = tape_grad(
            |t, x| {
                let r = t.relu(x).unwrap();
                t.sum(r, Axis::All).unwrap()
            },
            &Tensor::row(&[0.0, 1.0, -1.0]),
        );
        assert_eq!(g, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn mul_gradient_is_other_operand() {
        let mut rng = GigRng::new(3);
        let a = random(&[2, 3], &mut rng, 5.0);
        let b = random(&[2, 3], &mut rng, 5.0);
        let bc = b.clone();
        let f = move |t: &mut Tape, x: Var| {
            let bv = t.constant(bc.clone());
            let m = t.mul(x, bv).unwrap();
            t.sum(m, Axis::All).unwrap()
        };
        let (_, g) = tape_grad(&f, &a);
        assert_eq!(g, b.data());
        assert_matches_fd(f, &a, 1e-6);
    }

    #[test]
    fn every_elementwise_op_matches_finite_differences() {
        let mut rng = GigRng::new(4);
        // keep away from the kinks of relu/abs and the pole of div
        let mut x = random(&[2, 3], &mut rng, 10.0);
        x.data_mut().iter_mut().for_each(|v| {
            if v.abs() < 0.5 {
                *v += 1.0
            }
        });
        let y = random(&[2, 3], &mut rng, 10.0);
        let w = random(&[2, 3], &mut rng, 1.0);
        let ops = [
            ElementwiseOp::Add,
            ElementwiseOp::Sub,
            ElementwiseOp::Mul,
            ElementwiseOp::Div,
            ElementwiseOp::Sigmoid,
            ElementwiseOp::Relu,
            ElementwiseOp::Abs,
            ElementwiseOp::Scale(-1.7),
            ElementwiseOp::Shift(0.3),
        ];
        for op in ops {
            let binary = matches!(
                op,
                ElementwiseOp::Add | ElementwiseOp::Sub | ElementwiseOp::Mul | ElementwiseOp::Div
            );
            // differentiate w.r.t. each operand in turn
            for wrt_rhs in [false, true] {
                if wrt_rhs && !binary {
                    continue;
                }
                let (first, second) = if wrt_rhs { (y.clone(), x.clone()) } else { (x.clone(), y.clone()) };
                let wc = w.clone();
                let f = move |t: &mut Tape, v: Var| {
                    let other = t.constant(first.clone());
                    let out = if !binary {
                        t.elementwise(op, v, None).unwrap()
                    } else if wrt_rhs {
                        t.elementwise(op, other, Some(v)).unwrap()
                    } else {
                        t.elementwise(op, v, Some(other)).unwrap()
                    };
                    let wv = t.constant(wc.clone());
                    let out = t.mul(out, wv).unwrap();
                    t.sum(out, Axis::All).unwrap()
                };
                assert_matches_fd(f, &second, 1e-6);
            }
        }
    }

    #[test]
    fn reduce_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[2.0, 4.0], [6.0, 8.0]]).unwrap());
        let m = tape.mean(x, Axis::Dim(0)).unwrap();
        assert_eq!(tape.value(m).unwrap(), &[4.0, 6.0]);
        assert_eq!(tape.shape(m).unwrap(), &[2]);
        let m1 = tape.mean(x, Axis::Dim(1)).unwrap();
        assert_eq!(tape.value(m1).unwrap(), &[3.0, 7.0]);
        let z = tape.constant(Tensor::zeros(&[3, 3]));
        let s = tape.sum(z, Axis::All).unwrap();
        assert_eq!(tape.value(s).unwrap(), &[0.0]);
        assert!(matches!(tape.sum(x, Axis::Dim(2)), Err(Error::Axis { axis: 2, rank: 2, .. })));
    }

    #[test]
    fn mean_gradient_is_uniform() {
        let mut rng = GigRng::new(5);
        let x = random(&[7], &mut rng, 4.0);
        let f = |t: &mut Tape, v: Var| t.mean(v, Axis::All).unwrap();
        let (_, g) = tape_grad(f, &x);
        for gi in &g {
            assert!((gi - 1.0 / 7.0).abs() < 1e-15);
        }
        assert_matches_fd(f, &x, 1e-6);
    }

    #[test]
    fn axis_reductions_match_finite_differences() {
        let mut rng = GigRng::new(6);
        let x = random(&[2, 3, 4], &mut rng, 3.0);
        for axis in 0..3 {
            for op in [ReduceOp::Sum, ReduceOp::Mean] {
                let mut wrng = GigRng::new(60 + axis as u64);
                let mut shape = vec![2, 3, 4];
                shape.remove(axis);
                let w = random(&shape, &mut wrng, 1.0);
                assert_matches_fd(
                    |t, v| {
                        let r = t.reduce(op, v, Axis::Dim(axis)).unwrap();
                        let wv = t.constant(w.clone());
                        let r = t.mul(r, wv).unwrap();
                        t.sum(r, Axis::All).unwrap()
                    },
                    &x,
                    1e-6,
                );
            }
        }
    }

    #[test]
    fn row_ops_match_finite_differences() {
        let mut rng = GigRng::new(7);
        let x = random(&[4, 3], &mut rng, 3.0);
        let w5 = random(&[5, 3], &mut rng, 1.0);
        let w4 = random(&[4, 3], &mut rng, 1.0);
        let w3 = random(&[3, 3], &mut rng, 1.0);
        let index: Arc<[usize]> = Arc::from(vec![2, 0, 2, 3, 1]);
        let targets: Arc<[usize]> = Arc::from(vec![1, 1, 0, 2]);
        let factors: Arc<[f64]> = Arc::from(vec![0.5, -2.0, 1.5, 3.0]);

        assert_matches_fd(
            |t, v| {
                let g = t.gather_rows(v, &index).unwrap();
                let wv = t.constant(w5.clone());
                let g = t.mul(g, wv).unwrap();
                t.sum(g, Axis::All).unwrap()
            },
            &x,
            1e-6,
        );
        assert_matches_fd(
            |t, v| {
                let s = t.scatter_add_rows(v, &targets, 3).unwrap();
                let wv = t.constant(w3.clone());
                let s = t.mul(s, wv).unwrap();
                t.sum(s, Axis::All).unwrap()
            },
            &x,
            1e-6,
        );
        assert_matches_fd(
            |t, v| {
                let s = t.scale_rows(v, &factors).unwrap();
                let wv = t.constant(w4.clone());
                let s = t.mul(s, wv).unwrap();
                t.sum(s, Axis::All).unwrap()
            },
            &x,
            1e-6,
        );
    }

    #[test]
    fn gather_and_scatter_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        let idx: Arc<[usize]> = Arc::from(vec![1, 1, 0]);
        let g = tape.gather_rows(x, &idx).unwrap();
        assert_eq!(tape.value(g).unwrap(), &[3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
        let s = tape.scatter_add_rows(g, &idx, 3).unwrap();
        assert_eq!(tape.value(s).unwrap(), &[1.0, 2.0, 6.0, 8.0, 0.0, 0.0]);
        let bad: Arc<[usize]> = Arc::from(vec![2]);
        assert!(matches!(tape.gather_rows(x, &bad), Err(Error::RowIndex { index: 2, rows: 2, .. })));
        let empty: Arc<[usize]> = Arc::from(Vec::new());
        let e = tape.gather_rows(x, &empty).unwrap();
        assert_eq!(tape.shape(e).unwrap(), &[0, 2]);
    }

    #[test]
    fn concat_and_layer_norm_match_finite_differences() {
        let mut rng = GigRng::new(8);
        let x = random(&[3, 4], &mut rng, 3.0);
        let other = random(&[3, 2], &mut rng, 3.0);
        let w = random(&[3, 6], &mut rng, 1.0);
        assert_matches_fd(
            |t, v| {
                let o = t.constant(other.clone());
                let c = t.concat_cols(&[o, v]).unwrap();
                let wv = t.constant(w.clone());
                let c = t.mul(c, wv).unwrap();
                t.sum(c, Axis::All).unwrap()
            },
            &x,
            1e-6,
        );

        let gain = random(&[1, 4], &mut rng, 2.0);
        let bias = random(&[1, 4], &mut rng, 2.0);
        let w = random(&[3, 4], &mut rng, 1.0);
        let ln = |t: &mut Tape, xv: Var, gv: Var, bv: Var| {
            let y = t.layer_norm_rows(xv, gv, bv, 1e-5).unwrap();
            let wv = t.constant(w.clone());
            let y = t.mul(y, wv).unwrap();
            t.sum(y, Axis::All).unwrap()
        };
        assert_matches_fd(
            |t, v| {
                let g = t.constant(gain.clone());
                let b = t.constant(bias.clone());
                ln(t, v, g, b)
            },
            &x,
            1e-6,
        );
        assert_matches_fd(
            |t, v| {
                let xv = t.constant(x.clone());
                let b = t.constant(bias.clone());
                ln(t, xv, v, b)
            },
            &gain,
            1e-6,
        );
        assert_matches_fd(
            |t, v| {
                let xv = t.constant(x.clone());
                let g = t.constant(gain.clone());
                ln(t, xv, g, v)
            },
            &bias,
            1e-6,
        );
    }

    #[test]
    fn layer_norm_rows_are_standardised() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[1.0, 2.0, 3.0, 4.0], [-5.0, 0.0, 5.0, 10.0]]).unwrap());
        let g = tape.constant(Tensor::filled(&[1, 4], 1.0));
        let b = tape.constant(Tensor::zeros(&[1, 4]));
        let y = tape.layer_norm_rows(x, g, b, 0.0).unwrap();
        let y = tape.tensor(y).unwrap();
        for r in 0..2 {
            let row = y.row_slice(r);
            let mean: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = GigRng::new(9);
        let logits = random(&[4, 3], &mut rng, 3.0);
        assert_matches_fd(|t, v| t.cross_entropy(v, &[0, 2, 1, 2]).unwrap(), &logits, 1e-6);
    }

    #[test]
    fn backward_examples() {
        let w = Tensor::row(&[0.3, -1.0, 2.0, 4.0, 5.0]);
        let (_, g) = tape_grad(|t, v| t.sum(v, Axis::All).unwrap(), &w);
        assert_eq!(g, vec![1.0; 5]);

        let w = Tensor::row(&[1.0, 2.0, 3.0]);
        let (_, g) = tape_grad(
            |t, v| {
                let sq = t.mul(v, v).unwrap();
                t.sum(sq, Axis::All).unwrap()
            },
            &w,
        );
        assert_eq!(g, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::new();
        let v = tape.param(&Tensor::row(&[1.0, 2.0]));
        assert!(matches!(tape.backward(v), Err(Error::NonScalarLoss(_))));

        let mut other = Tape::new();
        let foreign = other.param(&Tensor::scalar(1.0));
        let tape = Tape::new();
        assert!(matches!(tape.backward(foreign), Err(Error::ForeignVar)));
    }

    #[test]
    fn unreached_parameters_get_zero_gradients() {
        let mut tape = Tape::new();
        let used = tape.param(&Tensor::row(&[1.0, 2.0]));
        let unused = tape.param(&Tensor::row(&[3.0, 4.0, 5.0]));
        let loss = tape.sum(used, Axis::All).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(unused).unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_is_linear_in_sub_losses() {
        let mut rng = GigRng::new(10);
        let x = random(&[3, 3], &mut rng, 2.0);
        let w = random(&[3, 3], &mut rng, 2.0);
        let part_a = |t: &mut Tape, v: Var| {
            let s = t.sigmoid(v).unwrap();
            t.sum(s, Axis::All).unwrap()
        };
        let part_b = |t: &mut Tape, v: Var| {
            let wv = t.constant(w.clone());
            let m = t.matmul(v, wv).unwrap();
            let r = t.relu(m).unwrap();
            t.mean(r, Axis::All).unwrap()
        };
        let (_, ga) = tape_grad(part_a, &x);
        let (_, gb) = tape_grad(part_b, &x);
        let (_, gab) = tape_grad(
            |t, v| {
                let a = part_a(t, v);
                let b = part_b(t, v);
                t.add(a, b).unwrap()
            },
            &x,
        );
        for i in 0..9 {
            assert!((gab[i] - (ga[i] + gb[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut rng = GigRng::new(12);
        let x = random(&[4, 4], &mut rng, 2.0);
        let f = |t: &mut Tape, v: Var| {
            let m = t.matmul(v, v).unwrap();
            let s = t.sigmoid(m).unwrap();
            t.mean(s, Axis::All).unwrap()
        };
        let a = tape_grad(f, &x);
        let b = tape_grad(f, &x);
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert!(a.1.iter().zip(&b.1).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn grad_check_square() {
        let mut params = ParamStore::new();
        params.insert("theta", Tensor::scalar(3.0));
        let report = grad_check(
            |t, p| {
                let v = p.get("theta")?;
                t.mul(v, v)
            },
            &mut params,
            1e-5,
            1e-9,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.max_rel_error() < 1e-9);
        assert_eq!(params.get("theta").unwrap().data(), &[3.0]);
    }

    #[test]
    fn grad_check_sigmoid_linear_layer() {
        let mut rng = GigRng::new(13);
        let input = random(&[5, 4], &mut rng, 2.0);
        let mut params = ParamStore::new();
        params.insert("w", random(&[4, 3], &mut rng, 1.0));
        let report = grad_check(
            |t, p| {
                let x = t.constant(input.clone());
                let y = t.matmul(x, p.get("w")?)?;
                let s = t.sigmoid(y)?;
                t.sum(s, Axis::All)
            },
            &mut params,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn grad_check_flags_a_wrong_gradient() {
        // relu at exactly 0 has analytic subgradient 0 but a one-sided
        // numeric slope of 1/2; the checker has to notice.
        let mut params = ParamStore::new();
        params.insert("x", Tensor::scalar(0.0));
        let report = grad_check(|t, p| t.relu(p.get("x")?), &mut params, 1e-5, 1e-4).unwrap();
        assert!(!report.passed());
    }
}
