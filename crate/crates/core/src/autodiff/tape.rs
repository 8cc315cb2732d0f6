//! Reverse-mode tape.
//!
//! Every operation appends a node holding its output value and enough
//! information to push an upstream gradient back to its inputs. Nodes are
//! appended in evaluation order, so the node list is already topologically
//! sorted and `backward` is a single reverse sweep.
//!
//! There is no implicit broadcasting. Binary elementwise ops need identical
//! shapes; row-wise broadcasts go through [`Tape::gather_rows`] or one of the
//! fused row ops.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{numel, Tensor};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Div,
    Sigmoid,
    Relu,
    Abs,
    Scale(f64),
    Shift(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    All,
    Dim(usize),
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    Shift(usize),
    Sigmoid(usize),
    Relu(usize),
    Abs(usize),
    Reduce {
        input: usize,
        axis: Option<usize>,
        mean: bool,
    },
    Reshape(usize),
    GatherRows {
        input: usize,
        index: Arc<[usize]>,
    },
    ScatterAddRows {
        input: usize,
        index: Arc<[usize]>,
    },
    ScaleRows {
        input: usize,
        factors: Arc<[f64]>,
    },
    ConcatCols(Vec<usize>),
    LayerNorm {
        input: usize,
        gain: usize,
        bias: usize,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    CrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// A single-use recording of a forward computation.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

/// Gradients of every `requires_grad` leaf, produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of a leaf recorded with `requires_grad`. Leaves that did not
    /// influence the loss get an all-zero gradient.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        if var.tape != self.tape {
            return None;
        }
        self.grads.get(var.index).and_then(|g| g.as_deref())
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn check_same(op: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::Shape {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        });
    }
    Ok(())
}

fn matrix_dims(op: &'static str, shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [r, c] => Ok((*r, *c)),
        _ => Err(Error::Shape {
            op,
            lhs: shape.to_vec(),
            rhs: vec![],
        }),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Splits a shape around `axis` into (outer, axis length, inner) extents.
fn axis_extents(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = numel(&shape[..axis]);
    let len = shape[axis];
    let inner = numel(&shape[axis + 1..]);
    (outer, len, inner)
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(Error::ForeignVar);
        }
        Ok(v.index)
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node {
            shape,
            data,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    /// Records a leaf; it receives a gradient iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: &Tensor) -> Var {
        self.push(
            tensor.shape().to_vec(),
            tensor.data().to_vec(),
            Op::Leaf,
            tensor.requires_grad(),
        )
    }

    /// Records a leaf that always receives a gradient.
    pub fn param(&mut self, tensor: &Tensor) -> Var {
        self.push(tensor.shape().to_vec(), tensor.data().to_vec(), Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        let shape = tensor.shape().to_vec();
        self.push(shape, tensor.into_data(), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> Result<&[f64]> {
        let i = self.idx(v)?;
        Ok(&self.nodes[i].data)
    }

    pub fn shape(&self, v: Var) -> Result<&[usize]> {
        let i = self.idx(v)?;
        Ok(&self.nodes[i].shape)
    }

    /// Copies a recorded value out as a plain tensor.
    pub fn tensor(&self, v: Var) -> Result<Tensor> {
        let i = self.idx(v)?;
        Tensor::new(self.nodes[i].shape.clone(), self.nodes[i].data.clone())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (m, k) = matrix_dims("matmul", &self.nodes[ia].shape)?;
        let (k2, n) = matrix_dims("matmul", &self.nodes[ib].shape)?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: self.nodes[ia].shape.clone(),
                rhs: self.nodes[ib].shape.clone(),
            });
        }
        let (ad, bd) = (&self.nodes[ia].data, &self.nodes[ib].data);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let x = ad[i * k + p];
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &y) in row.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(vec![m, n], out, Op::MatMul(ia, ib), rg))
    }

    pub fn elementwise(&mut self, op: ElementwiseOp, a: Var, b: Option<Var>) -> Result<Var> {
        use ElementwiseOp::*;
        let ia = self.idx(a)?;
        let binary = |tape: &mut Tape, name: &'static str, f: fn(f64, f64) -> f64| -> Result<(usize, Vec<f64>)> {
            let b = b.ok_or(Error::Shape {
                op: name,
                lhs: tape.nodes[ia].shape.clone(),
                rhs: vec![],
            })?;
            let ib = tape.idx(b)?;
            check_same(name, &tape.nodes[ia].shape, &tape.nodes[ib].shape)?;
            let out = tape.nodes[ia]
                .data
                .iter()
                .zip(&tape.nodes[ib].data)
                .map(|(&x, &y)| f(x, y))
                .collect();
            Ok((ib, out))
        };
        let shape = self.nodes[ia].shape.clone();
        let (out, node_op, rg) = match op {
            Add => {
                let (ib, out) = binary(self, "add", |x, y| x + y)?;
                (out, Op::Add(ia, ib), self.rg(ia) || self.rg(ib))
            }
            Sub => {
                let (ib, out) = binary(self, "sub", |x, y| x - y)?;
                (out, Op::Sub(ia, ib), self.rg(ia) || self.rg(ib))
            }
            Mul => {
                let (ib, out) = binary(self, "mul", |x, y| x * y)?;
                (out, Op::Mul(ia, ib), self.rg(ia) || self.rg(ib))
            }
            Div => {
                let (ib, out) = binary(self, "div", |x, y| x / y)?;
                (out, Op::Div(ia, ib), self.rg(ia) || self.rg(ib))
            }
            Sigmoid => (self.map(ia, sigmoid), Op::Sigmoid(ia), self.rg(ia)),
            Relu => (self.map(ia, |x| x.max(0.0)), Op::Relu(ia), self.rg(ia)),
            Abs => (self.map(ia, f64::abs), Op::Abs(ia), self.rg(ia)),
            Scale(s) => {
                let data = self.nodes[ia].data.iter().map(|x| x * s).collect();
                (data, Op::Scale(ia, s), self.rg(ia))
            }
            Shift(s) => {
                let data = self.nodes[ia].data.iter().map(|x| x + s).collect();
                (data, Op::Shift(ia), self.rg(ia))
            }
        };
        Ok(self.push(shape, out, node_op, rg))
    }

    fn map(&self, i: usize, f: fn(f64) -> f64) -> Vec<f64> {
        self.nodes[i].data.iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Add, a, Some(b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Sub, a, Some(b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Mul, a, Some(b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Div, a, Some(b))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Sigmoid, a, None)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Relu, a, None)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.elementwise(ElementwiseOp::Abs, a, None)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.elementwise(ElementwiseOp::Scale(s), a, None)
    }

    /// Adds a constant to every element.
    pub fn shift(&mut self, a: Var, s: f64) -> Result<Var> {
        self.elementwise(ElementwiseOp::Shift(s), a, None)
    }

    pub fn reduce(&mut self, op: ReduceOp, a: Var, axis: Axis) -> Result<Var> {
        let ia = self.idx(a)?;
        let mean = op == ReduceOp::Mean;
        let shape = self.nodes[ia].shape.clone();
        let data = &self.nodes[ia].data;
        match axis {
            Axis::All => {
                let mut s: f64 = data.iter().sum();
                if mean {
                    s /= data.len() as f64;
                }
                let rg = self.rg(ia);
                Ok(self.push(
                    Vec::new(),
                    vec![s],
                    Op::Reduce {
                        input: ia,
                        axis: None,
                        mean,
                    },
                    rg,
                ))
            }
            Axis::Dim(axis) => {
                if axis >= shape.len() {
                    return Err(Error::Axis {
                        op: "reduce",
                        axis,
                        rank: shape.len(),
                    });
                }
                let (outer, len, inner) = axis_extents(&shape, axis);
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for k in 0..len {
                        let src = &data[(o * len + k) * inner..(o * len + k + 1) * inner];
                        for (dst, x) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                            *dst += x;
                        }
                    }
                }
                if mean && len > 0 {
                    let inv = 1.0 / len as f64;
                    out.iter_mut().for_each(|x| *x *= inv);
                }
                let mut out_shape = shape.clone();
                out_shape.remove(axis);
                let rg = self.rg(ia);
                Ok(self.push(
                    out_shape,
                    out,
                    Op::Reduce {
                        input: ia,
                        axis: Some(axis),
                        mean,
                    },
                    rg,
                ))
            }
        }
    }

    pub fn sum(&mut self, a: Var, axis: Axis) -> Result<Var> {
        self.reduce(ReduceOp::Sum, a, axis)
    }

    pub fn mean(&mut self, a: Var, axis: Axis) -> Result<Var> {
        self.reduce(ReduceOp::Mean, a, axis)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ia = self.idx(a)?;
        if numel(shape) != self.nodes[ia].data.len() {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.nodes[ia].shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        let data = self.nodes[ia].data.clone();
        let rg = self.rg(ia);
        Ok(self.push(shape.to_vec(), data, Op::Reshape(ia), rg))
    }

    /// `out[k, :] = a[index[k], :]`. Repeated indices broadcast a row.
    pub fn gather_rows(&mut self, a: Var, index: &Arc<[usize]>) -> Result<Var> {
        let ia = self.idx(a)?;
        let (rows, cols) = matrix_dims("gather_rows", &self.nodes[ia].shape)?;
        let src = &self.nodes[ia].data;
        let mut out = Vec::with_capacity(index.len() * cols);
        for &r in index.iter() {
            if r >= rows {
                return Err(Error::RowIndex {
                    op: "gather_rows",
                    index: r,
                    rows,
                });
            }
            out.extend_from_slice(&src[r * cols..(r + 1) * cols]);
        }
        let rg = self.rg(ia);
        Ok(self.push(
            vec![index.len(), cols],
            out,
            Op::GatherRows {
                input: ia,
                index: Arc::clone(index),
            },
            rg,
        ))
    }

    /// `out[index[k], :] += a[k, :]` into a zero `[rows × cols]` matrix.
    /// Rows are accumulated in ascending `k`.
    pub fn scatter_add_rows(&mut self, a: Var, index: &Arc<[usize]>, rows: usize) -> Result<Var> {
        let ia = self.idx(a)?;
        let (n, cols) = matrix_dims("scatter_add_rows", &self.nodes[ia].shape)?;
        if n != index.len() {
            return Err(Error::Shape {
                op: "scatter_add_rows",
                lhs: self.nodes[ia].shape.clone(),
                rhs: vec![index.len()],
            });
        }
        let src = &self.nodes[ia].data;
        let mut out = vec![0.0; rows * cols];
        for (k, &r) in index.iter().enumerate() {
            if r >= rows {
                return Err(Error::RowIndex {
                    op: "scatter_add_rows",
                    index: r,
                    rows,
                });
            }
            for (o, x) in out[r * cols..(r + 1) * cols]
                .iter_mut()
                .zip(&src[k * cols..(k + 1) * cols])
            {
                *o += x;
            }
        }
        let rg = self.rg(ia);
        Ok(self.push(
            vec![rows, cols],
            out,
            Op::ScatterAddRows {
                input: ia,
                index: Arc::clone(index),
            },
            rg,
        ))
    }

    /// `out[r, :] = factors[r] * a[r, :]` with constant factors.
    pub fn scale_rows(&mut self, a: Var, factors: &Arc<[f64]>) -> Result<Var> {
        let ia = self.idx(a)?;
        let (rows, cols) = matrix_dims("scale_rows", &self.nodes[ia].shape)?;
        if rows != factors.len() {
            return Err(Error::Shape {
                op: "scale_rows",
                lhs: self.nodes[ia].shape.clone(),
                rhs: vec![factors.len()],
            });
        }
        let src = &self.nodes[ia].data;
        let mut out = Vec::with_capacity(rows * cols);
        for (r, f) in factors.iter().enumerate() {
            out.extend(src[r * cols..(r + 1) * cols].iter().map(|x| x * f));
        }
        let rg = self.rg(ia);
        Ok(self.push(
            vec![rows, cols],
            out,
            Op::ScaleRows {
                input: ia,
                factors: Arc::clone(factors),
            },
            rg,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let idx: Vec<usize> = parts.iter().map(|&v| self.idx(v)).collect::<Result<_>>()?;
        let Some(&first) = idx.first() else {
            return Err(Error::Shape {
                op: "concat_cols",
                lhs: vec![],
                rhs: vec![],
            });
        };
        let (rows, _) = matrix_dims("concat_cols", &self.nodes[first].shape)?;
        let mut widths = Vec::with_capacity(idx.len());
        for &i in &idx {
            let (r, c) = matrix_dims("concat_cols", &self.nodes[i].shape)?;
            if r != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: self.nodes[first].shape.clone(),
                    rhs: self.nodes[i].shape.clone(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&i, &w) in idx.iter().zip(&widths) {
                out.extend_from_slice(&self.nodes[i].data[r * w..(r + 1) * w]);
            }
        }
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(vec![rows, total], out, Op::ConcatCols(idx), rg))
    }

    /// Per-row layer normalisation `gain ⊙ (x − μ)/√(σ² + eps) + bias`, with
    /// `gain` and `bias` of shape `[1 × cols]` shared by every row.
    pub fn layer_norm_rows(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (ix, ig, ib) = (self.idx(x)?, self.idx(gain)?, self.idx(bias)?);
        let (rows, cols) = matrix_dims("layer_norm_rows", &self.nodes[ix].shape)?;
        check_same("layer_norm_rows", &self.nodes[ig].shape, &[1, cols])?;
        check_same("layer_norm_rows", &self.nodes[ib].shape, &[1, cols])?;
        let (xd, g, b) = (
            &self.nodes[ix].data,
            &self.nodes[ig].data,
            &self.nodes[ib].data,
        );
        let mut out = Vec::with_capacity(rows * cols);
        let mut normalized = Vec::with_capacity(rows * cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &xd[r * cols..(r + 1) * cols];
            let mu = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std.push(inv);
            for c in 0..cols {
                let h = (row[c] - mu) * inv;
                normalized.push(h);
                out.push(g[c] * h + b[c]);
            }
        }
        let rg = self.rg(ix) || self.rg(ig) || self.rg(ib);
        Ok(self.push(
            vec![rows, cols],
            out,
            Op::LayerNorm {
                input: ix,
                gain: ig,
                bias: ib,
                normalized,
                inv_std,
            },
            rg,
        ))
    }

    /// Mean softmax cross-entropy of `[n × c]` logits against class targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let il = self.idx(logits)?;
        let (n, c) = matrix_dims("cross_entropy", &self.nodes[il].shape)?;
        if n != targets.len() {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: self.nodes[il].shape.clone(),
                rhs: vec![targets.len()],
            });
        }
        let data = &self.nodes[il].data;
        let mut probs = Vec::with_capacity(n * c);
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= c {
                return Err(Error::TargetOutOfRange { target: t, classes: c });
            }
            let row = &data[r * c..(r + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
            let log_z = z.ln() + max;
            loss += log_z - row[t];
            probs.extend(row.iter().map(|x| (x - log_z).exp()));
        }
        if n > 0 {
            loss /= n as f64;
        }
        let rg = self.rg(il);
        Ok(self.push(
            Vec::new(),
            vec![loss],
            Op::CrossEntropy {
                logits: il,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Runs the reverse sweep from a scalar `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let root = self.idx(loss)?;
        if self.nodes[root].data.len() != 1 {
            return Err(Error::NonScalarLoss(self.nodes[root].shape.clone()));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[root] = Some(vec![1.0]);

        for i in (0..=root).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            push_back(&nodes, i, &g, &mut grads);
        }

        // Keep only leaf gradients; unreached parameter leaves get zeros.
        for (i, node) in nodes.iter().enumerate() {
            let is_param = matches!(node.op, Op::Leaf) && node.requires_grad;
            if !is_param {
                grads[i] = None;
            } else if grads[i].is_none() {
                grads[i] = Some(vec![0.0; node.data.len()]);
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads,
        })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], target: usize, f: impl FnOnce(&mut [f64])) {
    if !nodes[target].requires_grad {
        return;
    }
    let slot = grads[target].get_or_insert_with(|| vec![0.0; nodes[target].data.len()]);
    f(slot);
}

fn push_back(nodes: &[Node], i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let node = &nodes[i];
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = (nodes[*a].shape[0], nodes[*a].shape[1]);
            let n = nodes[*b].shape[1];
            let (ad, bd) = (&nodes[*a].data, &nodes[*b].data);
            accumulate(grads, nodes, *a, |ga| {
                for r in 0..m {
                    let grow = &g[r * n..(r + 1) * n];
                    for p in 0..k {
                        let brow = &bd[p * n..(p + 1) * n];
                        ga[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            });
            accumulate(grads, nodes, *b, |gb| {
                for r in 0..m {
                    let grow = &g[r * n..(r + 1) * n];
                    for p in 0..k {
                        let x = ad[r * k + p];
                        for (o, y) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += x * y;
                        }
                    }
                }
            });
        }
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, |ga| ga.iter_mut().zip(g).for_each(|(o, x)| *o += x));
            accumulate(grads, nodes, *b, |gb| gb.iter_mut().zip(g).for_each(|(o, x)| *o += x));
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, *a, |ga| ga.iter_mut().zip(g).for_each(|(o, x)| *o += x));
            accumulate(grads, nodes, *b, |gb| gb.iter_mut().zip(g).for_each(|(o, x)| *o -= x));
        }
        Op::Mul(a, b) => {
            let (ad, bd) = (&nodes[*a].data, &nodes[*b].data);
            accumulate(grads, nodes, *a, |ga| {
                for ((o, x), y) in ga.iter_mut().zip(g).zip(bd) {
                    *o += x * y;
                }
            });
            accumulate(grads, nodes, *b, |gb| {
                for ((o, x), y) in gb.iter_mut().zip(g).zip(ad) {
                    *o += x * y;
                }
            });
        }
        Op::Div(a, b) => {
            let (ad, bd) = (&nodes[*a].data, &nodes[*b].data);
            accumulate(grads, nodes, *a, |ga| {
                for ((o, x), y) in ga.iter_mut().zip(g).zip(bd) {
                    *o += x / y;
                }
            });
            accumulate(grads, nodes, *b, |gb| {
                for (((o, x), n), d) in gb.iter_mut().zip(g).zip(ad).zip(bd) {
                    *o -= x * n / (d * d);
                }
            });
        }
        Op::Scale(a, s) => {
            accumulate(grads, nodes, *a, |ga| ga.iter_mut().zip(g).for_each(|(o, x)| *o += x * s));
        }
        Op::Shift(a) => {
            accumulate(grads, nodes, *a, |ga| ga.iter_mut().zip(g).for_each(|(o, x)| *o += x));
        }
        Op::Sigmoid(a) => {
            let y = &node.data;
            accumulate(grads, nodes, *a, |ga| {
                for ((o, x), s) in ga.iter_mut().zip(g).zip(y) {
                    *o += x * s * (1.0 - s);
                }
            });
        }
        Op::Relu(a) => {
            let input = &nodes[*a].data;
            accumulate(grads, nodes, *a, |ga| {
                for ((o, x), z) in ga.iter_mut().zip(g).zip(input) {
                    if *z > 0.0 {
                        *o += x;
                    }
                }
            });
        }
        Op::Abs(a) => {
            let input = &nodes[*a].data;
            accumulate(grads, nodes, *a, |ga| {
                for ((o, x), z) in ga.iter_mut().zip(g).zip(input) {
                    if *z > 0.0 {
                        *o += x;
                    } else if *z < 0.0 {
                        *o -= x;
                    }
                }
            });
        }
        Op::Reduce { input, axis, mean } => {
            let in_shape = &nodes[*input].shape;
            match axis {
                None => {
                    let n = nodes[*input].data.len();
                    let v = if *mean { g[0] / n as f64 } else { g[0] };
                    accumulate(grads, nodes, *input, |ga| ga.iter_mut().for_each(|o| *o += v));
                }
                Some(axis) => {
                    let (outer, len, inner) = axis_extents(in_shape, *axis);
                    let w = if *mean && len > 0 { 1.0 / len as f64 } else { 1.0 };
                    accumulate(grads, nodes, *input, |ga| {
                        for o in 0..outer {
                            let gs = &g[o * inner..(o + 1) * inner];
                            for k in 0..len {
                                let dst = &mut ga[(o * len + k) * inner..(o * len + k + 1) * inner];
                                for (d, x) in dst.iter_mut().zip(gs) {
                                    *d += x * w;
                                }
                            }
                        }
                    });
                }
            }
        }
        Op::Reshape(a) => {
            accumulate(grads, nodes, *a, |ga| ga.iter_mut().zip(g).for_each(|(o, x)| *o += x));
        }
        Op::GatherRows { input, index } => {
            let cols = node.shape[1];
            accumulate(grads, nodes, *input, |ga| {
                for (k, &r) in index.iter().enumerate() {
                    for (o, x) in ga[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(&g[k * cols..(k + 1) * cols])
                    {
                        *o += x;
                    }
                }
            });
        }
        Op::ScatterAddRows { input, index } => {
            let cols = node.shape[1];
            accumulate(grads, nodes, *input, |ga| {
                for (k, &r) in index.iter().enumerate() {
                    for (o, x) in ga[k * cols..(k + 1) * cols]
                        .iter_mut()
                        .zip(&g[r * cols..(r + 1) * cols])
                    {
                        *o += x;
                    }
                }
            });
        }
        Op::ScaleRows { input, factors } => {
            let cols = node.shape[1];
            accumulate(grads, nodes, *input, |ga| {
                for (r, f) in factors.iter().enumerate() {
                    for (o, x) in ga[r * cols..(r + 1) * cols]
                        .iter_mut()
                        .zip(&g[r * cols..(r + 1) * cols])
                    {
                        *o += x * f;
                    }
                }
            });
        }
        Op::ConcatCols(parts) => {
            let rows = node.shape[0];
            let total = node.shape[1];
            let mut offset = 0;
            for &p in parts {
                let w = nodes[p].shape[1];
                accumulate(grads, nodes, p, |gp| {
                    for r in 0..rows {
                        for (o, x) in gp[r * w..(r + 1) * w]
                            .iter_mut()
                            .zip(&g[r * total + offset..r * total + offset + w])
                        {
                            *o += x;
                        }
                    }
                });
                offset += w;
            }
        }
        Op::LayerNorm {
            input,
            gain,
            bias,
            normalized,
            inv_std,
        } => {
            let (rows, cols) = (node.shape[0], node.shape[1]);
            let gd = &nodes[*gain].data;
            accumulate(grads, nodes, *input, |gx| {
                let mut dh = vec![0.0; cols];
                for r in 0..rows {
                    let base = r * cols;
                    let mut sum_dh = 0.0;
                    let mut sum_dh_h = 0.0;
                    for c in 0..cols {
                        dh[c] = g[base + c] * gd[c];
                        sum_dh += dh[c];
                        sum_dh_h += dh[c] * normalized[base + c];
                    }
                    let scale = inv_std[r] / cols as f64;
                    for c in 0..cols {
                        gx[base + c] += scale
                            * (cols as f64 * dh[c] - sum_dh - normalized[base + c] * sum_dh_h);
                    }
                }
            });
            accumulate(grads, nodes, *gain, |gg| {
                for r in 0..rows {
                    for c in 0..cols {
                        gg[c] += g[r * cols + c] * normalized[r * cols + c];
                    }
                }
            });
            accumulate(grads, nodes, *bias, |gb| {
                for r in 0..rows {
                    for c in 0..cols {
                        gb[c] += g[r * cols + c];
                    }
                }
            });
        }
        Op::CrossEntropy {
            logits,
            targets,
            probs,
        } => {
            let c = nodes[*logits].shape[1];
            let n = targets.len().max(1) as f64;
            let up = g[0] / n;
            accumulate(grads, nodes, *logits, |gl| {
                for (r, &t) in targets.iter().enumerate() {
                    for k in 0..c {
                        let onehot = if k == t { 1.0 } else { 0.0 };
                        gl[r * c + k] += up * (probs[r * c + k] - onehot);
                    }
                }
            });
        }
    }
}
