//! Reverse-mode automatic differentiation over 2-D tensors.
//!
//! A [`Tape`] records every primitive in the order it is applied, so node
//! indices are already a topological order. [`Tape::backward`] walks that
//! order in reverse and visits each node once.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamStore};
use crate::tensor::Tensor;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which slices an axis-wise operation works within.
///
/// `Rows`: each row is one slice (a row-wise softmax makes every row sum to
/// one; a row mean yields an `r x 1` column). `Cols`: each column is one
/// slice (column means yield a `1 x c` row).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    /// Same shape, or rhs is a `1 x c` row broadcast over every row of lhs.
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Exp(Var),
    /// `vertical`: stack rows; otherwise place side by side.
    Concat {
        inputs: Vec<Var>,
        vertical: bool,
    },
    Mean(Var, Axis),
    SumAll(Var),
    /// Maximum within each column, `1 x c`.
    MaxCols(Var),
    Softmax(Var, Axis),
    SliceRows {
        input: Var,
        start: usize,
        len: usize,
    },
    SliceCols {
        input: Var,
        start: usize,
        len: usize,
    },
    GatherRows {
        table: Var,
        ids: Vec<usize>,
    },
    /// Sliding windows of `width` consecutive rows flattened into one row.
    Unfold {
        input: Var,
        width: usize,
    },
    /// `-ln(max(x[index], floor))` as a `1 x 1` scalar.
    NegLogPick {
        input: Var,
        index: usize,
        floor: f64,
    },
    AddN(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
    param: Option<String>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn mat(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
    Tensor::matrix(rows, cols, data).expect("internal shape")
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn softmax_slice(xs: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let (r, c) = t.dims2();
    mat(r, c, t.data().iter().map(|&x| f(x)).collect())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dims2()
    }

    /// Record a value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        let (r, c) = value.dims2();
        let value = mat(r, c, value.into_data());
        self.push_node(value, Op::Leaf, false, None)
    }

    /// Bring a named parameter onto the tape. Repeated calls with the same
    /// name return the same handle.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let p = store
            .get(name)
            .ok_or_else(|| Error::usage(format!("unknown parameter {name:?}")))?;
        let (r, c) = p.value.dims2();
        let value = mat(r, c, p.value.data().to_vec());
        let v = self.push_node(value, Op::Leaf, p.trainable, Some(name.to_string()));
        self.params.insert(name.to_string(), v);
        Ok(v)
    }

    fn push_node(&mut self, value: Tensor, op: Op, needs_grad: bool, param: Option<String>) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param,
        });
        Var(self.nodes.len() - 1)
    }

    fn inputs(op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Exp(a)
            | Op::Mean(a, _)
            | Op::SumAll(a)
            | Op::MaxCols(a)
            | Op::Softmax(a, _) => vec![*a],
            Op::SliceRows { input, .. }
            | Op::SliceCols { input, .. }
            | Op::Unfold { input, .. }
            | Op::NegLogPick { input, .. } => vec![*input],
            Op::GatherRows { table, .. } => vec![*table],
            Op::Concat { inputs, .. } | Op::AddN(inputs) => inputs.clone(),
        }
    }

    fn compute(&self, op: &Op) -> Result<Tensor> {
        let val = |v: &Var| &self.nodes[v.0].value;
        Ok(match op {
            Op::Leaf => unreachable!("leaves are not recomputed"),
            Op::MatMul(a, b) => {
                let (a, b) = (val(a), val(b));
                let ((m, k), (k2, n)) = (a.dims2(), b.dims2());
                if k != k2 {
                    return Err(shape_err("matmul", a, b));
                }
                mat(m, n, matmul_raw(a.data(), b.data(), m, k, n))
            }
            Op::Transpose(a) => val(a).transpose(),
            Op::Add(a, b) => {
                let (a, b) = (val(a), val(b));
                let ((r, c), (br, bc)) = (a.dims2(), b.dims2());
                if (br, bc) == (r, c) {
                    mat(
                        r,
                        c,
                        a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
                    )
                } else if br == 1 && bc == c {
                    let mut out = a.data().to_vec();
                    for row in out.chunks_mut(c.max(1)) {
                        for (o, y) in row.iter_mut().zip(b.data()) {
                            *o += y;
                        }
                    }
                    mat(r, c, out)
                } else {
                    return Err(shape_err("add", a, b));
                }
            }
            Op::Mul(a, b) => {
                let (a, b) = (val(a), val(b));
                if a.dims2() != b.dims2() {
                    return Err(shape_err("mul", a, b));
                }
                let (r, c) = a.dims2();
                mat(
                    r,
                    c,
                    a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect(),
                )
            }
            Op::Scale(a, k) => map(val(a), |x| x * k),
            Op::Tanh(a) => map(val(a), f64::tanh),
            Op::Sigmoid(a) => map(val(a), sigmoid),
            Op::Relu(a) => map(val(a), |x| x.max(0.0)),
            Op::Exp(a) => map(val(a), f64::exp),
            Op::Concat { inputs, vertical } => {
                let parts: Vec<&Tensor> = inputs.iter().map(val).collect();
                if parts.is_empty() {
                    return Err(Error::usage("concat of zero tensors"));
                }
                if *vertical {
                    let c = parts[0].cols();
                    let mut data = Vec::new();
                    let mut r = 0;
                    for p in &parts {
                        if p.cols() != c {
                            return Err(shape_err("concat_rows", parts[0], p));
                        }
                        r += p.rows();
                        data.extend_from_slice(p.data());
                    }
                    mat(r, c, data)
                } else {
                    let r = parts[0].rows();
                    if let Some(bad) = parts.iter().find(|p| p.rows() != r) {
                        return Err(shape_err("concat_cols", parts[0], bad));
                    }
                    let c: usize = parts.iter().map(|p| p.cols()).sum();
                    let mut data = Vec::with_capacity(r * c);
                    for i in 0..r {
                        for p in &parts {
                            data.extend_from_slice(p.row_slice(i));
                        }
                    }
                    mat(r, c, data)
                }
            }
            Op::Mean(a, axis) => {
                let a = val(a);
                let (r, c) = a.dims2();
                match axis {
                    Axis::Rows => mat(
                        r,
                        1,
                        (0..r)
                            .map(|i| a.row_slice(i).iter().sum::<f64>() / c as f64)
                            .collect(),
                    ),
                    Axis::Cols => {
                        let mut out = vec![0.0; c];
                        for i in 0..r {
                            for (o, x) in out.iter_mut().zip(a.row_slice(i)) {
                                *o += x;
                            }
                        }
                        mat(1, c, out.into_iter().map(|s| s / r as f64).collect())
                    }
                }
            }
            Op::SumAll(a) => Tensor::scalar(val(a).data().iter().sum()),
            Op::MaxCols(a) => {
                let a = val(a);
                let (r, c) = a.dims2();
                if r == 0 {
                    return Err(Error::usage("max over zero rows"));
                }
                let mut out = a.row_slice(0).to_vec();
                for i in 1..r {
                    for (o, &x) in out.iter_mut().zip(a.row_slice(i)) {
                        if x > *o {
                            *o = x;
                        }
                    }
                }
                mat(1, c, out)
            }
            Op::Softmax(a, axis) => {
                let a = val(a);
                let (r, c) = a.dims2();
                let mut out = vec![0.0; r * c];
                match axis {
                    Axis::Rows => {
                        for i in 0..r {
                            let s = softmax_slice(a.row_slice(i).iter().copied());
                            out[i * c..(i + 1) * c].copy_from_slice(&s);
                        }
                    }
                    Axis::Cols => {
                        for j in 0..c {
                            let s = softmax_slice((0..r).map(|i| a.data()[i * c + j]));
                            for (i, v) in s.into_iter().enumerate() {
                                out[i * c + j] = v;
                            }
                        }
                    }
                }
                mat(r, c, out)
            }
            Op::SliceRows { input, start, len } => {
                let a = val(input);
                let (r, c) = a.dims2();
                if start + len > r {
                    return Err(Error::Shape {
                        op: "slice_rows",
                        lhs: a.shape().to_vec(),
                        rhs: vec![*start, *len],
                    });
                }
                mat(*len, c, a.data()[start * c..(start + len) * c].to_vec())
            }
            Op::SliceCols { input, start, len } => {
                let a = val(input);
                let (r, c) = a.dims2();
                if start + len > c {
                    return Err(Error::Shape {
                        op: "slice_cols",
                        lhs: a.shape().to_vec(),
                        rhs: vec![*start, *len],
                    });
                }
                let mut data = Vec::with_capacity(r * len);
                for i in 0..r {
                    data.extend_from_slice(&a.row_slice(i)[*start..start + len]);
                }
                mat(r, *len, data)
            }
            Op::GatherRows { table, ids } => {
                let t = val(table);
                let (r, c) = t.dims2();
                let mut data = Vec::with_capacity(ids.len() * c);
                for &id in ids {
                    if id >= r {
                        return Err(Error::Shape {
                            op: "gather_rows",
                            lhs: t.shape().to_vec(),
                            rhs: vec![id],
                        });
                    }
                    data.extend_from_slice(t.row_slice(id));
                }
                mat(ids.len(), c, data)
            }
            Op::Unfold { input, width } => {
                let a = val(input);
                let (r, c) = a.dims2();
                if *width == 0 || *width > r {
                    return Err(Error::Shape {
                        op: "unfold",
                        lhs: a.shape().to_vec(),
                        rhs: vec![*width],
                    });
                }
                let out_r = r - width + 1;
                let mut data = Vec::with_capacity(out_r * width * c);
                for t in 0..out_r {
                    data.extend_from_slice(&a.data()[t * c..(t + width) * c]);
                }
                mat(out_r, width * c, data)
            }
            Op::NegLogPick {
                input,
                index,
                floor,
            } => {
                let a = val(input);
                let p = *a.data().get(*index).ok_or_else(|| Error::Shape {
                    op: "neg_log_pick",
                    lhs: a.shape().to_vec(),
                    rhs: vec![*index],
                })?;
                // NaN must not be clamped away.
                let p = if p < *floor { *floor } else { p };
                Tensor::scalar(-p.ln())
            }
            Op::AddN(inputs) => {
                let first = val(&inputs[0]);
                let (r, c) = first.dims2();
                let mut out = first.data().to_vec();
                for v in &inputs[1..] {
                    let t = val(v);
                    if t.dims2() != (r, c) {
                        return Err(shape_err("add_n", first, t));
                    }
                    for (o, x) in out.iter_mut().zip(t.data()) {
                        *o += x;
                    }
                }
                mat(r, c, out)
            }
        })
    }

    fn record(&mut self, op: Op) -> Result<Var> {
        let value = self.compute(&op)?;
        let needs_grad = Self::inputs(&op).iter().any(|v| self.nodes[v.0].needs_grad);
        Ok(self.push_node(value, op, needs_grad, None))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Transpose(a))
    }

    /// Elementwise sum; `b` may also be a `1 x c` row added to every row.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        self.record(Op::Scale(a, k))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Exp(a))
    }

    /// Join side by side; all inputs need the same row count.
    pub fn concat_cols(&mut self, inputs: &[Var]) -> Result<Var> {
        self.record(Op::Concat {
            inputs: inputs.to_vec(),
            vertical: false,
        })
    }

    /// Stack vertically; all inputs need the same column count.
    pub fn concat_rows(&mut self, inputs: &[Var]) -> Result<Var> {
        self.record(Op::Concat {
            inputs: inputs.to_vec(),
            vertical: true,
        })
    }

    pub fn mean(&mut self, a: Var, axis: Axis) -> Result<Var> {
        self.record(Op::Mean(a, axis))
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        self.record(Op::SumAll(a))
    }

    pub fn max_cols(&mut self, a: Var) -> Result<Var> {
        self.record(Op::MaxCols(a))
    }

    /// Max-shifted softmax within each slice of `axis`.
    pub fn softmax(&mut self, a: Var, axis: Axis) -> Result<Var> {
        self.record(Op::Softmax(a, axis))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        self.record(Op::SliceRows {
            input: a,
            start,
            len,
        })
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        self.record(Op::SliceCols {
            input: a,
            start,
            len,
        })
    }

    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.record(Op::GatherRows {
            table,
            ids: ids.to_vec(),
        })
    }

    pub fn unfold(&mut self, a: Var, width: usize) -> Result<Var> {
        self.record(Op::Unfold { input: a, width })
    }

    pub fn neg_log_pick(&mut self, probs: Var, index: usize, floor: f64) -> Result<Var> {
        self.record(Op::NegLogPick {
            input: probs,
            index,
            floor,
        })
    }

    pub fn add_n(&mut self, inputs: &[Var]) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::usage("add_n of zero tensors"));
        }
        self.record(Op::AddN(inputs.to_vec()))
    }

    /// Recompute every non-leaf node from its recorded inputs and check the
    /// result is bit-identical to what was recorded.
    pub fn replay_matches(&self) -> bool {
        self.nodes.iter().all(|n| match n.op {
            Op::Leaf => true,
            ref op => match self.compute(op) {
                Ok(t) => {
                    t.shape() == n.value.shape()
                        && t.data()
                            .iter()
                            .zip(n.value.data())
                            .all(|(a, b)| a.to_bits() == b.to_bits())
                }
                Err(_) => false,
            },
        })
    }

    /// Gradients of the scalar `loss` with respect to every trainable entry
    /// of `store`. Parameters the loss does not reach get zeros.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(store);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if let Some(name) = &node.param {
                if let Some(acc) = out.get_mut(name) {
                    for (a, x) in acc.data_mut().iter_mut().zip(&g) {
                        *a += x;
                    }
                }
                continue;
            }
            self.propagate(node, &g, &mut grads);
        }
        Ok(out)
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        let val = |v: &Var| &nodes[v.0].value;
        let y = &node.value;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (at, bt) = (val(a), val(b));
                let ((m, k), (_, n)) = (at.dims2(), bt.dims2());
                acc(*a, &mut |da| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bt.data()[p * n..(p + 1) * n];
                            da[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                acc(*b, &mut |db| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = at.data()[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (d, x) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d += av * x;
                            }
                        }
                    }
                });
            }
            Op::Transpose(a) => {
                let (r, c) = val(a).dims2();
                acc(*a, &mut |da| {
                    for i in 0..r {
                        for j in 0..c {
                            da[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |da| {
                    da.iter_mut().zip(g).for_each(|(d, x)| *d += x)
                });
                let same = val(a).dims2() == val(b).dims2();
                let c = val(b).cols().max(1);
                acc(*b, &mut |db| {
                    if same {
                        db.iter_mut().zip(g).for_each(|(d, x)| *d += x);
                    } else {
                        for row in g.chunks(c) {
                            db.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                let (at, bt) = (val(a).data(), val(b).data());
                acc(*a, &mut |da| {
                    for i in 0..da.len() {
                        da[i] += g[i] * bt[i];
                    }
                });
                acc(*b, &mut |db| {
                    for i in 0..db.len() {
                        db[i] += g[i] * at[i];
                    }
                });
            }
            Op::Scale(a, k) => acc(*a, &mut |da| {
                da.iter_mut().zip(g).for_each(|(d, x)| *d += k * x)
            }),
            Op::Tanh(a) => acc(*a, &mut |da| {
                for ((d, x), y) in da.iter_mut().zip(g).zip(y.data()) {
                    *d += x * (1.0 - y * y);
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |da| {
                for ((d, x), y) in da.iter_mut().zip(g).zip(y.data()) {
                    *d += x * y * (1.0 - y);
                }
            }),
            Op::Relu(a) => {
                let input = val(a).data();
                acc(*a, &mut |da| {
                    for ((d, x), i) in da.iter_mut().zip(g).zip(input) {
                        if *i > 0.0 {
                            *d += x;
                        }
                    }
                })
            }
            Op::Exp(a) => acc(*a, &mut |da| {
                for ((d, x), y) in da.iter_mut().zip(g).zip(y.data()) {
                    *d += x * y;
                }
            }),
            Op::Concat { inputs, vertical } => {
                let c_out = y.cols();
                let mut offset = 0;
                for v in inputs {
                    let (r, c) = val(v).dims2();
                    if *vertical {
                        acc(*v, &mut |d| {
                            d.iter_mut()
                                .zip(&g[offset..offset + r * c])
                                .for_each(|(d, x)| *d += x)
                        });
                        offset += r * c;
                    } else {
                        acc(*v, &mut |d| {
                            for i in 0..r {
                                let src = &g[i * c_out + offset..i * c_out + offset + c];
                                d[i * c..(i + 1) * c]
                                    .iter_mut()
                                    .zip(src)
                                    .for_each(|(d, x)| *d += x);
                            }
                        });
                        offset += c;
                    }
                }
            }
            Op::Mean(a, axis) => {
                let (r, c) = val(a).dims2();
                let axis = *axis;
                acc(*a, &mut |da| {
                    for i in 0..r {
                        for j in 0..c {
                            da[i * c + j] += match axis {
                                Axis::Rows => g[i] / c as f64,
                                Axis::Cols => g[j] / r as f64,
                            };
                        }
                    }
                });
            }
            Op::SumAll(a) => acc(*a, &mut |da| da.iter_mut().for_each(|d| *d += g[0])),
            Op::MaxCols(a) => {
                let at = val(a);
                let (r, c) = at.dims2();
                acc(*a, &mut |da| {
                    for j in 0..c {
                        let mut best = 0;
                        for i in 1..r {
                            if at.data()[i * c + j] > at.data()[best * c + j] {
                                best = i;
                            }
                        }
                        da[best * c + j] += g[j];
                    }
                });
            }
            Op::Softmax(a, axis) => {
                let (r, c) = y.dims2();
                let yd = y.data();
                let axis = *axis;
                acc(*a, &mut |da| match axis {
                    Axis::Rows => {
                        for i in 0..r {
                            let s = &yd[i * c..(i + 1) * c];
                            let gs = &g[i * c..(i + 1) * c];
                            let dot: f64 = s.iter().zip(gs).map(|(a, b)| a * b).sum();
                            for j in 0..c {
                                da[i * c + j] += s[j] * (gs[j] - dot);
                            }
                        }
                    }
                    Axis::Cols => {
                        for j in 0..c {
                            let dot: f64 = (0..r).map(|i| yd[i * c + j] * g[i * c + j]).sum();
                            for i in 0..r {
                                da[i * c + j] += yd[i * c + j] * (g[i * c + j] - dot);
                            }
                        }
                    }
                });
            }
            Op::SliceRows { input, start, len } => {
                let c = val(input).cols();
                acc(*input, &mut |d| {
                    d[start * c..(start + len) * c]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(d, x)| *d += x)
                });
            }
            Op::SliceCols { input, start, len } => {
                let (r, c) = val(input).dims2();
                acc(*input, &mut |d| {
                    for i in 0..r {
                        d[i * c + start..i * c + start + len]
                            .iter_mut()
                            .zip(&g[i * len..(i + 1) * len])
                            .for_each(|(d, x)| *d += x);
                    }
                });
            }
            Op::GatherRows { table, ids } => {
                let c = val(table).cols();
                acc(*table, &mut |d| {
                    for (k, &id) in ids.iter().enumerate() {
                        d[id * c..(id + 1) * c]
                            .iter_mut()
                            .zip(&g[k * c..(k + 1) * c])
                            .for_each(|(d, x)| *d += x);
                    }
                });
            }
            Op::Unfold { input, width } => {
                let c = val(input).cols();
                let row_len = width * c;
                let out_r = y.rows();
                acc(*input, &mut |d| {
                    for t in 0..out_r {
                        d[t * c..t * c + row_len]
                            .iter_mut()
                            .zip(&g[t * row_len..(t + 1) * row_len])
                            .for_each(|(d, x)| *d += x);
                    }
                });
            }
            Op::NegLogPick {
                input,
                index,
                floor,
            } => {
                let p = val(input).data()[*index];
                // NaN passes through so it reaches the non-finite check.
                if p > *floor || p.is_nan() {
                    acc(*input, &mut |d| d[*index] -= g[0] / p);
                }
            }
            Op::AddN(inputs) => {
                for v in inputs {
                    acc(*v, &mut |d| d.iter_mut().zip(g).for_each(|(d, x)| *d += x));
                }
            }
        }
    }
}
