//! Reverse-mode differentiation over a linear tape.
//!
//! A [`Graph`] records every operation as a node holding its forward value.
//! Parameters are borrowed from a [`ParamStore`] rather than copied, so one
//! graph per minibatch is cheap to build. [`Graph::backward`] replays the tape
//! in reverse and returns gradients for every node that requires them.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{ParamGrads, ParamId, ParamStore};
use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, logsumexp, softmax_in_place, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-12;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Vec<f64>),
    Tanh(Var),
    Gelu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    },
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    SliceCols {
        x: Var,
        start: usize,
        len: usize,
    },
    SelectRows {
        x: Var,
        rows: Vec<usize>,
    },
    Pick {
        x: Var,
        indices: Vec<usize>,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    MeanAxis {
        x: Var,
        axis: usize,
    },
    Sum(Var),
    Reshape(Var, Vec<usize>),
    BcePair {
        p: Var,
        label: usize,
    },
}

impl Op {
    fn for_each_input(&self, mut f: impl FnMut(Var)) {
        match self {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b)
            | Op::MatMulNt(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b) => {
                f(*a);
                f(*b);
            }
            Op::AddBias(a, b) => {
                f(*a);
                f(*b);
            }
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::MulConst(a, _)
            | Op::Tanh(a)
            | Op::Gelu(a)
            | Op::Softmax(a)
            | Op::LogSoftmax(a)
            | Op::Sum(a)
            | Op::Reshape(a, _) => f(*a),
            Op::LayerNorm { x, gamma, beta, .. } => {
                f(*x);
                f(*gamma);
                f(*beta);
            }
            Op::Gather { table, .. } => f(*table),
            Op::SliceCols { x, .. }
            | Op::SelectRows { x, .. }
            | Op::Pick { x, .. }
            | Op::MeanAxis { x, .. } => f(*x),
            Op::Concat { parts, .. } => parts.iter().copied().for_each(f),
            Op::BcePair { p, .. } => f(*p),
        }
    }
}

#[derive(Debug)]
enum Value {
    Owned(Tensor),
    Param(ParamId),
}

#[derive(Debug)]
struct Node {
    value: Value,
    op: Op,
    requires_grad: bool,
}

static EMPTY_STORE: ParamStore = ParamStore::new();

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl Graph<'static> {
    /// A graph with no parameter store; inputs come only from [`Graph::leaf`].
    pub fn detached() -> Self {
        Graph::new(&EMPTY_STORE)
    }
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(id) => self.store.value(*id),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node holding parameter `id`, if the graph has used it.
    pub fn param_var(&self, id: ParamId) -> Option<Var> {
        self.param_vars.get(id.0).copied().flatten()
    }

    fn record(&mut self, op: Op) -> Var {
        let value = self.eval(&op);
        let mut rg = false;
        op.for_each_input(|v| rg |= self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad: rg,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(id),
            op: Op::Param,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    fn dims2(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::InvalidShape {
                op,
                shape: s.to_vec(),
            }),
        }
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::ShapeMismatch {
            op,
            lhs: self.shape(a).to_vec(),
            rhs: self.shape(b).to_vec(),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch(op, a, b));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, k) = self.dims2("matmul", a)?;
        let (k2, _) = self.dims2("matmul", b)?;
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        Ok(self.record(Op::MatMul(a, b)))
    }

    /// `a · bᵀ` without materialising the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, k) = self.dims2("matmul_nt", a)?;
        let (_, k2) = self.dims2("matmul_nt", b)?;
        if k != k2 {
            return Err(self.mismatch("matmul_nt", a, b));
        }
        Ok(self.record(Op::MatMulNt(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.dims2("transpose", a)?;
        Ok(self.record(Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.record(Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.record(Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("elementwise_mul", a, b)?;
        Ok(self.record(Op::Mul(a, b)))
    }

    /// Adds a length-`n` bias to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (_, n) = self.dims2("add_bias", a)?;
        if self.shape(bias) != [n] {
            return Err(self.mismatch("add_bias", a, bias));
        }
        Ok(self.record(Op::AddBias(a, bias)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.record(Op::Scale(a, c))
    }

    /// Elementwise product with a constant (non-differentiable) factor.
    pub fn mul_const(&mut self, a: Var, factor: Vec<f64>) -> Result<Var> {
        if factor.len() != self.value(a).len() {
            return Err(Error::ShapeMismatch {
                op: "mul_const",
                lhs: self.shape(a).to_vec(),
                rhs: vec![factor.len()],
            });
        }
        Ok(self.record(Op::MulConst(a, factor)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.record(Op::Tanh(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.record(Op::Gelu(a))
    }

    fn last_axis(&self, v: Var) -> usize {
        *self.shape(v).last().expect("non-empty shape")
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        self.record(Op::Softmax(a))
    }

    /// Log-softmax along the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        self.record(Op::LogSoftmax(a))
    }

    /// Row-wise layer normalisation with learned gain and offset.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (_, n) = self.dims2("layer_norm", x)?;
        for p in [gamma, beta] {
            if self.shape(p) != [n] {
                return Err(self.mismatch("layer_norm", x, p));
            }
        }
        Ok(self.record(Op::LayerNorm {
            x,
            gamma,
            beta,
            eps,
        }))
    }

    /// Rows of `table` (`V×d`) selected by `ids`, giving `len(ids)×d`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, _) = self.dims2("gather", table)?;
        if ids.is_empty() {
            return Err(Error::EmptyInput("gather ids"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::ShapeMismatch {
                op: "gather",
                lhs: self.shape(table).to_vec(),
                rhs: vec![bad],
            });
        }
        Ok(self.record(Op::Gather {
            table,
            ids: ids.to_vec(),
        }))
    }

    /// Rows of any rank-2 tensor, in the given order (repeats allowed).
    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let (m, _) = self.dims2("select_rows", x)?;
        if rows.is_empty() || rows.iter().any(|&r| r >= m) {
            return Err(Error::InvalidShape {
                op: "select_rows",
                shape: self.shape(x).to_vec(),
            });
        }
        Ok(self.record(Op::SelectRows {
            x,
            rows: rows.to_vec(),
        }))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (_, n) = self.dims2("slice_cols", x)?;
        if len == 0 || start + len > n {
            return Err(Error::InvalidShape {
                op: "slice_cols",
                shape: self.shape(x).to_vec(),
            });
        }
        Ok(self.record(Op::SliceCols { x, start, len }))
    }

    /// Elements at flat row-major `indices`, as a rank-1 tensor.
    pub fn pick(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let n = self.value(x).len();
        if indices.is_empty() || indices.iter().any(|&i| i >= n) {
            return Err(Error::InvalidShape {
                op: "pick",
                shape: self.shape(x).to_vec(),
            });
        }
        Ok(self.record(Op::Pick {
            x,
            indices: indices.to_vec(),
        }))
    }

    /// Concatenate rank-1 tensors (axis 0) or rank-2 tensors along axis 0 or 1.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput("concat parts"))?;
        let base = self.shape(first);
        if axis >= base.len() || base.len() > 2 {
            return Err(Error::InvalidShape {
                op: "concat",
                shape: base.to_vec(),
            });
        }
        for &p in &parts[1..] {
            let s = self.shape(p);
            let conforms = s.len() == base.len()
                && s.iter()
                    .zip(base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !conforms {
                return Err(self.mismatch("concat", first, p));
            }
        }
        Ok(self.record(Op::Concat {
            parts: parts.to_vec(),
            axis,
        }))
    }

    /// Mean along `axis`, keeping the reduced axis with length 1.
    /// Rank-1 input reduces to shape `[1]`.
    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let ok = matches!((self.shape(x), axis), ([_], 0) | ([_, _], 0 | 1));
        if !ok {
            return Err(Error::InvalidShape {
                op: "mean_over_axis",
                shape: self.shape(x).to_vec(),
            });
        }
        Ok(self.record(Op::MeanAxis { x, axis }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        self.record(Op::Sum(x))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || n != self.value(x).len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(self.record(Op::Reshape(x, shape.to_vec())))
    }

    /// Binary cross-entropy on a probability pair: `-ln p[label]`, with the
    /// probability clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub fn bce_pair_loss(&mut self, p: Var, label: usize) -> Result<Var> {
        if label > 1 {
            return Err(Error::InvalidLabel(label));
        }
        if self.shape(p) != [2] {
            return Err(Error::InvalidShape {
                op: "bce_pair_loss",
                shape: self.shape(p).to_vec(),
            });
        }
        let v = self.value(p).data();
        bce_pair_value([v[0], v[1]], label)?;
        Ok(self.record(Op::BcePair { p, label }))
    }

    /// Forward value of `op` from the current values of its inputs.
    /// Shapes were validated when the op was recorded.
    fn eval(&self, op: &Op) -> Tensor {
        let val = |v: &Var| self.value(*v);
        let same = |a: &Var, data: Vec<f64>| {
            Tensor::new(self.shape(*a).to_vec(), data).expect("shape preserved")
        };
        let map = |a: &Var, f: &dyn Fn(f64) -> f64| {
            same(a, val(a).data().iter().map(|&x| f(x)).collect())
        };
        let zip = |a: &Var, b: &Var, f: &dyn Fn(f64, f64) -> f64| {
            same(
                a,
                val(a)
                    .data()
                    .iter()
                    .zip(val(b).data())
                    .map(|(&x, &y)| f(x, y))
                    .collect(),
            )
        };
        match op {
            Op::Leaf | Op::Param => unreachable!("leaves are never re-evaluated"),
            Op::MatMul(a, b) => {
                let (m, k) = val(a).dims2().unwrap();
                let n = val(b).shape()[1];
                let mut out = vec![0.0; m * n];
                gemm_acc(val(a).data(), val(b).data(), &mut out, m, k, n);
                Tensor::new(vec![m, n], out).unwrap()
            }
            Op::MatMulNt(a, b) => {
                let (m, k) = val(a).dims2().unwrap();
                let n = val(b).shape()[0];
                let mut out = vec![0.0; m * n];
                gemm_nt_acc(val(a).data(), val(b).data(), &mut out, m, k, n);
                Tensor::new(vec![m, n], out).unwrap()
            }
            Op::Transpose(a) => {
                let (m, n) = val(a).dims2().unwrap();
                let src = val(a).data();
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        out[j * m + i] = src[i * n + j];
                    }
                }
                Tensor::new(vec![n, m], out).unwrap()
            }
            Op::Add(a, b) => zip(a, b, &|x, y| x + y),
            Op::Sub(a, b) => zip(a, b, &|x, y| x - y),
            Op::Mul(a, b) => zip(a, b, &|x, y| x * y),
            Op::AddBias(a, bias) => {
                let b = val(bias).data();
                let mut out = val(a).data().to_vec();
                for row in out.chunks_mut(b.len()) {
                    add_into(row, b);
                }
                same(a, out)
            }
            Op::Scale(a, c) => map(a, &|x| x * c),
            Op::MulConst(a, factor) => same(
                a,
                val(a)
                    .data()
                    .iter()
                    .zip(factor)
                    .map(|(x, f)| x * f)
                    .collect(),
            ),
            Op::Tanh(a) => map(a, &libm::tanh),
            Op::Gelu(a) => map(a, &|x| x * gelu_gate(x)),
            Op::Softmax(a) => {
                let n = self.last_axis(*a);
                let mut t = val(a).clone();
                for row in t.data_mut().chunks_mut(n) {
                    softmax_in_place(row);
                }
                t
            }
            Op::LogSoftmax(a) => {
                let n = self.last_axis(*a);
                let mut t = val(a).clone();
                for row in t.data_mut().chunks_mut(n) {
                    let lse = logsumexp(row);
                    row.iter_mut().for_each(|v| *v -= lse);
                }
                t
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            } => {
                let n = val(gamma).len();
                let (g, b) = (val(gamma).data(), val(beta).data());
                let mut out = val(x).data().to_vec();
                for row in out.chunks_mut(n) {
                    normalize_row(row, *eps);
                    for j in 0..n {
                        row[j] = row[j] * g[j] + b[j];
                    }
                }
                same(x, out)
            }
            Op::Gather { table, ids } => {
                let d = val(table).shape()[1];
                let src = val(table).data();
                let mut out = Vec::with_capacity(ids.len() * d);
                for &i in ids {
                    out.extend_from_slice(&src[i * d..(i + 1) * d]);
                }
                Tensor::new(vec![ids.len(), d], out).unwrap()
            }
            Op::SelectRows { x, rows } => {
                let n = val(x).shape()[1];
                let src = val(x).data();
                let mut out = Vec::with_capacity(rows.len() * n);
                for &r in rows {
                    out.extend_from_slice(&src[r * n..(r + 1) * n]);
                }
                Tensor::new(vec![rows.len(), n], out).unwrap()
            }
            Op::SliceCols { x, start, len } => {
                let (m, n) = val(x).dims2().unwrap();
                let src = val(x).data();
                let mut out = Vec::with_capacity(m * len);
                for i in 0..m {
                    out.extend_from_slice(&src[i * n + start..i * n + start + len]);
                }
                Tensor::new(vec![m, *len], out).unwrap()
            }
            Op::Pick { x, indices } => {
                let src = val(x).data();
                Tensor::vector(indices.iter().map(|&i| src[i]).collect())
            }
            Op::Concat { parts, axis } => {
                let base = val(&parts[0]).shape();
                let total: usize = parts.iter().map(|p| val(p).shape()[*axis]).sum();
                let mut shape = base.to_vec();
                shape[*axis] = total;
                let data = if base.len() == 1 || *axis == 0 {
                    parts
                        .iter()
                        .flat_map(|p| val(p).data().iter().copied())
                        .collect()
                } else {
                    let rows = base[0];
                    let mut out = Vec::with_capacity(rows * total);
                    for r in 0..rows {
                        for p in parts {
                            out.extend_from_slice(val(p).row(r));
                        }
                    }
                    out
                };
                Tensor::new(shape, data).unwrap()
            }
            Op::MeanAxis { x, axis } => {
                let src = val(x).data();
                match (val(x).shape(), axis) {
                    ([n], _) => Tensor::scalar(src.iter().sum::<f64>() / *n as f64),
                    ([m, n], 0) => {
                        let mut out = vec![0.0; *n];
                        for row in src.chunks(*n) {
                            add_into(&mut out, row);
                        }
                        out.iter_mut().for_each(|o| *o /= *m as f64);
                        Tensor::new(vec![1, *n], out).unwrap()
                    }
                    ([m, n], _) => {
                        let out = src
                            .chunks(*n)
                            .map(|r| r.iter().sum::<f64>() / *n as f64)
                            .collect();
                        Tensor::new(vec![*m, 1], out).unwrap()
                    }
                    _ => unreachable!("validated at record time"),
                }
            }
            Op::Sum(x) => Tensor::scalar(val(x).data().iter().sum()),
            Op::Reshape(x, shape) => val(x).clone().reshaped(shape.clone()).unwrap(),
            Op::BcePair { p, label } => {
                let v = val(p).data();
                let q = v[*label].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                Tensor::scalar(-libm::log(q))
            }
        }
    }

    /// Indices of every node downstream of parameter `id`, in tape order.
    pub(crate) fn dependents(&self, id: ParamId) -> Vec<usize> {
        let Some(root) = self.param_var(id) else {
            return Vec::new();
        };
        let mut dirty = vec![false; self.nodes.len()];
        dirty[root.0] = true;
        let mut out = Vec::new();
        for idx in root.0 + 1..self.nodes.len() {
            let mut hit = false;
            self.nodes[idx].op.for_each_input(|v| hit |= dirty[v.0]);
            if hit {
                dirty[idx] = true;
                out.push(idx);
            }
        }
        out
    }

    /// Overwrite one element of a parameter's value inside this graph only,
    /// leaving the store untouched. Dependent nodes go stale until
    /// [`Graph::reevaluate`] is called on them.
    pub(crate) fn poke_param(&mut self, id: ParamId, index: usize, value: f64) {
        let var = self.param_var(id).expect("parameter used by graph");
        let node = &mut self.nodes[var.0];
        if let Value::Param(pid) = node.value {
            node.value = Value::Owned(self.store.value(pid).clone());
        }
        if let Value::Owned(t) = &mut node.value {
            t.data_mut()[index] = value;
        }
    }

    /// Recompute `nodes` (from [`Graph::dependents`]) after `id` was poked.
    /// A node whose inputs all came out bit-identical is skipped.
    pub(crate) fn reevaluate(&mut self, id: ParamId, nodes: &[usize]) {
        let Some(root) = self.param_var(id) else {
            return;
        };
        let mut dirty = vec![false; self.nodes.len()];
        dirty[root.0] = true;
        for &idx in nodes {
            let mut hit = false;
            self.nodes[idx].op.for_each_input(|v| hit |= dirty[v.0]);
            if !hit {
                continue;
            }
            let t = self.eval(&self.nodes[idx].op);
            let old = self.value(Var(idx));
            let changed = old.shape() != t.shape()
                || old
                    .data()
                    .iter()
                    .zip(t.data())
                    .any(|(a, b)| a.to_bits() != b.to_bits());
            if changed {
                dirty[idx] = true;
                self.nodes[idx].value = Value::Owned(t);
            }
        }
    }

    /// Gradients of scalar `loss` with respect to every node that requires them.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::NotScalar {
                shape: self.shape(loss).to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(idx, &gy, &mut grads);
            grads[idx] = Some(gy);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let y = self.value(Var(idx)).data();
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.value(v).len()]);
            f(slot);
        };
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).shape()[1];
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                acc(*a, &mut |g| gemm_nt_acc(gy, bv, g, m, n, k));
                acc(*b, &mut |g| gemm_tn_acc(av, gy, g, m, k, n));
            }
            Op::MatMulNt(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).shape()[0];
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                acc(*a, &mut |g| gemm_acc(gy, bv, g, m, n, k));
                acc(*b, &mut |g| gemm_tn_acc(gy, av, g, m, n, k));
            }
            Op::Transpose(a) => {
                let (m, n) = self.value(*a).dims2().unwrap();
                acc(*a, &mut |g| {
                    for i in 0..m {
                        for j in 0..n {
                            g[i * n + j] += gy[j * m + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |g| add_into(g, gy));
                acc(*b, &mut |g| add_into(g, gy));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |g| add_into(g, gy));
                acc(*b, &mut |g| g.iter_mut().zip(gy).for_each(|(x, d)| *x -= d));
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                acc(*a, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * bv[i];
                    }
                });
                acc(*b, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * av[i];
                    }
                });
            }
            Op::AddBias(a, bias) => {
                acc(*a, &mut |g| add_into(g, gy));
                acc(*bias, &mut |g| {
                    let n = g.len();
                    for row in gy.chunks(n) {
                        add_into(g, row);
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |g| {
                g.iter_mut().zip(gy).for_each(|(x, d)| *x += c * d)
            }),
            Op::MulConst(a, factor) => acc(*a, &mut |g| {
                for i in 0..g.len() {
                    g[i] += gy[i] * factor[i];
                }
            }),
            Op::Tanh(a) => acc(*a, &mut |g| {
                for i in 0..g.len() {
                    g[i] += gy[i] * (1.0 - y[i] * y[i]);
                }
            }),
            Op::Gelu(a) => {
                let xv = self.value(*a).data();
                acc(*a, &mut |g| {
                    for i in 0..g.len() {
                        g[i] += gy[i] * gelu_grad(xv[i]);
                    }
                });
            }
            Op::Softmax(a) => {
                let n = self.last_axis(*a);
                acc(*a, &mut |g| {
                    for ((gr, yr), gyr) in g.chunks_mut(n).zip(y.chunks(n)).zip(gy.chunks(n)) {
                        let dot: f64 = yr.iter().zip(gyr).map(|(p, d)| p * d).sum();
                        for j in 0..n {
                            gr[j] += yr[j] * (gyr[j] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let n = self.last_axis(*a);
                acc(*a, &mut |g| {
                    for ((gr, yr), gyr) in g.chunks_mut(n).zip(y.chunks(n)).zip(gy.chunks(n)) {
                        let total: f64 = gyr.iter().sum();
                        for j in 0..n {
                            gr[j] += gyr[j] - libm::exp(yr[j]) * total;
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            } => {
                let n = self.value(*gamma).len();
                let mut xhat = self.value(*x).data().to_vec();
                let inv_std: Vec<f64> =
                    xhat.chunks_mut(n).map(|r| normalize_row(r, *eps)).collect();
                let gv = self.value(*gamma).data();
                acc(*gamma, &mut |g| {
                    for (row_h, row_g) in xhat.chunks(n).zip(gy.chunks(n)) {
                        for j in 0..n {
                            g[j] += row_h[j] * row_g[j];
                        }
                    }
                });
                acc(*beta, &mut |g| {
                    for row in gy.chunks(n) {
                        add_into(g, row);
                    }
                });
                acc(*x, &mut |g| {
                    let mut dh = vec![0.0; n];
                    for (i, (row_h, row_g)) in xhat.chunks(n).zip(gy.chunks(n)).enumerate() {
                        for j in 0..n {
                            dh[j] = row_g[j] * gv[j];
                        }
                        let mean_dh = dh.iter().sum::<f64>() / n as f64;
                        let mean_dh_h =
                            dh.iter().zip(row_h).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        let out = &mut g[i * n..(i + 1) * n];
                        for j in 0..n {
                            out[j] += inv_std[i] * (dh[j] - mean_dh - row_h[j] * mean_dh_h);
                        }
                    }
                });
            }
            Op::Gather { table, ids } => {
                let d = self.shape(*table)[1];
                acc(*table, &mut |g| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut g[id * d..(id + 1) * d], &gy[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::SelectRows { x, rows } => {
                let n = self.shape(*x)[1];
                acc(*x, &mut |g| {
                    for (r, &src) in rows.iter().enumerate() {
                        add_into(&mut g[src * n..(src + 1) * n], &gy[r * n..(r + 1) * n]);
                    }
                });
            }
            Op::SliceCols { x, start, len } => {
                let n = self.shape(*x)[1];
                let len = *len;
                acc(*x, &mut |g| {
                    for (i, row) in gy.chunks(len).enumerate() {
                        add_into(&mut g[i * n + start..i * n + start + len], row);
                    }
                });
            }
            Op::Pick { x, indices } => acc(*x, &mut |g| {
                for (k, &i) in indices.iter().enumerate() {
                    g[i] += gy[k];
                }
            }),
            Op::Concat { parts, axis } => {
                let out_shape = self.shape(Var(idx));
                if out_shape.len() == 1 || *axis == 0 {
                    let mut off = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        acc(p, &mut |g| add_into(g, &gy[off..off + len]));
                        off += len;
                    }
                } else {
                    let total = out_shape[1];
                    let mut col = 0;
                    for &p in parts {
                        let w = self.shape(p)[1];
                        acc(p, &mut |g| {
                            for (r, grow) in g.chunks_mut(w).enumerate() {
                                add_into(grow, &gy[r * total + col..r * total + col + w]);
                            }
                        });
                        col += w;
                    }
                }
            }
            Op::MeanAxis { x, axis } => {
                let shape = self.shape(*x);
                let (m, n) = if shape.len() == 1 {
                    (1, shape[0])
                } else {
                    (shape[0], shape[1])
                };
                acc(*x, &mut |g| {
                    if shape.len() == 1 {
                        g.iter_mut().for_each(|v| *v += gy[0] / n as f64);
                    } else if *axis == 0 {
                        for i in 0..m {
                            for j in 0..n {
                                g[i * n + j] += gy[j] / m as f64;
                            }
                        }
                    } else {
                        for i in 0..m {
                            for j in 0..n {
                                g[i * n + j] += gy[i] / n as f64;
                            }
                        }
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |g| g.iter_mut().for_each(|v| *v += gy[0])),
            Op::Reshape(x, _) => acc(*x, &mut |g| add_into(g, gy)),
            Op::BcePair { p, label } => {
                let pv = self.value(*p).data()[*label];
                acc(*p, &mut |g| {
                    if pv > PROB_CLAMP && pv < 1.0 - PROB_CLAMP {
                        g[*label] += -gy[0] / pv;
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Normalise `row` in place to zero mean and unit variance; returns `1/σ`.
fn normalize_row(row: &mut [f64], eps: f64) -> f64 {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / libm::sqrt(var + eps);
    row.iter_mut().for_each(|v| *v = (*v - mean) * inv_std);
    inv_std
}

// 0.5 (1 + tanh u) written as the logistic function of 2u
fn gelu_gate(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    1.0 / (1.0 + libm::exp(-2.0 * u))
}

fn gelu_grad(x: f64) -> f64 {
    let s = gelu_gate(x);
    let du = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
    s + 2.0 * x * s * (1.0 - s) * du
}

/// Value-level binary cross-entropy on a probability pair.
pub fn bce_pair_value(p: [f64; 2], label: usize) -> Result<f64> {
    if label > 1 {
        return Err(Error::InvalidLabel(label));
    }
    let valid = p.iter().all(|v| v.is_finite() && *v >= 0.0) && (p[0] + p[1] - 1.0).abs() <= 1e-9;
    if !valid {
        return Err(Error::InvalidProbability { p1: p[0], p2: p[1] });
    }
    let q = p[label].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    Ok(-libm::log(q))
}

/// Result of [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` required one and was reached.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Collect gradients for every parameter node in `graph`.
    pub fn param_grads(&self, graph: &Graph<'_>) -> ParamGrads {
        let mut entries = Vec::new();
        for (pid, var) in graph.param_vars.iter().enumerate() {
            if let Some(v) = var {
                if let Some(g) = self.get(*v) {
                    entries.push((ParamId(pid), g.to_vec()));
                }
            }
        }
        ParamGrads { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sum_gives_all_ones() {
        let mut g = Graph::detached();
        let x = g.leaf(
            Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap(),
            true,
        );
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn reuse_accumulates() {
        let mut g = Graph::detached();
        let x = g.leaf(Tensor::scalar(3.0), true);
        let sq = g.mul(x, x).unwrap();
        let grads = g.backward(sq).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[6.0]);
    }

    #[test]
    fn bce_softmax_gradient_at_origin() {
        let mut g = Graph::detached();
        let z = g.leaf(Tensor::vector(vec![0.0, 0.0]), true);
        let p = g.softmax(z);
        let loss = g.bce_pair_loss(p, 0).unwrap();
        assert!(close(g.scalar(loss), core::f64::consts::LN_2, 1e-15));
        let grads = g.backward(loss).unwrap();
        let dz = grads.get(z).unwrap();
        assert!(close(dz[0], -0.5, 1e-12) && close(dz[1], 0.5, 1e-12));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn bce_examples() {
        assert!(close(
            bce_pair_value([0.5, 0.5], 0).unwrap(),
            0.693147,
            1e-6
        ));
        let perfect = bce_pair_value([1.0, 0.0], 0).unwrap();
        assert!(close(perfect, -libm::log(1.0 - 1e-12), 1e-24));
        assert!(close(perfect, 1e-12, 1e-15));
        assert!(close(
            bce_pair_value([0.25, 0.75], 1).unwrap(),
            -libm::log(0.75),
            1e-15
        ));
        assert!(close(-libm::log(0.75), 0.287682, 1e-6));
        assert_eq!(bce_pair_value([0.5, 0.5], 2), Err(Error::InvalidLabel(2)));
        assert!(bce_pair_value([0.5, 0.6], 0).is_err());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::detached();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0]), true);
        let y = g.tanh(x);
        assert!(matches!(g.backward(y), Err(Error::NotScalar { .. })));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let mut g = Graph::detached();
        let a = g.leaf(Tensor::zeros(&[2, 3]), false);
        let b = g.leaf(Tensor::zeros(&[2, 3]), false);
        match g.matmul(a, b) {
            Err(Error::ShapeMismatch { op, lhs, rhs }) => {
                assert_eq!(op, "matmul");
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let c = g.leaf(Tensor::zeros(&[3, 2]), false);
        assert!(matches!(
            g.add(a, c),
            Err(Error::ShapeMismatch { op: "add", .. })
        ));
        assert!(matches!(
            g.mul(a, c),
            Err(Error::ShapeMismatch {
                op: "elementwise_mul",
                ..
            })
        ));
        assert!(matches!(
            g.concat(&[a, c], 0),
            Err(Error::ShapeMismatch { op: "concat", .. })
        ));
    }

    #[test]
    fn concat_and_mean_values() {
        let mut g = Graph::detached();
        let a = g.leaf(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap(), false);
        let b = g.leaf(
            Tensor::matrix(2, 2, vec![3.0, 4.0, 5.0, 6.0]).unwrap(),
            false,
        );
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let m0 = g.mean_axis(c, 0).unwrap();
        assert_eq!(g.value(m0).data(), &[1.5, 4.0, 5.0]);
        let m1 = g.mean_axis(c, 1).unwrap();
        assert_eq!(g.shape(m1), &[2, 1]);
        assert!(close(g.value(m1).data()[1], 13.0 / 3.0, 1e-15));
    }
}
