//! Reverse-mode tape. Every primitive appends a node whose inputs precede it,
//! so the node order is already a topological order.

use std::collections::HashMap;

use super::matrix::Matrix;
use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Transpose(Var),
    MaskedSoftmaxRows(Var),
    LogSumExpRows(Var),
    MeanRows(Var),
    RowSums(Var),
    SumAll(Var),
    SquaredErrorMean(Var, Var),
    L2NormRows(Var),
    Dot(Var, Var),
    SelectRows(Var, Vec<usize>),
    RepeatRows(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    grad: Option<Matrix>,
    requires_grad: bool,
    op: Op,
}

/// Records one forward computation and runs its backward sweep.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    backward_done: bool,
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Constant, false, "constant")
    }

    /// Differentiable leaf that is not backed by a parameter store.
    pub fn leaf(&mut self, value: Matrix) -> Result<Var> {
        self.push(value, Op::Param, true, "leaf")
    }

    /// Leaf for a stored parameter; repeated calls return the same handle.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.params.get(&id) {
            return Ok(v);
        }
        let v = self.push(store.get(id).clone(), Op::Param, true, "param")?;
        self.params.insert(id, v);
        Ok(v)
    }

    /// Copy of `v` that gradients do not flow through.
    pub fn detach(&mut self, v: Var) -> Result<Var> {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        self.push(value, Op::MatMul(a, b), rg, "matmul")
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(
        &mut self,
        a: Var,
        b: Var,
        op: Op,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Matrix::from_vec(va.rows(), va.cols(), data)?;
        let rg = self.rg(&[a, b]);
        self.push(value, op, rg, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).map(|x| x * c);
        let rg = self.rg(&[a]);
        self.push(value, Op::Scale(a, c), rg, "scale")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let value = self.value(a).map(|x| if x >= 0.0 { x } else { slope * x });
        let rg = self.rg(&[a]);
        self.push(value, Op::LeakyRelu(a, slope), rg, "leaky_relu")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(value, Op::Tanh(a), rg, "tanh")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::exp);
        let rg = self.rg(&[a]);
        self.push(value, Op::Exp(a), rg, "exp")
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(f64::ln);
        let rg = self.rg(&[a]);
        self.push(value, Op::Log(a), rg, "log")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(value, Op::Transpose(a), rg, "transpose")
    }

    /// Row-wise softmax restricted to entries where `mask` is true; masked
    /// entries come out as exactly zero. `mask` is row-major with the shape of `a`.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        if mask.len() != rows * cols {
            return Err(Error::shape(
                "masked_softmax_rows",
                format!("mask of {} entries for {rows}x{cols}", mask.len()),
            ));
        }
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let m = &mask[i * cols..(i + 1) * cols];
            let row = x.row(i);
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &keep)| keep)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::shape(
                    "masked_softmax_rows",
                    format!("row {i} has no allowed entry"),
                ));
            }
            let o = out.row_mut(i);
            let mut total = 0.0;
            for j in 0..cols {
                if m[j] {
                    o[j] = (row[j] - max).exp();
                    total += o[j];
                }
            }
            for v in o.iter_mut() {
                *v /= total;
            }
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::MaskedSoftmaxRows(a), rg, "masked_softmax_rows")
    }

    /// `log Σ_j exp(a[i, j])` per row, as an `r × 1` column.
    pub fn log_sum_exp_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.cols() == 0 {
            return Err(Error::shape("log_sum_exp_rows", "zero columns"));
        }
        let data = (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
            })
            .collect();
        let value = Matrix::from_vec(x.rows(), 1, data)?;
        let rg = self.rg(&[a]);
        self.push(value, Op::LogSumExpRows(a), rg, "log_sum_exp_rows")
    }

    /// Mean over rows: `r × c` to `1 × c`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(Error::shape("mean_rows", "no rows"));
        }
        let mut out = Matrix::zeros(1, x.cols());
        for i in 0..x.rows() {
            for (o, v) in out.as_mut_slice().iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        let n = x.rows() as f64;
        let value = out.map(|v| v / n);
        let rg = self.rg(&[a]);
        self.push(value, Op::MeanRows(a), rg, "mean_rows")
    }

    /// Sum of each row: `r × c` to `r × 1`.
    pub fn row_sums(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let data = (0..x.rows()).map(|i| x.row(i).iter().sum()).collect();
        let value = Matrix::from_vec(x.rows(), 1, data)?;
        let rg = self.rg(&[a]);
        self.push(value, Op::RowSums(a), rg, "row_sums")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(a).as_slice().iter().sum());
        let rg = self.rg(&[a]);
        self.push(value, Op::SumAll(a), rg, "sum_all")
    }

    /// Mean of squared differences over every entry.
    pub fn squared_error_mean(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("squared_error_mean", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        if va.is_empty() {
            return Err(Error::shape("squared_error_mean", "empty input"));
        }
        let sum: f64 = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let value = Matrix::scalar(sum / va.len() as f64);
        let rg = self.rg(&[a, b]);
        self.push(value, Op::SquaredErrorMean(a, b), rg, "squared_error_mean")
    }

    /// Euclidean norm of each row, as an `r × 1` column.
    pub fn l2_norm_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let data = (0..x.rows())
            .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let value = Matrix::from_vec(x.rows(), 1, data)?;
        let rg = self.rg(&[a]);
        self.push(value, Op::L2NormRows(a), rg, "l2_norm_rows")
    }

    /// Sum of elementwise products of two equally shaped tensors.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("dot", a, b)?;
        let value = Matrix::scalar(
            self.value(a)
                .as_slice()
                .iter()
                .zip(self.value(b).as_slice())
                .map(|(x, y)| x * y)
                .sum(),
        );
        let rg = self.rg(&[a, b]);
        self.push(value, Op::Dot(a, b), rg, "dot")
    }

    pub fn select_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let x = self.value(a);
        let mut out = Matrix::zeros(indices.len(), x.cols());
        for (k, &i) in indices.iter().enumerate() {
            if i >= x.rows() {
                return Err(Error::shape("select_rows", format!("row {i} of {}", x.rows())));
            }
            out.row_mut(k).copy_from_slice(x.row(i));
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::SelectRows(a, indices.to_vec()), rg, "select_rows")
    }

    /// Repeats a `1 × c` row `n` times.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let x = self.value(a);
        if x.rows() != 1 {
            return Err(Error::shape(
                "repeat_rows",
                format!("{} rows, expected 1", x.rows()),
            ));
        }
        let mut out = Matrix::zeros(n, x.cols());
        for i in 0..n {
            out.row_mut(i).copy_from_slice(x.row(0));
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::RepeatRows(a), rg, "repeat_rows")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(Error::shape("concat_rows", "no inputs"));
        };
        let cols = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::shape(
                    "concat_rows",
                    format!("{} vs {cols} columns", v.cols()),
                ));
            }
            rows += v.rows();
            data.extend_from_slice(v.as_slice());
        }
        let value = Matrix::from_vec(rows, cols, data)?;
        let rg = self.rg(parts);
        self.push(value, Op::ConcatRows(parts.to_vec()), rg, "concat_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(first) = parts.first() else {
            return Err(Error::shape("concat_cols", "no inputs"));
        };
        let rows = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Error::shape(
                    "concat_cols",
                    format!("{} vs {rows} rows", v.rows()),
                ));
            }
            cols += v.cols();
        }
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let v = self.value(p);
            for i in 0..rows {
                out.row_mut(i)[offset..offset + v.cols()].copy_from_slice(v.row(i));
            }
            offset += v.cols();
        }
        let rg = self.rg(parts);
        self.push(out, Op::ConcatCols(parts.to_vec()), rg, "concat_cols")
    }

    /// Clears every gradient so `backward` may run again.
    pub fn reset_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
        self.backward_done = false;
    }

    /// Reverse sweep from a `1 × 1` root. A second call without
    /// [`Tape::reset_grads`] is an error.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Backward(
                "backward already ran on this tape; reset gradients first".into(),
            ));
        }
        if self.value(root).shape() != (1, 1) {
            return Err(Error::Backward(format!(
                "root must be scalar, got {:?}",
                self.value(root).shape()
            )));
        }
        self.backward_done = true;
        if !self.nodes[root.0].requires_grad {
            return Ok(());
        }
        self.nodes[root.0].grad = Some(Matrix::scalar(1.0));
        for idx in (0..=root.0).rev() {
            let Some(g) = self.nodes[idx].grad.take() else {
                continue;
            };
            let op = self.nodes[idx].op.clone();
            self.propagate(idx, &op, &g)?;
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, target: Var, g: Matrix, from: usize) -> Result<()> {
        if target.0 >= from {
            return Err(Error::Backward(format!(
                "cycle: node {from} depends on later node {}",
                target.0
            )));
        }
        let node = &mut self.nodes[target.0];
        if !node.requires_grad {
            return Ok(());
        }
        match &mut node.grad {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, op: &Op, g: &Matrix) -> Result<()> {
        let val = |t: &Tape, v: Var| t.nodes[v.0].value.clone();
        match *op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (val(self, a), val(self, b));
                if self.requires_grad(a) {
                    self.accumulate(a, g.matmul(&vb.transpose())?, idx)?;
                }
                if self.requires_grad(b) {
                    self.accumulate(b, va.transpose().matmul(g)?, idx)?;
                }
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.clone(), idx)?;
                self.accumulate(b, g.clone(), idx)?;
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g.clone(), idx)?;
                self.accumulate(b, g.map(|v| -v), idx)?;
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(self, a), val(self, b));
                self.accumulate(a, hadamard(g, &vb), idx)?;
                self.accumulate(b, hadamard(g, &va), idx)?;
            }
            Op::Scale(a, c) => self.accumulate(a, g.map(|v| v * c), idx)?,
            Op::LeakyRelu(a, slope) => {
                let x = val(self, a);
                let d = x.map(|v| if v >= 0.0 { 1.0 } else { slope });
                self.accumulate(a, hadamard(g, &d), idx)?;
            }
            Op::Tanh(a) => {
                let d = self.nodes[idx].value.map(|y| 1.0 - y * y);
                self.accumulate(a, hadamard(g, &d), idx)?;
            }
            Op::Exp(a) => {
                let y = self.nodes[idx].value.clone();
                self.accumulate(a, hadamard(g, &y), idx)?;
            }
            Op::Log(a) => {
                let d = val(self, a).map(|x| 1.0 / x);
                self.accumulate(a, hadamard(g, &d), idx)?;
            }
            Op::Transpose(a) => self.accumulate(a, g.transpose(), idx)?,
            Op::MaskedSoftmaxRows(a) => {
                let y = &self.nodes[idx].value;
                let mut dx = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (j, d) in dx.row_mut(i).iter_mut().enumerate() {
                        *d = yr[j] * (gr[j] - inner);
                    }
                }
                self.accumulate(a, dx, idx)?;
            }
            Op::LogSumExpRows(a) => {
                let x = val(self, a);
                let lse = &self.nodes[idx].value;
                let mut dx = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let (l, gi) = (lse[(i, 0)], g[(i, 0)]);
                    for (d, v) in dx.row_mut(i).iter_mut().zip(x.row(i)) {
                        *d = gi * (v - l).exp();
                    }
                }
                self.accumulate(a, dx, idx)?;
            }
            Op::MeanRows(a) => {
                let rows = self.nodes[a.0].value.rows();
                let mut dx = Matrix::zeros(rows, g.cols());
                for i in 0..rows {
                    for (d, v) in dx.row_mut(i).iter_mut().zip(g.row(0)) {
                        *d = v / rows as f64;
                    }
                }
                self.accumulate(a, dx, idx)?;
            }
            Op::RowSums(a) => {
                let (rows, cols) = self.nodes[a.0].value.shape();
                let mut dx = Matrix::zeros(rows, cols);
                for i in 0..rows {
                    dx.row_mut(i).fill(g[(i, 0)]);
                }
                self.accumulate(a, dx, idx)?;
            }
            Op::SumAll(a) => {
                let (rows, cols) = self.nodes[a.0].value.shape();
                self.accumulate(a, Matrix::filled(rows, cols, g.item()), idx)?;
            }
            Op::SquaredErrorMean(a, b) => {
                let (va, vb) = (val(self, a), val(self, b));
                let k = 2.0 * g.item() / va.len() as f64;
                let data = va
                    .as_slice()
                    .iter()
                    .zip(vb.as_slice())
                    .map(|(x, y)| k * (x - y))
                    .collect();
                let da = Matrix::from_vec(va.rows(), va.cols(), data)?;
                self.accumulate(b, da.map(|v| -v), idx)?;
                self.accumulate(a, da, idx)?;
            }
            Op::L2NormRows(a) => {
                let x = val(self, a);
                let norms = &self.nodes[idx].value;
                let mut dx = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    let n = norms[(i, 0)];
                    if n == 0.0 {
                        continue;
                    }
                    let k = g[(i, 0)] / n;
                    for (d, v) in dx.row_mut(i).iter_mut().zip(x.row(i)) {
                        *d = k * v;
                    }
                }
                self.accumulate(a, dx, idx)?;
            }
            Op::Dot(a, b) => {
                let (va, vb) = (val(self, a), val(self, b));
                let s = g.item();
                self.accumulate(a, vb.map(|v| v * s), idx)?;
                self.accumulate(b, va.map(|v| v * s), idx)?;
            }
            Op::SelectRows(a, ref indices) => {
                let (rows, cols) = self.nodes[a.0].value.shape();
                let mut dx = Matrix::zeros(rows, cols);
                for (k, &i) in indices.iter().enumerate() {
                    for (d, v) in dx.row_mut(i).iter_mut().zip(g.row(k)) {
                        *d += v;
                    }
                }
                self.accumulate(a, dx, idx)?;
            }
            Op::RepeatRows(a) => {
                let mut dx = Matrix::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for (d, v) in dx.as_mut_slice().iter_mut().zip(g.row(i)) {
                        *d += v;
                    }
                }
                self.accumulate(a, dx, idx)?;
            }
            Op::ConcatRows(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = self.nodes[p.0].value.shape();
                    let slice = g.as_slice()[offset * cols..(offset + rows) * cols].to_vec();
                    self.accumulate(p, Matrix::from_vec(rows, cols, slice)?, idx)?;
                    offset += rows;
                }
            }
            Op::ConcatCols(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = self.nodes[p.0].value.shape();
                    let mut part = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        part.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + cols]);
                    }
                    self.accumulate(p, part, idx)?;
                    offset += cols;
                }
            }
        }
        Ok(())
    }

    /// Gradients of every parameter bound on this tape; parameters never
    /// touched by the forward pass get `None`.
    pub fn param_grads(&self, store: &ParamStore) -> Gradients {
        let mut grads = Gradients::empty(store.len());
        for (&id, &v) in &self.params {
            if let Some(g) = &self.nodes[v.0].grad {
                grads.set(id, g.clone());
            }
        }
        grads
    }
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn singleton_softmax_row() {
        let mut t = Tape::new();
        let a = t.constant(m(1, 3, &[5.0, -2.0, 9.0])).unwrap();
        let s = t.masked_softmax_rows(a, &[false, true, false]).unwrap();
        assert_eq!(t.value(s).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_mask_row_is_an_error() {
        let mut t = Tape::new();
        let a = t.constant(m(2, 2, &[1., 2., 3., 4.])).unwrap();
        assert!(t.masked_softmax_rows(a, &[true, false, false, false]).is_err());
    }

    #[test]
    fn leaky_relu_value_and_slope() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::scalar(-1.0)).unwrap();
        let y = t.leaky_relu(a, 0.2).unwrap();
        assert!((t.value(y).item() + 0.2).abs() < 1e-15);
        t.backward(y).unwrap();
        assert!((t.grad(a).unwrap().item() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sum_all_gradient_is_ones() {
        let mut t = Tape::new();
        let a = t.leaf(m(2, 3, &[1., -2., 3., 0.5, 0., 7.])).unwrap();
        let s = t.sum_all(a).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(a).unwrap().as_slice(), &[1.0; 6]);
    }

    #[test]
    fn dot_self_gradient_is_twice() {
        let mut t = Tape::new();
        let a = t.leaf(m(1, 3, &[1.5, -2.0, 0.25])).unwrap();
        let d = t.dot(a, a).unwrap();
        t.backward(d).unwrap();
        assert_eq!(t.grad(a).unwrap().as_slice(), &[3.0, -4.0, 0.5]);
    }

    #[test]
    fn backward_twice_requires_reset() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::scalar(2.0)).unwrap();
        let y = t.scale(a, 3.0).unwrap();
        t.backward(y).unwrap();
        assert!(t.backward(y).is_err());
        t.reset_grads();
        t.backward(y).unwrap();
        assert_eq!(t.grad(a).unwrap().item(), 3.0);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut t = Tape::new();
        let a = t.leaf(m(1, 2, &[1., 2.])).unwrap();
        assert!(t.backward(a).is_err());
    }

    #[test]
    fn non_finite_trips() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::scalar(0.0)).unwrap();
        assert!(matches!(t.log(a), Err(Error::NonFinite { op: "log" })));
        let big = t.constant(Matrix::scalar(1000.0)).unwrap();
        assert!(t.exp(big).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut t = Tape::new();
        let a = t.constant(m(1, 2, &[1., 2.])).unwrap();
        let b = t.constant(m(2, 1, &[1., 2.])).unwrap();
        assert!(matches!(t.add(a, b), Err(Error::Shape { .. })));
        assert!(t.matmul(a, a).is_err());
    }

    #[test]
    fn select_rows_routes_only_selected() {
        let mut t = Tape::new();
        let a = t.leaf(m(3, 2, &[1., 2., 3., 4., 5., 6.])).unwrap();
        let s = t.select_rows(a, &[2, 2, 0]).unwrap();
        let y = t.sum_all(s).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(a).unwrap().as_slice(), &[1., 1., 0., 0., 2., 2.]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::scalar(2.0)).unwrap();
        let d = t.detach(a).unwrap();
        let y = t.mul(a, d).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(a).unwrap().item(), 2.0);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let mut t = Tape::new();
        let a = t.constant(m(1, 2, &[1000.0, 1000.0])).unwrap();
        let l = t.log_sum_exp_rows(a).unwrap();
        assert!((t.value(l).item() - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
