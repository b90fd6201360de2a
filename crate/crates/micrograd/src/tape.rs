//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends one node holding its forward value and the
//! handles of its parents. Nodes are only ever appended, so the tape index
//! order is already a topological order and [`Tape::backward`] is a single
//! reverse sweep.

use crate::tensor::{matmul_nn, matmul_nt, matmul_tn, Scalar, Tensor};
use crate::Error;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Softmax(Var),
    LayerNorm { input: Var, inv_std: Vec<T> },
    Silu(Var),
    Embed { table: Var, indices: Vec<usize> },
    MaskedFill { input: Var, mask: Vec<bool> },
    Sum(Var),
    Mse(Var, Var),
    SliceCols { input: Var, start: usize },
    ConcatCols(Vec<Var>),
    Transpose(Var),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records a computation for later differentiation.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss with respect to `v`; zeros when `v` is not on any
    /// path to the loss.
    pub fn get(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn is_reached(&self, v: Var) -> bool {
        self.grads[v.0].is_some()
    }
}

fn matrix_dims<T: Scalar>(t: &Tensor<T>) -> Result<(usize, usize), Error> {
    t.as_matrix_dims()
        .ok_or_else(|| Error::NotMatrix(t.shape().to_vec()))
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A differentiable input (parameter or input we want gradients for).
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Copies the value of `v` into a new constant, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), Error> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        let (m, k) = matrix_dims(self.value(a))?;
        let (k2, n) = matrix_dims(self.value(b))?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        let data = matmul_nn(self.value(a).data(), self.value(b).data(), m, k, n);
        let value = Tensor::new(vec![m, n], data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    fn zip_with(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var, Error> {
        self.same_shape(op_name, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, op, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let value = self.value(a).map(|x| x * s);
        let ng = self.ng(a);
        self.push(value, Op::Scale(a, s), ng)
    }

    fn check_row(&self, op: &'static str, x: Var, row: Var) -> Result<usize, Error> {
        let n = self.value(x).last_dim();
        if self.value(row).len() != n {
            return Err(Error::ShapeMismatch {
                op,
                left: self.value(x).shape().to_vec(),
                right: self.value(row).shape().to_vec(),
            });
        }
        Ok(n)
    }

    /// `x + row` with `row` broadcast over every leading index (bias add).
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, Error> {
        let n = self.check_row("add_row", x, row)?;
        let r = self.value(row).data().to_vec();
        let mut value = self.value(x).clone();
        for (i, v) in value.data_mut().iter_mut().enumerate() {
            *v = *v + r[i % n];
        }
        let ng = self.ng(x) || self.ng(row);
        Ok(self.push(value, Op::AddRow(x, row), ng))
    }

    /// `x * row` with `row` broadcast over every leading index.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var, Error> {
        let n = self.check_row("mul_row", x, row)?;
        let r = self.value(row).data().to_vec();
        let mut value = self.value(x).clone();
        for (i, v) in value.data_mut().iter_mut().enumerate() {
            *v = *v * r[i % n];
        }
        let ng = self.ng(x) || self.ng(row);
        Ok(self.push(value, Op::MulRow(x, row), ng))
    }

    /// Softmax over the trailing axis. `-inf` entries get probability zero;
    /// a row must contain at least one finite entry.
    pub fn softmax(&mut self, x: Var) -> Result<Var, Error> {
        let n = self.value(x).last_dim();
        let mut value = self.value(x).clone();
        if n > 0 {
            for row in value.data_mut().chunks_mut(n) {
                let max = row.iter().copied().fold(T::neg_infinity(), T::max);
                if max == T::neg_infinity() {
                    return Err(Error::EmptySoftmaxRow);
                }
                let mut total = T::zero();
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total = total + *v;
                }
                for v in row.iter_mut() {
                    *v = *v / total;
                }
            }
        }
        let ng = self.ng(x);
        Ok(self.push(value, Op::Softmax(x), ng))
    }

    /// Normalizes each trailing-axis row to zero mean and unit variance (no
    /// affine part).
    pub fn layer_norm(&mut self, x: Var, eps: T) -> Var {
        let n = self.value(x).last_dim();
        let nt = T::from_usize(n.max(1)).unwrap();
        let mut value = self.value(x).clone();
        let mut inv_std = Vec::new();
        if n > 0 {
            for row in value.data_mut().chunks_mut(n) {
                let mean = row.iter().copied().sum::<T>() / nt;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nt;
                let inv = T::one() / (var + eps).sqrt();
                for v in row.iter_mut() {
                    *v = (*v - mean) * inv;
                }
                inv_std.push(inv);
            }
        }
        let ng = self.ng(x);
        self.push(value, Op::LayerNorm { input: x, inv_std }, ng)
    }

    pub fn silu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v / (T::one() + (-v).exp()));
        let ng = self.ng(x);
        self.push(value, Op::Silu(x), ng)
    }

    /// Gathers rows of `table` (`[vocab, dim]`).
    pub fn embed(&mut self, table: Var, indices: &[usize]) -> Result<Var, Error> {
        let (vocab, dim) = matrix_dims(self.value(table))?;
        let t = self.value(table).data();
        let mut data = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            if i >= vocab {
                return Err(Error::IndexOutOfRange { index: i, len: vocab });
            }
            data.extend_from_slice(&t[i * dim..(i + 1) * dim]);
        }
        let value = Tensor::new(vec![indices.len(), dim], data)?;
        let ng = self.ng(table);
        Ok(self.push(
            value,
            Op::Embed {
                table,
                indices: indices.to_vec(),
            },
            ng,
        ))
    }

    /// Replaces entries where `mask` is true with `fill`.
    pub fn masked_fill(&mut self, x: Var, mask: &[bool], fill: T) -> Result<Var, Error> {
        if mask.len() != self.value(x).len() {
            return Err(Error::ShapeMismatch {
                op: "masked_fill",
                left: self.value(x).shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        let mut value = self.value(x).clone();
        for (v, &m) in value.data_mut().iter_mut().zip(mask) {
            if m {
                *v = fill;
            }
        }
        let ng = self.ng(x);
        Ok(self.push(
            value,
            Op::MaskedFill {
                input: x,
                mask: mask.to_vec(),
            },
            ng,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let ng = self.ng(x);
        self.push(value, Op::Sum(x), ng)
    }

    /// `mean((pred - target)²)` over all elements.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, Error> {
        self.same_shape("mse", pred, target)?;
        let (p, t) = (self.value(pred), self.value(target));
        let n = T::from_usize(p.len().max(1)).unwrap();
        let total: T = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        let ng = self.ng(pred) || self.ng(target);
        Ok(self.push(Tensor::scalar(total / n), Op::Mse(pred, target), ng))
    }

    /// Columns `start..start + len` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, Error> {
        let (r, c) = matrix_dims(self.value(x))?;
        if start + len > c {
            return Err(Error::IndexOutOfRange {
                index: start + len,
                len: c,
            });
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&src[i * c + start..i * c + start + len]);
        }
        let value = Tensor::new(vec![r, len], data)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::SliceCols { input: x, start }, ng))
    }

    /// Concatenates matrices with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, Error> {
        let first = *parts.first().ok_or(Error::EmptyConcat)?;
        let (rows, _) = matrix_dims(self.value(first))?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = matrix_dims(self.value(p))?;
            if r != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    left: self.value(first).shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let value = Tensor::new(vec![rows, total], data)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, Error> {
        let value = self.value(x).transpose()?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Transpose(x), ng))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// The tape is left untouched, so calling this twice yields identical
    /// gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, Error> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(lv.shape().to_vec(), vec![T::one()])?);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads)?;
            }
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(
        &self,
        node: &Node<T>,
        g: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) -> Result<(), Error> {
        let shaped = |v: Var, data: Vec<T>| Tensor::new(self.value(v).shape().to_vec(), data);
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::MatMul(a, b) => {
                let (m, k) = matrix_dims(self.value(*a))?;
                let (_, n) = matrix_dims(self.value(*b))?;
                if self.ng(*a) {
                    let da = matmul_nt(g.data(), self.value(*b).data(), m, n, k);
                    self.accumulate(grads, *a, shaped(*a, da)?);
                }
                if self.ng(*b) {
                    let db = matmul_tn(self.value(*a).data(), g.data(), m, k, n);
                    self.accumulate(grads, *b, shaped(*b, db)?);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if self.ng(*a) {
                    let da = g.data().iter().zip(vb).map(|(&d, &y)| d * y).collect();
                    self.accumulate(grads, *a, shaped(*a, da)?);
                }
                if self.ng(*b) {
                    let db = g.data().iter().zip(va).map(|(&d, &x)| d * x).collect();
                    self.accumulate(grads, *b, shaped(*b, db)?);
                }
            }
            Op::Scale(a, s) => {
                let s = *s;
                self.accumulate(grads, *a, g.map(|x| x * s));
            }
            Op::AddRow(x, row) => {
                self.accumulate(grads, *x, g.clone());
                if self.ng(*row) {
                    let n = self.value(*row).len();
                    let mut dr = vec![T::zero(); n];
                    for (i, &d) in g.data().iter().enumerate() {
                        dr[i % n] = dr[i % n] + d;
                    }
                    self.accumulate(grads, *row, shaped(*row, dr)?);
                }
            }
            Op::MulRow(x, row) => {
                let n = self.value(*row).len();
                let r = self.value(*row).data();
                if self.ng(*x) {
                    let dx = g
                        .data()
                        .iter()
                        .enumerate()
                        .map(|(i, &d)| d * r[i % n])
                        .collect();
                    self.accumulate(grads, *x, shaped(*x, dx)?);
                }
                if self.ng(*row) {
                    let xv = self.value(*x).data();
                    let mut dr = vec![T::zero(); n];
                    for (i, (&d, &xi)) in g.data().iter().zip(xv).enumerate() {
                        dr[i % n] = dr[i % n] + d * xi;
                    }
                    self.accumulate(grads, *row, shaped(*row, dr)?);
                }
            }
            Op::Softmax(x) => {
                let y = node.value.data();
                let n = node.value.last_dim();
                let mut dx = vec![T::zero(); y.len()];
                for ((yr, gr), dr) in y.chunks(n).zip(g.data().chunks(n)).zip(dx.chunks_mut(n)) {
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for ((d, &yi), &gi) in dr.iter_mut().zip(yr).zip(gr) {
                        *d = yi * (gi - dot);
                    }
                }
                self.accumulate(grads, *x, shaped(*x, dx)?);
            }
            Op::LayerNorm { input, inv_std } => {
                let xhat = node.value.data();
                let n = node.value.last_dim();
                let nt = T::from_usize(n).unwrap();
                let mut dx = vec![T::zero(); xhat.len()];
                for (r, ((xr, gr), dr)) in xhat
                    .chunks(n)
                    .zip(g.data().chunks(n))
                    .zip(dx.chunks_mut(n))
                    .enumerate()
                {
                    let sum_g: T = gr.iter().copied().sum();
                    let sum_gx: T = gr.iter().zip(xr).map(|(&a, &b)| a * b).sum();
                    let scale = inv_std[r] / nt;
                    for ((d, &xi), &gi) in dr.iter_mut().zip(xr).zip(gr) {
                        *d = scale * (nt * gi - sum_g - xi * sum_gx);
                    }
                }
                self.accumulate(grads, *input, shaped(*input, dx)?);
            }
            Op::Silu(x) => {
                let xv = self.value(*x).data();
                let dx = xv
                    .iter()
                    .zip(g.data())
                    .map(|(&v, &d)| {
                        let s = T::one() / (T::one() + (-v).exp());
                        d * s * (T::one() + v * (T::one() - s))
                    })
                    .collect();
                self.accumulate(grads, *x, shaped(*x, dx)?);
            }
            Op::Embed { table, indices } => {
                let (_, dim) = matrix_dims(self.value(*table))?;
                let mut dt = vec![T::zero(); self.value(*table).len()];
                for (row, &i) in indices.iter().enumerate() {
                    for c in 0..dim {
                        dt[i * dim + c] = dt[i * dim + c] + g.data()[row * dim + c];
                    }
                }
                self.accumulate(grads, *table, shaped(*table, dt)?);
            }
            Op::MaskedFill { input, mask } => {
                let dx = g
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(&d, &m)| if m { T::zero() } else { d })
                    .collect();
                self.accumulate(grads, *input, shaped(*input, dx)?);
            }
            Op::Sum(x) => {
                let d = g.data()[0];
                let dx = vec![d; self.value(*x).len()];
                self.accumulate(grads, *x, shaped(*x, dx)?);
            }
            Op::Mse(p, t) => {
                let (pv, tv) = (self.value(*p).data(), self.value(*t).data());
                let n = T::from_usize(pv.len().max(1)).unwrap();
                let k = (T::one() + T::one()) * g.data()[0] / n;
                let dp: Vec<T> = pv.iter().zip(tv).map(|(&a, &b)| k * (a - b)).collect();
                if self.ng(*t) {
                    let dt = dp.iter().map(|&x| -x).collect();
                    self.accumulate(grads, *t, shaped(*t, dt)?);
                }
                self.accumulate(grads, *p, shaped(*p, dp)?);
            }
            Op::SliceCols { input, start } => {
                let (r, c) = matrix_dims(self.value(*input))?;
                let len = g.last_dim();
                let mut dx = vec![T::zero(); r * c];
                for i in 0..r {
                    dx[i * c + start..i * c + start + len]
                        .copy_from_slice(&g.data()[i * len..(i + 1) * len]);
                }
                self.accumulate(grads, *input, shaped(*input, dx)?);
            }
            Op::ConcatCols(parts) => {
                let total = g.last_dim();
                let mut offset = 0;
                for &p in parts {
                    let (r, w) = matrix_dims(self.value(p))?;
                    let mut dp = Vec::with_capacity(r * w);
                    for i in 0..r {
                        dp.extend_from_slice(&g.data()[i * total + offset..i * total + offset + w]);
                    }
                    self.accumulate(grads, p, shaped(p, dp)?);
                    offset += w;
                }
            }
            Op::Transpose(x) => {
                let dx = g.transpose()?.into_data();
                self.accumulate(grads, *x, shaped(*x, dx)?);
            }
        }
        Ok(())
    }
}
