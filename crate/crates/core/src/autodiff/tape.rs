use super::tensor::{matmul, matmul_at, matmul_bt};
use super::{AutodiffError, ParamId, ParamStore, Tensor};
use std::borrow::Cow;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Normalise down each column.
    Rows,
    /// Normalise along each row.
    Cols,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Relu(Var),
    Elu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var, Axis),
    Abs(Var),
    Square(Var),
    MaskedSum(Var, Vec<f64>),
    Gather(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    Reshape(Var),
    RowVecMat { vecs: Var, mats: Var },
    RowDot(Var, Var),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Gradients of a loss with respect to every tensor of a [`ParamStore`].
/// Parameters the loss does not reach get zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store.values().iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.index()]
    }

    pub fn all(&self) -> &[Tensor] {
        &self.grads
    }

    pub(crate) fn all_mut(&mut self) -> &mut [Tensor] {
        &mut self.grads
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }
}

/// Ordered record of primitive operations.
///
/// Ops whose inputs are all constants are stored as constants themselves and
/// are skipped during the backward sweep.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

type Res = Result<Var, AutodiffError>;

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data).expect("same shape")
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
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

fn softmax_slice(xs: &mut [f64]) {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

fn transpose(t: &Tensor) -> Tensor {
    let [r, c] = t.shape();
    let mut out = Tensor::zeros([c, r]);
    for i in 0..r {
        for j in 0..c {
            out.data_mut()[j * r + i] = t.get(i, j);
        }
    }
    out
}

impl<'a> Tape<'a> {
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

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let op = if needs_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record a trainable parameter.
    pub fn param(&mut self, store: &'a ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(store.get(id)),
            op: Op::Param(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record a parameter value without tracking its gradient (target nets).
    pub fn frozen(&mut self, store: &'a ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(store.get(id)),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Res {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let out = matmul(ta, tb);
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch(op, ta, tb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Res {
        self.same_shape("add", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    /// Add a `1 x m` row to every row of an `n x m` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Res {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(mismatch("add_row", ta, tr));
        }
        let m = ta.cols();
        let mut out = ta.clone();
        for (k, v) in out.data_mut().iter_mut().enumerate() {
            *v += tr.data()[k % m];
        }
        Ok(self.push(out, Op::AddRow(a, row), &[a, row]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Res {
        self.same_shape("sub", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Res {
        self.same_shape("mul", a, b)?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| k * x);
        self.push(out, Op::Scale(a, k), &[a])
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| 1.0 - x);
        self.push(out, Op::OneMinus(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    /// ELU with unit scale.
    pub fn elu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(elu);
        self.push(out, Op::Elu(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), &[a])
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::abs);
        self.push(out, Op::Abs(a), &[a])
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a), &[a])
    }

    pub fn softmax(&mut self, a: Var, axis: Axis) -> Var {
        let t = self.value(a);
        let out = match axis {
            Axis::Cols => {
                let mut out = t.clone();
                let m = t.cols();
                for row in out.data_mut().chunks_mut(m) {
                    softmax_slice(row);
                }
                out
            }
            Axis::Rows => {
                let mut tt = transpose(t);
                let m = tt.cols();
                for row in tt.data_mut().chunks_mut(m) {
                    softmax_slice(row);
                }
                transpose(&tt)
            }
        };
        self.push(out, Op::Softmax(a, axis), &[a])
    }

    /// Sum of all elements weighted by `mask` (same length as the tensor).
    pub fn masked_sum(&mut self, a: Var, mask: &[f64]) -> Res {
        let t = self.value(a);
        if mask.len() != t.len() {
            return Err(AutodiffError::BadLength {
                shape: t.shape(),
                len: mask.len(),
            });
        }
        let s = t.data().iter().zip(mask).map(|(x, m)| x * m).sum();
        Ok(self.push(Tensor::scalar(s), Op::MaskedSum(a, mask.to_vec()), &[a]))
    }

    /// Sum of all elements.
    pub fn sum(&mut self, a: Var) -> Var {
        let mask = vec![1.0; self.value(a).len()];
        self.masked_sum(a, &mask).expect("mask length matches")
    }

    /// Pick column `idx[r]` of each row `r`, giving an `n x 1` column.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Res {
        let t = self.value(a);
        if idx.len() != t.rows() {
            return Err(AutodiffError::BadLength {
                shape: t.shape(),
                len: idx.len(),
            });
        }
        let mut out = Vec::with_capacity(idx.len());
        for (r, &c) in idx.iter().enumerate() {
            if c >= t.cols() {
                return Err(AutodiffError::Index {
                    op: "gather",
                    index: c,
                    bound: t.cols(),
                });
            }
            out.push(t.get(r, c));
        }
        let out = Tensor::new([idx.len(), 1], out)?;
        Ok(self.push(out, Op::Gather(a, idx.to_vec()), &[a]))
    }

    /// Stack matrices with equal column counts vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Res {
        let Some(first) = parts.first() else {
            return Err(AutodiffError::BadLength { shape: [0, 0], len: 0 });
        };
        let m = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != m {
                return Err(mismatch("concat_rows", self.value(*first), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::new([rows, m], data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Reinterpret the row-major data with a new shape.
    pub fn reshape(&mut self, a: Var, shape: [usize; 2]) -> Res {
        let out = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(out, Op::Reshape(a), &[a]))
    }

    /// Per-row vector-matrix product: row `r` of `vecs` (`n x k`) times the
    /// `k x e` matrix stored row-major in row `r` of `mats` (`n x k*e`).
    pub fn row_vec_mat(&mut self, vecs: Var, mats: Var) -> Res {
        let (tv, tm) = (self.value(vecs), self.value(mats));
        let (n, k) = (tv.rows(), tv.cols());
        if tm.rows() != n || k == 0 || tm.cols() % k != 0 {
            return Err(mismatch("row_vec_mat", tv, tm));
        }
        let e = tm.cols() / k;
        let mut out = vec![0.0; n * e];
        for r in 0..n {
            let v = tv.row_slice(r);
            let w = tm.row_slice(r);
            let o = &mut out[r * e..(r + 1) * e];
            for (i, &vi) in v.iter().enumerate() {
                for (oj, &wij) in o.iter_mut().zip(&w[i * e..(i + 1) * e]) {
                    *oj += vi * wij;
                }
            }
        }
        let out = Tensor::new([n, e], out)?;
        Ok(self.push(out, Op::RowVecMat { vecs, mats }, &[vecs, mats]))
    }

    /// Row-wise dot product of two `n x m` matrices, giving `n x 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Res {
        self.same_shape("row_dot", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let m = ta.cols();
        let out: Vec<f64> = ta
            .data()
            .chunks(m.max(1))
            .zip(tb.data().chunks(m.max(1)))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
            .collect();
        let out = Tensor::new([ta.rows(), 1], out)?;
        Ok(self.push(out, Op::RowDot(a, b), &[a, b]))
    }

    /// Gradients of the scalar `loss` for every tensor in `store`.
    pub fn backward(&self, loss: Var, store: &ParamStore) -> Result<Gradients, AutodiffError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(lt.shape()));
        }
        let mut out = Gradients::zeros_like(store);
        if !self.nodes[loss.0].needs_grad {
            return Ok(out);
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));

        fn acc(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
            match &mut grads[v.0] {
                Some(t) => t.add_assign(&g),
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let y: &Tensor = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.grads[id.index()].add_assign(&g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if self.requires_grad(*a) {
                        acc(&mut grads, *a, matmul_bt(&g, tb));
                    }
                    if self.requires_grad(*b) {
                        acc(&mut grads, *b, matmul_at(ta, &g));
                    }
                }
                Op::Add(a, b) => {
                    if self.requires_grad(*a) {
                        acc(&mut grads, *a, g.clone());
                    }
                    if self.requires_grad(*b) {
                        acc(&mut grads, *b, g);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.requires_grad(*row) {
                        let m = g.cols();
                        let mut gr = vec![0.0; m];
                        for (k, v) in g.data().iter().enumerate() {
                            gr[k % m] += v;
                        }
                        acc(&mut grads, *row, Tensor::row(gr));
                    }
                    if self.requires_grad(*a) {
                        acc(&mut grads, *a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.requires_grad(*b) {
                        acc(&mut grads, *b, g.map(|x| -x));
                    }
                    if self.requires_grad(*a) {
                        acc(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if self.requires_grad(*a) {
                        acc(&mut grads, *a, zip_map(&g, tb, |x, y| x * y));
                    }
                    if self.requires_grad(*b) {
                        acc(&mut grads, *b, zip_map(&g, ta, |x, y| x * y));
                    }
                }
                Op::Scale(a, k) => acc(&mut grads, *a, g.map(|x| k * x)),
                Op::OneMinus(a) => acc(&mut grads, *a, g.map(|x| -x)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |gv, xv| if xv > 0.0 { gv } else { 0.0 }));
                }
                Op::Elu(a) => {
                    let x = self.value(*a);
                    let d = zip_map(x, y, |xv, yv| if xv > 0.0 { 1.0 } else { yv + 1.0 });
                    acc(&mut grads, *a, zip_map(&g, &d, |gv, dv| gv * dv));
                }
                Op::Tanh(a) => acc(&mut grads, *a, zip_map(&g, y, |gv, yv| gv * (1.0 - yv * yv))),
                Op::Sigmoid(a) => acc(&mut grads, *a, zip_map(&g, y, |gv, yv| gv * yv * (1.0 - yv))),
                Op::Softmax(a, axis) => {
                    let (gs, ys) = match axis {
                        Axis::Cols => (g.clone(), y.clone()),
                        Axis::Rows => (transpose(&g), transpose(y)),
                    };
                    let m = ys.cols();
                    let mut dx = ys.clone();
                    for (dxr, (gr, yr)) in dx
                        .data_mut()
                        .chunks_mut(m)
                        .zip(gs.data().chunks(m).zip(ys.data().chunks(m)))
                    {
                        let dot: f64 = gr.iter().zip(yr).map(|(p, q)| p * q).sum();
                        for (d, (gv, yv)) in dxr.iter_mut().zip(gr.iter().zip(yr)) {
                            *d = yv * (gv - dot);
                        }
                    }
                    let dx = match axis {
                        Axis::Cols => dx,
                        Axis::Rows => transpose(&dx),
                    };
                    acc(&mut grads, *a, dx);
                }
                Op::Abs(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |gv, xv| gv * sign(xv)));
                }
                Op::Square(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, zip_map(&g, x, |gv, xv| 2.0 * gv * xv));
                }
                Op::MaskedSum(a, mask) => {
                    let g0 = g.data()[0];
                    let shape = self.value(*a).shape();
                    let d = Tensor::new(shape, mask.iter().map(|m| m * g0).collect())?;
                    acc(&mut grads, *a, d);
                }
                Op::Gather(a, idx) => {
                    let shape = self.value(*a).shape();
                    let mut d = Tensor::zeros(shape);
                    for (r, &c) in idx.iter().enumerate() {
                        d.data_mut()[r * shape[1] + c] = g.data()[r];
                    }
                    acc(&mut grads, *a, d);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let t = self.value(*p);
                        let n = t.len();
                        if self.requires_grad(*p) {
                            let d = Tensor::new(t.shape(), g.data()[offset..offset + n].to_vec())?;
                            acc(&mut grads, *p, d);
                        }
                        offset += n;
                    }
                }
                Op::Reshape(a) => {
                    let shape = self.value(*a).shape();
                    acc(&mut grads, *a, g.reshaped(shape)?);
                }
                Op::RowVecMat { vecs, mats } => {
                    let (tv, tm) = (self.value(*vecs), self.value(*mats));
                    let (n, k) = (tv.rows(), tv.cols());
                    let e = tm.cols() / k;
                    if self.requires_grad(*vecs) {
                        let mut dv = Tensor::zeros(tv.shape());
                        for r in 0..n {
                            let gr = g.row_slice(r);
                            let w = tm.row_slice(r);
                            for i in 0..k {
                                dv.data_mut()[r * k + i] = gr.iter().zip(&w[i * e..(i + 1) * e]).map(|(p, q)| p * q).sum();
                            }
                        }
                        acc(&mut grads, *vecs, dv);
                    }
                    if self.requires_grad(*mats) {
                        let mut dm = Tensor::zeros(tm.shape());
                        for r in 0..n {
                            let gr = g.row_slice(r);
                            let v = tv.row_slice(r);
                            let row = &mut dm.data_mut()[r * k * e..(r + 1) * k * e];
                            for i in 0..k {
                                for (d, gv) in row[i * e..(i + 1) * e].iter_mut().zip(gr) {
                                    *d = v[i] * gv;
                                }
                            }
                        }
                        acc(&mut grads, *mats, dm);
                    }
                }
                Op::RowDot(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let m = ta.cols();
                    let scale_rows = |t: &Tensor| {
                        let mut d = t.clone();
                        for (r, row) in d.data_mut().chunks_mut(m.max(1)).enumerate() {
                            let gv = g.data()[r];
                            row.iter_mut().for_each(|x| *x *= gv);
                        }
                        d
                    };
                    if self.requires_grad(*a) {
                        acc(&mut grads, *a, scale_rows(tb));
                    }
                    if self.requires_grad(*b) {
                        acc(&mut grads, *b, scale_rows(ta));
                    }
                }
            }
        }
        Ok(out)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::scalar(v));
        (s, id)
    }

    #[test]
    fn sigmoid_and_softmax_values() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::scalar(0.0));
        let s = tape.sigmoid(z);
        assert_eq!(tape.value(s).item(), Some(0.5));
        let q = tape.constant(Tensor::row(vec![0.0, 0.0]));
        let p = tape.softmax(q, Axis::Cols);
        assert_eq!(tape.value(p).data(), &[0.5, 0.5]);
    }

    #[test]
    fn square_gradient() {
        let (store, id) = scalar_param(3.0);
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let y = tape.square(x);
        let g = tape.backward(y, &store).unwrap();
        assert_eq!(g.get(id).item(), Some(6.0));
    }

    #[test]
    fn sum_sigmoid_gradient_is_quarter() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::zeros([2, 3]));
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let s = tape.sigmoid(x);
        let l = tape.sum(s);
        let g = tape.backward(l, &store).unwrap();
        assert!(g.get(id).data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let (store, id) = scalar_param(1.0);
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let v = tape.constant(Tensor::row(vec![1.0, 2.0]));
        let _ = x;
        assert!(matches!(tape.backward(v, &store), Err(AutodiffError::NonScalarLoss(_))));
    }

    #[test]
    fn disconnected_parameter_gets_zero_gradient() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::scalar(2.0));
        let b = store.add("b", Tensor::row(vec![1.0, 1.0]));
        let mut tape = Tape::new();
        let x = tape.param(&store, a);
        let _unused = tape.param(&store, b);
        let y = tape.square(x);
        let g = tape.backward(y, &store).unwrap();
        assert_eq!(g.get(b).data(), &[0.0, 0.0]);
    }

    #[test]
    fn constant_only_ops_are_not_recorded_for_grad() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::scalar(1.0));
        let b = tape.tanh(a);
        assert!(!tape.requires_grad(b));
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros([2, 3]));
        let b = tape.constant(Tensor::zeros([2, 3]));
        assert!(tape.matmul(a, b).is_err());
        let c = tape.constant(Tensor::zeros([3, 2]));
        assert!(tape.add(a, c).is_err());
        assert!(tape.masked_sum(a, &[1.0]).is_err());
    }

    #[test]
    fn masked_sum_all_true_equals_sum_and_all_false_is_zero() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::new([2, 2], vec![1.0, -2.0, 3.5, 4.0]).unwrap());
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let full = tape.masked_sum(x, &[1.0; 4]).unwrap();
        let plain = tape.sum(x);
        assert_eq!(tape.value(full), tape.value(plain));
        let none = tape.masked_sum(x, &[0.0; 4]).unwrap();
        assert_eq!(tape.value(none).item(), Some(0.0));
        let g = tape.backward(none, &store).unwrap();
        assert!(g.get(id).data().iter().all(|&v| v == 0.0));
    }
}
