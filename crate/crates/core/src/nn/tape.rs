//! Reverse-mode automatic differentiation over row-major matrices.
//!
//! Every value on the tape is a 2-D [`Tensor`]. Nodes built only from
//! constants skip gradient accumulation.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulBt(Var, Var),
    /// Adds a `1 x m` row to every row.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    MulConst(Var, Tensor<T>),
    Relu(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Tensor<T>, inv_std: Vec<T> },
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    Gather(Var, Vec<usize>),
    Reshape(Var),
    SumAll(Var),
    Square(Var),
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Tensor<T> },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T: Real = f64> {
    nodes: Vec<Node<T>>,
}

fn dims<T: Real>(t: &Tensor<T>) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn matmul<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (n, k) = dims(a);
    let m = b.cols();
    let mut out = vec![T::zero(); n * m];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(n, m, out)
}

/// Sum that does not depend on the order of `terms`: they are added in
/// ascending order.
fn ordered_sum<T: Real>(terms: &mut [T]) -> T {
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    terms.iter().fold(T::zero(), |s, &x| s + x)
}

/// `a * b` where every output is an [`ordered_sum`] over the inner index.
fn matmul_ordered<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (n, k) = dims(a);
    let m = b.cols();
    let mut out = Vec::with_capacity(n * m);
    let mut terms = vec![T::zero(); k];
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..m {
            for (p, t) in terms.iter_mut().enumerate() {
                *t = arow[p] * b.at(p, j);
            }
            out.push(ordered_sum(&mut terms));
        }
    }
    Tensor::matrix(n, m, out)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn matmul_bt<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (n, m) = (a.rows(), b.rows());
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            out.push(dot(a.row(i), b.row(j)));
        }
    }
    Tensor::matrix(n, m, out)
}

/// `a^T * b`
fn matmul_at<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (n, k) = dims(a);
    let m = b.cols();
    let mut out = vec![T::zero(); k * m];
    for i in 0..n {
        let brow = b.row(i);
        for (p, &av) in a.row(i).iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in out[p * m..(p + 1) * m].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(k, m, out)
}

fn zip_map<T: Real>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::matrix(a.rows(), a.cols(), data)
}

fn accumulate<T: Real>(slot: &mut Option<Tensor<T>>, g: Tensor<T>) {
    match slot {
        Some(acc) => acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a += b),
        None => *slot = Some(g),
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
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

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input (a parameter).
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        assert_eq!(t.shape().len(), 2, "tape values are matrices");
        self.push(t, Op::Leaf, true)
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        assert_eq!(t.shape().len(), 2, "tape values are matrices");
        self.push(t, Op::Leaf, false)
    }

    /// Fails with a numeric error naming `layer` if `v` holds a non-finite value.
    pub fn check(&self, v: Var, layer: &str) -> Result<Var> {
        if self.value(v).all_finite() {
            Ok(v)
        } else {
            Err(Error::numeric(layer, "non-finite activation"))
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.rows(), "matmul inner dimensions");
        let out = matmul(va, vb);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    /// Like [`Tape::matmul`], but each output sums its terms in value order,
    /// so permuting the inner index leaves the result bit-identical.
    pub fn matmul_ordered(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.rows(), "matmul inner dimensions");
        let out = matmul_ordered(va, vb);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.cols(), "matmul_bt inner dimensions");
        let out = matmul_bt(va, vb);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::MatMulBt(a, b), rg)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!((1, va.cols()), dims(vr), "broadcast row shape");
        let m = va.cols();
        let mut out = va.clone();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o += vr.data()[i % m];
        }
        let rg = self.rg(a) || self.rg(row);
        self.push(out, Op::AddRow(a, row), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "add shapes");
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "sub shapes");
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, Op::Sub(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    /// Element-wise product with a constant of the same shape.
    pub fn mul_const(&mut self, a: Var, c: Tensor<T>) -> Var {
        assert_eq!(self.value(a).shape(), c.shape(), "mul_const shapes");
        let out = zip_map(self.value(a), &c, |x, y| x * y);
        let rg = self.rg(a);
        self.push(out, Op::MulConst(a, c), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.tanh());
        let rg = self.rg(a);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let (n, m) = dims(va);
        let mut out = Vec::with_capacity(n * m);
        for r in 0..n {
            let row = va.row(r);
            let mx = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let start = out.len();
            out.extend(row.iter().map(|&x| (x - mx).exp()));
            // order-free normalizer keeps the rows permutation-equivariant
            let s = ordered_sum(&mut out[start..].to_vec());
            out[start..].iter_mut().for_each(|e| *e /= s);
        }
        let rg = self.rg(a);
        self.push(Tensor::matrix(n, m, out), Op::SoftmaxRows(a), rg)
    }

    /// Row-wise layer normalization with affine `1 x m` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let vx = self.value(x);
        let (n, m) = dims(vx);
        assert_eq!(dims(self.value(gamma)), (1, m), "layer norm gain shape");
        assert_eq!(dims(self.value(beta)), (1, m), "layer norm bias shape");
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let eps = T::lit(LAYER_NORM_EPS);
        let mf = T::count(m);
        let mut xhat = Vec::with_capacity(n * m);
        let mut out = Vec::with_capacity(n * m);
        let mut inv_std = Vec::with_capacity(n);
        for r in 0..n {
            let row = vx.row(r);
            let mean = row.iter().fold(T::zero(), |s, &v| s + v) / mf;
            let var = row.iter().fold(T::zero(), |s, &v| s + (v - mean) * (v - mean)) / mf;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        let op = Op::LayerNorm { x, gamma, beta, xhat: Tensor::matrix(n, m, xhat), inv_std };
        self.push(Tensor::matrix(n, m, out), op, rg)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let va = self.value(a);
        assert!(start + len <= va.cols(), "column slice out of range");
        let mut out = Vec::with_capacity(va.rows() * len);
        for r in 0..va.rows() {
            out.extend_from_slice(&va.row(r)[start..start + len]);
        }
        let t = Tensor::matrix(va.rows(), len, out);
        let rg = self.rg(a);
        self.push(t, Op::SliceCols(a, start), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let n = self.value(parts[0]).rows();
        let m: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Vec::with_capacity(n * m);
        for r in 0..n {
            for &p in parts {
                let vp = self.value(p);
                assert_eq!(vp.rows(), n, "concat row counts");
                out.extend_from_slice(vp.row(r));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(Tensor::matrix(n, m, out), Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let va = self.value(a);
        assert!(start + len <= va.rows(), "row slice out of range");
        let m = va.cols();
        let t = Tensor::matrix(len, m, va.data()[start * m..(start + len) * m].to_vec());
        let rg = self.rg(a);
        self.push(t, Op::SliceRows(a, start), rg)
    }

    /// `out[i] = table.data[idx[i]]`, shaped `rows x cols`.
    pub fn gather(&mut self, table: Var, idx: Vec<usize>, rows: usize, cols: usize) -> Var {
        assert_eq!(idx.len(), rows * cols, "gather index count");
        let vt = self.value(table).data();
        let out = idx.iter().map(|&i| vt[i]).collect();
        let rg = self.rg(table);
        self.push(Tensor::matrix(rows, cols, out), Op::Gather(table, idx), rg)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let va = self.value(a);
        assert_eq!(va.len(), rows * cols, "reshape size");
        let t = Tensor::matrix(rows, cols, va.data().to_vec());
        let rg = self.rg(a);
        self.push(t, Op::Reshape(a), rg)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::SumAll(a), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        let rg = self.rg(a);
        self.push(out, Op::Square(a), rg)
    }

    /// Sum over rows with a target of `-log softmax(row)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<Option<usize>>) -> Var {
        let vl = self.value(logits);
        assert_eq!(vl.rows(), targets.len(), "one target per row");
        let (n, m) = dims(vl);
        let mut probs = Vec::with_capacity(n * m);
        let mut loss = T::zero();
        for (r, t) in targets.iter().enumerate() {
            let row = vl.row(r);
            let mx = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let lse = row.iter().fold(T::zero(), |s, &x| s + (x - mx).exp()).ln() + mx;
            probs.extend(row.iter().map(|&x| (x - lse).exp()));
            if let Some(t) = *t {
                loss += lse - row[t];
            }
        }
        let rg = self.rg(logits);
        let op = Op::CrossEntropy { logits, targets, probs: Tensor::matrix(n, m, probs) };
        self.push(Tensor::scalar(loss), op, rg)
    }

    /// Gradients of the scalar `loss` with respect to every node; entries
    /// for nodes that do not require gradients are `None`.
    pub fn backward(&self, loss: Var) -> Vec<Option<Tensor<T>>> {
        assert_eq!(dims(self.value(loss)), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads
    }

    fn send(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: impl FnOnce() -> Tensor<T>) {
        if self.rg(v) {
            accumulate(&mut grads[v.0], g());
        }
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.send(grads, *a, || matmul_bt(g, vb));
                self.send(grads, *b, || matmul_at(va, g));
            }
            Op::MatMulBt(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.send(grads, *a, || matmul(g, vb));
                self.send(grads, *b, || matmul_at(g, va));
            }
            Op::AddRow(a, row) => {
                self.send(grads, *a, || g.clone());
                self.send(grads, *row, || {
                    let m = g.cols();
                    let mut s = vec![T::zero(); m];
                    for (i, &v) in g.data().iter().enumerate() {
                        s[i % m] += v;
                    }
                    Tensor::matrix(1, m, s)
                });
            }
            Op::Add(a, b) => {
                self.send(grads, *a, || g.clone());
                self.send(grads, *b, || g.clone());
            }
            Op::Sub(a, b) => {
                self.send(grads, *a, || g.clone());
                self.send(grads, *b, || g.map(|x| -x));
            }
            Op::Scale(a, c) => self.send(grads, *a, || g.map(|x| x * *c)),
            Op::MulConst(a, c) => self.send(grads, *a, || zip_map(g, c, |x, y| x * y)),
            Op::Relu(a) => {
                let va = self.value(*a);
                self.send(grads, *a, || zip_map(g, va, |d, x| if x > T::zero() { d } else { T::zero() }));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                self.send(grads, *a, || zip_map(g, y, |d, t| d * (T::one() - t * t)));
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                self.send(grads, *a, || {
                    let mut out = Vec::with_capacity(y.len());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let s = dot(yr, gr);
                        out.extend(yr.iter().zip(gr).map(|(&p, &d)| p * (d - s)));
                    }
                    Tensor::matrix(y.rows(), y.cols(), out)
                });
            }
            Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                let (n, m) = dims(xhat);
                let gv = self.value(*gamma).data();
                self.send(grads, *x, || {
                    let mf = T::count(m);
                    let mut out = Vec::with_capacity(n * m);
                    for r in 0..n {
                        let (gr, hr) = (g.row(r), xhat.row(r));
                        let dh: Vec<T> = gr.iter().zip(gv).map(|(&d, &w)| d * w).collect();
                        let mean_dh = dh.iter().fold(T::zero(), |s, &v| s + v) / mf;
                        let mean_dh_h = dot(&dh, hr) / mf;
                        out.extend(dh.iter().zip(hr).map(|(&d, &h)| inv_std[r] * (d - mean_dh - h * mean_dh_h)));
                    }
                    Tensor::matrix(n, m, out)
                });
                self.send(grads, *gamma, || {
                    let mut s = vec![T::zero(); m];
                    for (i, (&d, &h)) in g.data().iter().zip(xhat.data()).enumerate() {
                        s[i % m] += d * h;
                    }
                    Tensor::matrix(1, m, s)
                });
                self.send(grads, *beta, || {
                    let mut s = vec![T::zero(); m];
                    for (i, &d) in g.data().iter().enumerate() {
                        s[i % m] += d;
                    }
                    Tensor::matrix(1, m, s)
                });
            }
            Op::SliceCols(a, start) => {
                let va = self.value(*a);
                self.send(grads, *a, || {
                    let mut out = Tensor::zeros(&[va.rows(), va.cols()]);
                    let len = g.cols();
                    for r in 0..va.rows() {
                        out.row_mut(r)[*start..*start + len].copy_from_slice(g.row(r));
                    }
                    out
                });
            }
            Op::ConcatCols(parts) => {
                let mut col = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    self.send(grads, p, || {
                        let mut out = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            out.extend_from_slice(&g.row(r)[col..col + w]);
                        }
                        Tensor::matrix(g.rows(), w, out)
                    });
                    col += w;
                }
            }
            Op::SliceRows(a, start) => {
                let va = self.value(*a);
                self.send(grads, *a, || {
                    let mut out = Tensor::zeros(&[va.rows(), va.cols()]);
                    let m = va.cols();
                    out.data_mut()[start * m..start * m + g.len()].copy_from_slice(g.data());
                    out
                });
            }
            Op::Gather(table, idx) => {
                let vt = self.value(*table);
                self.send(grads, *table, || {
                    let mut out = Tensor::zeros(&[vt.rows(), vt.cols()]);
                    let d = out.data_mut();
                    for (&i, &v) in idx.iter().zip(g.data()) {
                        d[i] += v;
                    }
                    out
                });
            }
            Op::Reshape(a) => {
                let va = self.value(*a);
                self.send(grads, *a, || Tensor::matrix(va.rows(), va.cols(), g.data().to_vec()));
            }
            Op::SumAll(a) => {
                let va = self.value(*a);
                let s = g.data()[0];
                self.send(grads, *a, || Tensor::full(&[va.rows(), va.cols()], s));
            }
            Op::Square(a) => {
                let va = self.value(*a);
                self.send(grads, *a, || zip_map(g, va, |d, x| d * (x + x)));
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let s = g.data()[0];
                self.send(grads, *logits, || {
                    let m = probs.cols();
                    let mut out = Tensor::zeros(&[probs.rows(), m]);
                    for (r, t) in targets.iter().enumerate() {
                        if let Some(t) = *t {
                            let row = out.row_mut(r);
                            row.copy_from_slice(probs.row(r));
                            row[t] -= T::one();
                            row.iter_mut().for_each(|v| *v *= s);
                        }
                    }
                    out
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Tensor {
        Tensor::matrix(n, m, (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    /// Checks d(loss)/d(x) for one input against central differences.
    fn check(build: impl Fn(&mut Tape, Var) -> Var, x: Tensor) {
        let mut tape = Tape::new();
        let v = tape.param(x.clone());
        let l = build(&mut tape, v);
        let g = tape.backward(l)[v.index()].clone().unwrap();
        let eps = 1e-6;
        for i in 0..x.len() {
            let eval = |d: f64| {
                let mut xp = x.clone();
                xp.data_mut()[i] += d;
                let mut t = Tape::new();
                let v = t.param(xp);
                let l = build(&mut t, v);
                t.value(l).data()[0]
            };
            let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
            let an = g.data()[i];
            assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "entry {i}: fd {fd} vs analytic {an}");
        }
    }

    #[test]
    fn matmul_values() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let b = t.constant(Tensor::matrix(2, 1, vec![5.0, 6.0]));
        let c = t.matmul(a, b);
        assert_eq!(t.value(c).data(), &[17.0, 39.0]);
        let d = t.matmul_bt(a, a);
        assert_eq!(t.value(d).data(), &[5.0, 11.0, 11.0, 25.0]);
    }

    #[test]
    fn op_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = rand_t(&mut rng, 3, 4);
        let row = rand_t(&mut rng, 1, 4);
        let w2 = w.clone();
        check(
            move |t, x| {
                let c = t.constant(w2.clone());
                let y = t.matmul(x, c);
                let y = t.tanh(y);
                let s = t.square(y);
                t.sum_all(s)
            },
            rand_t(&mut rng, 2, 3),
        );
        let w3 = w.clone();
        check(
            move |t, x| {
                let c = t.constant(w3.clone());
                let y = t.matmul_bt(x, c);
                let y = t.softmax_rows(y);
                let y = t.mul_const(y, Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 3.0, 1.0, -1.0]));
                t.sum_all(y)
            },
            rand_t(&mut rng, 2, 4),
        );
        let r2 = row.clone();
        check(
            move |t, x| {
                let g = t.constant(r2.clone());
                let b = t.constant(r2.map(|v| v * 0.3));
                let y = t.layer_norm(x, g, b);
                let y = t.mul_const(y, Tensor::matrix(2, 4, vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.0, 2.0, 1.0]));
                t.sum_all(y)
            },
            rand_t(&mut rng, 2, 4),
        );
        check(
            |t, x| {
                let a = t.slice_cols(x, 1, 2);
                let b = t.slice_rows(x, 1, 1);
                let b = t.reshape(b, 2, 2);
                let c = t.concat_cols(&[a, b]);
                let c = t.relu(c);
                let c = t.scale(c, 1.5);
                let s = t.square(c);
                t.sum_all(s)
            },
            rand_t(&mut rng, 2, 4),
        );
        check(
            |t, x| {
                let y = t.gather(x, vec![0, 3, 3, 1], 2, 2);
                let y = t.square(y);
                let z = t.slice_cols(x, 0, 2);
                let z = t.reshape(z, 1, 2);
                let w = t.add_row(y, z);
                let w = t.sub(w, y);
                let w = t.add(w, y);
                t.cross_entropy(w, vec![Some(1), None])
            },
            rand_t(&mut rng, 1, 4),
        );
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = Tape::new();
        let x = t.constant(rand_t(&mut rng, 5, 7).map(|v| v * 30.0));
        let y = t.softmax_rows(x);
        for r in 0..5 {
            let s: f64 = t.value(y).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::scalar(2.0));
        let b = t.param(Tensor::scalar(3.0));
        let c = t.matmul(a, b);
        let g = t.backward(c);
        assert!(g[a.index()].is_none());
        assert_eq!(g[b.index()].as_ref().unwrap().data(), &[2.0]);
    }

    #[test]
    fn check_names_layer() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::scalar(f64::NAN));
        match t.check(a, "embed") {
            Err(Error::Numeric { layer, .. }) => assert_eq!(layer, "embed"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
