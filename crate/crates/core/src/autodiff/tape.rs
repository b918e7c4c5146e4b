//! Reverse-mode tape over trainable parameters.
//!
//! Every node holds a dense row-major matrix. Spatial jets keep one matrix per
//! jet component, with columns indexing collocation points and rows indexing
//! neurons (or a single row for scalar fields), so one tape node carries the
//! same jet component for a whole batch. A `1 x 1` node is a plain scalar.
//!
//! Binary element-wise ops broadcast along any dimension of size one.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};

/// Handle to a tape node. Nodes only reference earlier nodes, so the tape is a
/// DAG stored in topological order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param { offset: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Tanh(Var),
    Sin(Var),
    Cos(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Powf(Var, f64),
    MatMul(Var, Var),
    Stack(Vec<Var>),
    Row(Var, usize),
    Sum(Var),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<usize, Var>,
}

#[inline]
fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let dim = |x: usize, y: usize| {
        assert!(
            x == y || x == 1 || y == 1,
            "incompatible shapes {a:?} and {b:?}"
        );
        x.max(y)
    };
    (dim(a.0, b.0), dim(a.1, b.1))
}

/// Index into a (possibly broadcast) operand of shape `shape` for output entry (i, j).
#[inline]
fn bidx(shape: (usize, usize), i: usize, j: usize) -> usize {
    let r = if shape.0 == 1 { 0 } else { i };
    let c = if shape.1 == 1 { 0 } else { j };
    r * shape.1 + c
}

fn binary_map(
    a: &[f64],
    sa: (usize, usize),
    b: &[f64],
    sb: (usize, usize),
    f: impl Fn(f64, f64) -> f64,
) -> (Vec<f64>, (usize, usize)) {
    let out = broadcast_shape(sa, sb);
    if sa == sb {
        return (a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect(), out);
    }
    if sb == (1, 1) {
        let y = b[0];
        return (a.iter().map(|&x| f(x, y)).collect(), out);
    }
    if sa == (1, 1) {
        let x = a[0];
        return (b.iter().map(|&y| f(x, y)).collect(), out);
    }
    let mut v = Vec::with_capacity(out.0 * out.1);
    for i in 0..out.0 {
        for j in 0..out.1 {
            v.push(f(a[bidx(sa, i, j)], b[bidx(sb, i, j)]));
        }
    }
    (v, out)
}

/// Sums `src` (of shape `out`) into `dst` (of shape `shape`), reducing broadcast axes.
fn reduce_into(dst: &mut [f64], shape: (usize, usize), src: &[f64], out: (usize, usize)) {
    if shape == out {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
        return;
    }
    if shape == (1, 1) {
        dst[0] += src.iter().sum::<f64>();
        return;
    }
    for i in 0..out.0 {
        for j in 0..out.1 {
            dst[bidx(shape, i, j)] += src[i * out.1 + j];
        }
    }
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

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` node (or the first entry of a larger one).
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(value.len(), rows * cols, "constant: bad length");
        self.push(rows, cols, value, Op::Const, false)
    }

    /// Row vector constant `1 x n`.
    pub fn row_const(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.constant(1, n, value)
    }

    pub fn scalar_const(&mut self, v: f64) -> Var {
        self.constant(1, 1, vec![v])
    }

    pub fn fill(&mut self, rows: usize, cols: usize, v: f64) -> Var {
        self.constant(rows, cols, vec![v; rows * cols])
    }

    /// Leaf node for a parameter block. Repeated requests for the same block
    /// return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let block = store.block(id);
        if let Some(&v) = self.params.get(&block.offset) {
            return v;
        }
        let value = store.values()[block.offset..block.offset + block.len()].to_vec();
        let v = self.push(
            block.rows,
            block.cols,
            value,
            Op::Param {
                offset: block.offset,
            },
            true,
        );
        self.params.insert(block.offset, v);
        v
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let (na, nb) = (&self.nodes[a.0], &self.nodes[b.0]);
        let (value, (r, c)) = binary_map(&na.value, (na.rows, na.cols), &nb.value, (nb.rows, nb.cols), f);
        let ng = na.needs_grad || nb.needs_grad;
        self.push(r, c, value, op, ng)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let n = &self.nodes[a.0];
        let (r, c, ng) = (n.rows, n.cols, n.needs_grad);
        let value = n.value.iter().map(|&x| f(x)).collect();
        self.push(r, c, value, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// Element-wise division. The caller guarantees a nonzero divisor.
    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::AddConst(a), |x| x + c)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sin(a), f64::sin)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, Op::Cos(a), f64::cos)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Op::Ln(a), f64::ln)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sqrt(a), f64::sqrt)
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        self.unary(a, Op::Powf(a, p), |x| x.powf(p))
    }

    /// `w (m x k) * x (k x n)`.
    pub fn matmul(&mut self, w: Var, x: Var) -> Var {
        let (nw, nx) = (&self.nodes[w.0], &self.nodes[x.0]);
        assert_eq!(nw.cols, nx.rows, "matmul: inner dimensions differ");
        let (m, k, n) = (nw.rows, nw.cols, nx.cols);
        let mut out = vec![0.0; m * n];
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                nw.value.as_ptr(),
                k as isize,
                1,
                nx.value.as_ptr(),
                n as isize,
                1,
                0.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        let ng = nw.needs_grad || nx.needs_grad;
        self.push(m, n, out, Op::MatMul(w, x), ng)
    }

    /// Vertical concatenation of nodes with equal column counts.
    pub fn stack(&mut self, parts: &[Var]) -> Var {
        let cols = self.nodes[parts[0].0].cols;
        let mut rows = 0;
        let mut value = Vec::new();
        let mut ng = false;
        for p in parts {
            let n = &self.nodes[p.0];
            assert_eq!(n.cols, cols, "stack: column counts differ");
            rows += n.rows;
            value.extend_from_slice(&n.value);
            ng |= n.needs_grad;
        }
        self.push(rows, cols, value, Op::Stack(parts.to_vec()), ng)
    }

    pub fn row(&mut self, a: Var, i: usize) -> Var {
        let n = &self.nodes[a.0];
        assert!(i < n.rows, "row index out of range");
        let cols = n.cols;
        let value = n.value[i * cols..(i + 1) * cols].to_vec();
        let ng = n.needs_grad;
        self.push(1, cols, value, Op::Row(a, i), ng)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let n = &self.nodes[a.0];
        let s = n.value.iter().sum();
        let ng = n.needs_grad;
        self.push(1, 1, vec![s], Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let len = self.value(a).len();
        let s = self.sum(a);
        self.scale(s, 1.0 / len as f64)
    }

    /// Gradient of `sum_k weight_k * output_k` with respect to the flat
    /// parameter vector of length `n_params`. Outputs are `1 x 1` nodes.
    pub fn gradient(&self, seeds: &[(Var, f64)], n_params: usize) -> Vec<f64> {
        let mut grads: Vec<Vec<f64>> = (0..self.nodes.len()).map(|_| Vec::new()).collect();
        for &(v, w) in seeds {
            let n = &self.nodes[v.0];
            assert_eq!(n.value.len(), 1, "seed must be a scalar node");
            if grads[v.0].is_empty() {
                grads[v.0] = vec![0.0];
            }
            grads[v.0][0] += w;
        }
        let mut out = vec![0.0; n_params];

        for idx in (0..self.nodes.len()).rev() {
            if grads[idx].is_empty() {
                continue;
            }
            let g = std::mem::take(&mut grads[idx]);
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let out_shape = (node.rows, node.cols);
            match &node.op {
                Op::Const => {}
                Op::Param { offset } => {
                    for (o, gi) in out[*offset..*offset + g.len()].iter_mut().zip(&g) {
                        *o += gi;
                    }
                }
                Op::Add(a, b) => {
                    self.accum(&mut grads, *a, &g, out_shape);
                    self.accum_owned(&mut grads, *b, g, out_shape);
                }
                Op::Sub(a, b) => {
                    self.accum(&mut grads, *a, &g, out_shape);
                    if self.ng(*b) {
                        let mut neg = g;
                        neg.iter_mut().for_each(|x| *x = -*x);
                        self.accum_owned(&mut grads, *b, neg, out_shape);
                    }
                }
                Op::Mul(a, b) => {
                    if self.ng(*a) {
                        let c = self.times_broadcast(&g, out_shape, *b);
                        self.accum_owned(&mut grads, *a, c, out_shape);
                    }
                    if self.ng(*b) {
                        let c = self.times_broadcast(&g, out_shape, *a);
                        self.accum_owned(&mut grads, *b, c, out_shape);
                    }
                }
                Op::Div(a, b) => {
                    let nb = &self.nodes[b.0];
                    let sb = (nb.rows, nb.cols);
                    if self.ng(*a) {
                        let mut c = g.clone();
                        for i in 0..out_shape.0 {
                            for j in 0..out_shape.1 {
                                c[i * out_shape.1 + j] /= nb.value[bidx(sb, i, j)];
                            }
                        }
                        self.accum_owned(&mut grads, *a, c, out_shape);
                    }
                    if self.ng(*b) {
                        let mut c = g.clone();
                        for i in 0..out_shape.0 {
                            for j in 0..out_shape.1 {
                                let k = i * out_shape.1 + j;
                                c[k] *= -node.value[k] / nb.value[bidx(sb, i, j)];
                            }
                        }
                        self.accum_owned(&mut grads, *b, c, out_shape);
                    }
                }
                Op::Scale(a, c) => {
                    let d: Vec<f64> = g.iter().map(|x| c * x).collect();
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::AddConst(a) => self.accum_owned(&mut grads, *a, g, out_shape),
                Op::Tanh(a) => {
                    let d = zip_map(&g, &node.value, |g, t| g * (1.0 - t * t));
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::Sin(a) => {
                    let d = zip_map(&g, &self.nodes[a.0].value, |g, x| g * x.cos());
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::Cos(a) => {
                    let d = zip_map(&g, &self.nodes[a.0].value, |g, x| -g * x.sin());
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::Exp(a) => {
                    let d = zip_map(&g, &node.value, |g, e| g * e);
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::Ln(a) => {
                    let d = zip_map(&g, &self.nodes[a.0].value, |g, x| g / x);
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::Sqrt(a) => {
                    let d = zip_map(&g, &node.value, |g, s| 0.5 * g / s);
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::Powf(a, p) => {
                    let p = *p;
                    let d = zip_map(&g, &self.nodes[a.0].value, |g, x| g * p * x.powf(p - 1.0));
                    self.accum_owned(&mut grads, *a, d, out_shape);
                }
                Op::MatMul(w, x) => {
                    let (nw, nx) = (&self.nodes[w.0], &self.nodes[x.0]);
                    let (m, k, n) = (nw.rows, nw.cols, nx.cols);
                    if nw.needs_grad {
                        // dW = G * X^T
                        let mut dw = vec![0.0; m * k];
                        unsafe {
                            matrixmultiply::dgemm(
                                m,
                                n,
                                k,
                                1.0,
                                g.as_ptr(),
                                n as isize,
                                1,
                                nx.value.as_ptr(),
                                1,
                                n as isize,
                                0.0,
                                dw.as_mut_ptr(),
                                k as isize,
                                1,
                            );
                        }
                        self.accum_owned(&mut grads, *w, dw, (m, k));
                    }
                    if nx.needs_grad {
                        // dX = W^T * G
                        let mut dx = vec![0.0; k * n];
                        unsafe {
                            matrixmultiply::dgemm(
                                k,
                                m,
                                n,
                                1.0,
                                nw.value.as_ptr(),
                                1,
                                k as isize,
                                g.as_ptr(),
                                n as isize,
                                1,
                                0.0,
                                dx.as_mut_ptr(),
                                n as isize,
                                1,
                            );
                        }
                        self.accum_owned(&mut grads, *x, dx, (k, n));
                    }
                }
                Op::Stack(parts) => {
                    let cols = node.cols;
                    let mut start = 0;
                    for p in parts {
                        let rows = self.nodes[p.0].rows;
                        let len = rows * cols;
                        if self.ng(*p) {
                            self.accum(&mut grads, *p, &g[start..start + len], (rows, cols));
                        }
                        start += len;
                    }
                }
                Op::Row(a, i) => {
                    if self.ng(*a) {
                        let na = &self.nodes[a.0];
                        let cols = na.cols;
                        let slot = &mut grads[a.0];
                        if slot.is_empty() {
                            *slot = vec![0.0; na.value.len()];
                        }
                        for (d, s) in slot[i * cols..(i + 1) * cols].iter_mut().zip(&g) {
                            *d += s;
                        }
                    }
                }
                Op::Sum(a) => {
                    if self.ng(*a) {
                        let na = &self.nodes[a.0];
                        let slot = &mut grads[a.0];
                        if slot.is_empty() {
                            *slot = vec![0.0; na.value.len()];
                        }
                        for d in slot.iter_mut() {
                            *d += g[0];
                        }
                    }
                }
            }
        }
        out
    }

    /// `g * value(other)`, with `other` broadcast to `out` shape.
    fn times_broadcast(&self, g: &[f64], out: (usize, usize), other: Var) -> Vec<f64> {
        let n = &self.nodes[other.0];
        let s = (n.rows, n.cols);
        if s == out {
            return zip_map(g, &n.value, |g, v| g * v);
        }
        if s == (1, 1) {
            let v = n.value[0];
            return g.iter().map(|x| x * v).collect();
        }
        let mut c = g.to_vec();
        for i in 0..out.0 {
            for j in 0..out.1 {
                c[i * out.1 + j] *= n.value[bidx(s, i, j)];
            }
        }
        c
    }

    fn accum(&self, grads: &mut [Vec<f64>], target: Var, contrib: &[f64], out: (usize, usize)) {
        let n = &self.nodes[target.0];
        if !n.needs_grad {
            return;
        }
        let shape = (n.rows, n.cols);
        let slot = &mut grads[target.0];
        if slot.is_empty() {
            if shape == out {
                *slot = contrib.to_vec();
                return;
            }
            *slot = vec![0.0; n.value.len()];
        }
        reduce_into(slot, shape, contrib, out);
    }

    /// Like `accum`, but moves `contrib` into an empty slot of the same shape.
    fn accum_owned(&self, grads: &mut [Vec<f64>], target: Var, contrib: Vec<f64>, out: (usize, usize)) {
        let n = &self.nodes[target.0];
        if n.needs_grad && grads[target.0].is_empty() && (n.rows, n.cols) == out {
            grads[target.0] = contrib;
        } else {
            self.accum(grads, target, &contrib, out);
        }
    }
}

#[inline]
fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(usize, usize, Vec<f64>)]) -> (ParamStore, Vec<ParamId>) {
        let mut store = ParamStore::new();
        let ids = values
            .iter()
            .enumerate()
            .map(|(i, (r, c, v))| store.add(&format!("p{i}"), *r, *c, v.clone()))
            .collect();
        (store, ids)
    }

    fn fd_grad(
        store: &ParamStore,
        f: impl Fn(&ParamStore) -> f64,
        h: f64,
    ) -> Vec<f64> {
        (0..store.len())
            .map(|k| {
                let mut p = store.clone();
                p.values_mut()[k] += h;
                let fp = f(&p);
                p.values_mut()[k] -= 2.0 * h;
                let fm = f(&p);
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn square_of_param() {
        let (store, ids) = store_with(&[(1, 1, vec![3.0])]);
        let mut t = Tape::new();
        let th = t.param(&store, ids[0]);
        let l = t.square(th);
        assert_eq!(t.scalar(l), 9.0);
        assert_eq!(t.gradient(&[(l, 1.0)], 1), vec![6.0]);
    }

    #[test]
    fn unused_param_has_zero_gradient() {
        let (store, ids) = store_with(&[(1, 1, vec![2.0]), (1, 1, vec![5.0])]);
        let mut t = Tape::new();
        let a = t.param(&store, ids[0]);
        let _b = t.param(&store, ids[1]);
        let l = t.exp(a);
        let g = t.gradient(&[(l, 1.0)], 2);
        assert!((g[0] - 2f64.exp()).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn matmul_broadcast_pipeline_matches_fd() {
        let (store, ids) = store_with(&[
            (3, 2, vec![0.3, -0.2, 0.5, 0.1, -0.7, 0.4]),
            (3, 1, vec![0.1, -0.1, 0.2]),
            (1, 1, vec![0.7]),
        ]);
        let build = |s: &ParamStore| {
            let mut t = Tape::new();
            let w = t.param(s, ids[0]);
            let b = t.param(s, ids[1]);
            let lam = t.param(s, ids[2]);
            let x = t.constant(2, 4, vec![0.1, 0.5, -0.3, 0.9, 1.2, -0.4, 0.2, 0.6]);
            let z = t.matmul(w, x);
            let z = t.add(z, b);
            let a = t.tanh(z);
            let r = t.row(a, 1);
            let q = t.mul(r, lam);
            let s2 = t.stack(&[q, r]);
            let e = t.exp(s2);
            let b0 = t.row(b, 0);
            let d = t.div(e, b0);
            let sq = t.square(d);
            let m = t.mean(sq);
            let sq = t.add_const(m, 1.0);
            let l = t.sqrt(sq);
            (t, l)
        };
        let (t, l) = build(&store);
        let g = t.gradient(&[(l, 1.0)], store.len());
        let fd = fd_grad(&store, |s| {
            let (t, l) = build(s);
            t.scalar(l)
        }, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-7 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn identical_construction_is_bit_identical() {
        let (store, ids) = store_with(&[(2, 2, vec![0.1, 0.2, 0.3, 0.4])]);
        let run = || {
            let mut t = Tape::new();
            let w = t.param(&store, ids[0]);
            let x = t.constant(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
            let y = t.matmul(w, x);
            let y = t.sin(y);
            let l = t.sum(y);
            t.gradient(&[(l, 1.0)], 4)
        };
        assert_eq!(run(), run());
    }
}
