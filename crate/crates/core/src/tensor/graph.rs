//! Tape-based reverse-mode differentiation over row-major matrices.
//!
//! Every value on the tape is a `rows x cols` matrix; vectors are single
//! rows and scalars are `1 x 1`. Parameters are read in place from the
//! [`ParamSet`] the graph borrows, and each parameter is recorded at most
//! once so its gradient accumulates in a single buffer.

use std::collections::HashMap;

use rand::Rng;

use super::dense::{axpy, dot};
use super::{Gradients, ParamId, ParamSet, Real, Tensor, TensorError};

/// Probability floor applied before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    Dropout(Var, Vec<T>),
    Select(Var, Var, Vec<bool>),
    CrossEntropy(Var, Vec<usize>, Vec<T>),
    Sum(Var),
}

#[derive(Debug)]
struct Node<T> {
    op: Op<T>,
    rows: usize,
    cols: usize,
    value: Vec<T>,
    requires_grad: bool,
}

pub struct Graph<'p, T: Real> {
    params: &'p ParamSet<T>,
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<ParamId, Var>,
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> TensorError {
    TensorError::Shape {
        op,
        left: vec![a.0, a.1],
        right: vec![b.0, b.1],
    }
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamSet<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[T] {
        match self.nodes[v.0].op {
            Op::Param(id) => self.params.get(id).value.data(),
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn row(&self, v: Var, r: usize) -> &[T] {
        let cols = self.nodes[v.0].cols;
        &self.value(v)[r * cols..(r + 1) * cols]
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let (r, c) = self.shape(v);
        Tensor::from_vec(&[r, c], self.value(v).to_vec()).expect("node shape is consistent")
    }

    fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op<T>, rows: usize, cols: usize, value: Vec<T>) -> Result<Var, TensorError> {
        debug_assert_eq!(rows * cols, value.len());
        if value.iter().any(|x| !x.is_finite()) {
            return Err(TensorError::NonFinite(op_name(&op)));
        }
        let requires_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::MatMul(a, b) | Op::MatMulNt(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Select(a, b, _) => {
                self.requires_grad(*a) || self.requires_grad(*b)
            }
            Op::Concat(vs) | Op::ConcatRows(vs) => vs.iter().any(|v| self.requires_grad(*v)),
            Op::Scale(a, _)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Softmax(a)
            | Op::SliceCols(a, _)
            | Op::GatherRows(a, _)
            | Op::Dropout(a, _)
            | Op::CrossEntropy(a, _, _)
            | Op::Sum(a) => self.requires_grad(*a),
        };
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, t: &Tensor<T>) -> Var {
        let (r, c) = t.dims2();
        self.push(Op::Constant, r, c, t.data().to_vec())
            .expect("constant tensor must be finite")
    }

    pub fn constant_matrix(&mut self, rows: usize, cols: usize, data: Vec<T>) -> Result<Var, TensorError> {
        if rows * cols != data.len() {
            return Err(shape_err("constant", (rows, cols), (1, data.len())));
        }
        self.push(Op::Constant, rows, cols, data)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        let (r, c) = self.params.get(id).value.dims2();
        self.nodes.push(Node {
            op: Op::Param(id),
            rows: r,
            cols: c,
            value: Vec::new(),
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    /// `a [m,k] x b [k,n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let ((m, k), (k2, n)) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(shape_err("matmul", (m, k), (k2, n)));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                axpy(av[i * k + p], &bv[p * n..(p + 1) * n], row);
            }
        }
        self.push(Op::MatMul(a, b), m, n, out)
    }

    /// `a [m,k] x b[n,k]^T`, the layout used for `[out, in]` weight matrices.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let ((m, k), (n, k2)) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(shape_err("matmul_nt", (m, k), (n, k2)));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let x = &av[i * k..(i + 1) * k];
            for j in 0..n {
                out.push(dot(x, &bv[j * k..(j + 1) * k]));
            }
        }
        self.push(Op::MatMulNt(a, b), m, n, out)
    }

    /// Elementwise sum; `b` may be a single row broadcast over the rows of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let ((m, n), (m2, n2)) = (self.shape(a), self.shape(b));
        if n != n2 || (m != m2 && m2 != 1) {
            return Err(shape_err("add", (m, n), (m2, n2)));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let out = if m == m2 {
            av.iter().zip(bv).map(|(&x, &y)| x + y).collect()
        } else {
            av.chunks(n.max(1))
                .flat_map(|row| row.iter().zip(bv).map(|(&x, &y)| x + y))
                .collect()
        };
        self.push(Op::Add(a, b), m, n, out)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("sub", sa, sb));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x - y).collect();
        self.push(Op::Sub(a, b), sa.0, sa.1, out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("mul", sa, sb));
        }
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
        self.push(Op::Mul(a, b), sa.0, sa.1, out)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var, TensorError> {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|&x| x * c).collect();
        self.push(Op::Scale(a, c), m, n, out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(Op::Sigmoid(a), m, n, out)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape(a);
        let out = self.value(a).iter().map(|&x| x.tanh()).collect();
        self.push(Op::Tanh(a), m, n, out)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let (m, n) = self.shape(a);
        if n == 0 {
            return Err(shape_err("softmax", (m, n), (m, 1)));
        }
        let mut out = self.value(a).to_vec();
        for row in out.chunks_mut(n) {
            softmax_in_place(row);
        }
        self.push(Op::Softmax(a), m, n, out)
    }

    /// Concatenate along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("concat"))?;
        let m = self.shape(first).0;
        let mut n = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != m {
                return Err(shape_err("concat", self.shape(first), s));
            }
            n += s.1;
        }
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                out.extend_from_slice(self.row(p, r));
            }
        }
        self.push(Op::Concat(parts.to_vec()), m, n, out)
    }

    /// Concatenate along rows.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("concat_rows"))?;
        let n = self.shape(first).1;
        let mut m = 0;
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.1 != n {
                return Err(shape_err("concat_rows", self.shape(first), s));
            }
            m += s.0;
            out.extend_from_slice(self.value(p));
        }
        self.push(Op::ConcatRows(parts.to_vec()), m, n, out)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, TensorError> {
        let (m, n) = self.shape(a);
        if start > end || end > n {
            return Err(shape_err("slice_cols", (m, n), (start, end)));
        }
        let mut out = Vec::with_capacity(m * (end - start));
        for r in 0..m {
            out.extend_from_slice(&self.row(a, r)[start..end]);
        }
        self.push(Op::SliceCols(a, start), m, end - start, out)
    }

    /// Pick rows by index; repeated indices are allowed.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let (m, n) = self.shape(a);
        let mut out = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= m {
                return Err(TensorError::Index {
                    op: "gather_rows",
                    index: i,
                    len: m,
                });
            }
            out.extend_from_slice(self.row(a, i));
        }
        self.push(Op::GatherRows(a, indices.to_vec()), indices.len(), n, out)
    }

    /// Rows of an embedding table.
    pub fn embedding_lookup(&mut self, table: Var, indices: &[usize]) -> Result<Var, TensorError> {
        self.gather_rows(table, indices)
    }

    /// Inverted dropout with an explicit keep mask: kept entries are scaled
    /// by `1 / (1 - rate)`, dropped ones are zeroed.
    pub fn dropout(&mut self, a: Var, rate: f64, keep: &[bool]) -> Result<Var, TensorError> {
        let (m, n) = self.shape(a);
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::InvalidRate(rate));
        }
        if keep.len() != m * n {
            return Err(shape_err("dropout", (m, n), (1, keep.len())));
        }
        let scale = T::of(1.0 / (1.0 - rate));
        let mult: Vec<T> = keep.iter().map(|&k| if k { scale } else { T::zero() }).collect();
        let out = self.value(a).iter().zip(&mult).map(|(&x, &s)| x * s).collect();
        self.push(Op::Dropout(a, mult), m, n, out)
    }

    /// Dropout with a freshly sampled mask.
    pub fn dropout_sampled<R: Rng>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var, TensorError> {
        if rate == 0.0 {
            return Ok(a);
        }
        let (m, n) = self.shape(a);
        let keep: Vec<bool> = (0..m * n).map(|_| rng.gen::<f64>() >= rate).collect();
        self.dropout(a, rate, &keep)
    }

    /// Row `r` comes from `when_true` if `mask[r]`, else from `when_false`.
    pub fn select_rows(&mut self, mask: &[bool], when_true: Var, when_false: Var) -> Result<Var, TensorError> {
        let (st, sf) = (self.shape(when_true), self.shape(when_false));
        if st != sf || mask.len() != st.0 {
            return Err(shape_err("select_rows", st, sf));
        }
        let mut out = Vec::with_capacity(st.0 * st.1);
        for (r, &m) in mask.iter().enumerate() {
            out.extend_from_slice(self.row(if m { when_true } else { when_false }, r));
        }
        self.push(Op::Select(when_true, when_false, mask.to_vec()), st.0, st.1, out)
    }

    /// `sum_r weights[r] * -ln(max(probs[r, targets[r]], floor))` as a `1 x 1` value.
    pub fn cross_entropy(&mut self, probs: Var, targets: &[usize], weights: &[T]) -> Result<Var, TensorError> {
        let (m, n) = self.shape(probs);
        if targets.len() != m || weights.len() != m {
            return Err(shape_err("cross_entropy", (m, n), (targets.len(), weights.len())));
        }
        let floor = T::of(PROB_FLOOR);
        let mut total = T::zero();
        for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
            if t >= n {
                return Err(TensorError::Index {
                    op: "cross_entropy",
                    index: t,
                    len: n,
                });
            }
            if w != T::zero() {
                total += w * -(self.row(probs, r)[t].max(floor)).ln();
            }
        }
        self.push(
            Op::CrossEntropy(probs, targets.to_vec(), weights.to_vec()),
            1,
            1,
            vec![total],
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let total = self.value(a).iter().copied().sum();
        self.push(Op::Sum(a), 1, 1, vec![total])
    }

    /// `x W^T + b` for a `[out, in]` weight and a `[1, out]` bias.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let y = self.matmul_nt(x, w)?;
        self.add(y, b)
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(TensorError::NonScalarLoss(vec![r, c]));
        }
        let mut grads = Gradients::zeros_like(self.params);
        let mut node_grads: Vec<Option<Vec<T>>> = Vec::with_capacity(loss.0 + 1);
        node_grads.resize_with(loss.0 + 1, || None);
        node_grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = node_grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let (rows, cols) = (node.rows, node.cols);
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let shape = self.params.get(*id).value.shape().to_vec();
                    *grads.get_mut(*id) = Tensor::from_vec(&shape, g)?;
                }
                Op::MatMul(a, b) => {
                    let k = self.shape(*a).1;
                    if self.requires_grad(*a) {
                        let bv = self.value(*b);
                        let da = self.buf(&mut node_grads, *a);
                        for i in 0..rows {
                            let gi = &g[i * cols..(i + 1) * cols];
                            for p in 0..k {
                                da[i * k + p] += dot(gi, &bv[p * cols..(p + 1) * cols]);
                            }
                        }
                    }
                    if self.requires_grad(*b) {
                        let av = self.value(*a);
                        let db = self.buf(&mut node_grads, *b);
                        for i in 0..rows {
                            let gi = &g[i * cols..(i + 1) * cols];
                            for p in 0..k {
                                axpy(av[i * k + p], gi, &mut db[p * cols..(p + 1) * cols]);
                            }
                        }
                    }
                }
                Op::MatMulNt(a, b) => {
                    let k = self.shape(*a).1;
                    if self.requires_grad(*a) {
                        let bv = self.value(*b);
                        let da = self.buf(&mut node_grads, *a);
                        for i in 0..rows {
                            let dai = &mut da[i * k..(i + 1) * k];
                            for j in 0..cols {
                                let gij = g[i * cols + j];
                                if gij != T::zero() {
                                    axpy(gij, &bv[j * k..(j + 1) * k], dai);
                                }
                            }
                        }
                    }
                    if self.requires_grad(*b) {
                        let av = self.value(*a);
                        let db = self.buf(&mut node_grads, *b);
                        for i in 0..rows {
                            let ai = &av[i * k..(i + 1) * k];
                            for j in 0..cols {
                                let gij = g[i * cols + j];
                                if gij != T::zero() {
                                    axpy(gij, ai, &mut db[j * k..(j + 1) * k]);
                                }
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    if self.requires_grad(*a) {
                        axpy(T::one(), &g, self.buf(&mut node_grads, *a));
                    }
                    if self.requires_grad(*b) {
                        let broadcast = self.shape(*b).0 != rows;
                        let db = self.buf(&mut node_grads, *b);
                        if broadcast {
                            for row in g.chunks(cols.max(1)) {
                                axpy(T::one(), row, db);
                            }
                        } else {
                            axpy(T::one(), &g, db);
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if self.requires_grad(*a) {
                        axpy(T::one(), &g, self.buf(&mut node_grads, *a));
                    }
                    if self.requires_grad(*b) {
                        axpy(-T::one(), &g, self.buf(&mut node_grads, *b));
                    }
                }
                Op::Mul(a, b) => {
                    if self.requires_grad(*a) {
                        let bv = self.value(*b);
                        let da = self.buf(&mut node_grads, *a);
                        for ((d, &gi), &y) in da.iter_mut().zip(&g).zip(bv) {
                            *d += gi * y;
                        }
                    }
                    if self.requires_grad(*b) {
                        let av = self.value(*a);
                        let db = self.buf(&mut node_grads, *b);
                        for ((d, &gi), &x) in db.iter_mut().zip(&g).zip(av) {
                            *d += gi * x;
                        }
                    }
                }
                Op::Scale(a, c) => axpy(*c, &g, self.buf(&mut node_grads, *a)),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let da = self.buf(&mut node_grads, *a);
                    for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (T::one() - yi);
                    }
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let da = self.buf(&mut node_grads, *a);
                    for ((d, &gi), &yi) in da.iter_mut().zip(&g).zip(y) {
                        *d += gi * (T::one() - yi * yi);
                    }
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let da = self.buf(&mut node_grads, *a);
                    for r in 0..rows {
                        let span = r * cols..(r + 1) * cols;
                        let (gr, yr) = (&g[span.clone()], &y[span.clone()]);
                        let inner = dot(gr, yr);
                        for ((d, &gi), &yi) in da[span].iter_mut().zip(gr).zip(yr) {
                            *d += yi * (gi - inner);
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        if self.requires_grad(p) {
                            let dp = self.buf(&mut node_grads, p);
                            for r in 0..rows {
                                axpy(
                                    T::one(),
                                    &g[r * cols + offset..r * cols + offset + w],
                                    &mut dp[r * w..(r + 1) * w],
                                );
                            }
                        }
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.shape(p).0 * cols;
                        if self.requires_grad(p) {
                            axpy(T::one(), &g[offset..offset + len], self.buf(&mut node_grads, p));
                        }
                        offset += len;
                    }
                }
                Op::SliceCols(a, start) => {
                    let n = self.shape(*a).1;
                    let da = self.buf(&mut node_grads, *a);
                    for r in 0..rows {
                        axpy(
                            T::one(),
                            &g[r * cols..(r + 1) * cols],
                            &mut da[r * n + start..r * n + start + cols],
                        );
                    }
                }
                Op::GatherRows(a, indices) => {
                    let da = self.buf(&mut node_grads, *a);
                    for (r, &i) in indices.iter().enumerate() {
                        axpy(T::one(), &g[r * cols..(r + 1) * cols], &mut da[i * cols..(i + 1) * cols]);
                    }
                }
                Op::Dropout(a, mult) => {
                    let da = self.buf(&mut node_grads, *a);
                    for ((d, &gi), &s) in da.iter_mut().zip(&g).zip(mult) {
                        *d += gi * s;
                    }
                }
                Op::Select(t, f, mask) => {
                    for (var, want) in [(*t, true), (*f, false)] {
                        if !self.requires_grad(var) {
                            continue;
                        }
                        let dv = self.buf(&mut node_grads, var);
                        for (r, &m) in mask.iter().enumerate() {
                            if m == want {
                                axpy(T::one(), &g[r * cols..(r + 1) * cols], &mut dv[r * cols..(r + 1) * cols]);
                            }
                        }
                    }
                }
                Op::CrossEntropy(p, targets, weights) => {
                    let n = self.shape(*p).1;
                    let floor = T::of(PROB_FLOOR);
                    let pv = self.value(*p);
                    let mut updates = Vec::with_capacity(targets.len());
                    for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                        let prob = pv[r * n + t];
                        if w != T::zero() && prob > floor {
                            updates.push((r * n + t, -g[0] * w / prob));
                        }
                    }
                    let dp = self.buf(&mut node_grads, *p);
                    for (i, u) in updates {
                        dp[i] += u;
                    }
                }
                Op::Sum(a) => {
                    let da = self.buf(&mut node_grads, *a);
                    for d in da.iter_mut() {
                        *d += g[0];
                    }
                }
            }
        }
        for g in grads.iter() {
            if g.data().iter().any(|x| !x.is_finite()) {
                return Err(TensorError::NonFinite("backward"));
            }
        }
        Ok(grads)
    }

    fn buf<'g>(&self, node_grads: &'g mut [Option<Vec<T>>], v: Var) -> &'g mut Vec<T> {
        let n = &self.nodes[v.0];
        node_grads[v.0].get_or_insert_with(|| vec![T::zero(); n.rows * n.cols])
    }
}

fn op_name<T>(op: &Op<T>) -> &'static str {
    match op {
        Op::Constant => "constant",
        Op::Param(_) => "param",
        Op::MatMul(..) => "matmul",
        Op::MatMulNt(..) => "matmul_nt",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::Sigmoid(_) => "sigmoid",
        Op::Tanh(_) => "tanh",
        Op::Softmax(_) => "softmax",
        Op::Concat(_) => "concat",
        Op::ConcatRows(_) => "concat_rows",
        Op::SliceCols(..) => "slice_cols",
        Op::GatherRows(..) => "gather_rows",
        Op::Dropout(..) => "dropout",
        Op::Select(..) => "select_rows",
        Op::CrossEntropy(..) => "cross_entropy",
        Op::Sum(_) => "sum",
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn softmax_in_place<T: Real>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x = *x / total;
    }
}

/// `-ln(max(p, floor))` for a single probability vector.
pub fn cross_entropy<T: Real>(probabilities: &[T], target: usize) -> Result<T, TensorError> {
    let p = *probabilities.get(target).ok_or(TensorError::Index {
        op: "cross_entropy",
        index: target,
        len: probabilities.len(),
    })?;
    Ok(-(p.max(T::of(PROB_FLOOR))).ln())
}
