use std::sync::Arc;

use super::tensor::dot;
use super::{DiffError, ParamId, ParamStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Variable-size row groups in CSR layout: group `i` is
/// `members[offsets[i]..offsets[i + 1]]`. Used for neighbor aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RowGroups {
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl RowGroups {
    pub fn from_lists<I, G>(groups: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = usize>,
    {
        let mut offsets = vec![0];
        let mut members = Vec::new();
        for g in groups {
            members.extend(g);
            offsets.push(members.len());
        }
        Self { offsets, members }
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn group(&self, i: usize) -> &[usize] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn max_member(&self) -> Option<usize> {
        self.members.iter().copied().max()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleRows(Var, Var),
    ConcatCols(Vec<Var>),
    Column(Var, usize),
    MeanRows(Var),
    NeighborMean(Var, Arc<RowGroups>),
    GatherRows(Var, Arc<[usize]>),
    Tanh(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    SoftmaxRows(Var),
    Dot(Var, Var),
    RowDot(Var, Var),
    Sum(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::MatMulNt(..) => "matmul_nt",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::ScaleRows(..) => "scale_rows",
            Op::ConcatCols(_) => "concat_cols",
            Op::Column(..) => "column",
            Op::MeanRows(_) => "mean_rows",
            Op::NeighborMean(..) => "neighbor_mean",
            Op::GatherRows(..) => "gather_rows",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::LogSigmoid(_) => "log_sigmoid",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::Dot(..) => "dot",
            Op::RowDot(..) => "row_dot",
            Op::Sum(_) => "sum",
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log σ(x)` without overflow for large |x|.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Records forward values and the primitives that produced them.
///
/// A tape serves exactly one forward pass; [`Tape::backward`] consumes it.
#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<Tensor>,
    ops: Vec<Op>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.values[v.0].shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var, DiffError> {
        if self.consumed {
            return Err(DiffError::TapeConsumed);
        }
        if !value.is_finite() {
            return Err(DiffError::NonFinite(op.name()));
        }
        self.values.push(value);
        self.ops.push(op);
        Ok(Var(self.values.len() - 1))
    }

    fn mismatch(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> DiffError {
        DiffError::ShapeMismatch { op, lhs, rhs }
    }

    /// A constant with no gradient.
    pub fn input(&mut self, value: Tensor) -> Result<Var, DiffError> {
        self.push(value, Op::Input)
    }

    /// A leaf bound to a parameter; its gradient flows into the store on backward.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var, DiffError> {
        self.push(store.get(id).value().clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(Self::mismatch("matmul", sa, sb));
        }
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 {
            return Err(Self::mismatch("matmul_nt", sa, sb));
        }
        let out = self.value(a).matmul_nt(self.value(b));
        self.push(out, Op::MatMulNt(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, DiffError> {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Self::mismatch(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, Op::Add(a, b))
    }

    /// Adds the `1 × c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb != (1, sa.1) {
            return Err(Self::mismatch("add_row", sa, sb));
        }
        let mut out = self.value(a).clone();
        let bias = self.value(b).data().to_vec();
        for r in 0..sa.0 {
            for (o, x) in out.row_mut(r).iter_mut().zip(&bias) {
                *o += x;
            }
        }
        self.push(out, Op::AddRow(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(out, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, DiffError> {
        let out = self.value(a).map(|x| x * factor);
        self.push(out, Op::Scale(a, factor))
    }

    /// Multiplies row `r` of `a` by entry `r` of the column `s` (`rows × 1`).
    pub fn scale_rows(&mut self, a: Var, s: Var) -> Result<Var, DiffError> {
        let (sa, ss) = (self.shape(a), self.shape(s));
        if ss != (sa.0, 1) {
            return Err(Self::mismatch("scale_rows", sa, ss));
        }
        let mut out = self.value(a).clone();
        for r in 0..sa.0 {
            let f = self.values[s.0].get(r, 0);
            out.row_mut(r).iter_mut().for_each(|x| *x *= f);
        }
        self.push(out, Op::ScaleRows(a, s))
    }

    /// Horizontal concatenation; for row vectors this is vector concatenation.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let first = *parts.first().ok_or(DiffError::Empty("concat_cols"))?;
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(Self::mismatch("concat_cols", self.shape(first), self.shape(p)));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.values[p.0].row(r);
                out.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Column `j` as a `rows × 1` tensor.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var, DiffError> {
        let (rows, cols) = self.shape(a);
        if j >= cols {
            return Err(Self::mismatch("column", (rows, cols), (rows, j + 1)));
        }
        let data = (0..rows).map(|r| self.values[a.0].get(r, j)).collect();
        self.push(Tensor::from_vec(rows, 1, data)?, Op::Column(a, j))
    }

    /// Mean over rows, giving a `1 × cols` row. The mean of zero rows is zero.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var, DiffError> {
        let (rows, cols) = self.shape(a);
        let mut out = Tensor::zeros(1, cols);
        if rows > 0 {
            let src = &self.values[a.0];
            for r in 0..rows {
                for (o, x) in out.data_mut().iter_mut().zip(src.row(r)) {
                    *o += x;
                }
            }
            let inv = 1.0 / rows as f64;
            out.data_mut().iter_mut().for_each(|x| *x *= inv);
        }
        self.push(out, Op::MeanRows(a))
    }

    /// Row `i` of the output is the mean of the rows of `a` listed in group `i`
    /// (zero for an empty group). Batched form of `mean_rows`.
    pub fn neighbor_mean(&mut self, a: Var, groups: Arc<RowGroups>) -> Result<Var, DiffError> {
        let (rows, cols) = self.shape(a);
        if groups.max_member().is_some_and(|m| m >= rows) {
            return Err(Self::mismatch(
                "neighbor_mean",
                (rows, cols),
                (groups.max_member().unwrap_or(0) + 1, cols),
            ));
        }
        let n = groups.num_groups();
        let mut out = Tensor::zeros(n, cols);
        {
            let src = &self.values[a.0];
            for i in 0..n {
                let members = groups.group(i);
                if members.is_empty() {
                    continue;
                }
                let dst = out.row_mut(i);
                for &m in members {
                    for (o, x) in dst.iter_mut().zip(src.row(m)) {
                        *o += x;
                    }
                }
                let inv = 1.0 / members.len() as f64;
                dst.iter_mut().for_each(|x| *x *= inv);
            }
        }
        self.push(out, Op::NeighborMean(a, groups))
    }

    /// Selects rows of `a` by index (repetition allowed).
    pub fn gather_rows(&mut self, a: Var, indices: Arc<[usize]>) -> Result<Var, DiffError> {
        let (rows, cols) = self.shape(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Self::mismatch("gather_rows", (rows, cols), (bad + 1, cols)));
        }
        let mut out = Tensor::zeros(indices.len(), cols);
        for (k, &i) in indices.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.values[a.0].row(i));
        }
        self.push(out, Op::GatherRows(a, indices))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, DiffError> {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, DiffError> {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var, DiffError> {
        let out = self.value(a).map(log_sigmoid);
        self.push(out, Op::LogSigmoid(a))
    }

    /// Softmax across each row (max-shifted). A `1 × n` input is a plain vector softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var, DiffError> {
        let mut out = self.value(a).clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Inner product of two same-shape tensors, as `1 × 1`.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("dot", a, b)?;
        let out = dot(self.value(a).data(), self.value(b).data());
        self.push(Tensor::scalar(out), Op::Dot(a, b))
    }

    /// Per-row inner products, as `rows × 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("row_dot", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = (0..va.rows()).map(|r| dot(va.row(r), vb.row(r))).collect();
        let out = Tensor::from_vec(va.rows(), 1, data)?;
        self.push(out, Op::RowDot(a, b))
    }

    /// Sum of all entries, as `1 × 1`.
    pub fn sum(&mut self, a: Var) -> Result<Var, DiffError> {
        let out = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(out), Op::Sum(a))
    }

    /// Mean of all entries, as `1 × 1`.
    pub fn mean(&mut self, a: Var) -> Result<Var, DiffError> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(DiffError::Empty("mean"));
        }
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Reverse sweep from `output` seeded with `seed`; parameter gradients are
    /// added to the accumulators in `store`. The tape cannot be reused afterwards.
    pub fn backward(&mut self, output: Var, seed: &Tensor, store: &mut ParamStore) -> Result<(), DiffError> {
        if self.consumed {
            return Err(DiffError::TapeConsumed);
        }
        if seed.shape() != self.shape(output) {
            return Err(Self::mismatch("backward", self.shape(output), seed.shape()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed.clone());

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let y = &self.values[i];
            match &self.ops[i] {
                Op::Input => {}
                Op::Param(id) => {
                    let p = store.get_mut(*id);
                    if p.grad().shape() != g.shape() {
                        return Err(Self::mismatch("param", p.grad().shape(), g.shape()));
                    }
                    p.grad_mut().add_assign(&g);
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_nt(&self.values[b.0]);
                    let gb = self.values[a.0].matmul_tn(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulNt(a, b) => {
                    // y = a bᵀ: da = g b, db = gᵀ a
                    let ga = g.matmul(&self.values[b.0]);
                    let gb = g.matmul_tn(&self.values[a.0]);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, b) => {
                    let mut gb = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|x| -x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(&self.values[b.0], |x, y| x * y);
                    let gb = g.zip_map(&self.values[a.0], |x, y| x * y);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, g.map(|x| x * f)),
                Op::ScaleRows(a, s) => {
                    let (va, vs) = (&self.values[a.0], &self.values[s.0]);
                    let mut ga = g.clone();
                    let mut gs = Tensor::zeros(vs.rows(), 1);
                    for r in 0..g.rows() {
                        let f = vs.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= f);
                        gs.set(r, 0, dot(g.row(r), va.row(r)));
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *s, gs);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = self.values[p.0].shape();
                        let mut gp = Tensor::zeros(rows, cols);
                        for r in 0..rows {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::Column(a, j) => {
                    let (rows, cols) = self.values[a.0].shape();
                    let mut ga = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        ga.set(r, *j, g.get(r, 0));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::MeanRows(a) => {
                    let (rows, cols) = self.values[a.0].shape();
                    let mut ga = Tensor::zeros(rows, cols);
                    let inv = 1.0 / rows.max(1) as f64;
                    for r in 0..rows {
                        for (o, x) in ga.row_mut(r).iter_mut().zip(g.data()) {
                            *o = x * inv;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::NeighborMean(a, groups) => {
                    let (rows, cols) = self.values[a.0].shape();
                    let mut ga = Tensor::zeros(rows, cols);
                    for gi in 0..groups.num_groups() {
                        let members = groups.group(gi);
                        if members.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / members.len() as f64;
                        let src = g.row(gi);
                        for &m in members {
                            for (o, x) in ga.row_mut(m).iter_mut().zip(src) {
                                *o += x * inv;
                            }
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::GatherRows(a, indices) => {
                    let (rows, cols) = self.values[a.0].shape();
                    let mut ga = Tensor::zeros(rows, cols);
                    for (k, &idx) in indices.iter().enumerate() {
                        for (o, x) in ga.row_mut(idx).iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => accumulate(&mut grads, *a, g.zip_map(y, |gx, t| gx * (1.0 - t * t))),
                Op::Sigmoid(a) => accumulate(&mut grads, *a, g.zip_map(y, |gx, s| gx * s * (1.0 - s))),
                Op::LogSigmoid(a) => {
                    let ga = g.zip_map(&self.values[a.0], |gx, x| gx * sigmoid(-x));
                    accumulate(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let mut ga = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let inner = dot(g.row(r), y.row(r));
                        for ((o, &gx), &s) in ga.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = s * (gx - inner);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Dot(a, b) => {
                    let s = g.item();
                    let ga = self.values[b.0].map(|x| x * s);
                    let gb = self.values[a.0].map(|x| x * s);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::RowDot(a, b) => {
                    let (va, vb) = (&self.values[a.0], &self.values[b.0]);
                    let mut ga = vb.clone();
                    let mut gb = va.clone();
                    for r in 0..va.rows() {
                        let s = g.get(r, 0);
                        ga.row_mut(r).iter_mut().for_each(|x| *x *= s);
                        gb.row_mut(r).iter_mut().for_each(|x| *x *= s);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Sum(a) => {
                    let (rows, cols) = self.values[a.0].shape();
                    accumulate(&mut grads, *a, Tensor::filled(rows, cols, g.item()));
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
