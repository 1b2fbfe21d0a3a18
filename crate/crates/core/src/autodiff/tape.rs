use std::ops::Range;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, Array2, Axis, Zip};

use super::sparse::SparseMatrix;
use super::AutodiffError;
use crate::Scalar;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

impl Var {
    pub fn index(self) -> usize {
        self.index
    }
}

/// Operation that produced a node. Parent indices always precede the node.
#[derive(Debug, Clone)]
pub enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    ScalarMul(usize, T),
    AddRow(usize, usize),
    Relu(usize),
    Sigmoid(usize),
    Powf(usize, T),
    Transpose(usize),
    SumRows(usize),
    SumCols(usize),
    MeanAll(usize),
    ConcatCols(usize, usize),
    SliceRows(usize, Range<usize>),
    Pick(usize, usize, usize),
    SparseMatMul(Rc<SparseMatrix<T>>, usize),
    SegmentSum(usize, Rc<Vec<usize>>),
    ScatterSym(usize, Rc<Vec<(usize, usize)>>),
    SoftmaxCrossEntropy(usize, Rc<Vec<usize>>),
    CwMargin(usize, usize),
    EntropyMean(usize),
}

impl<T> Op<T> {
    fn parents(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf => vec![],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Hadamard(a, b) | AddRow(a, b) | ConcatCols(a, b) => {
                vec![*a, *b]
            }
            ScalarMul(a, _) | Relu(a) | Sigmoid(a) | Powf(a, _) | Transpose(a) | SumRows(a)
            | SumCols(a) | MeanAll(a) | SliceRows(a, _) | Pick(a, _, _) | SparseMatMul(_, a)
            | SegmentSum(a, _) | ScatterSym(a, _) | SoftmaxCrossEntropy(a, _) | CwMargin(a, _)
            | EntropyMean(a) => vec![*a],
        }
    }

    pub fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Leaf => "leaf",
            MatMul(..) => "matmul",
            Add(..) => "add",
            Sub(..) => "sub",
            Hadamard(..) => "hadamard",
            ScalarMul(..) => "scalar_mul",
            AddRow(..) => "add_row",
            Relu(..) => "relu",
            Sigmoid(..) => "sigmoid",
            Powf(..) => "powf",
            Transpose(..) => "transpose",
            SumRows(..) => "sum_rows",
            SumCols(..) => "sum_cols",
            MeanAll(..) => "mean_all",
            ConcatCols(..) => "concat_cols",
            SliceRows(..) => "slice_rows",
            Pick(..) => "pick",
            SparseMatMul(..) => "sparse_matmul",
            SegmentSum(..) => "segment_sum",
            ScatterSym(..) => "scatter_sym",
            SoftmaxCrossEntropy(..) => "softmax_cross_entropy",
            CwMargin(..) => "cw_margin",
            EntropyMean(..) => "entropy_mean",
        }
    }
}

/// One recorded value together with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct DiffNode<T> {
    pub value: Array2<T>,
    pub grad: Option<Array2<T>>,
    pub op: Op<T>,
    pub requires_grad: bool,
}

impl<T: Scalar> DiffNode<T> {
    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }
}

/// Eager computation graph with a reverse pass.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and the reverse pass is a single backwards sweep.
#[derive(Debug)]
pub struct Tape<T> {
    id: u64,
    nodes: Vec<DiffNode<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch<T>(op: &'static str, a: &Array2<T>, b: &Array2<T>) -> AutodiffError {
    AutodiffError::ShapeMismatch { op, left: a.dim(), right: b.dim() }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Largest competitor logit index, ties to the smallest class index.
fn runner_up<T: Scalar>(row: ndarray::ArrayView1<T>, label: usize) -> usize {
    let mut best: Option<usize> = None;
    for (c, &z) in row.iter().enumerate() {
        if c == label {
            continue;
        }
        match best {
            Some(b) if row[b] >= z => {}
            _ => best = Some(c),
        }
    }
    best.expect("at least two classes")
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DiffNode<T>] {
        &self.nodes
    }

    fn check(&self, v: Var) -> Result<usize, AutodiffError> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(AutodiffError::ForeignVar);
        }
        Ok(v.index)
    }

    fn push(&mut self, value: Array2<T>, op: Op<T>) -> Var {
        let requires_grad = op.parents().iter().any(|&p| self.nodes[p].requires_grad);
        self.nodes.push(DiffNode { value, grad: None, op, requires_grad });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    /// Records an input. Only leaves with `requires_grad` receive gradients
    /// (and make their descendants differentiable).
    pub fn leaf(&mut self, value: Array2<T>, requires_grad: bool) -> Var {
        self.nodes.push(DiffNode { value, grad: None, op: Op::Leaf, requires_grad });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        let i = self.check(v).expect("var belongs to this tape");
        &self.nodes[i].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[[0, 0]]
    }

    pub fn node(&self, v: Var) -> Result<&DiffNode<T>, AutodiffError> {
        Ok(&self.nodes[self.check(v)?])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if va.ncols() != vb.nrows() {
            return Err(mismatch("matmul", va, vb));
        }
        let out = va.dot(vb);
        Ok(self.push(out, Op::MatMul(ia, ib)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize), AutodiffError> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if va.dim() != vb.dim() {
            return Err(mismatch(op, va, vb));
        }
        Ok((ia, ib))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ia, ib) = self.same_shape("add", a, b)?;
        let out = &self.nodes[ia].value + &self.nodes[ib].value;
        Ok(self.push(out, Op::Add(ia, ib)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ia, ib) = self.same_shape("sub", a, b)?;
        let out = &self.nodes[ia].value - &self.nodes[ib].value;
        Ok(self.push(out, Op::Sub(ia, ib)))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ia, ib) = self.same_shape("hadamard", a, b)?;
        let out = &self.nodes[ia].value * &self.nodes[ib].value;
        Ok(self.push(out, Op::Hadamard(ia, ib)))
    }

    pub fn scalar_mul(&mut self, a: Var, s: T) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let out = &self.nodes[ia].value * s;
        Ok(self.push(out, Op::ScalarMul(ia, s)))
    }

    /// Adds a `1×c` row to every row of an `r×c` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, AutodiffError> {
        let (ia, ib) = (self.check(a)?, self.check(row)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if vb.nrows() != 1 || vb.ncols() != va.ncols() {
            return Err(mismatch("add_row", va, vb));
        }
        let out = va + vb;
        Ok(self.push(out, Op::AddRow(ia, ib)))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.mapv(|x| if x > T::zero() { x } else { T::zero() });
        Ok(self.push(out, Op::Relu(ia)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.mapv(sigmoid);
        Ok(self.push(out, Op::Sigmoid(ia)))
    }

    /// Elementwise power; inputs must keep the power defined (e.g. positive
    /// entries for negative exponents).
    pub fn powf(&mut self, a: Var, p: T) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.mapv(|x| x.powf(p));
        Ok(self.push(out, Op::Powf(ia, p)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.t().to_owned();
        Ok(self.push(out, Op::Transpose(ia)))
    }

    /// Sums over rows: `r×c → 1×c` (the sum-pooling readout).
    pub fn sum_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.sum_axis(Axis(0)).insert_axis(Axis(0));
        Ok(self.push(out, Op::SumRows(ia)))
    }

    /// Sums over columns: `r×c → r×1`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let out = self.nodes[ia].value.sum_axis(Axis(1)).insert_axis(Axis(1));
        Ok(self.push(out, Op::SumCols(ia)))
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let v = &self.nodes[ia].value;
        let n = T::from_usize(v.len()).unwrap();
        let out = Array2::from_elem((1, 1), v.sum() / n);
        Ok(self.push(out, Op::MeanAll(ia)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if va.nrows() != vb.nrows() {
            return Err(mismatch("concat_cols", va, vb));
        }
        let out = ndarray::concatenate(Axis(1), &[va.view(), vb.view()]).unwrap();
        Ok(self.push(out, Op::ConcatCols(ia, ib)))
    }

    pub fn slice_rows(&mut self, a: Var, rows: Range<usize>) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let va = &self.nodes[ia].value;
        if rows.start > rows.end || rows.end > va.nrows() {
            return Err(AutodiffError::OutOfRange { op: "slice_rows", shape: va.dim() });
        }
        let out = va.slice(s![rows.clone(), ..]).to_owned();
        Ok(self.push(out, Op::SliceRows(ia, rows)))
    }

    /// Selects one entry as a `1×1` node.
    pub fn pick(&mut self, a: Var, row: usize, col: usize) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let va = &self.nodes[ia].value;
        if row >= va.nrows() || col >= va.ncols() {
            return Err(AutodiffError::OutOfRange { op: "pick", shape: va.dim() });
        }
        let out = Array2::from_elem((1, 1), va[[row, col]]);
        Ok(self.push(out, Op::Pick(ia, row, col)))
    }

    /// `sparse · a` with a constant sparse left operand.
    pub fn sparse_matmul(&mut self, sparse: Rc<SparseMatrix<T>>, a: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let va = &self.nodes[ia].value;
        if sparse.shape().1 != va.nrows() {
            return Err(AutodiffError::ShapeMismatch {
                op: "sparse_matmul",
                left: sparse.shape(),
                right: va.dim(),
            });
        }
        let out = sparse.matmul(va);
        Ok(self.push(out, Op::SparseMatMul(sparse, ia)))
    }

    /// Sums consecutive row segments `offsets[k]..offsets[k+1]` into row `k`.
    pub fn segment_sum(&mut self, a: Var, offsets: Rc<Vec<usize>>) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let va = &self.nodes[ia].value;
        if offsets.len() < 2 || *offsets.last().unwrap() != va.nrows() || offsets[0] != 0 {
            return Err(AutodiffError::OutOfRange { op: "segment_sum", shape: va.dim() });
        }
        let mut out = Array2::zeros((offsets.len() - 1, va.ncols()));
        for k in 0..offsets.len() - 1 {
            let seg = va.slice(s![offsets[k]..offsets[k + 1], ..]).sum_axis(Axis(0));
            out.row_mut(k).assign(&seg);
        }
        Ok(self.push(out, Op::SegmentSum(ia, offsets)))
    }

    /// Scatters a `p×1` column into a symmetric `n×n` matrix: entry `k` lands
    /// at `(u_k, v_k)` and `(v_k, u_k)`.
    pub fn scatter_sym(
        &mut self,
        a: Var,
        pairs: Rc<Vec<(usize, usize)>>,
        n: usize,
    ) -> Result<Var, AutodiffError> {
        let ia = self.check(a)?;
        let va = &self.nodes[ia].value;
        if va.ncols() != 1 || va.nrows() != pairs.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "scatter_sym",
                left: va.dim(),
                right: (pairs.len(), 1),
            });
        }
        let mut out = Array2::zeros((n, n));
        for (k, &(u, v)) in pairs.iter().enumerate() {
            if u >= n || v >= n || u == v {
                return Err(AutodiffError::OutOfRange { op: "scatter_sym", shape: (n, n) });
            }
            out[[u, v]] += va[[k, 0]];
            out[[v, u]] += va[[k, 0]];
        }
        Ok(self.push(out, Op::ScatterSym(ia, pairs)))
    }

    /// Mean over rows of `-log softmax(logits_row)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, AutodiffError> {
        let ia = self.check(logits)?;
        let z = &self.nodes[ia].value;
        if z.nrows() != labels.len() || z.nrows() == 0 {
            return Err(AutodiffError::ShapeMismatch {
                op: "softmax_cross_entropy",
                left: z.dim(),
                right: (labels.len(), 1),
            });
        }
        if labels.iter().any(|&l| l >= z.ncols()) {
            return Err(AutodiffError::LabelOutOfRange { classes: z.ncols() });
        }
        let mut total = T::zero();
        for (row, &label) in z.rows().into_iter().zip(labels) {
            let max = row.fold(T::neg_infinity(), |m, &x| m.max(x));
            let lse = row.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
            total += lse - row[label];
        }
        let out = Array2::from_elem((1, 1), total / T::from_usize(labels.len()).unwrap());
        Ok(self.push(out, Op::SoftmaxCrossEntropy(ia, Rc::new(labels.to_vec()))))
    }

    /// `max(z_label − max_{c≠label} z_c, 0)` on a `1×C` logit row.
    pub fn cw_margin(&mut self, logits: Var, label: usize) -> Result<Var, AutodiffError> {
        let ia = self.check(logits)?;
        let z = &self.nodes[ia].value;
        if z.nrows() != 1 || z.ncols() < 2 {
            return Err(AutodiffError::OutOfRange { op: "cw_margin", shape: z.dim() });
        }
        if label >= z.ncols() {
            return Err(AutodiffError::LabelOutOfRange { classes: z.ncols() });
        }
        let other = runner_up(z.row(0), label);
        let margin = z[[0, label]] - z[[0, other]];
        // `max` would hide a NaN margin from divergence checks
        let clamped = if margin < T::zero() { T::zero() } else { margin };
        let out = Array2::from_elem((1, 1), clamped);
        Ok(self.push(out, Op::CwMargin(ia, label)))
    }

    /// Mean binary entropy of `sigmoid(mask)` over all mask entries.
    pub fn entropy_mean(&mut self, mask: Var) -> Result<Var, AutodiffError> {
        let ia = self.check(mask)?;
        let m = &self.nodes[ia].value;
        if m.is_empty() {
            return Err(AutodiffError::OutOfRange { op: "entropy_mean", shape: m.dim() });
        }
        let total: T = m
            .iter()
            .map(|&x| {
                let p = sigmoid(x);
                p * softplus(-x) + (T::one() - p) * softplus(x)
            })
            .sum();
        let out = Array2::from_elem((1, 1), total / T::from_usize(m.len()).unwrap());
        Ok(self.push(out, Op::EntropyMean(ia)))
    }

    /// Reverse pass from a `1×1` output. Gradients of this pass are added to
    /// whatever is already stored on each differentiable node.
    pub fn backward(&mut self, output: Var) -> Result<(), AutodiffError> {
        let out = self.check(output)?;
        let shape = self.nodes[out].shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NotScalar(shape));
        }
        if !self.nodes[out].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Array2<T>>> = vec![None; out + 1];
        grads[out] = Some(Array2::ones((1, 1)));
        for i in (0..=out).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            for (parent, contribution) in self.local_grads(i, &g) {
                if !self.nodes[parent].requires_grad {
                    continue;
                }
                match &mut grads[parent] {
                    Some(acc) => *acc += &contribution,
                    slot @ None => *slot = Some(contribution),
                }
            }
            match &mut self.nodes[i].grad {
                Some(acc) => *acc += &g,
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, g: &Array2<T>) -> Vec<(usize, Array2<T>)> {
        let val = |k: usize| &self.nodes[k].value;
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let mut out = Vec::with_capacity(2);
                if self.nodes[*a].requires_grad {
                    out.push((*a, g.dot(&val(*b).t())));
                }
                if self.nodes[*b].requires_grad {
                    out.push((*b, val(*a).t().dot(g)));
                }
                out
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.mapv(|x| -x))],
            Op::Hadamard(a, b) => vec![(*a, g * val(*b)), (*b, g * val(*a))],
            Op::ScalarMul(a, s) => vec![(*a, g * *s)],
            Op::AddRow(a, b) => vec![(*a, g.clone()), (*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)))],
            Op::Relu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x <= T::zero() {
                        *d = T::zero();
                    }
                });
                vec![(*a, d)]
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| *d = *d * y * (T::one() - y));
                vec![(*a, d)]
            }
            Op::Powf(a, p) => {
                let mut d = g.clone();
                let pm1 = *p - T::one();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| *d = *d * *p * x.powf(pm1));
                vec![(*a, d)]
            }
            Op::Transpose(a) => vec![(*a, g.t().to_owned())],
            Op::SumRows(a) => {
                let d = g.broadcast(val(*a).dim()).unwrap().to_owned();
                vec![(*a, d)]
            }
            Op::SumCols(a) => {
                let d = g.broadcast(val(*a).dim()).unwrap().to_owned();
                vec![(*a, d)]
            }
            Op::MeanAll(a) => {
                let v = val(*a);
                let n = T::from_usize(v.len()).unwrap();
                vec![(*a, Array2::from_elem(v.dim(), g[[0, 0]] / n))]
            }
            Op::ConcatCols(a, b) => {
                let ca = val(*a).ncols();
                vec![(*a, g.slice(s![.., ..ca]).to_owned()), (*b, g.slice(s![.., ca..]).to_owned())]
            }
            Op::SliceRows(a, rows) => {
                let mut d = Array2::zeros(val(*a).dim());
                d.slice_mut(s![rows.clone(), ..]).assign(g);
                vec![(*a, d)]
            }
            Op::Pick(a, r, c) => {
                let mut d = Array2::zeros(val(*a).dim());
                d[[*r, *c]] = g[[0, 0]];
                vec![(*a, d)]
            }
            Op::SparseMatMul(sp, a) => vec![(*a, sp.transpose_matmul(g))],
            Op::SegmentSum(a, offsets) => {
                let mut d = Array2::zeros(val(*a).dim());
                for k in 0..offsets.len() - 1 {
                    for r in offsets[k]..offsets[k + 1] {
                        d.row_mut(r).assign(&g.row(k));
                    }
                }
                vec![(*a, d)]
            }
            Op::ScatterSym(a, pairs) => {
                let mut d = Array2::zeros(val(*a).dim());
                for (k, &(u, v)) in pairs.iter().enumerate() {
                    d[[k, 0]] = g[[u, v]] + g[[v, u]];
                }
                vec![(*a, d)]
            }
            Op::SoftmaxCrossEntropy(a, labels) => {
                let z = val(*a);
                let scale = g[[0, 0]] / T::from_usize(labels.len()).unwrap();
                let mut d = Array2::zeros(z.dim());
                for (r, &label) in labels.iter().enumerate() {
                    let row = z.row(r);
                    let max = row.fold(T::neg_infinity(), |m, &x| m.max(x));
                    let denom: T = row.iter().map(|&x| (x - max).exp()).sum();
                    for c in 0..z.ncols() {
                        let p = (row[c] - max).exp() / denom;
                        let target = if c == label { T::one() } else { T::zero() };
                        d[[r, c]] = (p - target) * scale;
                    }
                }
                vec![(*a, d)]
            }
            Op::CwMargin(a, label) => {
                let z = val(*a);
                let mut d = Array2::zeros(z.dim());
                if node.value[[0, 0]] > T::zero() {
                    let other = runner_up(z.row(0), *label);
                    d[[0, *label]] = g[[0, 0]];
                    d[[0, other]] = -g[[0, 0]];
                }
                vec![(*a, d)]
            }
            Op::EntropyMean(a) => {
                let m = val(*a);
                let scale = g[[0, 0]] / T::from_usize(m.len()).unwrap();
                // dH/dm = -p(1-p)·m for H the binary entropy of p = sigmoid(m)
                let d = m.mapv(|x| {
                    let p = sigmoid(x);
                    -scale * p * (T::one() - p) * x
                });
                vec![(*a, d)]
            }
        }
    }

    /// Copy of the accumulated gradient of `v`.
    pub fn grad_of(&self, v: Var) -> Result<Array2<T>, AutodiffError> {
        let i = self.check(v)?;
        let node = &self.nodes[i];
        if !node.requires_grad {
            return Err(AutodiffError::NoGradient(i));
        }
        node.grad.clone().ok_or(AutodiffError::NoGradient(i))
    }

    /// Zeroes every stored gradient.
    pub fn reset_grads(&mut self) {
        for node in &mut self.nodes {
            if let Some(g) = &mut node.grad {
                g.fill(T::zero());
            }
        }
    }
}
