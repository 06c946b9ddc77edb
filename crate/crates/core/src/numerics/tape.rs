//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! A [`Tape`] is an append-only list of nodes. Each node stores its value and
//! the primitive that produced it, so node order is a topological order and
//! [`Tape::backward`] is a single reverse sweep. Leaves are either trainable
//! (gradient requested) or constant; gradients are only propagated through
//! nodes that reach a trainable leaf.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, SparseMatrix};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    /// Elementwise product with a constant (dropout masks).
    MulConst(Var, Rc<DenseMatrix>),
    SpMM(Rc<SparseMatrix>, Var),
    Concat(Var, Var),
    /// Gather of the listed rows, in order.
    SelectRows(Var, Rc<[usize]>),
    RowSoftmax(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        labels: Rc<[usize]>,
        rows: Rc<[usize]>,
    },
    BceWithLogits {
        logits: Var,
        targets: Rc<[f64]>,
        rows: Rc<[usize]>,
    },
    MseRows {
        pred: Var,
        target: Rc<DenseMatrix>,
        rows: Rc<[usize]>,
    },
    Sum(Var),
    LinComb(Vec<(Var, f64)>),
}

#[derive(Clone, Debug)]
struct Node {
    value: DenseMatrix,
    op: Op,
    needs_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar root with respect to every node that needed one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<DenseMatrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&DenseMatrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::AddRow(a, b)
            | Op::Concat(a, b) => {
                vec![*a, *b]
            }
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::MulConst(a, _)
            | Op::SpMM(_, a)
            | Op::SelectRows(a, _)
            | Op::RowSoftmax(a)
            | Op::Sum(a) => vec![*a],
            Op::SoftmaxCrossEntropy { logits, .. } | Op::BceWithLogits { logits, .. } => {
                vec![*logits]
            }
            Op::MseRows { pred, .. } => vec![*pred],
            Op::LinComb(terms) => terms.iter().map(|(v, _)| *v).collect(),
        }
    }

    /// Computes the node value from its inputs. Leaves have no rule.
    fn eval(&self, nodes: &[Node]) -> Result<DenseMatrix> {
        let val = |v: &Var| &nodes[v.0].value;
        Ok(match self {
            Op::Leaf => unreachable!("leaves are not evaluated"),
            Op::MatMul(a, b) => val(a).matmul(val(b))?,
            Op::Add(a, b) => val(a).add(val(b))?,
            Op::Sub(a, b) => val(a).sub(val(b))?,
            Op::AddRow(a, b) => val(a).add_row(val(b))?,
            Op::Scale(a, s) => val(a).scale(*s),
            // NaN passes through so divergence surfaces as a non-finite loss
            Op::Relu(a) => val(a).map(|v| if v.is_nan() { v } else { v.max(0.0) }),
            Op::MulConst(a, m) => val(a).hadamard(m)?,
            Op::SpMM(s, a) => s.spmm(val(a))?,
            Op::Concat(a, b) => val(a).hconcat(val(b))?,
            Op::SelectRows(a, rows) => val(a).select_rows(rows),
            Op::RowSoftmax(a) => val(a).row_softmax(),
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                rows,
            } => {
                let z = val(logits);
                let total: f64 = rows
                    .iter()
                    .map(|&i| log_sum_exp(z.row(i)) - z.get(i, labels[i]))
                    .sum();
                DenseMatrix::filled(1, 1, total / rows.len() as f64)
            }
            Op::BceWithLogits {
                logits,
                targets,
                rows,
            } => {
                let z = val(logits);
                if rows.is_empty() {
                    DenseMatrix::zeros(1, 1)
                } else {
                    let total: f64 = rows
                        .iter()
                        .map(|&i| {
                            let zi = z.get(i, 0);
                            softplus(zi) - targets[i] * zi
                        })
                        .sum();
                    DenseMatrix::filled(1, 1, total / rows.len() as f64)
                }
            }
            Op::MseRows { pred, target, rows } => {
                let p = val(pred);
                let total: f64 = rows
                    .iter()
                    .map(|&i| {
                        p.row(i)
                            .iter()
                            .zip(target.row(i))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                    })
                    .sum();
                DenseMatrix::filled(1, 1, total / rows.len() as f64)
            }
            Op::Sum(a) => DenseMatrix::filled(1, 1, val(a).sum()),
            Op::LinComb(terms) => {
                let s: f64 = terms.iter().map(|(v, c)| c * val(v).data()[0]).sum();
                DenseMatrix::filled(1, 1, s)
            }
        })
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

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, op: Op) -> Result<Var> {
        let value = op.eval(&self.nodes)?;
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a leaf. `trainable` leaves receive gradients.
    pub fn leaf(&mut self, value: DenseMatrix, trainable: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: trainable,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.leaf(value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Sub(a, b))
    }

    /// Adds a `1 x c` bias row to each row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        self.push(Op::AddRow(a, bias))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.push(Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Relu(a))
    }

    pub fn mul_const(&mut self, a: Var, m: Rc<DenseMatrix>) -> Result<Var> {
        self.push(Op::MulConst(a, m))
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - p)`.
    /// `p == 0` returns `a` unchanged without recording a node.
    pub fn dropout(&mut self, a: Var, p: f64, rng: &mut impl rand::Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "dropout p={p} outside [0, 1)"
            )));
        }
        if p == 0.0 {
            return Ok(a);
        }
        let (r, c) = self.value(a).shape();
        let keep = 1.0 / (1.0 - p);
        let mask = DenseMatrix::from_fn(
            r,
            c,
            |_, _| if rng.random::<f64>() < p { 0.0 } else { keep },
        );
        self.mul_const(a, Rc::new(mask))
    }

    pub fn spmm(&mut self, s: Rc<SparseMatrix>, a: Var) -> Result<Var> {
        self.push(Op::SpMM(s, a))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Concat(a, b))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let n = self.value(a).rows();
        if let Some(&bad) = rows.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "select_rows: row {bad} out of range ({n} rows)"
            )));
        }
        self.push(Op::SelectRows(a, rows.into()))
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        self.push(Op::RowSoftmax(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.push(Op::Sum(a))
    }

    /// `sum_t c_t * v_t` over scalar (1x1) nodes.
    pub fn lin_comb(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        for (v, _) in terms {
            if self.value(*v).shape() != (1, 1) {
                return Err(Error::shape(
                    "lin_comb",
                    "1x1",
                    format!("{:?}", self.value(*v).shape()),
                ));
            }
        }
        self.push(Op::LinComb(terms.to_vec()))
    }

    /// Mean softmax cross-entropy over `rows`. `labels` is indexed by node.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        rows: &[usize],
    ) -> Result<Var> {
        let z = self.value(logits);
        if rows.is_empty() {
            return Err(Error::Degenerate("cross-entropy over an empty mask".into()));
        }
        if labels.len() != z.rows() {
            return Err(Error::shape(
                "softmax_cross_entropy labels",
                z.rows(),
                labels.len(),
            ));
        }
        if let Some(&bad) = rows
            .iter()
            .find(|&&i| i >= z.rows() || labels[i] >= z.cols())
        {
            return Err(Error::InvalidArgument(format!(
                "row {bad} or its label out of range"
            )));
        }
        self.push(Op::SoftmaxCrossEntropy {
            logits,
            labels: labels.into(),
            rows: rows.into(),
        })
    }

    /// Mean binary cross-entropy of an `n x 1` logit column over `rows`.
    /// An empty selection yields a constant zero.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64], rows: &[usize]) -> Result<Var> {
        let z = self.value(logits);
        if z.cols() != 1 {
            return Err(Error::shape(
                "bce_with_logits",
                "n x 1",
                format!("{:?}", z.shape()),
            ));
        }
        if targets.len() != z.rows() {
            return Err(Error::shape(
                "bce_with_logits targets",
                z.rows(),
                targets.len(),
            ));
        }
        if rows.iter().any(|&i| i >= z.rows()) {
            return Err(Error::InvalidArgument("bce row out of range".into()));
        }
        self.push(Op::BceWithLogits {
            logits,
            targets: targets.into(),
            rows: rows.into(),
        })
    }

    /// `(1/|rows|) sum_{i in rows} ||pred_i - target_i||^2`.
    pub fn mse_rows(&mut self, pred: Var, target: Rc<DenseMatrix>, rows: &[usize]) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(Error::shape(
                "mse_rows",
                format!("{:?}", p.shape()),
                format!("{:?}", target.shape()),
            ));
        }
        if rows.is_empty() {
            return Err(Error::Degenerate(
                "mean squared error over an empty mask".into(),
            ));
        }
        if rows.iter().any(|&i| i >= p.rows()) {
            return Err(Error::InvalidArgument("mse row out of range".into()));
        }
        self.push(Op::MseRows {
            pred,
            target,
            rows: rows.into(),
        })
    }

    /// Re-evaluates every non-leaf node from the leaves.
    pub fn replay(&self) -> Result<Vec<DenseMatrix>> {
        let mut replayed: Vec<Node> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let value = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => op.eval(&replayed)?,
            };
            replayed.push(Node {
                value,
                op: node.op.clone(),
                needs_grad: node.needs_grad,
            });
        }
        Ok(replayed.into_iter().map(|n| n.value).collect())
    }

    /// Gradient of the scalar `root` with respect to all nodes upstream of it.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let shape = self.value(root).shape();
        if shape != (1, 1) {
            return Err(Error::shape("backward", "1x1 root", format!("{shape:?}")));
        }
        let mut grads: Vec<Option<DenseMatrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(DenseMatrix::filled(1, 1, 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        node: &Node,
        g: &DenseMatrix,
        grads: &mut [Option<DenseMatrix>],
    ) -> Result<()> {
        let ng = |v: &Var| self.nodes[v.0].needs_grad;
        let val = |v: &Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, d: DenseMatrix| -> Result<()> {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&d),
                slot @ None => {
                    *slot = Some(d);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if ng(a) {
                    acc(*a, g.matmul_t(val(b))?)?;
                }
                if ng(b) {
                    acc(*b, val(a).t_matmul(g)?)?;
                }
            }
            Op::Add(a, b) => {
                if ng(a) {
                    acc(*a, g.clone())?;
                }
                if ng(b) {
                    acc(*b, g.clone())?;
                }
            }
            Op::Sub(a, b) => {
                if ng(a) {
                    acc(*a, g.clone())?;
                }
                if ng(b) {
                    acc(*b, g.scale(-1.0))?;
                }
            }
            Op::AddRow(a, b) => {
                if ng(a) {
                    acc(*a, g.clone())?;
                }
                if ng(b) {
                    acc(*b, g.col_sums())?;
                }
            }
            Op::Scale(a, s) => {
                if ng(a) {
                    acc(*a, g.scale(*s))?;
                }
            }
            Op::Relu(a) => {
                if ng(a) {
                    let x = val(a);
                    let d = DenseMatrix::from_vec(
                        x.rows(),
                        x.cols(),
                        x.data()
                            .iter()
                            .zip(g.data())
                            .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
                            .collect(),
                    )?;
                    acc(*a, d)?;
                }
            }
            Op::MulConst(a, m) => {
                if ng(a) {
                    acc(*a, g.hadamard(m)?)?;
                }
            }
            Op::SpMM(s, a) => {
                if ng(a) {
                    acc(*a, s.spmm_transposed(g)?)?;
                }
            }
            Op::Concat(a, b) => {
                let (ga, gb) = g.hsplit(val(a).cols());
                if ng(a) {
                    acc(*a, ga)?;
                }
                if ng(b) {
                    acc(*b, gb)?;
                }
            }
            Op::SelectRows(a, rows) => {
                if ng(a) {
                    let x = val(a);
                    let mut d = DenseMatrix::zeros(x.rows(), x.cols());
                    for (r, &i) in rows.iter().enumerate() {
                        for (o, v) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(*a, d)?;
                }
            }
            Op::RowSoftmax(a) => {
                if ng(a) {
                    let y = &node.value;
                    let mut d = DenseMatrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, &yv), &gv) in d.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = yv * (gv - dot);
                        }
                    }
                    acc(*a, d)?;
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                labels,
                rows,
            } => {
                if ng(logits) {
                    let z = val(logits);
                    let scale = g.data()[0] / rows.len() as f64;
                    let mut d = DenseMatrix::zeros(z.rows(), z.cols());
                    for &i in rows.iter() {
                        let lse = log_sum_exp(z.row(i));
                        for (c, o) in d.row_mut(i).iter_mut().enumerate() {
                            let p = (z.get(i, c) - lse).exp();
                            let t = if c == labels[i] { 1.0 } else { 0.0 };
                            *o += scale * (p - t);
                        }
                    }
                    acc(*logits, d)?;
                }
            }
            Op::BceWithLogits {
                logits,
                targets,
                rows,
            } => {
                if ng(logits) {
                    let z = val(logits);
                    let mut d = DenseMatrix::zeros(z.rows(), 1);
                    if !rows.is_empty() {
                        let scale = g.data()[0] / rows.len() as f64;
                        for &i in rows.iter() {
                            let cur = d.get(i, 0);
                            d.set(i, 0, cur + scale * (sigmoid(z.get(i, 0)) - targets[i]));
                        }
                    }
                    acc(*logits, d)?;
                }
            }
            Op::MseRows { pred, target, rows } => {
                if ng(pred) {
                    let p = val(pred);
                    let scale = 2.0 * g.data()[0] / rows.len() as f64;
                    let mut d = DenseMatrix::zeros(p.rows(), p.cols());
                    for &i in rows.iter() {
                        for ((o, &pv), &tv) in
                            d.row_mut(i).iter_mut().zip(p.row(i)).zip(target.row(i))
                        {
                            *o += scale * (pv - tv);
                        }
                    }
                    acc(*pred, d)?;
                }
            }
            Op::Sum(a) => {
                if ng(a) {
                    let (r, c) = val(a).shape();
                    acc(*a, DenseMatrix::filled(r, c, g.data()[0]))?;
                }
            }
            Op::LinComb(terms) => {
                for (v, c) in terms {
                    if ng(v) {
                        acc(*v, DenseMatrix::filled(1, 1, c * g.data()[0]))?;
                    }
                }
            }
        }
        Ok(())
    }
}
