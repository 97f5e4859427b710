use crate::error::{contract, Error, Result};

use super::params::ParamStore;
use super::tensor::Tensor;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Differentiable operations understood by the tape.
///
/// All ops view their operands as matrices: the last dimension is the column
/// count and every leading dimension folds into rows.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    /// `[m, k] x [k, n] -> [m, n]`.
    MatMul,
    /// Elementwise sum; the second operand may be a `[cols]` row broadcast.
    Add,
    /// Elementwise product of equal shapes.
    Mul,
    /// Row gather from a `[vocab, d]` table.
    EmbeddingLookup { ids: Vec<usize> },
    /// Row-wise normalisation; operands are `x, gain, bias`.
    LayerNorm { eps: f64 },
    /// Row-wise softmax.
    Softmax,
    Relu,
    /// Column-wise concatenation of operands with equal row counts.
    Concat,
    /// Columns `[start, end)`.
    Slice { start: usize, end: usize },
    Transpose,
    /// Summed negative log-likelihood of `targets` under row-wise softmax.
    /// Rows whose target equals `ignore` contribute nothing.
    CrossEntropyWithLogits {
        targets: Vec<usize>,
        ignore: Option<usize>,
    },
    /// Multiplication by a constant.
    Scale(f64),
    /// Sum of all entries into a scalar.
    Sum,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Mul => "mul",
            OpKind::EmbeddingLookup { .. } => "embedding_lookup",
            OpKind::LayerNorm { .. } => "layer_norm",
            OpKind::Softmax => "softmax",
            OpKind::Relu => "relu",
            OpKind::Concat => "concat",
            OpKind::Slice { .. } => "slice",
            OpKind::Transpose => "transpose",
            OpKind::CrossEntropyWithLogits { .. } => "cross_entropy_with_logits",
            OpKind::Scale(_) => "scale",
            OpKind::Sum => "sum",
        }
    }
}

#[derive(Debug)]
enum Source {
    Constant,
    Param { offset: usize },
    Op { kind: OpKind, inputs: Vec<Var> },
}

#[derive(Debug)]
enum Saved {
    None,
    /// Normalised activations and per-row inverse standard deviation.
    LayerNorm { xhat: Vec<f64>, inv_std: Vec<f64> },
    /// Row-wise softmax probabilities.
    Probs(Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    source: Source,
    saved: Saved,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Define-by-run record of one forward pass.
///
/// Nodes are appended in evaluation order, so the list is topologically
/// sorted and a single reverse sweep visits each node once.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn shapes_of(values: &[&Tensor]) -> String {
    values
        .iter()
        .map(|t| format!("{:?}", t.shape()))
        .collect::<Vec<_>>()
        .join(" , ")
}

fn dim_err<T>(kind: &OpKind, inputs: &[&Tensor]) -> Result<T> {
    Err(Error::Shape {
        op: kind.name(),
        shapes: shapes_of(inputs),
    })
}

/// `c (+)= a * b` for row-major matrices with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert!(c.len() >= m * n);
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slices hold at least the extents implied by the
    // dimensions and strides passed, which every caller derives from the
    // operand shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated on a node by the last backward pass.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    fn push(&mut self, value: Tensor, source: Source, saved: Saved, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            source,
            saved,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant (no gradient flows into it).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Source::Constant, Saved::None, false)
    }

    /// Records the named parameter segment as a differentiable leaf.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let seg = store
            .segment(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter segment {name}")))?;
        let values = store.data()[seg.offset..seg.offset + seg.length].to_vec();
        let t = Tensor::from_parts(seg.shape.clone(), values);
        Ok(self.push(t, Source::Param { offset: seg.offset }, Saved::None, true))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Add, &[a, b])
    }
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(OpKind::Mul, &[a, b])
    }
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Relu, &[a])
    }
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Softmax, &[a])
    }
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Transpose, &[a])
    }
    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.apply(OpKind::Scale(s), &[a])
    }
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.apply(OpKind::Sum, &[a])
    }
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.apply(OpKind::Slice { start, end }, &[a])
    }
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        self.apply(OpKind::Concat, parts)
    }
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.apply(OpKind::EmbeddingLookup { ids: ids.to_vec() }, &[table])
    }
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        self.apply(OpKind::LayerNorm { eps: 1e-5 }, &[x, gain, bias])
    }
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], ignore: Option<usize>) -> Result<Var> {
        self.apply(
            OpKind::CrossEntropyWithLogits {
                targets: targets.to_vec(),
                ignore,
            },
            &[logits],
        )
    }

    /// Evaluates `kind` on `inputs` and records the node.
    pub fn apply(&mut self, kind: OpKind, inputs: &[Var]) -> Result<Var> {
        if self.consumed {
            return Err(Error::State("tape already consumed by backward".into()));
        }
        let vals: Vec<&Tensor> = inputs.iter().map(|v| &self.nodes[v.0].value).collect();
        let arity_ok = match &kind {
            OpKind::MatMul | OpKind::Add | OpKind::Mul => vals.len() == 2,
            OpKind::LayerNorm { .. } => vals.len() == 3,
            OpKind::Concat => !vals.is_empty(),
            _ => vals.len() == 1,
        };
        if !arity_ok {
            return contract(format!("{} got {} operands", kind.name(), vals.len()));
        }
        if vals.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric { op: kind.name() });
        }
        let (value, saved) = forward(&kind, &vals)?;
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(
            value,
            Source::Op {
                kind,
                inputs: inputs.to_vec(),
            },
            saved,
            requires_grad,
        ))
    }

    /// Reverse sweep from a scalar `loss`, accumulating parameter gradients
    /// into `store.grad`. The tape cannot be reused afterwards.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.consumed {
            return Err(Error::State("tape already consumed by backward".into()));
        }
        if self.nodes[loss.0].value.len() != 1 {
            return contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            ));
        }
        self.consumed = true;
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(gout) = self.nodes[i].grad.take() else {
                continue;
            };
            match &self.nodes[i].source {
                Source::Constant => {}
                Source::Param { offset } => {
                    let offset = *offset;
                    let dst = &mut store.grad_mut()[offset..offset + gout.len()];
                    for (d, g) in dst.iter_mut().zip(&gout) {
                        *d += g;
                    }
                }
                Source::Op { .. } => self.backprop_node(i, &gout)?,
            }
            self.nodes[i].grad = Some(gout);
        }
        Ok(())
    }

    fn take_grad(&mut self, v: Var) -> Option<Vec<f64>> {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(
            node.grad
                .take()
                .unwrap_or_else(|| vec![0.0; node.value.len()]),
        )
    }

    fn put_grad(&mut self, v: Var, g: Vec<f64>) {
        self.nodes[v.0].grad = Some(g);
    }

    /// Adds `f(grad_buffer)` into the gradient of `v`, if it needs one.
    fn accumulate(&mut self, v: Var, f: impl FnOnce(&Self, &mut [f64])) {
        if let Some(mut g) = self.take_grad(v) {
            f(self, &mut g);
            self.put_grad(v, g);
        }
    }

    fn backprop_node(&mut self, i: usize, gout: &[f64]) -> Result<()> {
        let (kind, inputs) = match &self.nodes[i].source {
            Source::Op { kind, inputs } => (kind.clone(), inputs.clone()),
            _ => unreachable!(),
        };
        match kind {
            OpKind::MatMul => {
                let (a, b) = (inputs[0], inputs[1]);
                let (m, k) = (self.value(a).rows(), self.value(a).cols());
                let n = self.value(b).cols();
                // dA = dC * B^T
                self.accumulate(a, |t, ga| {
                    let bv = t.value(b).values();
                    gemm(m, n, k, gout, (n as isize, 1), bv, (1, n as isize), ga, true);
                });
                // dB = A^T * dC
                self.accumulate(b, |t, gb| {
                    let av = t.value(a).values();
                    gemm(k, m, n, av, (1, k as isize), gout, (n as isize, 1), gb, true);
                });
            }
            OpKind::Add => {
                let (a, b) = (inputs[0], inputs[1]);
                self.accumulate(a, |_, ga| {
                    ga.iter_mut().zip(gout).for_each(|(g, d)| *g += d);
                });
                let broadcast = self.value(a).len() != self.value(b).len();
                self.accumulate(b, |_, gb| {
                    if broadcast {
                        let cols = gb.len();
                        for row in gout.chunks_exact(cols) {
                            gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
                        }
                    } else {
                        gb.iter_mut().zip(gout).for_each(|(g, d)| *g += d);
                    }
                });
            }
            OpKind::Mul => {
                let (a, b) = (inputs[0], inputs[1]);
                self.accumulate(a, |t, ga| {
                    let bv = t.value(b).values();
                    for ((g, d), y) in ga.iter_mut().zip(gout).zip(bv) {
                        *g += d * y;
                    }
                });
                self.accumulate(b, |t, gb| {
                    let av = t.value(a).values();
                    for ((g, d), x) in gb.iter_mut().zip(gout).zip(av) {
                        *g += d * x;
                    }
                });
            }
            OpKind::EmbeddingLookup { ids } => {
                let table = inputs[0];
                let d = self.value(table).cols();
                self.accumulate(table, |_, gt| {
                    for (row, &id) in gout.chunks_exact(d).zip(&ids) {
                        gt[id * d..(id + 1) * d]
                            .iter_mut()
                            .zip(row)
                            .for_each(|(g, r)| *g += r);
                    }
                });
            }
            OpKind::LayerNorm { .. } => {
                let (x, gain, bias) = (inputs[0], inputs[1], inputs[2]);
                let Saved::LayerNorm { xhat, inv_std } = &self.nodes[i].saved else {
                    unreachable!()
                };
                let (xhat, inv_std) = (xhat.clone(), inv_std.clone());
                let cols = self.value(x).cols();
                self.accumulate(gain, |_, gg| {
                    for (drow, xrow) in gout.chunks_exact(cols).zip(xhat.chunks_exact(cols)) {
                        for c in 0..cols {
                            gg[c] += drow[c] * xrow[c];
                        }
                    }
                });
                self.accumulate(bias, |_, gb| {
                    for drow in gout.chunks_exact(cols) {
                        gb.iter_mut().zip(drow).for_each(|(g, d)| *g += d);
                    }
                });
                self.accumulate(x, |t, gx| {
                    let gv = t.value(gain).values();
                    let nc = cols as f64;
                    let mut dxhat = vec![0.0; cols];
                    for (r, ((drow, xrow), gxrow)) in gout
                        .chunks_exact(cols)
                        .zip(xhat.chunks_exact(cols))
                        .zip(gx.chunks_exact_mut(cols))
                        .enumerate()
                    {
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for c in 0..cols {
                            dxhat[c] = drow[c] * gv[c];
                            mean_d += dxhat[c];
                            mean_dx += dxhat[c] * xrow[c];
                        }
                        mean_d /= nc;
                        mean_dx /= nc;
                        for c in 0..cols {
                            gxrow[c] += inv_std[r] * (dxhat[c] - mean_d - xrow[c] * mean_dx);
                        }
                    }
                });
            }
            OpKind::Softmax => {
                let a = inputs[0];
                let cols = self.nodes[i].value.cols();
                let y = self.nodes[i].value.values().to_vec();
                self.accumulate(a, |_, ga| {
                    for ((grow, drow), yrow) in ga
                        .chunks_exact_mut(cols)
                        .zip(gout.chunks_exact(cols))
                        .zip(y.chunks_exact(cols))
                    {
                        let dot: f64 = drow.iter().zip(yrow).map(|(d, y)| d * y).sum();
                        for c in 0..cols {
                            grow[c] += yrow[c] * (drow[c] - dot);
                        }
                    }
                });
            }
            OpKind::Relu => {
                let a = inputs[0];
                self.accumulate(a, |t, ga| {
                    for ((g, d), x) in ga.iter_mut().zip(gout).zip(t.value(a).values()) {
                        if *x > 0.0 {
                            *g += d;
                        }
                    }
                });
            }
            OpKind::Concat => {
                let total = self.nodes[i].value.cols();
                let mut start = 0;
                for &p in &inputs {
                    let w = self.value(p).cols();
                    self.accumulate(p, |_, gp| {
                        for (grow, drow) in gp.chunks_exact_mut(w).zip(gout.chunks_exact(total)) {
                            grow.iter_mut()
                                .zip(&drow[start..start + w])
                                .for_each(|(g, d)| *g += d);
                        }
                    });
                    start += w;
                }
            }
            OpKind::Slice { start, end } => {
                let a = inputs[0];
                let cols = self.value(a).cols();
                let w = end - start;
                self.accumulate(a, |_, ga| {
                    for (grow, drow) in ga.chunks_exact_mut(cols).zip(gout.chunks_exact(w)) {
                        grow[start..end]
                            .iter_mut()
                            .zip(drow)
                            .for_each(|(g, d)| *g += d);
                    }
                });
            }
            OpKind::Transpose => {
                let a = inputs[0];
                let (r, c) = (self.value(a).rows(), self.value(a).cols());
                self.accumulate(a, |_, ga| {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += gout[j * r + i];
                        }
                    }
                });
            }
            OpKind::CrossEntropyWithLogits { targets, ignore } => {
                let a = inputs[0];
                let Saved::Probs(p) = &self.nodes[i].saved else {
                    unreachable!()
                };
                let p = p.clone();
                let cols = self.value(a).cols();
                let g = gout[0];
                self.accumulate(a, |_, ga| {
                    for (r, &t) in targets.iter().enumerate() {
                        if Some(t) == ignore {
                            continue;
                        }
                        let row = &mut ga[r * cols..(r + 1) * cols];
                        for c in 0..cols {
                            row[c] += g * p[r * cols + c];
                        }
                        row[t] -= g;
                    }
                });
            }
            OpKind::Scale(s) => {
                let a = inputs[0];
                self.accumulate(a, |_, ga| {
                    ga.iter_mut().zip(gout).for_each(|(g, d)| *g += s * d);
                });
            }
            OpKind::Sum => {
                let a = inputs[0];
                let d = gout[0];
                self.accumulate(a, |_, ga| ga.iter_mut().for_each(|g| *g += d));
            }
        }
        Ok(())
    }
}

fn forward(kind: &OpKind, vals: &[&Tensor]) -> Result<(Tensor, Saved)> {
    let out = match kind {
        OpKind::MatMul => {
            let (a, b) = (vals[0], vals[1]);
            if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.rows() {
                return dim_err(kind, vals);
            }
            let (m, k, n) = (a.rows(), a.cols(), b.cols());
            let mut c = vec![0.0; m * n];
            gemm(
                m,
                k,
                n,
                a.values(),
                (k as isize, 1),
                b.values(),
                (n as isize, 1),
                &mut c,
                false,
            );
            Tensor::from_parts(vec![m, n], c)
        }
        OpKind::Add => {
            let (a, b) = (vals[0], vals[1]);
            if a.shape() == b.shape() {
                let v = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
                Tensor::from_parts(a.shape().to_vec(), v)
            } else if b.shape().len() == 1 && b.len() == a.cols() {
                let cols = a.cols();
                let mut v = a.values().to_vec();
                for row in v.chunks_exact_mut(cols) {
                    row.iter_mut().zip(b.values()).for_each(|(x, y)| *x += y);
                }
                Tensor::from_parts(a.shape().to_vec(), v)
            } else {
                return dim_err(kind, vals);
            }
        }
        OpKind::Mul => {
            let (a, b) = (vals[0], vals[1]);
            if a.shape() != b.shape() {
                return dim_err(kind, vals);
            }
            let v = a.values().iter().zip(b.values()).map(|(x, y)| x * y).collect();
            Tensor::from_parts(a.shape().to_vec(), v)
        }
        OpKind::EmbeddingLookup { ids } => {
            let table = vals[0];
            if table.shape().len() != 2 || ids.is_empty() || ids.iter().any(|&i| i >= table.rows()) {
                return Err(Error::Shape {
                    op: kind.name(),
                    shapes: format!("table {:?} with ids {ids:?}", table.shape()),
                });
            }
            let d = table.cols();
            let mut v = Vec::with_capacity(ids.len() * d);
            for &id in ids {
                v.extend_from_slice(&table.values()[id * d..(id + 1) * d]);
            }
            Tensor::from_parts(vec![ids.len(), d], v)
        }
        OpKind::LayerNorm { eps } => {
            let (x, g, b) = (vals[0], vals[1], vals[2]);
            let cols = x.cols();
            if g.shape() != [cols] || b.shape() != [cols] {
                return dim_err(kind, vals);
            }
            let rows = x.rows();
            let mut xhat = vec![0.0; x.len()];
            let mut inv_std = vec![0.0; rows];
            let mut out = vec![0.0; x.len()];
            for r in 0..rows {
                let row = &x.values()[r * cols..(r + 1) * cols];
                let mean = row.iter().sum::<f64>() / cols as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
                let is = 1.0 / (var + eps).sqrt();
                inv_std[r] = is;
                for c in 0..cols {
                    let h = (row[c] - mean) * is;
                    xhat[r * cols + c] = h;
                    out[r * cols + c] = h * g.values()[c] + b.values()[c];
                }
            }
            return Ok((
                Tensor::from_parts(x.shape().to_vec(), out),
                Saved::LayerNorm { xhat, inv_std },
            ));
        }
        OpKind::Softmax => {
            let a = vals[0];
            let cols = a.cols();
            let mut v = a.values().to_vec();
            for row in v.chunks_exact_mut(cols) {
                softmax_in_place(row);
            }
            Tensor::from_parts(a.shape().to_vec(), v)
        }
        OpKind::Relu => {
            let a = vals[0];
            let v = a.values().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
            Tensor::from_parts(a.shape().to_vec(), v)
        }
        OpKind::Concat => {
            let rows = vals[0].rows();
            if vals.iter().any(|t| t.rows() != rows || t.shape().len() != 2) {
                return dim_err(kind, vals);
            }
            let total: usize = vals.iter().map(|t| t.cols()).sum();
            let mut v = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for t in vals {
                    let c = t.cols();
                    v.extend_from_slice(&t.values()[r * c..(r + 1) * c]);
                }
            }
            Tensor::from_parts(vec![rows, total], v)
        }
        OpKind::Slice { start, end } => {
            let a = vals[0];
            if start >= end || *end > a.cols() {
                return Err(Error::Shape {
                    op: kind.name(),
                    shapes: format!("{:?} columns {start}..{end}", a.shape()),
                });
            }
            let cols = a.cols();
            let mut v = Vec::with_capacity(a.rows() * (end - start));
            for row in a.values().chunks_exact(cols) {
                v.extend_from_slice(&row[*start..*end]);
            }
            let mut shape = a.shape().to_vec();
            *shape.last_mut().unwrap() = end - start;
            Tensor::from_parts(shape, v)
        }
        OpKind::Transpose => {
            let a = vals[0];
            if a.shape().len() != 2 {
                return dim_err(kind, vals);
            }
            let (r, c) = (a.rows(), a.cols());
            let mut v = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    v[j * r + i] = a.values()[i * c + j];
                }
            }
            Tensor::from_parts(vec![c, r], v)
        }
        OpKind::CrossEntropyWithLogits { targets, ignore } => {
            let a = vals[0];
            let cols = a.cols();
            if targets.len() != a.rows() || targets.iter().any(|&t| t >= cols) {
                return Err(Error::Shape {
                    op: kind.name(),
                    shapes: format!("logits {:?} with targets {targets:?}", a.shape()),
                });
            }
            let mut probs = a.values().to_vec();
            let mut loss = 0.0;
            for (row, &t) in probs.chunks_exact_mut(cols).zip(targets) {
                let lse = log_sum_exp(row);
                if Some(t) != *ignore {
                    loss += lse - row[t];
                }
                row.iter_mut().for_each(|x| *x = (*x - lse).exp());
            }
            return Ok((Tensor::scalar(loss), Saved::Probs(probs)));
        }
        OpKind::Scale(s) => {
            let a = vals[0];
            let v = a.values().iter().map(|x| x * s).collect();
            Tensor::from_parts(a.shape().to_vec(), v)
        }
        OpKind::Sum => Tensor::scalar(vals[0].values().iter().sum()),
    };
    Ok((out, Saved::None))
}

/// Max-shifted `ln Σ exp(x)`.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    row.iter_mut().for_each(|x| *x /= z);
}
