use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    Scalar,
    Row { cols: usize },
    Col { cols: usize },
}

impl Bcast {
    #[inline]
    fn map(self, i: usize) -> usize {
        match self {
            Bcast::Same => i,
            Bcast::Scalar => 0,
            Bcast::Row { cols } => i % cols,
            Bcast::Col { cols } => i / cols,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinKind {
    Add,
    Sub,
    Mul,
    Div,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum UnKind {
    Scale(f64),
    AddConst(f64),
    Square,
    Sqrt,
    Log,
    Exp,
    Tanh,
    Clamp(f64, f64),
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Binary { kind: BinKind, lhs: Var, rhs: Var, bcast: Bcast },
    Unary { kind: UnKind, x: Var },
    Prelu { x: Var, slope: Var },
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Transpose { x: Var, rows: usize, cols: usize },
    Concat { parts: Vec<(Var, usize)>, rows: usize },
    SliceCols { x: Var, start: usize, in_cols: usize },
    SliceRows { x: Var, start: usize },
    Reshape { x: Var },
    SumAll { x: Var },
    SumLast { x: Var, cols: usize },
    /// Output element `i` was copied from input element `src[i]`
    /// (`usize::MAX` marks an empty set, value 0).
    Gather { x: Var, src: Vec<usize> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Reverse-mode record of primitive operations.
///
/// Nodes are appended in evaluation order, so every node's parents precede it.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    macs: u64,
}

/// Accumulated adjoints indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient as a tensor; zeros if `v` did not influence the root.
    pub fn tensor(&self, v: Var) -> Tensor {
        let shape = &self.shapes[v.0];
        match self.get(v) {
            Some(g) => Tensor::new(shape.clone(), g.to_vec()).expect("gradient shape"),
            None => Tensor::zeros(shape),
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

    /// Multiply-add count of everything recorded so far.
    pub fn mac_count(&self) -> u64 {
        self.macs
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad();
        self.push(t, Op::Leaf, rg)
    }

    pub fn param(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_grad(true))
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.leaf(t.with_grad(false))
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn finish(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, rg: bool, what: &str) -> Result<Var> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{what} produced a non-finite value")));
        }
        let t = Tensor::new(shape, data)?;
        Ok(self.push(t, op, rg))
    }

    // ---- elementwise binary ----

    fn bcast(&self, lhs: Var, rhs: Var) -> Result<Bcast> {
        let l = &self.nodes[lhs.0].value;
        let r = &self.nodes[rhs.0].value;
        if l.shape() == r.shape() {
            return Ok(Bcast::Same);
        }
        if r.len() == 1 {
            return Ok(Bcast::Scalar);
        }
        if let (Ok((lr, lc)), Ok((rr, rc))) = (l.dims2(), r.dims2()) {
            if rr == 1 && rc == lc {
                return Ok(Bcast::Row { cols: lc });
            }
            if rc == 1 && rr == lr {
                return Ok(Bcast::Col { cols: lc });
            }
        }
        Err(Error::Dimension(format!(
            "cannot broadcast {:?} onto {:?}",
            r.shape(),
            l.shape()
        )))
    }

    fn binary(&mut self, kind: BinKind, lhs: Var, rhs: Var) -> Result<Var> {
        let bcast = self.bcast(lhs, rhs)?;
        let l = self.nodes[lhs.0].value.data();
        let r = self.nodes[rhs.0].value.data();
        let f: fn(f64, f64) -> f64 = match kind {
            BinKind::Add => |a, b| a + b,
            BinKind::Sub => |a, b| a - b,
            BinKind::Mul => |a, b| a * b,
            BinKind::Div => |a, b| a / b,
            BinKind::Min => |a, b| if a <= b { a } else { b },
        };
        let data: Vec<f64> = match bcast {
            Bcast::Same => l.iter().zip(r).map(|(&a, &b)| f(a, b)).collect(),
            _ => l.iter().enumerate().map(|(i, &a)| f(a, r[bcast.map(i)])).collect(),
        };
        self.macs += data.len() as u64;
        let shape = self.nodes[lhs.0].value.shape().to_vec();
        let rg = self.rg(lhs) || self.rg(rhs);
        self.finish(shape, data, Op::Binary { kind, lhs, rhs, bcast }, rg, "binary op")
    }

    /// `lhs + rhs`; `rhs` may be a scalar, a row vector or a column vector.
    pub fn add(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        self.binary(BinKind::Add, lhs, rhs)
    }

    pub fn sub(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        self.binary(BinKind::Sub, lhs, rhs)
    }

    pub fn mul(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        self.binary(BinKind::Mul, lhs, rhs)
    }

    pub fn div(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        self.binary(BinKind::Div, lhs, rhs)
    }

    /// Elementwise minimum; ties take `lhs`.
    pub fn minimum(&mut self, lhs: Var, rhs: Var) -> Result<Var> {
        self.binary(BinKind::Min, lhs, rhs)
    }

    // ---- elementwise unary ----

    fn unary(&mut self, kind: UnKind, x: Var) -> Result<Var> {
        let v = self.nodes[x.0].value.data();
        let name = match kind {
            UnKind::Sqrt if v.iter().any(|&a| a <= 0.0) => {
                return Err(Error::Domain("sqrt of a non-positive value".into()))
            }
            UnKind::Log if v.iter().any(|&a| a <= 0.0) => {
                return Err(Error::Domain("log of a non-positive value".into()))
            }
            UnKind::Scale(_) => "scale",
            UnKind::AddConst(_) => "add-const",
            UnKind::Square => "square",
            UnKind::Sqrt => "sqrt",
            UnKind::Log => "log",
            UnKind::Exp => "exp",
            UnKind::Tanh => "tanh",
            UnKind::Clamp(..) => "clamp",
        };
        let data: Vec<f64> = match kind {
            UnKind::Scale(c) => v.iter().map(|a| a * c).collect(),
            UnKind::AddConst(c) => v.iter().map(|a| a + c).collect(),
            UnKind::Square => v.iter().map(|a| a * a).collect(),
            UnKind::Sqrt => v.iter().map(|a| a.sqrt()).collect(),
            UnKind::Log => v.iter().map(|a| a.ln()).collect(),
            UnKind::Exp => v.iter().map(|a| a.exp()).collect(),
            UnKind::Tanh => v.iter().map(|a| a.tanh()).collect(),
            UnKind::Clamp(lo, hi) => v.iter().map(|a| a.max(lo).min(hi)).collect(),
        };
        self.macs += data.len() as u64;
        let shape = self.nodes[x.0].value.shape().to_vec();
        let rg = self.rg(x);
        self.finish(shape, data, Op::Unary { kind, x }, rg, name)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary(UnKind::Scale(c), x)
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary(UnKind::AddConst(c), x)
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.scale(x, -1.0)
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary(UnKind::Square, x)
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.unary(UnKind::Sqrt, x)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(UnKind::Log, x)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary(UnKind::Exp, x)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(UnKind::Tanh, x)
    }

    /// `max(x, lo)`; the derivative is 0 wherever `x <= lo`.
    pub fn clamp_min(&mut self, x: Var, lo: f64) -> Result<Var> {
        self.unary(UnKind::Clamp(lo, f64::INFINITY), x)
    }

    /// Derivative 1 strictly inside `(lo, hi)`, 0 elsewhere.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary(UnKind::Clamp(lo, hi), x)
    }

    /// Parametric ReLU with a single learnable slope.
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        let s = &self.nodes[slope.0].value;
        if s.len() != 1 {
            return Err(Error::Dimension(format!("prelu slope must be scalar, got {:?}", s.shape())));
        }
        let s = s.item();
        let xv = &self.nodes[x.0].value;
        let data: Vec<f64> = xv.data().iter().map(|&a| if a >= 0.0 { a } else { s * a }).collect();
        self.macs += data.len() as u64;
        let shape = xv.shape().to_vec();
        let rg = self.rg(x) || self.rg(slope);
        self.finish(shape, data, Op::Prelu { x, slope }, rg, "prelu")
    }

    // ---- structural ----

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.nodes[a.0].value.dims2()?;
        let (k2, n) = self.nodes[b.0].value.dims2()?;
        if k != k2 {
            return Err(Error::Dimension(format!("matmul [{m},{k}] x [{k2},{n}]")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            (self.nodes[a.0].value.data(), k as isize, 1),
            (self.nodes[b.0].value.data(), n as isize, 1),
            &mut out,
        );
        self.macs += (m * k * n) as u64;
        let rg = self.rg(a) || self.rg(b);
        self.finish(vec![m, n], out, Op::MatMul { a, b, m, k, n }, rg, "matmul")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.nodes[x.0].value.dims2()?;
        let v = self.nodes[x.0].value.data();
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = v[r * cols + c];
            }
        }
        let rg = self.rg(x);
        self.finish(vec![cols, rows], out, Op::Transpose { x, rows, cols }, rg, "transpose")
    }

    /// Concatenation along the last axis. Rank-1 inputs give a rank-1 output.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Dimension("concat of nothing".into()));
        }
        let all_rank1 = xs.iter().all(|v| self.nodes[v.0].value.shape().len() == 1);
        let (rows, _) = self.nodes[xs[0].0].value.dims2()?;
        let mut parts = Vec::with_capacity(xs.len());
        for &v in xs {
            let (r, c) = self.nodes[v.0].value.dims2()?;
            if r != rows {
                return Err(Error::Dimension(format!("concat row mismatch {r} vs {rows}")));
            }
            parts.push((v, c));
        }
        let total: usize = parts.iter().map(|p| p.1).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &(v, c) in &parts {
                out.extend_from_slice(&self.nodes[v.0].value.data()[r * c..(r + 1) * c]);
            }
        }
        let rg = xs.iter().any(|&v| self.rg(v));
        let shape = if all_rank1 { vec![total] } else { vec![rows, total] };
        self.finish(shape, out, Op::Concat { parts, rows }, rg, "concat")
    }

    /// Columns `start..start + len` (last axis).
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = &self.nodes[x.0].value;
        let rank1 = t.shape().len() == 1;
        let (rows, cols) = t.dims2()?;
        if len == 0 || start + len > cols {
            return Err(Error::Dimension(format!("column slice {start}+{len} of {cols}")));
        }
        let v = t.data();
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&v[r * cols + start..r * cols + start + len]);
        }
        let rg = self.rg(x);
        let shape = if rank1 { vec![len] } else { vec![rows, len] };
        self.finish(shape, out, Op::SliceCols { x, start, in_cols: cols }, rg, "slice")
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = &self.nodes[x.0].value;
        let (rows, cols) = t.dims2()?;
        if t.shape().len() != 2 || len == 0 || start + len > rows {
            return Err(Error::Dimension(format!("row slice {start}+{len} of {:?}", t.shape())));
        }
        let out = t.data()[start * cols..(start + len) * cols].to_vec();
        let rg = self.rg(x);
        self.finish(vec![len, cols], out, Op::SliceRows { x, start }, rg, "slice")
    }

    /// Same values under a new shape with the same element count.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = &self.nodes[x.0].value;
        let data = t.data().to_vec();
        let rg = self.rg(x);
        let out = Tensor::new(shape.to_vec(), data)?;
        Ok(self.push(out, Op::Reshape { x }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: f64 = self.nodes[x.0].value.data().iter().sum();
        self.macs += self.nodes[x.0].value.len() as u64;
        let rg = self.rg(x);
        self.finish(vec![1], vec![s], Op::SumAll { x }, rg, "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.nodes[x.0].value.len() as f64;
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n)
    }

    /// Sum over the last axis: `[r, c] -> [r, 1]`.
    pub fn sum_last(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = self.nodes[x.0].value.dims2()?;
        let v = self.nodes[x.0].value.data();
        let out: Vec<f64> = v.chunks(cols).map(|row| row.iter().sum()).collect();
        self.macs += (rows * cols) as u64;
        let rg = self.rg(x);
        self.finish(vec![rows, 1], out, Op::SumLast { x, cols }, rg, "sum_last")
    }

    /// Elementwise max over each set of `set_size` consecutive rows:
    /// `[g * set_size, c] -> [g, c]`. Ties go to the lowest row in the set.
    pub fn max_over_set(&mut self, x: Var, set_size: usize) -> Result<Var> {
        let (rows, cols) = self.nodes[x.0].value.dims2()?;
        if set_size == 0 || rows % set_size != 0 {
            return Err(Error::Dimension(format!("{rows} rows not divisible into sets of {set_size}")));
        }
        let v = self.nodes[x.0].value.data();
        let groups = rows / set_size;
        let mut out = Vec::with_capacity(groups * cols);
        let mut src = Vec::with_capacity(groups * cols);
        for g in 0..groups {
            for c in 0..cols {
                let mut best = g * set_size;
                for r in g * set_size + 1..(g + 1) * set_size {
                    if v[r * cols + c] > v[best * cols + c] {
                        best = r;
                    }
                }
                out.push(v[best * cols + c]);
                src.push(best * cols + c);
            }
        }
        self.macs += (rows * cols) as u64;
        let rg = self.rg(x);
        self.finish(vec![groups, cols], out, Op::Gather { x, src }, rg, "max_over_set")
    }

    /// For every row, the elementwise max over the *other* rows of its set of
    /// `set_size` consecutive rows. A set of size 1 yields zeros.
    /// Ties go to the lowest row index.
    pub fn max_over_others(&mut self, x: Var, set_size: usize) -> Result<Var> {
        let (rows, cols) = self.nodes[x.0].value.dims2()?;
        if set_size == 0 || rows % set_size != 0 {
            return Err(Error::Dimension(format!("{rows} rows not divisible into sets of {set_size}")));
        }
        let v = self.nodes[x.0].value.data();
        let mut out = vec![0.0; rows * cols];
        let mut src = vec![usize::MAX; rows * cols];
        if set_size > 1 {
            for g in 0..rows / set_size {
                let base = g * set_size;
                for c in 0..cols {
                    // top two rows, lowest index first on ties
                    let (mut b1, mut b2) = (usize::MAX, usize::MAX);
                    for r in base..base + set_size {
                        let val = v[r * cols + c];
                        if b1 == usize::MAX || val > v[b1 * cols + c] {
                            b2 = b1;
                            b1 = r;
                        } else if b2 == usize::MAX || val > v[b2 * cols + c] {
                            b2 = r;
                        }
                    }
                    for r in base..base + set_size {
                        let pick = if r == b1 { b2 } else { b1 };
                        out[r * cols + c] = v[pick * cols + c];
                        src[r * cols + c] = pick * cols + c;
                    }
                }
            }
        }
        self.macs += (rows * cols * set_size) as u64;
        let rg = self.rg(x);
        self.finish(vec![rows, cols], out, Op::Gather { x, src }, rg, "max_over_others")
    }

    // ---- reverse pass ----

    /// Reverse sweep from a one-element root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = &self.nodes[root.0].value;
        if rv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                rv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        match op {
            Op::Leaf => {}
            Op::Binary { kind, lhs, rhs, bcast } => {
                let (l, r) = (val(*lhs), val(*rhs));
                if let Some(gl) = self.slot(grads, *lhs) {
                    for i in 0..g.len() {
                        let b = r[bcast.map(i)];
                        gl[i] += match kind {
                            BinKind::Add | BinKind::Sub => g[i],
                            BinKind::Mul => g[i] * b,
                            BinKind::Div => g[i] / b,
                            BinKind::Min => if l[i] <= b { g[i] } else { 0.0 },
                        };
                    }
                }
                if let Some(gr) = self.slot(grads, *rhs) {
                    for i in 0..g.len() {
                        let j = bcast.map(i);
                        let b = r[j];
                        gr[j] += match kind {
                            BinKind::Add => g[i],
                            BinKind::Sub => -g[i],
                            BinKind::Mul => g[i] * l[i],
                            BinKind::Div => -g[i] * l[i] / (b * b),
                            BinKind::Min => if l[i] <= b { 0.0 } else { g[i] },
                        };
                    }
                }
            }
            Op::Unary { kind, x } => {
                let xv = val(*x);
                let y = out.data();
                if let Some(gx) = self.slot(grads, *x) {
                    for i in 0..g.len() {
                        gx[i] += g[i]
                            * match *kind {
                                UnKind::Scale(c) => c,
                                UnKind::AddConst(_) => 1.0,
                                UnKind::Square => 2.0 * xv[i],
                                UnKind::Sqrt => 0.5 / y[i],
                                UnKind::Log => 1.0 / xv[i],
                                UnKind::Exp => y[i],
                                UnKind::Tanh => 1.0 - y[i] * y[i],
                                UnKind::Clamp(lo, hi) => {
                                    if xv[i] > lo && xv[i] < hi { 1.0 } else { 0.0 }
                                }
                            };
                    }
                }
            }
            Op::Prelu { x, slope } => {
                let xv = val(*x);
                let s = val(*slope)[0];
                if let Some(gx) = self.slot(grads, *x) {
                    for i in 0..g.len() {
                        gx[i] += if xv[i] >= 0.0 { g[i] } else { s * g[i] };
                    }
                }
                if let Some(gs) = self.slot(grads, *slope) {
                    gs[0] += xv.iter().zip(g).filter(|(a, _)| **a < 0.0).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let av = val(*a);
                let bv = val(*b);
                if let Some(ga) = self.slot(grads, *a) {
                    // dA = dC * B^T
                    gemm(m, n, k, (g, n as isize, 1), (bv, 1, n as isize), ga);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    // dB = A^T * dC
                    gemm(k, m, n, (av, 1, k as isize), (g, n as isize, 1), gb);
                }
            }
            Op::Transpose { x, rows, cols } => {
                if let Some(gx) = self.slot(grads, *x) {
                    for r in 0..*rows {
                        for c in 0..*cols {
                            gx[r * cols + c] += g[c * rows + r];
                        }
                    }
                }
            }
            Op::Concat { parts, rows } => {
                let total: usize = parts.iter().map(|p| p.1).sum();
                let mut offset = 0;
                for &(v, c) in parts {
                    if let Some(gv) = self.slot(grads, v) {
                        for r in 0..*rows {
                            for j in 0..c {
                                gv[r * c + j] += g[r * total + offset + j];
                            }
                        }
                    }
                    offset += c;
                }
            }
            Op::SliceCols { x, start, in_cols } => {
                let len = out.dims2().expect("slice output").1;
                if let Some(gx) = self.slot(grads, *x) {
                    for (r, row) in g.chunks(len).enumerate() {
                        for (j, gv) in row.iter().enumerate() {
                            gx[r * in_cols + start + j] += gv;
                        }
                    }
                }
            }
            Op::SliceRows { x, start } => {
                let cols = out.dims2().expect("slice output").1;
                if let Some(gx) = self.slot(grads, *x) {
                    for (i, gv) in g.iter().enumerate() {
                        gx[start * cols + i] += gv;
                    }
                }
            }
            Op::Reshape { x } => {
                if let Some(gx) = self.slot(grads, *x) {
                    gx.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
            Op::SumAll { x } => {
                if let Some(gx) = self.slot(grads, *x) {
                    gx.iter_mut().for_each(|v| *v += g[0]);
                }
            }
            Op::SumLast { x, cols } => {
                if let Some(gx) = self.slot(grads, *x) {
                    for (i, v) in gx.iter_mut().enumerate() {
                        *v += g[i / cols];
                    }
                }
            }
            Op::Gather { x, src } => {
                if let Some(gx) = self.slot(grads, *x) {
                    for (i, &s) in src.iter().enumerate() {
                        if s != usize::MAX {
                            gx[s] += g[i];
                        }
                    }
                }
            }
        }
    }
}

/// `c += a * b` for an `[m, k]` by `[k, n]` product with arbitrary strides on
/// the inputs; `c` is dense row-major.
fn gemm(m: usize, k: usize, n: usize, a: (&[f64], isize, isize), b: (&[f64], isize, isize), c: &mut [f64]) {
    debug_assert_eq!(c.len(), m * n);
    debug_assert!(a.0.len() >= m * k && b.0.len() >= k * n);
    // SAFETY: the slices cover the index ranges implied by the dimensions and
    // strides above, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
