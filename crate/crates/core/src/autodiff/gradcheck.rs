//! Gradient checking against central differences, plus a generator of random
//! composite graphs that exercises every primitive.

use super::{Tape, Tensor, Var};
use crate::error::Result;
use rand::Rng;

/// Norm-wise relative error `|g - fd| / max(|g|, |fd|)`, where `g` stacks the
/// reverse-mode gradients of the scalar `f` with respect to every input and
/// `fd` the central differences with step `h`. A function that is flat in
/// every input counts as exact.
pub fn gradient_check<F>(inputs: &[Tensor], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.constant(x.clone())).collect();
        let root = f(&mut tape, &vars)?;
        Ok(tape.value(root).item())
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.param(x.clone())).collect();
    let root = f(&mut tape, &vars)?;
    let grads = tape.backward(root)?;

    let (mut diff, mut gn, mut fdn) = (0.0, 0.0, 0.0);
    let mut xs = inputs.to_vec();
    for (i, &v) in vars.iter().enumerate() {
        let g = grads.tensor(v);
        for j in 0..xs[i].len() {
            let x0 = xs[i].data()[j];
            xs[i].data_mut()[j] = x0 + h;
            let up = eval(&xs)?;
            xs[i].data_mut()[j] = x0 - h;
            let down = eval(&xs)?;
            xs[i].data_mut()[j] = x0;
            let fd = (up - down) / (2.0 * h);
            diff += (fd - g.data()[j]).powi(2);
            gn += g.data()[j].powi(2);
            fdn += fd * fd;
        }
    }
    let scale = f64::max(gn, fdn).sqrt();
    Ok(if scale > 0.0 { diff.sqrt() / scale } else { 0.0 })
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Tanh(usize),
    SoftExp(usize),
    HalfSquare(usize),
    SoftLog(usize),
    SoftSqrt(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    SoftDiv(usize, usize),
    Min(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Concat(usize, usize),
    SliceCols(usize, usize, usize),
    SumLast(usize),
    Flatten(usize),
    MaxOverSet(usize, usize),
    MaxOverOthers(usize, usize),
    Prelu(usize),
}

/// A randomly generated composite function of four inputs:
/// `x: [4, 3]`, `w: [3, 5]`, `b: [1, 5]` and a scalar slope `s: [1, 1]`.
///
/// The plan is fixed at sampling time, so the same graph can be rebuilt at
/// perturbed inputs. Only smooth compositions are used away from the kinks of
/// `max`, `min` and `prelu`, which random inputs hit with probability zero.
#[derive(Debug, Clone)]
pub struct RandomGraph {
    steps: Vec<Step>,
    root_extra: usize,
}

const INPUT_SHAPES: [(usize, usize); 4] = [(4, 3), (3, 5), (1, 5), (1, 1)];
const MAX_COLS: usize = 12;

impl RandomGraph {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, depth: usize) -> Self {
        let mut shapes: Vec<(usize, usize)> = INPUT_SHAPES.to_vec();
        let mut steps = Vec::with_capacity(depth);
        while steps.len() < depth {
            let n = shapes.len();
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let (ri, ci) = shapes[i];
            let (rj, cj) = shapes[j];
            let bcast = (ri, ci) == (rj, cj) || (rj, cj) == (1, 1) || (rj == 1 && cj == ci) || (cj == 1 && rj == ri);
            let (step, shape) = match rng.random_range(0..19) {
                0 => (Step::Tanh(i), (ri, ci)),
                1 => (Step::SoftExp(i), (ri, ci)),
                2 => (Step::HalfSquare(i), (ri, ci)),
                3 => (Step::SoftLog(i), (ri, ci)),
                4 => (Step::SoftSqrt(i), (ri, ci)),
                5 if bcast => (Step::Add(i, j), (ri, ci)),
                6 if bcast => (Step::Sub(i, j), (ri, ci)),
                7 if bcast => (Step::Mul(i, j), (ri, ci)),
                8 if bcast => (Step::SoftDiv(i, j), (ri, ci)),
                9 if (ri, ci) == (rj, cj) && i != j => (Step::Min(i, j), (ri, ci)),
                10 if ci == rj => (Step::MatMul(i, j), (ri, cj)),
                11 => (Step::Transpose(i), (ci, ri)),
                12 if ri == rj && ci + cj <= MAX_COLS => (Step::Concat(i, j), (ri, ci + cj)),
                13 if ci > 1 => {
                    let len = rng.random_range(1..ci);
                    let start = rng.random_range(0..=ci - len);
                    (Step::SliceCols(i, start, len), (ri, len))
                }
                14 => (Step::SumLast(i), (ri, 1)),
                15 if ri * ci <= MAX_COLS => (Step::Flatten(i), (1, ri * ci)),
                16 if ri > 1 => {
                    let set = divisor(ri, rng);
                    (Step::MaxOverSet(i, set), (ri / set, ci))
                }
                17 if ri > 1 => (Step::MaxOverOthers(i, divisor(ri, rng)), (ri, ci)),
                18 => (Step::Prelu(i), (ri, ci)),
                _ => continue,
            };
            steps.push(step);
            shapes.push(shape);
        }
        let root_extra = rng.random_range(0..shapes.len());
        Self { steps, root_extra }
    }

    pub fn inputs<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Tensor> {
        INPUT_SHAPES
            .iter()
            .map(|&(r, c)| Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape"))
            .collect()
    }

    /// Scalar root: `mean(last^2) + sum(tanh(extra))`.
    pub fn build(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Var> {
        let mut pool = inputs.to_vec();
        let slope = inputs[3];
        for &step in &self.steps {
            let v = match step {
                Step::Tanh(i) => tape.tanh(pool[i])?,
                Step::SoftExp(i) => {
                    let t = tape.tanh(pool[i])?;
                    tape.exp(t)?
                }
                Step::HalfSquare(i) => {
                    let t = tape.square(pool[i])?;
                    tape.scale(t, 0.5)?
                }
                Step::SoftLog(i) => {
                    let t = soft_positive(tape, pool[i])?;
                    tape.log(t)?
                }
                Step::SoftSqrt(i) => {
                    let t = soft_positive(tape, pool[i])?;
                    tape.sqrt(t)?
                }
                Step::Add(i, j) => tape.add(pool[i], pool[j])?,
                Step::Sub(i, j) => tape.sub(pool[i], pool[j])?,
                Step::Mul(i, j) => tape.mul(pool[i], pool[j])?,
                Step::SoftDiv(i, j) => {
                    let d = soft_positive(tape, pool[j])?;
                    tape.div(pool[i], d)?
                }
                Step::Min(i, j) => tape.minimum(pool[i], pool[j])?,
                Step::MatMul(i, j) => tape.matmul(pool[i], pool[j])?,
                Step::Transpose(i) => tape.transpose(pool[i])?,
                Step::Concat(i, j) => tape.concat(&[pool[i], pool[j]])?,
                Step::SliceCols(i, s, l) => tape.slice_cols(pool[i], s, l)?,
                Step::SumLast(i) => tape.sum_last(pool[i])?,
                Step::Flatten(i) => {
                    let n = tape.value(pool[i]).len();
                    tape.reshape(pool[i], &[1, n])?
                }
                Step::MaxOverSet(i, s) => tape.max_over_set(pool[i], s)?,
                Step::MaxOverOthers(i, s) => tape.max_over_others(pool[i], s)?,
                Step::Prelu(i) => tape.prelu(pool[i], slope)?,
            };
            pool.push(v);
        }
        let last = *pool.last().expect("non-empty pool");
        let sq = tape.square(last)?;
        let a = tape.mean(sq)?;
        let t = tape.tanh(pool[self.root_extra])?;
        let b = tape.sum(t)?;
        tape.add(a, b)
    }
}

fn soft_positive(tape: &mut Tape, x: Var) -> Result<Var> {
    let s = tape.square(x)?;
    tape.add_const(s, 1.0)
}

fn divisor<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    let ds: Vec<usize> = (2..=n).filter(|d| n % d == 0).collect();
    ds[rng.random_range(0..ds.len())]
}
