//! Secrecy-rate math: legitimate and wiretap rates, the clamped secrecy rate,
//! power normalization, and the real-valued recast used for training.
//!
//! Rates are in bits/s/Hz (log base 2).

use crate::autodiff::{Tape, Tensor, Var};
use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::Scalar;
use num_complex::Complex;

/// Per-user transmit vectors `w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer<T = f64> {
    pub vectors: Vec<Vec<Complex<T>>>,
}

impl<T: Scalar> Beamformer<T> {
    pub fn zeros(users: usize, antennas: usize) -> Self {
        Self { vectors: vec![vec![Complex::new(T::zero(), T::zero()); antennas]; users] }
    }

    pub fn total_power(&self) -> T {
        self.vectors.iter().flatten().fold(T::zero(), |s, c| s + c.norm_sqr())
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { vectors: perm.iter().map(|&i| self.vectors[i].clone()).collect() }
    }

    /// Beamformer from `[K, 2N]` real rows laid out as `[Re w_k | Im w_k]`.
    pub fn from_real_rows(rows: &[f64], users: usize, antennas: usize) -> Self {
        assert_eq!(rows.len(), users * 2 * antennas);
        let vectors = rows
            .chunks(2 * antennas)
            .map(|r| (0..antennas).map(|n| Complex::new(T::lit(r[n]), T::lit(r[antennas + n]))).collect())
            .collect();
        Self { vectors }
    }
}

/// Rates for every user of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport<T = f64> {
    pub user_rates: Vec<T>,
    pub eve_rates: Vec<T>,
    pub secrecy: Vec<T>,
    pub sum: T,
}

/// `h^H w`.
pub fn inner<T: Scalar>(h: &[Complex<T>], w: &[Complex<T>]) -> Complex<T> {
    h.iter().zip(w).fold(Complex::new(T::zero(), T::zero()), |s, (a, b)| s + a.conj() * b)
}

/// `log2(1 + |h^H w_k|^2 / (sum_{l != k} |h^H w_l|^2 + noise))`.
fn link_rate<T: Scalar>(h: &[Complex<T>], k: usize, w: &Beamformer<T>, noise: T) -> T {
    let mut signal = T::zero();
    let mut interference = T::zero();
    for (l, wl) in w.vectors.iter().enumerate() {
        let p = inner(h, wl).norm_sqr();
        if l == k {
            signal = p;
        } else {
            interference = interference + p;
        }
    }
    (T::one() + signal / (interference + noise)).log2()
}

/// Achievable rate of user `k`.
pub fn user_rate<T: Scalar>(k: usize, ch: &ChannelSet<T>, w: &Beamformer<T>, noise: T) -> T {
    link_rate(&ch.users[k], k, w, noise)
}

/// Wiretap rate at the eavesdropper paired with user `k`.
pub fn eve_rate<T: Scalar>(k: usize, ch: &ChannelSet<T>, w: &Beamformer<T>, noise: T) -> T {
    link_rate(&ch.eves[k], k, w, noise)
}

pub fn secrecy_report<T: Scalar>(ch: &ChannelSet<T>, w: &Beamformer<T>, noise: T) -> RateReport<T> {
    let k = ch.num_users();
    let user_rates: Vec<T> = (0..k).map(|i| user_rate(i, ch, w, noise)).collect();
    let eve_rates: Vec<T> = (0..k).map(|i| eve_rate(i, ch, w, noise)).collect();
    let secrecy: Vec<T> = user_rates.iter().zip(&eve_rates).map(|(&r, &e)| (r - e).max(T::zero())).collect();
    let sum = secrecy.iter().fold(T::zero(), |s, &v| s + v);
    RateReport { user_rates, eve_rates, secrecy, sum }
}

/// Real 2-vector `[[Re h^H, -Im h^H], [Im h^H, Re h^H]] [Re w; Im w]`,
/// whose squared norm equals `|h^H w|^2`.
pub fn gamma_recast<T: Scalar>(h: &[Complex<T>], w: &[Complex<T>]) -> Result<[T; 2]> {
    if h.len() != w.len() {
        return Err(Error::Dimension(format!("channel length {} vs beamformer length {}", h.len(), w.len())));
    }
    // Re(h^H) = Re(h)^T and Im(h^H) = -Im(h)^T
    let mut g = [T::zero(), T::zero()];
    for (a, b) in h.iter().zip(w) {
        g[0] = g[0] + a.re * b.re + a.im * b.im;
        g[1] = g[1] - a.im * b.re + a.re * b.im;
    }
    Ok(g)
}

/// `w_k = sqrt(P) e_k / sqrt(sum_l ||e_l||^2)`, so the budget binds exactly.
pub fn normalize_power<T: Scalar>(embeddings: &[Vec<Complex<T>>], power_budget: T) -> Result<Beamformer<T>> {
    let total = embeddings.iter().flatten().fold(T::zero(), |s, c| s + c.norm_sqr());
    if !(total > T::zero()) {
        return Err(Error::Degenerate("all embeddings are zero; power normalization is undefined".into()));
    }
    let scale = power_budget.sqrt() / total.sqrt();
    Ok(Beamformer { vectors: embeddings.iter().map(|e| e.iter().map(|c| c * scale).collect()).collect() })
}

/// Channel constants for the real-domain rate evaluation of one scenario.
///
/// `user_re_im` is `[2N, K]` with column `k = [Re h_k; Im h_k]` and
/// `user_rot` has column `k = [-Im h_k; Re h_k]`; likewise for eavesdroppers.
/// For a real beamformer row `w_l = [Re w_l | Im w_l]`,
/// `(w_l . user_re_im[:, k], w_l . user_rot[:, k])` is the recast pair of
/// `h_k^H w_l`.
pub struct RealChannels {
    pub users: usize,
    pub antennas: usize,
    user_re_im: Tensor,
    user_rot: Tensor,
    eve_re_im: Tensor,
    eve_rot: Tensor,
}

impl RealChannels {
    pub fn new(ch: &ChannelSet<f64>) -> Self {
        let k = ch.num_users();
        let n = ch.antennas();
        let build = |hs: &[Vec<Complex<f64>>], rotated: bool| {
            let mut t = vec![0.0; 2 * n * k];
            for (col, h) in hs.iter().enumerate() {
                for (i, c) in h.iter().enumerate() {
                    let (top, bottom) = if rotated { (-c.im, c.re) } else { (c.re, c.im) };
                    t[i * k + col] = top;
                    t[(n + i) * k + col] = bottom;
                }
            }
            Tensor::matrix(2 * n, k, t).expect("channel constant shape")
        };
        Self {
            users: k,
            antennas: n,
            user_re_im: build(&ch.users, false),
            user_rot: build(&ch.users, true),
            eve_re_im: build(&ch.eves, false),
            eve_rot: build(&ch.eves, true),
        }
    }
}

/// Power-normalize `[K, 2N]` real embedding rows on the tape.
pub fn normalize_power_real(tape: &mut Tape, embeddings: Var, power_budget: f64) -> Result<Var> {
    let sq = tape.square(embeddings)?;
    let total = tape.sum(sq)?;
    if tape.value(total).item() <= 0.0 {
        return Err(Error::Degenerate("all embeddings are zero; power normalization is undefined".into()));
    }
    let norm = tape.sqrt(total)?;
    let unit = tape.div(embeddings, norm)?;
    tape.scale(unit, power_budget.sqrt())
}

/// Rates `log2(1 + SINR)` of every link in a channel block, given a real
/// beamformer `[K, 2N]`. Returns a `[K, 1]` column.
fn real_rates(tape: &mut Tape, w: Var, re_im: &Tensor, rot: &Tensor, noise: f64) -> Result<Var> {
    let k = re_im.shape()[1];
    let a = tape.constant(re_im.clone());
    let b = tape.constant(rot.clone());
    let g1 = tape.matmul(w, a)?; // [l, k]
    let g2 = tape.matmul(w, b)?;
    let g1 = tape.square(g1)?;
    let g2 = tape.square(g2)?;
    let q = tape.add(g1, g2)?; // q[l, k] = ||gamma_kl||^2
    let q = tape.transpose(q)?; // [k, l]
    let eye = tape.constant(Tensor::identity(k));
    let diag = tape.mul(q, eye)?;
    let signal = tape.sum_last(diag)?;
    let total = tape.sum_last(q)?;
    let interference = tape.sub(total, signal)?;
    let denom = tape.add_const(interference, noise)?;
    let sinr = tape.div(signal, denom)?;
    let one_plus = tape.add_const(sinr, 1.0)?;
    let ln = tape.log(one_plus)?;
    tape.scale(ln, std::f64::consts::LOG2_E)
}

/// Per-user secrecy rates `[K, 1]` for a real beamformer `[K, 2N]`, clamped at 0.
pub fn secrecy_rates_real(tape: &mut Tape, w: Var, ch: &RealChannels, noise: f64) -> Result<Var> {
    let (rows, cols) = tape.value(w).dims2()?;
    if rows != ch.users || cols != 2 * ch.antennas {
        return Err(Error::Dimension(format!(
            "beamformer [{rows}, {cols}] vs {} users x {} antennas",
            ch.users, ch.antennas
        )));
    }
    let r_user = real_rates(tape, w, &ch.user_re_im, &ch.user_rot, noise)?;
    let r_eve = real_rates(tape, w, &ch.eve_re_im, &ch.eve_rot, noise)?;
    let gap = tape.sub(r_user, r_eve)?;
    tape.clamp_min(gap, 0.0)
}

/// Differentiable `-sum_k R_k^sec` for one scenario from `[K, 2N]` real
/// embeddings (normalized here before the rates are evaluated).
pub fn secrecy_loss_real(tape: &mut Tape, embeddings: Var, ch: &RealChannels, noise: f64, power_budget: f64) -> Result<Var> {
    let w = normalize_power_real(tape, embeddings, power_budget)?;
    let sec = secrecy_rates_real(tape, w, ch, noise)?;
    let total = tape.sum(sec)?;
    tape.neg(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn cx(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn single(h: f64, he: f64) -> ChannelSet {
        ChannelSet { users: vec![vec![cx(h, 0.)]], eves: vec![vec![cx(he, 0.)]], uav: Point::default() }
    }

    fn random_channels(rng: &mut impl Rng, k: usize, n: usize) -> ChannelSet {
        let mut v = || (0..n).map(|_| cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        ChannelSet { users: (0..k).map(|_| v()).collect(), eves: (0..k).map(|_| v()).collect(), uav: Point::default() }
    }

    fn random_vectors(rng: &mut impl Rng, k: usize, n: usize) -> Vec<Vec<Complex<f64>>> {
        (0..k).map(|_| (0..n).map(|_| cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).collect()
    }

    #[test]
    fn rate_examples() {
        let w = Beamformer { vectors: vec![vec![cx(1., 0.)]] };
        let ch = single(1.0, 0.5);
        assert!((user_rate(0, &ch, &w, 1.0) - 1.0).abs() < 1e-15);
        assert!((eve_rate(0, &ch, &w, 1.0) - 1.25f64.log2()).abs() < 1e-15);
        assert!((eve_rate(0, &ch, &w, 1.0) - 0.321928).abs() < 1e-6);
        let rep = secrecy_report(&ch, &w, 1.0);
        assert!((rep.sum - 0.678072).abs() < 1e-6);

        let zero = Beamformer::zeros(1, 1);
        assert_eq!(user_rate(0, &ch, &zero, 1.0), 0.0);
        assert_eq!(eve_rate(0, &single(1.0, 0.0), &w, 1.0), 0.0);

        let two = ChannelSet { users: vec![vec![cx(1., 0.)]; 2], eves: vec![vec![cx(0., 0.)]; 2], uav: Point::default() };
        let s = 0.5f64.sqrt();
        let w2 = Beamformer { vectors: vec![vec![cx(s, 0.)]; 2] };
        assert!((user_rate(0, &two, &w2, 1.0) - 0.415037).abs() < 1e-6);
    }

    #[test]
    fn clamp_and_identical_eves() {
        let w = Beamformer { vectors: vec![vec![cx(1., 0.)]] };
        let rep = secrecy_report(&single(0.5, 1.0), &w, 1.0);
        assert_eq!(rep.secrecy[0], 0.0);
        let mut rng = seeded(2);
        let mut ch = random_channels(&mut rng, 4, 3);
        ch.eves = ch.users.clone();
        let w = Beamformer { vectors: random_vectors(&mut rng, 4, 3) };
        assert_eq!(secrecy_report(&ch, &w, 0.1).sum, 0.0);
        assert_eq!(user_rate(2, &ch, &w, 0.1), eve_rate(2, &ch, &w, 0.1));
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_recast(&[cx(0., 1.)], &[cx(1., 0.)]).unwrap();
        assert_eq!(g, [0.0, -1.0]);
        let g = gamma_recast(&[cx(2., 0.), cx(3., 0.)], &[cx(0.5, 0.), cx(-1., 0.)]).unwrap();
        assert_eq!(g, [-2.0, 0.0]);
        assert!(gamma_recast(&[cx(1., 0.)], &[]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let e = vec![vec![cx(2., 0.)]];
        let w = normalize_power(&e, 1.0).unwrap();
        assert_eq!(w.vectors[0][0], cx(1., 0.));
        assert!(matches!(normalize_power(&[vec![cx(0., 0.)]], 1.0), Err(Error::Degenerate(_))));
        let mut rng = seeded(3);
        let e = random_vectors(&mut rng, 5, 4);
        let w = normalize_power(&e, 1.0).unwrap();
        assert!((w.total_power() - 1.0).abs() < 1e-12);
        let scaled: Vec<Vec<_>> = e.iter().map(|v| v.iter().map(|c| c * 3.7).collect()).collect();
        let w2 = normalize_power(&scaled, 1.0).unwrap();
        for (a, b) in w.vectors.iter().flatten().zip(w2.vectors.iter().flatten()) {
            assert!((a - b).norm() < 1e-14);
        }
        let w4 = normalize_power(&e, 4.0).unwrap();
        assert!((w4.total_power() - 4.0).abs() < 1e-12);
    }

    fn real_rows(vs: &[Vec<Complex<f64>>]) -> Tensor {
        let n = vs[0].len();
        let mut d = Vec::new();
        for v in vs {
            d.extend(v.iter().map(|c| c.re));
            d.extend(v.iter().map(|c| c.im));
        }
        Tensor::matrix(vs.len(), 2 * n, d).unwrap()
    }

    #[test]
    fn single_user_real_loss() {
        let ch = single(1.0, 0.5);
        let mut t = Tape::new();
        let e = t.param(real_rows(&[vec![cx(1., 0.)]]));
        let l = secrecy_loss_real(&mut t, e, &RealChannels::new(&ch), 1.0, 1.0).unwrap();
        assert!((t.value(l).item() + 0.678072).abs() < 1e-6);
    }

    #[test]
    fn real_loss_matches_complex_report() {
        let mut rng = seeded(4);
        for _ in 0..100 {
            let k = rng.random_range(1..6);
            let n = rng.random_range(1..5);
            let ch = random_channels(&mut rng, k, n);
            let e = random_vectors(&mut rng, k, n);
            let noise = rng.random_range(0.01..1.0);
            let p = rng.random_range(0.5..2.0);
            let mut t = Tape::new();
            let ev = t.param(real_rows(&e));
            let l = secrecy_loss_real(&mut t, ev, &RealChannels::new(&ch), noise, p).unwrap();
            let w = normalize_power(&e, p).unwrap();
            let rep = secrecy_report(&ch, &w, noise);
            assert!((t.value(l).item() + rep.sum).abs() <= 1e-9);
        }
    }

    #[test]
    fn fully_clamped_loss_has_zero_gradient() {
        let mut rng = seeded(6);
        let mut ch = random_channels(&mut rng, 3, 2);
        ch.eves = ch.users.clone();
        let mut t = Tape::new();
        let e = t.param(real_rows(&random_vectors(&mut rng, 3, 2)));
        let l = secrecy_loss_real(&mut t, e, &RealChannels::new(&ch), 0.1, 1.0).unwrap();
        assert_eq!(t.value(l).item(), 0.0);
        let g = t.backward(l).unwrap();
        assert!(g.tensor(e).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_embeddings_are_degenerate() {
        let ch = single(1.0, 0.5);
        let mut t = Tape::new();
        let e = t.param(Tensor::zeros(&[1, 2]));
        assert!(matches!(
            secrecy_loss_real(&mut t, e, &RealChannels::new(&ch), 1.0, 1.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn real_loss_gradient_matches_finite_differences() {
        let mut rng = seeded(8);
        let ch = random_channels(&mut rng, 3, 2);
        let rc = RealChannels::new(&ch);
        let e0 = real_rows(&random_vectors(&mut rng, 3, 2));
        let eval = |e: &Tensor| {
            let mut t = Tape::new();
            let v = t.param(e.clone());
            let l = secrecy_loss_real(&mut t, v, &rc, 0.05, 1.0).unwrap();
            (t.value(l).item(), t.backward(l).unwrap().tensor(v))
        };
        let (_, g) = eval(&e0);
        let h = 1e-6;
        let mut num = Vec::new();
        for i in 0..e0.len() {
            let mut p = e0.clone();
            p.data_mut()[i] += h;
            let mut m = e0.clone();
            m.data_mut()[i] -= h;
            num.push((eval(&p).0 - eval(&m).0) / (2.0 * h));
        }
        let diff: f64 = num.iter().zip(g.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        assert!(diff / scale <= 1e-5, "relative error {}", diff / scale);
    }

    #[test]
    fn report_in_f32() {
        let ch = ChannelSet::<f32> { users: vec![vec![Complex::new(1.0, 0.0)]], eves: vec![vec![Complex::new(0.5, 0.0)]], uav: Point::default() };
        let w = Beamformer { vectors: vec![vec![Complex::new(1.0f32, 0.0)]] };
        assert!((secrecy_report(&ch, &w, 1.0).sum - 0.678072).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn gamma_norm_equals_inner_product_power(
            h in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8),
            w in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8),
        ) {
            let h: Vec<_> = h.into_iter().map(|(a, b)| cx(a, b)).collect();
            let w: Vec<_> = w.into_iter().map(|(a, b)| cx(a, b)).collect();
            let g = gamma_recast(&h, &w).unwrap();
            prop_assert!((g[0] * g[0] + g[1] * g[1] - inner(&h, &w).norm_sqr()).abs() <= 1e-10);
        }

        #[test]
        fn report_invariant_under_channel_phase(seed in 0u64..1000, phase in 0.0..6.28f64) {
            let mut rng = seeded(seed);
            let ch = random_channels(&mut rng, 3, 4);
            let w = Beamformer { vectors: random_vectors(&mut rng, 3, 4) };
            let rot = Complex::from_polar(1.0, phase);
            let mut ch2 = ch.clone();
            ch2.users[1].iter_mut().for_each(|c| *c *= rot);
            ch2.eves[2].iter_mut().for_each(|c| *c *= rot);
            let a = secrecy_report(&ch, &w, 0.1);
            let b = secrecy_report(&ch2, &w, 0.1);
            prop_assert!((a.sum - b.sum).abs() < 1e-12);
        }
    }
}
