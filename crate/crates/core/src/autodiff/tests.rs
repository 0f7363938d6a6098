use super::*;
use crate::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn m(rows: usize, cols: usize, data: &[f64]) -> Tensor {
    Tensor::matrix(rows, cols, data.to_vec()).unwrap()
}

#[test]
fn matmul_identity_is_noop() {
    let mut t = Tape::new();
    let a = t.constant(m(3, 3, &[1., 2., 3., 4., 5., 6., 7., 8., 9.]));
    let i = t.constant(Tensor::identity(3));
    let y = t.matmul(a, i).unwrap();
    assert_eq!(t.value(y).data(), t.value(a).data());
}

#[test]
fn max_over_set_elementwise() {
    let mut t = Tape::new();
    let x = t.constant(m(2, 2, &[1., 5., 3., 2.]));
    let y = t.max_over_set(x, 2).unwrap();
    assert_eq!(t.value(y).data(), &[3., 5.]);
}

#[test]
fn concat_vectors() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::vector(vec![1., 2.]));
    let b = t.constant(Tensor::vector(vec![3.]));
    let y = t.concat(&[a, b]).unwrap();
    assert_eq!(t.value(y).shape(), &[3]);
    assert_eq!(t.value(y).data(), &[1., 2., 3.]);
}

#[test]
fn prelu_values_and_slope_gradient() {
    let mut t = Tape::new();
    let s = t.param(Tensor::scalar(0.25));
    let pos = t.constant(Tensor::scalar(2.0));
    let neg = t.constant(Tensor::scalar(-2.0));
    let yp = t.prelu(pos, s).unwrap();
    let yn = t.prelu(neg, s).unwrap();
    assert_eq!(t.value(yp).item(), 2.0);
    assert_eq!(t.value(yn).item(), -0.5);
    let g = t.backward(yn).unwrap();
    assert_eq!(g.get(s).unwrap()[0], -2.0);
}

#[test]
fn square_gradient() {
    let mut t = Tape::new();
    let x = t.param(Tensor::scalar(3.0));
    let y = t.square(x).unwrap();
    assert_eq!(t.backward(y).unwrap().get(x).unwrap()[0], 6.0);
}

#[test]
fn fan_out_accumulates() {
    let mut t = Tape::new();
    let x = t.param(Tensor::scalar(1.0));
    let y = t.add(x, x).unwrap();
    assert_eq!(t.backward(y).unwrap().get(x).unwrap()[0], 2.0);
}

#[test]
fn non_scalar_root_rejected() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![1.0, 2.0]));
    assert!(matches!(t.backward(x), Err(Error::Contract(_))));
}

#[test]
fn domain_and_shape_errors() {
    let mut t = Tape::new();
    let z = t.constant(Tensor::scalar(0.0));
    let n = t.constant(Tensor::scalar(-1.0));
    assert!(matches!(t.log(z), Err(Error::Domain(_))));
    assert!(matches!(t.sqrt(n), Err(Error::Domain(_))));
    let a = t.constant(Tensor::zeros(&[2, 3]));
    let b = t.constant(Tensor::zeros(&[2, 3]));
    assert!(matches!(t.matmul(a, b), Err(Error::Dimension(_))));
    let c = t.constant(Tensor::zeros(&[3, 2]));
    assert!(matches!(t.add(a, c), Err(Error::Dimension(_))));
    assert!(Tensor::new(vec![2, 2], vec![1.0; 3]).is_err());
}

#[test]
fn max_ties_route_to_lowest_index() {
    let mut t = Tape::new();
    let x = t.param(m(3, 1, &[4., 4., 1.]));
    let y = t.max_over_set(x, 3).unwrap();
    let g = t.backward(y).unwrap();
    assert_eq!(g.get(x).unwrap(), &[1., 0., 0.]);

    let mut t = Tape::new();
    let x = t.param(m(3, 1, &[4., 4., 1.]));
    let y = t.max_over_others(x, 3).unwrap();
    // row 0 sees {4 (row1), 1}, rows 1 and 2 both see row 0 first
    assert_eq!(t.value(y).data(), &[4., 4., 4.]);
    let s = t.sum(y).unwrap();
    let g = t.backward(s).unwrap();
    assert_eq!(g.get(x).unwrap(), &[2., 1., 0.]);
}

#[test]
fn max_over_others_singleton_is_zero() {
    let mut t = Tape::new();
    let x = t.param(m(2, 2, &[1., -2., 3., 4.]));
    let y = t.max_over_others(x, 1).unwrap();
    assert_eq!(t.value(y).data(), &[0.; 4]);
}

#[test]
fn clamp_min_kink_has_zero_gradient() {
    let mut t = Tape::new();
    let x = t.param(Tensor::vector(vec![-1.0, 2.0]));
    let y = t.clamp_min(x, 0.0).unwrap();
    let s = t.sum(y).unwrap();
    assert_eq!(t.backward(s).unwrap().get(x).unwrap(), &[0.0, 1.0]);
}

#[test]
fn sgd_step_examples() {
    let mut p = vec![Tensor::scalar(1.0)];
    sgd_step(&mut p, &[Tensor::scalar(2.0)], 0.1).unwrap();
    assert!((p[0].item() - 0.8).abs() < 1e-15);
    sgd_step(&mut p, &[Tensor::scalar(0.0)], 0.1).unwrap();
    assert!((p[0].item() - 0.8).abs() < 1e-15);
    assert!(sgd_step(&mut p, &[Tensor::vector(vec![0.0, 0.0])], 0.1).is_err());
}

#[test]
fn tanh_matmul_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let w0 = Tensor::matrix(4, 3, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let x0 = Tensor::matrix(3, 1, (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let eval = |w: &Tensor| {
        let mut t = Tape::new();
        let wv = t.param(w.clone());
        let xv = t.constant(x0.clone());
        let y = t.matmul(wv, xv).unwrap();
        let y = t.tanh(y).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap().tensor(wv);
        (t.value(s).item(), g)
    };
    let (_, g) = eval(&w0);
    let h = 1e-5;
    for i in 0..w0.len() {
        let mut wp = w0.clone();
        wp.data_mut()[i] += h;
        let mut wm = w0.clone();
        wm.data_mut()[i] -= h;
        let fd = (eval(&wp).0 - eval(&wm).0) / (2.0 * h);
        let rel = (fd - g.data()[i]).abs() / fd.abs().max(g.data()[i].abs()).max(1e-12);
        assert!(rel < 1e-6, "entry {i}: fd {fd} vs {}", g.data()[i]);
    }
}

#[test]
fn evaluation_is_bit_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "m", &[6, 16, 2], &mut rng);
        let mut t = Tape::new();
        let p = store.bind(&mut t);
        let x = t.constant(Tensor::matrix(2, 6, (0..12).map(|i| i as f64 * 0.1 - 0.5).collect()).unwrap());
        let y = mlp.forward(&mut t, &p, x).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.backward(s).unwrap();
        (t.value(y).clone(), store.grads(&p, &g))
    };
    assert_eq!(run(), run());
}

#[test]
fn glorot_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = glorot_uniform(&mut rng, 10, 20);
    let a = (6.0f64 / 30.0).sqrt();
    assert!(w.data().iter().all(|v| v.abs() <= a));
}

#[test]
fn momentum_and_adam_descend_a_quadratic() {
    for kind in [OptimizerKind::Sgd, OptimizerKind::Momentum { beta: 0.9 }, OptimizerKind::adam()] {
        let mut opt = Optimizer::new(kind, 0.05);
        let mut p = vec![Tensor::vector(vec![3.0, -2.0])];
        for _ in 0..500 {
            let g = Tensor::vector(p[0].data().iter().map(|v| 2.0 * v).collect());
            opt.step(&mut p, &[g]).unwrap();
        }
        assert!(p[0].data().iter().all(|v| v.abs() < 1e-2), "{kind:?}: {:?}", p[0].data());
    }
}
