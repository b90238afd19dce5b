use asgd_arena::problem::{smoothness_l, HeteroProblem, Oracle, QuadraticProblem};
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `A x` for `A = ¼·tridiag(−1, 2, −1)`, written out directly.
fn apply_a(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < d { x[i + 1] } else { 0.0 };
            0.25 * (2.0 * x[i] - left - right)
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn power_iteration(d: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut lambda = 0.0;
    for _ in 0..60_000 {
        let w = apply_a(&v);
        let nv = norm(&w);
        lambda = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
        v = w.into_iter().map(|x| x / nv).collect();
    }
    lambda
}

#[test]
fn gradient_examples() {
    let p = QuadraticProblem::new(5, 0.0).unwrap();
    assert_eq!(p.full_gradient(&[0.0; 5]).unwrap(), vec![0.25, 0.0, 0.0, 0.0, 0.0]);
    let g = p.full_gradient(&p.xstar).unwrap();
    assert!(norm(&g) < 1e-10);
    let p1 = QuadraticProblem::new(1, 0.0).unwrap();
    assert_abs_diff_eq!(p1.full_gradient(&[2.0]).unwrap()[0], 1.25, epsilon = 1e-15);
    assert!(p.full_gradient(&[0.0; 4]).is_err());
}

#[test]
fn gradient_matches_direct_formula() {
    let p = QuadraticProblem::new(100, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..100).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let mut expected = apply_a(&x);
    expected[0] += 0.25;
    for (a, b) in p.full_gradient(&x).unwrap().iter().zip(&expected) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn smoothness_examples() {
    assert_abs_diff_eq!(smoothness_l(1), 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(smoothness_l(2), 0.75, epsilon = 1e-15);
    assert_abs_diff_eq!(smoothness_l(100), power_iteration(100), epsilon = 1e-8);
}

#[test]
fn grad_norm_examples() {
    let p = QuadraticProblem::new(3, 0.0).unwrap();
    assert_abs_diff_eq!(p.grad_norm_sq(&[0.0; 3]), 1.0 / 16.0, epsilon = 1e-15);
    let p2 = QuadraticProblem::new(2, 0.0).unwrap();
    assert_abs_diff_eq!(p2.grad_norm_sq(&[1.0, 0.0]), 0.625, epsilon = 1e-15);
}

#[test]
fn stochastic_gradient_is_unbiased_with_bounded_variance() {
    let d = 10;
    let sigma = 0.5;
    let p = QuadraticProblem::new(d, sigma).unwrap();
    let x: Vec<f64> = (0..d).map(|i| i as f64 * 0.1).collect();
    let g = p.full_gradient(&x).unwrap();
    let draws = 100_000u64;
    let mut mean = vec![0.0; d];
    let mut sq = 0.0;
    for c in 0..draws {
        let s = p.stochastic_gradient(&x, 3, c, 17).unwrap();
        for j in 0..d {
            mean[j] += s[j] / draws as f64;
            sq += (s[j] - g[j]).powi(2) / draws as f64;
        }
    }
    for j in 0..d {
        assert!((mean[j] - g[j]).abs() < 3.0 * sigma / (draws as f64).sqrt(), "coord {j}");
    }
    assert!(sq <= 1.05 * sigma * sigma * d as f64, "{sq}");
    assert_eq!(p.variance_bound(), sigma * sigma * d as f64);
}

#[test]
fn gradient_is_lipschitz() {
    let d = 50;
    let p = QuadraticProblem::new(d, 0.0).unwrap();
    let l = p.smoothness_l();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let gx = p.full_gradient(&x).unwrap();
        let gy = p.full_gradient(&y).unwrap();
        let dg: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
        let dx: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(norm(&dg) <= l * norm(&dx) * (1.0 + 1e-12));
    }
}

#[test]
fn suboptimality_vanishes_at_minimizer() {
    let p = QuadraticProblem::new(30, 0.0).unwrap();
    assert!(p.suboptimality(&p.xstar).abs() < 1e-12);
    assert!(p.suboptimality(&[0.0; 30]) > 0.0);
    assert_abs_diff_eq!(p.delta(), p.suboptimality(&[0.0; 30]), epsilon = 1e-15);
}

#[test]
fn hetero_single_worker_is_homogeneous() {
    let h = HeteroProblem::new(8, 0.0, 1).unwrap();
    let x: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
    assert_eq!(h.local_full_gradient(0, &x).unwrap(), h.base.full_gradient(&x).unwrap());
}

#[test]
fn hetero_local_gradients_average_to_global() {
    for (d, n) in [(8, 3), (8, 20), (100, 20), (4, 9)] {
        let h = HeteroProblem::new(d, 0.0, n).unwrap();
        let x: Vec<f64> = (0..d).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut avg = vec![0.0; d];
        for i in 0..n {
            for (a, g) in avg.iter_mut().zip(h.local_full_gradient(i, &x).unwrap()) {
                *a += g / n as f64;
            }
        }
        for (a, g) in avg.iter().zip(h.global_gradient(&x).unwrap()) {
            assert_abs_diff_eq!(*a, g, epsilon = 1e-12);
        }
        let xstar = h.base.xstar.clone();
        for i in 0..n {
            assert!(norm(&h.local_full_gradient(i, &xstar).unwrap()) > 1e-3, "worker {i} at x*");
            assert!(norm(&h.local_full_gradient(i, &h.local_minimizer(i)).unwrap()) < 1e-10);
        }
    }
}

#[test]
fn hetero_noise_uses_worker_streams() {
    let h = HeteroProblem::new(6, 0.1, 2).unwrap();
    let x = vec![0.0; 6];
    let a = h.hetero_local_gradient(0, &x, 5, 9).unwrap();
    assert_eq!(a, h.hetero_local_gradient(0, &x, 5, 9).unwrap());
    let mut out = vec![0.0; 6];
    h.local_gradient(0, &x, 5, 9, &mut out);
    assert_eq!(a, out);
    assert!(h.hetero_local_gradient(2, &x, 0, 0).is_err());
}
