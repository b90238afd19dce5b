//! Objective oracles: the tridiagonal convex quadratic with Gaussian gradient
//! noise, and a heterogeneous family built from it.

use rand_distr::{Distribution as _, StandardNormal};

use crate::error::{ArenaError, Result};
use crate::rng::{self, tag};

/// Gradient oracle consumed by the simulation engine.
pub trait Oracle: Sync {
    fn dim(&self) -> usize;
    /// Stochastic gradient of the objective held by `worker`, written to `out`.
    fn local_gradient(&self, worker: usize, x: &[f64], counter: u64, seed: u64, out: &mut [f64]);
    fn grad_norm_sq(&self, x: &[f64]) -> f64;
    fn suboptimality(&self, x: &[f64]) -> f64;
}

/// Solve `tridiag(sub, diag, sup) x = rhs` with constant bands (Thomas algorithm).
pub fn thomas_solve(sub: f64, diag: f64, sup: f64, rhs: &[f64]) -> Vec<f64> {
    let d = rhs.len();
    let mut c = vec![0.0; d];
    let mut r = vec![0.0; d];
    let mut denom = diag;
    c[0] = sup / denom;
    r[0] = rhs[0] / denom;
    for i in 1..d {
        denom = diag - sub * c[i - 1];
        c[i] = sup / denom;
        r[i] = (rhs[i] - sub * r[i - 1]) / denom;
    }
    let mut x = vec![0.0; d];
    x[d - 1] = r[d - 1];
    for i in (0..d - 1).rev() {
        x[i] = r[i] - c[i] * x[i + 1];
    }
    x
}

/// Largest eigenvalue of `(1/4)·tridiag(−1, 2, −1)` in dimension `d`.
pub fn smoothness_l(d: usize) -> f64 {
    0.5 * (1.0 + (std::f64::consts::PI / (d as f64 + 1.0)).cos())
}

/// `f(x) = ½ xᵀAx − bᵀx` with `A = ¼·tridiag(−1,2,−1)` and `b = ¼·(−1, 0, …, 0)`.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    pub d: usize,
    pub sigma: f64,
    pub xstar: Vec<f64>,
    pub fstar: f64,
}

impl QuadraticProblem {
    pub fn new(d: usize, sigma: f64) -> Result<Self> {
        if d == 0 {
            return Err(ArenaError::invalid("dimension must be positive"));
        }
        if !(sigma >= 0.0) {
            return Err(ArenaError::invalid("sigma must be nonnegative"));
        }
        let mut rhs = vec![0.0; d];
        rhs[0] = -1.0; // 4b
        let xstar = thomas_solve(-1.0, 2.0, -1.0, &rhs);
        let mut p = QuadraticProblem { d, sigma, xstar, fstar: 0.0 };
        p.fstar = p.value(&p.xstar.clone());
        Ok(p)
    }

    pub fn b(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.d];
        b[0] = -0.25;
        b
    }

    pub fn smoothness_l(&self) -> f64 {
        smoothness_l(self.d)
    }

    /// Effective variance bound `σ²·d` of the Gaussian noise.
    pub fn variance_bound(&self) -> f64 {
        self.sigma * self.sigma * self.d as f64
    }

    /// `A x` via the three-band stencil.
    pub fn apply_a(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        if d == 1 {
            out[0] = 0.5 * x[0];
            return;
        }
        out[0] = 0.25 * (2.0 * x[0] - x[1]);
        for (o, w) in out[1..d - 1].iter_mut().zip(x.windows(3)) {
            *o = 0.25 * (2.0 * w[1] - w[0] - w[2]);
        }
        out[d - 1] = 0.25 * (2.0 * x[d - 1] - x[d - 2]);
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(ArenaError::invalid(format!(
                "dimension mismatch: expected {}, got {}",
                self.d,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.apply_a(x, out);
        out[0] += 0.25;
    }

    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut g = vec![0.0; self.d];
        self.gradient_into(x, &mut g);
        Ok(g)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.d];
        self.apply_a(x, &mut ax);
        let quad: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        0.5 * quad + 0.25 * x[0]
    }

    pub fn add_noise(&self, worker: usize, counter: u64, seed: u64, out: &mut [f64]) {
        if self.sigma == 0.0 {
            return;
        }
        let mut rng = rng::stream(seed, tag::NOISE, worker as u64, counter);
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += self.sigma * z;
        }
    }

    pub fn stochastic_gradient(&self, x: &[f64], worker: usize, counter: u64, seed: u64) -> Result<Vec<f64>> {
        let mut g = self.full_gradient(x)?;
        self.add_noise(worker, counter, seed, &mut g);
        Ok(g)
    }

    pub fn grad_norm_sq(&self, x: &[f64]) -> f64 {
        let d = self.d;
        if d == 1 {
            let g = 0.5 * x[0] + 0.25;
            return g * g;
        }
        let first = 0.25 * (2.0 * x[0] - x[1]) + 0.25;
        let last = 0.25 * (2.0 * x[d - 1] - x[d - 2]);
        let inner: f64 = x
            .windows(3)
            .map(|w| {
                let g = 0.25 * (2.0 * w[1] - w[0] - w[2]);
                g * g
            })
            .sum();
        first * first + inner + last * last
    }

    pub fn suboptimality(&self, x: &[f64]) -> f64 {
        self.value(x) - self.fstar
    }

    /// `Δ = f(0) − f*`.
    pub fn delta(&self) -> f64 {
        -self.fstar
    }
}

impl Oracle for QuadraticProblem {
    fn dim(&self) -> usize {
        self.d
    }
    fn local_gradient(&self, worker: usize, x: &[f64], counter: u64, seed: u64, out: &mut [f64]) {
        self.gradient_into(x, out);
        self.add_noise(worker, counter, seed, out);
    }
    fn grad_norm_sq(&self, x: &[f64]) -> f64 {
        QuadraticProblem::grad_norm_sq(self, x)
    }
    fn suboptimality(&self, x: &[f64]) -> f64 {
        QuadraticProblem::suboptimality(self, x)
    }
}

/// `n` local quadratics `fᵢ(x) = ½xᵀAx − bᵢᵀx` whose average is the
/// homogeneous problem.
///
/// `bᵢ = b + oᵢ − ō` with `oᵢ = ¼(1 + ⌊i/d⌋)·e_{i mod d}`; subtracting the mean
/// offset `ō` keeps the global objective identical to [`QuadraticProblem`].
#[derive(Clone, Debug)]
pub struct HeteroProblem {
    pub base: QuadraticProblem,
    pub n: usize,
    shifts: Vec<Vec<f64>>,
}

impl HeteroProblem {
    pub fn new(d: usize, sigma: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(ArenaError::invalid("n must be positive"));
        }
        let base = QuadraticProblem::new(d, sigma)?;
        let mut shifts = vec![vec![0.0; d]; n];
        for (i, s) in shifts.iter_mut().enumerate() {
            s[i % d] = 0.25 * (1.0 + (i / d) as f64);
        }
        let mut mean = vec![0.0; d];
        for s in &shifts {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / n as f64;
            }
        }
        for s in shifts.iter_mut() {
            for (v, m) in s.iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        Ok(HeteroProblem { base, n, shifts })
    }

    /// `bᵢ − b`.
    pub fn shift(&self, i: usize) -> &[f64] {
        &self.shifts[i]
    }

    pub fn local_full_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        if i >= self.n {
            return Err(ArenaError::invalid(format!("worker {i} out of range")));
        }
        let mut g = self.base.full_gradient(x)?;
        for (v, s) in g.iter_mut().zip(&self.shifts[i]) {
            *v -= s;
        }
        Ok(g)
    }

    pub fn hetero_local_gradient(&self, i: usize, x: &[f64], counter: u64, seed: u64) -> Result<Vec<f64>> {
        let mut g = self.local_full_gradient(i, x)?;
        self.base.add_noise(i, counter, seed, &mut g);
        Ok(g)
    }

    pub fn global_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.base.full_gradient(x)
    }

    /// Minimizer of `fᵢ`.
    pub fn local_minimizer(&self, i: usize) -> Vec<f64> {
        let mut rhs = self.base.b();
        for (v, s) in rhs.iter_mut().zip(&self.shifts[i]) {
            *v = 4.0 * (*v + s);
        }
        thomas_solve(-1.0, 2.0, -1.0, &rhs)
    }

    /// Every local Hessian equals `A`, so each `L_{fᵢ}` is the global constant.
    pub fn local_smoothness(&self, _i: usize) -> f64 {
        self.base.smoothness_l()
    }
}

impl Oracle for HeteroProblem {
    fn dim(&self) -> usize {
        self.base.d
    }
    fn local_gradient(&self, worker: usize, x: &[f64], counter: u64, seed: u64, out: &mut [f64]) {
        self.base.gradient_into(x, out);
        for (v, s) in out.iter_mut().zip(&self.shifts[worker]) {
            *v -= s;
        }
        self.base.add_noise(worker, counter, seed, out);
    }
    fn grad_norm_sq(&self, x: &[f64]) -> f64 {
        self.base.grad_norm_sq(x)
    }
    fn suboptimality(&self, x: &[f64]) -> f64 {
        self.base.suboptimality(x)
    }
}

/// Oracle for allocation-only simulations where gradients are irrelevant.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullOracle;

impl Oracle for NullOracle {
    fn dim(&self) -> usize {
        0
    }
    fn local_gradient(&self, _: usize, _: &[f64], _: u64, _: u64, _: &mut [f64]) {}
    fn grad_norm_sq(&self, _: &[f64]) -> f64 {
        0.0
    }
    fn suboptimality(&self, _: &[f64]) -> f64 {
        0.0
    }
}
