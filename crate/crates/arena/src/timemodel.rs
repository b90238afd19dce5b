//! Worker compute-time laws.
//!
//! Three models are supported: fixed per-worker durations, piecewise-constant
//! compute-power functions, and per-worker stochastic distributions sampled
//! through counter-based streams.

use rand::Rng;
use rand_distr::{Distribution as _, Exp, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};
use statrs::function::erf::erfc;

use crate::error::{ArenaError, Result};
use crate::rng::{self, tag};

/// Relative slack used when flooring accumulated work, so that sums such as
/// `(1/3) * 3k` count as exactly `k` completed tasks.
const FLOOR_SLACK: f64 = 1e-9;

pub(crate) fn snap_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= FLOOR_SLACK * r.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

/// A positive task-duration law, parameters in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    Exponential { scale: f64 },
    ShiftedExponential { shift: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    HalfNormal { scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, scale: f64 },
    Deterministic { value: f64 },
    /// `offset + base`, used by the five-distribution preset.
    Shifted { offset: f64, base: Box<Distribution> },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Distribution::Exponential { scale } => *scale > 0.0,
            Distribution::ShiftedExponential { shift, scale } => *shift >= 0.0 && *scale > 0.0,
            Distribution::Uniform { lo, hi } => *lo >= 0.0 && hi > lo,
            Distribution::HalfNormal { scale } => *scale > 0.0,
            Distribution::LogNormal { mu, sigma } => mu.is_finite() && *sigma >= 0.0,
            Distribution::Gamma { shape, scale } => *shape > 0.0 && *scale > 0.0,
            Distribution::Deterministic { value } => *value > 0.0,
            Distribution::Shifted { offset, base } => {
                base.validate()?;
                *offset >= 0.0
            }
        };
        let finite = match self {
            Distribution::Shifted { offset, .. } => offset.is_finite(),
            _ => self.mean().is_finite(),
        };
        if ok && finite {
            Ok(())
        } else {
            Err(ArenaError::invalid(format!("invalid distribution parameters: {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Exponential { scale } => *scale,
            Distribution::ShiftedExponential { shift, scale } => shift + scale,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::HalfNormal { scale } => scale * (2.0 / std::f64::consts::PI).sqrt(),
            Distribution::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Distribution::Gamma { shape, scale } => shape * scale,
            Distribution::Deterministic { value } => *value,
            Distribution::Shifted { offset, base } => offset + base.mean(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Distribution::Exponential { scale } => scale * Exp::new(1.0).unwrap().sample(rng),
            Distribution::ShiftedExponential { shift, scale } => {
                shift + scale * Exp::new(1.0).unwrap().sample(rng)
            }
            Distribution::Uniform { lo, hi } => rng.random_range(*lo..*hi),
            Distribution::HalfNormal { scale } => {
                (scale * Normal::new(0.0, 1.0).unwrap().sample(rng)).abs()
            }
            Distribution::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma).unwrap().sample(rng),
            Distribution::Gamma { shape, scale } => Gamma::new(*shape, *scale).unwrap().sample(rng),
            Distribution::Deterministic { value } => *value,
            Distribution::Shifted { offset, base } => offset + base.sample(rng),
        }
    }

    /// Upper bound on the centered Orlicz norm `‖X − μ‖_ψ₁`.
    ///
    /// * exponential family: exact value, `β·c*` with `c* ≈ 1.5313` solving
    ///   `E exp(|E − 1|/c) = 2` for a unit exponential `E`;
    /// * uniform: exact value `h/u*` for half-width `h`, `(e^u − 1)/u = 2`;
    /// * half-normal and gamma: `min_C C·log₂(E e^{Y/C} + E e^{−Y/C})`, valid
    ///   because `E e^{|Y|/C'} ≤ S` and Jensen gives `E e^{|Y|/(C log₂ S)} ≤ 2`;
    /// * log-normal: not sub-exponential, so the bound refers to the law
    ///   truncated at its `1 − 1e-9` quantile `q`, where `|Y| ≤ h = max(q − μ, μ)`
    ///   gives `h / ln 2`;
    /// * deterministic: 0.
    pub fn orlicz_upper(&self) -> f64 {
        match self {
            Distribution::Deterministic { .. } => 0.0,
            Distribution::Exponential { scale } | Distribution::ShiftedExponential { scale, .. } => {
                scale * unit_exponential_orlicz()
            }
            Distribution::Uniform { lo, hi } => {
                let h = 0.5 * (hi - lo);
                let u = bisect(|u| (u.exp() - 1.0) / u - 2.0, 1e-6, 10.0);
                h / u
            }
            Distribution::HalfNormal { scale } => {
                let s = *scale;
                let mu = self.mean();
                // log E e^{tX} = ln 2 + s²t²/2 + ln Φ(st), Φ(z) = erfc(−z/√2)/2.
                let log_mgf = move |t: f64| {
                    std::f64::consts::LN_2
                        + 0.5 * s * s * t * t
                        + (0.5 * erfc(-s * t / std::f64::consts::SQRT_2)).ln()
                };
                jensen_bound(mu, s, |c| log_mgf(1.0 / c), |c| log_mgf(-1.0 / c))
            }
            Distribution::Gamma { shape, scale } => {
                let (k, th) = (*shape, *scale);
                let mu = self.mean();
                let log_mgf = move |t: f64| {
                    if th * t >= 1.0 {
                        f64::INFINITY
                    } else {
                        -k * (-th * t).ln_1p()
                    }
                };
                let spread = (k.sqrt() * th).max(th);
                jensen_bound_from(mu, spread, th, |c| log_mgf(1.0 / c), |c| log_mgf(-1.0 / c))
            }
            Distribution::LogNormal { mu, sigma } => {
                let m = self.mean();
                let z = StatNormal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - 1e-9);
                let q = (mu + sigma * z).exp();
                (q - m).max(m) / std::f64::consts::LN_2
            }
            Distribution::Shifted { base, .. } => base.orlicz_upper(),
        }
    }
}

fn unit_exponential_orlicz() -> f64 {
    let f = |c: f64| {
        let a = 1.0 + 1.0 / c;
        (1.0 / c).exp() * (1.0 - (-a).exp()) / a + (-1.0f64).exp() / (1.0 - 1.0 / c) - 2.0
    };
    // f is decreasing on (1, ∞); return the upper end of the bracket.
    bisect_upper(f, 1.0 + 1e-9, 10.0)
}

/// Root of an increasing-or-decreasing `f` on `[lo, hi]` by bisection.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn bisect_upper<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn jensen_bound<P, M>(mu: f64, spread: f64, plus: P, minus: M) -> f64
where
    P: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
{
    jensen_bound_from(mu, spread, 0.0, plus, minus)
}

/// `min_C C·log₂(E e^{Y/C} + E e^{−Y/C})` over a log-spaced grid of `C > floor`,
/// where `plus(C) = log E e^{X/C}` and `minus(C) = log E e^{−X/C}`.
fn jensen_bound_from<P, M>(mu: f64, spread: f64, floor: f64, plus: P, minus: M) -> f64
where
    P: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
{
    let mut best = f64::INFINITY;
    let lo = (spread * 0.05).max(floor * (1.0 + 1e-9));
    let hi = spread * 200.0 + floor * 10.0;
    let steps = 4000;
    for s in 0..=steps {
        let c = lo * (hi / lo).powf(s as f64 / steps as f64);
        if c <= floor {
            continue;
        }
        let a = plus(c) - mu / c;
        let b = minus(c) + mu / c;
        if !a.is_finite() || !b.is_finite() {
            continue;
        }
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        let val = c * lse / std::f64::consts::LN_2;
        if val < best {
            best = val;
        }
    }
    best
}

/// Nonnegative piecewise-constant compute power `p(t)`.
///
/// Segment `i` covers `[breaks[i], breaks[i+1])`; the last one extends to
/// infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFn {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl PowerFn {
    pub fn constant(value: f64) -> Self {
        PowerFn { breaks: vec![0.0], values: vec![value] }
    }

    /// Build from `(start, value)` pairs; the first start must be 0.
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() || segments[0].0 != 0.0 {
            return Err(ArenaError::invalid("power function must start at t = 0"));
        }
        for w in segments.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ArenaError::invalid("power breakpoints must increase"));
            }
        }
        if segments.iter().any(|&(t, v)| !(v >= 0.0) || !v.is_finite() || !t.is_finite()) {
            return Err(ArenaError::invalid("power values must be finite and nonnegative"));
        }
        let (breaks, values) = segments.into_iter().unzip();
        Ok(PowerFn { breaks, values })
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.breaks.len()).map(move |i| {
            let end = self.breaks.get(i + 1).copied().unwrap_or(f64::INFINITY);
            (self.breaks[i], end, self.values[i])
        })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= t).saturating_sub(1);
        self.values[i]
    }

    /// Exact `∫_{t0}^{t1} p(t) dt`.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (a, b, v) in self.segments() {
            let lo = a.max(t0);
            let hi = b.min(t1);
            if hi > lo && v > 0.0 {
                acc += v * (hi - lo);
            }
        }
        acc
    }

    /// Smallest `T ≥ t0` with `∫_{t0}^T p ≥ work`, or `None` if never reached.
    pub fn time_to_accumulate(&self, t0: f64, work: f64) -> Option<f64> {
        if work <= 0.0 {
            return Some(t0);
        }
        let mut remaining = work;
        for (a, b, v) in self.segments() {
            if b <= t0 {
                continue;
            }
            let start = a.max(t0);
            if v <= 0.0 {
                continue;
            }
            let cap = v * (b - start);
            if cap >= remaining * (1.0 - FLOOR_SLACK) {
                return Some(start + (remaining / v).min(b - start));
            }
            remaining -= cap;
        }
        None
    }

    /// True when the power is eventually zero.
    pub fn eventually_zero(&self) -> bool {
        *self.values.last().unwrap() == 0.0
    }
}

/// Per-worker task-duration law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeModel {
    Fixed { tau: Vec<f64> },
    Universal { power: Vec<PowerFn> },
    Stochastic { dist: Vec<Distribution> },
}

impl ComputeModel {
    pub fn n(&self) -> usize {
        match self {
            ComputeModel::Fixed { tau } => tau.len(),
            ComputeModel::Universal { power } => power.len(),
            ComputeModel::Stochastic { dist } => dist.len(),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, ComputeModel::Fixed { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(ArenaError::invalid("compute model needs at least one worker"));
        }
        match self {
            ComputeModel::Fixed { tau } => {
                if tau.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
                    return Err(ArenaError::invalid("fixed durations must be positive"));
                }
            }
            ComputeModel::Universal { .. } => {}
            ComputeModel::Stochastic { dist } => {
                for d in dist {
                    d.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Fixed durations in ascending order.
    pub fn sorted_taus(&self) -> Option<Vec<f64>> {
        match self {
            ComputeModel::Fixed { tau } => {
                let mut t = tau.clone();
                t.sort_by(f64::total_cmp);
                Some(t)
            }
            _ => None,
        }
    }

    /// Workers ordered from fastest to slowest (stable on ties).
    pub fn speed_order(&self) -> Option<Vec<usize>> {
        match self {
            ComputeModel::Fixed { tau } => {
                let mut idx: Vec<usize> = (0..tau.len()).collect();
                idx.sort_by(|&a, &b| tau[a].total_cmp(&tau[b]));
                Some(idx)
            }
            _ => None,
        }
    }

    /// Mean duration per worker (fixed and stochastic only).
    pub fn means(&self) -> Option<Vec<f64>> {
        match self {
            ComputeModel::Fixed { tau } => Some(tau.clone()),
            ComputeModel::Stochastic { dist } => Some(dist.iter().map(Distribution::mean).collect()),
            ComputeModel::Universal { .. } => None,
        }
    }

    /// Completion time of a task started at `start`; infinite when a
    /// universal-model worker never accumulates a full unit of work.
    pub fn completion_time(&self, worker: usize, start: f64, counter: u64, seed: u64) -> f64 {
        match self {
            ComputeModel::Universal { power } => {
                power[worker].time_to_accumulate(start, 1.0).unwrap_or(f64::INFINITY)
            }
            _ => start + sample_duration(self, worker, counter, seed).expect("pointwise model"),
        }
    }
}

/// Duration of task number `task_counter` of `worker`.
pub fn sample_duration(model: &ComputeModel, worker: usize, task_counter: u64, seed: u64) -> Result<f64> {
    if worker >= model.n() {
        return Err(ArenaError::invalid(format!("worker {worker} out of range")));
    }
    match model {
        ComputeModel::Fixed { tau } => Ok(tau[worker]),
        ComputeModel::Stochastic { dist } => {
            let mut rng = rng::stream(seed, tag::DURATION, worker as u64, task_counter);
            Ok(dist[worker].sample(&mut rng))
        }
        ComputeModel::Universal { .. } => Err(ArenaError::Unsupported(
            "task duration is not defined pointwise under the universal model; use grads_completed".into(),
        )),
    }
}

/// `⌊∫_{t0}^{t1} p(t) dt⌋`.
pub fn grads_completed(power: &PowerFn, t0: f64, t1: f64) -> Result<u64> {
    if !(t0 >= 0.0) || !(t1 >= t0) {
        return Err(ArenaError::invalid("interval must satisfy t1 >= t0 >= 0"));
    }
    Ok(snap_floor(power.integral(t0, t1)) as u64)
}

/// Analytic mean and Orlicz bound.
pub fn mean_and_orlicz(dist: &Distribution) -> (f64, f64) {
    (dist.mean(), dist.orlicz_upper())
}

/// Named compute-time presets from the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    SqrtShiftedExp,
    LinearShiftedExp,
    FixedLinearJitter,
    FiveDistGroups,
}

impl std::str::FromStr for Preset {
    type Err = ArenaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt_shifted_exp" => Ok(Preset::SqrtShiftedExp),
            "linear_shifted_exp" => Ok(Preset::LinearShiftedExp),
            "fixed_linear_jitter" => Ok(Preset::FixedLinearJitter),
            "five_dist_groups" => Ok(Preset::FiveDistGroups),
            other => Err(ArenaError::invalid(format!("unknown preset {other:?}"))),
        }
    }
}

const ATA_SCALE: f64 = 29.0;

/// Build the per-worker model of a preset; workers are 1-indexed in the
/// formulas and 0-indexed in the returned vectors.
pub fn experiment_times(preset: Preset, n: usize, seed: u64) -> Result<ComputeModel> {
    if n == 0 {
        return Err(ArenaError::invalid("n must be positive"));
    }
    let model = match preset {
        Preset::SqrtShiftedExp => ComputeModel::Stochastic {
            dist: (1..=n)
                .map(|i| {
                    let c = ATA_SCALE * (i as f64).sqrt();
                    Distribution::ShiftedExponential { shift: c, scale: c }
                })
                .collect(),
        },
        Preset::LinearShiftedExp => ComputeModel::Stochastic {
            dist: (1..=n)
                .map(|i| {
                    let c = ATA_SCALE * i as f64;
                    Distribution::ShiftedExponential { shift: c, scale: c }
                })
                .collect(),
        },
        Preset::FixedLinearJitter => ComputeModel::Fixed {
            tau: (1..=n)
                .map(|i| {
                    let mut rng = rng::stream(seed, tag::PRESET, i as u64, 0);
                    // N(0, i) with i the variance.
                    let eta = Normal::new(0.0, (i as f64).sqrt()).unwrap().sample(&mut rng);
                    i as f64 + eta.abs()
                })
                .collect(),
        },
        Preset::FiveDistGroups => ComputeModel::Stochastic {
            dist: (0..n).map(five_dist_worker).collect(),
        },
    };
    Ok(model)
}

fn five_dist_worker(i: usize) -> Distribution {
    let g = (i / 5) as f64;
    let m = ATA_SCALE * (5.0 * g + 1.0);
    let base = match i % 5 {
        0 => Distribution::Exponential { scale: m },
        1 => Distribution::Uniform { lo: 0.5 * m, hi: 1.5 * m },
        2 => Distribution::HalfNormal { scale: m * (std::f64::consts::PI / 2.0).sqrt() },
        3 => Distribution::LogNormal { mu: 0.5 * m.ln(), sigma: m.ln().sqrt() },
        _ => Distribution::Gamma { shape: m * m, scale: 1.0 / m },
    };
    Distribution::Shifted { offset: m, base: Box::new(base) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_lookup() {
        let m = ComputeModel::Fixed { tau: vec![1.0, 2.0] };
        assert_eq!(sample_duration(&m, 1, 99, 5).unwrap(), 2.0);
    }

    #[test]
    fn universal_rejects_pointwise_duration() {
        let m = ComputeModel::Universal { power: vec![PowerFn::constant(1.0)] };
        assert!(matches!(sample_duration(&m, 0, 0, 0), Err(ArenaError::Unsupported(_))));
    }

    #[test]
    fn grads_completed_examples() {
        assert_eq!(grads_completed(&PowerFn::constant(0.5), 0.0, 4.0).unwrap(), 2);
        assert_eq!(grads_completed(&PowerFn::constant(0.0), 0.0, 100.0).unwrap(), 0);
        let p = PowerFn::new(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(grads_completed(&p, 0.0, 5.0).unwrap(), 1);
        assert!(grads_completed(&p, 3.0, 1.0).is_err());
    }

    #[test]
    fn time_to_accumulate_crosses_segments() {
        let p = PowerFn::new(vec![(0.0, 0.5), (2.0, 0.0), (5.0, 2.0)]).unwrap();
        assert_eq!(p.time_to_accumulate(0.0, 1.0), Some(2.0));
        assert_eq!(p.time_to_accumulate(1.0, 1.0), Some(5.25));
        let dead = PowerFn::new(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(dead.time_to_accumulate(0.5, 1.0), None);
    }

    #[test]
    fn unit_exponential_constant() {
        let c = unit_exponential_orlicz();
        assert!(c > 1.5 && c < 1.55, "{c}");
    }
}
