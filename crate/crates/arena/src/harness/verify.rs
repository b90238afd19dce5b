//! Named invariant and lemma checks behind the `verify` subcommand.
//!
//! Each suite draws its random instances from a dedicated stream keyed by the
//! suite and trial index, so a single trial can be replayed in isolation.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::allocation::{argmax_cardinality, brute_force_alloc, expected_cost_mc, lcb_alpha, lcb_eta, proxy_loss, ras};
use crate::error::{ArenaError, Result};
use crate::heterogeneous as het;
use crate::homogeneous::{select_m_star, Ringmaster, RingmasterVariant};
use crate::par;
use crate::problem::{HeteroProblem, QuadraticProblem};
use crate::rng::{self, tag};
use crate::simcore::{Action, RunOptions, RunRecord, Setup, StopRule};
use crate::theory;
use crate::timemodel::{ComputeModel, Distribution, PowerFn};

const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Ras,
    Delays,
    Timing,
    Ringleader,
    Malenia,
    Coverage,
    Sandwich,
    Theory,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Ras,
        Suite::Delays,
        Suite::Timing,
        Suite::Ringleader,
        Suite::Malenia,
        Suite::Coverage,
        Suite::Sandwich,
        Suite::Theory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ras => "ras",
            Suite::Delays => "delays",
            Suite::Timing => "timing",
            Suite::Ringleader => "ringleader",
            Suite::Malenia => "malenia",
            Suite::Coverage => "coverage",
            Suite::Sandwich => "sandwich",
            Suite::Theory => "theory",
            Suite::All => "all",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Ras => 500,
            Suite::Delays | Suite::Ringleader => 100,
            Suite::Timing | Suite::Malenia | Suite::Sandwich => 50,
            Suite::Coverage => 10_000,
            Suite::Theory => 1000,
            Suite::All => 0,
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

impl FromStr for Suite {
    type Err = ArenaError;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| ArenaError::Config(format!("unknown suite {s:?}")))
    }
}

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: u64,
    pub total: u64,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, passed: u64, total: u64, detail: impl Into<String>) -> Self {
        CheckReport { name: name.to_string(), passed, total, detail: detail.into() }
    }

    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.ok() { "PASS" } else { "FAIL" };
        write!(f, "{}: {verdict} {}/{} {}", self.name, self.passed, self.total, self.detail)
    }
}

fn trial_rng(suite: Suite, seed: u64, trial: usize) -> rng::Stream {
    rng::stream(seed, tag::VERIFY, suite.index(), trial as u64)
}

fn count(flags: &[bool]) -> u64 {
    flags.iter().filter(|&&b| b).count() as u64
}

/// Runs one suite (or all of them) with `trials` instances each; `None` uses
/// each suite's default.
pub fn run_suite(suite: Suite, trials: Option<usize>, seed: u64) -> Result<Vec<CheckReport>> {
    let pick = |s: Suite| trials.unwrap_or(s.default_trials());
    Ok(match suite {
        Suite::All => {
            let mut out = Vec::new();
            for s in Suite::EACH {
                out.extend(run_suite(s, trials, seed)?);
            }
            out
        }
        Suite::Ras => vec![check_ras(pick(suite), seed)?],
        Suite::Delays => vec![check_delays(pick(suite), seed)?],
        Suite::Timing => check_timing(pick(suite), seed)?,
        Suite::Ringleader => check_ringleader(pick(suite), seed)?,
        Suite::Malenia => check_malenia(pick(suite), seed)?,
        Suite::Coverage => check_coverage(pick(suite), seed),
        Suite::Sandwich => vec![check_sandwich(pick(suite), seed, 100_000)?],
        Suite::Theory => check_theory(pick(suite), seed)?,
    })
}

/// Solver loss and argmax cardinality against exhaustive enumeration.
pub fn check_ras(trials: usize, seed: u64) -> Result<CheckReport> {
    let results: Vec<Result<bool>> = par::map_range(trials, |t| {
        let mut r = trial_rng(Suite::Ras, seed, t);
        let n = r.random_range(2..=6);
        let b = r.random_range(1..=8u64);
        let s: Vec<f64> = (0..n).map(|_| r.random_range(0.1..10.0)).collect();
        let a = ras(&s, b)?;
        let (_, best_loss, best_card) = brute_force_alloc(&s, b)?;
        let loss = proxy_loss(&a, &s)?;
        Ok(a.iter().sum::<u64>() == b && loss == best_loss && argmax_cardinality(&a, &s) == best_card)
    });
    let flags: Vec<bool> = results.into_iter().collect::<Result<_>>()?;
    Ok(CheckReport::new("ras", count(&flags), trials as u64, "matches"))
}

fn small_quad() -> QuadraticProblem {
    QuadraticProblem::new(8, 0.01).expect("valid problem")
}

/// Random fixed or stochastic model; fixed when `fixed` is set.
fn random_model<R: Rng>(r: &mut R, n: usize, fixed: bool) -> ComputeModel {
    if fixed {
        ComputeModel::Fixed { tau: (0..n).map(|_| r.random_range(0.5..5.0)).collect() }
    } else {
        let dist = (0..n)
            .map(|_| Distribution::ShiftedExponential { shift: r.random_range(0.1..1.0), scale: r.random_range(0.5..3.0) })
            .collect();
        ComputeModel::Stochastic { dist }
    }
}

fn random_power<R: Rng>(r: &mut R, n: usize) -> ComputeModel {
    let power = (0..n)
        .map(|_| {
            let mut t = 0.0;
            let segs: Vec<(f64, f64)> = (0..4)
                .map(|_| {
                    let s = (t, r.random_range(0.2..3.0));
                    t += r.random_range(1.0..20.0);
                    s
                })
                .collect();
            PowerFn::new(segs).expect("valid power")
        })
        .collect();
    ComputeModel::Universal { power }
}

fn traced_ringmaster(model: &ComputeModel, r: u64, variant: RingmasterVariant, iters: u64, seed: u64) -> Result<RunRecord> {
    let p = small_quad();
    let setup = Setup::new(model, &p, StopRule::iters(iters), RunOptions::traced(seed));
    setup.run(&mut Ringmaster::new(1e-3, r, variant))
}

/// Applied gradients have delay `< R`, discarded ones `≥ R`.
pub fn check_delays(trials: usize, seed: u64) -> Result<CheckReport> {
    let results: Vec<Result<bool>> = par::map_range(trials, |t| {
        let mut g = trial_rng(Suite::Delays, seed, t);
        let n = [2, 5, 10][t % 3];
        let model = random_model(&mut g, n, t % 2 == 0);
        let variant = if (t / 2) % 2 == 0 { RingmasterVariant::NoStops } else { RingmasterVariant::WithStops };
        let r = g.random_range(1..=n as u64 + 2);
        let rec = traced_ringmaster(&model, r, variant, 300, seed + t as u64)?;
        Ok(rec.trace.iter().all(|e| {
            let delay = e.k_current - e.k_computed_at;
            match e.action {
                Action::Applied => delay < r,
                Action::Discarded => delay >= r,
                _ => true,
            }
        }))
    });
    let flags: Vec<bool> = results.into_iter().collect::<Result<_>>()?;
    Ok(CheckReport::new("delays", count(&flags), trials as u64, "runs without violations"))
}

fn applied_times(rec: &RunRecord) -> Vec<f64> {
    rec.trace.iter().filter(|e| e.action == Action::Applied).map(|e| e.time).collect()
}

/// `R` consecutive updates after any update (or the start) finish within the
/// fixed-model bound and within the universal-model bound.
pub fn check_timing(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let fixed: Vec<Result<bool>> = par::map_range(trials, |t| {
        let mut g = trial_rng(Suite::Timing, seed, t);
        let n = g.random_range(2..=10);
        let model = random_model(&mut g, n, true);
        let r = g.random_range(1..=n as u64 + 2);
        let variant = if t % 2 == 0 { RingmasterVariant::NoStops } else { RingmasterVariant::WithStops };
        let rec = traced_ringmaster(&model, r, variant, 400, seed)?;
        let bound = theory::t_of_r(&model.sorted_taus().unwrap(), r)?;
        let mut times = vec![0.0];
        times.extend(applied_times(&rec));
        Ok(times.windows(r as usize + 1).all(|w| w[r as usize] - w[0] <= bound + TOL))
    });
    let universal: Vec<Result<bool>> = par::map_range(trials, |t| {
        let mut g = trial_rng(Suite::Timing, seed ^ 0x55, t);
        let n = g.random_range(2..=6);
        let model = random_power(&mut g, n);
        let r = g.random_range(1..=n as u64 + 2);
        let rec = traced_ringmaster(&model, r, RingmasterVariant::NoStops, 200, seed)?;
        let ComputeModel::Universal { power } = &model else { unreachable!() };
        let mut times = vec![0.0];
        times.extend(applied_times(&rec));
        Ok(times
            .windows(r as usize + 1)
            .all(|w| w[r as usize] <= theory::universal_t(power, r, w[0]) + TOL))
    });
    let f: Vec<bool> = fixed.into_iter().collect::<Result<_>>()?;
    let u: Vec<bool> = universal.into_iter().collect::<Result<_>>()?;
    Ok(vec![
        CheckReport::new("timing_fixed", count(&f), trials as u64, "runs within t(R)"),
        CheckReport::new("timing_universal", count(&u), trials as u64, "runs within T(R, T0)"),
    ])
}

#[derive(Default)]
struct RingleaderChecks {
    delay: bool,
    rounds: bool,
    duration: bool,
    harmonic: bool,
    discards: bool,
    purity: bool,
}

fn ringleader_trial(model: &ComputeModel, seed: u64) -> Result<RingleaderChecks> {
    let n = model.n();
    let p = HeteroProblem::new(6, 0.01, n)?;
    let setup = Setup::new(model, &p, StopRule::iters(40 * n as u64), RunOptions::seeded(seed));
    let (rec, s) = het::ringleader(&setup, 1e-3)?;
    let mut c = RingleaderChecks {
        delay: s.max_delay() <= 2 * n as u64 - 2,
        discards: rec.total_discarded() == 0,
        purity: s.table.purity_violations == 0,
        ..Default::default()
    };
    c.rounds = s.round_ends.len() == s.log.len() / n
        && s.log.chunks_exact(n).all(|round| {
            let mut seen = vec![false; n];
            round.iter().all(|u| !std::mem::replace(&mut seen[u.worker], true))
        });
    match model.sorted_taus() {
        Some(taus) => {
            let tn = taus[n - 1];
            let mut prev = 0.0;
            c.duration = s.round_ends.iter().all(|&e| {
                let ok = e - prev <= 2.0 * tn + TOL;
                prev = e;
                ok
            });
            c.harmonic = s.min_harmonic() >= theory::harmonic_floor(&taus)? - TOL;
        }
        None => {
            c.duration = true;
            c.harmonic = s.min_harmonic() >= 1.0;
        }
    }
    Ok(c)
}

/// Structural properties of the two-phase table method across all models.
pub fn check_ringleader(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let results: Vec<Result<RingleaderChecks>> = par::map_range(trials, |t| {
        let mut g = trial_rng(Suite::Ringleader, seed, t);
        let n = g.random_range(2..=8);
        let model = match t % 3 {
            0 => random_model(&mut g, n, true),
            1 => random_model(&mut g, n, false),
            _ => random_power(&mut g, n),
        };
        ringleader_trial(&model, seed + t as u64)
    });
    let all: Vec<RingleaderChecks> = results.into_iter().collect::<Result<_>>()?;
    let tally = |f: fn(&RingleaderChecks) -> bool| all.iter().filter(|c| f(c)).count() as u64;
    let total = trials as u64;
    Ok(vec![
        CheckReport::new("ringleader_delay", tally(|c| c.delay), total, "runs with delay <= 2n-2"),
        CheckReport::new("ringleader_rounds", tally(|c| c.rounds), total, "runs with one update per worker per round"),
        CheckReport::new("ringleader_round_time", tally(|c| c.duration), total, "runs with rounds <= 2 tau_n"),
        CheckReport::new("ringleader_harmonic", tally(|c| c.harmonic), total, "runs above the harmonic floor"),
        CheckReport::new("ringleader_discards", tally(|c| c.discards), total, "runs without discards"),
        CheckReport::new("ringleader_purity", tally(|c| c.purity), total, "runs with pure table entries"),
    ])
}

/// Every fired update meets the harmonic threshold and the previous arrival
/// did not; the parameter-free rule fires exactly when the collect phase of
/// the two-phase method ends.
pub fn check_malenia(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let results: Vec<Result<(bool, bool)>> = par::map_range(trials, |t| {
        let mut g = trial_rng(Suite::Malenia, seed, t);
        let n = g.random_range(2..=8);
        let model = random_model(&mut g, n, t % 2 == 0);
        let p = HeteroProblem::new(6, 0.1, n)?;
        let sigma2 = p.base.variance_bound();
        let eps = sigma2 / (n as f64 * g.random_range(0.5..6.0));
        let setup = Setup::new(&model, &p, StopRule::iters(30), RunOptions::seeded(seed + t as u64));
        let (_, m) = het::malenia(&setup, 1e-3, sigma2, eps)?;
        let thr = het::malenia_threshold(n, sigma2, eps);
        let fired = !m.log.is_empty()
            && m.log.iter().all(|u| u.harmonic >= thr && u.prior_harmonic.is_some_and(|h| h < thr));
        let fixed = ComputeModel::Fixed { tau: (0..n).map(|_| g.random_range(0.5..5.0)).collect() };
        let setup = Setup::new(&fixed, &p, StopRule::iters(1), RunOptions::seeded(seed));
        let (_, pf) = het::malenia_param_free(&setup, 1e-3)?;
        let (_, rl) = het::ringleader(&setup, 1e-3)?;
        let same = match (pf.log.first(), rl.log.first()) {
            (Some(a), Some(b)) => a.time == b.time && a.worker == b.worker && a.counts == b.counts,
            _ => false,
        };
        Ok((fired, same))
    });
    let all: Vec<(bool, bool)> = results.into_iter().collect::<Result<_>>()?;
    let total = trials as u64;
    Ok(vec![
        CheckReport::new("malenia_stopping", all.iter().filter(|c| c.0).count() as u64, total, "runs"),
        CheckReport::new("malenia_param_free", all.iter().filter(|c| c.1).count() as u64, total, "runs"),
    ])
}

/// Fraction of repetitions where the lower confidence bound stays below the
/// mean, at confidence `1 − δ` with `δ = 0.05`; passes when it is at least
/// 0.94 for every sample size.
pub fn check_coverage(reps: usize, seed: u64) -> Vec<CheckReport> {
    let delta: f64 = 0.05;
    let log_term = (2.0 / delta).ln();
    let arm = Distribution::ShiftedExponential { shift: 1.0, scale: 2.0 };
    let mu = arm.mean();
    let alpha = arm.orlicz_upper();
    let eta = alpha / mu;
    let mut out = Vec::new();
    for (mode, name) in [(0, "coverage_alpha"), (1, "coverage_eta")] {
        let mut passed = 0;
        let mut fractions = Vec::new();
        for &k in &[1u64, 10, 100] {
            let hits = par::map_range(reps, |t| {
                let mut r = rng::stream(seed, tag::VERIFY, 100 + k, t as u64);
                let mean = (0..k).map(|_| arm.sample(&mut r)).sum::<f64>() / k as f64;
                let s = if mode == 0 { lcb_alpha(mean, alpha, k, log_term) } else { lcb_eta(mean, eta, k, log_term) };
                s <= mu
            });
            let frac = hits.iter().filter(|&&h| h).count() as f64 / reps as f64;
            if frac >= 0.94 {
                passed += 1;
            }
            fractions.push(format!("K={k}:{frac:.4}"));
        }
        out.push(CheckReport::new(name, passed, 3, fractions.join(" ")));
    }
    out
}

/// `ℓ(a, μ) ≤ E[C(a)] ≤ (1 + 4η ln B)·ℓ(a, μ)` within three standard errors
/// on exponential arms.
pub fn check_sandwich(allocations: usize, seed: u64, mc_trials: usize) -> Result<CheckReport> {
    let mut passed = 0;
    for t in 0..allocations {
        let mut g = trial_rng(Suite::Sandwich, seed, t);
        let n = g.random_range(1..=5);
        let b = g.random_range(1..=23u64);
        let dists: Vec<Distribution> =
            (0..n).map(|_| Distribution::Exponential { scale: g.random_range(0.5..5.0) }).collect();
        let mut a = vec![0u64; n];
        for _ in 0..b {
            a[g.random_range(0..n)] += 1;
        }
        let mu: Vec<f64> = dists.iter().map(Distribution::mean).collect();
        let eta = dists.iter().zip(&mu).map(|(d, m)| d.orlicz_upper() / m).fold(0.0, f64::max);
        let loss = proxy_loss(&a, &mu)?;
        let (mean, se) = expected_cost_mc(&a, &dists, mc_trials, seed.wrapping_add(t as u64))?;
        if loss - 3.0 * se <= mean && mean <= theory::sandwich_factor(eta, b) * loss + 3.0 * se {
            passed += 1;
        }
    }
    Ok(CheckReport::new("sandwich", passed, allocations as u64, "allocations"))
}

fn brute_m_star(taus: &[f64], ratio: f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for m in 1..=taus.len() {
        let h = m as f64 / taus[..m].iter().map(|t| 1.0 / t).sum::<f64>();
        let v = h * (1.0 + ratio / m as f64);
        if v < best.0 {
            best = (v, m);
        }
    }
    best.1
}

/// `m⋆` against enumeration, `T_R ≤ T_A`, and monotonicity of `t(R)`.
pub fn check_theory(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let results: Vec<Result<(bool, bool, bool)>> = par::map_range(trials, |t| {
        let mut g = trial_rng(Suite::Theory, seed, t);
        let n = g.random_range(1..=30);
        let mut taus: Vec<f64> = (0..n).map(|_| g.random_range(0.1..100.0)).collect();
        taus.sort_by(f64::total_cmp);
        let ratio = 10f64.powf(g.random_range(-3.0..4.0));
        let m_ok = select_m_star(&taus, ratio)? == brute_m_star(&taus, ratio);
        let (tr, ta) = theory::closed_form_T(&taus, 1.0, 1.0, ratio, 1.0)?;
        let order_ok = tr <= ta * (1.0 + TOL);
        let r = g.random_range(1..50u64);
        let base = theory::t_of_r(&taus, r)?;
        let mut slower = taus.clone();
        let j = g.random_range(0..n);
        slower[j] *= g.random_range(1.0..3.0);
        slower.sort_by(f64::total_cmp);
        let mono = theory::t_of_r(&taus, r + 1)? >= base && theory::t_of_r(&slower, r)? >= base * (1.0 - TOL);
        Ok((m_ok, order_ok, mono))
    });
    let all: Vec<(bool, bool, bool)> = results.into_iter().collect::<Result<_>>()?;
    let total = trials as u64;
    Ok(vec![
        CheckReport::new("theory_m_star", all.iter().filter(|c| c.0).count() as u64, total, "instances"),
        CheckReport::new("theory_tr_le_ta", all.iter().filter(|c| c.1).count() as u64, total, "instances"),
        CheckReport::new("theory_t_of_r_monotone", all.iter().filter(|c| c.2).count() as u64, total, "instances"),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.into_iter().chain([Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn report_format() {
        let r = CheckReport::new("ras", 500, 500, "matches");
        assert_eq!(r.to_string(), "ras: PASS 500/500 matches");
    }
}
