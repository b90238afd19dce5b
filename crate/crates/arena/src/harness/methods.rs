//! Maps method identifiers to algorithm runs.

use crate::allocation::{
    self, ofta, run_ata_regret, uta, AllocPolicy, AsgdAlloc, LcbMode, LcbState, RegretLedger, SgdAlloc,
};
use crate::error::{ArenaError, Result};
use crate::harness::config::{ExperimentConfig, Method};
use crate::heterogeneous as het;
use crate::homogeneous::{self as hom, RingmasterVariant};
use crate::problem::smoothness_l;
use crate::rng::{self, tag};
use crate::simcore::{RunOptions, RunRecord, Setup};
use crate::theory::{self, StepsizeRule};
use crate::timemodel::{ComputeModel, Distribution};

/// Batch size used by the allocation family when none is configured.
pub const DEFAULT_ALLOC_BATCH: u64 = 23;

/// Parameters resolved from a config and its problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub sigma2: f64,
    pub eps: f64,
    pub r: u64,
    pub b: u64,
    pub l: f64,
    pub gamma: f64,
}

pub struct MethodRun {
    pub record: RunRecord,
    pub regret: Option<Vec<(u64, f64)>>,
}

fn is_allocation(m: Method) -> bool {
    matches!(
        m,
        Method::Ata | Method::AtaEmpirical | Method::Gta | Method::Ofta | Method::Uta | Method::SgdAta | Method::AsgdAta | Method::SgdGta
    )
}

/// Default stepsizes: the Ringmaster rule (with `R = 1` and batch scaling for
/// synchronous methods, `R = n` for naive ASGD), the Ringleader rule for the
/// table methods, and `1/(2L)` for Malenia.
pub fn resolve(cfg: &ExperimentConfig, model: &ComputeModel) -> Result<Resolved> {
    let d = cfg.problem.d;
    let l = smoothness_l(d);
    let sigma2 = cfg.params.sigma2.unwrap_or(cfg.problem.sigma * cfg.problem.sigma * d as f64);
    let eps = cfg.params.eps.or(cfg.stop.grad_norm_sq).unwrap_or(1e-3);
    let r = cfg.params.r.unwrap_or(theory::optimal_r(sigma2, eps)?);
    let b = cfg.params.b.unwrap_or(if is_allocation(cfg.method) {
        DEFAULT_ALLOC_BATCH
    } else {
        theory::rennala_b(sigma2, eps)?
    });
    let n = cfg.n;
    let rm = |r: u64, batch: f64| theory::stepsize(StepsizeRule::Ringmaster { r }, l, sigma2 / batch, eps);
    let floor = match model.sorted_taus() {
        Some(t) => theory::harmonic_floor(&t)?.max(1.0),
        None => 1.0,
    };
    let default = match cfg.method {
        Method::Hero => rm(1, 1.0),
        Method::Minibatch => rm(1, n as f64),
        Method::NaiveAsgd | Method::NaiveOptimalAsgd => rm(n as u64, 1.0),
        Method::Ringmaster | Method::RingmasterStops => rm(r, 1.0),
        Method::Rennala | Method::Gta | Method::SgdGta => rm(1, b as f64),
        Method::Ata | Method::AtaEmpirical | Method::Ofta | Method::Uta | Method::SgdAta => rm(1, b as f64),
        Method::AsgdAta => rm(b, 1.0),
        Method::Malenia | Method::MaleniaPf => 1.0 / (2.0 * l),
        Method::Ia2sgd | Method::Ringleader | Method::RingleaderUniversal => {
            theory::stepsize(StepsizeRule::Ringleader { n, b: floor }, l, sigma2, eps)
        }
    };
    Ok(Resolved { sigma2, eps, r, b, l, gamma: cfg.params.gamma.unwrap_or(default) })
}

fn dists_of(model: &ComputeModel) -> Option<&[Distribution]> {
    match model {
        ComputeModel::Stochastic { dist } => Some(dist),
        _ => None,
    }
}

/// Default `α`: the largest Orlicz bound among the workers (0 for fixed times).
pub fn default_alpha(model: &ComputeModel) -> f64 {
    dists_of(model).map_or(0.0, |d| d.iter().map(Distribution::orlicz_upper).fold(0.0, f64::max))
}

/// Run one optimizer configuration.
pub fn execute(cfg: &ExperimentConfig, seed: u64, gamma: Option<f64>, trace: bool) -> Result<MethodRun> {
    let model = cfg.compute_model(seed)?;
    let objective = cfg.objective()?;
    let mut p = resolve(cfg, &model)?;
    if let Some(g) = gamma {
        p.gamma = g;
    }
    let opts = RunOptions { seed, trace, event_cap: cfg.event_cap(), sample_stride: 1 };
    let setup = Setup::new(&model, objective.oracle(), cfg.stop_rule(), opts);
    let g = p.gamma;
    let mu = model.means();
    let alpha = cfg.params.alpha.unwrap_or_else(|| default_alpha(&model));
    let eta = cfg.params.eta.unwrap_or(1.0);
    let plain = |r: Result<RunRecord>| r.map(|record| MethodRun { record, regret: None });
    match cfg.method {
        Method::Hero => plain(hom::hero_sgd(&setup, g)),
        Method::Minibatch => plain(hom::naive_minibatch(&setup, g)),
        Method::NaiveAsgd => plain(hom::naive_asgd(&setup, g)),
        Method::Rennala | Method::Gta | Method::SgdGta => plain(hom::rennala(&setup, g, p.b)),
        Method::NaiveOptimalAsgd => plain(hom::naive_optimal_asgd(&setup, g, p.sigma2, p.eps)),
        Method::Ringmaster => plain(hom::ringmaster(&setup, g, p.r, RingmasterVariant::NoStops)),
        Method::RingmasterStops => plain(hom::ringmaster(&setup, g, p.r, RingmasterVariant::WithStops)),
        Method::Malenia => plain(het::malenia(&setup, g, p.sigma2, p.eps).map(|r| r.0)),
        Method::MaleniaPf => plain(het::malenia_param_free(&setup, g).map(|r| r.0)),
        Method::Ia2sgd => plain(het::ia2sgd(&setup, g).map(|r| r.0)),
        Method::Ringleader => plain(het::ringleader(&setup, g).map(|r| r.0)),
        Method::RingleaderUniversal => plain(het::ringleader_universal(&setup, g, p.sigma2, p.eps).map(|r| r.0)),
        Method::Ata | Method::SgdAta | Method::AtaEmpirical | Method::Ofta | Method::Uta => {
            let n = model.n();
            let policy = match cfg.method {
                Method::AtaEmpirical => AllocPolicy::Ata(LcbState::new(n, LcbMode::Eta(eta))),
                Method::Ofta => {
                    let m = mu.clone().ok_or_else(|| ArenaError::Unsupported("ofta needs known means".into()))?;
                    AllocPolicy::Fixed(ofta(&m, p.b)?)
                }
                Method::Uta => AllocPolicy::Uniform { seed },
                _ => AllocPolicy::Ata(LcbState::new(n, LcbMode::Alpha(alpha))),
            };
            let mut s = SgdAlloc::new(g, p.b, policy, mu)?;
            let record = setup.run(&mut s)?;
            Ok(MethodRun { record, regret: s.ledger.is_some().then_some(s.regret_at_k) })
        }
        Method::AsgdAta => {
            let n = model.n();
            let mode = match cfg.params.eta {
                Some(e) => LcbMode::Eta(e),
                None => LcbMode::Alpha(alpha),
            };
            let mut s = AsgdAlloc::new(g, p.b, AllocPolicy::Ata(LcbState::new(n, mode)), mu)?;
            let record = setup.run(&mut s)?;
            Ok(MethodRun { record, regret: s.ledger.is_some().then_some(s.regret_at_k) })
        }
    }
}

fn round_seed(seed: u64, round: u64) -> u64 {
    seed ^ round.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Allocation-only experiment: per-round proxy regret and realized cost.
pub fn regret(cfg: &ExperimentConfig, seed: u64) -> Result<RegretLedger> {
    let model = cfg.compute_model(seed)?;
    let rounds = cfg
        .rounds
        .or(cfg.stop.max_iters.map(|k| k as usize))
        .ok_or_else(|| ArenaError::Config("regret needs `rounds` or stop.max_iters".into()))?;
    let p = resolve(cfg, &model)?;
    let dists: Vec<Distribution> = match &model {
        ComputeModel::Stochastic { dist } => dist.clone(),
        ComputeModel::Fixed { tau } => tau.iter().map(|&value| Distribution::Deterministic { value }).collect(),
        ComputeModel::Universal { .. } => {
            return Err(ArenaError::Unsupported("allocation experiments need fixed or stochastic times".into()))
        }
    };
    let mu: Vec<f64> = dists.iter().map(Distribution::mean).collect();
    let n = dists.len();
    let alpha = cfg.params.alpha.unwrap_or_else(|| default_alpha(&model));
    let eta = cfg.params.eta.unwrap_or(1.0);
    match cfg.method {
        Method::Ata | Method::SgdAta | Method::AsgdAta => run_ata_regret(&dists, p.b, LcbMode::Alpha(alpha), rounds, seed),
        Method::AtaEmpirical => run_ata_regret(&dists, p.b, LcbMode::Eta(eta), rounds, seed),
        Method::Ofta | Method::Uta => {
            let mut ledger = RegretLedger::new(mu.clone(), p.b)?;
            let fixed = ofta(&mu, p.b)?;
            let mut draws = vec![0u64; n];
            for k in 0..rounds as u64 {
                let a = if cfg.method == Method::Ofta { fixed.clone() } else { uta(n, p.b, seed, k + 1) };
                let durations: Vec<Vec<f64>> = (0..n)
                    .map(|i| {
                        (0..a[i])
                            .map(|_| {
                                let mut r = rng::stream(seed, tag::ARMS, i as u64, draws[i]);
                                draws[i] += 1;
                                dists[i].sample(&mut r)
                            })
                            .collect()
                    })
                    .collect();
                let cost = allocation::realized_cost(&a, &durations)?;
                ledger.record(&a, cost);
            }
            Ok(ledger)
        }
        Method::Gta | Method::SgdGta => {
            let mut ledger = RegretLedger::new(mu, p.b)?;
            for k in 0..rounds as u64 {
                let out = allocation::gta(&model, p.b, round_seed(seed, k))?;
                ledger.record(&out.counts, out.cost);
            }
            Ok(ledger)
        }
        other => Err(ArenaError::Config(format!("{} is not an allocation method", other.id()))),
    }
}
