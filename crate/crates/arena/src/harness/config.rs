//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::problem::{HeteroProblem, Oracle, QuadraticProblem};
use crate::simcore::{StopRule, DEFAULT_EVENT_CAP};
use crate::timemodel::{experiment_times, ComputeModel, Distribution, PowerFn, Preset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hero,
    Minibatch,
    NaiveAsgd,
    Rennala,
    NaiveOptimalAsgd,
    Ringmaster,
    RingmasterStops,
    Malenia,
    MaleniaPf,
    Ia2sgd,
    Ringleader,
    RingleaderUniversal,
    Ata,
    AtaEmpirical,
    Gta,
    Ofta,
    Uta,
    SgdAta,
    AsgdAta,
    SgdGta,
}

impl Method {
    pub const ALL: [Method; 20] = [
        Method::Hero,
        Method::Minibatch,
        Method::NaiveAsgd,
        Method::Rennala,
        Method::NaiveOptimalAsgd,
        Method::Ringmaster,
        Method::RingmasterStops,
        Method::Malenia,
        Method::MaleniaPf,
        Method::Ia2sgd,
        Method::Ringleader,
        Method::RingleaderUniversal,
        Method::Ata,
        Method::AtaEmpirical,
        Method::Gta,
        Method::Ofta,
        Method::Uta,
        Method::SgdAta,
        Method::AsgdAta,
        Method::SgdGta,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Hero => "hero",
            Method::Minibatch => "minibatch",
            Method::NaiveAsgd => "naive_asgd",
            Method::Rennala => "rennala",
            Method::NaiveOptimalAsgd => "naive_optimal_asgd",
            Method::Ringmaster => "ringmaster",
            Method::RingmasterStops => "ringmaster_stops",
            Method::Malenia => "malenia",
            Method::MaleniaPf => "malenia_pf",
            Method::Ia2sgd => "ia2sgd",
            Method::Ringleader => "ringleader",
            Method::RingleaderUniversal => "ringleader_universal",
            Method::Ata => "ata",
            Method::AtaEmpirical => "ata_empirical",
            Method::Gta => "gta",
            Method::Ofta => "ofta",
            Method::Uta => "uta",
            Method::SgdAta => "sgd_ata",
            Method::AsgdAta => "asgd_ata",
            Method::SgdGta => "sgd_gta",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = ArenaError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| ArenaError::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quad,
    HeteroQuad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub sigma: f64,
}

fn default_d() -> usize {
    100
}

/// Exactly one of the fields must be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeSpec {
    pub preset: Option<Preset>,
    pub fixed: Option<Vec<f64>>,
    pub dists: Option<Vec<Distribution>>,
    /// One list of `[start, value]` segments per worker.
    pub power: Option<Vec<Vec<(f64, f64)>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub gamma: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<u64>,
    #[serde(rename = "B")]
    pub b: Option<u64>,
    pub sigma2: Option<f64>,
    pub eps: Option<f64>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub max_iters: Option<u64>,
    pub grad_norm_sq: Option<f64>,
    pub max_vtime: Option<f64>,
    pub event_cap: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub n: usize,
    pub problem: ProblemSpec,
    pub compute: ComputeSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Number of rounds for allocation-only experiments.
    #[serde(default)]
    pub rounds: Option<usize>,
}

/// Problem instance built from a config.
pub enum Objective {
    Quad(QuadraticProblem),
    Hetero(HeteroProblem),
}

impl Objective {
    pub fn oracle(&self) -> &dyn Oracle {
        match self {
            Objective::Quad(p) => p,
            Objective::Hetero(p) => p,
        }
    }

    pub fn base(&self) -> &QuadraticProblem {
        match self {
            Objective::Quad(p) => p,
            Objective::Hetero(p) => &p.base,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ArenaError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ArenaError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ArenaError::Config(m.to_string()));
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.problem.d == 0 {
            return bad("problem.d must be positive");
        }
        if !(self.problem.sigma >= 0.0) {
            return bad("problem.sigma must be nonnegative");
        }
        let c = &self.compute;
        let set = [c.preset.is_some(), c.fixed.is_some(), c.dists.is_some(), c.power.is_some()];
        if set.iter().filter(|&&b| b).count() != 1 {
            return bad("compute needs exactly one of preset, fixed, dists, power");
        }
        let model = self.compute_model(self.seed)?;
        if model.n() != self.n {
            return bad("compute model size differs from n");
        }
        if let Some(g) = self.params.gamma {
            if !(g > 0.0) {
                return bad("params.gamma must be positive");
            }
        }
        if self.params.r == Some(0) || self.params.b == Some(0) {
            return bad("params.R and params.B must be at least 1");
        }
        if let Some(e) = self.params.eps {
            if !(e > 0.0) {
                return bad("params.eps must be positive");
            }
        }
        let s = &self.stop;
        if s.max_iters.is_none() && s.grad_norm_sq.is_none() && s.max_vtime.is_none() && self.rounds.is_none() {
            return bad("stop needs at least one of max_iters, grad_norm_sq, max_vtime");
        }
        Ok(())
    }

    pub fn compute_model(&self, seed: u64) -> Result<ComputeModel> {
        let c = &self.compute;
        let model = if let Some(p) = c.preset {
            experiment_times(p, self.n, seed)?
        } else if let Some(t) = &c.fixed {
            ComputeModel::Fixed { tau: t.clone() }
        } else if let Some(d) = &c.dists {
            ComputeModel::Stochastic { dist: d.clone() }
        } else if let Some(p) = &c.power {
            ComputeModel::Universal { power: p.iter().map(|s| PowerFn::new(s.clone())).collect::<Result<_>>()? }
        } else {
            return Err(ArenaError::Config("missing compute model".into()));
        };
        model.validate().map_err(|e| ArenaError::Config(e.to_string()))?;
        Ok(model)
    }

    pub fn objective(&self) -> Result<Objective> {
        Ok(match self.problem.kind {
            ProblemKind::Quad => Objective::Quad(QuadraticProblem::new(self.problem.d, self.problem.sigma)?),
            ProblemKind::HeteroQuad => {
                Objective::Hetero(HeteroProblem::new(self.problem.d, self.problem.sigma, self.n)?)
            }
        })
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            max_iters: self.stop.max_iters,
            grad_norm_sq: self.stop.grad_norm_sq,
            max_vtime: self.stop.max_vtime,
        }
    }

    pub fn event_cap(&self) -> u64 {
        self.stop.event_cap.unwrap_or(DEFAULT_EVENT_CAP)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
method = "ringmaster"
n = 3
[problem]
kind = "quad"
d = 10
sigma = 0.01
[compute]
fixed = [1.0, 2.0, 3.0]
[stop]
max_iters = 50
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.method, Method::Ringmaster);
        assert_eq!(cfg.compute_model(0).unwrap().n(), 3);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = BASE.replace("d = 10", "d = 10\nfoo = 1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ArenaError::Config(_))));
    }

    #[test]
    fn rejects_size_mismatch() {
        let text = BASE.replace("n = 3", "n = 4");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
    }
}
