//! Grid sweeps: cartesian products of seeds, stepsizes, `R`, `B` and `n`.
//!
//! Each cell owns its configuration and RNG streams, so cells run
//! independently and the merged output is sorted by cell key.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{ArenaError, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::methods::execute;
use crate::harness::output::{emit_csv, rows_from_record};
use crate::par;
use crate::simcore::StopReason;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    N,
    R,
    B,
    Gamma,
    Seed,
}

impl Axis {
    fn parse(s: &str) -> Result<Axis> {
        Ok(match s.trim() {
            "n" => Axis::N,
            "R" => Axis::R,
            "B" => Axis::B,
            "gamma" => Axis::Gamma,
            "seed" => Axis::Seed,
            other => return Err(ArenaError::Config(format!("unknown grid axis {other:?}"))),
        })
    }

    fn integral(self) -> bool {
        self != Axis::Gamma
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::N => "n",
            Axis::R => "R",
            Axis::B => "B",
            Axis::Gamma => "gamma",
            Axis::Seed => "seed",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub axis: Axis,
    pub values: Vec<f64>,
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| ArenaError::Config(format!("bad grid value {s:?}")))
}

fn parse_power(s: &str) -> Result<Option<(f64, i32)>> {
    match s.split_once('^') {
        None => Ok(None),
        Some((base, exp)) => {
            let e = exp.trim().parse::<i32>().map_err(|_| ArenaError::Config(format!("bad exponent in {s:?}")))?;
            Ok(Some((parse_num(base)?, e)))
        }
    }
}

/// Parses `axis=spec` where spec is a comma list, an integer range `a..b`
/// (inclusive), or a power range `c^p..c^q`.
pub fn parse_axis(text: &str) -> Result<GridAxis> {
    let (name, spec) = text
        .split_once('=')
        .ok_or_else(|| ArenaError::Config(format!("grid entry {text:?} lacks '='")))?;
    let axis = Axis::parse(name)?;
    let mut values = Vec::new();
    for part in spec.split(',') {
        if let Some((lo, hi)) = part.split_once("..") {
            match (parse_power(lo)?, parse_power(hi)?) {
                (Some((b1, p)), Some((b2, q))) if b1 == b2 => {
                    if p > q {
                        return Err(ArenaError::Config(format!("empty range {part:?}")));
                    }
                    values.extend((p..=q).map(|e| b1.powi(e)));
                }
                (None, None) => {
                    let (a, b) = (parse_num(lo)?, parse_num(hi)?);
                    if a.fract() != 0.0 || b.fract() != 0.0 || a > b {
                        return Err(ArenaError::Config(format!("bad integer range {part:?}")));
                    }
                    values.extend((a as i64..=b as i64).map(|v| v as f64));
                }
                _ => return Err(ArenaError::Config(format!("mixed range {part:?}"))),
            }
        } else if let Some((b, e)) = parse_power(part)? {
            values.push(b.powi(e));
        } else {
            values.push(parse_num(part)?);
        }
    }
    if values.is_empty() {
        return Err(ArenaError::Config(format!("empty grid axis {name:?}")));
    }
    if axis.integral() && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
        return Err(ArenaError::Config(format!("axis {axis} needs nonnegative integers")));
    }
    if axis == Axis::Gamma && values.iter().any(|v| !(*v > 0.0)) {
        return Err(ArenaError::Config("gamma values must be positive".into()));
    }
    Ok(GridAxis { axis, values })
}

/// One point of the grid; unset axes fall back to the base config.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Cell {
    pub n: Option<usize>,
    pub r: Option<u64>,
    pub b: Option<u64>,
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl Cell {
    fn sort_key(&self) -> (usize, u64, u64, u64, u64) {
        (
            self.n.unwrap_or(0),
            self.r.unwrap_or(0),
            self.b.unwrap_or(0),
            self.gamma.map_or(0, f64::to_bits),
            self.seed,
        )
    }

    /// Stable identifier, also used as the file stem of the cell's CSV.
    pub fn key(&self) -> String {
        let mut parts = Vec::new();
        if let Some(n) = self.n {
            parts.push(format!("n{n}"));
        }
        if let Some(r) = self.r {
            parts.push(format!("R{r}"));
        }
        if let Some(b) = self.b {
            parts.push(format!("B{b}"));
        }
        if let Some(g) = self.gamma {
            parts.push(format!("gamma{g:e}"));
        }
        parts.push(format!("seed{}", self.seed));
        parts.join("_")
    }

    pub fn apply(&self, base: &ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(r) = self.r {
            cfg.params.r = Some(r);
        }
        if let Some(b) = self.b {
            cfg.params.b = Some(b);
        }
        if let Some(g) = self.gamma {
            cfg.params.gamma = Some(g);
        }
        cfg.seed = self.seed;
        cfg.seeds.clear();
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Cartesian product of the axes, sorted by cell key. Without a seed axis the
/// config's seed list is used. Repeating an axis is an error.
pub fn expand(base: &ExperimentConfig, axes: &[GridAxis]) -> Result<Vec<Cell>> {
    let mut seen = std::collections::BTreeSet::new();
    for a in axes {
        if !seen.insert(a.axis) {
            return Err(ArenaError::Config(format!("axis {} given twice", a.axis)));
        }
    }
    let seed_axis = GridAxis { axis: Axis::Seed, values: base.seed_list().iter().map(|&s| s as f64).collect() };
    let mut all: Vec<&GridAxis> = axes.iter().collect();
    if !seen.contains(&Axis::Seed) {
        all.push(&seed_axis);
    }
    let mut cells = vec![Cell::default()];
    for a in all {
        let mut next = Vec::with_capacity(cells.len() * a.values.len());
        for c in &cells {
            for &v in &a.values {
                let mut c = c.clone();
                match a.axis {
                    Axis::N => c.n = Some(v as usize),
                    Axis::R => c.r = Some(v as u64),
                    Axis::B => c.b = Some(v as u64),
                    Axis::Gamma => c.gamma = Some(v),
                    Axis::Seed => c.seed = v as u64,
                }
                next.push(c);
            }
        }
        cells = next;
    }
    cells.sort_by_key(Cell::sort_key);
    cells.dedup();
    Ok(cells)
}

/// Per-cell outcome written to the summary CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellSummary {
    pub key: String,
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub gamma: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<u64>,
    #[serde(rename = "B")]
    pub b: Option<u64>,
    pub final_k: u64,
    pub final_time: f64,
    pub final_grad_norm_sq: f64,
    pub reached: bool,
    pub stop_reason: String,
    pub error: Option<String>,
}

fn stop_name(r: StopReason) -> &'static str {
    match r {
        StopReason::Iterations => "iterations",
        StopReason::Threshold => "threshold",
        StopReason::TimeBudget => "time_budget",
        StopReason::Diverged => "diverged",
        StopReason::Server => "server",
    }
}

/// Runs every cell (in parallel when enabled). When `dir` is given, each cell
/// writes `<key>.csv` and the summary goes to `sweep_summary.csv`.
pub fn run_sweep(base: &ExperimentConfig, axes: &[GridAxis], dir: Option<&Path>) -> Result<Vec<CellSummary>> {
    let cells = expand(base, axes)?;
    let cfgs: Vec<ExperimentConfig> = cells.iter().map(|c| c.apply(base)).collect::<Result<_>>()?;
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
    }
    let jobs: Vec<(&Cell, &ExperimentConfig)> = cells.iter().zip(&cfgs).collect();
    let results: Vec<Result<CellSummary>> = par::map(jobs, |(cell, cfg)| {
        let key = cell.key();
        let mut s = CellSummary {
            key: key.clone(),
            method: cfg.method.id().to_string(),
            n: cfg.n,
            seed: cell.seed,
            gamma: cell.gamma,
            r: cell.r,
            b: cell.b,
            final_k: 0,
            final_time: f64::NAN,
            final_grad_norm_sq: f64::NAN,
            reached: false,
            stop_reason: String::new(),
            error: None,
        };
        match execute(cfg, cell.seed, None, false) {
            Ok(run) => {
                let rec = &run.record;
                s.final_k = rec.final_k;
                s.final_time = rec.final_time;
                s.final_grad_norm_sq = rec.samples.last().map_or(f64::NAN, |x| x.grad_norm_sq);
                s.reached = rec.reached_threshold();
                s.stop_reason = stop_name(rec.stop_reason).to_string();
                if let Some(d) = dir {
                    let rows = rows_from_record(cfg.method.id(), cell.seed, rec, run.regret.as_deref());
                    emit_csv(&rows, &d.join(format!("{key}.csv")))?;
                }
            }
            Err(ArenaError::BudgetExceeded { partial, .. }) | Err(ArenaError::Stalled { partial }) => {
                s.final_k = partial.final_k;
                s.final_time = partial.final_time;
                s.stop_reason = "aborted".into();
                s.error = Some("budget exceeded or stalled".into());
            }
            Err(e) if matches!(e, ArenaError::Unsupported(_) | ArenaError::InvalidArgument(_)) => {
                s.error = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
        Ok(s)
    });
    let summaries: Vec<CellSummary> = results.into_iter().collect::<Result<_>>()?;
    if let Some(d) = dir {
        let mut w = csv::Writer::from_path(d.join("sweep_summary.csv"))?;
        for s in &summaries {
            w.serialize(s)?;
        }
        w.flush()?;
    }
    Ok(summaries)
}

/// Best cell per seed: smallest virtual time among cells that reached the
/// threshold.
pub fn best_per_seed(summaries: &[CellSummary]) -> Vec<(u64, Option<CellSummary>)> {
    let mut seeds: Vec<u64> = summaries.iter().map(|s| s.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    seeds
        .into_iter()
        .map(|seed| {
            let best = summaries
                .iter()
                .filter(|s| s.seed == seed && s.reached)
                .min_by(|a, b| a.final_time.total_cmp(&b.final_time))
                .cloned();
            (seed, best)
        })
        .collect()
}
