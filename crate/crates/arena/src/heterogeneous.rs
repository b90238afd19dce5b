//! Heterogeneous-data server algorithms built on a per-worker gradient table.

use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::homogeneous::add_into;
use crate::simcore::{Ctx, GradientMsg, RunRecord, Server, Setup};

#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub g: Vec<f64>,
    pub b: u64,
    pub computed_at: Option<u64>,
}

impl TableEntry {
    fn empty(d: usize) -> Self {
        TableEntry { g: vec![0.0; d], b: 0, computed_at: None }
    }
}

/// Per-worker gradient sums `Gᵢ` and counts `bᵢ`, with a carry buffer for
/// gradients that belong to the next round.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTable {
    pub entries: Vec<TableEntry>,
    pub carry: Vec<TableEntry>,
    /// Additions whose base point differed from the entry's existing one.
    pub purity_violations: u64,
}

impl GradientTable {
    pub fn new(n: usize, d: usize) -> Self {
        GradientTable {
            entries: vec![TableEntry::empty(d); n],
            carry: vec![TableEntry::empty(d); n],
            purity_violations: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    fn push(entry: &mut TableEntry, msg: &GradientMsg, violations: &mut u64) {
        if entry.b > 0 && entry.computed_at != Some(msg.computed_at_k) {
            *violations += 1;
        }
        add_into(&mut entry.g, &msg.vector);
        entry.b += 1;
        entry.computed_at = Some(msg.computed_at_k);
    }

    pub fn add(&mut self, msg: &GradientMsg) {
        Self::push(&mut self.entries[msg.worker], msg, &mut self.purity_violations);
    }

    pub fn add_carry(&mut self, msg: &GradientMsg) {
        Self::push(&mut self.carry[msg.worker], msg, &mut self.purity_violations);
    }

    /// Replace entry `i` with the single gradient in `msg`.
    pub fn overwrite(&mut self, msg: &GradientMsg) {
        let e = &mut self.entries[msg.worker];
        e.g.copy_from_slice(&msg.vector);
        e.b = 1;
        e.computed_at = Some(msg.computed_at_k);
    }

    pub fn counts(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.b).collect()
    }

    pub fn is_full(&self) -> bool {
        self.entries.iter().all(|e| e.b > 0)
    }

    /// `(n⁻¹ Σ 1/bᵢ)⁻¹`, or 0 while some entry is empty.
    pub fn harmonic(&self) -> f64 {
        harmonic_batch(&self.counts())
    }

    /// Delays `k − computed_atᵢ` of every filled entry.
    pub fn delays(&self, k: u64) -> Vec<u64> {
        self.entries.iter().filter_map(|e| e.computed_at.map(|c| k - c)).collect()
    }

    pub fn clear(&mut self) {
        for e in self.entries.iter_mut() {
            e.g.iter_mut().for_each(|v| *v = 0.0);
            e.b = 0;
            e.computed_at = None;
        }
    }

    /// Move the carry buffer into the table and empty the buffer.
    pub fn transfer_carry(&mut self) {
        std::mem::swap(&mut self.entries, &mut self.carry);
        for e in self.carry.iter_mut() {
            e.g.iter_mut().for_each(|v| *v = 0.0);
            e.b = 0;
            e.computed_at = None;
        }
    }
}

/// Harmonic mean of the counts; 0 if any count is 0.
pub fn harmonic_batch(b: &[u64]) -> f64 {
    if b.is_empty() || b.contains(&0) {
        return 0.0;
    }
    let inv: f64 = b.iter().map(|&v| 1.0 / v as f64).sum::<f64>() / b.len() as f64;
    1.0 / inv
}

/// `(1/n) Σ Gᵢ/bᵢ`.
pub fn table_estimator(table: &GradientTable) -> Result<Vec<f64>> {
    let n = table.n();
    let d = table.entries.first().map_or(0, |e| e.g.len());
    let mut out = vec![0.0; d];
    for (i, e) in table.entries.iter().enumerate() {
        if e.b == 0 {
            return Err(ArenaError::invalid(format!("table entry {i} is empty")));
        }
        let w = 1.0 / (e.b as f64 * n as f64);
        for (o, g) in out.iter_mut().zip(&e.g) {
            *o += w * g;
        }
    }
    Ok(out)
}

/// `max{1, σ²/(nε)}`.
pub fn malenia_threshold(n: usize, sigma2: f64, eps: f64) -> f64 {
    (sigma2 / (n as f64 * eps)).max(1.0)
}

/// Diagnostics of one table-based update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableUpdate {
    /// Iterate index before the update.
    pub k: u64,
    pub time: f64,
    pub worker: usize,
    pub harmonic: f64,
    pub max_delay: u64,
    pub counts: Vec<u64>,
    /// Harmonic value of the table one arrival earlier (Malenia only).
    pub prior_harmonic: Option<f64>,
}

/// Synchronous rounds that stop once the harmonic batch reaches `threshold`.
pub struct Malenia {
    pub gamma: f64,
    pub threshold: f64,
    pub table: GradientTable,
    pub log: Vec<TableUpdate>,
}

impl Malenia {
    pub fn new(gamma: f64, threshold: f64) -> Self {
        Malenia { gamma, threshold, table: GradientTable::new(0, 0), log: Vec::new() }
    }
}

impl Server for Malenia {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.table = GradientTable::new(ctx.n(), ctx.dim());
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        let prior = self.table.harmonic();
        self.table.add(&msg);
        let h = self.table.harmonic();
        if !(self.table.is_full() && h >= self.threshold) {
            ctx.store(&msg);
            ctx.request(msg.worker);
            return;
        }
        ctx.apply(&msg);
        let est = table_estimator(&self.table).expect("full table");
        self.log.push(TableUpdate {
            k: ctx.k(),
            time: ctx.now(),
            worker: msg.worker,
            harmonic: h,
            max_delay: self.table.delays(ctx.k()).into_iter().max().unwrap_or(0),
            counts: self.table.counts(),
            prior_harmonic: Some(prior),
        });
        ctx.step(self.gamma, &est);
        self.table.clear();
        ctx.terminate_all();
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
}

pub fn malenia(setup: &Setup<'_>, gamma: f64, sigma2: f64, eps: f64) -> Result<(RunRecord, Malenia)> {
    if !(sigma2 >= 0.0) || !(eps > 0.0) {
        return Err(ArenaError::invalid("need sigma2 >= 0 and eps > 0"));
    }
    let mut s = Malenia::new(gamma, malenia_threshold(setup.model.n(), sigma2, eps));
    let rec = setup.run(&mut s)?;
    Ok((rec, s))
}

/// Malenia with the rule "one gradient from every worker".
pub fn malenia_param_free(setup: &Setup<'_>, gamma: f64) -> Result<(RunRecord, Malenia)> {
    let mut s = Malenia::new(gamma, 1.0);
    let mut rec = setup.run(&mut s)?;
    if !setup.model.is_fixed() {
        rec.warnings.push("parameter-free Malenia is only optimal under the fixed model".into());
    }
    Ok((rec, s))
}

/// Incremental aggregated asynchronous SGD: the table holds the latest
/// gradient of every worker and each arrival triggers an update.
pub struct Ia2sgd {
    pub gamma: f64,
    pub table: GradientTable,
    pub log: Vec<TableUpdate>,
    warm: bool,
}

impl Ia2sgd {
    pub fn new(gamma: f64) -> Self {
        Ia2sgd { gamma, table: GradientTable::new(0, 0), log: Vec::new(), warm: false }
    }

    pub fn max_delay(&self) -> u64 {
        self.log.iter().map(|u| u.max_delay).max().unwrap_or(0)
    }

    fn update(&mut self, msg: &GradientMsg, ctx: &mut Ctx<'_>) {
        ctx.apply(msg);
        let est = table_estimator(&self.table).expect("full table");
        self.log.push(TableUpdate {
            k: ctx.k(),
            time: ctx.now(),
            worker: msg.worker,
            harmonic: 1.0,
            max_delay: self.table.delays(ctx.k()).into_iter().max().unwrap_or(0),
            counts: self.table.counts(),
            prior_harmonic: None,
        });
        ctx.step(self.gamma, &est);
    }
}

impl Server for Ia2sgd {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.table = GradientTable::new(ctx.n(), ctx.dim());
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        self.table.overwrite(&msg);
        if self.warm {
            self.update(&msg, ctx);
            ctx.request(msg.worker);
            return;
        }
        if !self.table.is_full() {
            // Warmup: each worker reports once at x⁰ and then waits.
            ctx.store(&msg);
            return;
        }
        self.warm = true;
        self.update(&msg, ctx);
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
}

pub fn ia2sgd(setup: &Setup<'_>, gamma: f64) -> Result<(RunRecord, Ia2sgd)> {
    let mut s = Ia2sgd::new(gamma);
    let rec = setup.run(&mut s)?;
    Ok((rec, s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Collect,
    Update,
}

/// Two-phase table method: collect until the table is full (or, in the
/// universal variant, until the harmonic batch reaches a threshold), then
/// give every worker exactly one update while buffering its newer gradients.
pub struct Ringleader {
    pub gamma: f64,
    pub threshold: f64,
    pub table: GradientTable,
    pub log: Vec<TableUpdate>,
    /// Time of the last update of every completed round.
    pub round_ends: Vec<f64>,
    phase: Phase,
    pending: Vec<bool>,
    pending_count: usize,
}

impl Ringleader {
    pub fn new(gamma: f64, threshold: f64) -> Self {
        Ringleader {
            gamma,
            threshold: threshold.max(1.0),
            table: GradientTable::new(0, 0),
            log: Vec::new(),
            round_ends: Vec::new(),
            phase: Phase::Collect,
            pending: Vec::new(),
            pending_count: 0,
        }
    }

    pub fn max_delay(&self) -> u64 {
        self.log.iter().map(|u| u.max_delay).max().unwrap_or(0)
    }

    pub fn min_harmonic(&self) -> f64 {
        self.log.iter().map(|u| u.harmonic).fold(f64::INFINITY, f64::min)
    }

    fn update(&mut self, msg: &GradientMsg, ctx: &mut Ctx<'_>) {
        ctx.apply(msg);
        let est = table_estimator(&self.table).expect("full table");
        self.log.push(TableUpdate {
            k: ctx.k(),
            time: ctx.now(),
            worker: msg.worker,
            harmonic: self.table.harmonic(),
            max_delay: self.table.delays(ctx.k()).into_iter().max().unwrap_or(0),
            counts: self.table.counts(),
            prior_harmonic: None,
        });
        ctx.step(self.gamma, &est);
        ctx.request(msg.worker);
        self.pending[msg.worker] = false;
        self.pending_count -= 1;
        if self.pending_count == 0 {
            self.table.transfer_carry();
            self.phase = Phase::Collect;
            self.round_ends.push(ctx.now());
        }
    }
}

impl Server for Ringleader {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.table = GradientTable::new(ctx.n(), ctx.dim());
        self.pending = vec![false; ctx.n()];
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        match self.phase {
            Phase::Collect => {
                self.table.add(&msg);
                if self.table.is_full() && self.table.harmonic() >= self.threshold {
                    self.phase = Phase::Update;
                    self.pending.iter_mut().for_each(|p| *p = true);
                    self.pending_count = ctx.n();
                    self.update(&msg, ctx);
                } else {
                    ctx.store(&msg);
                    ctx.resume(msg.worker);
                }
            }
            Phase::Update => {
                if self.pending[msg.worker] {
                    self.table.add(&msg);
                    self.update(&msg, ctx);
                } else {
                    self.table.add_carry(&msg);
                    ctx.store(&msg);
                    ctx.resume(msg.worker);
                }
            }
        }
    }
}

pub fn ringleader(setup: &Setup<'_>, gamma: f64) -> Result<(RunRecord, Ringleader)> {
    let mut s = Ringleader::new(gamma, 1.0);
    let rec = setup.run(&mut s)?;
    Ok((rec, s))
}

pub fn ringleader_universal(setup: &Setup<'_>, gamma: f64, sigma2: f64, eps: f64) -> Result<(RunRecord, Ringleader)> {
    if !(sigma2 >= 0.0) || !(eps > 0.0) {
        return Err(ArenaError::invalid("need sigma2 >= 0 and eps > 0"));
    }
    let mut s = Ringleader::new(gamma, malenia_threshold(setup.model.n(), sigma2, eps));
    let rec = setup.run(&mut s)?;
    Ok((rec, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(worker: usize, k: u64, v: Vec<f64>) -> GradientMsg {
        GradientMsg { worker, computed_at_k: k, vector: v, task_counter: 0, started: 0.0, duration: 1.0 }
    }

    #[test]
    fn estimator_averages_per_entry() {
        let mut t = GradientTable::new(2, 2);
        t.add(&msg(0, 0, vec![1.0, 2.0]));
        t.add(&msg(0, 0, vec![1.0, 2.0]));
        t.add(&msg(1, 0, vec![1.0, 2.0]));
        assert_eq!(table_estimator(&t).unwrap(), vec![1.0, 2.0]);
        let mut e = GradientTable::new(2, 1);
        e.add(&msg(0, 0, vec![1.0]));
        assert!(table_estimator(&e).is_err());
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_batch(&[1, 3]), 1.5);
        assert_eq!(harmonic_batch(&[1, 1]), 1.0);
        assert_eq!(harmonic_batch(&[0, 4]), 0.0);
        assert!((harmonic_batch(&[2, 1]) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn purity_violation_detected() {
        let mut t = GradientTable::new(1, 1);
        t.add(&msg(0, 0, vec![1.0]));
        t.add(&msg(0, 1, vec![1.0]));
        assert_eq!(t.purity_violations, 1);
    }
}
