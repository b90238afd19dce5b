//! Homogeneous-data server algorithms.

use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::simcore::{Action, Ctx, GradientMsg, RunRecord, Server, Setup, TraceEvent};

/// SGD on a single worker.
pub struct Hero {
    pub gamma: f64,
    pub worker: usize,
}

impl Server for Hero {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        ctx.request(self.worker);
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        ctx.apply(&msg);
        ctx.step(self.gamma, &msg.vector);
        ctx.request(msg.worker);
    }
}

/// Fastest worker under the fixed model (lowest index on ties).
pub fn fastest_worker(setup: &Setup<'_>) -> Result<usize> {
    setup
        .model
        .speed_order()
        .map(|o| o[0])
        .ok_or_else(|| ArenaError::Unsupported("hero SGD needs the fixed model".into()))
}

pub fn hero_sgd(setup: &Setup<'_>, gamma: f64) -> Result<RunRecord> {
    let worker = fastest_worker(setup)?;
    setup.run(&mut Hero { gamma, worker })
}

/// Waits for one gradient from every worker, then steps with their mean.
pub struct Minibatch {
    pub gamma: f64,
    acc: Vec<f64>,
    count: usize,
}

impl Minibatch {
    pub fn new(gamma: f64) -> Self {
        Minibatch { gamma, acc: Vec::new(), count: 0 }
    }
}

impl Server for Minibatch {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.acc = vec![0.0; ctx.dim()];
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        add_into(&mut self.acc, &msg.vector);
        self.count += 1;
        if self.count < ctx.n() {
            ctx.store(&msg);
            return;
        }
        ctx.apply(&msg);
        let n = ctx.n() as f64;
        self.acc.iter_mut().for_each(|v| *v /= n);
        ctx.step(self.gamma, &self.acc);
        self.acc.iter_mut().for_each(|v| *v = 0.0);
        self.count = 0;
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
}

pub fn naive_minibatch(setup: &Setup<'_>, gamma: f64) -> Result<RunRecord> {
    setup.run(&mut Minibatch::new(gamma))
}

/// Applies every arrival immediately; optionally restricted to a subset.
pub struct NaiveAsgd {
    pub gamma: f64,
    pub workers: Option<Vec<usize>>,
}

impl Server for NaiveAsgd {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        let all: Vec<usize> = self.workers.clone().unwrap_or_else(|| (0..ctx.n()).collect());
        for i in all {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        ctx.apply(&msg);
        ctx.step(self.gamma, &msg.vector);
        ctx.request(msg.worker);
    }
}

pub fn naive_asgd(setup: &Setup<'_>, gamma: f64) -> Result<RunRecord> {
    setup.run(&mut NaiveAsgd { gamma, workers: None })
}

/// Collects `batch` gradients at the current point, steps, and restarts every
/// worker at the new point.
pub struct Rennala {
    pub gamma: f64,
    pub batch: u64,
    acc: Vec<f64>,
    count: u64,
}

impl Rennala {
    pub fn new(gamma: f64, batch: u64) -> Self {
        Rennala { gamma, batch: batch.max(1), acc: Vec::new(), count: 0 }
    }
}

impl Server for Rennala {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.acc = vec![0.0; ctx.dim()];
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        if msg.computed_at_k != ctx.k() {
            ctx.discard(&msg);
            ctx.request(msg.worker);
            return;
        }
        add_into(&mut self.acc, &msg.vector);
        self.count += 1;
        if self.count < self.batch {
            ctx.store(&msg);
            ctx.request(msg.worker);
            return;
        }
        ctx.apply(&msg);
        let b = self.batch as f64;
        self.acc.iter_mut().for_each(|v| *v /= b);
        ctx.step(self.gamma, &self.acc);
        self.acc.iter_mut().for_each(|v| *v = 0.0);
        self.count = 0;
        ctx.terminate_all();
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
}

pub fn rennala(setup: &Setup<'_>, gamma: f64, batch: u64) -> Result<RunRecord> {
    if batch == 0 {
        return Err(ArenaError::invalid("batch must be at least 1"));
    }
    setup.run(&mut Rennala::new(gamma, batch))
}

/// `argmin_m (m⁻¹ Σ_{i≤m} 1/τᵢ)⁻¹ (1 + ratio/m)` with `ratio = σ²/ε`; returns
/// the smallest minimizing `m` (1-based).
pub fn select_m_star(taus: &[f64], ratio: f64) -> Result<usize> {
    if taus.is_empty() {
        return Err(ArenaError::invalid("empty taus"));
    }
    let mut best = (f64::INFINITY, 0);
    let mut inv_sum = 0.0;
    for (i, &t) in taus.iter().enumerate() {
        inv_sum += 1.0 / t;
        let m = (i + 1) as f64;
        let obj = (m / inv_sum) * (1.0 + ratio / m);
        if obj < best.0 {
            best = (obj, i + 1);
        }
    }
    Ok(best.1)
}

pub fn naive_optimal_asgd(setup: &Setup<'_>, gamma: f64, sigma2: f64, eps: f64) -> Result<RunRecord> {
    let order = setup
        .model
        .speed_order()
        .ok_or_else(|| ArenaError::Unsupported("naive optimal ASGD needs the fixed model".into()))?;
    let taus = setup.model.sorted_taus().unwrap();
    let m = select_m_star(&taus, sigma2 / eps)?;
    setup.run(&mut NaiveAsgd { gamma, workers: Some(order[..m].to_vec()) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingmasterVariant {
    NoStops,
    WithStops,
}

/// Asynchronous SGD that ignores gradients with delay `≥ R`.
///
/// With stops, stale workers are terminated and restarted at the current
/// point right after every update, so no stale gradient ever arrives.
pub struct Ringmaster {
    pub gamma: f64,
    pub r: u64,
    pub variant: RingmasterVariant,
    pub virtual_delays: Vec<u64>,
}

impl Ringmaster {
    pub fn new(gamma: f64, r: u64, variant: RingmasterVariant) -> Self {
        Ringmaster { gamma, r: r.max(1), variant, virtual_delays: Vec::new() }
    }

    fn sweep(&self, ctx: &mut Ctx<'_>) {
        let k = ctx.k();
        for i in 0..ctx.n() {
            if ctx.is_busy(i) && k - ctx.worker(i).assigned_k >= self.r {
                ctx.terminate(i);
                ctx.request(i);
            }
        }
    }
}

impl Server for Ringmaster {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.virtual_delays = vec![0; ctx.n()];
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        let delay = ctx.k() - msg.computed_at_k;
        if delay < self.r {
            ctx.apply(&msg);
            ctx.step(self.gamma, &msg.vector);
            for (j, d) in self.virtual_delays.iter_mut().enumerate() {
                if j != msg.worker {
                    *d += 1;
                }
            }
            self.virtual_delays[msg.worker] = 0;
            ctx.request(msg.worker);
            if self.variant == RingmasterVariant::WithStops {
                self.sweep(ctx);
            }
        } else {
            ctx.discard(&msg);
            self.virtual_delays[msg.worker] = 0;
            ctx.request(msg.worker);
        }
    }
}

pub fn ringmaster(setup: &Setup<'_>, gamma: f64, r: u64, variant: RingmasterVariant) -> Result<RunRecord> {
    if r == 0 {
        return Err(ArenaError::invalid("R must be at least 1"));
    }
    setup.run(&mut Ringmaster::new(gamma, r, variant))
}

/// Replays the arrivals of a no-stops trace through the virtual-delay
/// recursion (`γᵏ = γ` when `δ̄ < R`, else 0) and checks that it reproduces
/// both the delays and the applied/discarded decisions.
pub fn ringmaster_adaptive_form_check(trace: &[TraceEvent], r: u64) -> Result<bool> {
    let n = trace.iter().map(|e| e.worker + 1).max().unwrap_or(0);
    let mut vdelay = vec![0u64; n];
    let mut applied = 0u64;
    for e in trace {
        match e.action {
            Action::Applied | Action::Discarded => {}
            Action::Requested => continue,
            other => {
                return Err(ArenaError::invalid(format!("unexpected {other:?} event in a no-stops trace")));
            }
        }
        if e.k_current != applied || e.k_computed_at > e.k_current {
            return Err(ArenaError::invalid("trace iterate counters are inconsistent"));
        }
        let real = e.k_current - e.k_computed_at;
        let i = e.worker;
        let zero_step = vdelay[i] >= r;
        if vdelay[i] != real || zero_step != (e.action == Action::Discarded) {
            return Ok(false);
        }
        if !zero_step {
            applied += 1;
            for (j, d) in vdelay.iter_mut().enumerate() {
                if j != i {
                    *d += 1;
                }
            }
        }
        vdelay[i] = 0;
    }
    Ok(true)
}

pub(crate) fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
