//! Deterministic discrete-event engine.
//!
//! Workers compute one task at a time; the server reacts to arrivals through
//! the [`Server`] callbacks and acts on the workers through [`Ctx`].
//! Communication is instantaneous: a request issued at time `t` makes the
//! worker busy from `t`. Simultaneous events are ordered by
//! `(time, worker, sequence)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::problem::Oracle;
use crate::timemodel::ComputeModel;

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// Squared gradient norm above which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// A finished task delivered to the server.
#[derive(Clone, Debug)]
pub struct GradientMsg {
    pub worker: usize,
    pub computed_at_k: u64,
    pub vector: Vec<f64>,
    pub task_counter: u64,
    pub started: f64,
    pub duration: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Applied,
    Buffered,
    Discarded,
    Terminated,
    Requested,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub worker: usize,
    pub k_computed_at: u64,
    pub k_current: u64,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub id: usize,
    /// Completion time of the task in flight; `None` when idle.
    pub busy_until: Option<f64>,
    pub assigned_k: u64,
    pub started_at: f64,
    pub cumulative_busy: f64,
    pub tasks_started: u64,
    pub tasks_terminated: u64,
    pub applied: u64,
    pub buffered: u64,
    pub discarded: u64,
    #[serde(skip)]
    pending_seq: Option<u64>,
    #[serde(skip)]
    snapshot: Arc<Vec<f64>>,
}

impl WorkerState {
    fn new(id: usize) -> Self {
        WorkerState {
            id,
            busy_until: None,
            assigned_k: 0,
            started_at: 0.0,
            cumulative_busy: 0.0,
            tasks_started: 0,
            tasks_terminated: 0,
            applied: 0,
            buffered: 0,
            discarded: 0,
            pending_seq: None,
            snapshot: Arc::new(Vec::new()),
        }
    }

    pub fn is_busy(&self) -> bool {
        self.pending_seq.is_some() || self.busy_until.is_some()
    }

    /// Terminated tasks plus gradients discarded on arrival.
    pub fn tasks_discarded(&self) -> u64 {
        self.tasks_terminated + self.discarded
    }
}

/// One point of the metric stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub k: u64,
    pub vtime: f64,
    pub grad_norm_sq: f64,
    pub subopt: f64,
    pub total_busy: f64,
    pub discarded: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Iterations,
    Threshold,
    TimeBudget,
    Diverged,
    Server,
}

/// When to stop a run; the first satisfied condition wins.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iters: Option<u64>,
    pub grad_norm_sq: Option<f64>,
    pub max_vtime: Option<f64>,
}

impl StopRule {
    pub fn iters(k: u64) -> Self {
        StopRule { max_iters: Some(k), ..Default::default() }
    }
    pub fn threshold(eps: f64, max_vtime: f64) -> Self {
        StopRule { grad_norm_sq: Some(eps), max_vtime: Some(max_vtime), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    pub trace: bool,
    pub event_cap: u64,
    /// Keep every `sample_stride`-th update in the metric stream (first and
    /// last always kept).
    pub sample_stride: u64,
}

impl RunOptions {
    pub fn seeded(seed: u64) -> Self {
        RunOptions { seed, trace: false, event_cap: DEFAULT_EVENT_CAP, sample_stride: 1 }
    }
    pub fn traced(seed: u64) -> Self {
        RunOptions { trace: true, ..Self::seeded(seed) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub samples: Vec<Sample>,
    pub trace: Vec<TraceEvent>,
    pub workers: Vec<WorkerState>,
    pub final_time: f64,
    pub final_k: u64,
    pub events: u64,
    pub stop_reason: StopReason,
    pub in_flight_at_stop: u64,
    pub x_final: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn total_busy(&self) -> f64 {
        self.workers.iter().map(|w| w.cumulative_busy).sum()
    }

    pub fn total_discarded(&self) -> u64 {
        self.workers.iter().map(WorkerState::tasks_discarded).sum()
    }

    pub fn reached_threshold(&self) -> bool {
        self.stop_reason == StopReason::Threshold
    }

    /// Per-worker conservation: started = applied + buffered + discarded +
    /// terminated + in flight.
    pub fn conservation_holds(&self) -> bool {
        self.workers.iter().all(|w| {
            let in_flight = u64::from(w.busy_until.is_some());
            w.tasks_started == w.applied + w.buffered + w.discarded + w.tasks_terminated + in_flight
        })
    }
}

/// Server-side algorithm driven by the engine.
pub trait Server {
    fn on_init(&mut self, ctx: &mut Ctx<'_>);
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>);
}

#[derive(Clone, Copy, Debug)]
struct EventKey {
    time: f64,
    worker: usize,
    seq: u64,
}

impl PartialEq for EventKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for EventKey {}
impl PartialOrd for EventKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for EventKey {
    // Reversed so that `BinaryHeap` pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.worker.cmp(&self.worker))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Engine state exposed to server callbacks.
pub struct Ctx<'a> {
    model: &'a ComputeModel,
    oracle: &'a dyn Oracle,
    opts: &'a RunOptions,
    stop: &'a StopRule,
    now: f64,
    k: u64,
    x: Vec<f64>,
    snapshot: Arc<Vec<f64>>,
    snapshot_k: Option<u64>,
    workers: Vec<WorkerState>,
    heap: BinaryHeap<EventKey>,
    seq: u64,
    samples: Vec<Sample>,
    last_sample_k: u64,
    trace: Vec<TraceEvent>,
    classified: u64,
    error: Option<ArenaError>,
    stop_reason: Option<StopReason>,
    warnings: Vec<String>,
}

impl<'a> Ctx<'a> {
    pub fn now(&self) -> f64 {
        self.now
    }
    pub fn k(&self) -> u64 {
        self.k
    }
    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn n(&self) -> usize {
        self.workers.len()
    }
    pub fn dim(&self) -> usize {
        self.x.len()
    }
    pub fn model(&self) -> &ComputeModel {
        self.model
    }
    pub fn worker(&self, i: usize) -> &WorkerState {
        &self.workers[i]
    }
    pub fn is_busy(&self, i: usize) -> bool {
        self.workers[i].pending_seq.is_some()
    }
    pub fn grad_norm_sq(&self) -> f64 {
        self.oracle.grad_norm_sq(&self.x)
    }

    fn fail(&mut self, err: ArenaError) {
        if self.error.is_none() {
            self.error = Some(err);
        }
    }

    fn record(&mut self, worker: usize, k_computed_at: u64, action: Action) {
        if self.opts.trace {
            self.trace.push(TraceEvent {
                time: self.now,
                worker,
                k_computed_at,
                k_current: self.k,
                action,
            });
        }
    }

    fn start_task(&mut self, worker: usize, snapshot: Arc<Vec<f64>>, assigned_k: u64) {
        let counter = self.workers[worker].tasks_started;
        let done = self.model.completion_time(worker, self.now, counter, self.opts.seed);
        let seq = self.seq;
        self.seq += 1;
        let w = &mut self.workers[worker];
        w.tasks_started += 1;
        w.assigned_k = assigned_k;
        w.started_at = self.now;
        w.snapshot = snapshot;
        w.pending_seq = Some(seq);
        w.busy_until = Some(done);
        if done.is_finite() {
            self.heap.push(EventKey { time: done, worker, seq });
        }
        self.record(worker, assigned_k, Action::Requested);
    }

    fn check_idle(&mut self, worker: usize) -> bool {
        if worker >= self.workers.len() {
            self.fail(ArenaError::invalid(format!("request for nonexistent worker {worker}")));
            return false;
        }
        if self.workers[worker].pending_seq.is_some() {
            self.fail(ArenaError::invalid(format!("request for busy worker {worker}")));
            return false;
        }
        true
    }

    /// Send the current model to an idle worker and start a task at it.
    pub fn request(&mut self, worker: usize) {
        if !self.check_idle(worker) {
            return;
        }
        if self.snapshot_k != Some(self.k) {
            self.snapshot = Arc::new(self.x.clone());
            self.snapshot_k = Some(self.k);
        }
        let snap = Arc::clone(&self.snapshot);
        self.start_task(worker, snap, self.k);
    }

    /// Start another task at the point the worker already holds.
    pub fn resume(&mut self, worker: usize) {
        if !self.check_idle(worker) {
            return;
        }
        let snap = Arc::clone(&self.workers[worker].snapshot);
        let k = self.workers[worker].assigned_k;
        self.start_task(worker, snap, k);
    }

    /// Cancel the worker's task in flight; partial busy time is credited.
    pub fn terminate(&mut self, worker: usize) {
        if worker >= self.workers.len() {
            self.fail(ArenaError::invalid(format!("terminate of nonexistent worker {worker}")));
            return;
        }
        let now = self.now;
        let w = &mut self.workers[worker];
        let k_at = w.assigned_k;
        if w.pending_seq.take().is_some() {
            w.busy_until = None;
            w.cumulative_busy += now - w.started_at;
            w.tasks_terminated += 1;
        }
        self.record(worker, k_at, Action::Terminated);
    }

    /// Terminate every busy worker.
    pub fn terminate_all(&mut self) {
        for i in 0..self.workers.len() {
            if self.workers[i].pending_seq.is_some() {
                self.terminate(i);
            }
        }
    }

    /// Mark an arrival as stored for a later update.
    pub fn store(&mut self, msg: &GradientMsg) {
        self.workers[msg.worker].buffered += 1;
        self.classified += 1;
        self.record(msg.worker, msg.computed_at_k, Action::Buffered);
    }

    pub fn discard(&mut self, msg: &GradientMsg) {
        self.workers[msg.worker].discarded += 1;
        self.classified += 1;
        self.record(msg.worker, msg.computed_at_k, Action::Discarded);
    }

    /// Mark an arrival as consumed by the update that follows it.
    pub fn apply(&mut self, msg: &GradientMsg) {
        self.workers[msg.worker].applied += 1;
        self.classified += 1;
        self.record(msg.worker, msg.computed_at_k, Action::Applied);
    }

    /// `x ← x − γ·direction`, `k ← k + 1`.
    pub fn step(&mut self, gamma: f64, direction: &[f64]) {
        for (xi, di) in self.x.iter_mut().zip(direction) {
            *xi -= gamma * di;
        }
        self.k += 1;
        self.after_update();
    }

    /// Advance `k` without moving `x` (allocation-only runs).
    pub fn tick(&mut self) {
        self.k += 1;
        self.after_update();
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Ask the engine to stop after the current callback.
    pub fn request_stop(&mut self) {
        self.stop_reason.get_or_insert(StopReason::Server);
    }

    fn total_busy(&self) -> f64 {
        self.workers
            .iter()
            .map(|w| {
                w.cumulative_busy + if w.pending_seq.is_some() { self.now - w.started_at } else { 0.0 }
            })
            .sum()
    }

    fn sample(&self, gns: f64) -> Sample {
        Sample {
            k: self.k,
            vtime: self.now,
            grad_norm_sq: gns,
            subopt: self.oracle.suboptimality(&self.x),
            total_busy: self.total_busy(),
            discarded: self.workers.iter().map(WorkerState::tasks_discarded).sum(),
        }
    }

    fn after_update(&mut self) {
        let gns = self.oracle.grad_norm_sq(&self.x);
        let mut reason = None;
        if self.stop.max_iters.is_some_and(|k| self.k >= k) {
            reason = Some(StopReason::Iterations);
        }
        if self.stop.grad_norm_sq.is_some_and(|eps| gns <= eps) {
            reason = Some(StopReason::Threshold);
        }
        if !gns.is_finite() || gns > DIVERGENCE_LIMIT {
            reason = Some(StopReason::Diverged);
        }
        let stride = self.opts.sample_stride.max(1);
        if reason.is_some() || self.k.is_multiple_of(stride) {
            let s = self.sample(gns);
            self.samples.push(s);
            self.last_sample_k = self.k;
        }
        if let Some(r) = reason {
            self.stop_reason.get_or_insert(r);
        }
    }
}

/// Everything a run needs apart from the server.
#[derive(Clone)]
pub struct Setup<'a> {
    pub model: &'a ComputeModel,
    pub oracle: &'a dyn Oracle,
    pub x0: Vec<f64>,
    pub stop: StopRule,
    pub opts: RunOptions,
}

impl<'a> Setup<'a> {
    pub fn new(model: &'a ComputeModel, oracle: &'a dyn Oracle, stop: StopRule, opts: RunOptions) -> Self {
        Setup { model, oracle, x0: vec![0.0; oracle.dim()], stop, opts }
    }

    pub fn run<S: Server + ?Sized>(&self, server: &mut S) -> Result<RunRecord> {
        run(self.model, self.oracle, server, self.x0.clone(), &self.stop, &self.opts)
    }
}

/// Run `server` on `model` until `stop` is met.
pub fn run<S: Server + ?Sized>(
    model: &ComputeModel,
    oracle: &dyn Oracle,
    server: &mut S,
    x0: Vec<f64>,
    stop: &StopRule,
    opts: &RunOptions,
) -> Result<RunRecord> {
    model.validate()?;
    if x0.len() != oracle.dim() {
        return Err(ArenaError::invalid("initial point has the wrong dimension"));
    }
    let n = model.n();
    let mut ctx = Ctx {
        model,
        oracle,
        opts,
        stop,
        now: 0.0,
        k: 0,
        snapshot: Arc::new(Vec::new()),
        snapshot_k: None,
        workers: (0..n).map(WorkerState::new).collect(),
        heap: BinaryHeap::new(),
        seq: 0,
        samples: Vec::new(),
        last_sample_k: 0,
        trace: Vec::new(),
        classified: 0,
        error: None,
        stop_reason: None,
        warnings: Vec::new(),
        x: x0,
    };
    let s0 = ctx.sample(oracle.grad_norm_sq(&ctx.x));
    ctx.samples.push(s0);
    server.on_init(&mut ctx);
    if let Some(e) = ctx.error.take() {
        return Err(e);
    }
    let mut events = 0u64;
    let mut stalled = false;
    while ctx.stop_reason.is_none() {
        let Some(ev) = ctx.heap.pop() else {
            stalled = true;
            break;
        };
        if ctx.workers[ev.worker].pending_seq != Some(ev.seq) {
            continue;
        }
        if stop.max_vtime.is_some_and(|t| ev.time > t) {
            ctx.heap.push(ev);
            ctx.now = stop.max_vtime.unwrap();
            ctx.stop_reason = Some(StopReason::TimeBudget);
            break;
        }
        events += 1;
        if events > opts.event_cap {
            ctx.heap.push(ev);
            let record = finish(ctx, events - 1, StopReason::TimeBudget);
            return Err(ArenaError::BudgetExceeded { cap: opts.event_cap, partial: Box::new(record) });
        }
        debug_assert!(ev.time >= ctx.now);
        ctx.now = ev.time;
        let w = &mut ctx.workers[ev.worker];
        w.pending_seq = None;
        w.busy_until = None;
        let duration = ev.time - w.started_at;
        w.cumulative_busy += duration;
        let snap = Arc::clone(&w.snapshot);
        let msg_k = w.assigned_k;
        let counter = w.tasks_started - 1;
        let started = w.started_at;
        let mut g = vec![0.0; snap.len()];
        oracle.local_gradient(ev.worker, &snap, counter, opts.seed, &mut g);
        let msg = GradientMsg {
            worker: ev.worker,
            computed_at_k: msg_k,
            vector: g,
            task_counter: counter,
            started,
            duration,
        };
        let before = ctx.classified;
        server.on_arrival(msg, &mut ctx);
        if let Some(e) = ctx.error.take() {
            return Err(e);
        }
        if ctx.classified != before + 1 {
            return Err(ArenaError::Verification(format!(
                "arrival from worker {} classified {} times",
                ev.worker,
                ctx.classified - before
            )));
        }
    }
    if stalled {
        let record = finish(ctx, events, StopReason::TimeBudget);
        return Err(ArenaError::Stalled { partial: Box::new(record) });
    }
    let reason = ctx.stop_reason.unwrap();
    Ok(finish(ctx, events, reason))
}

fn finish(mut ctx: Ctx<'_>, events: u64, reason: StopReason) -> RunRecord {
    if ctx.samples.last().map(|s| (s.k, s.vtime)) != Some((ctx.k, ctx.now)) {
        let s = ctx.sample(ctx.oracle.grad_norm_sq(&ctx.x));
        if ctx.samples.last().is_some_and(|l| l.k == s.k) {
            ctx.samples.pop();
        }
        ctx.samples.push(s);
    }
    let now = ctx.now;
    let mut in_flight = 0;
    for w in ctx.workers.iter_mut() {
        if w.pending_seq.is_some() {
            in_flight += 1;
            w.cumulative_busy += now - w.started_at;
            w.started_at = now;
        }
    }
    RunRecord {
        samples: ctx.samples,
        trace: ctx.trace,
        workers: ctx.workers,
        final_time: now,
        final_k: ctx.k,
        events,
        stop_reason: reason,
        in_flight_at_stop: in_flight,
        x_final: ctx.x,
        warnings: ctx.warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::NullOracle;

    /// Applies every arrival and re-requests the worker.
    struct Echo;
    impl Server for Echo {
        fn on_init(&mut self, ctx: &mut Ctx<'_>) {
            for i in 0..ctx.n() {
                ctx.request(i);
            }
        }
        fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
            ctx.apply(&msg);
            ctx.tick();
            ctx.request(msg.worker);
        }
    }

    #[test]
    fn single_worker_completion_times() {
        let model = ComputeModel::Fixed { tau: vec![1.0] };
        let rec = run(&model, &NullOracle, &mut Echo, vec![], &StopRule::iters(5), &RunOptions::seeded(0)).unwrap();
        let times: Vec<f64> = rec.samples.iter().skip(1).map(|s| s.vtime).collect();
        assert_eq!(times, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn ties_resolve_by_worker_id() {
        let model = ComputeModel::Fixed { tau: vec![1.0, 1.0] };
        let rec = run(&model, &NullOracle, &mut Echo, vec![], &StopRule::iters(2), &RunOptions::traced(0)).unwrap();
        let applied: Vec<usize> =
            rec.trace.iter().filter(|e| e.action == Action::Applied).map(|e| e.worker).collect();
        assert_eq!(applied, vec![0, 1]);
    }

    struct BadRequest;
    impl Server for BadRequest {
        fn on_init(&mut self, ctx: &mut Ctx<'_>) {
            ctx.request(5);
        }
        fn on_arrival(&mut self, _: GradientMsg, _: &mut Ctx<'_>) {}
    }

    #[test]
    fn nonexistent_worker_is_an_error() {
        let model = ComputeModel::Fixed { tau: vec![1.0] };
        let err = run(&model, &NullOracle, &mut BadRequest, vec![], &StopRule::iters(1), &RunOptions::seeded(0));
        assert!(matches!(err, Err(ArenaError::InvalidArgument(_))));
    }
}
