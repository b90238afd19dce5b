//! Bandit task allocation: proxy loss, the recursive allocation solver, LCB
//! scores, the ATA loop, baseline policies, regret accounting, and the
//! optimizer wrappers that consume allocations.

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::homogeneous::add_into;
use crate::par;
use crate::problem::NullOracle;
use crate::rng::{self, tag};
use crate::simcore::{Ctx, GradientMsg, RunOptions, Server, StopRule};
use crate::timemodel::{ComputeModel, Distribution};

pub type Allocation = Vec<u64>;

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(ArenaError::invalid(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// `maxᵢ aᵢ·λᵢ`.
pub fn proxy_loss(a: &[u64], lam: &[f64]) -> Result<f64> {
    check_len(a.len(), lam.len())?;
    Ok(loss_unchecked(a, lam))
}

fn loss_unchecked(a: &[u64], lam: &[f64]) -> f64 {
    a.iter().zip(lam).map(|(&ai, &l)| if ai == 0 { 0.0 } else { ai as f64 * l }).fold(0.0, f64::max)
}

/// `|argmaxᵢ aᵢsᵢ|` over the arms with `aᵢ > 0`.
pub fn argmax_cardinality(a: &[u64], s: &[f64]) -> usize {
    let loss = loss_unchecked(a, s);
    a.iter().zip(s).filter(|(&ai, &si)| ai > 0 && ai as f64 * si == loss).count()
}

/// Split `b` as evenly as possible over `arms`, the first ones getting the
/// remainder.
fn spread(n: usize, arms: &[usize], b: u64) -> Allocation {
    let z = arms.len() as u64;
    let mut a = vec![0; n];
    for (j, &i) in arms.iter().enumerate() {
        a[i] = b / z + u64::from((j as u64) < b % z);
    }
    a
}

/// Allocation of `b` tasks minimizing `maxᵢ aᵢsᵢ`, and among minimizers the
/// number of arms attaining the maximum.
///
/// Arms with score 0 receive the whole budget, spread uniformly. Otherwise the
/// allocation is built one task at a time over the scores sorted ascending
/// (stable): each task goes to a candidate among the allocated prefix and the
/// first unallocated arm that minimizes the loss, then the argmax
/// cardinality, then the sorted position.
pub fn ras(scores: &[f64], b: u64) -> Result<Allocation> {
    if b < 1 {
        return Err(ArenaError::invalid("B must be at least 1"));
    }
    let n = scores.len();
    if n == 0 {
        return Err(ArenaError::invalid("no arms"));
    }
    if scores.iter().any(|&s| !(s >= 0.0)) {
        return Err(ArenaError::invalid("scores must be nonnegative"));
    }
    let zeros: Vec<usize> = (0..n).filter(|&i| scores[i] == 0.0).collect();
    if !zeros.is_empty() {
        return Ok(spread(n, &zeros, b));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let ss: Vec<f64> = order.iter().map(|&i| scores[i]).collect();

    let mut a = vec![0u64; n];
    a[0] = 1;
    let mut cur_max = ss[0];
    let mut count_max = 1usize;
    let mut first_zero = 1usize;
    for _ in 1..b {
        let r = first_zero.min(n - 1);
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for j in 0..=r {
            let v = (a[j] + 1) as f64 * ss[j];
            let (loss, card) = if v > cur_max {
                (v, 1)
            } else if v == cur_max {
                (cur_max, count_max + 1)
            } else {
                (cur_max, count_max)
            };
            let better = match best {
                None => true,
                Some((bl, bc, _, _)) => loss < bl || (loss == bl && card < bc),
            };
            if better {
                best = Some((loss, card, j, v));
            }
        }
        let (_, _, j, v) = best.unwrap();
        a[j] += 1;
        if v > cur_max {
            cur_max = v;
            count_max = 1;
        } else if v == cur_max {
            count_max += 1;
        }
        if j == first_zero {
            first_zero += 1;
        }
    }
    let mut out = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        out[i] = a[pos];
    }
    Ok(out)
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exhaustive search over all allocations: `(allocation, loss, cardinality)`
/// with minimal loss and, among those, minimal argmax cardinality.
pub fn brute_force_alloc(scores: &[f64], b: u64) -> Result<(Allocation, f64, usize)> {
    if b < 1 {
        return Err(ArenaError::invalid("B must be at least 1"));
    }
    let n = scores.len();
    if n == 0 {
        return Err(ArenaError::invalid("no arms"));
    }
    if binomial(n as u64 + b - 1, b) > 1e6 {
        return Err(ArenaError::invalid("combinatorial budget exceeded"));
    }
    let mut a = vec![0u64; n];
    let mut best: Option<(Allocation, f64, usize)> = None;
    fn rec(i: usize, left: u64, a: &mut Vec<u64>, s: &[f64], best: &mut Option<(Allocation, f64, usize)>) {
        if i + 1 == a.len() {
            a[i] = left;
            let loss = loss_unchecked(a, s);
            let card = argmax_cardinality(a, s);
            let better = match best {
                None => true,
                Some((_, bl, bc)) => loss < *bl || (loss == *bl && card < *bc),
            };
            if better {
                *best = Some((a.clone(), loss, card));
            }
            return;
        }
        for v in 0..=left {
            a[i] = v;
            rec(i + 1, left - v, a, s, best);
        }
    }
    rec(0, b, &mut a, scores, &mut best);
    Ok(best.unwrap())
}

/// Smallest `k ≥ 1` per arm with `(āᵢ + k)μᵢ > ℓ(ā, μ)`.
pub fn k_indices(abar: &[u64], mu: &[f64]) -> Vec<u64> {
    let loss = loss_unchecked(abar, mu);
    abar.iter()
        .zip(mu)
        .map(|(&a, &m)| {
            let mut k = 1;
            while (a + k) as f64 * m <= loss {
                k += 1;
            }
            k
        })
        .collect()
}

/// `2α(√(L/K) + L/K)` for a log term `L`; infinite when `K = 0`.
pub fn conf_with_log(alpha: f64, count: u64, log_term: f64) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    let r = log_term / count as f64;
    2.0 * alpha * (r.sqrt() + r)
}

/// Confidence radius at round `k` with `L = ln(2k²)`.
pub fn conf_bound(alpha: f64, count: u64, k: u64) -> Result<f64> {
    if k < 1 || !(alpha >= 0.0) {
        return Err(ArenaError::invalid("need k >= 1 and alpha >= 0"));
    }
    Ok(conf_with_log(alpha, count, round_log(k)))
}

fn round_log(k: u64) -> f64 {
    (2.0 * (k as f64) * (k as f64)).ln()
}

/// `(μ̂ − conf)₊`.
pub fn lcb_alpha(mean: f64, alpha: f64, count: u64, log_term: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    (mean - conf_with_log(alpha, count, log_term)).max(0.0)
}

/// `μ̂[1 − 2η(√(L/K) + L/K)]₊`.
pub fn lcb_eta(mean: f64, eta: f64, count: u64, log_term: f64) -> f64 {
    if count == 0 {
        return 0.0;
    }
    (mean * (1.0 - conf_with_log(eta, count, log_term))).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LcbMode {
    /// Orlicz-norm bound `α`.
    Alpha(f64),
    /// Relative bound `η` (empirical variant).
    Eta(f64),
}

/// Per-arm counts `Kᵢ`, totals `Tᵢ`, and the round counter `k` (from 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LcbState {
    pub counts: Vec<u64>,
    pub totals: Vec<f64>,
    pub round: u64,
    pub mode: LcbMode,
}

impl LcbState {
    pub fn new(n: usize, mode: LcbMode) -> Self {
        LcbState { counts: vec![0; n], totals: vec![0.0; n], round: 1, mode }
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn mean(&self, i: usize) -> Option<f64> {
        (self.counts[i] > 0).then(|| self.totals[i] / self.counts[i] as f64)
    }

    /// Record `a[i]` observations summing to `sums[i]`; arms with `a[i] = 0`
    /// are untouched.
    pub fn observe(&mut self, a: &[u64], sums: &[f64]) -> Result<()> {
        check_len(a.len(), self.n())?;
        check_len(sums.len(), self.n())?;
        for i in 0..self.n() {
            if a[i] > 0 {
                self.counts[i] += a[i];
                self.totals[i] += sums[i];
            }
        }
        self.round += 1;
        Ok(())
    }
}

/// Lower confidence scores for the current round.
pub fn lcb(state: &LcbState) -> Vec<f64> {
    let log_term = round_log(state.round);
    (0..state.n())
        .map(|i| {
            let Some(m) = state.mean(i) else { return 0.0 };
            match state.mode {
                LcbMode::Alpha(alpha) => lcb_alpha(m, alpha, state.counts[i], log_term),
                LcbMode::Eta(eta) => lcb_eta(m, eta, state.counts[i], log_term),
            }
        })
        .collect()
}

/// Result of one ATA round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub allocation: Allocation,
    pub sums: Vec<f64>,
    pub cost: f64,
}

/// One ATA round: allocate by RAS on the LCB scores, observe `a[i]`
/// durations from every allocated arm, and update the state.
pub fn ata_round<F>(state: &mut LcbState, b: u64, mut observe: F) -> Result<RoundOutcome>
where
    F: FnMut(usize, u64) -> Vec<f64>,
{
    let a = ras(&lcb(state), b)?;
    let mut sums = vec![0.0; state.n()];
    for i in 0..state.n() {
        if a[i] > 0 {
            let xs = observe(i, a[i]);
            if xs.len() as u64 != a[i] {
                return Err(ArenaError::invalid(format!(
                    "arm {i}: expected {} observations, got {}",
                    a[i],
                    xs.len()
                )));
            }
            sums[i] = xs.iter().sum();
        }
    }
    state.observe(&a, &sums)?;
    let cost = a.iter().zip(&sums).filter(|(&ai, _)| ai > 0).map(|(_, &s)| s).fold(0.0, f64::max);
    Ok(RoundOutcome { allocation: a, sums, cost })
}

/// Optimal fixed allocation for known means.
pub fn ofta(mu: &[f64], b: u64) -> Result<Allocation> {
    ras(mu, b)
}

/// Uniform allocation; when `n > B`, `B` distinct workers drawn from the
/// `(seed, round)` stream get one task each.
pub fn uta(n: usize, b: u64, seed: u64, round: u64) -> Allocation {
    if b as usize >= n {
        let all: Vec<usize> = (0..n).collect();
        return spread(n, &all, b);
    }
    let mut rng = rng::stream(seed, tag::UNIFORM_ALLOC, 0, round);
    let mut a = vec![0; n];
    for i in sample_indices(&mut rng, n, b as usize) {
        a[i] = 1;
    }
    a
}

/// `max_{i ∈ supp(a)} Σ_{u ≤ aᵢ} Xᵢᵘ`.
pub fn realized_cost(a: &[u64], durations: &[Vec<f64>]) -> Result<f64> {
    check_len(a.len(), durations.len())?;
    let mut cost = 0.0f64;
    for (i, (&ai, xs)) in a.iter().zip(durations).enumerate() {
        if xs.len() as u64 != ai {
            return Err(ArenaError::invalid(format!("arm {i}: {} durations for {ai} tasks", xs.len())));
        }
        if ai > 0 {
            cost = cost.max(xs.iter().sum());
        }
    }
    Ok(cost)
}

const MC_CHUNK: usize = 1000;

/// Monte-Carlo estimate of `E[C(a)]` with its standard error.
pub fn expected_cost_mc(a: &[u64], dists: &[Distribution], trials: usize, seed: u64) -> Result<(f64, f64)> {
    check_len(a.len(), dists.len())?;
    if trials < 1000 {
        return Err(ArenaError::invalid("need at least 1000 trials"));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let parts = par::map_range(chunks, |c| {
        let lo = c * MC_CHUNK;
        let hi = (lo + MC_CHUNK).min(trials);
        let mut s = 0.0;
        let mut s2 = 0.0;
        for t in lo..hi {
            let mut rng = rng::stream(seed, tag::MONTE_CARLO, t as u64, 0);
            let mut cost = 0.0f64;
            for (i, &ai) in a.iter().enumerate() {
                let sum: f64 = (0..ai).map(|_| dists[i].sample(&mut rng)).sum();
                if ai > 0 {
                    cost = cost.max(sum);
                }
            }
            s += cost;
            s2 += cost * cost;
        }
        (s, s2)
    });
    let (s, s2) = parts.into_iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let t = trials as f64;
    let mean = s / t;
    let var = ((s2 / t - mean * mean) * t / (t - 1.0)).max(0.0);
    Ok((mean, (var / t).sqrt()))
}

/// Cumulative proxy-loss regret against the optimal fixed allocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    pub mu: Vec<f64>,
    pub optimal: Allocation,
    pub optimal_loss: f64,
    pub losses: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub costs: Vec<f64>,
    pub cum_cost: f64,
}

impl RegretLedger {
    pub fn new(mu: Vec<f64>, b: u64) -> Result<Self> {
        let optimal = ras(&mu, b)?;
        let optimal_loss = loss_unchecked(&optimal, &mu);
        Ok(RegretLedger {
            mu,
            optimal,
            optimal_loss,
            losses: Vec::new(),
            cum_regret: Vec::new(),
            costs: Vec::new(),
            cum_cost: 0.0,
        })
    }

    pub fn record(&mut self, a: &[u64], cost: f64) {
        let loss = loss_unchecked(a, &self.mu);
        let prev = self.cum_regret.last().copied().unwrap_or(0.0);
        self.losses.push(loss);
        self.cum_regret.push(prev + loss - self.optimal_loss);
        self.costs.push(cost);
        self.cum_cost += cost;
    }

    pub fn rounds(&self) -> usize {
        self.losses.len()
    }

    /// `K·ℓ(ā, μ)` after `K` rounds.
    pub fn optimal_total(&self) -> f64 {
        self.rounds() as f64 * self.optimal_loss
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub cumulative: Vec<f64>,
    /// `R_K / K`.
    pub averaged: Vec<f64>,
    /// `R_K / ln K` (undefined at `K = 1`).
    pub per_log: Vec<f64>,
}

pub fn regret_report(ledger: &RegretLedger) -> RegretReport {
    let cumulative = ledger.cum_regret.clone();
    let averaged = cumulative.iter().enumerate().map(|(k, r)| r / (k + 1) as f64).collect();
    let per_log = cumulative
        .iter()
        .enumerate()
        .map(|(k, r)| if k == 0 { f64::NAN } else { r / ((k + 1) as f64).ln() })
        .collect();
    RegretReport { cumulative, averaged, per_log }
}

/// Allocation-only ATA experiment on stochastic arms.
pub fn run_ata_regret(dists: &[Distribution], b: u64, mode: LcbMode, rounds: usize, seed: u64) -> Result<RegretLedger> {
    let mu: Vec<f64> = dists.iter().map(Distribution::mean).collect();
    let mut ledger = RegretLedger::new(mu, b)?;
    let mut state = LcbState::new(dists.len(), mode);
    let mut draws = vec![0u64; dists.len()];
    for _ in 0..rounds {
        let out = ata_round(&mut state, b, |i, m| {
            (0..m)
                .map(|_| {
                    let mut rng = rng::stream(seed, tag::ARMS, i as u64, draws[i]);
                    draws[i] += 1;
                    dists[i].sample(&mut rng)
                })
                .collect()
        })?;
        ledger.record(&out.allocation, out.cost);
    }
    Ok(ledger)
}

/// Outcome of one greedy round.
#[derive(Clone, Debug, PartialEq)]
pub struct GtaOutcome {
    pub cost: f64,
    pub counts: Vec<u64>,
    pub wasted: f64,
}

struct GtaRound {
    b: u64,
    collected: u64,
    counts: Vec<u64>,
    completed_work: f64,
}

impl Server for GtaRound {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.counts = vec![0; ctx.n()];
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        ctx.apply(&msg);
        self.counts[msg.worker] += 1;
        self.collected += 1;
        self.completed_work += msg.duration;
        if self.collected >= self.b {
            ctx.terminate_all();
            ctx.request_stop();
        } else {
            ctx.request(msg.worker);
        }
    }
}

/// Greedy allocation: every worker computes until `B` tasks are done; the
/// remaining tasks in flight are terminated.
pub fn gta(model: &ComputeModel, b: u64, seed: u64) -> Result<GtaOutcome> {
    if b < 1 {
        return Err(ArenaError::invalid("B must be at least 1"));
    }
    let mut s = GtaRound { b, collected: 0, counts: Vec::new(), completed_work: 0.0 };
    let rec = crate::simcore::run(model, &NullOracle, &mut s, Vec::new(), &StopRule::default(), &RunOptions::seeded(seed))?;
    Ok(GtaOutcome { cost: rec.final_time, counts: s.counts, wasted: rec.total_busy() - s.completed_work })
}

/// How an allocation-driven optimizer picks its next allocation.
#[derive(Clone, Debug, PartialEq)]
pub enum AllocPolicy {
    Ata(LcbState),
    Fixed(Allocation),
    Uniform { seed: u64 },
}

impl AllocPolicy {
    fn next(&self, n: usize, b: u64, round: u64) -> Allocation {
        match self {
            AllocPolicy::Ata(state) => ras(&lcb(state), b).expect("valid scores"),
            AllocPolicy::Fixed(a) => a.clone(),
            AllocPolicy::Uniform { seed } => uta(n, b, *seed, round),
        }
    }

    fn feedback(&mut self, a: &[u64], sums: &[f64]) {
        if let AllocPolicy::Ata(state) = self {
            state.observe(a, sums).expect("shapes match");
        }
    }
}

/// Round bookkeeping shared by the two allocation-driven optimizers.
struct RoundState {
    a: Allocation,
    left: Vec<u64>,
    sums: Vec<f64>,
    collected: u64,
    start: f64,
    round: u64,
}

impl RoundState {
    fn begin(policy: &AllocPolicy, ctx: &mut Ctx<'_>, b: u64, round: u64) -> Self {
        let n = ctx.n();
        let a = policy.next(n, b, round);
        let mut left = a.clone();
        for (i, l) in left.iter_mut().enumerate() {
            if *l > 0 {
                *l -= 1;
                ctx.request(i);
            }
        }
        RoundState { a, left, sums: vec![0.0; n], collected: 0, start: ctx.now(), round }
    }
}

/// Minibatch SGD whose batch of `B` gradients is split across workers by an
/// allocation policy (SGD-ATA, OFTA, UTA).
pub struct SgdAlloc {
    pub gamma: f64,
    pub b: u64,
    pub policy: AllocPolicy,
    pub ledger: Option<RegretLedger>,
    /// Cumulative regret after each update, when a ledger is kept.
    pub regret_at_k: Vec<(u64, f64)>,
    acc: Vec<f64>,
    state: Option<RoundState>,
}

impl SgdAlloc {
    pub fn new(gamma: f64, b: u64, policy: AllocPolicy, mu: Option<Vec<f64>>) -> Result<Self> {
        let ledger = mu.map(|m| RegretLedger::new(m, b)).transpose()?;
        Ok(SgdAlloc { gamma, b, policy, ledger, regret_at_k: Vec::new(), acc: Vec::new(), state: None })
    }
}

impl Server for SgdAlloc {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.acc = vec![0.0; ctx.dim()];
        self.state = Some(RoundState::begin(&self.policy, ctx, self.b, 1));
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        let st = self.state.as_mut().unwrap();
        let i = msg.worker;
        add_into(&mut self.acc, &msg.vector);
        st.sums[i] += msg.duration;
        st.collected += 1;
        if st.left[i] > 0 {
            st.left[i] -= 1;
            ctx.request(i);
        }
        if st.collected < self.b {
            ctx.store(&msg);
            return;
        }
        ctx.apply(&msg);
        let b = self.b as f64;
        self.acc.iter_mut().for_each(|v| *v /= b);
        ctx.step(self.gamma, &self.acc);
        self.acc.iter_mut().for_each(|v| *v = 0.0);
        let cost = ctx.now() - st.start;
        self.policy.feedback(&st.a, &st.sums);
        if let Some(l) = self.ledger.as_mut() {
            l.record(&st.a, cost);
            self.regret_at_k.push((ctx.k(), *l.cum_regret.last().unwrap()));
        }
        let next = st.round + 1;
        self.state = Some(RoundState::begin(&self.policy, ctx, self.b, next));
    }
}

/// Asynchronous SGD within each allocation round: every arrival is applied
/// and the worker continues while its allocation lasts (ASGD-ATA).
pub struct AsgdAlloc {
    pub gamma: f64,
    pub b: u64,
    pub policy: AllocPolicy,
    pub ledger: Option<RegretLedger>,
    pub regret_at_k: Vec<(u64, f64)>,
    state: Option<RoundState>,
}

impl AsgdAlloc {
    pub fn new(gamma: f64, b: u64, policy: AllocPolicy, mu: Option<Vec<f64>>) -> Result<Self> {
        let ledger = mu.map(|m| RegretLedger::new(m, b)).transpose()?;
        Ok(AsgdAlloc { gamma, b, policy, ledger, regret_at_k: Vec::new(), state: None })
    }
}

impl Server for AsgdAlloc {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        self.state = Some(RoundState::begin(&self.policy, ctx, self.b, 1));
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        let st = self.state.as_mut().unwrap();
        let i = msg.worker;
        ctx.apply(&msg);
        ctx.step(self.gamma, &msg.vector);
        st.sums[i] += msg.duration;
        st.collected += 1;
        if st.left[i] > 0 {
            st.left[i] -= 1;
            ctx.request(i);
        }
        if st.collected < self.b {
            return;
        }
        let cost = ctx.now() - st.start;
        self.policy.feedback(&st.a, &st.sums);
        if let Some(l) = self.ledger.as_mut() {
            l.record(&st.a, cost);
            self.regret_at_k.push((ctx.k(), *l.cum_regret.last().unwrap()));
        }
        let next = st.round + 1;
        self.state = Some(RoundState::begin(&self.policy, ctx, self.b, next));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proxy_loss_examples() {
        assert_eq!(proxy_loss(&[2, 1], &[3.0, 5.0]).unwrap(), 6.0);
        assert_eq!(proxy_loss(&[0, 1], &[7.0, 2.0]).unwrap(), 2.0);
        assert_eq!(proxy_loss(&[4, 1], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(proxy_loss(&[1], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ras_small_cases() {
        assert_eq!(ras(&[5.0, 3.0, 4.0], 1).unwrap(), vec![0, 1, 0]);
        assert_eq!(ras(&[1.0, 2.0, 3.0], 3).unwrap(), vec![2, 1, 0]);
        assert_eq!(ras(&[1.0, 2.0], 2).unwrap(), vec![2, 0]);
        assert!(ras(&[1.0], 0).is_err());
    }

    #[test]
    fn zero_scores_spread_uniformly() {
        assert_eq!(ras(&[0.0, 1.0, 0.0, 0.0], 5).unwrap(), vec![2, 0, 2, 1]);
    }

    #[test]
    fn conf_examples() {
        assert_eq!(conf_bound(1.0, 0, 1).unwrap(), f64::INFINITY);
        let c = conf_bound(1.0, 1, 1).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((c - 2.0 * (ln2.sqrt() + ln2)).abs() < 1e-12);
    }

    #[test]
    fn uta_examples() {
        assert_eq!(uta(4, 8, 0, 1), vec![2, 2, 2, 2]);
        let a = uta(5, 2, 9, 3);
        assert_eq!(a.iter().sum::<u64>(), 2);
        assert!(a.iter().all(|&v| v <= 1));
    }
}
