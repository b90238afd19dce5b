//! Closed-form bounds and parameter rules.
//!
//! Order-level quantities (`closed_form_T`) drop constants and are only meant
//! for ranking comparisons.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{ArenaError, Result};
use crate::timemodel::PowerFn;

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(ArenaError::invalid("empty taus"));
    }
    if taus.iter().any(|&t| !(t > 0.0)) {
        return Err(ArenaError::invalid("taus must be positive"));
    }
    if taus.windows(2).any(|w| w[1] < w[0]) {
        return Err(ArenaError::invalid("taus must be sorted ascending"));
    }
    Ok(())
}

/// Harmonic means `(m⁻¹ Σ_{i≤m} 1/τᵢ)⁻¹` for every prefix `m = 1..n`.
fn prefix_harmonic(taus: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    let mut inv = 0.0;
    taus.iter().enumerate().map(move |(i, &t)| {
        inv += 1.0 / t;
        let m = (i + 1) as f64;
        (m, m / inv)
    })
}

/// `2·min_m (m⁻¹ Σ_{i≤m} 1/τᵢ)⁻¹ (1 + R/m)`: time within which any `R`
/// consecutive updates of Ringmaster happen.
pub fn t_of_r(taus: &[f64], r: u64) -> Result<f64> {
    check_taus(taus)?;
    if r == 0 {
        return Err(ArenaError::invalid("R must be at least 1"));
    }
    let r = r as f64;
    Ok(2.0 * prefix_harmonic(taus).map(|(m, h)| h * (1.0 + r / m)).fold(f64::INFINITY, f64::min))
}

/// `max{1, ⌈σ²/ε⌉}`.
pub fn optimal_r(sigma2: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0) || !(sigma2 >= 0.0) {
        return Err(ArenaError::invalid("need eps > 0 and sigma2 >= 0"));
    }
    Ok(((sigma2 / eps).ceil() as u64).max(1))
}

/// Rennala batch size; same rule as [`optimal_r`].
pub fn rennala_b(sigma2: f64, eps: f64) -> Result<u64> {
    optimal_r(sigma2, eps)
}

/// `⌈8RLΔ/ε + 16σ²LΔ/ε²⌉`.
pub fn ringmaster_k(r: u64, l: f64, delta: f64, sigma2: f64, eps: f64) -> u64 {
    (8.0 * r as f64 * l * delta / eps + 16.0 * sigma2 * l * delta / (eps * eps)).ceil() as u64
}

/// `⌈32nLΔ/ε + 40LΔσ²/(Bε²)⌉`.
pub fn ringleader_k(n: usize, l: f64, delta: f64, sigma2: f64, eps: f64, b: f64) -> u64 {
    (32.0 * n as f64 * l * delta / eps + 40.0 * l * delta * sigma2 / (b * eps * eps)).ceil() as u64
}

/// `⌈48LΔ/ε⌉`, the iteration count paired with the `Tᵏ` sequence.
pub fn k_bar(l: f64, delta: f64, eps: f64) -> u64 {
    (48.0 * l * delta / eps).ceil() as u64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepsizeRule {
    /// `min{1/(2RL), ε/(4Lσ²)}`.
    Ringmaster { r: u64 },
    /// `min{1/(8nL), εB/(10Lσ²)}`.
    Ringleader { n: usize, b: f64 },
}

pub fn stepsize(rule: StepsizeRule, l: f64, sigma2: f64, eps: f64) -> f64 {
    let (det, stoch) = match rule {
        StepsizeRule::Ringmaster { r } => (1.0 / (2.0 * r as f64 * l), eps / (4.0 * l * sigma2)),
        StepsizeRule::Ringleader { n, b } => (1.0 / (8.0 * n as f64 * l), eps * b / (10.0 * l * sigma2)),
    };
    if sigma2 == 0.0 {
        det
    } else {
        det.min(stoch)
    }
}

/// `min{T : Σᵢ ⌊¼∫_{T0}^T pᵢ⌋ ≥ R}`; `f64::INFINITY` when never reached.
///
/// Each worker contributes one unit every time its accumulated work crosses a
/// multiple of 4; the answer is the `R`-th crossing overall.
pub fn universal_t(powers: &[PowerFn], r: u64, t0: f64) -> f64 {
    if r == 0 {
        return t0;
    }
    let mut heap: BinaryHeap<Reverse<(OrdF64, usize, u64)>> = BinaryHeap::new();
    for (i, p) in powers.iter().enumerate() {
        if let Some(t) = p.time_to_accumulate(t0, 4.0) {
            heap.push(Reverse((OrdF64(t), i, 1)));
        }
    }
    let mut count = 0;
    while let Some(Reverse((OrdF64(t), i, m))) = heap.pop() {
        count += 1;
        if count == r {
            return t;
        }
        if let Some(next) = powers[i].time_to_accumulate(t0, 4.0 * (m + 1) as f64) {
            heap.push(Reverse((OrdF64(next), i, m + 1)));
        }
    }
    f64::INFINITY
}

/// `T⁰ = 0, Tᵏ = universal_t(R, Tᵏ⁻¹)` for `k = 1..=count`.
pub fn universal_t_sequence(powers: &[PowerFn], r: u64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut t = 0.0f64;
    for _ in 0..count {
        t = if t.is_finite() { universal_t(powers, r, t) } else { f64::INFINITY };
        out.push(t);
    }
    out
}

/// `τₙ / (2·τ_avg)`.
pub fn harmonic_floor(taus: &[f64]) -> Result<f64> {
    check_taus(taus)?;
    let avg = taus.iter().sum::<f64>() / taus.len() as f64;
    Ok(taus[taus.len() - 1] / (2.0 * avg))
}

/// `1 + 4η ln B`.
pub fn sandwich_factor(eta: f64, b: u64) -> f64 {
    1.0 + 4.0 * eta * (b as f64).ln()
}

/// `(T_R, T_A)`: the optimal order `min_m H_m (LΔ/ε + σ²LΔ/(mε²))` and the
/// all-worker value at `m = n`, with `H_m` the harmonic mean of the `m`
/// fastest durations. Constants are dropped.
#[allow(non_snake_case)]
pub fn closed_form_T(taus: &[f64], l: f64, delta: f64, sigma2: f64, eps: f64) -> Result<(f64, f64)> {
    check_taus(taus)?;
    let vals: Vec<f64> = prefix_harmonic(taus)
        .map(|(m, h)| h * (l * delta / eps + sigma2 * l * delta / (m * eps * eps)))
        .collect();
    let t_r = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((t_r, *vals.last().unwrap()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
