use asgd_arena::allocation::{
    argmax_cardinality, ata_round, conf_bound, k_indices, lcb, ofta, proxy_loss, ras, realized_cost, regret_report,
    run_ata_regret, uta, LcbMode, LcbState, RegretLedger,
};
use asgd_arena::timemodel::Distribution;
use proptest::prelude::*;

fn loss(a: &[u64], s: &[f64]) -> f64 {
    a.iter().zip(s).filter(|(&ai, _)| ai > 0).map(|(&ai, &si)| ai as f64 * si).fold(0.0, f64::max)
}

fn card(a: &[u64], s: &[f64]) -> usize {
    let l = loss(a, s);
    a.iter().zip(s).filter(|(&ai, &si)| ai > 0 && ai as f64 * si == l).count()
}

/// Best `(loss, cardinality)` over all compositions of `b` into `s.len()` parts.
fn enumerate_best(s: &[f64], b: u64) -> (f64, usize) {
    fn go(i: usize, left: u64, a: &mut Vec<u64>, s: &[f64], best: &mut (f64, usize)) {
        if i + 1 == a.len() {
            a[i] = left;
            let cand = (loss(a, s), card(a, s));
            if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                *best = cand;
            }
            return;
        }
        for v in 0..=left {
            a[i] = v;
            go(i + 1, left - v, a, s, best);
        }
    }
    let mut best = (f64::INFINITY, usize::MAX);
    go(0, b, &mut vec![0; s.len()], s, &mut best);
    best
}

#[test]
fn proxy_loss_examples() {
    assert_eq!(proxy_loss(&[1, 3], &[2.0, 1.0]).unwrap(), 3.0);
    assert_eq!(proxy_loss(&[0, 2], &[100.0, 1.5]).unwrap(), 3.0);
    assert_eq!(proxy_loss(&[0, 0], &[1.0, 1.0]).unwrap(), 0.0);
    assert!(proxy_loss(&[1], &[1.0, 2.0]).is_err());
    assert_eq!(argmax_cardinality(&[1, 1, 2], &[2.0, 2.0, 1.0]), 3);
}

#[test]
fn ras_examples() {
    assert_eq!(ras(&[5.0, 3.0, 4.0], 1).unwrap(), vec![0, 1, 0]);
    assert_eq!(ras(&[1.0, 2.0, 3.0], 3).unwrap(), vec![2, 1, 0]);
    assert_eq!(ras(&[1.0, 2.0], 2).unwrap(), vec![2, 0]);
    assert_eq!(ras(&[0.0, 3.0, 0.0], 5).unwrap(), vec![3, 0, 2]);
    assert!(ras(&[1.0], 0).is_err());
    assert!(ras(&[], 1).is_err());
    assert!(ras(&[-1.0], 1).is_err());
}

#[test]
fn confidence_radius_example() {
    let l = 2f64.ln();
    let expected = 2.0 * (l.sqrt() + l);
    assert!((conf_bound(1.0, 1, 1).unwrap() - expected).abs() < 1e-12);
    assert!((expected - 3.0514).abs() < 1e-4);
    assert_eq!(conf_bound(1.0, 0, 3).unwrap(), f64::INFINITY);
    assert!(conf_bound(1.0, 1, 0).is_err());
}

#[test]
fn uniform_allocation_examples() {
    assert_eq!(uta(4, 8, 0, 0), vec![2, 2, 2, 2]);
    assert_eq!(uta(3, 4, 0, 0), vec![2, 1, 1]);
    let a = uta(10, 3, 7, 2);
    assert_eq!(a.iter().sum::<u64>(), 3);
    assert!(a.iter().all(|&v| v <= 1));
    assert_eq!(a, uta(10, 3, 7, 2));
}

#[test]
fn unit_budget_reduces_to_a_single_arm() {
    let dists: Vec<Distribution> = (1..=4).map(|i| Distribution::Exponential { scale: i as f64 }).collect();
    let mut state = LcbState::new(4, LcbMode::Alpha(1.0));
    for round in 0..50 {
        let scores = lcb(&state);
        let out = ata_round(&mut state, 1, |i, m| vec![dists[i].mean(); m as usize]).unwrap();
        assert_eq!(out.allocation.iter().sum::<u64>(), 1);
        let chosen = out.allocation.iter().position(|&v| v == 1).unwrap();
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(scores[chosen], min, "round {round}");
        assert_eq!(scores.iter().position(|&s| s == min), Some(chosen));
    }
}

#[test]
fn feedback_only_touches_allocated_arms() {
    let mut state = LcbState::new(3, LcbMode::Eta(1.0));
    state.observe(&[2, 0, 1], &[4.0, 99.0, 5.0]).unwrap();
    assert_eq!(state.counts, vec![2, 0, 1]);
    assert_eq!(state.totals, vec![4.0, 0.0, 5.0]);
    assert_eq!(state.mean(1), None);
    assert_eq!(state.round, 2);
    assert_eq!(lcb(&state)[1], 0.0);
    assert!(state.observe(&[1], &[1.0]).is_err());
}

#[test]
fn realized_cost_is_the_slowest_worker() {
    let durations = vec![vec![1.0, 2.0], vec![], vec![4.0]];
    assert_eq!(realized_cost(&[2, 0, 1], &durations).unwrap(), 4.0);
    assert_eq!(realized_cost(&[2, 0, 0], &[vec![1.0, 2.0], vec![], vec![]]).unwrap(), 3.0);
    assert!(realized_cost(&[2, 0, 0], &durations).is_err());
}

#[test]
fn regret_ledger_for_the_optimal_policy_is_flat() {
    let mu = vec![1.0, 2.0, 5.0];
    let opt = ofta(&mu, 6).unwrap();
    let mut ledger = RegretLedger::new(mu, 6).unwrap();
    for _ in 0..10 {
        ledger.record(&opt, 1.0);
    }
    assert!(regret_report(&ledger).cumulative.iter().all(|&r| r == 0.0));
    assert_eq!(ledger.optimal_total(), 10.0 * ledger.optimal_loss);
}

#[test]
fn ata_regret_is_sublinear_on_separated_arms() {
    let dists: Vec<Distribution> = (1..=5).map(|i| Distribution::Exponential { scale: i as f64 }).collect();
    let eta = dists[0].orlicz_upper() / dists[0].mean();
    let ledger = run_ata_regret(&dists, 3, LcbMode::Eta(eta), 20_000, 1).unwrap();
    let r = &ledger.cum_regret;
    assert!(r[19_999] / 20_000.0 < 0.25 * r[1_999] / 2_000.0);
    assert_eq!(ledger, run_ata_regret(&dists, 3, LcbMode::Eta(eta), 20_000, 1).unwrap());
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 9 => 0.01f64..10.0], 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ras_matches_enumeration(s in scores(), b in 1u64..9) {
        let a = ras(&s, b).unwrap();
        prop_assert_eq!(a.iter().sum::<u64>(), b);
        let best = enumerate_best(&s, b);
        prop_assert_eq!(loss(&a, &s), best.0);
        // With a zero score the loss is 0 and the budget is spread over the
        // zero arms, so only the loss is compared.
        if best.0 > 0.0 {
            prop_assert_eq!(card(&a, &s), best.1);
        }
    }

    #[test]
    fn optimal_allocation_has_small_k_indices(
        mu in prop::collection::vec(0.05f64..10.0, 1..12),
        b in 1u64..60,
    ) {
        let a = ras(&mu, b).unwrap();
        for k in k_indices(&a, &mu) {
            prop_assert!(k == 1 || k == 2);
        }
    }
}
