use asgd_arena::heterogeneous::{
    harmonic_batch, ia2sgd, malenia, malenia_param_free, malenia_threshold, ringleader, ringleader_universal,
    table_estimator, GradientTable,
};
use asgd_arena::problem::{HeteroProblem, Oracle};
use asgd_arena::simcore::{Action, GradientMsg, RunOptions, Setup, StopRule};
use asgd_arena::timemodel::ComputeModel;
use proptest::prelude::*;

fn msg(worker: usize, k: u64, v: Vec<f64>) -> GradientMsg {
    GradientMsg { worker, computed_at_k: k, vector: v, task_counter: 0, started: 0.0, duration: 1.0 }
}

fn fixed(tau: &[f64]) -> ComputeModel {
    ComputeModel::Fixed { tau: tau.to_vec() }
}

fn hetero(n: usize) -> HeteroProblem {
    HeteroProblem::new(4, 0.1, n).unwrap()
}

#[test]
fn estimator_weights_entries_by_count() {
    let mut t = GradientTable::new(2, 2);
    t.add(&msg(0, 0, vec![2.0, 0.0]));
    t.add(&msg(0, 0, vec![4.0, 0.0]));
    assert!(table_estimator(&t).is_err());
    t.add(&msg(1, 0, vec![0.0, 6.0]));
    assert_eq!(table_estimator(&t).unwrap(), vec![1.5, 3.0]);
    assert_eq!(t.counts(), vec![2, 1]);
    assert!((t.harmonic() - 4.0 / 3.0).abs() < 1e-15);
    assert_eq!(t.purity_violations, 0);
    t.add(&msg(1, 1, vec![0.0, 0.0]));
    assert_eq!(t.purity_violations, 1);
}

#[test]
fn harmonic_batch_examples() {
    assert_eq!(harmonic_batch(&[1, 3]), 1.5);
    assert_eq!(harmonic_batch(&[2, 2]), 2.0);
    assert_eq!(harmonic_batch(&[0, 5]), 0.0);
    assert_eq!(malenia_threshold(2, 1.0, 1.0), 1.0);
    assert_eq!(malenia_threshold(2, 8.0, 1.0), 4.0);
}

#[test]
fn carry_buffer_moves_into_the_table() {
    let mut t = GradientTable::new(2, 1);
    t.add(&msg(0, 0, vec![1.0]));
    t.add_carry(&msg(1, 1, vec![3.0]));
    t.transfer_carry();
    assert_eq!(t.counts(), vec![0, 1]);
    assert_eq!(t.entries[1].g, vec![3.0]);
    assert_eq!(t.carry[1].b, 0);
}

#[test]
fn malenia_fires_once_the_harmonic_batch_crosses() {
    let model = fixed(&[3.0, 1.0]);
    let h = hetero(2);
    let oracle: &dyn Oracle = &h;
    let setup = Setup::new(&model, oracle, StopRule::iters(1), RunOptions::seeded(0));
    // sigma2 / (n eps) = 1.4
    let (rec, s) = malenia(&setup, 0.1, 2.8, 1.0).unwrap();
    assert_eq!(s.log[0].counts, vec![1, 3]);
    assert_eq!(s.log[0].harmonic, 1.5);
    assert_eq!(rec.final_time, 3.0);
}

#[test]
fn malenia_keeps_collecting_below_the_threshold() {
    let model = fixed(&[1.0, 1.0]);
    let h = hetero(2);
    let oracle: &dyn Oracle = &h;
    let setup = Setup::new(&model, oracle, StopRule::iters(1), RunOptions::seeded(0));
    let (rec, s) = malenia(&setup, 0.1, 6.0, 1.0).unwrap();
    assert_eq!(s.log[0].counts, vec![3, 3]);
    assert_eq!(rec.final_time, 3.0);
    assert!(s.log[0].prior_harmonic.unwrap() < 3.0);
}

#[test]
fn parameter_free_malenia_waits_for_every_worker() {
    let model = fixed(&[1.0, 3.0]);
    let h = hetero(2);
    let oracle: &dyn Oracle = &h;
    let setup = Setup::new(&model, oracle, StopRule::iters(2), RunOptions::seeded(0));
    let (rec, s) = malenia_param_free(&setup, 0.1).unwrap();
    assert_eq!(s.log[0].counts, vec![3, 1]);
    assert!(s.log[0].harmonic >= 1.5);
    assert_eq!(s.log[0].time, 3.0);
    assert!(rec.warnings.is_empty());
}

#[test]
fn ia2sgd_delays_hand_trace() {
    let model = fixed(&[1.0, 3.0]);
    let h = hetero(2);
    let oracle: &dyn Oracle = &h;
    let setup = Setup::new(&model, oracle, StopRule::iters(40), RunOptions::traced(0));
    let (rec, s) = ia2sgd(&setup, 0.1).unwrap();
    // Slow gradients arrive three updates late; the slow entry is read until
    // its replacement lands, e.g. at t = 9 it still holds x¹ while k = 7.
    let arrival = rec.trace.iter().filter(|e| e.action == Action::Applied).map(|e| e.k_current - e.k_computed_at);
    assert_eq!(arrival.max(), Some(3));
    assert_eq!(s.max_delay(), 6);
    assert!(rec.conservation_holds());
    // Warmup: worker 0 idles between t = 1 and t = 3.
    assert_eq!(s.log[0].time, 3.0);
}

#[test]
fn ringleader_first_round_hand_trace() {
    let model = fixed(&[1.0, 2.0]);
    let h = hetero(2);
    let oracle: &dyn Oracle = &h;
    let setup = Setup::new(&model, oracle, StopRule::iters(2), RunOptions::seeded(0));
    let (_, s) = ringleader(&setup, 0.1).unwrap();
    assert_eq!(s.log[0].time, 2.0);
    assert_eq!(s.log[0].worker, 1);
    assert_eq!(s.log[0].counts, vec![2, 1]);
    assert!((s.log[0].harmonic - 4.0 / 3.0).abs() < 1e-15);
    assert_eq!(s.log[1].time, 3.0);
    assert_eq!(s.log[1].worker, 0);
    assert_eq!(s.round_ends, vec![3.0]);
}

#[test]
fn universal_ringleader_with_unit_threshold_is_ringleader() {
    let model = fixed(&[1.0, 2.5, 4.0]);
    let h = hetero(3);
    let oracle: &dyn Oracle = &h;
    let setup = Setup::new(&model, oracle, StopRule::iters(60), RunOptions::traced(5));
    let (a, _) = ringleader(&setup, 0.1).unwrap();
    let (b, _) = ringleader_universal(&setup, 0.1, 0.5, 1.0).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.x_final, b.x_final);
}

#[test]
fn universal_ringleader_waits_for_the_threshold() {
    let model = fixed(&[1.0, 1.0]);
    let h = hetero(2);
    let oracle: &dyn Oracle = &h;
    let setup = Setup::new(&model, oracle, StopRule::iters(1), RunOptions::seeded(0));
    let (rec, s) = ringleader_universal(&setup, 0.1, 4.0, 1.0).unwrap();
    assert_eq!(s.threshold, 2.0);
    assert_eq!(s.log[0].counts, vec![2, 2]);
    assert_eq!(rec.final_time, 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ringleader_rounds_are_pure_and_fair(
        tau in prop::collection::vec(0.2f64..10.0, 1..7),
        seed in 0u64..100,
    ) {
        let n = tau.len();
        let model = ComputeModel::Fixed { tau: tau.clone() };
        let h = hetero(n);
        let oracle: &dyn Oracle = &h;
        let setup = Setup::new(&model, oracle, StopRule::iters(20 * n as u64), RunOptions::seeded(seed));
        let (rec, s) = ringleader(&setup, 0.1).unwrap();
        prop_assert_eq!(s.table.purity_violations, 0);
        prop_assert!(rec.conservation_holds());
        prop_assert!(s.max_delay() <= 2 * n as u64 - 2);
        for round in s.log.chunks_exact(n) {
            let mut seen = vec![false; n];
            for u in round {
                prop_assert!(!seen[u.worker]);
                seen[u.worker] = true;
            }
        }
        let mut sorted = tau;
        sorted.sort_by(f64::total_cmp);
        let avg = sorted.iter().sum::<f64>() / n as f64;
        prop_assert!(s.min_harmonic() >= sorted[n - 1] / (2.0 * avg) - 1e-9);
    }
}
