use asgd_arena::allocation::gta;
use asgd_arena::heterogeneous::ringleader;
use asgd_arena::homogeneous::{hero_sgd, naive_asgd, ringmaster, RingmasterVariant};
use asgd_arena::problem::{HeteroProblem, NullOracle, Oracle, QuadraticProblem};
use asgd_arena::simcore::{
    run, Action, Ctx, GradientMsg, RunOptions, RunRecord, Server, Setup, StopReason, StopRule, TraceEvent,
};
use asgd_arena::timemodel::{ComputeModel, Distribution};
use asgd_arena::ArenaError;
use proptest::prelude::*;

fn arrivals(trace: &[TraceEvent]) -> Vec<&TraceEvent> {
    trace.iter().filter(|e| e.action != Action::Requested && e.action != Action::Terminated).collect()
}

fn zero_idle(rec: &RunRecord) -> bool {
    rec.workers.iter().all(|w| (w.cumulative_busy - rec.final_time).abs() <= 1e-9 * rec.final_time.max(1.0))
}

fn clock_nondecreasing(rec: &RunRecord) -> bool {
    rec.trace.windows(2).all(|w| w[1].time >= w[0].time) && rec.samples.windows(2).all(|w| w[1].vtime >= w[0].vtime)
}

#[test]
fn single_worker_completes_on_the_grid() {
    let model = ComputeModel::Fixed { tau: vec![1.0] };
    let p = QuadraticProblem::new(3, 0.0).unwrap();
    let setup = Setup::new(&model, &p, StopRule::iters(5), RunOptions::traced(0));
    let rec = hero_sgd(&setup, 0.1).unwrap();
    let times: Vec<f64> = arrivals(&rec.trace).iter().map(|e| e.time).collect();
    assert_eq!(times, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(rec.final_k, 5);
    assert_eq!(rec.stop_reason, StopReason::Iterations);
}

#[test]
fn ties_resolve_in_worker_order() {
    let model = ComputeModel::Fixed { tau: vec![1.0, 1.0, 1.0] };
    let p = QuadraticProblem::new(2, 0.0).unwrap();
    let setup = Setup::new(&model, &p, StopRule::iters(6), RunOptions::traced(0));
    let rec = naive_asgd(&setup, 0.1).unwrap();
    let order: Vec<(f64, usize)> = arrivals(&rec.trace).iter().map(|e| (e.time, e.worker)).collect();
    assert_eq!(order, vec![(1.0, 0), (1.0, 1), (1.0, 2), (2.0, 0), (2.0, 1), (2.0, 2)]);
}

#[test]
fn ringmaster_discards_the_stale_tie() {
    let model = ComputeModel::Fixed { tau: vec![1.0, 2.0] };
    let p = QuadraticProblem::new(2, 0.0).unwrap();
    let setup = Setup::new(&model, &p, StopRule::iters(3), RunOptions::traced(0));
    let rec = ringmaster(&setup, 0.1, 2, RingmasterVariant::NoStops).unwrap();
    let ev = arrivals(&rec.trace);
    let summary: Vec<(f64, usize, u64, Action)> =
        ev.iter().map(|e| (e.time, e.worker, e.k_current - e.k_computed_at, e.action)).collect();
    assert_eq!(
        &summary[..3],
        &[(1.0, 0, 0, Action::Applied), (2.0, 0, 0, Action::Applied), (2.0, 1, 2, Action::Discarded)]
    );
}

#[test]
fn greedy_round_wastes_partial_work() {
    let model = ComputeModel::Fixed { tau: vec![1.0, 2.0, 3.0] };
    let out = gta(&model, 1, 0).unwrap();
    assert_eq!(out.cost, 1.0);
    assert_eq!(out.counts, vec![1, 0, 0]);
    assert!((out.wasted - 2.0).abs() < 1e-12);
}

struct TerminateOnce;
impl Server for TerminateOnce {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
    fn on_arrival(&mut self, msg: GradientMsg, ctx: &mut Ctx<'_>) {
        ctx.apply(&msg);
        ctx.tick();
        ctx.terminate_all();
        for i in 0..ctx.n() {
            ctx.request(i);
        }
    }
}

#[test]
fn termination_credits_partial_busy_time() {
    let model = ComputeModel::Fixed { tau: vec![1.0, 2.0, 3.0] };
    let rec = run(&model, &NullOracle, &mut TerminateOnce, vec![], &StopRule::iters(4), &RunOptions::traced(0)).unwrap();
    assert_eq!(rec.final_time, 4.0);
    assert!(rec.conservation_holds());
    assert_eq!(rec.workers[1].tasks_terminated, 4);
    assert!(zero_idle(&rec));
}

struct DoubleRequest;
impl Server for DoubleRequest {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        ctx.request(0);
        ctx.request(0);
    }
    fn on_arrival(&mut self, _: GradientMsg, _: &mut Ctx<'_>) {}
}

struct Unclassified;
impl Server for Unclassified {
    fn on_init(&mut self, ctx: &mut Ctx<'_>) {
        ctx.request(0);
    }
    fn on_arrival(&mut self, _: GradientMsg, _: &mut Ctx<'_>) {}
}

#[test]
fn protocol_violations_are_errors() {
    let model = ComputeModel::Fixed { tau: vec![1.0] };
    let stop = StopRule::iters(1);
    let opts = RunOptions::seeded(0);
    assert!(run(&model, &NullOracle, &mut DoubleRequest, vec![], &stop, &opts).is_err());
    assert!(matches!(
        run(&model, &NullOracle, &mut Unclassified, vec![], &stop, &opts),
        Err(ArenaError::Verification(_))
    ));
}

#[test]
fn event_cap_reports_budget_error() {
    let model = ComputeModel::Fixed { tau: vec![1.0, 1.5] };
    let p = QuadraticProblem::new(2, 0.0).unwrap();
    let opts = RunOptions { event_cap: 10, ..RunOptions::seeded(0) };
    let setup = Setup::new(&model, &p, StopRule::iters(1000), opts);
    match naive_asgd(&setup, 0.1) {
        Err(ArenaError::BudgetExceeded { cap, partial }) => {
            assert_eq!(cap, 10);
            assert_eq!(partial.events, 10);
        }
        other => panic!("expected a budget error, got {other:?}"),
    }
}

#[test]
fn time_budget_stops_the_clock() {
    let model = ComputeModel::Fixed { tau: vec![1.0, 3.0] };
    let p = QuadraticProblem::new(2, 0.0).unwrap();
    let setup = Setup::new(&model, &p, StopRule { max_vtime: Some(10.5), ..Default::default() }, RunOptions::seeded(0));
    let rec = naive_asgd(&setup, 0.1).unwrap();
    assert_eq!(rec.stop_reason, StopReason::TimeBudget);
    assert_eq!(rec.final_time, 10.5);
    assert_eq!(rec.final_k, 13);
}

fn model_strategy() -> impl Strategy<Value = ComputeModel> {
    prop_oneof![
        prop::collection::vec(0.1f64..10.0, 1..7).prop_map(|tau| ComputeModel::Fixed { tau }),
        prop::collection::vec(0.1f64..5.0, 1..7).prop_map(|s| ComputeModel::Stochastic {
            dist: s.into_iter().map(|scale| Distribution::ShiftedExponential { shift: scale, scale }).collect()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn asynchronous_runs_conserve_tasks_and_never_idle(
        model in model_strategy(),
        r in 1u64..6,
        seed in 0u64..1000,
        iters in 1u64..200,
    ) {
        let p = QuadraticProblem::new(4, 0.1).unwrap();
        let setup = Setup::new(&model, &p, StopRule::iters(iters), RunOptions::traced(seed));
        for rec in [
            naive_asgd(&setup, 0.1).unwrap(),
            ringmaster(&setup, 0.1, r, RingmasterVariant::NoStops).unwrap(),
            ringmaster(&setup, 0.1, r, RingmasterVariant::WithStops).unwrap(),
        ] {
            prop_assert!(rec.conservation_holds());
            prop_assert!(clock_nondecreasing(&rec));
            prop_assert_eq!(rec.final_k, iters);
        }
        let rec = naive_asgd(&setup, 0.1).unwrap();
        prop_assert!(zero_idle(&rec));
        let rec = ringmaster(&setup, 0.1, r, RingmasterVariant::NoStops).unwrap();
        prop_assert!(zero_idle(&rec));
    }

    #[test]
    fn ringleader_conserves_tasks_and_never_idles(
        tau in prop::collection::vec(0.1f64..10.0, 1..7),
        seed in 0u64..1000,
        iters in 1u64..100,
    ) {
        let n = tau.len();
        let model = ComputeModel::Fixed { tau };
        let h = HeteroProblem::new(5, 0.1, n).unwrap();
        let oracle: &dyn Oracle = &h;
        let setup = Setup::new(&model, oracle, StopRule::iters(iters), RunOptions::traced(seed));
        let (rec, _) = ringleader(&setup, 0.1).unwrap();
        prop_assert!(rec.conservation_holds());
        prop_assert!(clock_nondecreasing(&rec));
        prop_assert!(zero_idle(&rec));
    }
}
