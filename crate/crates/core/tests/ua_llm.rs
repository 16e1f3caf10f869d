mod common;

use common::*;
use isac_core::driver::{random_rate_table, ua_bench, UaChoice};
use isac_core::llm::{llm_optimize_ua, LlmError, LlmLimits, ScriptedBackend, StubBackend};
use isac_core::ua::{brute_force_ua, coalition_refine, gale_shapley_ua, ua_objective};

#[test]
fn solver_outputs_are_valid_and_ordered() {
    for k in [2usize, 3] {
        for i in 0..10u64 {
            let n = 4 + (i as usize % 5);
            let t = random_rate_table(k, n, 1000 * k as u64 + i).unwrap();
            let (ub, opt) = brute_force_ua(&t, 1.0).unwrap();
            let gs = gale_shapley_ua(&t).unwrap();
            let co = coalition_refine(&gs, &t).unwrap();
            let stub = llm_optimize_ua(&t, 1.0, &StubBackend, LlmLimits::default()).unwrap();
            for u in [&ub, &gs, &co, &stub.u] {
                assert!(association_valid(&u.matrix()), "k {k} table {i}");
            }
            let v_gs = ua_objective(&gs, &t, 1.0).unwrap();
            let v_co = ua_objective(&co, &t, 1.0).unwrap();
            assert!(opt >= v_co * (1.0 - 1e-12) && v_co >= v_gs * (1.0 - 1e-12));
            assert!(opt >= stub.rate * (1.0 - 1e-12));
            assert!((ua_objective(&stub.u, &t, 1.0).unwrap() - stub.rate).abs() < 1e-12 * (1.0 + stub.rate));
        }
    }
}

#[test]
fn garbage_replies_are_corrected_then_accepted() {
    let t = random_rate_table(2, 4, 7).unwrap();
    let be = ScriptedBackend::new(vec![
        Ok("I think BS one is best.".into()),
        Ok("ASSIGNMENT: [1, 1, 3, 2]".into()),
        Ok("ASSIGNMENT: [1, x, 2, 2]".into()),
        Ok("ASSIGNMENT: [1, 1, 2, 2]".into()),
    ]);
    let out = llm_optimize_ua(&t, 1.0, &be, LlmLimits::default()).unwrap();
    assert_eq!(out.u.assignment(), &[0, 0, 1, 1]);
    assert!(out.transcript.iter().take(3).all(|r| r.error.is_some()));
    assert!(out.transcript.iter().any(|r| r.assignment.as_deref() == Some(&[1, 1, 2, 2][..])));
    // A repeated identical assignment ends the loop.
    assert!(be.calls() <= 2 * LlmLimits::default().max_rounds);
}

#[test]
fn persistent_garbage_yields_no_valid_assignment() {
    let t = random_rate_table(2, 4, 8).unwrap();
    let be = ScriptedBackend::new(vec![Ok("ASSIGNMENT: [2, 2, 2, 2]".into())]);
    let limits = LlmLimits { max_rounds: 3, patience: 2 };
    let err = llm_optimize_ua(&t, 1.0, &be, limits).unwrap_err();
    assert_eq!(err, LlmError::NoValidAssignment { rounds: 3 });
    assert_eq!(be.calls(), 6);
}

#[test]
fn transport_failure_reports_the_best_so_far() {
    let t = random_rate_table(2, 4, 9).unwrap();
    let be = ScriptedBackend::new(vec![
        Ok("ASSIGNMENT: [1, 2, 1, 2]".into()),
        Err(LlmError::Transport("connection reset".into())),
    ]);
    match llm_optimize_ua(&t, 1.0, &be, LlmLimits::default()) {
        Err(LlmError::BackendFailed { best: Some((a, v)), message }) => {
            assert_eq!(a, vec![1, 2, 1, 2]);
            assert!(message.contains("connection reset"));
            let u = isac_core::metrics::UAMatrix::from_one_based(2, &a).unwrap();
            assert!((ua_objective(&u, &t, 1.0).unwrap() - v).abs() < 1e-12);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bench_rows_are_normalized_by_the_optimum() {
    let solvers = [UaChoice::Brute, UaChoice::GaleShapley, UaChoice::Coalition, UaChoice::Stub];
    let rows = ua_bench(3, 5, 4, 11, &solvers, None).unwrap();
    assert_eq!(rows.len(), 4 * solvers.len());
    for r in &rows {
        assert!(r.ratio_to_optimum <= 1.0 + 1e-12 && r.ratio_to_optimum > 0.0);
        if r.solver == UaChoice::Brute.tag() {
            assert_eq!(r.ratio_to_optimum, 1.0);
        }
    }
    assert!(ua_bench(2, 4, 1, 0, &[UaChoice::Llm], None).is_err());
}
