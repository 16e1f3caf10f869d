mod common;

use common::*;
use isac_core::beamform::{
    dual_penalty_update, project, solve_cq, solve_w, AdmmState, HalfSpace, SnrConstraint, WObjective, WSolveOptions,
};
use isac_core::CMat;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn cq_matches_grid_search() {
    let eps = 0.5;
    for (i, (t1, t2, t3)) in infeasible_targets(20, 17, eps).into_iter().enumerate() {
        let s = solve_cq(t1, t2, t3, eps).unwrap();
        let d_solver = (s.q1 - t1).powi(2) + (s.q2 - t2).norm_sqr() + (s.q3 - t3).powi(2);
        let (d_grid, (g1, g2, g3), step) = cq_grid_oracle(t1, t2, t3, eps);
        assert!(d_solver <= d_grid + 1e-9, "target {i}: solver {d_solver} worse than grid {d_grid}");
        let gap = ((s.q1 - g1).powi(2) + (s.q2 - g2).norm_sqr() + (s.q3 - g3).powi(2)).sqrt();
        assert!(gap < 1e-6 + 10.0 * step, "target {i}: points differ by {gap}");
        assert!(s.kkt_residual < 1e-9);
        assert!(s.c >= 1.0 / eps - 1e-9);
    }
}

#[test]
fn w_matches_ball_least_squares() {
    for seed in 0..10 {
        let (fp, r2) = ls_instance(seed);
        let obj = WObjective::new(&fp, 1.0, 0.0, Vec::new());
        let w0 = CMat::zeros(fp.f.nrows(), fp.f.ncols());
        let sol = solve_w(&obj, &w0, r2, None, WSolveOptions::default()).unwrap();
        let oracle = ball_ls_oracle(&obj.r, &fp.f, r2);
        assert!(sol.kkt_residual <= 1e-6, "seed {seed}: KKT {} after {}", sol.kkt_residual, sol.iterations);
        let rel = (&sol.w - &oracle).norm() / oracle.norm();
        assert!(rel < 1e-5, "seed {seed}: relative distance {rel}");
        assert!(sol.w.norm_squared() <= r2 * (1.0 + 1e-8));
        assert!(obj.value(&sol.w) <= obj.value(&w0));
    }
}

#[test]
fn w_output_respects_power_and_linearized_snr() {
    let mut r = rng(4);
    for seed in 0..5 {
        let (fp, _) = ls_instance(seed);
        let g = cvec(&mut r, 3);
        let g = &g / c(g.norm());
        let w0 = cmat(&mut r, 3, 8);
        let w0 = &w0 / c(w0.norm());
        let tau = 0.5 * (g.adjoint() * &w0).norm_squared();
        let snr = SnrConstraint { g: g.clone(), tau };
        let obj = WObjective::new(&fp, 1.0, 0.0, Vec::new());
        let sol = solve_w(&obj, &w0, 1.0, Some(&snr), WSolveOptions::default()).unwrap();
        assert!(sol.w.norm_squared() <= 1.0 + 1e-8);
        assert!(snr.holds(&sol.w), "minorant guarantee violated");
        let start = project(&w0, 1.0, snr.linearize(&w0).as_ref()).unwrap();
        assert!(obj.value(&sol.w) <= obj.value(&start) + 1e-12);
    }
}

#[test]
fn dual_update_examples() {
    let w = CMat::zeros(2, 3);
    let mut st = AdmmState::new(w, 1.0);
    let q = st.q();
    dual_penalty_update(&mut st, q, 0.9);
    assert!(st.dual.iter().all(|d| d.norm() == 0.0));
    assert_eq!(st.iter, 1);

    let mut st = AdmmState::new(CMat::zeros(2, 3), 1.0);
    let mut qw = st.q();
    for x in qw.iter_mut() {
        *x += 0.5;
    }
    dual_penalty_update(&mut st, qw, 0.9);
    assert!(st.dual.iter().all(|d| (d - Complex64::new(0.5, 0.0)).norm() < 1e-15));

    let mut st = AdmmState::new(CMat::zeros(2, 3), 1.0);
    for _ in 0..10 {
        let q = st.q();
        dual_penalty_update(&mut st, q, 0.9);
    }
    assert!((st.rho - 0.3486784401).abs() < 1e-12);
}

proptest! {
    #[test]
    fn cq_output_is_feasible_and_certified(
        t1 in -3.0f64..3.0, re in -3.0f64..3.0, im in -3.0f64..3.0, t3 in -3.0f64..3.0, eps in 0.1f64..10.0
    ) {
        let s = solve_cq(t1, Complex64::new(re, im), t3, eps).unwrap();
        prop_assert!(s.kkt_residual < 1e-8);
        prop_assert!(s.q3 >= 0.0);
        prop_assert!(s.c >= 1.0 / eps - 1e-8 * (1.0 + 1.0 / eps));
    }

    #[test]
    fn projection_is_nonexpansive(seed in 0u64..300) {
        let mut r = rng(seed);
        let d = cmat(&mut r, 3, 2);
        let hs = HalfSpace { beta: 0.2 * d.norm(), d };
        let x = cmat(&mut r, 3, 2) * c(3.0);
        let y = cmat(&mut r, 3, 2) * c(3.0);
        let px = project(&x, 1.0, Some(&hs)).unwrap();
        let py = project(&y, 1.0, Some(&hs)).unwrap();
        prop_assert!((&px - &py).norm() <= (&x - &y).norm() + 1e-12);
        prop_assert!(px.norm_squared() <= 1.0 + 1e-12);
        prop_assert!(hs.d.dotc(&px).re >= hs.beta - 1e-12);
    }
}
