use std::sync::Arc;

use proptest::prelude::*;
use u2flow::geometry;
use u2flow::grid::{Grading, RadialGrid};
use u2flow::reference::{self, ReferenceError, SolitonParams, Termination, ViolationKind};

#[test]
fn eh_profile_starts_at_the_bolt() {
    let p = reference::integrate_eh(60.0, 1e-3).unwrap();
    assert_eq!((p.a[0], p.b[0]), (0.0, 1.0));
    assert_eq!((p.a_s[0], p.b_s[0]), (2.0, 0.0));
}

#[test]
fn eh_profile_is_asymptotically_conical() {
    let p = reference::integrate_eh(60.0, 1e-3).unwrap();
    let i = p.s.iter().position(|s| *s >= 50.0).unwrap();
    assert!((p.a_s[i] - 1.0).abs() < 1e-2 && (p.b_s[i] - 1.0).abs() < 1e-2);
    assert!((p.a[i] / p.s[i] - 1.0).abs() < 0.05 && (p.b[i] / p.s[i] - 1.0).abs() < 0.05);
}

#[test]
fn eh_profile_concavity_and_monotone_q() {
    let p = reference::integrate_eh(20.0, 1e-3).unwrap();
    for i in 1..p.s.len() {
        let q = p.a[i] / p.b[i];
        // a_ss = -2 Q Q_s and b_ss = Q_s along the first-order system.
        let q_s = 2.0 * (1.0 - q * q) / p.b[i];
        assert!(q < 1.0 && q_s > 0.0);
        assert!(-2.0 * q * q_s < 0.0 && q > p.a[i - 1] / p.b[i - 1]);
    }
}

#[test]
fn eh_resample_is_kahler_at_two_scales() {
    let p = reference::integrate_eh(12.0, 1e-3).unwrap();
    for scale in [1.0, 2.0] {
        let grid = Arc::new(RadialGrid::build(10.0 * scale, 2000, Grading::Uniform).unwrap());
        let st = reference::eh_as_metric_state(&p, grid, scale).unwrap();
        let k = geometry::kahler_quantities(&st);
        let worst = k.x.iter().chain(&k.y).map(|v| v.abs()).fold(0.0, f64::max);
        // Bounded by the fourth-order slope stencil, not the integrator.
        assert!(worst < 1e-6, "scale {scale}: {worst}");
    }
}

#[test]
fn eh_resample_rejects_long_grids() {
    let p = reference::integrate_eh(5.0, 1e-2).unwrap();
    let grid = Arc::new(RadialGrid::build(6.0, 100, Grading::Uniform).unwrap());
    assert!(matches!(reference::eh_as_metric_state(&p, grid, 1.0), Err(ReferenceError::OutOfRange { .. })));
}

#[test]
fn cylinder_closed_form() {
    assert!((reference::exact_cylinder_radius(1.0, 0.2).unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
    assert_eq!(reference::exact_cylinder_radius(1.3, 0.0).unwrap(), 1.3);
    assert!(reference::exact_cylinder_radius(1.0, 0.25 - 1e-12).unwrap() < 1e-5);
    assert!(matches!(reference::exact_cylinder_radius(1.0, 0.25), Err(ReferenceError::PastExtinction { .. })));
}

#[test]
fn closed_form_solitons_satisfy_the_equations() {
    for rho in [0.5, 1.0, 2.0] {
        for s in [0.3, 1.0, 4.0, 17.0] {
            let g = reference::soliton_residual(rho, reference::gaussian_soliton_jet(rho, s));
            assert!(g.iter().all(|r| r.abs() <= 1e-10), "{g:?}");
            let c = reference::soliton_residual(rho, reference::cylinder_soliton_jet(rho, s));
            // The a and b equations only: the cylinder has no tip.
            assert!(c[..2].iter().all(|r| r.abs() <= 1e-10), "{c:?}");
        }
    }
}

#[test]
fn potential_grows_at_rate_rho_on_model_solitons() {
    for rho in [0.5, 1.0, 2.0] {
        let p = SolitonParams::new(1, 1.0, rho, 20.0);
        let g = reference::integrate_soliton_from(p, 1.0, [1.0, 1.0, 1.0, 1.0, rho]).unwrap();
        let fit = reference::soliton_potential_asymptotics(&g).unwrap();
        assert!(fit.relative_error() < 1e-8, "{fit:?}");
    }
    // The cylinder is a saddle, so its radius must be exact in binary: rho = 1 would
    // leave the round-off in sqrt(2) to grow exponentially.
    for rho in [0.5, 2.0] {
        let p = SolitonParams::new(1, 1.0, rho, 20.0);
        let c = (2.0 / rho).sqrt();
        let cyl = reference::integrate_soliton_from(p, 1.0, [c, 0.0, c, 0.0, rho]).unwrap();
        let fit = reference::soliton_potential_asymptotics(&cyl).unwrap();
        assert!(fit.relative_error() < 1e-8, "{fit:?}");
    }
}

#[test]
fn truncated_run_has_no_potential_fit() {
    let st = reference::integrate_soliton(SolitonParams::new(2, 1.0, 1.0, 50.0)).unwrap();
    assert!(matches!(reference::soliton_potential_asymptotics(&st), Err(ReferenceError::Truncated(_))));
}

#[test]
fn shrinker_shooting_from_k2_tip_diverges() {
    let st = reference::integrate_soliton(SolitonParams::new(2, 1.0, 1.0, 50.0)).unwrap();
    match st.termination {
        Termination::Violation { violation: ViolationKind::YBeyondCap, s } => assert!(s < 50.0),
        other => panic!("{other:?}"),
    }
    assert!(st.tip_y_s < 0.0);
    assert!((st.y_s[0] - st.tip_y_s).abs() < 1e-6);
    assert!(st.y.last().unwrap() < &-1e3);
    assert!(st.g_counterexamples().is_empty());
}

#[test]
fn steady_shooting_from_k2_tip_recovers_eguchi_hanson() {
    let mut p = SolitonParams::new(2, 1.0, 0.0, 10.0);
    p.tip_f_ss = Some(0.0);
    let st = reference::integrate_soliton(p).unwrap();
    assert_eq!(st.termination, Termination::Reached);
    let eh = reference::integrate_eh(10.0, 1e-3).unwrap();
    for i in (0..st.len()).step_by(10) {
        let (a, b) = eh.eval(st.s[i]);
        // Accumulated local error at relative tolerance 1e-8 over a few hundred steps.
        assert!((st.a[i] - a).abs() < 1e-5 && (st.b[i] - b).abs() < 1e-5, "s = {}", st.s[i]);
    }
}

#[test]
fn invalid_soliton_parameters_are_rejected() {
    assert!(reference::integrate_soliton(SolitonParams::new(2, 0.0, 1.0, 5.0)).is_err());
    assert!(reference::integrate_soliton(SolitonParams::new(0, 1.0, 1.0, 5.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// A shrinker has `d/dt b^2 = -2 rho b^2` at the tip, which forces `y_s(0) < 0` for `k >= 2`.
    #[test]
    fn shrinking_tip_rate_forces_negative_y_s(k in 2u32..5, rho in 0.05f64..3.0, b0 in 0.2f64..3.0) {
        let st = reference::integrate_soliton(SolitonParams::new(k, b0, rho, 5.0)).unwrap();
        let rate = 4.0 * (b0 * st.tip_y_s + k as f64 - 2.0);
        prop_assert!((rate + 2.0 * rho * b0 * b0).abs() < 1e-12 * (1.0 + rate.abs()));
        prop_assert!(st.tip_y_s < 0.0);
        prop_assert!((st.y_s[0] - st.tip_y_s).abs() < 1e-5 * (1.0 + st.tip_y_s.abs()));
        prop_assert!(st.g_counterexamples().is_empty());
    }
}
