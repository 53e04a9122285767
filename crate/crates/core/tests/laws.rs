use std::sync::Arc;

use proptest::prelude::*;
use u2flow::flow::InitialData;
use u2flow::grid::{Grading, RadialGrid};
use u2flow::laws::{self, Jet};
use u2flow::reference;
use u2flow::run::FlowConfig;

fn find(name: &str) -> laws::EvolutionLaw {
    laws::registry(7.0).into_iter().find(|l| l.name == name).unwrap()
}

#[test]
fn registry_holds_every_named_law() {
    let names: Vec<String> = laws::registry(7.0).into_iter().map(|l| l.name).collect();
    for n in [
        "Q", "a_s", "Q b_s", "Q^2", "x", "Q y", "y/Q", "T1", "T2", "T3", "T4", "H-", "H+", "Z1", "Z_theta", "round b_s",
        "round b_ss", "round T_F0", "round T_F1", "round T_F2",
    ] {
        assert!(names.iter().any(|m| m == n), "missing {n}");
    }
}

#[test]
fn q_law_rhs_vanishes_on_round_cylinder() {
    let jet = Jet { a: 0.7, b: 0.7, a_s: 0.0, b_s: 0.0, a_ss: 0.0, b_ss: 0.0 };
    let t = find("Q").terms(&jet);
    assert_eq!(t.q, 1.0);
    assert_eq!(t.reaction, 0.0);
}

#[test]
fn x_law_is_stationary_on_eguchi_hanson() {
    let p = reference::integrate_eh(12.0, 1e-3).unwrap();
    let grid = Arc::new(RadialGrid::build(10.0, 2000, Grading::Uniform).unwrap());
    let st = reference::eh_as_metric_state(&p, grid, 1.0).unwrap();
    let f = laws::law_fields(&find("x"), &st).unwrap();
    let n = st.len();
    for j in laws::EXCLUDED_END_NODES..n - laws::EXCLUDED_END_NODES {
        // Limited by the fourth-order slope stencil next to the tip.
        assert!(f.q[j].abs() < 1e-7, "x = {} at {j}", f.q[j]);
        assert!(f.spatial[j].abs() < 1e-5, "rhs = {} at {j}", f.spatial[j]);
    }
}

#[test]
fn t_f1_law_vanishes_on_cylinder() {
    let grid = Arc::new(RadialGrid::build(5.0, 100, Grading::Uniform).unwrap());
    let st = reference::exact_cylinder(1.0, 0.1, grid).unwrap();
    let f = laws::law_fields(&find("round T_F1"), &st).unwrap();
    // T_F1 = b b_ss + 1 - b_s^2 = 1 on a cylinder, with zero rate.
    for j in laws::EXCLUDED_END_NODES..st.len() - laws::EXCLUDED_END_NODES {
        assert!((f.q[j] - 1.0).abs() < 1e-12);
        // Round-off of a fourth derivative at spacing 0.05.
        assert!(f.spatial[j].abs() < 1e-8, "{} at {j}", f.spatial[j]);
    }
}

#[test]
fn linear_operator_kills_constants() {
    let grid = Arc::new(RadialGrid::build(5.0, 100, Grading::Uniform).unwrap());
    let st = reference::exact_cylinder(1.0, 0.0, grid).unwrap();
    let d = st.derivatives();
    let (f_s, f_ss) = st.s_derivs(&vec![3.0; st.len()], u2flow::state::Parity::Even, &d.u_xi);
    assert!(f_s.iter().chain(&f_ss).all(|v| v.abs() < 1e-10));
}

#[test]
fn round_laws_reject_squashed_states() {
    let grid = Arc::new(RadialGrid::build(5.0, 100, Grading::Uniform).unwrap());
    let st = u2flow::flow::make_initial_data(&InitialData::TanhCap, 2, grid).unwrap();
    assert!(matches!(laws::law_fields(&find("round b_s"), &st), Err(laws::ResidualError::NotRound { .. })));
}

#[test]
fn ladder_needs_three_resolutions() {
    let cfg = FlowConfig { n: 200, ..FlowConfig::default() };
    let ladder = laws::residual_ladder(&cfg, 2, &[0.01]).unwrap();
    assert!(matches!(
        laws::residual_report(&find("Q"), &ladder, (0.0, 1.0)),
        Err(laws::ResidualError::TooFewResolutions(2))
    ));
}

/// The first-order term of the `y` law must act on `y_s`: the literal
/// variant's residual grows under refinement while the registered one converges.
#[test]
fn y_law_first_order_term_acts_on_y_s() {
    let cfg = FlowConfig { n: 400, ..FlowConfig::default() };
    let ladder = laws::residual_ladder(&cfg, 3, &[0.01, 0.015]).unwrap();
    let good = laws::residual_report(&find("y"), &ladder, (0.0, 1.0)).unwrap();
    let bad = laws::residual_report(&laws::literal_y_variant(), &ladder, (0.0, 1.0)).unwrap();
    assert!(good.order >= 1.8, "{good:?}");
    assert!(bad.samples.iter().all(|s| s.max_residual > 1.0), "{bad:?}");
    assert!(bad.order < 0.0, "{bad:?}");
}

proptest! {
    #[test]
    fn w_theta_plus_z_d_matches_c_combination(
        q in 0.05f64..1.0, b_s in 0.0f64..2.0, z in -2.0f64..2.0,
        f in 0.0f64..1.0, fp in 0.0f64..3.0, fpp in -3.0f64..3.0,
    ) {
        let fq = [f, fp, fpp];
        let w = laws::w_theta(q, b_s, z, fq);
        let d = laws::d_theta(q, b_s, z, fq);
        let [c0, c1, c2] = laws::c_coefficients(q, b_s, fq);
        let lhs = w + z * d;
        let rhs = c0 + c1 * z + c2 * z * z;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn general_laws_reduce_to_round_laws(
        b in 0.1f64..5.0, b_s in -2.0f64..2.0, b_ss in -3.0f64..3.0, c in 1.0f64..10.0,
    ) {
        let jet = Jet { a: b, b, a_s: b_s, b_s, a_ss: b_ss, b_ss };
        let reg = laws::registry(c);
        let get = |n: &str| reg.iter().find(|l| l.name == n).unwrap().terms(&jet);
        let (g, r) = (get("b_s"), get("round b_s"));
        prop_assert!((g.q - r.q).abs() < 1e-12);
        prop_assert!((g.drift - r.drift).abs() < 1e-12);
        prop_assert!((g.reaction - r.reaction).abs() <= 1e-10 * (1.0 + r.reaction.abs()));
        // On a = b, H- = b b_ss - C, so its law is the law of T_F0 = b b_ss.
        let (h, t) = (get("H-"), get("round T_F0"));
        prop_assert!((h.q + c - t.q).abs() <= 1e-10 * (1.0 + t.q.abs()));
        prop_assert!((h.drift - t.drift).abs() < 1e-12);
        prop_assert!((h.reaction - t.reaction).abs() <= 1e-9 * (1.0 + t.reaction.abs()), "{} vs {}", h.reaction, t.reaction);
    }
}
