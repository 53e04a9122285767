use u2flow::certificates::{self, Verdict};
use u2flow::ftheta::{self, FThetaError};

const THETAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const DR: f64 = 1e-4;

#[test]
fn defining_identity_holds_along_each_solution() {
    for theta in THETAS {
        let sol = ftheta::solve_ftheta(theta, DR).unwrap();
        assert!(!sol.tail_inconclusive, "theta {theta}");
        let worst = (1..1000)
            .map(|i| sol.q_theta * i as f64 / 1000.0)
            .map(|q| sol.identity_residual(q).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-8, "theta {theta}: {worst}");
    }
}

#[test]
fn profiles_increase_and_q_theta_decreases_in_theta() {
    let mut last_q = f64::INFINITY;
    for theta in THETAS {
        let sol = ftheta::solve_ftheta(theta, DR).unwrap();
        assert!(sol.f.windows(2).all(|w| w[1] > w[0]), "theta {theta}");
        assert!(sol.q_theta > 0.0 && sol.q_theta < 1.0);
        assert!(sol.q_theta < last_q, "theta {theta}: {} after {last_q}", sol.q_theta);
        last_q = sol.q_theta;
    }
}

#[test]
fn second_derivative_at_the_origin() {
    for theta in THETAS {
        let sol = ftheta::solve_ftheta(theta, DR).unwrap();
        let want = theta * (4.0 - 3.0 * theta) / 4.0;
        assert!((sol.eval(0.0)[2] - want).abs() <= 1e-8, "theta {theta}");
        // Richardson-extrapolated even difference quotient of the solution itself.
        let f0 = sol.eval(0.0)[0];
        let quot = |h: f64| 2.0 * (sol.eval(h)[0] - f0) / (h * h);
        let fd = (4.0 * quot(0.005) - quot(0.01)) / 3.0;
        assert!((fd - want).abs() <= 1e-6, "theta {theta}: {fd} vs {want}");
    }
}

#[test]
fn quadratic_stays_positive_below_the_junction() {
    for theta in [0.1, 0.5, 0.9] {
        let sol = ftheta::solve_ftheta(theta, DR).unwrap();
        let rep = certificates::quadratic_positive_check(&sol);
        assert_eq!(rep.verdict, Verdict::Verified, "{rep:?}");
        assert!(!rep.exact);
    }
}

#[test]
fn constant_profile_is_flat_beyond_the_junction() {
    let sol = ftheta::solve_ftheta(0.9, DR).unwrap();
    assert!(sol.eval(sol.q_theta - 1e-3)[0] < 1.0);
    assert_eq!(sol.eval(sol.q_theta + 1e-3), [1.0, 0.0, 0.0]);
}

#[test]
fn rejects_bad_arguments() {
    assert_eq!(ftheta::solve_ftheta(-0.1, DR).unwrap_err(), FThetaError::Theta(-0.1));
    assert_eq!(ftheta::solve_ftheta(0.5, 0.5).unwrap_err(), FThetaError::Step(0.5));
}
