//! The `f_theta` family: even solutions of the second-order ODE in `Q` that
//! deform the inequality `Z_1 >= 0`, and the derived `Z_theta`, `W_theta` data.
//!
//! The ODE is integrated in `r = Q^2`, where it reads `r f_rr = R(r, f, f_r)`
//! with a regular singular point at `r = 0`.

use serde::Serialize;
use thiserror::Error;

use crate::geometry;
use crate::laws::{self, Profile};
use crate::state::MetricState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FThetaError {
    #[error("theta must lie in (0, 1], got {0}")]
    Theta(f64),
    #[error("step dr must lie in (0, 0.1], got {0}")]
    Step(f64),
    #[error("z_theta needs k = 2, state has k = {0}")]
    WrongK(u32),
}

/// `R(r, f, f_r)`, the right-hand side of `r f_rr = R`.
fn rhs_r(r: f64, f: f64, fr: f64) -> f64 {
    let om = 1.0 - r;
    (6.0 * r - 4.0 - r * f) * fr / (2.0 * om) + f * (f * f * r + 3.0 * f * r - 6.0 * f - 6.0 * r + 8.0) / (8.0 * om * om)
}

/// `f_r(0)` forced by regularity.
pub fn seed_slope(theta: f64) -> f64 {
    0.5 * theta - 0.375 * theta * theta
}

/// `f_rr(0)` from differentiating `r f_rr = R` once at `r = 0`.
pub fn seed_curvature(theta: f64) -> f64 {
    let (f, fr) = (theta, seed_slope(theta));
    let b_r = f * (f * f + 3.0 * f - 6.0) / 8.0 + f * (8.0 - 6.0 * f) / 4.0;
    ((2.0 - 2.0 * f) * fr + b_r) / 3.0
}

/// Below this `r` the series value of `f_rr` is used instead of `R / r`.
const SERIES_R: f64 = 1e-6;

fn f_rr(r: f64, f: f64, fr: f64, theta: f64) -> f64 {
    if r < SERIES_R {
        seed_curvature(theta)
    } else {
        rhs_r(r, f, fr) / r
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FThetaSolution {
    pub theta: f64,
    pub dr: f64,
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub f_r: Vec<f64>,
    pub f_rr: Vec<f64>,
    /// First `Q` with `f = 1`; zero for `theta = 1`.
    pub q_theta: f64,
    /// Integration stalled before `f` reached 1.
    pub tail_inconclusive: bool,
}

fn rk4(r: f64, y: [f64; 2], h: f64, theta: f64) -> [f64; 2] {
    let g = |r: f64, y: [f64; 2]| [y[1], f_rr(r, y[0], y[1], theta)];
    let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
    let k1 = g(r, y);
    let k2 = g(r + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = g(r + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = g(r + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn hermite(x0: f64, x1: f64, f0: f64, f1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * h * d1
}

/// Integrate from `f(0) = theta` until `f` reaches 1.
pub fn solve_ftheta(theta: f64, dr: f64) -> Result<FThetaSolution, FThetaError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(FThetaError::Theta(theta));
    }
    if !(dr > 0.0 && dr <= 0.1) {
        return Err(FThetaError::Step(dr));
    }
    let mut sol = FThetaSolution {
        theta,
        dr,
        r: vec![0.0],
        f: vec![theta],
        f_r: vec![seed_slope(theta)],
        f_rr: vec![seed_curvature(theta)],
        q_theta: 0.0,
        tail_inconclusive: false,
    };
    if theta == 1.0 {
        sol.f_r[0] = 0.0;
        sol.f_rr[0] = 0.0;
        return Ok(sol);
    }
    // Series seed just off the singular point, then one step onto the uniform grid.
    let rs = 1e-2 * dr.min(SERIES_R.sqrt());
    let (f1, f2) = (seed_slope(theta), seed_curvature(theta));
    let mut y = [theta + f1 * rs + 0.5 * f2 * rs * rs, f1 + f2 * rs];
    let mut r = rs;
    loop {
        let h = if sol.r.len() == 1 { dr - rs } else { dr.min(0.1 * (1.0 - r)) };
        if h < 1e-14 {
            sol.tail_inconclusive = true;
            break;
        }
        let next = rk4(r, y, h, theta);
        let rn = r + h;
        if next[0] >= 1.0 {
            // Locate f = 1 on the Hermite interpolant of the step.
            let d0 = y[1];
            let d1 = next[1];
            let (mut lo, mut hi) = (r, rn);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hermite(r, rn, y[0], next[0], d0, d1, mid) < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let rt = 0.5 * (lo + hi);
            let t = rk4(r, y, rt - r, theta);
            sol.r.push(rt);
            sol.f.push(1.0);
            sol.f_r.push(t[1]);
            sol.f_rr.push(f_rr(rt, 1.0, t[1], theta));
            sol.q_theta = rt.sqrt();
            break;
        }
        r = rn;
        y = next;
        sol.r.push(r);
        sol.f.push(y[0]);
        sol.f_r.push(y[1]);
        sol.f_rr.push(f_rr(r, y[0], y[1], theta));
    }
    if sol.tail_inconclusive {
        sol.q_theta = sol.r.last().copied().unwrap_or(0.0).sqrt();
    }
    Ok(sol)
}

impl FThetaSolution {
    fn r_theta(&self) -> f64 {
        self.q_theta * self.q_theta
    }

    /// `(f, f_r)` at `r` by Hermite interpolation of the table.
    fn interp(&self, r: f64) -> (f64, f64) {
        let i = match self.r.partition_point(|v| *v <= r) {
            0 => 0,
            p if p >= self.r.len() => self.r.len() - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.r[i], self.r[i + 1]);
        let f = hermite(x0, x1, self.f[i], self.f[i + 1], self.f_r[i], self.f_r[i + 1], r);
        let fr = hermite(x0, x1, self.f_r[i], self.f_r[i + 1], self.f_rr[i], self.f_rr[i + 1], r);
        (f, fr)
    }

    /// `(f, f', f'')` in the `Q` variable; `f = 1` beyond `Q_theta`, from the
    /// one-sided branch at the junction. `f''` comes from the ODE itself.
    pub fn eval(&self, q: f64) -> [f64; 3] {
        let q = q.abs();
        let r = q * q;
        if self.r.len() < 2 || r >= self.r_theta() {
            return [1.0, 0.0, 0.0];
        }
        let (f, fr) = self.interp(r);
        let frr = f_rr(r, f, fr, self.theta);
        [f, 2.0 * q * fr, 2.0 * fr + 4.0 * r * frr]
    }

    /// `f` as a profile for the `Z_theta` and `f(Q)` laws.
    pub fn profile(&self) -> Profile {
        let me = self.clone();
        let junction = (self.q_theta > 0.0).then_some(self.q_theta);
        Profile::new(move |q| me.eval(q), junction)
    }

    /// `w_theta(1 - f)` at `Q`, which vanishes exactly on solutions.
    pub fn identity_residual(&self, q: f64) -> f64 {
        let fq = self.eval(q);
        let [a0, a1, a2] = w_coefficients(q, fq[0], fq[1], fq[2]);
        let z = 1.0 - fq[0];
        a0 + a1 * z + a2 * z * z
    }
}

/// `(A0, A1, A2)` for `Q` in `(0, 1)`.
pub fn w_coefficients(q: f64, f: f64, f_prime: f64, f_double: f64) -> [f64; 3] {
    laws::a_coefficients(q, [f, f_prime, f_double])
}

/// `Z_theta = x/Q^2 + f_theta(Q)`; the tip value is the even extrapolation
/// of the neighbouring nodes.
pub fn z_theta(state: &MetricState, sol: &FThetaSolution) -> Result<Vec<f64>, FThetaError> {
    if state.k() != 2 {
        return Err(FThetaError::WrongK(state.k()));
    }
    let kq = geometry::kahler_quantities(state);
    let mut z: Vec<f64> = kq.q.iter().zip(&kq.x).map(|(q, x)| x / (q * q) + sol.eval(*q)[0]).collect();
    if state.is_tip() && z.len() > 3 {
        let s = state.grid().nodes();
        z[0] = even_limit([s[1], s[2], s[3]], [z[1], z[2], z[3]]);
    }
    Ok(z)
}

/// Value at 0 of the quadratic in `s^2` through three samples.
pub(crate) fn even_limit(s: [f64; 3], v: [f64; 3]) -> f64 {
    let x = s.map(|s| s * s);
    let l0 = x[1] * x[2] / ((x[0] - x[1]) * (x[0] - x[2]));
    let l1 = x[0] * x[2] / ((x[1] - x[0]) * (x[1] - x[2]));
    let l2 = x[0] * x[1] / ((x[2] - x[0]) * (x[2] - x[1]));
    l0 * v[0] + l1 * v[1] + l2 * v[2]
}

/// Two-sided bound on `b_s/Q - Z_theta` at one node.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BorderMargin {
    pub node: usize,
    pub q: f64,
    /// `(b_s/Q - Z) - (1 - f)`.
    pub lower: f64,
    /// `min(1, 1 - f + 3/Q^2 - 3) - (b_s/Q - Z)`.
    pub upper: f64,
}

/// Margins of `1 - f <= b_s/Q - Z <= min(1, -f + 3/Q^2 - 2)` on the nodes
/// away from the tip where `y <= 0`, `T2 >= 0`, `T3 >= 0` and `Z >= 0` hold.
pub fn borders_check(state: &MetricState, sol: &FThetaSolution) -> Result<Vec<BorderMargin>, FThetaError> {
    let z = z_theta(state, sol)?;
    let qs = geometry::scale_invariants(state, geometry::default_c_hpm(state.k()));
    let first = usize::from(state.is_tip());
    let mut out = Vec::new();
    for j in first..state.len() {
        let q = qs.q[j];
        if !(q > 0.0) || qs.y[j] > 0.0 || qs.t2[j] < 0.0 || qs.t3[j] < 0.0 || z[j] < 0.0 {
            continue;
        }
        let f = sol.eval(q)[0];
        let mid = qs.b_s[j] / q - z[j];
        let upper = 1.0f64.min(-f + 3.0 / (q * q) - 2.0);
        out.push(BorderMargin { node: j, q, lower: mid - (1.0 - f), upper: upper - mid });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_values() {
        assert!((seed_slope(0.5) - 0.15625).abs() < 1e-15);
        // f''(0) in Q is 2 f_r(0) = theta (4 - 3 theta) / 4.
        assert!((2.0 * seed_slope(0.5) - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn theta_one_is_constant() {
        let s = solve_ftheta(1.0, 1e-3).unwrap();
        assert_eq!(s.q_theta, 0.0);
        assert_eq!(s.eval(0.3), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_theta() {
        assert!(solve_ftheta(0.0, 1e-3).is_err());
        assert!(solve_ftheta(1.5, 1e-3).is_err());
    }

    #[test]
    fn even_limit_of_quadratic() {
        let v = even_limit([0.1, 0.2, 0.3], [1.0 + 0.01, 1.0 + 0.04, 1.0 + 0.09]);
        assert!((v - 1.0).abs() < 1e-12);
    }
}
