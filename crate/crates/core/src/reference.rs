//! Reference geometries: the Eguchi-Hanson profile, shrinking cylinders and
//! the shrinking-soliton shooting problem.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::grid::RadialGrid;
use crate::state::{InnerBoundary, MetricState, StateError};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("parameter {name} = {value} out of range")]
    Parameter { name: &'static str, value: f64 },
    #[error("grid extends to {xi_max}, profile only to {s_max}")]
    OutOfRange { xi_max: f64, s_max: f64 },
    #[error("time {t} is at or past extinction {extinction}")]
    PastExtinction { t: f64, extinction: f64 },
    #[error("need at least {needed} samples past the fit start, found {found}")]
    InsufficientRange { needed: usize, found: usize },
    #[error("integration stopped early at s = {0}")]
    Truncated(f64),
    #[error(transparent)]
    State(#[from] StateError),
}

fn check(name: &'static str, value: f64) -> Result<(), ReferenceError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ReferenceError::Parameter { name, value })
    }
}

fn rk4<const D: usize>(y: [f64; D], h: f64, f: impl Fn(&[f64; D]) -> [f64; D]) -> [f64; D] {
    let add = |y: &[f64; D], k: &[f64; D], c: f64| {
        let mut out = *y;
        for i in 0..D {
            out[i] += c * k[i];
        }
        out
    };
    let k1 = f(&y);
    let k2 = f(&add(&y, &k1, 0.5 * h));
    let k3 = f(&add(&y, &k2, 0.5 * h));
    let k4 = f(&add(&y, &k3, h));
    let mut out = y;
    for i in 0..D {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Cubic Hermite interpolation of samples `(s, f, f_s)` at `z`.
fn hermite(s: &[f64], f: &[f64], df: &[f64], z: f64) -> f64 {
    let i = match s.partition_point(|v| *v <= z) {
        0 => 0,
        p if p >= s.len() => s.len() - 2,
        p => p - 1,
    };
    let h = s[i + 1] - s[i];
    let t = (z - s[i]) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * f[i]
        + (t3 - 2.0 * t2 + t) * h * df[i]
        + (-2.0 * t3 + 3.0 * t2) * f[i + 1]
        + (t3 - t2) * h * df[i + 1]
}

/// Eguchi-Hanson warping functions normalized to `b(0) = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct EhProfile {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub a_s: Vec<f64>,
    pub b_s: Vec<f64>,
    pub ds: f64,
    pub s_max: f64,
}

fn eh_field(y: &[f64; 2]) -> [f64; 2] {
    let q = y[0] / y[1];
    [2.0 - q * q, q]
}

/// RK4 integration of `a_s = 2 - Q^2`, `b_s = Q` from `(a, b) = (0, 1)`.
pub fn integrate_eh(s_max: f64, ds: f64) -> Result<EhProfile, ReferenceError> {
    check("s_max", s_max)?;
    check("ds", ds)?;
    let steps = (s_max / ds).ceil() as usize;
    let h = s_max / steps as f64;
    let mut p = EhProfile {
        s: Vec::with_capacity(steps + 1),
        a: Vec::with_capacity(steps + 1),
        b: Vec::with_capacity(steps + 1),
        a_s: Vec::with_capacity(steps + 1),
        b_s: Vec::with_capacity(steps + 1),
        ds: h,
        s_max,
    };
    let mut y = [0.0, 1.0];
    for i in 0..=steps {
        let d = eh_field(&y);
        p.s.push(i as f64 * h);
        p.a.push(y[0]);
        p.b.push(y[1]);
        p.a_s.push(d[0]);
        p.b_s.push(d[1]);
        y = rk4(y, h, eh_field);
    }
    Ok(p)
}

impl EhProfile {
    /// `(a, b)` at arclength `s` by cubic Hermite interpolation.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        (hermite(&self.s, &self.a, &self.a_s, s), hermite(&self.s, &self.b, &self.b_s, s))
    }
}

/// Resample the profile on a grid with `u = 1`; `scale` multiplies all lengths.
pub fn eh_as_metric_state(profile: &EhProfile, grid: Arc<RadialGrid>, scale: f64) -> Result<MetricState, ReferenceError> {
    check("scale", scale)?;
    if grid.xi_max() > profile.s_max * scale * (1.0 + 1e-12) {
        return Err(ReferenceError::OutOfRange { xi_max: grid.xi_max(), s_max: profile.s_max * scale });
    }
    let (mut a, mut b) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for &x in grid.nodes() {
        let (pa, pb) = profile.eval(x / scale);
        a.push(scale * pa);
        b.push(scale * pb);
    }
    a[0] = 0.0;
    let n = grid.len();
    Ok(MetricState::new(grid, vec![1.0; n], a, b, 0.0, 2, InnerBoundary::Tip)?)
}

fn smooth_cutoff(z: f64) -> f64 {
    let psi = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    if z <= 0.0 {
        1.0
    } else if z >= 1.0 {
        0.0
    } else {
        psi(1.0 - z) / (psi(1.0 - z) + psi(z))
    }
}

/// Eguchi-Hanson core of size `scale` whose slopes are switched off smoothly
/// between `cap_radius` and `2 cap_radius`, leaving a squashed cylinder.
/// Also returns the first class condition (`a_s, b_s >= 0`, `y <= 0`,
/// `Q <= 1`) that the integrated profile violates, judged on the exact slopes.
pub fn eh_capped_profile(scale: f64, cap_radius: f64, xs: &[f64]) -> (Vec<f64>, Vec<f64>, Option<&'static str>) {
    let r = cap_radius / scale;
    let sigma_max = xs.last().copied().unwrap_or(0.0) / scale;
    let steps = ((sigma_max / 1e-3).ceil() as usize).max(1);
    let h = sigma_max / steps as f64;
    let field = |sig: f64, y: &[f64; 4]| -> [f64; 4] {
        let q = y[0] / y[1];
        let chi = smooth_cutoff((sig - r) / r);
        [2.0 - q * q, q, chi * (2.0 - q * q), chi * q]
    };
    let (mut s, mut a, mut b, mut da, mut db) = (vec![], vec![], vec![], vec![], vec![]);
    let mut y = [0.0, 1.0, 0.0, 1.0];
    for i in 0..=steps {
        let sig = i as f64 * h;
        let d = field(sig, &y);
        s.push(sig);
        a.push(y[2]);
        b.push(y[3]);
        da.push(d[2]);
        db.push(d[3]);
        // The cutoff depends on sigma, so carry it as a fifth, trivial component.
        let z = rk4([y[0], y[1], y[2], y[3], sig], h, |v| {
            let d = field(v[4], &[v[0], v[1], v[2], v[3]]);
            [d[0], d[1], d[2], d[3], 1.0]
        });
        y = [z[0], z[1], z[2], z[3]];
    }
    let violation = (0..s.len()).find_map(|i| {
        let q = a[i] / b[i];
        if da[i] < 0.0 {
            Some("a_s < 0")
        } else if db[i] < 0.0 {
            Some("b_s < 0")
        } else if db[i] - q > 1e-12 {
            Some("y > 0")
        } else if q > 1.0 {
            Some("Q > 1")
        } else {
            None
        }
    });
    let mut av = xs.iter().map(|x| scale * hermite(&s, &a, &da, x / scale)).collect::<Vec<_>>();
    let bv = xs.iter().map(|x| scale * hermite(&s, &b, &db, x / scale)).collect::<Vec<_>>();
    av[0] = 0.0;
    (av, bv, violation)
}

/// Radius `sqrt(b0^2 - 4t)` of the shrinking round cylinder.
pub fn exact_cylinder_radius(b0: f64, t: f64) -> Result<f64, ReferenceError> {
    check("b0", b0)?;
    let extinction = b0 * b0 / 4.0;
    if !(t < extinction) {
        return Err(ReferenceError::PastExtinction { t, extinction });
    }
    Ok((b0 * b0 - 4.0 * t).sqrt())
}

/// Round cylinder segment at time `t` on the given grid.
pub fn exact_cylinder(b0: f64, t: f64, grid: Arc<RadialGrid>) -> Result<MetricState, ReferenceError> {
    let r = exact_cylinder_radius(b0, t)?;
    let n = grid.len();
    Ok(MetricState::new(grid, vec![1.0; n], vec![r; n], vec![r; n], t, 1, InnerBoundary::Segment)?)
}

/// Shooting parameters for the shrinking-soliton system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolitonParams {
    pub k: u32,
    pub b0: f64,
    pub rho: f64,
    pub s_max: f64,
    /// `f_ss(0)`. The tip expansion leaves it free; `None` selects `rho`.
    pub tip_f_ss: Option<f64>,
    pub y_cap: f64,
    /// Local tolerance of the step-doubling controller, relative.
    pub tol: f64,
}

impl SolitonParams {
    pub fn new(k: u32, b0: f64, rho: f64, s_max: f64) -> Self {
        SolitonParams { k, b0, rho, s_max, tip_f_ss: None, y_cap: 1e3, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    BNonPositive,
    ANonPositive,
    YBeyondCap,
    NonFinite,
}

/// Why a soliton integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Reached,
    Violation { violation: ViolationKind, s: f64 },
    /// The controller could not meet its tolerance above the minimum step.
    StepUnderflow { s: f64, h: f64 },
}

/// Samples of a soliton integration with the quantities used to exclude
/// shrinkers.
#[derive(Debug, Clone, Serialize)]
pub struct SolitonState {
    pub params: SolitonParams,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub a_s: Vec<f64>,
    pub b: Vec<f64>,
    pub b_s: Vec<f64>,
    pub f_s: Vec<f64>,
    pub q: Vec<f64>,
    pub q_s: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_s: Vec<f64>,
    pub g: Vec<f64>,
    pub t1: Vec<f64>,
    /// `y_s` at the tip from the series expansion.
    pub tip_y_s: f64,
    pub termination: Termination,
}

/// `[a_ss, b_ss, f_ss]` from the soliton equations.
pub fn soliton_second_derivatives(rho: f64, v: &[f64; 5]) -> [f64; 3] {
    let [a, a_s, b, b_s, f_s] = *v;
    let a_ss = 2.0 * a.powi(3) / b.powi(4) - 2.0 * a_s * b_s / b + a_s * f_s - rho * a;
    let b_ss = 4.0 / b - 2.0 * a * a / b.powi(3) - a_s * b_s / a - b_s * b_s / b + b_s * f_s - rho * b;
    [a_ss, b_ss, a_ss / a + 2.0 * b_ss / b + rho]
}

/// Residuals of the three soliton equations for a given 2-jet
/// `(a, a_s, a_ss, b, b_s, b_ss, f_s, f_ss)`.
pub fn soliton_residual(rho: f64, jet: [f64; 8]) -> [f64; 3] {
    let [a, a_s, a_ss, b, b_s, b_ss, f_s, f_ss] = jet;
    let [ea, eb, _] = soliton_second_derivatives(rho, &[a, a_s, b, b_s, f_s]);
    [a_ss - ea, b_ss - eb, f_ss - (a_ss / a + 2.0 * b_ss / b + rho)]
}

/// Gaussian soliton on flat space: `a = b = s`, `f_s = rho s`.
pub fn gaussian_soliton_jet(rho: f64, s: f64) -> [f64; 8] {
    [s, 1.0, 0.0, s, 1.0, 0.0, rho * s, rho]
}

/// Round cylinder soliton of radius `sqrt(2/rho)` with `f_s = rho s`.
pub fn cylinder_soliton_jet(rho: f64, s: f64) -> [f64; 8] {
    let c = (2.0 / rho).sqrt();
    [c, 0.0, 0.0, c, 0.0, 0.0, rho * s, rho]
}

/// Second-order tip series: returns the seed point and `y_s(0)`.
fn soliton_seed(p: &SolitonParams) -> (f64, [f64; 5], f64) {
    let (k, b0, rho) = (p.k as f64, p.b0, p.rho);
    let phi1 = p.tip_f_ss.unwrap_or(rho);
    // b_ss(0) from L'Hopital on a_s b_s / a; a_sss(0) from differentiating the a equation.
    let b_ss0 = 2.0 / b0 - 0.5 * rho * b0;
    let a_sss0 = k * (phi1 - rho) - 2.0 * k * b_ss0 / b0;
    let s0 = 10.0 * f64::EPSILON.cbrt() * b0;
    let seed = [
        k * s0 + a_sss0 * s0.powi(3) / 6.0,
        k + 0.5 * a_sss0 * s0 * s0,
        b0 + 0.5 * b_ss0 * s0 * s0,
        b_ss0 * s0,
        phi1 * s0,
    ];
    (s0, seed, b_ss0 - k / b0)
}

fn violation(v: &[f64; 5], y: f64, cap: f64) -> Option<ViolationKind> {
    if v.iter().any(|c| !c.is_finite()) || !y.is_finite() {
        Some(ViolationKind::NonFinite)
    } else if v[2] <= 0.0 {
        Some(ViolationKind::BNonPositive)
    } else if v[0] <= 0.0 {
        Some(ViolationKind::ANonPositive)
    } else if y.abs() > cap {
        Some(ViolationKind::YBeyondCap)
    } else {
        None
    }
}

impl SolitonState {
    fn empty(params: SolitonParams, tip_y_s: f64) -> Self {
        SolitonState {
            params,
            s: vec![],
            a: vec![],
            a_s: vec![],
            b: vec![],
            b_s: vec![],
            f_s: vec![],
            q: vec![],
            q_s: vec![],
            x: vec![],
            y: vec![],
            y_s: vec![],
            g: vec![],
            t1: vec![],
            tip_y_s,
            termination: Termination::Reached,
        }
    }

    fn push(&mut self, s: f64, v: &[f64; 5]) {
        let [a, a_s, b, b_s, f_s] = *v;
        let [_, b_ss, _] = soliton_second_derivatives(self.params.rho, v);
        let q = a / b;
        let q_s = (a_s - q * b_s) / b;
        let (x, y) = (a_s + q * q - 2.0, b_s - q);
        self.s.push(s);
        self.a.push(a);
        self.a_s.push(a_s);
        self.b.push(b);
        self.b_s.push(b_s);
        self.f_s.push(f_s);
        self.q.push(q);
        self.q_s.push(q_s);
        self.x.push(x);
        self.y.push(y);
        self.y_s.push(b_ss - q_s);
        self.g.push((x + 2.0).powi(2) + q * q * (2.0 * x + y * y));
        self.t1.push(a_s + 2.0 * q * q - 2.0);
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Samples with `Q <= 1`, `Q_s >= 0` and `T1 > 0` but `G <= 0`.
    pub fn g_counterexamples(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.q[i] <= 1.0 && self.q_s[i] >= 0.0 && self.t1[i] > 0.0 && self.g[i] <= 0.0)
            .collect()
    }
}

/// Step-doubling RK4 from `(s0, v0)` to `s_max`, halting on violation.
fn integrate_from(mut st: SolitonState, s0: f64, v0: [f64; 5], h0: f64) -> SolitonState {
    let p = st.params;
    let field = |v: &[f64; 5]| {
        let [a_ss, b_ss, f_ss] = soliton_second_derivatives(p.rho, v);
        [v[1], a_ss, v[3], b_ss, f_ss]
    };
    let h_min = 1e-14 * p.s_max.max(1.0);
    let h_max = p.s_max / 200.0;
    let (mut s, mut v) = (s0, v0);
    let mut h = h0.min(h_max);
    st.push(s, &v);
    while s < p.s_max {
        h = h.min(p.s_max - s);
        let coarse = rk4(v, h, field);
        let fine = rk4(rk4(v, 0.5 * h, field), 0.5 * h, field);
        let err = coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| (c - f).abs() / (1.0 + f.abs()))
            .fold(0.0, f64::max);
        if !(err <= p.tol) && err.is_finite() || err.is_nan() {
            if h * 0.5 < h_min {
                st.termination = Termination::StepUnderflow { s, h };
                return st;
            }
            h *= 0.5;
            continue;
        }
        s += h;
        v = fine;
        let y = v[3] - v[0] / v[2];
        if let Some(kind) = violation(&v, y, p.y_cap) {
            st.push(s, &v);
            st.termination = Termination::Violation { violation: kind, s };
            return st;
        }
        st.push(s, &v);
        if err < p.tol / 64.0 {
            h = (2.0 * h).min(h_max);
        }
    }
    st
}

/// Shoot the soliton system out of the tip of `M_k`.
pub fn integrate_soliton(params: SolitonParams) -> Result<SolitonState, ReferenceError> {
    check("b0", params.b0)?;
    check("s_max", params.s_max)?;
    check("y_cap", params.y_cap)?;
    check("tol", params.tol)?;
    if params.k == 0 {
        return Err(ReferenceError::Parameter { name: "k", value: 0.0 });
    }
    if !params.rho.is_finite() {
        return Err(ReferenceError::Parameter { name: "rho", value: params.rho });
    }
    let (s0, seed, tip_y_s) = soliton_seed(&params);
    // Near the regular singular point the steps must start at the seed scale.
    Ok(integrate_from(SolitonState::empty(params, tip_y_s), s0, seed, s0))
}

/// Integrate from regular data `[a, a_s, b, b_s, f_s]` at `s0 > 0`.
pub fn integrate_soliton_from(
    params: SolitonParams,
    s0: f64,
    data: [f64; 5],
) -> Result<SolitonState, ReferenceError> {
    check("s0", s0)?;
    check("s_max", params.s_max - s0)?;
    Ok(integrate_from(SolitonState::empty(params, f64::NAN), s0, data, 1e-3 * params.s_max))
}

/// Least-squares fit `f_s ~ slope s + intercept` over the last third.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialFit {
    pub slope: f64,
    pub intercept: f64,
    pub rho: f64,
    pub samples: usize,
}

impl PotentialFit {
    pub fn relative_error(&self) -> f64 {
        (self.slope - self.rho).abs() / self.rho.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn soliton_potential_asymptotics(state: &SolitonState) -> Result<PotentialFit, ReferenceError> {
    if state.termination != Termination::Reached {
        return Err(ReferenceError::Truncated(state.s.last().copied().unwrap_or(0.0)));
    }
    let s_start = state.s[0] + 2.0 * (state.params.s_max - state.s[0]) / 3.0;
    let idx: Vec<usize> = (0..state.len()).filter(|&i| state.s[i] >= s_start).collect();
    if idx.len() < 3 {
        return Err(ReferenceError::InsufficientRange { needed: 3, found: idx.len() });
    }
    let n = idx.len() as f64;
    let ms = idx.iter().map(|&i| state.s[i]).sum::<f64>() / n;
    let mf = idx.iter().map(|&i| state.f_s[i]).sum::<f64>() / n;
    let (num, den) = idx.iter().fold((0.0, 0.0), |(nu, de), &i| {
        let ds = state.s[i] - ms;
        (nu + ds * (state.f_s[i] - mf), de + ds * ds)
    });
    let slope = num / den;
    Ok(PotentialFit { slope, intercept: mf - slope * ms, rho: state.params.rho, samples: idx.len() })
}
