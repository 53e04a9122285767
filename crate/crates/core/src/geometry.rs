//! Pointwise geometry of a [`MetricState`]: arclength, curvature components,
//! Kähler deviations and the scale-invariant combinations built from them.

use serde::Serialize;
use thiserror::Error;

use crate::state::{Derivatives, MetricState, Parity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("field has {got} samples, grid has {expected}")]
    Length { got: usize, expected: usize },
    #[error("tip stencil needs a declared parity")]
    UnknownParity,
    #[error("field must be even across the tip")]
    OddField,
    #[error("non-finite {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },
}

/// Arclength `s(xi) = int_0^xi u`, by the trapezoid rule with the Hermite end
/// correction (fourth order in the spacing).
pub fn radial_distance(state: &MetricState) -> Vec<f64> {
    let x = state.grid().nodes();
    let u = state.u();
    let du = state.derivatives().u_xi;
    let mut s = Vec::with_capacity(u.len());
    s.push(0.0);
    for j in 1..u.len() {
        let h = x[j] - x[j - 1];
        let piece = 0.5 * h * (u[j - 1] + u[j]) + h * h / 12.0 * (du[j - 1] - du[j]);
        s.push(s[j - 1] + piece);
    }
    s
}

/// Cumulative integral in `s` of a field sampled on the grid (same rule as [`radial_distance`]).
pub fn integrate_in_s(state: &MetricState, f: &[f64], parity: Parity) -> Vec<f64> {
    let x = state.grid().nodes();
    let g: Vec<f64> = f.iter().zip(state.u()).map(|(f, u)| f * u).collect();
    let dg = state.grid().d1(&g, state.end_for(parity), crate::grid::OuterEnd::OneSided);
    let mut out = Vec::with_capacity(g.len());
    out.push(0.0);
    for j in 1..g.len() {
        let h = x[j] - x[j - 1];
        out.push(out[j - 1] + 0.5 * h * (g[j - 1] + g[j]) + h * h / 12.0 * (dg[j - 1] - dg[j]));
    }
    out
}

/// `(1/u) d/dxi` of a sampled field.
pub fn s_derivative(field: &[f64], parity: Parity, state: &MetricState) -> Result<Vec<f64>, GeometryError> {
    check_len(field, state)?;
    if state.is_tip() && parity == Parity::Unspecified {
        return Err(GeometryError::UnknownParity);
    }
    let d = state.derivatives();
    let (mut f_s, _) = state.s_derivs(field, parity, &d.u_xi);
    if state.is_tip() && parity == Parity::Even {
        f_s[0] = 0.0;
    }
    Ok(f_s)
}

/// Laplacian `f_ss + (a_s/a + 2 b_s/b) f_s` of an invariant function.
pub fn laplacian(field: &[f64], parity: Parity, state: &MetricState) -> Result<Vec<f64>, GeometryError> {
    check_len(field, state)?;
    if parity == Parity::Odd {
        return Err(GeometryError::OddField);
    }
    if state.is_tip() && parity == Parity::Unspecified {
        return Err(GeometryError::UnknownParity);
    }
    let d = state.derivatives();
    let (f_s, f_ss) = state.s_derivs(field, parity, &d.u_xi);
    let (a, b) = (state.a(), state.b());
    let mut out: Vec<f64> = (0..field.len())
        .map(|j| f_ss[j] + (d.a_s[j] / a[j] + 2.0 * d.b_s[j] / b[j]) * f_s[j])
        .collect();
    if state.is_tip() {
        // a_s f_s / a -> f_ss and b_s -> 0 at the zero section.
        out[0] = 2.0 * f_ss[0];
    }
    Ok(out)
}

fn check_len(field: &[f64], state: &MetricState) -> Result<(), GeometryError> {
    if field.len() != state.len() {
        return Err(GeometryError::Length { got: field.len(), expected: state.len() });
    }
    Ok(())
}

/// The nine nonvanishing curvature components, in an orthonormal coframe.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureFrame {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m3: Vec<f64>,
    pub h12: Vec<f64>,
    pub h23: Vec<f64>,
    pub h31: Vec<f64>,
    /// Full tensor norm: four copies of each diagonal curvature-operator entry,
    /// eight of each off-diagonal `M` entry.
    pub riem_norm: Vec<f64>,
}

impl CurvatureFrame {
    pub fn max_norm(&self) -> f64 {
        self.riem_norm.iter().fold(0.0, |m, v| m.max(*v))
    }
}

pub fn riem_norm(k1: f64, k2: f64, m1: f64, m2: f64, h12: f64, h23: f64) -> f64 {
    let diag = k1 * k1 + 2.0 * k2 * k2 + 2.0 * h12 * h12 + h23 * h23;
    let off = m1 * m1 + 2.0 * m2 * m2;
    (4.0 * diag + 8.0 * off).sqrt()
}

pub fn curvature(state: &MetricState) -> Result<CurvatureFrame, GeometryError> {
    let d = state.derivatives();
    curvature_from(state, &d)
}

pub fn curvature_from(state: &MetricState, d: &Derivatives) -> Result<CurvatureFrame, GeometryError> {
    let (a, b) = (state.a(), state.b());
    let n = state.len();
    let mut f = CurvatureFrame {
        k1: vec![0.0; n],
        k2: vec![0.0; n],
        k3: vec![0.0; n],
        m1: vec![0.0; n],
        m2: vec![0.0; n],
        m3: vec![0.0; n],
        h12: vec![0.0; n],
        h23: vec![0.0; n],
        h31: vec![0.0; n],
        riem_norm: vec![0.0; n],
    };
    for j in 0..n {
        let (a, b, a_s, b_s) = (a[j], b[j], d.a_s[j], d.b_s[j]);
        let q = a / b;
        let b2 = b * b;
        let (k1, h12) = if j == 0 && state.is_tip() {
            // -a_ss/a -> -a_sss/a_s and a_s b_s/(a b) -> b_ss/b.
            let a_sss = state.grid().tip_slope_odd(&d.a_ss) / state.u()[0];
            (-a_sss / a_s, -d.b_ss[0] / b)
        } else {
            (-d.a_ss[j] / a, a * a / (b2 * b2) - a_s * b_s / (a * b))
        };
        f.k1[j] = k1;
        f.k2[j] = -d.b_ss[j] / b;
        f.k3[j] = -d.b_ss[j] / b;
        f.m1[j] = -2.0 / b2 * (a_s - q * b_s);
        f.m2[j] = (a_s - q * b_s) / b2;
        f.m3[j] = (a_s - q * b_s) / b2;
        f.h12[j] = h12;
        f.h31[j] = h12;
        f.h23[j] = 4.0 / b2 - 3.0 * a * a / (b2 * b2) - (b_s / b).powi(2);
        f.riem_norm[j] = riem_norm(k1, f.k2[j], f.m1[j], f.m2[j], h12, f.h23[j]);
        if !f.riem_norm[j].is_finite() {
            return Err(GeometryError::NonFinite { what: "curvature", node: j });
        }
    }
    Ok(f)
}

/// Default constant in `H±`: the smallest integer above `k^2 + k`.
pub fn default_c_hpm(k: u32) -> f64 {
    let k = f64::from(k);
    k * k + k + 1.0
}

/// Scale-invariant diagnostics on one snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct QuantitySet {
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub a_s: Vec<f64>,
    pub b_s: Vec<f64>,
    pub bbss: Vec<f64>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub t3: Vec<f64>,
    pub t4: Vec<f64>,
    pub tf1: Vec<f64>,
    pub tf2: Vec<f64>,
    pub h_minus: Vec<f64>,
    pub h_plus: Vec<f64>,
    pub c_hpm: f64,
}

/// `Q`, `x`, `y` only.
#[derive(Debug, Clone, Serialize)]
pub struct Kahler {
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn kahler_quantities(state: &MetricState) -> Kahler {
    let qs = scale_invariants(state, default_c_hpm(state.k()));
    Kahler { q: qs.q, x: qs.x, y: qs.y }
}

pub fn scale_invariants(state: &MetricState, c_hpm: f64) -> QuantitySet {
    let d = state.derivatives();
    scale_invariants_from(state, &d, c_hpm)
}

pub fn scale_invariants_from(state: &MetricState, d: &Derivatives, c_hpm: f64) -> QuantitySet {
    let n = state.len();
    let mut qs = QuantitySet {
        q: vec![0.0; n],
        x: vec![0.0; n],
        y: vec![0.0; n],
        a_s: d.a_s.clone(),
        b_s: d.b_s.clone(),
        bbss: vec![0.0; n],
        t1: vec![0.0; n],
        t2: vec![0.0; n],
        t3: vec![0.0; n],
        t4: vec![0.0; n],
        tf1: vec![0.0; n],
        tf2: vec![0.0; n],
        h_minus: vec![0.0; n],
        h_plus: vec![0.0; n],
        c_hpm,
    };
    for j in 0..n {
        let q = state.a()[j] / state.b()[j];
        let (a_s, b_s) = (d.a_s[j], d.b_s[j]);
        let bbss = state.b()[j] * d.b_ss[j];
        let x = a_s + q * q - 2.0;
        let y = b_s - q;
        let one_minus = 1.0 - b_s * b_s;
        qs.q[j] = q;
        qs.x[j] = x;
        qs.y[j] = y;
        qs.bbss[j] = bbss;
        qs.t1[j] = a_s + 2.0 * q * q - 2.0;
        qs.t2[j] = q * y - x;
        qs.t3[j] = a_s - q * b_s - q * q + 1.0;
        qs.t4[j] = a_s - 0.5 * q * b_s - (1.0 - q * q);
        qs.tf1[j] = bbss + one_minus;
        qs.tf2[j] = bbss + one_minus - one_minus * one_minus;
        qs.h_minus[j] = bbss + a_s * a_s - b_s * b_s - c_hpm;
        qs.h_plus[j] = bbss - a_s * a_s - b_s * b_s + c_hpm;
    }
    qs
}
