//! Method-of-lines integration of the reduced Ricci flow. In a fixed radial
//! coordinate `xi` the system reads
//!
//! ```text
//! u_t / u = a_ss/a + 2 b_ss/b
//! a_t     = a_ss - 2 a^3/b^4 + 2 a_s b_s/b
//! b_t     = b_ss - 4/b + 2 a^2/b^3 + a_s b_s/a + b_s^2/b
//! ```
//!
//! At a tip the closure slope `a_xi(0)/u(0) = k` is a linear invariant of the
//! semi-discrete system: the tip lapse is advanced with `u_t(0) = D(a_t)/k`
//! where `D` is the odd-extension slope stencil, so Runge-Kutta stages keep it
//! to round-off.
//!
//! The lapse equation carries no smoothing, so over long runs grid-scale
//! noise in `u` builds up next to the tip. [`Gauge::Arclength`] removes it by
//! keeping `u = 1`: points then move with the tangential velocity
//! `V = int_0^s (a_ss/a + 2 b_ss/b)`, which adds `-a_s V` and `-b_s V` to the
//! rates of `a` and `b`.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, GeometryError};
use crate::grid::{Grading, GridError, InnerEnd, OuterEnd, RadialGrid, MIN_INTERVALS};
use crate::io::{self, IoError};
use crate::reference;
use crate::state::{FieldEnds, InnerBoundary, MetricState, StateError};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("non-finite rate of {field} at node {node}")]
    NonFinite { field: &'static str, node: usize },
    #[error("{field} became non-positive at node {node} after a step")]
    LostPositivity { field: &'static str, node: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("initial data rejected: {0}")]
    InitialData(String),
    #[error("fewer than {needed} samples to estimate the singular time")]
    TooFewSamples { needed: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Time derivatives of the three warping functions.
#[derive(Debug, Clone)]
pub struct Rates {
    pub u: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Choice of radial coordinate during time stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Fixed `xi`; the lapse `u` evolves.
    #[default]
    Fixed,
    /// `xi` stays equal to arclength (`u = 1`) via a tangential velocity.
    Arclength,
}

/// End conditions (frozen from the initial data) and gauge used by the solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBoundary {
    pub ends: FieldEnds,
    pub gauge: Gauge,
}

impl FlowBoundary {
    /// Parity ghosts at a tip, slopes of the given data at a segment end and at `xi_max`.
    pub fn from_state(state: &MetricState) -> Self {
        let g = state.grid();
        let slope_out = |f: &[f64]| g.d1(f, InnerEnd::OneSided, OuterEnd::OneSided)[f.len() - 1];
        let slope_in = |f: &[f64]| g.d1(f, InnerEnd::OneSided, OuterEnd::OneSided)[0];
        let (a_in, b_in) = match state.inner() {
            InnerBoundary::Tip => (InnerEnd::Odd, InnerEnd::Even),
            InnerBoundary::Segment => (InnerEnd::Slope(slope_in(state.a())), InnerEnd::Slope(slope_in(state.b()))),
        };
        let u_in = match state.inner() {
            InnerBoundary::Tip => InnerEnd::Even,
            InnerBoundary::Segment => InnerEnd::Slope(0.0),
        };
        FlowBoundary {
            ends: FieldEnds {
                u: (u_in, OuterEnd::Slope(0.0)),
                a: (a_in, OuterEnd::Slope(slope_out(state.a()))),
                b: (b_in, OuterEnd::Slope(slope_out(state.b()))),
            },
            gauge: Gauge::Fixed,
        }
    }

    pub fn with_gauge(self, gauge: Gauge) -> Self {
        FlowBoundary { gauge, ..self }
    }
}

/// Right-hand side with end conditions read off the state itself.
pub fn rhs(state: &MetricState) -> Result<Rates, FlowError> {
    rhs_with(state, &FlowBoundary::from_state(state))
}

pub fn rhs_with(state: &MetricState, bd: &FlowBoundary) -> Result<Rates, FlowError> {
    let (mut r, d) = fixed_rates(state, bd)?;
    if bd.gauge == Gauge::Fixed {
        return Ok(r);
    }
    if let Some(j) = state.u().iter().position(|u| *u != 1.0) {
        return Err(FlowError::Config(format!("arclength gauge needs u = 1, node {j} has {}", state.u()[j])));
    }
    // With u = 1 the lapse rate is exactly the integrand of the velocity.
    let v = geometry::integrate_in_s(state, &r.u, crate::state::Parity::Even);
    for j in 0..state.len() {
        r.a[j] -= d.a_s[j] * v[j];
        r.b[j] -= d.b_s[j] * v[j];
        r.u[j] = 0.0;
    }
    if state.is_tip() {
        r.a[0] = 0.0;
        // Project out the O(h^4) drift of the closure slope with a tiny extra
        // tangential velocity supported near the tip.
        let x = state.grid().nodes();
        let width = state.b()[0];
        let w: Vec<f64> = (0..state.len()).map(|j| d.a_s[j] * x[j] * (-(x[j] / width).powi(2)).exp()).collect();
        let g = state.grid();
        let c = g.tip_slope_odd(&r.a) / g.tip_slope_odd(&w);
        for (ra, wj) in r.a.iter_mut().zip(&w) {
            *ra -= c * wj;
        }
    }
    Ok(r)
}

fn fixed_rates(state: &MetricState, bd: &FlowBoundary) -> Result<(Rates, crate::state::Derivatives), FlowError> {
    let d = state.derivatives_with(&bd.ends);
    let (u, a, b) = (state.u(), state.a(), state.b());
    let n = state.len();
    let mut r = Rates { u: vec![0.0; n], a: vec![0.0; n], b: vec![0.0; n] };
    let first = usize::from(state.is_tip());
    for j in first..n {
        let (aj, bj) = (a[j], b[j]);
        let (a_s, b_s, a_ss, b_ss) = (d.a_s[j], d.b_s[j], d.a_ss[j], d.b_ss[j]);
        let b2 = bj * bj;
        r.a[j] = a_ss - 2.0 * aj * aj * aj / (b2 * b2) + 2.0 * a_s * b_s / bj;
        r.b[j] = b_ss - 4.0 / bj + 2.0 * aj * aj / (b2 * bj) + a_s * b_s / aj + b_s * b_s / bj;
        r.u[j] = u[j] * (a_ss / aj + 2.0 * b_ss / bj);
    }
    if state.is_tip() {
        r.a[0] = 0.0;
        r.b[0] = 2.0 * d.b_ss[0] - 4.0 / b[0];
        r.u[0] = state.grid().tip_slope_odd(&r.a) / f64::from(state.k());
    }
    for (field, v) in [("u", &r.u), ("a", &r.a), ("b", &r.b)] {
        if let Some(node) = v.iter().position(|x| !x.is_finite()) {
            return Err(FlowError::NonFinite { field, node });
        }
    }
    Ok((r, d))
}

/// `ds/dt` at fixed `xi`: the `s`-integral of `a_ss/a + 2 b_ss/b` from the inner end.
pub fn ds_dt(state: &MetricState) -> Result<Vec<f64>, FlowError> {
    let r = rhs(state)?;
    let integrand: Vec<f64> = r.u.iter().zip(state.u()).map(|(ru, u)| ru / u).collect();
    Ok(geometry::integrate_in_s(state, &integrand, crate::state::Parity::Even))
}

/// Explicit stability bound `safety * min (u dxi)^2 / 4`.
pub fn stable_dt(state: &MetricState, safety: f64) -> f64 {
    let x = state.grid().nodes();
    let u = state.u();
    let mut m = f64::INFINITY;
    for j in 0..x.len() - 1 {
        let h = (x[j + 1] - x[j]) * u[j].min(u[j + 1]);
        m = m.min(h * h);
    }
    safety * m / 4.0
}

/// One Heun (two-stage, second-order) step using end conditions from the state.
pub fn step(state: &MetricState, dt: f64) -> Result<MetricState, FlowError> {
    step_with(state, dt, &FlowBoundary::from_state(state), 1.0)
}

/// One Heun step; `dt` must not exceed `stable_dt(state, safety)`.
pub fn step_with(state: &MetricState, dt: f64, bd: &FlowBoundary, safety: f64) -> Result<MetricState, FlowError> {
    let bound = stable_dt(state, safety);
    if !(dt > 0.0 && dt <= bound * (1.0 + 1e-12)) {
        return Err(FlowError::StepTooLarge { dt, bound });
    }
    let k1 = rhs_with(state, bd)?;
    let advance = |base: &[f64], rate: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(rate).map(|(y, r)| y + h * r).collect()
    };
    let stage = MetricState::from_parts_unchecked(
        state.grid_arc().clone(),
        advance(state.u(), &k1.u, dt),
        advance(state.a(), &k1.a, dt),
        advance(state.b(), &k1.b, dt),
        state.t() + dt,
        state.k(),
        state.inner(),
    );
    check_positive(&stage)?;
    let k2 = rhs_with(&stage, bd)?;
    let combine = |base: &[f64], r1: &[f64], r2: &[f64]| -> Vec<f64> {
        base.iter().zip(r1.iter().zip(r2)).map(|(y, (p, q))| y + 0.5 * dt * (p + q)).collect()
    };
    let mut a = combine(state.a(), &k1.a, &k2.a);
    if state.is_tip() {
        a[0] = 0.0;
    }
    let next = MetricState::from_parts_unchecked(
        state.grid_arc().clone(),
        combine(state.u(), &k1.u, &k2.u),
        a,
        combine(state.b(), &k1.b, &k2.b),
        state.t() + dt,
        state.k(),
        state.inner(),
    );
    check_positive(&next)?;
    Ok(next)
}

fn check_positive(s: &MetricState) -> Result<(), FlowError> {
    let first = usize::from(s.is_tip());
    for (field, v, from) in [("u", s.u(), 0), ("b", s.b(), 0), ("a", s.a(), first)] {
        if let Some(node) = v.iter().skip(from).position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(FlowError::LostPositivity { field, node: node + from });
        }
    }
    Ok(())
}

/// Six-point Lagrange interpolation of samples `(xs, fs)` at `z`, using the
/// window of nodes around the bracketing interval.
fn lagrange6(xs: &[f64], fs: &[f64], z: f64) -> f64 {
    let m = xs.len();
    let i = xs.partition_point(|v| *v <= z).saturating_sub(1);
    let lo = i.saturating_sub(2).min(m - 6);
    let (x, f) = (&xs[lo..lo + 6], &fs[lo..lo + 6]);
    (0..6)
        .map(|p| {
            let w: f64 = (0..6).filter(|q| *q != p).map(|q| (z - x[q]) / (x[p] - x[q])).product();
            w * f[p]
        })
        .sum()
}

/// Resamples a tip state on an arclength grid (`u = 1`). Spacing starts at
/// `b(o) / tip_cells`, grows by at most `ratio` per interval and never exceeds
/// `b / far_cells`. The flow is diffeomorphism invariant, so this only changes
/// the radial coordinate. A correction of relative size O(h^4) supported
/// near the tip restores the discrete closure slope `k` exactly.
pub fn remap_to_arclength(state: &MetricState, tip_cells: f64, far_cells: f64, ratio: f64) -> Result<MetricState, FlowError> {
    if !state.is_tip() {
        return Err(FlowError::Config("remapping needs a tip state".into()));
    }
    if !(tip_cells > 0.0 && far_cells > 0.0) || !(1.0..=2.0).contains(&ratio) {
        return Err(FlowError::Config(format!("bad remap parameters {tip_cells}, {far_cells}, {ratio}")));
    }
    let s = geometry::radial_distance(state);
    let len = s[s.len() - 1];
    let b_tip = state.b()[0];

    // Parity images of the first three nodes extend the samples across the tip.
    let mirror = |f: &[f64], sign: f64| -> Vec<f64> {
        (1..=3).rev().map(|j| sign * f[j]).chain(f.iter().copied()).collect()
    };
    let s_ext = mirror(&s, -1.0);
    let (a_ext, b_ext) = (mirror(state.a(), -1.0), mirror(state.b(), 1.0));

    let mut nodes = vec![0.0];
    let mut h = b_tip / tip_cells;
    while nodes[nodes.len() - 1] < len {
        let last = nodes[nodes.len() - 1];
        nodes.push(last + h);
        let cap = lagrange6(&s_ext, &b_ext, (last + h).min(len)) / far_cells;
        h = (h * ratio).min(cap).max(h / ratio);
    }
    let stretch = len / nodes[nodes.len() - 1];
    nodes.iter_mut().for_each(|x| *x *= stretch);
    if nodes.len() <= MIN_INTERVALS {
        nodes = (0..=MIN_INTERVALS).map(|j| len * j as f64 / MIN_INTERVALS as f64).collect();
    }
    let last = nodes.len() - 1;
    nodes[last] = len;
    let grid = Arc::new(RadialGrid::from_nodes(nodes, Grading::Adapted)?);

    let mut a: Vec<f64> = grid.nodes().iter().map(|z| lagrange6(&s_ext, &a_ext, *z)).collect();
    let mut b: Vec<f64> = grid.nodes().iter().map(|z| lagrange6(&s_ext, &b_ext, *z)).collect();
    a[0] = 0.0;
    a[last] = state.a()[state.len() - 1];
    b[last] = state.b()[state.len() - 1];
    let n = grid.len();
    close_tip(&MetricState::new(grid, vec![1.0; n], a, b, state.t(), state.k(), state.inner())?, b_tip)
}

/// Adds `delta xi exp(-(xi/width)^2)` to `a` so that the discrete tip slope
/// `a_xi(0) / u(0)` equals `k` exactly. On sampled smooth data `delta` is of
/// the size of the stencil error, O(h^4).
fn close_tip(state: &MetricState, width: f64) -> Result<MetricState, FlowError> {
    if !state.is_tip() {
        return Ok(state.clone());
    }
    let grid = state.grid_arc().clone();
    let w: Vec<f64> = grid.nodes().iter().map(|x| x * (-(x / width).powi(2)).exp()).collect();
    let target = f64::from(state.k()) * state.u()[0];
    let delta = (target - grid.tip_slope_odd(state.a())) / grid.tip_slope_odd(&w);
    let a = state.a().iter().zip(&w).map(|(aj, wj)| aj + delta * wj).collect();
    Ok(MetricState::new(grid, state.u().to_vec(), a, state.b().to_vec(), state.t(), state.k(), state.inner())?)
}

impl FlowBoundary {
    /// Outer slopes re-expressed after the radial coordinate was changed from
    /// one with lapse `u_end` at the outer node to arclength.
    pub fn to_arclength(&self, u_end: f64) -> Self {
        let conv = |e: OuterEnd| match e {
            OuterEnd::Slope(g) => OuterEnd::Slope(g / u_end),
            other => other,
        };
        FlowBoundary {
            ends: FieldEnds {
                u: self.ends.u,
                a: (self.ends.a.0, conv(self.ends.a.1)),
                b: (self.ends.b.0, conv(self.ends.b.1)),
            },
            gauge: self.gauge,
        }
    }
}

/// Named initial-data families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialData {
    /// `a = tanh(k xi)`, `b = 1`.
    TanhCap,
    /// Scaled Eguchi-Hanson core blended into a cylinder beyond `cap_radius` (k = 2 only).
    EhCappedCylinder { scale: f64, cap_radius: f64 },
    /// Cylinder of radius `b0` closed off by a tanh cap.
    Cylinder { b0: f64 },
    /// Round cylinder segment `a = b = b0` without a tip.
    CylinderSegment { b0: f64 },
    /// Flat cone segment `a = b = 1 + xi`.
    Flat,
    /// Round segment `a = b = 1 + amplitude exp(-((xi - center)/width)^2)`.
    RoundBump { amplitude: f64, center: f64, width: f64 },
    /// Snapshot previously written by [`crate::io::write_snapshot`].
    FromFile { path: PathBuf },
}

pub fn make_initial_data(family: &InitialData, k: u32, grid: Arc<RadialGrid>) -> Result<MetricState, FlowError> {
    let n = grid.len();
    let xs = grid.nodes().to_vec();
    let kf = f64::from(k);
    let tip = InnerBoundary::Tip;
    let seg = InnerBoundary::Segment;
    let positive = |name: &str, v: f64| -> Result<(), FlowError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(FlowError::InitialData(format!("{name} must be positive, got {v}")))
        }
    };
    let state = match family {
        InitialData::TanhCap => {
            let a = xs.iter().map(|x| (kf * x).tanh()).collect();
            MetricState::new(grid, vec![1.0; n], a, vec![1.0; n], 0.0, k, tip)?
        }
        InitialData::Cylinder { b0 } => {
            positive("b0", *b0)?;
            let a = xs.iter().map(|x| b0 * (kf * x / b0).tanh()).collect();
            MetricState::new(grid, vec![1.0; n], a, vec![*b0; n], 0.0, k, tip)?
        }
        InitialData::CylinderSegment { b0 } => {
            positive("b0", *b0)?;
            MetricState::new(grid, vec![1.0; n], vec![*b0; n], vec![*b0; n], 0.0, k, seg)?
        }
        InitialData::Flat => {
            let a: Vec<f64> = xs.iter().map(|x| 1.0 + x).collect();
            MetricState::new(grid, vec![1.0; n], a.clone(), a, 0.0, k, seg)?
        }
        InitialData::RoundBump { amplitude, center, width } => {
            positive("width", *width)?;
            let a: Vec<f64> = xs.iter().map(|x| 1.0 + amplitude * (-((x - center) / width).powi(2)).exp()).collect();
            if a.iter().any(|v| *v <= 0.0) {
                return Err(FlowError::InitialData("bump makes the radius non-positive".into()));
            }
            MetricState::new(grid, vec![1.0; n], a.clone(), a, 0.0, k, seg)?
        }
        InitialData::EhCappedCylinder { scale, cap_radius } => {
            if k != 2 {
                return Err(FlowError::InitialData("the Eguchi-Hanson core needs k = 2".into()));
            }
            positive("scale", *scale)?;
            positive("cap_radius", *cap_radius)?;
            let (a, b, violation) = reference::eh_capped_profile(*scale, *cap_radius, &xs);
            if let Some(v) = violation {
                return Err(FlowError::InitialData(format!("blend leaves the preserved class: {v}")));
            }
            MetricState::new(grid, vec![1.0; n], a, b, 0.0, k, tip)?
        }
        InitialData::FromFile { path } => io::read_snapshot(path)?,
    };
    Ok(state)
}
