//! Discretized warping functions `(u, a, b)` of the metric
//! `u^2 dxi^2 + a^2 w (x) w + b^2 g_S2` at one instant.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{InnerEnd, OuterEnd, RadialGrid};

/// Relative tolerance for the smooth-closure slope `a_s(0) = k`.
pub const CLOSURE_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerBoundary {
    /// Node 0 is the zero section: `a` closes off smoothly with slope `k`.
    Tip,
    /// Node 0 is an ordinary principal orbit (a piece of cylinder or cone).
    Segment,
}

/// Declared reflection parity of a field across the tip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Odd,
    Even,
    Unspecified,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("field {field} has {got} samples, grid has {expected}")]
    Length { field: &'static str, got: usize, expected: usize },
    #[error("{field} must be positive and finite at node {node} (value {value})")]
    NotPositive { field: &'static str, node: usize, value: f64 },
    #[error("a must vanish at the tip, found {0}")]
    TipNotClosed(f64),
    #[error("tip slope a_s(0) = {got} differs from k = {k}")]
    Conical { got: f64, k: u32 },
    #[error("twisting number must be positive")]
    ZeroK,
    #[error("time must be finite")]
    BadTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricState {
    grid: Arc<RadialGrid>,
    u: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    t: f64,
    k: u32,
    inner: InnerBoundary,
}

/// `xi`- and `s`-derivatives of the three warping functions.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub u_xi: Vec<f64>,
    pub a_s: Vec<f64>,
    pub b_s: Vec<f64>,
    pub a_ss: Vec<f64>,
    pub b_ss: Vec<f64>,
}

/// End treatment for each warping function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEnds {
    pub u: (InnerEnd, OuterEnd),
    pub a: (InnerEnd, OuterEnd),
    pub b: (InnerEnd, OuterEnd),
}

impl MetricState {
    pub fn new(
        grid: Arc<RadialGrid>,
        u: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        t: f64,
        k: u32,
        inner: InnerBoundary,
    ) -> Result<Self, StateError> {
        let state = MetricState { grid, u, a, b, t, k, inner };
        state.validate()?;
        Ok(state)
    }

    /// Skips validation; used for intermediate Runge-Kutta stages.
    pub(crate) fn from_parts_unchecked(
        grid: Arc<RadialGrid>,
        u: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
        t: f64,
        k: u32,
        inner: InnerBoundary,
    ) -> Self {
        MetricState { grid, u, a, b, t, k, inner }
    }

    pub fn validate(&self) -> Result<(), StateError> {
        let n = self.grid.len();
        for (field, v) in [("u", &self.u), ("a", &self.a), ("b", &self.b)] {
            if v.len() != n {
                return Err(StateError::Length { field, got: v.len(), expected: n });
            }
        }
        if self.k == 0 {
            return Err(StateError::ZeroK);
        }
        if !self.t.is_finite() {
            return Err(StateError::BadTime);
        }
        for (field, v) in [("u", &self.u), ("b", &self.b)] {
            if let Some((node, &value)) = v.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
                return Err(StateError::NotPositive { field, node, value });
            }
        }
        let first = match self.inner {
            InnerBoundary::Tip => {
                if self.a[0] != 0.0 {
                    return Err(StateError::TipNotClosed(self.a[0]));
                }
                1
            }
            InnerBoundary::Segment => 0,
        };
        if let Some((node, &value)) =
            self.a.iter().enumerate().skip(first).find(|(_, x)| !(x.is_finite() && **x > 0.0))
        {
            return Err(StateError::NotPositive { field: "a", node, value });
        }
        if self.inner == InnerBoundary::Tip {
            let slope = self.tip_slope();
            let k = f64::from(self.k);
            if !((slope - k).abs() <= CLOSURE_TOL * k) {
                return Err(StateError::Conical { got: slope, k: self.k });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn inner(&self) -> InnerBoundary {
        self.inner
    }

    pub fn is_tip(&self) -> bool {
        self.inner == InnerBoundary::Tip
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    /// `a_s` at the tip from the odd-extension stencil.
    pub fn tip_slope(&self) -> f64 {
        self.grid.tip_slope_odd(&self.a) / self.u[0]
    }

    /// Ends used by pointwise diagnostics: parity ghosts at a tip, one-sided otherwise.
    pub fn diagnostic_ends(&self) -> FieldEnds {
        let (odd, even) = match self.inner {
            InnerBoundary::Tip => (InnerEnd::Odd, InnerEnd::Even),
            InnerBoundary::Segment => (InnerEnd::OneSided, InnerEnd::OneSided),
        };
        FieldEnds {
            u: (even, OuterEnd::OneSided),
            a: (odd, OuterEnd::OneSided),
            b: (even, OuterEnd::OneSided),
        }
    }

    pub fn end_for(&self, parity: Parity) -> InnerEnd {
        match (self.inner, parity) {
            (InnerBoundary::Tip, Parity::Odd) => InnerEnd::Odd,
            (InnerBoundary::Tip, Parity::Even) => InnerEnd::Even,
            _ => InnerEnd::OneSided,
        }
    }

    pub fn derivatives(&self) -> Derivatives {
        self.derivatives_with(&self.diagnostic_ends())
    }

    pub fn derivatives_with(&self, ends: &FieldEnds) -> Derivatives {
        let g = &self.grid;
        let (u_xi, _) = g.diff(&self.u, ends.u.0, ends.u.1);
        let (a_xi, a_xx) = g.diff(&self.a, ends.a.0, ends.a.1);
        let (b_xi, b_xx) = g.diff(&self.b, ends.b.0, ends.b.1);
        let n = self.len();
        let mut d = Derivatives {
            u_xi,
            a_s: vec![0.0; n],
            b_s: vec![0.0; n],
            a_ss: vec![0.0; n],
            b_ss: vec![0.0; n],
        };
        for j in 0..n {
            let u = self.u[j];
            let lapse = d.u_xi[j] / u;
            d.a_s[j] = a_xi[j] / u;
            d.b_s[j] = b_xi[j] / u;
            d.a_ss[j] = (a_xx[j] - a_xi[j] * lapse) / (u * u);
            d.b_ss[j] = (b_xx[j] - b_xi[j] * lapse) / (u * u);
        }
        if self.is_tip() {
            d.b_s[0] = 0.0;
            d.a_ss[0] = 0.0;
            d.u_xi[0] = 0.0;
        }
        d
    }

    /// First and second `s`-derivatives of an arbitrary sampled field.
    pub fn s_derivs(&self, f: &[f64], parity: Parity, u_xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (f_xi, f_xx) = self.grid.diff(f, self.end_for(parity), OuterEnd::OneSided);
        let mut f_s = f_xi;
        let mut f_ss = f_xx;
        for j in 0..f_s.len() {
            let u = self.u[j];
            let fx = f_s[j];
            f_s[j] = fx / u;
            f_ss[j] = (f_ss[j] - fx * u_xi[j] / u) / (u * u);
        }
        (f_s, f_ss)
    }

    /// Rescale lengths by `lambda`: `(xi, a, b) -> (lambda xi, lambda a, lambda b)`, time by `lambda^2`.
    pub fn scaled(&self, lambda: f64) -> Result<MetricState, crate::grid::GridError> {
        let grid = Arc::new(self.grid.scaled(lambda)?);
        Ok(MetricState {
            grid,
            u: self.u.clone(),
            a: self.a.iter().map(|x| x * lambda).collect(),
            b: self.b.iter().map(|x| x * lambda).collect(),
            t: self.t * lambda * lambda,
            k: self.k,
            inner: self.inner,
        })
    }
}
