//! Preserved-inequality margins, curvature-bound monitor and tip area rate.

use serde::Serialize;

use crate::flow::{self, FlowError};
use crate::run::Trajectory;
use crate::geometry::{self, QuantitySet};
use crate::state::MetricState;

/// Signed slack of each preserved inequality at one instant: the minimum over
/// the grid of `rhs - lhs` (or `lhs - rhs`), so nonnegative means satisfied.
/// Inequalities that only hold for some `k` are `None` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margins {
    pub q_le_1: f64,
    pub a_s_ge_0: f64,
    pub b_s_ge_0: f64,
    pub y_le_0: f64,
    pub x_le_0: Option<f64>,
    pub a_s_le_c: f64,
    pub t1_ge_0: Option<f64>,
    pub t2_ge_0: Option<f64>,
    pub t3_ge_0: f64,
    pub t1_t4_ge_0: Option<f64>,
    pub h_minus_le_0: f64,
    pub h_plus_ge_0: f64,
}

pub const MARGIN_NAMES: [&str; 12] = [
    "q_le_1",
    "a_s_ge_0",
    "b_s_ge_0",
    "y_le_0",
    "x_le_0",
    "a_s_le_c",
    "t1_ge_0",
    "t2_ge_0",
    "t3_ge_0",
    "t1_t4_ge_0",
    "h_minus_le_0",
    "h_plus_ge_0",
];

/// Per-node slack fields, in the order of [`MARGIN_NAMES`].
fn slack_fields(state: &MetricState, qs: &QuantitySet, a_s_cap: f64) -> [Option<Vec<f64>>; 12] {
    let k = state.k();
    let low_k = !state.is_tip() || k <= 2;
    let high_k = !state.is_tip() || k >= 2;
    let map = |f: &dyn Fn(usize) -> f64| Some((0..state.len()).map(f).collect::<Vec<_>>());
    [
        map(&|j| 1.0 - qs.q[j]),
        map(&|j| qs.a_s[j]),
        map(&|j| qs.b_s[j]),
        map(&|j| -qs.y[j]),
        if low_k { map(&|j| -qs.x[j]) } else { None },
        map(&|j| a_s_cap - qs.a_s[j]),
        if high_k { map(&|j| qs.t1[j]) } else { None },
        if low_k { map(&|j| qs.t2[j]) } else { None },
        map(&|j| qs.t3[j]),
        if high_k { map(&|j| qs.t1[j].min(qs.t4[j])) } else { None },
        map(&|j| -qs.h_minus[j]),
        map(&|j| qs.h_plus[j]),
    ]
}

fn min_of(v: &[f64]) -> (f64, usize) {
    v.iter().enumerate().fold((f64::INFINITY, 0), |(m, i), (j, x)| if *x < m { (*x, j) } else { (m, i) })
}

pub fn margins(state: &MetricState, qs: &QuantitySet, a_s_cap: f64) -> Margins {
    let f = slack_fields(state, qs, a_s_cap);
    let m = |i: usize| f[i].as_ref().map(|v| min_of(v).0);
    Margins {
        q_le_1: m(0).unwrap_or(f64::NAN),
        a_s_ge_0: m(1).unwrap_or(f64::NAN),
        b_s_ge_0: m(2).unwrap_or(f64::NAN),
        y_le_0: m(3).unwrap_or(f64::NAN),
        x_le_0: m(4),
        a_s_le_c: m(5).unwrap_or(f64::NAN),
        t1_ge_0: m(6),
        t2_ge_0: m(7),
        t3_ge_0: m(8).unwrap_or(f64::NAN),
        t1_t4_ge_0: m(9),
        h_minus_le_0: m(10).unwrap_or(f64::NAN),
        h_plus_ge_0: m(11).unwrap_or(f64::NAN),
    }
}

impl Margins {
    /// Values in the order of [`MARGIN_NAMES`], `None` where the inequality does not apply.
    pub fn values(&self) -> [Option<f64>; 12] {
        [
            Some(self.q_le_1),
            Some(self.a_s_ge_0),
            Some(self.b_s_ge_0),
            Some(self.y_le_0),
            self.x_le_0,
            Some(self.a_s_le_c),
            self.t1_ge_0,
            self.t2_ge_0,
            Some(self.t3_ge_0),
            self.t1_t4_ge_0,
            Some(self.h_minus_le_0),
            Some(self.h_plus_ge_0),
        ]
    }

    /// `(name, value)` pairs of the applicable inequalities.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        MARGIN_NAMES.iter().zip(self.values()).filter_map(|(n, v)| v.map(|v| (*n, v))).collect()
    }

    /// Smallest applicable margin and its name.
    pub fn worst(&self) -> (&'static str, f64) {
        self.entries().into_iter().fold(("none", f64::INFINITY), |w, e| if e.1 < w.1 { e } else { w })
    }
}

/// Spacetime minimum of one inequality over a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct MarginRecord {
    pub inequality: &'static str,
    pub min_margin: f64,
    pub t: f64,
    pub node: usize,
    pub s: f64,
    pub satisfied: bool,
}

/// Spacetime minimum margins over every stored snapshot.
pub fn inequality_monitor(traj: &Trajectory, tol: f64) -> Vec<MarginRecord> {
    let Some(first) = traj.snapshots.first() else { return vec![] };
    let c_hpm = traj.c_hpm;
    let cap = a_s_cap(first, c_hpm);
    let mut out: Vec<Option<MarginRecord>> = vec![None; MARGIN_NAMES.len()];
    for st in &traj.snapshots {
        let qs = geometry::scale_invariants(st, c_hpm);
        let fields = slack_fields(st, &qs, cap);
        let s = geometry::radial_distance(st);
        for (i, f) in fields.iter().enumerate() {
            let Some(f) = f else { continue };
            let (m, node) = min_of(f);
            if out[i].as_ref().is_none_or(|r| m < r.min_margin) {
                out[i] = Some(MarginRecord {
                    inequality: MARGIN_NAMES[i],
                    min_margin: m,
                    t: st.t(),
                    node,
                    s: s[node],
                    satisfied: m >= -tol,
                });
            }
        }
    }
    out.into_iter().flatten().collect()
}

/// Upper bound used for `a_s <= C`: `max(2, sup a_s)` on the given data.
pub fn a_s_cap(initial: &MetricState, c_hpm: f64) -> f64 {
    let qs = geometry::scale_invariants(initial, c_hpm);
    qs.a_s.iter().fold(2.0f64, |m, v| m.max(*v))
}

/// `C1(t) = max riem_norm * b^2` for each snapshot, with the running maximum after `transient`.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureBound {
    pub t: Vec<f64>,
    pub c1: Vec<f64>,
    pub running_max_after_transient: f64,
}

pub fn c1(state: &MetricState) -> Result<f64, FlowError> {
    let c = geometry::curvature(state)?;
    Ok(c.riem_norm.iter().zip(state.b()).fold(0.0f64, |m, (r, b)| m.max(r * b * b)))
}

pub fn curvature_bound_monitor(traj: &Trajectory, transient: f64) -> Result<CurvatureBound, FlowError> {
    let mut out = CurvatureBound { t: vec![], c1: vec![], running_max_after_transient: 0.0 };
    for st in &traj.snapshots {
        let v = c1(st)?;
        out.t.push(st.t());
        out.c1.push(v);
        if st.t() >= transient {
            out.running_max_after_transient = out.running_max_after_transient.max(v);
        }
    }
    Ok(out)
}

/// Tip area rate: `d(b^2)/dt` at the tip from the flow right-hand side, and
/// `4 (b y_s + k - 2)` from the Kähler deviation `y`.
pub fn tip_area_rate(state: &MetricState) -> Result<(f64, f64), FlowError> {
    let r = flow::rhs(state)?;
    let b = state.b()[0];
    let lhs = 2.0 * b * r.b[0];
    let qs = geometry::kahler_quantities(state);
    let y_s = state.grid().tip_slope_odd(&qs.y) / state.u()[0];
    let rhs = 4.0 * (b * y_s + f64::from(state.k()) - 2.0);
    Ok((lhs, rhs))
}
