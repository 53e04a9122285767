//! Parabolic rescaling around the tip or a tracked point, distance to the
//! Eguchi-Hanson profile, Hamilton's blow-up time selection and the
//! four-regime classification of blow-up limits.

use serde::Serialize;
use thiserror::Error;

use crate::flow::{self, FlowError};
use crate::geometry;
use crate::run::{StopReason, Trajectory};
use crate::state::MetricState;

#[derive(Debug, Error)]
pub enum BlowupError {
    #[error("center node {node} outside a grid of {len} nodes")]
    CenterOutOfRange { node: usize, len: usize },
    #[error("b = {0} at the center")]
    NonPositiveCenter(f64),
    #[error("window [{lo}, {hi}] holds no samples")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("window ends at {hi}, profile only reaches {s_max}")]
    WindowOutOfRange { hi: f64, s_max: f64 },
    #[error("trajectory has no singular-time estimate")]
    NoSingularity,
    #[error("need {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("trajectory stores no snapshots")]
    NoSnapshots,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Center {
    Tip,
    Node(usize),
}

/// A snapshot rescaled so that `b = 1` at the center; lengths are in units
/// of `b(center)` and `s` is measured from the tip.
#[derive(Debug, Clone, Serialize)]
pub struct RescaledProfile {
    pub center: Center,
    pub t: f64,
    /// Curvature scale `b(center)^-2` relative to the source.
    pub lambda: f64,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub b_s: Vec<f64>,
    /// `b b_ss`, scale invariant.
    pub bbss: Vec<f64>,
    pub tf1: Vec<f64>,
    pub tf2: Vec<f64>,
}

fn center_index(center: Center, len: usize) -> Result<usize, BlowupError> {
    match center {
        Center::Tip => Ok(0),
        Center::Node(j) if j < len => Ok(j),
        Center::Node(node) => Err(BlowupError::CenterOutOfRange { node, len }),
    }
}

/// Rescale `state` parabolically around `center`.
pub fn rescale(state: &MetricState, center: Center) -> Result<RescaledProfile, BlowupError> {
    let j = center_index(center, state.len())?;
    let bc = state.b()[j];
    if !(bc > 0.0) {
        return Err(BlowupError::NonPositiveCenter(bc));
    }
    let qs = geometry::scale_invariants(state, geometry::default_c_hpm(state.k()));
    let s = geometry::radial_distance(state);
    Ok(RescaledProfile {
        center,
        t: state.t(),
        lambda: 1.0 / (bc * bc),
        s: s.iter().map(|v| v / bc).collect(),
        a: state.a().iter().map(|v| v / bc).collect(),
        b: state.b().iter().map(|v| v / bc).collect(),
        q: qs.q,
        x: qs.x,
        y: qs.y,
        b_s: qs.b_s,
        bbss: qs.bbss,
        tf1: qs.tf1,
        tf2: qs.tf2,
    })
}

impl RescaledProfile {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Rescale again; a no-op at the current center.
    pub fn rescaled(&self, center: Center) -> Result<RescaledProfile, BlowupError> {
        let j = center_index(center, self.len())?;
        let bc = self.b[j];
        if !(bc > 0.0) {
            return Err(BlowupError::NonPositiveCenter(bc));
        }
        let div = |v: &[f64]| v.iter().map(|x| x / bc).collect::<Vec<_>>();
        Ok(RescaledProfile {
            center,
            lambda: self.lambda / (bc * bc),
            s: div(&self.s),
            a: div(&self.a),
            b: div(&self.b),
            ..self.clone()
        })
    }
}

/// Sup norms of the Kahler quantities over a window of `s / b(center)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EhDistance {
    pub sup_x: f64,
    pub sup_y: f64,
    pub samples: usize,
}

impl EhDistance {
    pub fn total(&self) -> f64 {
        self.sup_x + self.sup_y
    }
}

pub fn eh_distance(profile: &RescaledProfile, window: (f64, f64)) -> Result<EhDistance, BlowupError> {
    let (lo, hi) = window;
    let s_max = profile.s.last().copied().unwrap_or(0.0);
    if hi > s_max {
        return Err(BlowupError::WindowOutOfRange { hi, s_max });
    }
    let idx: Vec<usize> = (0..profile.len()).filter(|&j| profile.s[j] >= lo && profile.s[j] <= hi).collect();
    if idx.is_empty() {
        return Err(BlowupError::EmptyWindow { lo, hi });
    }
    let sup = |v: &[f64]| idx.iter().fold(0.0f64, |m, &j| m.max(v[j].abs()));
    Ok(EhDistance { sup_x: sup(&profile.x), sup_y: sup(&profile.y), samples: idx.len() })
}

/// Tip EH distance over `[0, window] b(o)` for each stored snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EhDistanceSample {
    pub t: f64,
    pub b_tip: f64,
    pub distance: EhDistance,
}

pub fn eh_distance_series(traj: &Trajectory, window: f64) -> Result<Vec<EhDistanceSample>, BlowupError> {
    if traj.snapshots.is_empty() {
        return Err(BlowupError::NoSnapshots);
    }
    traj.snapshots
        .iter()
        .filter(|s| s.is_tip())
        .map(|st| {
            let p = rescale(st, Center::Tip)?;
            Ok(EhDistanceSample { t: st.t(), b_tip: st.b()[0], distance: eh_distance(&p, (0.0, window))? })
        })
        .collect()
}

/// Value of the Hamilton product at the selected time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupTime {
    /// Reference time `T_i`.
    pub reference: f64,
    /// Selected `t_i <= T_i`.
    pub t: f64,
    pub b_tip: f64,
    /// `(T_i - t_i) b(o, t_i)^-2`.
    pub product: f64,
}

/// Reference times `T_i = T - (T - t_0) 2^-i`, `i = 1..=levels`, that are
/// covered by the monitor samples; each `t_i` maximizes `(T_i - t) b(o,t)^-2`
/// over samples `t <= T_i`, ties going to the earliest sample.
pub fn pick_blowup_times(traj: &Trajectory, levels: usize) -> Result<Vec<BlowupTime>, BlowupError> {
    let ts = match (&traj.stop, traj.t_sing) {
        (StopReason::Singularity | StopReason::CurvatureLimit, Some(ts)) => ts.estimate,
        _ => return Err(BlowupError::NoSingularity),
    };
    let m = &traj.monitors;
    if m.len() < 3 {
        return Err(BlowupError::TooFewSamples { needed: 3, found: m.len() });
    }
    let (t0, t_last) = (m[0].t, m[m.len() - 1].t);
    let mut out = Vec::new();
    for i in 1..=levels {
        let reference = ts - (ts - t0) * 0.5f64.powi(i as i32);
        if reference > t_last {
            break;
        }
        let mut best: Option<BlowupTime> = None;
        for row in m.iter().take_while(|r| r.t <= reference) {
            let product = (reference - row.t) / (row.b_tip * row.b_tip);
            if best.is_none_or(|b| product > b.product * (1.0 + 1e-12)) {
                best = Some(BlowupTime { reference, t: row.t, b_tip: row.b_tip, product });
            }
        }
        out.extend(best);
    }
    if out.is_empty() {
        return Err(BlowupError::TooFewSamples { needed: 1, found: 0 });
    }
    Ok(out)
}

/// Time series of `b(o)`, `b(p)` and `b_s(p)` at a tracked point `p`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrackedSeries {
    pub t: Vec<f64>,
    pub b_tip: Vec<f64>,
    pub b: Vec<f64>,
    pub b_s: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracker {
    Tip,
    /// The point at distance `sigma b(o,t)` from the tip.
    ScaledDistance(f64),
    /// The point at a fixed distance from the tip.
    FixedDistance(f64),
}

fn interpolate(s: &[f64], v: &[f64], z: f64) -> f64 {
    let i = s.partition_point(|x| *x <= z).clamp(1, s.len() - 1);
    let w = (z - s[i - 1]) / (s[i] - s[i - 1]);
    v[i - 1] + w.clamp(0.0, 1.0) * (v[i] - v[i - 1])
}

pub fn track(traj: &Trajectory, tracker: Tracker) -> Result<TrackedSeries, BlowupError> {
    if traj.snapshots.is_empty() {
        return Err(BlowupError::NoSnapshots);
    }
    let mut out = TrackedSeries::default();
    for st in &traj.snapshots {
        let s = geometry::radial_distance(st);
        let b_s = st.derivatives().b_s;
        let b0 = st.b()[0];
        let at = match tracker {
            Tracker::Tip => 0.0,
            Tracker::ScaledDistance(sigma) => sigma * b0,
            Tracker::FixedDistance(d) => d,
        };
        out.t.push(st.t());
        out.b_tip.push(b0);
        out.b.push(interpolate(&s, st.b(), at));
        out.b_s.push(interpolate(&s, &b_s, at));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    EguchiHanson,
    FlatOrbifold,
    BryantLike,
    Cylinder,
    Undetermined,
}

/// Thresholds of the classifier; heuristics, not theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyConfig {
    /// `b(p)/b(o)` at most this over the final decade counts as bounded.
    pub bounded_ratio: f64,
    /// Ratio growth across the final decade that counts as divergence.
    pub divergence_growth: f64,
    /// `b_s` band `[lo, hi]` of the Bryant-like regime; above is flat, below cylindrical.
    pub band: (f64, f64),
    /// Region `c b(o) <= b <= delta` for the high-curvature margins.
    pub c: f64,
    pub delta: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { bounded_ratio: 20.0, divergence_growth: 2.0, band: (0.1, 0.9), c: 2.0, delta: 0.5 }
    }
}

/// Worst values of `Q`, `T_F1`, `T_F2` and `d/dt b^2` on `c b(o) <= b <= delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionMargins {
    pub nodes: usize,
    pub q_min: f64,
    pub tf1_min: f64,
    pub tf2_max: f64,
    pub b2_rate_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub regime: Regime,
    /// Largest `b(p)/b(o)` over the final decade of `b(o)`.
    pub ratio_max: f64,
    /// Last over first ratio across the final decade.
    pub ratio_growth: f64,
    pub b_s_range: (f64, f64),
    pub decade_samples: usize,
    pub region_margins: Option<RegionMargins>,
    pub eh_series: Vec<EhDistanceSample>,
}

/// Margins on the high-curvature region of one state.
pub fn region_margins(state: &MetricState, c: f64, delta: f64) -> Result<RegionMargins, BlowupError> {
    let qs = geometry::scale_invariants(state, geometry::default_c_hpm(state.k()));
    let rates = flow::rhs(state)?;
    let lo = c * state.b()[0];
    let mut m = RegionMargins {
        nodes: 0,
        q_min: f64::INFINITY,
        tf1_min: f64::INFINITY,
        tf2_max: f64::NEG_INFINITY,
        b2_rate_max: f64::NEG_INFINITY,
    };
    for (j, &b) in state.b().iter().enumerate() {
        if b < lo || b > delta {
            continue;
        }
        m.nodes += 1;
        m.q_min = m.q_min.min(qs.q[j]);
        m.tf1_min = m.tf1_min.min(qs.tf1[j]);
        m.tf2_max = m.tf2_max.max(qs.tf2[j]);
        m.b2_rate_max = m.b2_rate_max.max(2.0 * b * rates.b[j]);
    }
    Ok(m)
}

/// Classify the blow-up limit seen from `tracked`, using the final decade of
/// `b(o)`. Conflicting evidence gives `Undetermined`.
pub fn classify_series(tracked: &TrackedSeries, cfg: &ClassifyConfig) -> Result<BlowupReport, BlowupError> {
    let n = tracked.t.len();
    if n < 2 {
        return Err(BlowupError::TooFewSamples { needed: 2, found: n });
    }
    let b_end = tracked.b_tip[n - 1];
    let decade: Vec<usize> = (0..n).filter(|&i| tracked.b_tip[i] <= 10.0 * b_end).collect();
    let ratio: Vec<f64> = decade.iter().map(|&i| tracked.b[i] / tracked.b_tip[i]).collect();
    let b_s: Vec<f64> = decade.iter().map(|&i| tracked.b_s[i]).collect();
    let ratio_max = ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio_growth = ratio[ratio.len() - 1] / ratio[0];
    let b_s_range = b_s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let (lo, hi) = cfg.band;
    let regime = if decade.len() < 2 {
        Regime::Undetermined
    } else if ratio_max <= cfg.bounded_ratio {
        Regime::EguchiHanson
    } else if ratio_growth >= cfg.divergence_growth {
        if b_s_range.0 > hi {
            Regime::FlatOrbifold
        } else if b_s_range.0 >= lo && b_s_range.1 <= hi {
            Regime::BryantLike
        } else if b_s_range.1 < lo {
            Regime::Cylinder
        } else {
            Regime::Undetermined
        }
    } else {
        Regime::Undetermined
    };
    Ok(BlowupReport {
        regime,
        ratio_max,
        ratio_growth,
        b_s_range,
        decade_samples: decade.len(),
        region_margins: None,
        eh_series: vec![],
    })
}

/// [`classify_series`] plus the high-curvature margins on the final state
/// for regimes (ii)-(iv), or the tip EH distance series for regime (i).
pub fn classify(traj: &Trajectory, tracked: &TrackedSeries, cfg: &ClassifyConfig) -> Result<BlowupReport, BlowupError> {
    let mut rep = classify_series(tracked, cfg)?;
    match (rep.regime, traj.last_state()) {
        (Regime::FlatOrbifold | Regime::BryantLike | Regime::Cylinder, Some(st)) => {
            rep.region_margins = Some(region_margins(st, cfg.c, cfg.delta)?);
        }
        (Regime::EguchiHanson, _) if !traj.snapshots.is_empty() => {
            // Windows reaching past the grid are skipped.
            rep.eh_series = traj
                .snapshots
                .iter()
                .filter(|s| s.is_tip())
                .filter_map(|st| {
                    let p = rescale(st, Center::Tip).ok()?;
                    let d = eh_distance(&p, (0.0, 5.0)).ok()?;
                    Some(EhDistanceSample { t: st.t(), b_tip: st.b()[0], distance: d })
                })
                .collect();
        }
        _ => {}
    }
    Ok(rep)
}

/// Pointwise curvature sandwich `(1 - b_s^2) b_s^2 / b^2 <= -b_ss / b <= (1 - b_s^2) / b^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sandwich {
    pub lower: Vec<f64>,
    pub middle: Vec<f64>,
    pub upper: Vec<f64>,
    /// `min T_F1`; the upper bound holds where `T_F1 >= 0`.
    pub tf1_min: f64,
    /// `max T_F2`; the lower bound holds where `T_F2 <= 0`.
    pub tf2_max: f64,
}

pub fn sandwich_check(profile: &RescaledProfile) -> Sandwich {
    let n = profile.len();
    let mut out = Sandwich {
        lower: Vec::with_capacity(n),
        middle: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        tf1_min: profile.tf1.iter().copied().fold(f64::INFINITY, f64::min),
        tf2_max: profile.tf2.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    for j in 0..n {
        let (b, bs) = (profile.b[j], profile.b_s[j]);
        let one_minus = 1.0 - bs * bs;
        out.lower.push(one_minus * bs * bs / (b * b));
        out.middle.push(-profile.bbss[j] / (b * b));
        out.upper.push(one_minus / (b * b));
    }
    out
}
