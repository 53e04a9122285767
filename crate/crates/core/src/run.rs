//! Driver for a full flow run: configuration, adaptive stepping with stop
//! criteria and monitors, the singular-time fit and the Type I / Type II verdict.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, Margins};
use crate::flow::{self, FlowBoundary, FlowError, Gauge, InitialData};
use crate::geometry;
use crate::grid::{Grading, RadialGrid};
use crate::state::MetricState;

/// When to record a monitor row (and snapshot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputCadence {
    /// Record at least this often in time.
    pub dt: f64,
    /// Record whenever `ln b(o)` has dropped by this much since the last record.
    pub b_log_step: f64,
    /// Times that are hit exactly and always recorded.
    pub times: Vec<f64>,
    pub keep_snapshots: bool,
}

impl Default for OutputCadence {
    fn default() -> Self {
        OutputCadence { dt: 1e-2, b_log_step: 1e-2, times: vec![], keep_snapshots: true }
    }
}

/// Regridding of tip runs onto an arclength coordinate.
///
/// In the fixed gauge the tip lapse decays roughly like `b(o)^2`, which makes
/// the explicit step bound collapse. When the lapse leaves
/// `[lapse_floor, 1/lapse_floor]`, or the tip cell no longer resolves `b(o)`
/// by `tip_cells / 2` cells, the state is resampled on an arclength grid with
/// tip spacing `b(o) / tip_cells` (see [`flow::remap_to_arclength`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemapPolicy {
    pub lapse_floor: f64,
    pub tip_cells: f64,
    pub far_cells: f64,
    pub ratio: f64,
}

impl Default for RemapPolicy {
    fn default() -> Self {
        RemapPolicy { lapse_floor: 0.5, tip_cells: 32.0, far_cells: 8.0, ratio: 1.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub k: u32,
    pub initial: InitialData,
    pub xi_max: f64,
    pub n: usize,
    pub grading: Grading,
    pub gauge: Gauge,
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub t_max: f64,
    pub b_tip_min: f64,
    pub riem_max: f64,
    pub max_steps: u64,
    pub output: OutputCadence,
    pub remap: Option<RemapPolicy>,
    /// Constant in `H-` and `H+`; defaults to `k^2 + k + 1`.
    pub c_hpm: Option<f64>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            k: 2,
            initial: InitialData::TanhCap,
            xi_max: 20.0,
            n: 400,
            grading: Grading::Uniform,
            gauge: Gauge::Arclength,
            cfl_safety: 0.5,
            dt_max: 1e-3,
            t_max: 10.0,
            b_tip_min: 1e-2,
            riem_max: 1e12,
            max_steps: 200_000_000,
            output: OutputCadence::default(),
            remap: Some(RemapPolicy::default()),
            c_hpm: None,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::Config(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if !(self.b_tip_min > 0.0) {
            return bad(format!("b_tip_min must be positive, got {}", self.b_tip_min));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1), got {}", self.cfl_safety));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.dt_max > 0.0) {
            return bad(format!("dt_max must be positive, got {}", self.dt_max));
        }
        if !(self.riem_max > 0.0) {
            return bad(format!("riem_max must be positive, got {}", self.riem_max));
        }
        if !(self.output.dt > 0.0 && self.output.b_log_step > 0.0) {
            return bad("output cadence must be positive".into());
        }
        if let Some(p) = self.remap {
            if !(p.lapse_floor > 0.0 && p.lapse_floor < 1.0 && p.tip_cells >= 4.0 && p.far_cells >= 1.0 && (1.0..=1.2).contains(&p.ratio)) {
                return bad(format!("bad remap policy {p:?}"));
            }
        }
        Ok(())
    }

    pub fn c_hpm(&self) -> f64 {
        self.c_hpm.unwrap_or_else(|| geometry::default_c_hpm(self.k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    /// `b(o)` reached `b_tip_min`.
    Singularity,
    CurvatureLimit,
    TMax,
    StepLimit,
    Instability { message: String },
}

/// One monitor row, recorded at each output instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    pub dt: f64,
    pub steps: u64,
    pub b_tip: f64,
    pub max_riem: f64,
    pub c1: f64,
    pub ds_dt_max: f64,
    pub margins: Margins,
}

/// Class membership of the initial data; non-membership only warns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub q_max: f64,
    pub a_s_min: f64,
    pub b_s_min: f64,
    pub y_max: f64,
    pub sup_a_s: f64,
    pub sup_b_bss: f64,
    pub member: bool,
    pub warnings: Vec<String>,
}

/// Tolerance for class membership of sampled initial data: slack for the
/// discrete slopes, equal to the default inequality tolerance.
const CLASS_TOL: f64 = 1e-6;

pub fn class_report(state: &MetricState) -> ClassReport {
    let qs = geometry::scale_invariants(state, geometry::default_c_hpm(state.k()));
    let max = |v: &[f64]| v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let min = |v: &[f64]| v.iter().fold(f64::INFINITY, |m, x| m.min(*x));
    let abs_max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut r = ClassReport {
        q_max: max(&qs.q),
        a_s_min: min(&qs.a_s),
        b_s_min: min(&qs.b_s),
        y_max: max(&qs.y),
        sup_a_s: max(&qs.a_s),
        sup_b_bss: abs_max(&qs.bbss),
        member: true,
        warnings: vec![],
    };
    let checks = [
        (r.q_max <= 1.0 + CLASS_TOL, format!("Q exceeds 1 (max {})", r.q_max)),
        (r.a_s_min >= -CLASS_TOL, format!("a_s negative (min {})", r.a_s_min)),
        (r.b_s_min >= -CLASS_TOL, format!("b_s negative (min {})", r.b_s_min)),
        (r.y_max <= CLASS_TOL, format!("y positive (max {})", r.y_max)),
        (r.sup_a_s.is_finite() && r.sup_b_bss.is_finite(), "unbounded a_s or b b_ss".to_string()),
    ];
    for (ok, msg) in checks {
        if !ok {
            r.member = false;
            r.warnings.push(msg);
        }
    }
    r
}

/// Estimate of the singular time with one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularTime {
    pub estimate: f64,
    pub uncertainty: f64,
}

/// Number of trailing samples used in the singular-time fit.
pub const FIT_SAMPLES: usize = 20;

/// Least-squares line through `(t, b^2)` extrapolated to `b^2 = 0`.
pub fn fit_singular_time(t: &[f64], b2: &[f64]) -> Result<SingularTime, FlowError> {
    let m = t.len().min(b2.len());
    if m < FIT_SAMPLES {
        return Err(FlowError::TooFewSamples { needed: FIT_SAMPLES });
    }
    let (t, y) = (&t[m - FIT_SAMPLES..m], &b2[m - FIT_SAMPLES..m]);
    let nf = FIT_SAMPLES as f64;
    let tm = t.iter().sum::<f64>() / nf;
    let ym = y.iter().sum::<f64>() / nf;
    let stt: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let slope = sty / stt;
    if !(slope < 0.0) {
        return Err(FlowError::Config(format!("b(o)^2 is not decreasing near the end (slope {slope})")));
    }
    let icpt = ym - slope * tm;
    let estimate = -icpt / slope;
    let resid: f64 = t.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let sigma2 = resid / (nf - 2.0);
    // Delta method on estimate = -icpt/slope, using the fit covariance.
    let var_slope = sigma2 / stt;
    let var_icpt = sigma2 * (1.0 / nf + tm * tm / stt);
    let cov = -tm * sigma2 / stt;
    let (gi, gs) = (-1.0 / slope, icpt / (slope * slope));
    let var = gi * gi * var_icpt + gs * gs * var_slope + 2.0 * gi * gs * cov;
    Ok(SingularTime { estimate, uncertainty: var.max(0.0).sqrt() })
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub config: FlowConfig,
    pub c_hpm: f64,
    /// Stored states; the first is the initial data, the last the final state.
    #[serde(skip)]
    pub snapshots: Vec<MetricState>,
    pub monitors: Vec<MonitorRow>,
    pub stop: StopReason,
    pub steps: u64,
    pub remap_times: Vec<f64>,
    pub t_sing: Option<SingularTime>,
    pub class_report: ClassReport,
    /// Curvature at the outer node above 1% of the tip curvature at the end.
    pub boundary_contaminated: bool,
    #[serde(skip)]
    pub final_state: Option<MetricState>,
}

impl Trajectory {
    pub fn last_state(&self) -> Option<&MetricState> {
        self.final_state.as_ref().or(self.snapshots.last())
    }
}

fn monitor_row(state: &MetricState, dt: f64, steps: u64, c_hpm: f64, cap: f64) -> Result<MonitorRow, FlowError> {
    let d = state.derivatives();
    let curv = geometry::curvature_from(state, &d)?;
    let qs = geometry::scale_invariants_from(state, &d, c_hpm);
    let c1 = curv.riem_norm.iter().zip(state.b()).fold(0.0f64, |m, (r, b)| m.max(r * b * b));
    let ds = flow::ds_dt(state)?;
    Ok(MonitorRow {
        t: state.t(),
        dt,
        steps,
        b_tip: state.b()[0],
        max_riem: curv.max_norm(),
        c1,
        ds_dt_max: ds.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        margins: diagnostics::margins(state, &qs, cap),
    })
}

fn needs_remap(state: &MetricState, p: &RemapPolicy) -> bool {
    let u = state.u();
    let (lo, hi) = u.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    let tip_cell = u[0] * state.grid().spacing(0);
    lo < p.lapse_floor || hi > 1.0 / p.lapse_floor || state.b()[0] / tip_cell < 0.5 * p.tip_cells
}

/// Integrates the flow until a stop criterion fires.
pub fn run(config: &FlowConfig) -> Result<Trajectory, FlowError> {
    config.validate()?;
    let grid = Arc::new(RadialGrid::build(config.xi_max, config.n, config.grading)?);
    let initial = flow::make_initial_data(&config.initial, config.k, grid)?;
    run_from(config, initial)
}

/// Like [`run`] but starting from a given state (its `k` overrides the config).
pub fn run_from(config: &FlowConfig, initial: MetricState) -> Result<Trajectory, FlowError> {
    config.validate()?;
    let mut initial = initial;
    if config.gauge == Gauge::Arclength && initial.u().iter().any(|u| *u != 1.0) {
        if !initial.is_tip() {
            return Err(FlowError::Config("arclength gauge needs u = 1 on segment data".into()));
        }
        let p = config.remap.unwrap_or_default();
        initial = flow::remap_to_arclength(&initial, p.tip_cells, p.far_cells, p.ratio)?;
    }
    let c_hpm = config.c_hpm();
    let cap = diagnostics::a_s_cap(&initial, c_hpm);
    let out = &config.output;
    let mut times: Vec<f64> = out.times.iter().copied().filter(|t| *t > initial.t()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut next_exact = times.into_iter().peekable();

    let mut traj = Trajectory {
        config: config.clone(),
        c_hpm,
        snapshots: vec![],
        monitors: vec![],
        stop: StopReason::TMax,
        steps: 0,
        remap_times: vec![],
        t_sing: None,
        class_report: class_report(&initial),
        boundary_contaminated: false,
        final_state: None,
    };
    let mut bd = FlowBoundary::from_state(&initial).with_gauge(config.gauge);
    let mut state = initial;
    let record = |traj: &mut Trajectory, st: &MetricState, dt: f64| -> Result<(), FlowError> {
        traj.monitors.push(monitor_row(st, dt, traj.steps, c_hpm, cap)?);
        if out.keep_snapshots || traj.snapshots.is_empty() {
            traj.snapshots.push(st.clone());
        }
        Ok(())
    };
    record(&mut traj, &state, 0.0)?;
    let (mut last_t, mut last_b) = (state.t(), state.b()[0]);
    let mut dt = 0.0;

    loop {
        if state.b()[0] <= config.b_tip_min {
            traj.stop = StopReason::Singularity;
            break;
        }
        if state.t() >= config.t_max * (1.0 - 1e-14) {
            traj.stop = StopReason::TMax;
            break;
        }
        if traj.steps >= config.max_steps {
            traj.stop = StopReason::StepLimit;
            break;
        }
        if let (Some(p), true) = (config.remap, state.is_tip()) {
            if needs_remap(&state, &p) {
                let u_end = state.u()[state.len() - 1];
                state = flow::remap_to_arclength(&state, p.tip_cells, p.far_cells, p.ratio)?;
                bd = bd.to_arclength(u_end);
                traj.remap_times.push(state.t());
            }
        }
        let b0 = state.b()[0];
        let mut target = flow::stable_dt(&state, config.cfl_safety).min(config.dt_max).min(0.01 * b0 * b0);
        target = target.min(config.t_max - state.t());
        let mut exact_hit = false;
        if let Some(&te) = next_exact.peek() {
            if state.t() + target >= te {
                target = te - state.t();
                exact_hit = true;
            }
        }
        if !(target > 0.0) {
            // An exact output time coincides with the current time.
            next_exact.next();
            continue;
        }
        dt = target;
        match flow::step_with(&state, dt, &bd, config.cfl_safety) {
            Ok(next) => state = next,
            Err(e @ (FlowError::NonFinite { .. } | FlowError::LostPositivity { .. })) => {
                traj.stop = StopReason::Instability { message: e.to_string() };
                break;
            }
            Err(e) => return Err(e),
        }
        traj.steps += 1;
        if exact_hit {
            let te = next_exact.next().unwrap_or(state.t());
            state = state.with_time(te);
        }
        let b_now = state.b()[0];
        let due = exact_hit
            || state.t() - last_t >= out.dt
            || (last_b / b_now).ln() >= out.b_log_step
            || b_now <= config.b_tip_min;
        if due {
            record(&mut traj, &state, dt)?;
            last_t = state.t();
            last_b = b_now;
            if traj.monitors.last().is_some_and(|m| m.max_riem >= config.riem_max) {
                traj.stop = StopReason::CurvatureLimit;
                break;
            }
        }
    }
    if traj.monitors.last().is_none_or(|m| m.t < state.t()) {
        record(&mut traj, &state, dt)?;
    }
    if traj.stop == StopReason::Singularity {
        let (t, b2): (Vec<f64>, Vec<f64>) = traj.monitors.iter().map(|m| (m.t, m.b_tip * m.b_tip)).unzip();
        traj.t_sing = fit_singular_time(&t, &b2).ok();
    }
    let curv = geometry::curvature(&state)?;
    let last = curv.riem_norm.len() - 1;
    traj.boundary_contaminated = curv.riem_norm[last] > 0.01 * curv.riem_norm[0];
    if !out.keep_snapshots {
        traj.final_state = Some(state);
    } else if traj.snapshots.last().is_none_or(|s| s.t() < state.t()) {
        traj.snapshots.push(state);
    }
    Ok(traj)
}

/// Trajectory from stored snapshots (the first being the initial data) with
/// the monitor rows recomputed. Step counts and step sizes are not stored
/// and read as zero.
pub fn rebuild(config: &FlowConfig, snapshots: Vec<MetricState>, stop: StopReason) -> Result<Trajectory, FlowError> {
    let initial = snapshots.first().ok_or(FlowError::TooFewSamples { needed: 1 })?;
    let c_hpm = config.c_hpm();
    let cap = diagnostics::a_s_cap(initial, c_hpm);
    let monitors = snapshots.iter().map(|s| monitor_row(s, 0.0, 0, c_hpm, cap)).collect::<Result<Vec<_>, _>>()?;
    let t_sing = match stop {
        StopReason::Singularity => {
            let (t, b2): (Vec<f64>, Vec<f64>) = monitors.iter().map(|m| (m.t, m.b_tip * m.b_tip)).unzip();
            fit_singular_time(&t, &b2).ok()
        }
        _ => None,
    };
    let last = snapshots.last().unwrap_or(initial);
    let curv = geometry::curvature(last)?;
    let end = curv.riem_norm.len() - 1;
    Ok(Trajectory {
        config: config.clone(),
        c_hpm,
        class_report: class_report(initial),
        boundary_contaminated: curv.riem_norm[end] > 0.01 * curv.riem_norm[0],
        monitors,
        stop,
        steps: 0,
        remap_times: vec![],
        t_sing,
        snapshots,
        final_state: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TypeI,
    TypeII,
    NoSingularity,
    Inconclusive,
}

/// Growth factor of the Type II indicator across the final decade of `b(o)`
/// required for a Type II verdict. A heuristic, not a theorem.
pub const TYPE_II_GROWTH: f64 = 4.0;

#[derive(Debug, Clone, Serialize)]
pub struct SingularityReport {
    pub t_sing: Option<SingularTime>,
    pub t: Vec<f64>,
    pub b_tip: Vec<f64>,
    /// `(T - t) max |Rm|`.
    pub riem_indicator: Vec<f64>,
    /// `(T - t) b(o)^-2`.
    pub b_indicator: Vec<f64>,
    /// Ratio last/first of each indicator over the final decade of `b(o)`.
    pub riem_growth: f64,
    pub b_growth: f64,
    /// Mean of `(T - t) b(o)^-2` over the final decade.
    pub b_indicator_mean: f64,
    pub verdict: Verdict,
}

/// Type I / Type II classification of a trajectory stopped at the singularity threshold.
pub fn detect_singularity(traj: &Trajectory, growth_threshold: f64) -> Result<SingularityReport, FlowError> {
    let empty = |verdict| SingularityReport {
        t_sing: None,
        t: vec![],
        b_tip: vec![],
        riem_indicator: vec![],
        b_indicator: vec![],
        riem_growth: f64::NAN,
        b_growth: f64::NAN,
        b_indicator_mean: f64::NAN,
        verdict,
    };
    match traj.stop {
        StopReason::Singularity | StopReason::CurvatureLimit => {}
        StopReason::TMax => return Ok(empty(Verdict::NoSingularity)),
        _ => return Ok(empty(Verdict::Inconclusive)),
    }
    let (t, b2): (Vec<f64>, Vec<f64>) = traj.monitors.iter().map(|m| (m.t, m.b_tip * m.b_tip)).unzip();
    let ts = fit_singular_time(&t, &b2)?;
    let rows: Vec<&MonitorRow> = traj.monitors.iter().filter(|m| m.t < ts.estimate).collect();
    let b_end = rows.last().map(|m| m.b_tip).ok_or(FlowError::TooFewSamples { needed: FIT_SAMPLES })?;
    let start = rows.iter().position(|m| m.b_tip <= 10.0 * b_end).unwrap_or(0);
    if start == 0 && rows[0].b_tip < 10.0 * b_end * (1.0 - 1e-9) {
        return Err(FlowError::Config(format!(
            "run covers less than a decade of b(o): {} down to {b_end}",
            rows[0].b_tip
        )));
    }
    let decade = &rows[start..];
    if decade.len() < FIT_SAMPLES {
        return Err(FlowError::TooFewSamples { needed: FIT_SAMPLES });
    }
    let mut rep = empty(Verdict::Inconclusive);
    rep.t_sing = Some(ts);
    for m in &rows {
        let gap = ts.estimate - m.t;
        rep.t.push(m.t);
        rep.b_tip.push(m.b_tip);
        rep.riem_indicator.push(gap * m.max_riem);
        rep.b_indicator.push(gap / (m.b_tip * m.b_tip));
    }
    let d_b = &rep.b_indicator[start..];
    let d_r = &rep.riem_indicator[start..];
    rep.b_growth = d_b[d_b.len() - 1] / d_b[0];
    rep.riem_growth = d_r[d_r.len() - 1] / d_r[0];
    rep.b_indicator_mean = d_b.iter().sum::<f64>() / d_b.len() as f64;
    rep.verdict = if rep.b_growth >= growth_threshold {
        Verdict::TypeII
    } else if rep.b_growth <= growth_threshold.sqrt() && rep.b_growth >= 1.0 / growth_threshold.sqrt() {
        Verdict::TypeI
    } else {
        Verdict::Inconclusive
    };
    Ok(rep)
}
