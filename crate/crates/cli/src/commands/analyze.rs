use std::path::Path;

use serde::Serialize;
use u2flow::blowup::{self, BlowupReport, ClassifyConfig, EhDistanceSample, Tracker};
use u2flow::diagnostics::{self, CurvatureBound, MarginRecord};
use u2flow::laws::{self, ResidualReport};
use u2flow::run::{self, ClassReport, SingularityReport, StopReason, Trajectory};
use u2flow_cli::trajectory::{self, write_json};

use super::{output, other, prepare_out, Failure, Outcome};

/// Tolerance for a margin to count as satisfied.
const MARGIN_TOL: f64 = 1e-6;
/// Half-width of the rescaled window, in units of `b(o)`, for the EH distance.
const EH_WINDOW: f64 = 5.0;
/// Tracked point at distance `SIGMA b(o)` from the tip for the regime classifier.
const SIGMA: f64 = 5.0;
/// Residual ladder centres as fractions of the final time.
const LADDER_CENTRES: [f64; 2] = [0.04, 0.06];
const LADDER_LEVELS: usize = 3;

/// A report section that may not apply to the trajectory at hand.
#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum Section<T> {
    Ok(T),
    Unavailable(String),
}

impl<T, E: std::fmt::Display> From<Result<T, E>> for Section<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Section::Ok(v),
            Err(e) => Section::Unavailable(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Margins {
    tolerance: f64,
    all_satisfied: bool,
    records: Vec<MarginRecord>,
}

#[derive(Serialize)]
struct Curvature {
    monitor: CurvatureBound,
    /// `max / min - 1` of `C1` over the final decade of `b(o)`.
    final_decade_variation: f64,
}

#[derive(Serialize)]
struct Blowup {
    tracker: Tracker,
    classification: Section<BlowupReport>,
    eh_distance: Section<Vec<EhDistanceSample>>,
    /// Distance at the start and at the end of the final decade of `b(o)`.
    eh_distance_final_decade: Option<(f64, f64)>,
}

#[derive(Serialize)]
struct Analysis<'a> {
    stop: &'a StopReason,
    snapshots: usize,
    class_report: &'a ClassReport,
    margins: Margins,
    curvature_bound: Section<Curvature>,
    singularity: Section<SingularityReport>,
    blowup: Section<Blowup>,
}

#[derive(Serialize)]
struct Residuals {
    centres: Vec<f64>,
    window: (f64, f64),
    laws: Vec<(String, Section<ResidualReport>)>,
}

pub fn analyze(dir: &Path, out: Option<&Path>, resolution_ladder: bool) -> Outcome {
    let traj = trajectory::read_trajectory(dir).map_err(other)?;
    let default_out = dir.join("analysis");
    let out = out.unwrap_or(&default_out);
    prepare_out(out)?;

    let records = diagnostics::inequality_monitor(&traj, MARGIN_TOL);
    let analysis = Analysis {
        stop: &traj.stop,
        snapshots: traj.snapshots.len(),
        class_report: &traj.class_report,
        margins: Margins { tolerance: MARGIN_TOL, all_satisfied: records.iter().all(|r| r.satisfied), records },
        curvature_bound: curvature(&traj).into(),
        singularity: run::detect_singularity(&traj, run::TYPE_II_GROWTH).into(),
        blowup: blowup_section(&traj),
    };
    write_json(&out.join("analysis.json"), &analysis).map_err(output)?;
    if let Section::Ok(s) = &analysis.singularity {
        println!("singularity verdict: {:?}", s.verdict);
    }
    if let Section::Ok(Blowup { classification: Section::Ok(r), .. }) = &analysis.blowup {
        println!("blow-up regime: {:?}", r.regime);
    }
    println!("margins all satisfied: {}", analysis.margins.all_satisfied);

    if resolution_ladder {
        let res = residuals(&traj)?;
        write_json(&out.join("residuals.json"), &res).map_err(output)?;
        for (name, rep) in &res.laws {
            match rep {
                Section::Ok(r) => println!("residual order {name}: {:.2}", r.order),
                Section::Unavailable(why) => println!("residual order {name}: n/a ({why})"),
            }
        }
    }
    Ok(())
}

fn final_decade(traj: &Trajectory) -> impl Iterator<Item = &run::MonitorRow> {
    let b_end = traj.monitors.last().map_or(0.0, |m| m.b_tip);
    traj.monitors.iter().filter(move |m| m.b_tip <= 10.0 * b_end)
}

fn curvature(traj: &Trajectory) -> Result<Curvature, u2flow::flow::FlowError> {
    let (lo, hi) = final_decade(traj).fold((f64::INFINITY, 0.0f64), |(l, h), m| (l.min(m.c1), h.max(m.c1)));
    let start = final_decade(traj).next().map_or(0.0, |m| m.t);
    Ok(Curvature { monitor: diagnostics::curvature_bound_monitor(traj, start)?, final_decade_variation: hi / lo - 1.0 })
}

fn blowup_section(traj: &Trajectory) -> Section<Blowup> {
    if !traj.snapshots.first().is_some_and(|s| s.is_tip()) {
        return Section::Unavailable("blow-up analysis needs a tip".into());
    }
    let tracker = Tracker::ScaledDistance(SIGMA);
    let classification =
        blowup::track(traj, tracker).and_then(|tracked| blowup::classify(traj, &tracked, &ClassifyConfig::default())).into();
    let series = blowup::eh_distance_series(traj, EH_WINDOW);
    let eh_distance_final_decade = series.as_ref().ok().and_then(|s| {
        let b_end = s.last()?.b_tip;
        let first = s.iter().find(|e| e.b_tip <= 10.0 * b_end)?;
        Some((first.distance.total(), s.last()?.distance.total()))
    });
    Section::Ok(Blowup { tracker, classification, eh_distance: series.into(), eh_distance_final_decade })
}

fn residuals(traj: &Trajectory) -> Result<Residuals, Failure> {
    let t_end = traj.monitors.last().map_or(0.0, |m| m.t);
    let centres: Vec<f64> = LADDER_CENTRES.iter().map(|c| c * t_end).collect();
    let ladder = laws::residual_ladder(&traj.config, LADDER_LEVELS, &centres)
        .map_err(|e| other(anyhow::Error::new(e).context("residual ladder")))?;
    let window = (0.0, t_end);
    let laws = laws::registry(traj.c_hpm)
        .iter()
        .map(|law| (law.name.clone(), laws::residual_report(law, &ladder, window).into()))
        .collect();
    Ok(Residuals { centres, window, laws })
}
