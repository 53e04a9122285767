//! On-disk layout of a run directory:
//!
//! ```text
//! config.txt          config text as read
//! monitors.csv        one row per output instant
//! snapshots/NNNNN.csv snapshot tables with their `.meta` sidecars
//! trajectory.json     config, stop reason, fit and snapshot index
//! manifest.json       see [`crate::manifest`]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use u2flow::diagnostics::MARGIN_NAMES;
use u2flow::flow::FlowError;
use u2flow::io::{self, IoError};
use u2flow::run::{self, ClassReport, FlowConfig, SingularTime, StopReason, Trajectory};
use u2flow::state::MetricState;

pub const CONFIG_FILE: &str = "config.txt";
pub const MONITORS_FILE: &str = "monitors.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}: no trajectory found")]
    Missing(PathBuf),
    #[error("{0}: trajectory lists no snapshots")]
    NoSnapshots(PathBuf),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub t: f64,
    pub b_tip: f64,
}

#[derive(Serialize)]
struct TrajectoryRecord<'a> {
    config: &'a FlowConfig,
    c_hpm: f64,
    stop: &'a StopReason,
    steps: u64,
    remap_times: &'a [f64],
    t_sing: Option<SingularTime>,
    class_report: &'a ClassReport,
    boundary_contaminated: bool,
    snapshots: Vec<SnapshotEntry>,
}

/// The part of `trajectory.json` needed to rebuild a [`Trajectory`].
#[derive(Deserialize)]
struct TrajectoryIndex {
    config: FlowConfig,
    stop: StopReason,
    snapshots: Vec<SnapshotEntry>,
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), TrajectoryError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| TrajectoryError::Json { path: path.to_owned(), source })?;
    fs::write(path, text + "\n").map_err(|source| TrajectoryError::File { path: path.to_owned(), source })
}

fn monitor_rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.monitors
        .iter()
        .map(|m| {
            let mut row = vec![m.t, m.dt, m.steps as f64, m.b_tip, m.max_riem, m.c1, m.ds_dt_max];
            row.extend(m.margins.values().iter().map(|v| v.unwrap_or(f64::NAN)));
            row
        })
        .collect()
}

/// Writes monitors, snapshots and `trajectory.json` under `dir`, which must
/// exist. Returns the written paths relative to `dir`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<String>, TrajectoryError> {
    let mut files = vec![];
    let mut header = vec!["t", "dt", "steps", "b_tip", "max_riem", "c1", "ds_dt_max"];
    header.extend(MARGIN_NAMES);
    io::write_table(&dir.join(MONITORS_FILE), &header, &monitor_rows(traj))?;
    files.push(MONITORS_FILE.to_string());

    let snap_dir = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).map_err(|source| TrajectoryError::File { path: snap_dir.clone(), source })?;
    let states: Vec<&MetricState> = traj.snapshots.iter().chain(&traj.final_state).collect();
    let mut index = vec![];
    for (i, st) in states.iter().enumerate() {
        let file = format!("{SNAPSHOT_DIR}/{i:05}.csv");
        let path = dir.join(&file);
        io::write_snapshot(&path, st)?;
        files.push(file.clone());
        files.push(format!("{file}.meta"));
        index.push(SnapshotEntry { file, t: st.t(), b_tip: st.b()[0] });
    }

    let record = TrajectoryRecord {
        config: &traj.config,
        c_hpm: traj.c_hpm,
        stop: &traj.stop,
        steps: traj.steps,
        remap_times: &traj.remap_times,
        t_sing: traj.t_sing,
        class_report: &traj.class_report,
        boundary_contaminated: traj.boundary_contaminated,
        snapshots: index,
    };
    write_json(&dir.join(TRAJECTORY_FILE), &record)?;
    files.push(TRAJECTORY_FILE.to_string());
    Ok(files)
}

/// Reloads a run directory, recomputing the monitor rows from the snapshots.
pub fn read_trajectory(dir: &Path) -> Result<Trajectory, TrajectoryError> {
    let path = dir.join(TRAJECTORY_FILE);
    if !path.is_file() {
        return Err(TrajectoryError::Missing(dir.to_owned()));
    }
    let text = fs::read_to_string(&path).map_err(|source| TrajectoryError::File { path: path.clone(), source })?;
    let index: TrajectoryIndex = serde_json::from_str(&text).map_err(|source| TrajectoryError::Json { path, source })?;
    if index.snapshots.is_empty() {
        return Err(TrajectoryError::NoSnapshots(dir.to_owned()));
    }
    let snapshots = index.snapshots.iter().map(|e| io::read_snapshot(&dir.join(&e.file))).collect::<Result<Vec<_>, _>>()?;
    Ok(run::rebuild(&index.config, snapshots, index.stop)?)
}
