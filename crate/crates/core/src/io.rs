//! Snapshot files: a CSV table `xi,u,a,b` plus a `key = value` sidecar
//! holding `k`, `t`, the inner boundary kind and the grading.
//! Numbers are written with 17 significant digits so binary64 values
//! survive the round trip exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::grid::{Grading, GridError, RadialGrid};
use crate::state::{InnerBoundary, MetricState, StateError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: missing key `{key}`")]
    MissingKey { path: PathBuf, key: &'static str },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Shortest fixed format that round-trips every binary64 value.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Path of the metadata sidecar belonging to a snapshot table.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    PathBuf::from(p)
}

pub fn write_snapshot(path: &Path, state: &MetricState) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv { path: path.to_owned(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["xi", "u", "a", "b"]).map_err(csv_err)?;
    for j in 0..state.len() {
        w.write_record([
            fmt17(state.grid().nodes()[j]),
            fmt17(state.u()[j]),
            fmt17(state.a()[j]),
            fmt17(state.b()[j]),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.to_owned(), source })?;
    let (inner, grading) = (
        match state.inner() {
            InnerBoundary::Tip => "tip",
            InnerBoundary::Segment => "segment",
        },
        match state.grid().grading() {
            Grading::Uniform => "uniform".to_string(),
            Grading::Geometric { ratio } => format!("geometric {}", fmt17(ratio)),
            Grading::Adapted => "adapted".to_string(),
        },
    );
    let meta = format!(
        "k = {}\nt = {}\ninner = {inner}\ngrading = {grading}\nintervals = {}\nxi_max = {}\n",
        state.k(),
        fmt17(state.t()),
        state.grid().intervals(),
        fmt17(state.grid().xi_max()),
    );
    let side = sidecar_path(path);
    fs::write(&side, meta).map_err(|source| IoError::File { path: side, source })
}

/// Writes a numeric table with a header row, every value in [`fmt17`].
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), IoError> {
    let csv_err = |source| IoError::Csv { path: path.to_owned(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt17(*v))).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File { path: path.to_owned(), source })
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(path: &Path, text: &str) -> Result<BTreeMap<String, (usize, String)>, IoError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| IoError::Parse {
            path: path.to_owned(),
            line: i + 1,
            msg: "expected `key = value`".into(),
        })?;
        out.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_snapshot(path: &Path) -> Result<MetricState, IoError> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|source| IoError::File { path: side.clone(), source })?;
    let meta = parse_key_values(&side, &text)?;
    let get = |key: &'static str| meta.get(key).ok_or(IoError::MissingKey { path: side.clone(), key });
    let bad = |line: usize, msg: String| IoError::Parse { path: side.clone(), line, msg };
    let (line, k) = get("k")?;
    let k: u32 = k.parse().map_err(|e| bad(*line, format!("k: {e}")))?;
    let (line, t) = get("t")?;
    let t: f64 = t.parse().map_err(|e| bad(*line, format!("t: {e}")))?;
    let (line, inner) = get("inner")?;
    let inner = match inner.as_str() {
        "tip" => InnerBoundary::Tip,
        "segment" => InnerBoundary::Segment,
        other => return Err(bad(*line, format!("unknown inner boundary `{other}`"))),
    };
    let (line, grading) = get("grading")?;
    let grading = match grading.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["uniform"] => Grading::Uniform,
        ["adapted"] => Grading::Adapted,
        ["geometric", r] => Grading::Geometric { ratio: r.parse().map_err(|e| bad(*line, format!("ratio: {e}")))? },
        _ => return Err(bad(*line, format!("unknown grading `{grading}`"))),
    };

    let csv_err = |source| IoError::Csv { path: path.to_owned(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let (mut xi, mut u, mut a, mut b) = (vec![], vec![], vec![], vec![]);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |c: usize| -> Result<f64, IoError> {
            rec.get(c).unwrap_or("").parse().map_err(|e| IoError::Parse {
                path: path.to_owned(),
                line: i + 2,
                msg: format!("column {c}: {e}"),
            })
        };
        xi.push(num(0)?);
        u.push(num(1)?);
        a.push(num(2)?);
        b.push(num(3)?);
    }
    let grid = Arc::new(RadialGrid::from_nodes(xi, grading)?);
    Ok(MetricState::new(grid, u, a, b, t, k, inner)?)
}
