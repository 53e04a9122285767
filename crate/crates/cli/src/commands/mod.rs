pub mod analyze;
pub mod certify;
pub mod profiles;
pub mod run;

use std::fs;
use std::path::Path;

use anyhow::anyhow;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    /// Config or parameter error.
    Config(anyhow::Error),
    /// Output location cannot be written.
    Output(anyhow::Error),
    /// A certificate was refuted or left undecided; carries the witness.
    Refuted(String),
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Output(_) => 3,
            Failure::Refuted(_) | Failure::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) | Failure::Output(e) | Failure::Other(e) => write!(f, "{e:#}"),
            Failure::Refuted(w) => write!(f, "{w}"),
        }
    }
}

pub type Outcome = Result<(), Failure>;

pub fn other(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Other(e.into())
}

pub fn output(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Output(e.into())
}

pub fn config(msg: String) -> Failure {
    Failure::Config(anyhow!(msg))
}

/// Creates `dir` and checks that a file can be written into it.
pub fn prepare_out(dir: &Path) -> Outcome {
    let ctx = |e: std::io::Error| output(anyhow!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(ctx)?;
    let probe = dir.join(".u2flow-probe");
    fs::write(&probe, b"").map_err(ctx)?;
    fs::remove_file(&probe).map_err(ctx)
}

/// Rejects parameters outside `(0, inf)`.
pub fn positive(name: &str, v: f64) -> Outcome {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config(format!("{name} must be positive, got {v}")))
    }
}
