use std::fs;
use std::path::Path;

use u2flow::flow::FlowError;
use u2flow_cli::config;
use u2flow_cli::manifest::{self, RunManifest};
use u2flow_cli::trajectory::{self, CONFIG_FILE};

use super::{output, other, prepare_out, Failure, Outcome};

pub fn run(config_path: &Path, out: &Path) -> Outcome {
    let started = manifest::unix_now();
    let cfg = config::load(config_path).map_err(|e| Failure::Config(e.into()))?;
    prepare_out(out)?;
    fs::write(out.join(CONFIG_FILE), &cfg.text).map_err(output)?;

    let traj = u2flow::run::run(&cfg.flow).map_err(|e| match e {
        FlowError::InitialData(_) | FlowError::Config(_) | FlowError::Io(_) => Failure::Config(e.into()),
        e => other(e),
    })?;
    for w in &traj.class_report.warnings {
        eprintln!("warning: initial data outside the preserved class: {w}");
    }

    let mut files = vec![CONFIG_FILE.to_string()];
    files.extend(trajectory::write_trajectory(out, &traj).map_err(output)?);
    let m = RunManifest {
        tool: env!("CARGO_BIN_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.text,
        overrides: cfg.overrides,
        started_unix_s: started,
        finished_unix_s: manifest::unix_now(),
        files: manifest::inventory(out, &files).map_err(output)?,
    };
    m.write(out).map_err(output)?;

    let last = traj.monitors.last();
    println!(
        "stop: {:?}; steps {}; t = {}; b(o) = {}; {} snapshots in {}",
        traj.stop,
        traj.steps,
        last.map_or(0.0, |m| m.t),
        last.map_or(f64::NAN, |m| m.b_tip),
        traj.snapshots.len() + usize::from(traj.final_state.is_some()),
        out.display()
    );
    Ok(())
}
