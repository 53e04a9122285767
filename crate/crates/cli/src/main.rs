//! `u2flow`: run, analyze and certify U(2)-invariant Ricci flow experiments.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

const AFTER_HELP: &str = "\
Config keys may be overridden from the environment as U2FLOW_<KEY>, with `.` \
written as `__` (U2FLOW_REMAP__TIP_CELLS=48 sets remap.tip_cells).

Exit status: 0 success, 1 failure or refuted certificate, 2 config or \
parameter error, 3 output not writable.";

#[derive(Parser)]
#[command(name = "u2flow", version, about, after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial data of a config file and store the trajectory.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if needed.
        #[arg(long)]
        out: PathBuf,
    },
    /// Margins, curvature bound, singularity type and blow-up regime of a stored run.
    Analyze {
        /// Directory written by `run`.
        dir: PathBuf,
        /// Report directory [default: DIR/analysis].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also rerun the config on three resolutions and report evolution-law residual orders.
        #[arg(long)]
        resolution_ladder: bool,
    },
    /// Check the polynomial certificates and the quadratic positivity along f_theta.
    Certify {
        /// Output directory; the bundle goes to stdout without it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
        theta_ladder: Vec<f64>,
        /// Sample lattice claims at seeded jittered points.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Eguchi-Hanson profile and its asymptotic slopes.
    Eh {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        s_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        ds: f64,
    },
    /// Shooting sweep for shrinking solitons over tip radii.
    Soliton {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        rho: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1,1.25,1.5,2,3")]
        b0: Vec<f64>,
        #[arg(long, default_value_t = 50.0)]
        s_max: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => commands::run::run(config, out),
        Command::Analyze { dir, out, resolution_ladder } => commands::analyze::analyze(dir, out.as_deref(), *resolution_ladder),
        Command::Certify { out, theta_ladder, seed, inject_fault } => {
            commands::certify::certify(out.as_deref(), theta_ladder, *seed, *inject_fault)
        }
        Command::Eh { out, s_max, ds } => commands::profiles::eh(out, *s_max, *ds),
        Command::Soliton { out, k, rho, b0, s_max } => commands::profiles::soliton(out, *k, *rho, b0, *s_max),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let label = match f {
                Failure::Config(_) => "config error",
                Failure::Output(_) => "output error",
                Failure::Refuted(_) => "certificate failed",
                Failure::Other(_) => "error",
            };
            eprintln!("u2flow: {label}: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
