use std::path::Path;

use serde::Serialize;
use u2flow::certificates::{self, CertificateReport, Verdict};
use u2flow::ftheta;
use u2flow_cli::trajectory::write_json;

use super::{config, other, output, prepare_out, Failure, Outcome};

/// Radial step of the `f_theta` integrations.
const THETA_DR: f64 = 1e-4;

#[derive(Serialize)]
struct Bundle {
    seed: Option<u64>,
    exact_verified: bool,
    claims: Vec<CertificateReport>,
    quadratic: Vec<CertificateReport>,
}

pub fn certify(out: Option<&Path>, thetas: &[f64], seed: Option<u64>, inject_fault: bool) -> Outcome {
    if let Some(t) = thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(config(format!("theta must lie in (0, 1), got {t}")));
    }
    if let Some(dir) = out {
        prepare_out(dir)?;
    }
    let mut claims = certificates::polynomial_claims().map_err(other)?;
    if let Some(s) = seed {
        certificates::reseed_lattices(&mut claims, s);
    }
    if inject_fault {
        certificates::inject_fault(&mut claims);
    }
    let claims = claims.iter().map(certificates::check_claim).collect::<Result<Vec<_>, _>>().map_err(other)?;
    let quadratic = thetas
        .iter()
        .map(|t| ftheta::solve_ftheta(*t, THETA_DR).map(|sol| certificates::quadratic_positive_check(&sol)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(other)?;
    let failed: Vec<&CertificateReport> = claims.iter().filter(|r| r.exact && r.verdict != Verdict::Verified).collect();
    let bundle = Bundle { seed, exact_verified: failed.is_empty(), claims: claims.clone(), quadratic };

    match out {
        Some(dir) => write_json(&dir.join("certificates.json"), &bundle).map_err(output)?,
        None => println!("{}", serde_json::to_string_pretty(&bundle).map_err(other)?),
    }
    for r in bundle.claims.iter().chain(&bundle.quadratic) {
        eprintln!("{:<36} {:?} ({:?})", r.claim, r.verdict, r.method);
    }
    match failed.first() {
        None => Ok(()),
        Some(r) => Err(Failure::Refuted(format!(
            "claim {} {:?} on {}; witness {}",
            r.claim,
            r.verdict,
            r.region,
            serde_json::to_string(&r.witness).map_err(other)?
        ))),
    }
}
