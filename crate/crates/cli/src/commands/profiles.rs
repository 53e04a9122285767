use std::path::Path;

use serde::Serialize;
use u2flow::io;
use u2flow::reference::{self, SolitonParams, Termination};
use u2flow_cli::trajectory::write_json;

use super::{config, other, output, positive, prepare_out, Outcome};

#[derive(Serialize)]
struct EhReport {
    s_max: f64,
    ds: f64,
    a_s_end: f64,
    b_s_end: f64,
    /// Secant slopes of `a` and `b` over `[s_max / 2, s_max]`.
    a_secant: f64,
    b_secant: f64,
    q_end: f64,
}

pub fn eh(out: &Path, s_max: f64, ds: f64) -> Outcome {
    positive("s_max", s_max)?;
    positive("ds", ds)?;
    if ds >= s_max {
        return Err(config(format!("ds = {ds} must be below s_max = {s_max}")));
    }
    prepare_out(out)?;
    let p = reference::integrate_eh(s_max, ds).map_err(other)?;
    let rows: Vec<Vec<f64>> = (0..p.s.len()).map(|i| vec![p.s[i], p.a[i], p.b[i], p.a_s[i], p.b_s[i]]).collect();
    io::write_table(&out.join("eh_profile.csv"), &["s", "a", "b", "a_s", "b_s"], &rows).map_err(output)?;

    let end = p.s.len() - 1;
    let (a_mid, b_mid) = p.eval(0.5 * s_max);
    let rep = EhReport {
        s_max,
        ds: p.ds,
        a_s_end: p.a_s[end],
        b_s_end: p.b_s[end],
        a_secant: (p.a[end] - a_mid) / (0.5 * s_max),
        b_secant: (p.b[end] - b_mid) / (0.5 * s_max),
        q_end: p.a[end] / p.b[end],
    };
    write_json(&out.join("eh_report.json"), &rep).map_err(output)?;
    println!("asymptotic slopes at s = {s_max}: a_s = {}, b_s = {}", rep.a_s_end, rep.b_s_end);
    Ok(())
}

#[derive(Serialize)]
struct SolitonReport {
    file: String,
    params: SolitonParams,
    tip_y_s: f64,
    termination: Termination,
    /// A violation or breakdown before `s_max`.
    obstructed: bool,
    samples: usize,
    g_counterexamples: usize,
}

pub fn soliton(out: &Path, k: u32, rho: f64, b0s: &[f64], s_max: f64) -> Outcome {
    if rho < 0.0 {
        return Err(config(format!("rho = {rho}: expanding solitons are out of scope")));
    }
    positive("rho", rho)?;
    positive("s_max", s_max)?;
    if k == 0 {
        return Err(config("k must be positive".into()));
    }
    if b0s.is_empty() {
        return Err(config("b0 sweep is empty".into()));
    }
    for b0 in b0s {
        positive("b0", *b0)?;
    }
    prepare_out(out)?;
    let mut reports = vec![];
    for (i, b0) in b0s.iter().enumerate() {
        let st = reference::integrate_soliton(SolitonParams::new(k, *b0, rho, s_max)).map_err(other)?;
        let file = format!("soliton_{i:02}.csv");
        let rows: Vec<Vec<f64>> = (0..st.s.len())
            .map(|j| vec![st.s[j], st.a[j], st.a_s[j], st.b[j], st.b_s[j], st.f_s[j], st.q[j], st.x[j], st.y[j], st.g[j], st.t1[j]])
            .collect();
        let header = ["s", "a", "a_s", "b", "b_s", "f_s", "q", "x", "y", "g", "t1"];
        io::write_table(&out.join(&file), &header, &rows).map_err(output)?;
        let obstructed = !matches!(st.termination, Termination::Reached);
        println!("b0 = {b0}: y_s(0) = {:.6e}, {:?}", st.tip_y_s, st.termination);
        reports.push(SolitonReport {
            file,
            params: st.params,
            tip_y_s: st.tip_y_s,
            termination: st.termination,
            obstructed,
            samples: st.len(),
            g_counterexamples: st.g_counterexamples().len(),
        });
    }
    write_json(&out.join("soliton_report.json"), &reports).map_err(output)
}
