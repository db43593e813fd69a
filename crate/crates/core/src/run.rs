//! Experiment orchestration and on-disk artifacts.
//!
//! A run directory always receives `manifest.json` before any solve starts. A
//! failed run adds `failure.json`; a successful one the experiment's CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::json;

use crate::config::{Experiment, InitialSelector, RunConfig};
use crate::constitutive::ModelParams;
use crate::diagnostics::{
    continuity_experiment, delta_sweep, energy, energy_decay_check, monitor_norms, scaled_bump_data,
    smalldata_experiment, NormBundle,
};
use crate::error::{Error, Result};
use crate::field::{snapshot, Trajectory};
use crate::parabolic::SolverConfig;
use crate::picard::{nonlinear_residual, picard_solve, InitialData, PicardReport};
use crate::verification::{compat_data, compat_roundtrip, mms_studies, transport_time_unforced, ConvergenceStudy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "NEMATIC_OUTPUT_ROOT";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::Parameter { .. }
        | Error::GridMismatch(_)
        | Error::Domain { .. }
        | Error::Snapshot(_) => EXIT_CONFIG,
        Error::Diverged(_)
        | Error::Cfl { .. }
        | Error::NonFinite(_)
        | Error::Positivity { .. }
        | Error::Precondition(_) => EXIT_DIVERGED,
        Error::NotConverged(_) | Error::Solver { .. } => EXIT_NOT_CONVERGED,
        Error::Io(_) => EXIT_IO,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Parameter { .. } => "parameter",
        Error::GridMismatch(_) => "grid-mismatch",
        Error::Domain { .. } => "domain",
        Error::Precondition(_) => "precondition",
        Error::NonFinite(_) => "non-finite",
        Error::Solver { .. } => "linear-solver",
        Error::Cfl { .. } => "cfl",
        Error::Positivity { .. } => "positivity",
        Error::Diverged(_) => "diverged",
        Error::NotConverged(_) => "not-converged",
        Error::Parse { .. } => "parse",
        Error::Validation { .. } => "validation",
        Error::Snapshot(_) => "snapshot",
        Error::Io(_) => "io",
    }
}

/// Machine-readable failure record.
pub fn failure_record(e: &Error) -> serde_json::Value {
    let mut rec = json!({
        "exit_code": exit_code(e),
        "kind": error_kind(e),
        "message": e.to_string(),
    });
    let detail = match e {
        Error::Solver {
            iterations,
            final_residual,
            residual_history,
        } => json!({
            "iterations": iterations,
            "final_residual": final_residual,
            "residual_history": residual_history,
        }),
        Error::Diverged(r) | Error::NotConverged(r) => json!({
            "sweeps": r.sweep_count(),
            "psi_sup": r.psi_sups(),
            "ratios": r.ratios(),
        }),
        Error::Positivity { level, node, value, bound } => json!({
            "level": level, "node": node, "value": value, "bound": bound,
        }),
        Error::Cfl { cfl, limit } => json!({ "cfl": cfl, "limit": limit }),
        Error::Validation { key, constraint } => json!({ "key": key, "constraint": constraint }),
        Error::Parse { line, message } => json!({ "line": line, "message": message }),
        _ => serde_json::Value::Null,
    };
    if !detail.is_null() {
        rec["detail"] = detail;
    }
    rec
}

/// `--out`, else `output.dir`, else `$NEMATIC_OUTPUT_ROOT/<experiment>`, else
/// `nematic-out/<experiment>`.
pub fn resolve_output_dir(cfg: &RunConfig, cli_out: Option<&Path>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output.dir {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("nematic-out"));
    root.join(cfg.experiment.kind.as_str())
}

pub fn manifest(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.kind.as_str(),
        "config": cfg.serialize(),
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values always serialize");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Runs `cfg` into `dir` and returns the process exit code. Failures leave
/// `failure.json` next to the manifest.
pub fn execute(cfg: &RunConfig, dir: &Path) -> i32 {
    if let Err(e) = cfg.validate() {
        log::error!("{e}");
        return exit_code(&e);
    }
    let started = fs::create_dir_all(dir)
        .map_err(Error::from)
        .and_then(|_| write_json(&dir.join("manifest.json"), &manifest(cfg)));
    if let Err(e) = started {
        log::error!("cannot initialise {}: {e}", dir.display());
        return exit_code(&e);
    }
    match run(cfg, dir) {
        Ok(()) => {
            info!("{} finished; artifacts in {}", cfg.experiment.kind, dir.display());
            EXIT_OK
        }
        Err(e) => {
            log::error!("{e}");
            if let Error::Diverged(r) | Error::NotConverged(r) = &e {
                let _ = write_report(dir, r);
            }
            let code = exit_code(&e);
            if let Err(io) = write_json(&dir.join("failure.json"), &failure_record(&e)) {
                log::error!("cannot write failure record: {io}");
                return EXIT_IO;
            }
            code
        }
    }
}

/// Runs the configured experiment into an existing directory.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let params = cfg.model_params()?;
    match cfg.experiment.kind {
        Experiment::Simulate => simulate(cfg, &params, dir),
        Experiment::PicardReport => picard_report(cfg, &params, dir),
        Experiment::Mms => mms(dir),
        Experiment::Continuity => continuity(cfg, &params, dir),
        Experiment::Smalldata => smalldata(cfg, &params, dir),
        Experiment::CompatRoundtrip => compat(cfg, dir),
        Experiment::DeltaSweep => deltas(cfg, &params, dir),
    }
}

pub fn initial_data(cfg: &RunConfig, params: &ModelParams, solver: &SolverConfig) -> Result<InitialData> {
    let grid = cfg.grid()?;
    match &cfg.initial {
        InitialSelector::Equilibrium { alpha } => InitialData::equilibrium(grid, *alpha, params.m),
        InitialSelector::ScaledBumps { theta, alpha } => scaled_bump_data(grid, *theta, *alpha, params, solver),
        InitialSelector::Snapshot { rho, u, d, g } => {
            let read = |p: &Path| snapshot::read(p).map(|(f, _)| f);
            let g = g.as_deref().map(read).transpose()?;
            InitialData::new(read(rho)?, read(u)?, read(d)?, g)
        }
        InitialSelector::Manufactured { .. } => {
            let (rho, u, d) = compat_data(cfg.grid.nodes);
            InitialData::new(rho, u, d, None)
        }
    }
}

fn write_report(dir: &Path, report: &PicardReport) -> Result<()> {
    report.write_csv(&dir.join("report.csv"))?;
    fs::write(dir.join("timing.csv"), report.timing_csv())?;
    Ok(())
}

fn solve(cfg: &RunConfig, params: &ModelParams, dir: &Path) -> Result<Trajectory> {
    let pc = cfg.picard_config()?;
    let data = initial_data(cfg, params, &pc.solver)?;
    let (traj, report) = picard_solve(&data, params, &pc)?;
    info!(
        "converged after {} sweeps, psi_sup {:e}",
        report.sweep_count(),
        report.sweeps.last().and_then(|s| s.psi_sup).unwrap_or(0.0)
    );
    write_report(dir, &report)?;
    Ok(traj)
}

fn norm_header(prefix: &str) -> String {
    NormBundle::NAMES.iter().map(|n| format!(",{prefix}{n}")).collect()
}

fn norm_row(b: &NormBundle) -> String {
    b.values().iter().map(|v| format!(",{v:e}")).collect()
}

fn simulate(cfg: &RunConfig, params: &ModelParams, dir: &Path) -> Result<()> {
    let traj = solve(cfg, params, dir)?;
    let violations = energy_decay_check(&traj, params)?;
    let mut csv = String::from("level,time,kinetic,internal,elastic,total,violation\n");
    for (l, s) in traj.states().iter().enumerate() {
        let e = energy(s, params)?;
        let v = if l == 0 { String::new() } else { format!("{:e}", violations[l - 1]) };
        let _ = writeln!(
            csv,
            "{l},{:e},{:e},{:e},{:e},{:e},{v}",
            s.time, e.kinetic, e.internal, e.elastic, e.total
        );
    }
    fs::write(dir.join("energy.csv"), csv)?;

    let series = monitor_norms(&traj)?;
    let mut csv = format!("level,time{}\n", norm_header(""));
    for (l, b) in series.levels.iter().enumerate() {
        let _ = writeln!(csv, "{l},{:e}{}", traj.state(l).time, norm_row(b));
    }
    fs::write(dir.join("norms.csv"), csv)?;

    let levels = cfg.snapshot_levels();
    if !levels.is_empty() {
        let sdir = dir.join("snapshots");
        fs::create_dir_all(&sdir)?;
        for l in levels {
            let s = traj.state(l);
            for (name, f) in [("rho", &s.rho), ("u", &s.u), ("d", &s.d)] {
                snapshot::write(&sdir.join(format!("{name}_{l:06}.txt")), f, s.time)?;
            }
        }
    }
    Ok(())
}

fn picard_report(cfg: &RunConfig, params: &ModelParams, dir: &Path) -> Result<()> {
    let traj = solve(cfg, params, dir)?;
    let mut csv = String::from("level,continuity,momentum,director\n");
    for r in nonlinear_residual(&traj, params)? {
        let _ = writeln!(csv, "{},{:e},{:e},{:e}", r.level, r.continuity, r.momentum, r.director);
    }
    fs::write(dir.join("residual.csv"), csv)?;
    Ok(())
}

fn study_rows(csv: &mut String, s: &ConvergenceStudy, gated: bool) -> bool {
    let (lo, hi) = s.refinement.window();
    let ratios = s.ratios();
    for (k, (size, err)) in s.sizes.iter().zip(&s.errors).enumerate() {
        let ratio = if k == 0 { String::new() } else { format!("{:e}", ratios[k - 1]) };
        let status = match (k, gated) {
            (0, _) => "",
            (_, false) => "info",
            _ if (lo..=hi).contains(&ratios[k - 1]) => "pass",
            _ => "fail",
        };
        let _ = writeln!(
            csv,
            "{},{},{size},{err:e},{ratio},{lo},{hi},{status}",
            s.name,
            s.refinement.as_str()
        );
    }
    !gated || s.passes()
}

fn mms(dir: &Path) -> Result<()> {
    let mut csv = String::from("study,refinement,size,error,ratio,window_lo,window_hi,status\n");
    let mut ok = true;
    for s in mms_studies()? {
        let pass = study_rows(&mut csv, &s, true);
        info!("{} ({}): ratios {:?}", s.name, s.refinement.as_str(), s.ratios());
        ok &= pass;
    }
    study_rows(&mut csv, &transport_time_unforced()?, false);
    fs::write(dir.join("mms.csv"), csv)?;
    if !ok {
        warn!("some convergence ratios fall outside their windows; see mms.csv");
    }
    Ok(())
}

fn continuity(cfg: &RunConfig, params: &ModelParams, dir: &Path) -> Result<()> {
    let pc = cfg.picard_config()?;
    let base = initial_data(cfg, params, &pc.solver)?;
    let table = continuity_experiment(&base, &cfg.experiment.scales, params, &pc)?;
    write_report(dir, &table.base_report)?;
    let mut csv = String::from("eps,psi0,psi_sup,d_h1_final,rho_l6_final\n");
    for r in &table.rows {
        let _ = writeln!(
            csv,
            "{:e},{:e},{:e},{:e},{:e}",
            r.eps, r.psi0, r.psi_sup, r.d_h1_final, r.rho_l6_final
        );
    }
    fs::write(dir.join("continuity.csv"), csv)?;
    let slope = table.slope.map(|s| format!("{s:e}")).unwrap_or_default();
    fs::write(dir.join("summary.csv"), format!("key,value\nloglog_slope,{slope}\n"))?;
    Ok(())
}

fn smalldata(cfg: &RunConfig, params: &ModelParams, dir: &Path) -> Result<()> {
    let InitialSelector::ScaledBumps { theta, alpha } = cfg.initial else {
        return Err(Error::Validation {
            key: "initial.kind".into(),
            constraint: "smalldata requires scaled-bumps initial data".into(),
        });
    };
    let pc = cfg.picard_config()?;
    let rep = smalldata_experiment(cfg.grid()?, theta, alpha, params, &pc, cfg.experiment.growth_cap)?;
    if let Some(report) = &rep.report {
        write_report(dir, report)?;
    }
    if let Some(failure) = &rep.failure {
        let report = Box::new(rep.report.clone().expect("failures carry their report"));
        warn!("small-data run {failure}");
        return Err(if failure == "diverged" {
            Error::Diverged(report)
        } else {
            Error::NotConverged(report)
        });
    }
    let mut csv = String::from("norm,initial,sup,within_cap\n");
    let (i, s) = (rep.initial.values(), rep.sup.values());
    for (k, name) in NormBundle::NAMES.iter().enumerate() {
        let _ = writeln!(csv, "{name},{:e},{:e},{}", i[k], s[k], rep.within_cap[k]);
    }
    fs::write(dir.join("smalldata.csv"), csv)?;
    let [dr, du, dd] = rep.deviation_sup;
    fs::write(
        dir.join("summary.csv"),
        format!(
            "key,value\ntheta,{theta:e}\nalpha,{alpha:e}\nfinite,{}\nbounded,{}\nrho_deviation_sup,{dr:e}\nu_deviation_sup,{du:e}\nd_deviation_sup,{dd:e}\n",
            rep.finite,
            rep.bounded()
        ),
    )?;
    if let Some(traj) = &rep.trajectory {
        let mut csv = String::from("step,violation\n");
        for (n, v) in energy_decay_check(traj, params)?.iter().enumerate() {
            let _ = writeln!(csv, "{n},{v:e}");
        }
        fs::write(dir.join("energy_violation.csv"), csv)?;
    }
    Ok(())
}

fn compat(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let rt = compat_roundtrip(&cfg.experiment.compat_nodes)?;
    let mut csv = String::from("nodes,error,constant\n");
    for k in 0..rt.nodes.len() {
        let _ = writeln!(csv, "{},{:e},{:e}", rt.nodes[k], rt.errors[k], rt.constants[k]);
    }
    fs::write(dir.join("compat.csv"), csv)?;
    fs::write(
        dir.join("summary.csv"),
        format!("key,value\nconstant_spread,{:e}\n", rt.constant_spread()),
    )?;
    Ok(())
}

fn deltas(cfg: &RunConfig, params: &ModelParams, dir: &Path) -> Result<()> {
    let pc = cfg.picard_config()?;
    let data = initial_data(cfg, params, &pc.solver)?;
    let rows = delta_sweep(&data, params, &pc, cfg.experiment.delta_count)?;
    let mut csv = format!("delta,sweeps,final_psi,min_rho{}\n", norm_header("sup_"));
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:e},{},{:e},{:e}{}",
            r.delta,
            r.sweeps,
            r.final_psi,
            r.min_rho,
            norm_row(&r.sup)
        );
    }
    fs::write(dir.join("delta_sweep.csv"), csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        let v = Error::Validation {
            key: "model.delta".into(),
            constraint: "x".into(),
        };
        assert_eq!(exit_code(&v), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Cfl { cfl: 3.0, limit: 2.0 }), EXIT_DIVERGED);
        let s = Error::Solver {
            iterations: 3,
            final_residual: 1.0,
            residual_history: vec![1.0],
        };
        assert_eq!(exit_code(&s), EXIT_NOT_CONVERGED);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        let rec = failure_record(&s);
        assert_eq!(rec["kind"], "linear-solver");
        assert_eq!(rec["detail"]["residual_history"][0], 1.0);
    }

    #[test]
    fn cli_out_takes_precedence() {
        let mut cfg = RunConfig::default();
        cfg.output.dir = Some(PathBuf::from("cfg-dir"));
        assert_eq!(resolve_output_dir(&cfg, Some(Path::new("cli"))), PathBuf::from("cli"));
        assert_eq!(resolve_output_dir(&cfg, None), PathBuf::from("cfg-dir"));
    }
}
