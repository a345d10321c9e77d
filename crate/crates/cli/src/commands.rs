use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cuk_pllf_core::{
    build_subsystems, compute_metrics, default_steady_window, equilibrium, paper_certificates,
    run_simulation, verify_certificate, CertificateReport, Metrics,
};

use crate::error::CliError;
use crate::output::{self, Window};
use crate::scenario::Scenario;

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Restricts CSV rows; metrics always cover the whole run.
    pub window: Option<Window>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub metrics: Metrics,
    pub certificates: Vec<CertificateReport>,
    pub events: usize,
    pub samples: usize,
}

fn core_err(e: cuk_pllf_core::Error) -> CliError {
    match e {
        cuk_pllf_core::Error::InvalidArgument { .. } => CliError::config("scenario", e),
        _ => CliError::Simulation(e),
    }
}

pub fn certificate_reports(scenario: &Scenario) -> Result<Vec<CertificateReport>, CliError> {
    let (on, off) = build_subsystems(&scenario.params, &scenario.op).map_err(core_err)?;
    let pairs = paper_certificates(&scenario.polytope).map_err(core_err)?;
    Ok(pairs
        .iter()
        .map(|pair| verify_certificate(pair, &on, &off))
        .collect())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Simulates `scenario` and writes `trace.csv`, `events.csv`,
/// `certificates.json` and `metrics.json` into `opts.out_dir`.
///
/// Trace files are written before metrics are evaluated, so a run without
/// enough steady-state cycles still leaves its trace behind.
pub fn run_command(scenario: &Scenario, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let dir = &opts.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let certificates = certificate_reports(scenario)?;
    let run = run_simulation(
        &scenario.params,
        &scenario.op,
        &scenario.polytope,
        &scenario.sim,
    )
    .map_err(core_err)?;

    let trace_path = dir.join("trace.csv");
    output::write_trace(create(&trace_path)?, &run.trace, opts.window)
        .map_err(|e| CliError::io(&trace_path, e))?;
    let events_path = dir.join("events.csv");
    output::write_events(create(&events_path)?, &run.events, opts.window)
        .map_err(|e| CliError::io(&events_path, e))?;
    write_text(
        &dir.join("certificates.json"),
        &output::certificates_json(&certificates),
    )?;

    let equil = equilibrium(&scenario.params, &scenario.op).map_err(core_err)?;
    let window = default_steady_window(&run).map_err(CliError::Simulation)?;
    let metrics = compute_metrics(&run, &equil, window).map_err(CliError::Simulation)?;
    write_text(&dir.join("metrics.json"), &output::metrics_json(&metrics))?;

    Ok(RunSummary {
        metrics,
        certificates,
        events: run.events.len(),
        samples: run.trace.len(),
    })
}

/// Prints one JSON report per controlled index and returns whether all pass.
pub fn certify_command<W: Write>(scenario: &Scenario, mut out: W) -> Result<bool, CliError> {
    let reports = certificate_reports(scenario)?;
    for r in &reports {
        let line = serde_json::to_string(r).expect("report serializes");
        writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))?;
    }
    Ok(reports.iter().all(|r| r.pass))
}
