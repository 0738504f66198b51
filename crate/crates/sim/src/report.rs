//! Report serialization: the per-drop CSV table and the JSON manifest
//! echoing the resolved scenario, seed and crate versions.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::runner::RunReport;
use crate::spec::{ConfigFile, ScenarioSpec};
use crate::SimError;

pub const CSV_HEADER: &str = "scenario_id,drop,speed_kmh,td_ms,sample_snr_db,pilot_snr_db,n_s,l_order,nmse_db,nmse_stale_db,se,se_stale,bound_check";

fn fmt_opt_db(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "inf".to_string(),
    }
}

/// Renders one run as CSV rows under the fixed header. The bound-check
/// column carries the run-level outcome (expectations are estimated
/// across drops); failed drops read `error`.
pub fn to_csv(report: &RunReport, spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    append_csv_rows(&mut out, report, spec);
    out
}

pub fn append_csv_rows(out: &mut String, report: &RunReport, spec: &ScenarioSpec) {
    let td_ms = spec.cfg.t_d() * 1e3;
    for r in &report.records {
        let bound = match &r.error {
            Some(_) => "error",
            None => report.bound_outcome.as_str(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            report.scenario_id,
            r.drop_idx,
            spec.clusters.speed_kmh,
            td_ms,
            fmt_opt_db(spec.sample_snr_db),
            fmt_opt_db(spec.pilot_snr_db),
            r.n_s_used,
            spec.l_order,
            chanpred_core::metrics::nmse_db_from_linear(r.nmse_lin),
            chanpred_core::metrics::nmse_db_from_linear(r.nmse_stale_lin),
            r.se,
            r.se_stale,
            bound,
        );
    }
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    scenario_id: &'a str,
    seed: u64,
    drops: usize,
    failed_drops: usize,
    flagged: bool,
    aggregate_nmse_db: f64,
    aggregate_nmse_stale_db: f64,
    mean_se: f64,
    mean_se_stale: f64,
    bound_check: &'a str,
    feedback_scalars_per_coherence: Option<f64>,
    feedback_bits: Option<u64>,
    wall_clock_s: f64,
    spec: &'a ConfigFile,
}

#[derive(Serialize)]
struct Manifest<'a> {
    versions: Versions,
    seed: u64,
    scenarios: Vec<ManifestEntry<'a>>,
}

#[derive(Serialize)]
struct Versions {
    core: &'static str,
    sim: &'static str,
}

/// Serializes the manifest for a set of completed runs.
pub fn manifest_json(runs: &[(ScenarioSpec, RunReport)]) -> Result<String, SimError> {
    let scenarios: Vec<ManifestEntry<'_>> = runs
        .iter()
        .map(|(spec, report)| ManifestEntry {
            scenario_id: &report.scenario_id,
            seed: spec.seed,
            drops: report.records.len(),
            failed_drops: report.failed_drops,
            flagged: report.flagged,
            aggregate_nmse_db: report.aggregate_nmse_db,
            aggregate_nmse_stale_db: report.aggregate_nmse_stale_db,
            mean_se: report.mean_se,
            mean_se_stale: report.mean_se_stale,
            bound_check: report.bound_outcome.as_str(),
            feedback_scalars_per_coherence: report.overhead.map(|o| o.scalars_per_coherence),
            feedback_bits: report.overhead.and_then(|o| o.bits),
            wall_clock_s: report.wall_clock_s,
            spec: &spec.resolved,
        })
        .collect();
    let manifest = Manifest {
        versions: Versions {
            core: chanpred_core::VERSION,
            sim: env!("CARGO_PKG_VERSION"),
        },
        seed: runs.first().map(|(s, _)| s.seed).unwrap_or(0),
        scenarios,
    };
    serde_json::to_string_pretty(&manifest).map_err(|e| SimError::Io(e.to_string()))
}

/// Writes `report.csv` and `manifest.json` into the output directory.
pub fn write_outputs(dir: &Path, runs: &[(ScenarioSpec, RunReport)]) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::Io(e.to_string()))?;
    let mut csv = String::new();
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for (spec, report) in runs {
        append_csv_rows(&mut csv, report, spec);
    }
    fs::write(dir.join("report.csv"), csv).map_err(|e| SimError::Io(e.to_string()))?;
    let manifest = manifest_json(runs)?;
    fs::write(dir.join("manifest.json"), manifest).map_err(|e| SimError::Io(e.to_string()))?;
    Ok(())
}
