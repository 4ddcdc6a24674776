//! Scenario files in, traces and reports out.
//!
//! The `distobs` binary is a thin wrapper around [`simulate`], [`compare`] and
//! [`analyze`]; errors map to stable exit codes through
//! [`CliError::exit_code`].

pub mod config;
pub mod report;

use std::fs;
use std::path::Path;
use std::time::Instant;

use distobs::engine::{self, integrate, ObserverSelection, Scenario, SimulationTrace};
use distobs::observers::{observer_costs, ObserverKind};

pub use config::{Overrides, ScenarioConfig};
pub use report::{AnalysisReport, ComparisonReport, Summary};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_ASSUMPTION: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] distobs::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("writing trace.csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use distobs::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Run(E::Assumption(_)) => EXIT_ASSUMPTION,
            // a Riccati failure mid-run means the coefficient estimates blew up
            CliError::Run(E::Divergence { .. } | E::AgentRiccati { .. }) => EXIT_DIVERGENCE,
            CliError::Run(E::InvalidArgument(_) | E::Dimension { .. }) => EXIT_CONFIG,
            _ => EXIT_INTERNAL,
        }
    }
}

fn io_err(context: String) -> impl FnOnce(std::io::Error) -> CliError {
    move |source| CliError::Io { context, source }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(format!("writing {}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))
}

/// Runs the configured observers; writes `trace.csv` and `summary.json`.
pub fn simulate(cfg: &ScenarioConfig, out_dir: &Path) -> Result<Summary, CliError> {
    let scn = cfg.to_scenario()?;
    let info = engine::analyze(&scn)?;
    let trace = integrate(&scn)?;
    ensure_dir(out_dir)?;
    let path = out_dir.join("trace.csv");
    let file = fs::File::create(&path).map_err(io_err(format!("writing {}", path.display())))?;
    report::write_trace(file, &trace)?;
    let summary = Summary::new(cfg, &scn, &info, &trace);
    write_file(out_dir, "summary.json", &to_json(&summary))?;
    Ok(summary)
}

/// Runs both observers on the same scenario and seed, one after the other so
/// each gets its own wall time. Writes `compare.json` and `compare.txt`.
pub fn compare(cfg: &ScenarioConfig, out_dir: &Path) -> Result<ComparisonReport, CliError> {
    let base = cfg.to_scenario()?;
    let (q, p) = (base.leader.q(), base.leader.p());
    let n = engine::analyze(&base)?.lift.n();
    let mut rows = Vec::new();
    for (sel, kind) in [
        (ObserverSelection::StateBased, ObserverKind::StateBased),
        (ObserverSelection::OutputBased, ObserverKind::OutputBased),
    ] {
        let scn = Scenario {
            observers: sel,
            ..base.clone()
        };
        let start = Instant::now();
        let trace = integrate(&scn)?;
        let wall = start.elapsed().as_secs_f64();
        rows.push(report::ComparisonRow::new(kind, observer_costs(kind, q, p, n), &trace, wall));
    }
    let report = ComparisonReport { q, p, n, rows };
    ensure_dir(out_dir)?;
    write_file(out_dir, "compare.json", &to_json(&report))?;
    write_file(out_dir, "compare.txt", &report.table())?;
    Ok(report)
}

/// Static checks only; no time integration.
pub fn analyze(cfg: &ScenarioConfig) -> Result<AnalysisReport, CliError> {
    let scn = cfg.to_scenario()?;
    let info = engine::analyze(&scn)?;
    Ok(AnalysisReport::new(&scn, &info))
}

pub fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// `trace.csv` header for a run.
pub fn trace_header(trace: &SimulationTrace) -> Vec<String> {
    report::header(trace)
}
