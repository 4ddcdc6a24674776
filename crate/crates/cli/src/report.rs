use std::collections::BTreeMap;
use std::io::Write;

use distobs::engine::{
    default_fit_window, estimate_rate, stacked, terminal, verify_salpha_hurwitz, AgentSeries, ScenarioAnalysis,
    Scenario, SimulationTrace,
};
use distobs::observers::{GainReport, ObserverCosts, ObserverKind};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct GainCheckOut {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainReportOut {
    pub checks: Vec<GainCheckOut>,
    pub marginal_leader_relaxation: bool,
}

impl From<&GainReport> for GainReportOut {
    fn from(r: &GainReport) -> Self {
        Self {
            checks: r
                .checks
                .iter()
                .map(|c| GainCheckOut {
                    name: c.name,
                    value: c.value,
                    threshold: c.threshold,
                    pass: c.pass,
                    note: c.note.clone(),
                })
                .collect(),
            marginal_leader_relaxation: r.marginal_leader_relaxation,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateOut {
    pub rate: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct ObserverSummary {
    /// Per-agent error norms at the last sample.
    pub terminal: BTreeMap<&'static str, Vec<f64>>,
    /// Decay rate of the stacked error over the default fit window; `null`
    /// when the window holds too few samples.
    pub rates: BTreeMap<&'static str, Option<RateOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub riccati_solves: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cold_solves: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub observer: &'static str,
    pub followers: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub samples: usize,
    pub minimal_polynomial: String,
    pub alpha0: Vec<f64>,
    pub delta_h: f64,
    pub delta_bar_s0: f64,
    pub gain_report: Option<GainReportOut>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_based: Option<ObserverSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_based: Option<ObserverSummary>,
}

fn selection_label(cfg: &ScenarioConfig) -> &'static str {
    use crate::config::ObserverKindConfig as K;
    match cfg.observer.kind {
        K::StateBased => "state_based",
        K::OutputBased => "output_based",
        K::Both => "both",
    }
}

fn summarize(times: &[f64], t_final: f64, series: &[(&'static str, &AgentSeries)]) -> ObserverSummary {
    let window = default_fit_window(t_final);
    ObserverSummary {
        terminal: series.iter().map(|(name, s)| (*name, terminal(s))).collect(),
        rates: series
            .iter()
            .map(|(name, s)| {
                let fit = estimate_rate(times, &stacked(s), window).ok().map(|r| RateOut {
                    rate: r.rate,
                    r_squared: r.r_squared,
                    window: [r.window.0, r.window.1],
                });
                (*name, fit)
            })
            .collect(),
        riccati_solves: None,
        cold_solves: None,
    }
}

fn output_columns(trace: &SimulationTrace) -> Vec<(&'static str, &AgentSeries)> {
    trace.output.as_ref().map_or_else(Vec::new, |o| {
        vec![
            ("err_y", &o.err_y),
            ("err_alpha", &o.err_alpha),
            ("err_zeta", &o.err_zeta),
            ("err_P", &o.err_p),
            ("err_S", &o.err_s),
        ]
    })
}

fn state_columns(trace: &SimulationTrace) -> Vec<(&'static str, &AgentSeries)> {
    trace.state.as_ref().map_or_else(Vec::new, |s| {
        vec![("err_y", &s.err_y), ("err_S", &s.err_s), ("err_C", &s.err_c), ("err_v", &s.err_v)]
    })
}

impl Summary {
    pub fn new(cfg: &ScenarioConfig, scn: &Scenario, info: &ScenarioAnalysis, trace: &SimulationTrace) -> Self {
        let output_based = trace.output.as_ref().map(|o| ObserverSummary {
            riccati_solves: Some(o.riccati_solves.clone()),
            cold_solves: Some(o.cold_solves.clone()),
            ..summarize(&trace.times, scn.t_final, &output_columns(trace))
        });
        let state_based = trace
            .state
            .as_ref()
            .map(|_| summarize(&trace.times, scn.t_final, &state_columns(trace)));
        Self {
            observer: selection_label(cfg),
            followers: scn.graph.n_followers(),
            seed: cfg.sim.seed,
            dt: scn.dt,
            t_final: scn.t_final,
            stride: scn.record_stride,
            samples: trace.times.len(),
            minimal_polynomial: format!("{:.9}", info.lift.polynomial()),
            alpha0: info.lift.alpha0.iter().copied().collect(),
            delta_h: info.network.delta_h,
            delta_bar_s0: info.delta_bar_s0,
            gain_report: info.gain_report.as_ref().map(GainReportOut::from),
            warnings: trace.warnings.clone(),
            output_based,
            state_based,
        }
    }
}

/// Column names: `t`, then agent-major blocks. When both observers run, the
/// state-based block follows with an `sb_` prefix.
pub fn header(trace: &SimulationTrace) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let out = output_columns(trace);
    let st = state_columns(trace);
    let prefix = if out.is_empty() { "" } else { "sb_" };
    let agents = out.first().or(st.first()).map_or(0, |(_, s)| s.len());
    for i in 1..=agents {
        cols.extend(out.iter().map(|(name, _)| format!("{name}_{i}")));
    }
    for i in 1..=agents {
        cols.extend(st.iter().map(|(name, _)| format!("{prefix}{name}_{i}")));
    }
    cols
}

pub fn write_trace<W: Write>(w: W, trace: &SimulationTrace) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header(trace))?;
    let out = output_columns(trace);
    let st = state_columns(trace);
    let agents = out.first().or(st.first()).map_or(0, |(_, s)| s.len());
    for (k, t) in trace.times.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for block in [&out, &st] {
            for i in 0..agents {
                row.extend(block.iter().map(|(_, s)| s[i][k].to_string()));
            }
        }
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| CliError::Io {
        context: "writing trace.csv".into(),
        source: e,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub observer: &'static str,
    pub dimension: usize,
    pub payload: usize,
    pub terminal_err_y: Vec<f64>,
    pub max_terminal_err_y: f64,
    pub riccati_solves: usize,
    pub wall_time_s: f64,
}

impl ComparisonRow {
    pub fn new(kind: ObserverKind, costs: ObserverCosts, trace: &SimulationTrace, wall_time_s: f64) -> Self {
        let (err_y, riccati_solves) = match kind {
            ObserverKind::OutputBased => {
                let o = trace.output.as_ref().expect("output-based run");
                (terminal(&o.err_y), o.riccati_solves.iter().sum())
            }
            ObserverKind::StateBased => (terminal(&trace.state.as_ref().expect("state-based run").err_y), 0),
        };
        Self {
            observer: kind.label(),
            dimension: costs.dimension,
            payload: costs.payload,
            max_terminal_err_y: err_y.iter().copied().fold(0.0, f64::max),
            terminal_err_y: err_y,
            riccati_solves,
            wall_time_s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub q: usize,
    pub p: usize,
    pub n: usize,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, kind: ObserverKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.observer == kind.label())
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<28}", format!("(q, p, n) = ({}, {}, {})", self.q, self.p, self.n));
        for r in &self.rows {
            s += &format!("{:>14}", r.observer);
        }
        s.push('\n');
        let mut line = |label: &str, cell: &dyn Fn(&ComparisonRow) -> String| {
            s += &format!("{label:<28}");
            for r in &self.rows {
                s += &format!("{:>14}", cell(r));
            }
            s.push('\n');
        };
        line("observer dimension", &|r| r.dimension.to_string());
        line("information exchange", &|r| r.payload.to_string());
        line("max terminal |y~|", &|r| format!("{:.3e}", r.max_terminal_err_y));
        line("Riccati solves", &|r| r.riccati_solves.to_string());
        line("wall time [s]", &|r| format!("{:.2}", r.wall_time_s));
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SAlphaOut {
    /// `[re, im]` pairs, sorted by real part.
    pub spectrum: Vec<[f64; 2]>,
    pub delta_bar: f64,
    pub hurwitz: bool,
    pub p0_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub q: usize,
    pub p: usize,
    pub followers: usize,
    pub minimal_polynomial: String,
    pub degree: usize,
    pub alpha0: Vec<f64>,
    pub spanning_tree: bool,
    pub delta_h: f64,
    pub delta_bar_s0: f64,
    /// Omitted without a spanning tree: the thresholds are meaningless there.
    pub gain_report: Option<GainReportOut>,
    pub s_alpha: Option<SAlphaOut>,
}

impl AnalysisReport {
    pub fn new(scn: &Scenario, info: &ScenarioAnalysis) -> Self {
        let s_alpha = info
            .spanning_tree
            .then(|| verify_salpha_hurwitz(&info.lift, &info.network.h, scn.gains.mu_zeta).ok())
            .flatten()
            .map(|r| SAlphaOut {
                spectrum: r.spectrum.eigenvalues().iter().map(|z| [z.re, z.im]).collect(),
                delta_bar: r.delta_bar,
                hurwitz: r.hurwitz,
                p0_residual: r.p0_residual,
            });
        Self {
            q: scn.leader.q(),
            p: scn.leader.p(),
            followers: scn.graph.n_followers(),
            minimal_polynomial: format!("{:.9}", info.lift.polynomial()),
            degree: info.lift.n(),
            alpha0: info.lift.alpha0.iter().copied().collect(),
            spanning_tree: info.spanning_tree,
            delta_h: info.network.delta_h,
            delta_bar_s0: info.delta_bar_s0,
            gain_report: info.gain_report.as_ref().map(GainReportOut::from),
            s_alpha,
        }
    }

    /// `true` when the compensator error dynamics are Hurwitz.
    pub fn s_alpha_hurwitz(&self) -> bool {
        self.s_alpha.as_ref().is_some_and(|s| s.hurwitz)
    }
}
