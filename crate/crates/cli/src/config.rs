//! Scenario files.
//!
//! ```toml
//! [leader]
//! S0 = [[0.0, 1.0], [-1.0, 0.0]]
//! C0 = [[1.0, 0.0]]
//! v0 = [1.0, 0.0]
//!
//! [graph]
//! edges = [[0, 1], [1, 2, 0.5]]   # [from, to, weight?]; node 0 is the leader
//!
//! [gains]
//! mu_alpha = 10.0
//! mu_zeta = 200.0
//!
//! [sim]
//! dt = 1e-3
//! t_final = 5.0
//! seed = 1
//! init_range = [-1.0, 1.0]
//!
//! [observer]
//! kind = "output_based"
//! ```

use std::fmt;
use std::path::Path;

use distobs::engine::{InitSpec, ObserverSelection, Scenario};
use distobs::graph::Digraph;
use distobs::leader::LeaderSystem;
use distobs::numerics::DEFAULT_RANK_TOL;
use distobs::observers::Gains;
use distobs::riccati::DEFAULT_RECOMPUTE_TOL;
use distobs::{Matrix, Vector};
use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub leader: LeaderConfig,
    pub graph: GraphConfig,
    pub gains: GainsConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub observer: ObserverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderConfig {
    /// Row-major.
    #[serde(rename = "S0", deserialize_with = "rectangular")]
    pub s0: Vec<Vec<f64>>,
    #[serde(rename = "C0", deserialize_with = "rectangular")]
    pub c0: Vec<Vec<f64>>,
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Defaults to the largest node index in `edges`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followers: Option<usize>,
    pub edges: Vec<Edge>,
}

/// `[from, to]` or `[from, to, weight]`; a missing weight means 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub mu_alpha: f64,
    pub mu_zeta: f64,
    /// The state-based gains fall back to `mu_alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub init_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recompute_tol: Option<f64>,
    /// Keep every `stride`-th integration step in the trace.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub kind: ObserverKindConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverKindConfig {
    StateBased,
    #[default]
    OutputBased,
    Both,
}

impl From<ObserverKindConfig> for ObserverSelection {
    fn from(k: ObserverKindConfig) -> Self {
        match k {
            ObserverKindConfig::StateBased => ObserverSelection::StateBased,
            ObserverKindConfig::OutputBased => ObserverSelection::OutputBased,
            ObserverKindConfig::Both => ObserverSelection::Both,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub stride: Option<usize>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        // semantic checks do not carry spans; point at the section header instead
        cfg.to_scenario().map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(locate(text, &msg)),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            context: format!("reading {}", path.display()),
            source: e,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.sim.seed = s;
        }
        if let Some(dt) = o.dt {
            self.sim.dt = dt;
        }
        if let Some(t) = o.t_final {
            self.sim.t_final = t;
        }
        if let Some(k) = o.stride {
            self.sim.stride = Some(k);
        }
    }

    pub fn followers(&self) -> usize {
        self.graph
            .followers
            .unwrap_or_else(|| self.graph.edges.iter().map(|e| e.from.max(e.to)).max().unwrap_or(0))
    }

    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let leader = self.leader.build().map_err(|e| config_in("leader", e))?;
        let edges: Vec<(usize, usize, f64)> =
            self.graph.edges.iter().map(|e| (e.from, e.to, e.weight.unwrap_or(1.0))).collect();
        let graph = Digraph::from_edges(self.followers(), &edges).map_err(|e| config_in("graph", e))?;
        let g = &self.gains;
        let gains = Gains {
            mu_s: g.mu_s.unwrap_or(g.mu_alpha),
            mu_c: g.mu_c.unwrap_or(g.mu_alpha),
            mu_v: g.mu_v.unwrap_or(g.mu_alpha),
            mu_alpha: g.mu_alpha,
            mu_zeta: g.mu_zeta,
        };
        gains.validate().map_err(|e| config_in("gains", e))?;
        let [low, high] = self.sim.init_range;
        let scn = Scenario {
            leader,
            graph,
            gains,
            observers: self.observer.kind.into(),
            init: InitSpec::Uniform {
                low,
                high,
                seed: self.sim.seed,
            },
            dt: self.sim.dt,
            t_final: self.sim.t_final,
            recompute_tol: self.sim.recompute_tol.unwrap_or(DEFAULT_RECOMPUTE_TOL),
            record_stride: self.sim.stride.unwrap_or(1),
            rank_tol: DEFAULT_RANK_TOL,
        };
        scn.validate().map_err(|e| config_in("sim", e))?;
        Ok(scn)
    }
}

impl LeaderConfig {
    fn build(&self) -> distobs::Result<LeaderSystem> {
        LeaderSystem::new(
            matrix(&self.s0),
            matrix(&self.c0),
            Vector::from_column_slice(&self.v0),
        )
    }
}

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    let ncols = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

fn config_in(section: &str, e: distobs::Error) -> CliError {
    CliError::Config(format!("[{section}] {e}"))
}

/// Prefixes a `[section] ...` message with the line of that section header.
fn locate(text: &str, msg: &str) -> String {
    let section = msg.strip_prefix('[').and_then(|m| m.split_once(']')).map(|(s, _)| s);
    let line = section.and_then(|s| {
        let header = format!("[{s}]");
        text.lines().position(|l| l.trim() == header)
    });
    match line {
        Some(k) => format!("line {}: {msg}", k + 1),
        None => msg.to_string(),
    }
}

fn rectangular<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    if rows.is_empty() || rows[0].is_empty() {
        return Err(de::Error::custom("matrix must have at least one row and one column"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != rows[0].len()) {
        return Err(de::Error::custom(format!(
            "row {i} has {} entries, row 0 has {}",
            r.len(),
            rows[0].len()
        )));
    }
    Ok(rows)
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2 + self.weight.is_some() as usize))?;
        seq.serialize_element(&self.from)?;
        seq.serialize_element(&self.to)?;
        if let Some(w) = self.weight {
            seq.serialize_element(&w)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EdgeVisitor;

        impl<'de> Visitor<'de> for EdgeVisitor {
            type Value = Edge;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an edge [from, to] or [from, to, weight]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Edge, A::Error> {
                let from = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let to = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let weight = seq.next_element::<f64>()?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                Ok(Edge { from, to, weight })
            }
        }

        d.deserialize_seq(EdgeVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[leader]
S0 = [[0.0, 1.0], [-1.0, 0.0]]
C0 = [[1.0, 0.0]]
v0 = [1.0, 0.0]

[graph]
edges = [[0, 1], [1, 2, 0.5]]

[gains]
mu_alpha = 3.0
mu_zeta = 20.0
mu_v = 4.0

[sim]
dt = 1e-3
t_final = 1.0
seed = 7
init_range = [-1.0, 1.0]
"#;

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = ScenarioConfig::from_toml(SMALL).unwrap();
        let text = cfg.to_toml();
        let again = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(text, again.to_toml());
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_toml(SMALL).unwrap();
        let scn = cfg.to_scenario().unwrap();
        assert_eq!(cfg.followers(), 2);
        assert_eq!(scn.gains.mu_s, 3.0);
        assert_eq!(scn.gains.mu_v, 4.0);
        assert_eq!(scn.graph.weight(2, 1), 0.5);
        assert_eq!(scn.observers, ObserverSelection::OutputBased);
        assert_eq!(scn.record_stride, 1);
    }

    #[test]
    fn unknown_key_is_rejected_with_a_line() {
        let bad = SMALL.replace("seed = 7", "seed = 7\nsede = 8");
        let msg = ScenarioConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 19"), "{msg}");
        assert!(msg.contains("sede"), "{msg}");
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let bad = SMALL.replace("C0 = [[1.0, 0.0]]", "C0 = [[1.0, 0.0], [1.0]]");
        let msg = ScenarioConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 4") && msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_section() {
        let bad = SMALL.replace("v0 = [1.0, 0.0]", "v0 = [1.0]");
        let msg = ScenarioConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 2: [leader]"), "{msg}");

        let bad = SMALL.replace("mu_zeta = 20.0", "mu_zeta = -1.0");
        assert!(ScenarioConfig::from_toml(&bad).unwrap_err().to_string().contains("[gains]"));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ScenarioConfig::from_toml(SMALL).unwrap();
        cfg.apply(&Overrides {
            seed: Some(9),
            stride: Some(10),
            ..Default::default()
        });
        assert_eq!(cfg.sim.seed, 9);
        assert_eq!(cfg.sim.stride, Some(10));
        assert_eq!(cfg.sim.dt, 1e-3);
    }
}
