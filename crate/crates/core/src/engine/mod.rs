//! Fixed-step simulation of leader + followers, error extraction against the
//! exact leader trajectory, decay-rate fitting and spectral checks.
//!
//! Both observer families are integrated with classical RK4 on a flat state
//! vector `[v₀ | agent 1 | agent 2 | …]`. The leader is integrated alongside
//! the followers (they consume its integrated output), while every recorded
//! error is measured against `expm(S₀ t) v₀(0)` so that leader discretization
//! never leaks into the error series.
//!
//! Right-hand sides are evaluated agent by agent in index order from a
//! snapshot of the stage state, so a given [`Scenario`] always produces a
//! bitwise-identical [`SimulationTrace`].

mod analysis;
mod rate;
mod rk4;

pub use analysis::{phi_matrix, s_alpha_matrix, verify_phi_hurwitz, verify_salpha_hurwitz, PhiReport, SAlphaReport};
pub use rate::{estimate_rate, RateEstimate, LOG_FLOOR, MIN_FIT_SAMPLES};
pub use rk4::Rk4;

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{build_network_matrices, has_spanning_tree, reference_graph, Digraph, NetworkMatrices};
use crate::leader::{canonical_lift, leader_trajectory, CanonicalLift, LeaderSystem};
use crate::numerics::{kron, real_part_bounds, spectrum, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::observers::{
    alpha_agent_derivative, check_gain_conditions, state_agent_derivative, zeta_agent_derivative, Gains,
    GainReport, ObserverKind, OutputPayload, StateAgent, StateDerivative, StatePayload,
};
use crate::riccati::{solve_care, CareProblem, GainCache, DEFAULT_RECOMPUTE_TOL};

/// Any state component above this magnitude aborts the run.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;
/// RK4's stability interval on the negative real axis is about `[-2.78, 0]`.
pub const RK4_STABILITY_LIMIT: f64 = 2.78;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverSelection {
    StateBased,
    OutputBased,
    Both,
}

impl ObserverSelection {
    pub fn kinds(self) -> &'static [ObserverKind] {
        match self {
            ObserverSelection::StateBased => &[ObserverKind::StateBased],
            ObserverSelection::OutputBased => &[ObserverKind::OutputBased],
            ObserverSelection::Both => &[ObserverKind::OutputBased, ObserverKind::StateBased],
        }
    }
}

/// Initial follower states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Every entry drawn uniformly from `[low, high]` with a seeded ChaCha8 stream.
    Uniform { low: f64, high: f64, seed: u64 },
    /// Followers start exactly on the leader's values.
    AtLeader,
    /// Per-agent `(α, ζ)` for the output-based observer and `(S, C, v)` for the
    /// state-based one. A list may be empty if that observer is not run.
    Explicit {
        output: Vec<(Vector, Vector)>,
        state: Vec<StateAgent>,
    },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub leader: LeaderSystem,
    pub graph: Digraph,
    pub gains: Gains,
    pub observers: ObserverSelection,
    pub init: InitSpec,
    pub dt: f64,
    pub t_final: f64,
    pub recompute_tol: f64,
    /// Record every `record_stride`-th step (the final step is always kept).
    pub record_stride: usize,
    pub rank_tol: f64,
}

impl Scenario {
    /// Reference leader and topology, `μ_α = 10`, `μ_ζ = 200`, initial values
    /// from `[-1, 1]`, `dt = 1e-4`, `t_final = 20`.
    pub fn reference(seed: u64) -> Self {
        Self {
            leader: LeaderSystem::reference(),
            graph: reference_graph(),
            gains: Gains::output_based(10.0, 200.0),
            observers: ObserverSelection::OutputBased,
            init: InitSpec::Uniform {
                low: -1.0,
                high: 1.0,
                seed,
            },
            dt: 1e-4,
            t_final: 20.0,
            recompute_tol: DEFAULT_RECOMPUTE_TOL,
            record_stride: 1,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "t_final must be at least dt, got {}",
                self.t_final
            )));
        }
        if !(self.recompute_tol >= 0.0) {
            return Err(Error::InvalidArgument("recompute_tol must be >= 0".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidArgument("record_stride must be >= 1".into()));
        }
        if let InitSpec::Uniform { low, high, .. } = self.init {
            if !(low <= high) || !low.is_finite() || !high.is_finite() {
                return Err(Error::InvalidArgument(format!("init range [{low}, {high}] is not ordered")));
            }
        }
        self.gains.validate()
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Per-agent error series; `series[i][k]` is agent `i + 1` at sample `k`.
pub type AgentSeries = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrace {
    pub err_y: AgentSeries,
    pub err_alpha: AgentSeries,
    pub err_zeta: AgentSeries,
    pub err_p: AgentSeries,
    pub err_s: AgentSeries,
    pub riccati_solves: Vec<usize>,
    pub cold_solves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrace {
    pub err_y: AgentSeries,
    pub err_s: AgentSeries,
    pub err_c: AgentSeries,
    pub err_v: AgentSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub output: Option<OutputTrace>,
    pub state: Option<StateTrace>,
    pub warnings: Vec<String>,
}

/// `sqrt(Σᵢ series[i][k]²)`: the norm of the stacked error over all agents.
pub fn stacked(series: &AgentSeries) -> Vec<f64> {
    let len = series.first().map_or(0, Vec::len);
    (0..len)
        .map(|k| series.iter().map(|s| s[k] * s[k]).sum::<f64>().sqrt())
        .collect()
}

/// Last sample of each agent's series.
pub fn terminal(series: &AgentSeries) -> Vec<f64> {
    series.iter().map(|s| *s.last().unwrap_or(&f64::NAN)).collect()
}

/// Default fit window `[0.2 t_final, 0.6 t_final]`.
pub fn default_fit_window(t_final: f64) -> (f64, f64) {
    (0.2 * t_final, 0.6 * t_final)
}

/// Static quantities shared by setup, analysis and simulation.
#[derive(Debug, Clone)]
pub struct ScenarioAnalysis {
    pub lift: CanonicalLift,
    pub network: NetworkMatrices,
    pub spanning_tree: bool,
    pub delta_bar_s0: f64,
    pub gain_report: Option<GainReport>,
}

pub fn analyze(scn: &Scenario) -> Result<ScenarioAnalysis> {
    let lift = canonical_lift(&scn.leader, scn.rank_tol)?;
    let network = build_network_matrices(&scn.graph)?;
    let spanning_tree = has_spanning_tree(&scn.graph);
    let (delta_bar_s0, _) = real_part_bounds(scn.leader.s0())?;
    let gain_report = if spanning_tree {
        Some(check_gain_conditions(&scn.gains, delta_bar_s0, network.delta_h)?)
    } else {
        None
    };
    Ok(ScenarioAnalysis {
        lift,
        network,
        spanning_tree,
        delta_bar_s0,
        gain_report,
    })
}

/// Integrates only the leader with RK4 and returns `v₀(t_final)`.
pub fn integrate_leader(sys: &LeaderSystem, dt: f64, t_final: f64) -> Result<Vector> {
    let q = sys.q();
    let s0 = sys.s0().clone();
    let mut y = sys.v0_init().as_slice().to_vec();
    let mut rk = Rk4::new(q);
    let mut rhs = |_t: f64, x: &[f64], d: &mut [f64]| {
        let dv = &s0 * Vector::from_column_slice(x);
        d.copy_from_slice(dv.as_slice());
        Ok(())
    };
    let steps = (t_final / dt).round() as usize;
    for k in 0..steps {
        rk.step(&mut rhs, k as f64 * dt, &mut y, dt)?;
    }
    Ok(Vector::from_vec(y))
}

/// Runs every observer selected in the scenario.
///
/// Gain conditions that fail produce warnings rather than errors; only a
/// graph without a leader-rooted spanning tree is rejected up front.
pub fn integrate(scn: &Scenario) -> Result<SimulationTrace> {
    scn.validate()?;
    let info = analyze(scn)?;
    if !info.spanning_tree {
        return Err(Error::Assumption(
            "communication graph has no spanning tree rooted at the leader".into(),
        ));
    }
    let mut warnings = info.gain_report.as_ref().map(GainReport::warnings).unwrap_or_default();

    let steps = scn.steps();
    let times: Vec<f64> = (0..=steps)
        .filter(|&k| k % scn.record_stride == 0 || k == steps)
        .map(|k| k as f64 * scn.dt)
        .collect();

    let mut trace = SimulationTrace {
        times,
        output: None,
        state: None,
        warnings: Vec::new(),
    };
    for &kind in scn.observers.kinds() {
        let rho = stiffness_radius(scn, &info, kind)?;
        if scn.dt * rho > RK4_STABILITY_LIMIT {
            warnings.push(format!(
                "{}: dt = {} times spectral radius {:.1} exceeds the RK4 stability limit {}",
                kind.label(),
                scn.dt,
                rho,
                RK4_STABILITY_LIMIT
            ));
        }
        match kind {
            ObserverKind::OutputBased => trace.output = Some(run_output(scn, &info)?),
            ObserverKind::StateBased => trace.state = Some(run_state(scn)?),
        }
    }
    trace.warnings = warnings;
    Ok(trace)
}

/// Spectral radius of the linearized error dynamics around the leader.
fn stiffness_radius(scn: &Scenario, info: &ScenarioAnalysis, kind: ObserverKind) -> Result<f64> {
    let h = &info.network.h;
    let n = h.nrows();
    match kind {
        ObserverKind::OutputBased => {
            let p0 = solve_care(&CareProblem::new(
                info.lift.s_script0.clone(),
                info.lift.c_script0.clone(),
            )?)?
            .p;
            Ok(spectrum(&s_alpha_matrix(&info.lift, &p0, h, scn.gains.mu_zeta))?.radius())
        }
        ObserverKind::StateBased => {
            let q = scn.leader.q();
            let v = kron(&Matrix::identity(n, n), scn.leader.s0()) - kron(h, &Matrix::identity(q, q)) * scn.gains.mu_v;
            let rho_v = spectrum(&v)?.radius();
            let rho_h = spectrum(h)?.radius();
            Ok(rho_v.max(rho_h * scn.gains.mu_s.max(scn.gains.mu_c)))
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, low: f64, high: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| if low == high { low } else { rng.random_range(low..=high) })
        .collect()
}

/// `O = col(C₀, C₀S₀, …, C₀S₀ⁿ⁻¹)`, so that `ζ₀(t) = O v₀(t)`.
fn lift_map(leader: &LeaderSystem, n: usize) -> Matrix {
    let (q, p) = (leader.q(), leader.p());
    let mut o = Matrix::zeros(n * p, q);
    let mut block = leader.c0().clone();
    for k in 0..n {
        o.view_mut((k * p, 0), (p, q)).copy_from(&block);
        block = &block * leader.s0();
    }
    o
}

fn check_finite(t: f64, y: &[f64]) -> Result<()> {
    if let Some((idx, v)) = y
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
    {
        return Err(Error::Divergence {
            t,
            detail: format!("state component {idx} reached {v:e}"),
        });
    }
    Ok(())
}

fn run_output(scn: &Scenario, info: &ScenarioAnalysis) -> Result<OutputTrace> {
    let leader = &scn.leader;
    let lift = &info.lift;
    let g = &scn.graph;
    let n_agents = g.n_followers();
    let (q, p, n) = (leader.q(), leader.p(), lift.n());
    let block = n + n * p;
    let dim = q + n_agents * block;

    let mut y = vec![0.0; dim];
    y[..q].copy_from_slice(leader.v0_init().as_slice());
    match &scn.init {
        InitSpec::Uniform { low, high, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for i in 0..n_agents {
                let vals = uniform(&mut rng, *low, *high, block);
                y[q + i * block..q + (i + 1) * block].copy_from_slice(&vals);
            }
        }
        InitSpec::AtLeader => {
            for i in 0..n_agents {
                let off = q + i * block;
                y[off..off + n].copy_from_slice(lift.alpha0.as_slice());
                y[off + n..off + block].copy_from_slice(lift.zeta0_init.as_slice());
            }
        }
        InitSpec::Explicit { output, .. } => {
            if output.len() != n_agents {
                return Err(Error::dim("InitSpec::Explicit output agents", n_agents, output.len()));
            }
            for (i, (a, z)) in output.iter().enumerate() {
                if a.len() != n || z.len() != n * p {
                    return Err(Error::dim(
                        "InitSpec::Explicit output agent",
                        format!("alpha {n}, zeta {}", n * p),
                        format!("alpha {}, zeta {}", a.len(), z.len()),
                    ));
                }
                let off = q + i * block;
                y[off..off + n].copy_from_slice(a.as_slice());
                y[off + n..off + block].copy_from_slice(z.as_slice());
            }
        }
    }

    let p0 = solve_care(&CareProblem::new(lift.s_script0.clone(), lift.c_script0.clone())?)?.p;
    let o_map = lift_map(leader, n);
    let alpha0 = lift.alpha0.as_slice().to_vec();
    let neighbor_lists: Vec<Vec<(usize, f64)>> = (1..=n_agents).map(|i| g.neighbors(i).collect()).collect();
    let caches: RefCell<Vec<GainCache>> =
        RefCell::new((0..n_agents).map(|_| GainCache::new(p, scn.recompute_tol)).collect());
    let mut gains_f: Vec<Matrix> = vec![Matrix::zeros(n * p, p); n_agents];
    let s0 = leader.s0().clone();
    let c0 = leader.c0().clone();
    let mu_alpha = scn.gains.mu_alpha;
    let mu_zeta = scn.gains.mu_zeta;

    let mut rhs = |t: f64, x: &[f64], d: &mut [f64]| -> Result<()> {
        let v0 = &x[..q];
        let (dv0, dagents) = d.split_at_mut(q);
        for (r, o) in dv0.iter_mut().enumerate() {
            *o = (0..q).map(|c| s0[(r, c)] * v0[c]).sum();
        }
        let y0: Vec<f64> = (0..p).map(|r| (0..q).map(|c| c0[(r, c)] * v0[c]).sum()).collect();
        let agent = |i: usize| &x[q + i * block..q + (i + 1) * block];
        for (i, cache) in caches.borrow_mut().iter_mut().enumerate() {
            let (f, _) = cache.scheduled_gain(&agent(i)[..n]).map_err(|e| Error::AgentRiccati {
                agent: i + 1,
                t,
                source: Box::new(e),
            })?;
            gains_f[i].copy_from(f);
        }
        let payload = |j: usize| {
            if j == 0 {
                OutputPayload {
                    alpha: &alpha0,
                    y: &y0,
                }
            } else {
                let a = agent(j - 1);
                OutputPayload {
                    alpha: &a[..n],
                    y: &a[n..n + p],
                }
            }
        };
        for (i, out) in dagents.chunks_exact_mut(block).enumerate() {
            let own = agent(i);
            let neighbors: Vec<(f64, OutputPayload<'_>)> =
                neighbor_lists[i].iter().map(|&(j, w)| (w, payload(j))).collect();
            let (da, dz) = out.split_at_mut(n);
            alpha_agent_derivative(&own[..n], &neighbors, mu_alpha, da);
            zeta_agent_derivative(&own[..n], &own[n..], &gains_f[i], &neighbors, mu_zeta, dz);
        }
        Ok(())
    };

    let mut tr = OutputTrace {
        err_y: vec![Vec::new(); n_agents],
        err_alpha: vec![Vec::new(); n_agents],
        err_zeta: vec![Vec::new(); n_agents],
        err_p: vec![Vec::new(); n_agents],
        err_s: vec![Vec::new(); n_agents],
        riccati_solves: Vec::new(),
        cold_solves: Vec::new(),
    };
    let sqrt_p = (p as f64).sqrt();
    let mut record = |t: f64, x: &[f64]| -> Result<()> {
        let (v0, y0) = leader_trajectory(leader, t)?;
        let zeta0 = &o_map * v0;
        for (i, cache) in caches.borrow_mut().iter_mut().enumerate() {
            let a = &x[q + i * block..q + (i + 1) * block];
            let alpha_err = a[..n]
                .iter()
                .zip(&alpha0)
                .map(|(u, v)| (u - v).powi(2))
                .sum::<f64>()
                .sqrt();
            let zeta_err = a[n..].iter().zip(zeta0.iter()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let y_err = a[n..n + p].iter().zip(y0.iter()).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            let (_, pi) = cache.scheduled_gain(&a[..n]).map_err(|e| Error::AgentRiccati {
                agent: i + 1,
                t,
                source: Box::new(e),
            })?;
            tr.err_alpha[i].push(alpha_err);
            // companion(αᵢ) ⊗ I_p − 𝒮₀ is nonzero only in its last block row
            tr.err_s[i].push(sqrt_p * alpha_err);
            tr.err_zeta[i].push(zeta_err);
            tr.err_y[i].push(y_err);
            tr.err_p[i].push((pi - &p0).norm());
        }
        Ok(())
    };

    let steps = scn.steps();
    let mut rk = Rk4::new(dim);
    record(0.0, &y)?;
    for k in 0..steps {
        rk.step(&mut rhs, k as f64 * scn.dt, &mut y, scn.dt)?;
        let t_next = (k + 1) as f64 * scn.dt;
        check_finite(t_next, &y)?;
        if (k + 1) % scn.record_stride == 0 || k + 1 == steps {
            record(t_next, &y)?;
        }
    }
    drop(record);
    let caches = caches.into_inner();
    tr.riccati_solves = caches.iter().map(GainCache::solve_count).collect();
    tr.cold_solves = caches.iter().map(GainCache::cold_solves).collect();
    Ok(tr)
}

fn state_view(a: &[f64], q: usize, p: usize) -> StatePayload<'_> {
    let (cs, vs) = (q * q, q * q + p * q);
    StatePayload {
        s: &a[..cs],
        c: &a[cs..vs],
        v: &a[vs..],
    }
}

fn run_state(scn: &Scenario) -> Result<StateTrace> {
    let leader = &scn.leader;
    let g = &scn.graph;
    let n_agents = g.n_followers();
    let (q, p) = (leader.q(), leader.p());
    let block = q * q + p * q + q;
    let dim = q + n_agents * block;

    let mut y = vec![0.0; dim];
    y[..q].copy_from_slice(leader.v0_init().as_slice());
    let write_agent = |y: &mut [f64], i: usize, a: &StateAgent| {
        let off = q + i * block;
        y[off..off + q * q].copy_from_slice(a.s.as_slice());
        y[off + q * q..off + q * q + p * q].copy_from_slice(a.c.as_slice());
        y[off + q * q + p * q..off + block].copy_from_slice(a.v.as_slice());
    };
    match &scn.init {
        InitSpec::Uniform { low, high, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for i in 0..n_agents {
                let vals = uniform(&mut rng, *low, *high, block);
                y[q + i * block..q + (i + 1) * block].copy_from_slice(&vals);
            }
        }
        InitSpec::AtLeader => {
            let a = StateAgent::from_leader(leader, leader.v0_init().clone());
            for i in 0..n_agents {
                write_agent(&mut y, i, &a);
            }
        }
        InitSpec::Explicit { state, .. } => {
            if state.len() != n_agents {
                return Err(Error::dim("InitSpec::Explicit state agents", n_agents, state.len()));
            }
            for (i, a) in state.iter().enumerate() {
                if a.s.shape() != (q, q) || a.c.shape() != (p, q) || a.v.len() != q {
                    return Err(Error::dim(
                        "InitSpec::Explicit state agent",
                        format!("S {q}x{q}, C {p}x{q}, v {q}"),
                        format!("S {:?}, C {:?}, v {}", a.s.shape(), a.c.shape(), a.v.len()),
                    ));
                }
                write_agent(&mut y, i, a);
            }
        }
    }

    let neighbor_lists: Vec<Vec<(usize, f64)>> = (1..=n_agents).map(|i| g.neighbors(i).collect()).collect();
    let s0 = leader.s0().as_slice().to_vec();
    let c0 = leader.c0().as_slice().to_vec();
    let gains = scn.gains;

    let mut rhs = |_t: f64, x: &[f64], d: &mut [f64]| -> Result<()> {
        let v0 = &x[..q];
        let (dv0, dagents) = d.split_at_mut(q);
        dv0.fill(0.0);
        for (c, &vc) in v0.iter().enumerate() {
            for r in 0..q {
                dv0[r] += s0[c * q + r] * vc;
            }
        }
        let payload = |j: usize| {
            if j == 0 {
                StatePayload { s: &s0, c: &c0, v: v0 }
            } else {
                state_view(&x[q + (j - 1) * block..q + j * block], q, p)
            }
        };
        for (i, out) in dagents.chunks_exact_mut(block).enumerate() {
            let own = state_view(&x[q + i * block..q + (i + 1) * block], q, p);
            let neighbors: Vec<(f64, StatePayload<'_>)> =
                neighbor_lists[i].iter().map(|&(j, w)| (w, payload(j))).collect();
            let (ds, rest) = out.split_at_mut(q * q);
            let (dc, dv) = rest.split_at_mut(p * q);
            state_agent_derivative(own, &neighbors, &gains, StateDerivative { s: ds, c: dc, v: dv });
        }
        Ok(())
    };

    let mut tr = StateTrace {
        err_y: vec![Vec::new(); n_agents],
        err_s: vec![Vec::new(); n_agents],
        err_c: vec![Vec::new(); n_agents],
        err_v: vec![Vec::new(); n_agents],
    };
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let mut record = |t: f64, x: &[f64]| -> Result<()> {
        let (v0, y0) = leader_trajectory(leader, t)?;
        for i in 0..n_agents {
            let a = state_view(&x[q + i * block..q + (i + 1) * block], q, p);
            let ci = Matrix::from_column_slice(p, q, a.c);
            let yi = ci * Vector::from_column_slice(a.v);
            tr.err_s[i].push(dist(a.s, &s0));
            tr.err_c[i].push(dist(a.c, &c0));
            tr.err_v[i].push(dist(a.v, v0.as_slice()));
            tr.err_y[i].push(dist(yi.as_slice(), y0.as_slice()));
        }
        Ok(())
    };

    let steps = scn.steps();
    let mut rk = Rk4::new(dim);
    record(0.0, &y)?;
    for k in 0..steps {
        rk.step(&mut rhs, k as f64 * scn.dt, &mut y, scn.dt)?;
        let t_next = (k + 1) as f64 * scn.dt;
        check_finite(t_next, &y)?;
        if (k + 1) % scn.record_stride == 0 || k + 1 == steps {
            record(t_next, &y)?;
        }
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(mut scn: Scenario, t_final: f64, dt: f64) -> Scenario {
        scn.t_final = t_final;
        scn.dt = dt;
        scn
    }

    #[test]
    fn leader_only_matches_expm() {
        let sys = LeaderSystem::reference();
        let v = integrate_leader(&sys, 1e-3, 1.0).unwrap();
        let (exact, _) = leader_trajectory(&sys, 1.0).unwrap();
        assert!((v - exact).norm() < 1e-9);
    }

    #[test]
    fn synchronized_start_stays_synchronized() {
        let mut scn = short(Scenario::reference(0), 1.0, 1e-3);
        scn.observers = ObserverSelection::Both;
        scn.init = InitSpec::AtLeader;
        scn.gains.mu_zeta = 20.0;
        let tr = integrate(&scn).unwrap();
        let out = tr.output.unwrap();
        let st = tr.state.unwrap();
        for s in [&out.err_y, &out.err_alpha, &out.err_zeta, &out.err_p, &st.err_y, &st.err_v, &st.err_s] {
            for agent in s {
                assert!(agent.iter().all(|e| *e <= 1e-9), "max {:?}", agent.iter().cloned().fold(0.0, f64::max));
            }
        }
    }

    #[test]
    fn record_stride_keeps_final_sample() {
        let mut scn = short(Scenario::reference(3), 0.05, 1e-3);
        scn.record_stride = 7;
        let tr = integrate(&scn).unwrap();
        assert_eq!(*tr.times.last().unwrap(), 50.0 * 1e-3);
        assert_eq!(tr.times[1], 7e-3);
        let out = tr.output.unwrap();
        assert_eq!(out.err_y[0].len(), tr.times.len());
    }

    #[test]
    fn unreachable_follower_is_rejected() {
        let mut scn = short(Scenario::reference(0), 0.01, 1e-3);
        scn.graph = Digraph::from_unit_edges(2, &[(0, 1)]).unwrap();
        assert!(matches!(integrate(&scn), Err(Error::Assumption(_))));
    }

    #[test]
    fn large_dt_warns_and_diverges() {
        let mut scn = short(Scenario::reference(1), 2.0, 0.05);
        scn.observers = ObserverSelection::OutputBased;
        let err = integrate(&scn).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn stacked_and_terminal() {
        let s: AgentSeries = vec![vec![3.0, 1.0], vec![4.0, 0.0]];
        assert_eq!(stacked(&s), vec![5.0, 1.0]);
        assert_eq!(terminal(&s), vec![1.0, 0.0]);
    }

    #[test]
    fn scenario_validation() {
        let mut scn = Scenario::reference(0);
        scn.dt = 0.0;
        assert!(scn.validate().is_err());
        let mut scn = Scenario::reference(0);
        scn.init = InitSpec::Uniform { low: 1.0, high: -1.0, seed: 0 };
        assert!(scn.validate().is_err());
        let mut scn = Scenario::reference(0);
        scn.t_final = 1e-5;
        assert!(scn.validate().is_err());
    }
}
