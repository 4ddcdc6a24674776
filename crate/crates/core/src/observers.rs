//! Right-hand sides of the two observer families.
//!
//! Every follower sees its in-neighbors only through a broadcast payload. For
//! the output-based observer the payload is `(αⱼ, yⱼ)`, `n + p` scalars; for
//! the state-based observer it is `(Sⱼ, Cⱼ, vⱼ)`, `q² + pq + q` scalars. The
//! leader is node 0 and broadcasts its true values.
//!
//! Per-agent functions take the agent's own state plus a neighbor list
//! `(a_ij, payload_j)`, so nothing else about the network is visible to them.

use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::leader::{apply_companion, LeaderSystem};
use crate::numerics::{Matrix, Vector};
use crate::riccati::GainCache;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObserverKind {
    StateBased,
    OutputBased,
}

impl ObserverKind {
    pub fn label(self) -> &'static str {
        match self {
            ObserverKind::StateBased => "state_based",
            ObserverKind::OutputBased => "output_based",
        }
    }
}

/// Observer gains. `mu_s`, `mu_c`, `mu_v` drive the state-based observer;
/// `mu_alpha`, `mu_zeta` the output-based one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub mu_s: f64,
    pub mu_c: f64,
    pub mu_v: f64,
    pub mu_alpha: f64,
    pub mu_zeta: f64,
}

impl Gains {
    /// Output-based gains, with the state-based ones set to `mu_alpha`.
    pub fn output_based(mu_alpha: f64, mu_zeta: f64) -> Self {
        Self {
            mu_s: mu_alpha,
            mu_c: mu_alpha,
            mu_v: mu_alpha,
            mu_alpha,
            mu_zeta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("gain {name} must be a positive finite number, got {v}")));
            }
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("mu_s", self.mu_s),
            ("mu_c", self.mu_c),
            ("mu_v", self.mu_v),
            ("mu_alpha", self.mu_alpha),
            ("mu_zeta", self.mu_zeta),
        ]
    }
}

/// Per-agent state of the state-based observer.
#[derive(Debug, Clone, PartialEq)]
pub struct StateAgent {
    pub s: Matrix,
    pub c: Matrix,
    pub v: Vector,
}

impl StateAgent {
    pub fn from_leader(leader: &LeaderSystem, v: Vector) -> Self {
        Self {
            s: leader.s0().clone(),
            c: leader.c0().clone(),
            v,
        }
    }

    pub fn view(&self) -> StatePayload<'_> {
        StatePayload {
            s: self.s.as_slice(),
            c: self.c.as_slice(),
            v: self.v.as_slice(),
        }
    }
}

/// Borrowed `(S, C, v)` as broadcast by a node; matrices column-major.
#[derive(Debug, Clone, Copy)]
pub struct StatePayload<'a> {
    pub s: &'a [f64],
    pub c: &'a [f64],
    pub v: &'a [f64],
}

impl StatePayload<'_> {
    pub fn len(&self) -> usize {
        self.s.len() + self.c.len() + self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mutable output slots matching [`StatePayload`].
pub struct StateDerivative<'a> {
    pub s: &'a mut [f64],
    pub c: &'a mut [f64],
    pub v: &'a mut [f64],
}

/// `Ṡᵢ`, `Ċᵢ`, `v̇ᵢ` for one follower of the state-based observer.
pub fn state_agent_derivative(
    own: StatePayload<'_>,
    neighbors: &[(f64, StatePayload<'_>)],
    gains: &Gains,
    out: StateDerivative<'_>,
) {
    let q = own.v.len();
    out.s.fill(0.0);
    out.c.fill(0.0);
    out.v.fill(0.0);
    // v̇ = S v
    for (col, &vj) in own.v.iter().enumerate() {
        for row in 0..q {
            out.v[row] += own.s[col * q + row] * vj;
        }
    }
    for &(w, nb) in neighbors {
        for ((o, a), b) in out.s.iter_mut().zip(nb.s).zip(own.s) {
            *o += gains.mu_s * w * (a - b);
        }
        for ((o, a), b) in out.c.iter_mut().zip(nb.c).zip(own.c) {
            *o += gains.mu_c * w * (a - b);
        }
        for ((o, a), b) in out.v.iter_mut().zip(nb.v).zip(own.v) {
            *o += gains.mu_v * w * (a - b);
        }
    }
}

fn check_state_dims(agent: &StateAgent, q: usize, p: usize) -> Result<()> {
    if agent.s.shape() != (q, q) || agent.c.shape() != (p, q) || agent.v.len() != q {
        return Err(Error::dim(
            "state_observer_rhs",
            format!("S {q}x{q}, C {p}x{q}, v {q}"),
            format!(
                "S {:?}, C {:?}, v {}",
                agent.s.shape(),
                agent.c.shape(),
                agent.v.len()
            ),
        ));
    }
    Ok(())
}

/// Derivatives of all followers of the state-based observer; `v0` is the
/// leader's current state.
pub fn state_observer_rhs(
    agents: &[StateAgent],
    leader: &LeaderSystem,
    v0: &Vector,
    g: &Digraph,
    gains: &Gains,
) -> Result<Vec<StateAgent>> {
    let (q, p) = (leader.q(), leader.p());
    if agents.len() != g.n_followers() {
        return Err(Error::dim("state_observer_rhs", g.n_followers(), agents.len()));
    }
    if v0.len() != q {
        return Err(Error::dim("state_observer_rhs::v0", q, v0.len()));
    }
    for a in agents {
        check_state_dims(a, q, p)?;
    }
    let leader_payload = StatePayload {
        s: leader.s0().as_slice(),
        c: leader.c0().as_slice(),
        v: v0.as_slice(),
    };
    let payload = |j: usize| {
        if j == 0 {
            leader_payload
        } else {
            agents[j - 1].view()
        }
    };
    let mut out = Vec::with_capacity(agents.len());
    for (idx, agent) in agents.iter().enumerate() {
        let neighbors: Vec<_> = g.neighbors(idx + 1).map(|(j, w)| (w, payload(j))).collect();
        let mut d = StateAgent {
            s: Matrix::zeros(q, q),
            c: Matrix::zeros(p, q),
            v: Vector::zeros(q),
        };
        state_agent_derivative(
            agent.view(),
            &neighbors,
            gains,
            StateDerivative {
                s: d.s.as_mut_slice(),
                c: d.c.as_mut_slice(),
                v: d.v.as_mut_slice(),
            },
        );
        out.push(d);
    }
    Ok(out)
}

/// Borrowed `(α, y)` as broadcast by a node of the output-based observer.
#[derive(Debug, Clone, Copy)]
pub struct OutputPayload<'a> {
    pub alpha: &'a [f64],
    pub y: &'a [f64],
}

impl OutputPayload<'_> {
    pub fn len(&self) -> usize {
        self.alpha.len() + self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `α̇ᵢ = μ_α Σⱼ aᵢⱼ (αⱼ − αᵢ)`.
pub fn alpha_agent_derivative(
    own_alpha: &[f64],
    neighbors: &[(f64, OutputPayload<'_>)],
    mu_alpha: f64,
    out: &mut [f64],
) {
    out.fill(0.0);
    for &(w, nb) in neighbors {
        for ((o, a), b) in out.iter_mut().zip(nb.alpha).zip(own_alpha) {
            *o += mu_alpha * w * (a - b);
        }
    }
}

/// `ζ̇ᵢ = 𝒮ᵢζᵢ + μ_ζ ℱᵢ Σⱼ aᵢⱼ (yⱼ − yᵢ)` with `𝒮ᵢ = companion(αᵢ) ⊗ I_p`
/// and `yᵢ` the first `p` entries of `ζᵢ`.
pub fn zeta_agent_derivative(
    own_alpha: &[f64],
    own_zeta: &[f64],
    gain_f: &Matrix,
    neighbors: &[(f64, OutputPayload<'_>)],
    mu_zeta: f64,
    out: &mut [f64],
) {
    let p = gain_f.ncols();
    apply_companion(own_alpha, p, own_zeta, out);
    let own_y = &own_zeta[..p];
    let mut innovation = [0.0f64; 16];
    let mut heap;
    let e: &mut [f64] = if p <= innovation.len() {
        &mut innovation[..p]
    } else {
        heap = vec![0.0; p];
        &mut heap
    };
    for &(w, nb) in neighbors {
        for ((o, a), b) in e.iter_mut().zip(nb.y).zip(own_y) {
            *o += w * (a - b);
        }
    }
    for (col, &ek) in e.iter().enumerate() {
        if ek == 0.0 {
            continue;
        }
        let scale = mu_zeta * ek;
        for (o, f) in out.iter_mut().zip(gain_f.column(col).iter()) {
            *o += scale * f;
        }
    }
}

/// One follower of the output-based observer.
#[derive(Debug, Clone)]
pub struct OutputAgent {
    pub alpha: Vector,
    pub zeta: Vector,
    pub gain_cache: GainCache,
}

impl OutputAgent {
    pub fn new(alpha: Vector, zeta: Vector, p: usize, recompute_tol: f64) -> Self {
        Self {
            alpha,
            zeta,
            gain_cache: GainCache::new(p, recompute_tol),
        }
    }

    pub fn payload(&self, p: usize) -> OutputPayload<'_> {
        OutputPayload {
            alpha: self.alpha.as_slice(),
            y: &self.zeta.as_slice()[..p],
        }
    }
}

/// `α̇ᵢ` for every follower; `alpha0` is broadcast by the leader.
pub fn output_observer_alpha_rhs(
    alphas: &[Vector],
    alpha0: &Vector,
    g: &Digraph,
    mu_alpha: f64,
) -> Result<Vec<Vector>> {
    let n = alpha0.len();
    if alphas.len() != g.n_followers() {
        return Err(Error::dim("output_observer_alpha_rhs", g.n_followers(), alphas.len()));
    }
    if let Some(bad) = alphas.iter().find(|a| a.len() != n) {
        return Err(Error::dim("output_observer_alpha_rhs", n, bad.len()));
    }
    let payload = |j: usize| OutputPayload {
        alpha: if j == 0 {
            alpha0.as_slice()
        } else {
            alphas[j - 1].as_slice()
        },
        y: &[],
    };
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let neighbors: Vec<_> = g.neighbors(idx + 1).map(|(j, w)| (w, payload(j))).collect();
            let mut d = Vector::zeros(n);
            alpha_agent_derivative(a.as_slice(), &neighbors, mu_alpha, d.as_mut_slice());
            d
        })
        .collect())
}

/// `ζ̇ᵢ` for every follower. Each agent's gain comes from its own cache,
/// which may re-solve the Riccati equation.
pub fn output_observer_zeta_rhs(
    agents: &mut [OutputAgent],
    y0: &Vector,
    g: &Digraph,
    mu_zeta: f64,
    p: usize,
) -> Result<Vec<Vector>> {
    if agents.len() != g.n_followers() {
        return Err(Error::dim("output_observer_zeta_rhs", g.n_followers(), agents.len()));
    }
    if y0.len() != p {
        return Err(Error::dim("output_observer_zeta_rhs::y0", p, y0.len()));
    }
    let n = agents.first().map_or(0, |a| a.alpha.len());
    for a in agents.iter() {
        if a.alpha.len() != n || a.zeta.len() != n * p || n == 0 {
            return Err(Error::dim(
                "output_observer_zeta_rhs",
                format!("alpha {n}, zeta {}", n * p),
                format!("alpha {}, zeta {}", a.alpha.len(), a.zeta.len()),
            ));
        }
    }
    let mut gains = Vec::with_capacity(agents.len());
    for (idx, a) in agents.iter_mut().enumerate() {
        let (f, _) = a
            .gain_cache
            .scheduled_gain(a.alpha.as_slice())
            .map_err(|e| Error::AgentRiccati {
                agent: idx + 1,
                t: f64::NAN,
                source: Box::new(e),
            })?;
        gains.push(f.clone());
    }
    let agents = &*agents;
    let payload = |j: usize| {
        if j == 0 {
            OutputPayload {
                alpha: &[],
                y: y0.as_slice(),
            }
        } else {
            agents[j - 1].payload(p)
        }
    };
    Ok(agents
        .iter()
        .enumerate()
        .map(|(idx, a)| {
            let neighbors: Vec<_> = g.neighbors(idx + 1).map(|(j, w)| (w, payload(j))).collect();
            let mut d = Vector::zeros(n * p);
            zeta_agent_derivative(
                a.alpha.as_slice(),
                a.zeta.as_slice(),
                &gains[idx],
                &neighbors,
                mu_zeta,
                d.as_mut_slice(),
            );
            d
        })
        .collect())
}

/// Per-agent observer size and per-link broadcast size, in real scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObserverCosts {
    pub dimension: usize,
    pub payload: usize,
}

pub fn observer_costs(kind: ObserverKind, q: usize, p: usize, n: usize) -> ObserverCosts {
    match kind {
        ObserverKind::StateBased => {
            let d = q * q + p * q + q;
            ObserverCosts {
                dimension: d,
                payload: d,
            }
        }
        ObserverKind::OutputBased => ObserverCosts {
            dimension: n + p * n,
            payload: n + p,
        },
    }
}

/// Verdict for one gain against its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCheck {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub delta_bar_s0: f64,
    pub delta_h: f64,
    pub checks: Vec<GainCheck>,
    /// Set when no eigenvalue of `S₀` has positive real part, in which case
    /// any positive `μ_α` suffices.
    pub marginal_leader_relaxation: bool,
}

impl GainReport {
    pub fn get(&self, name: &str) -> Option<&GainCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passes(&self, kind: ObserverKind) -> bool {
        let names: &[&str] = match kind {
            ObserverKind::StateBased => &["mu_s", "mu_c", "mu_v"],
            ObserverKind::OutputBased => &["mu_alpha", "mu_zeta"],
        };
        names.iter().all(|n| self.get(n).is_some_and(|c| c.pass))
    }

    /// Human-readable lines for every failed check.
    pub fn warnings(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| {
                format!(
                    "{} = {} does not exceed threshold {:.6}",
                    c.name, c.value, c.threshold
                )
            })
            .collect()
    }
}

/// Checks `μ_α > δ̄_{S₀}/δ_H`, `μ_ζ > 1/δ_H` and `μ_s, μ_c, μ_v > δ̄_{S₀}/δ_H`.
pub fn check_gain_conditions(gains: &Gains, delta_bar_s0: f64, delta_h: f64) -> Result<GainReport> {
    if !(delta_h > 0.0) {
        return Err(Error::Assumption(format!(
            "delta_H = {delta_h} is not positive; the graph has no spanning tree rooted at the leader"
        )));
    }
    let coupling = delta_bar_s0 / delta_h;
    let relaxed = delta_bar_s0 <= 0.0;
    let strict = |name, value: f64, threshold: f64| GainCheck {
        name,
        value,
        threshold,
        pass: value > threshold,
        note: None,
    };
    let mut alpha = strict("mu_alpha", gains.mu_alpha, coupling);
    if relaxed {
        alpha.pass = gains.mu_alpha > 0.0;
        alpha.note = Some("leader has no eigenvalue with positive real part: any mu_alpha > 0 suffices".into());
    }
    let checks = vec![
        alpha,
        strict("mu_zeta", gains.mu_zeta, 1.0 / delta_h),
        strict("mu_s", gains.mu_s, coupling),
        strict("mu_c", gains.mu_c, coupling),
        strict("mu_v", gains.mu_v, coupling),
    ];
    Ok(GainReport {
        delta_bar_s0,
        delta_h,
        checks,
        marginal_leader_relaxation: relaxed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::reference_graph;
    use crate::leader::canonical_lift;
    use crate::numerics::DEFAULT_RANK_TOL;
    use crate::riccati::DEFAULT_RECOMPUTE_TOL;

    fn single_edge() -> Digraph {
        Digraph::from_unit_edges(1, &[(0, 1)]).unwrap()
    }

    #[test]
    fn state_rhs_at_leader_is_pure_drift() {
        let leader = LeaderSystem::reference();
        let v0 = leader.v0_init().clone();
        let g = reference_graph();
        let agents = vec![StateAgent::from_leader(&leader, v0.clone()); 4];
        let gains = Gains::output_based(10.0, 200.0);
        for d in state_observer_rhs(&agents, &leader, &v0, &g, &gains).unwrap() {
            assert_eq!(d.s, Matrix::zeros(5, 5));
            assert_eq!(d.c, Matrix::zeros(3, 5));
            assert!((d.v - leader.s0() * &v0).norm() < 1e-15);
        }
    }

    #[test]
    fn state_rhs_single_follower_pulls_towards_leader() {
        let leader = LeaderSystem::reference();
        let v0 = leader.v0_init().clone();
        let gains = Gains {
            mu_s: 1.0,
            ..Gains::output_based(1.0, 1.0)
        };
        let agent = StateAgent {
            s: Matrix::zeros(5, 5),
            c: Matrix::zeros(3, 5),
            v: Vector::zeros(5),
        };
        let d = state_observer_rhs(&[agent], &leader, &v0, &single_edge(), &gains).unwrap();
        assert_eq!(&d[0].s, leader.s0());
    }

    #[test]
    fn state_rhs_without_edges_is_uncoupled() {
        let leader = LeaderSystem::reference();
        let g = Digraph::new(2).unwrap();
        let agent = StateAgent {
            s: Matrix::from_fn(5, 5, |i, j| (i as f64) - 0.5 * j as f64),
            c: Matrix::from_element(3, 5, 0.2),
            v: Vector::from_fn(5, |i, _| i as f64),
        };
        let agents = vec![agent.clone(), agent.clone()];
        let gains = Gains::output_based(3.0, 3.0);
        for d in state_observer_rhs(&agents, &leader, leader.v0_init(), &g, &gains).unwrap() {
            assert_eq!(d.s, Matrix::zeros(5, 5));
            assert_eq!(d.v, &agent.s * &agent.v);
        }
    }

    #[test]
    fn state_rhs_dimension_mismatch() {
        let leader = LeaderSystem::reference();
        let bad = StateAgent {
            s: Matrix::zeros(4, 4),
            c: Matrix::zeros(3, 4),
            v: Vector::zeros(4),
        };
        let gains = Gains::output_based(1.0, 1.0);
        let err = state_observer_rhs(&[bad], &leader, leader.v0_init(), &single_edge(), &gains);
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn alpha_rhs_cases() {
        let alpha0 = Vector::from_vec(vec![0., 5., 0., 4., 0.]);
        let g = reference_graph();
        let all = vec![alpha0.clone(); 4];
        for d in output_observer_alpha_rhs(&all, &alpha0, &g, 10.0).unwrap() {
            assert_eq!(d, Vector::zeros(5));
        }
        let d = output_observer_alpha_rhs(&[Vector::zeros(5)], &alpha0, &single_edge(), 10.0).unwrap();
        assert_eq!(d[0], &alpha0 * 10.0);
        assert!(output_observer_alpha_rhs(&[Vector::zeros(4)], &alpha0, &single_edge(), 1.0).is_err());
    }

    #[test]
    fn zeta_rhs_on_synchronized_manifold() {
        let leader = LeaderSystem::reference();
        let lift = canonical_lift(&leader, DEFAULT_RANK_TOL).unwrap();
        let p = lift.p();
        let mut agents: Vec<_> = (0..4)
            .map(|_| OutputAgent::new(lift.alpha0.clone(), lift.zeta0_init.clone(), p, DEFAULT_RECOMPUTE_TOL))
            .collect();
        let y0 = &lift.c_script0 * &lift.zeta0_init;
        let d = output_observer_zeta_rhs(&mut agents, &y0, &reference_graph(), 200.0, p).unwrap();
        let want = &lift.s_script0 * &lift.zeta0_init;
        for di in d {
            assert!((di - &want).norm() < 1e-12);
        }
    }

    #[test]
    fn zeta_rhs_single_follower_from_rest() {
        let leader = LeaderSystem::reference();
        let lift = canonical_lift(&leader, DEFAULT_RANK_TOL).unwrap();
        let p = lift.p();
        let mut agents = vec![OutputAgent::new(lift.alpha0.clone(), Vector::zeros(15), p, DEFAULT_RECOMPUTE_TOL)];
        let y0 = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        let d = output_observer_zeta_rhs(&mut agents, &y0, &single_edge(), 200.0, p).unwrap();
        let (f, _) = agents[0].gain_cache.scheduled_gain(lift.alpha0.as_slice()).unwrap();
        assert!((&d[0] - f * &y0 * 200.0).norm() < 1e-10);
    }

    #[test]
    fn payload_sizes_match_costs() {
        let leader = LeaderSystem::reference();
        let lift = canonical_lift(&leader, DEFAULT_RANK_TOL).unwrap();
        let agent = OutputAgent::new(lift.alpha0.clone(), lift.zeta0_init.clone(), 3, 1e-6);
        let costs = observer_costs(ObserverKind::OutputBased, 5, 3, 5);
        assert_eq!(agent.payload(3).len(), costs.payload);
        assert_eq!(agent.alpha.len() + agent.zeta.len(), costs.dimension);
        let sa = StateAgent::from_leader(&leader, leader.v0_init().clone());
        let costs = observer_costs(ObserverKind::StateBased, 5, 3, 5);
        assert_eq!(sa.view().len(), costs.payload);
    }

    #[test]
    fn cost_table() {
        assert_eq!(
            observer_costs(ObserverKind::StateBased, 5, 3, 5),
            ObserverCosts { dimension: 45, payload: 45 }
        );
        assert_eq!(
            observer_costs(ObserverKind::OutputBased, 5, 3, 5),
            ObserverCosts { dimension: 20, payload: 8 }
        );
        assert_eq!(
            observer_costs(ObserverKind::OutputBased, 1, 1, 1),
            ObserverCosts { dimension: 2, payload: 2 }
        );
        assert_eq!(observer_costs(ObserverKind::StateBased, 1, 1, 1).dimension, 3);
    }

    #[test]
    fn gain_condition_cases() {
        let r = check_gain_conditions(&Gains::output_based(10.0, 200.0), 0.0, 0.18).unwrap();
        assert!(r.passes(ObserverKind::OutputBased) && r.passes(ObserverKind::StateBased));

        let r = check_gain_conditions(&Gains::output_based(10.0, 0.5), 0.0, 1.0).unwrap();
        let z = r.get("mu_zeta").unwrap();
        assert!(!z.pass);
        assert_eq!(z.threshold, 1.0);
        assert_eq!(r.warnings().len(), 1);

        let r = check_gain_conditions(&Gains::output_based(1e-3, 5.0), -1.0, 1.0).unwrap();
        assert!(r.marginal_leader_relaxation);
        assert!(r.get("mu_alpha").unwrap().pass);

        let r = check_gain_conditions(&Gains::output_based(1.0, 5.0), 2.0, 1.0).unwrap();
        assert!(!r.get("mu_alpha").unwrap().pass);
        assert!(!r.get("mu_v").unwrap().pass);

        assert!(matches!(
            check_gain_conditions(&Gains::output_based(1.0, 1.0), 0.0, 0.0),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn gains_validation() {
        assert!(Gains::output_based(1.0, 2.0).validate().is_ok());
        assert!(Gains::output_based(0.0, 2.0).validate().is_err());
        assert!(Gains::output_based(1.0, f64::NAN).validate().is_err());
    }
}
