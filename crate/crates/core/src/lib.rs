//! Adaptive distributed observers for leader-follower multiagent systems.
//!
//! A leader `v̇₀ = S₀v₀, y₀ = C₀v₀` broadcasts over a directed communication
//! graph. Two observer families let each follower reconstruct `y₀`:
//!
//! * the **state-based** observer, where followers estimate `S₀`, `C₀` and
//!   `v₀` entry by entry and exchange all of them;
//! * the **output-based** observer, where followers only agree on the
//!   minimal-polynomial coefficients `α₀` of `S₀` and run a Riccati-gain
//!   compensator driven by neighbors' output estimates.
//!
//! The crate is organized bottom-up: [`numerics`] (spectra, Kronecker
//! products, `expm`), [`graph`] (Laplacians and spanning trees), [`leader`]
//! (minimal polynomial and canonical lift), [`riccati`] (stabilizing CARE
//! solutions and the per-agent gain cache), [`observers`] (right-hand sides
//! and cost accounting) and [`engine`] (RK4 simulation, rate fitting and
//! spectral checks).

pub mod engine;
pub mod error;
pub mod graph;
pub mod leader;
pub mod numerics;
pub mod observers;
pub mod riccati;

pub use error::{Error, Result};
pub use numerics::{Matrix, Vector};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    mod numerics {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/leader-lift.md")]
    mod leader_lift {}
    #[doc = include_str!("../../../book/src/riccati.md")]
    mod riccati {}
    #[doc = include_str!("../../../book/src/observers.md")]
    mod observers {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
