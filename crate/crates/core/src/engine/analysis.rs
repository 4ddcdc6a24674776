//! Spectral certificates that need no time integration.

use crate::error::{Error, Result};
use crate::leader::CanonicalLift;
use crate::numerics::{kron, spectrum, Matrix, Spectrum};
use crate::riccati::{solve_care, CareProblem};

#[derive(Debug, Clone)]
pub struct PhiReport {
    /// Riccati solution of `P Aᵀ + A P − P CᵀC P + I = 0`.
    pub p: Matrix,
    pub delta_f: f64,
    /// Largest real part of `σ(Φ)`.
    pub delta_bar_phi: f64,
    pub hurwitz: bool,
}

/// `Φ = I_N ⊗ A − μ (F ⊗ P CᵀC)`.
pub fn phi_matrix(a: &Matrix, p: &Matrix, c: &Matrix, f: &Matrix, mu: f64) -> Matrix {
    let n = f.nrows();
    let pctc = p * c.transpose() * c;
    kron(&Matrix::identity(n, n), a) - kron(f, &pctc) * mu
}

/// Solves the Riccati equation for `(C, A)`, forms `Φ`, and reports whether it
/// is Hurwitz.
pub fn verify_phi_hurwitz(a: &Matrix, c: &Matrix, f: &Matrix, mu: f64) -> Result<PhiReport> {
    if f.nrows() != f.ncols() {
        return Err(Error::dim(
            "verify_phi_hurwitz::F",
            "square matrix",
            format!("{}x{}", f.nrows(), f.ncols()),
        ));
    }
    let delta_f = spectrum(f)?.min_re();
    if !(delta_f > 0.0) {
        return Err(Error::Precondition {
            context: "verify_phi_hurwitz",
            detail: format!("min Re σ(F) = {delta_f} is not positive"),
        });
    }
    let sol = solve_care(&CareProblem::new(a.clone(), c.clone())?)?;
    let phi = phi_matrix(a, &sol.p, c, f, mu);
    let delta_bar_phi = spectrum(&phi)?.max_re();
    Ok(PhiReport {
        p: sol.p,
        delta_f,
        delta_bar_phi,
        hurwitz: delta_bar_phi < 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct SAlphaReport {
    pub spectrum: Spectrum,
    pub delta_bar: f64,
    pub hurwitz: bool,
    /// Frobenius residual of the Riccati equation at `𝒫₀`.
    pub p0_residual: f64,
    pub p0: Matrix,
}

/// `𝒮_α = I_N ⊗ 𝒮₀ − μ_ζ (H ⊗ 𝒫₀𝒞₀ᵀ𝒞₀)`.
pub fn s_alpha_matrix(lift: &CanonicalLift, p0: &Matrix, h: &Matrix, mu_zeta: f64) -> Matrix {
    phi_matrix(&lift.s_script0, p0, &lift.c_script0, h, mu_zeta)
}

/// Linearized error dynamics of the output-based compensator once the
/// coefficient estimates have converged.
pub fn verify_salpha_hurwitz(lift: &CanonicalLift, h: &Matrix, mu_zeta: f64) -> Result<SAlphaReport> {
    let delta_h = spectrum(h)?.min_re();
    if !(delta_h > 0.0) {
        return Err(Error::Precondition {
            context: "verify_salpha_hurwitz",
            detail: format!("delta_H = {delta_h} is not positive"),
        });
    }
    let sol = solve_care(&CareProblem::new(
        lift.s_script0.clone(),
        lift.c_script0.clone(),
    )?)?;
    let s_alpha = s_alpha_matrix(lift, &sol.p, h, mu_zeta);
    let spec = spectrum(&s_alpha)?;
    let delta_bar = spec.max_re();
    Ok(SAlphaReport {
        spectrum: spec,
        delta_bar,
        hurwitz: delta_bar < 0.0,
        p0_residual: sol.residual,
        p0: sol.p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_network_matrices, reference_graph};
    use crate::leader::{canonical_lift, LeaderSystem};
    use crate::numerics::DEFAULT_RANK_TOL;

    #[test]
    fn scalar_phi() {
        let one = Matrix::from_element(1, 1, 1.0);
        let r = verify_phi_hurwitz(&Matrix::zeros(1, 1), &one, &one, 1.01).unwrap();
        assert!((r.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((r.delta_bar_phi + 1.01).abs() < 1e-12);
        assert!(r.hurwitz);
    }

    #[test]
    fn zero_gain_keeps_unstable_mode() {
        let a = Matrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, -1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let r = verify_phi_hurwitz(&a, &c, &Matrix::identity(3, 3), 0.0).unwrap();
        assert!(!r.hurwitz);
        assert!((r.delta_bar_phi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn phi_requires_positive_delta_f() {
        let one = Matrix::from_element(1, 1, 1.0);
        let f = Matrix::from_element(1, 1, -1.0);
        assert!(matches!(
            verify_phi_hurwitz(&Matrix::zeros(1, 1), &one, &f, 1.0),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn reference_s_alpha() {
        let lift = canonical_lift(&LeaderSystem::reference(), DEFAULT_RANK_TOL).unwrap();
        let net = build_network_matrices(&reference_graph()).unwrap();
        let r = verify_salpha_hurwitz(&lift, &net.h, 200.0).unwrap();
        assert!(r.hurwitz, "{}", r.delta_bar);
        assert_eq!(r.spectrum.len(), 60);
        let r0 = verify_salpha_hurwitz(&lift, &net.h, 0.0).unwrap();
        assert!(!r0.hurwitz);
        assert!(r0.delta_bar.abs() < 1e-9);
    }
}
