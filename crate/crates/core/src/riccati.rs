//! Continuous algebraic Riccati equation in filter form,
//!
//! ```text
//! P Sᵀ + S P − P Cᵀ C P + I = 0,
//! ```
//!
//! solved for its maximal (stabilizing) solution. Cold starts go through the
//! matrix sign function of the Hamiltonian `[[Sᵀ, −CᵀC], [−I, −S]]`, whose
//! stable invariant subspace `[I; P]` is the kernel of `sign + I`. The result
//! is then polished with Newton–Kleinman sweeps, each of which is a Lyapunov
//! solve against the current closed loop `S − P CᵀC`.
//!
//! [`GainCache`] tracks the time-varying solution for one follower whose
//! companion coefficients drift. Because `companion(α) ⊗ I_p` with output map
//! `[1 0 ⋯ 0] ⊗ I_p` decouples into `p` identical copies, the cache solves the
//! `n × n` scalar problem and lifts it with `⊗ I_p`.

use nalgebra::{Cholesky, DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::leader::{lifted_output, scalar_companion};
use crate::numerics::{kron, spectrum, symmetrize, Matrix, Vector};

/// Newton is declared converged once the scaled residual drops below this.
pub const NEWTON_TOL: f64 = 1e-10;
/// Accepted scaled residual for a returned solution.
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 50;
/// Minimum distance of Hamiltonian eigenvalues from the imaginary axis.
pub const HAMILTONIAN_GAP: f64 = 1e-10;
pub const DEFAULT_RECOMPUTE_TOL: f64 = 1e-6;
const LYAPUNOV_REFINE_STEPS: usize = 3;

const SIGN_MAX_ITER: usize = 100;

/// Observable (or at least detectable) pair `(C, S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CareProblem {
    pub s: Matrix,
    pub c: Matrix,
}

impl CareProblem {
    pub fn new(s: Matrix, c: Matrix) -> Result<Self> {
        let m = s.nrows();
        if m == 0 || s.ncols() != m {
            return Err(Error::dim(
                "CareProblem::S",
                "nonempty square matrix",
                format!("{}x{}", s.nrows(), s.ncols()),
            ));
        }
        if c.ncols() != m || c.nrows() == 0 {
            return Err(Error::dim(
                "CareProblem::C",
                format!("p x {m}"),
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        Ok(Self { s, c })
    }

    /// Scale used for residual bounds: `1 + ‖S‖²`.
    pub fn scale(&self) -> f64 {
        1.0 + self.s.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    /// Symmetric positive definite maximal solution.
    pub p: Matrix,
    /// `‖P Sᵀ + S P − P CᵀC P + I‖_F`.
    pub residual: f64,
    /// Largest real part of `σ(S − P CᵀC)`.
    pub closed_loop_max_re: f64,
    /// `‖P − Pᵀ‖_F` before the final symmetrization.
    pub asymmetry: f64,
    pub newton_iterations: usize,
}

/// `P Sᵀ + S P − P G P + I` with `G = CᵀC`.
pub fn care_residual(p: &Matrix, s: &Matrix, g: &Matrix) -> Matrix {
    let m = s.nrows();
    let ps = p * s.transpose();
    &ps + ps.transpose() - p * g * p + Matrix::identity(m, m)
}

/// Solves `A X + X Aᵀ + Q = 0` (Bartels–Stewart on the real Schur form of `A`).
///
/// Requires `λᵢ + λⱼ ≠ 0` for all eigenvalue pairs of `A`; a Hurwitz `A`
/// always qualifies.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let m = a.nrows();
    if a.ncols() != m || q.shape() != (m, m) {
        return Err(Error::dim(
            "solve_lyapunov",
            format!("{m}x{m} operands"),
            format!("A {:?}, Q {:?}", a.shape(), q.shape()),
        ));
    }
    let Some(schur) = Schur::try_new(a.clone(), f64::EPSILON, 100 * m.max(10)) else {
        return kron_lyapunov(a, q);
    };
    let (u, t) = schur.unpack();
    let solve = |r: &Matrix| -> Result<Matrix> {
        let y = quasi_triangular_lyapunov(&t, &-(u.transpose() * r * &u))?;
        Ok(&u * y * u.transpose())
    };
    let residual = |x: &Matrix| a * x + x * a.transpose() + q;
    let mut x = solve(q)?;
    let mut r = residual(&x);
    // iterative refinement: large, non-normal closed loops lose several
    // digits in a single Bartels–Stewart pass
    for _ in 0..LYAPUNOV_REFINE_STEPS {
        let candidate = &x + solve(&r)?;
        let r_next = residual(&candidate);
        if !(r_next.norm() < 0.5 * r.norm()) {
            break;
        }
        x = candidate;
        r = r_next;
    }
    let res = r.norm();
    if !res.is_finite() {
        return Err(Error::numerical("solve_lyapunov", "non-finite solution"));
    }
    if res <= 1e-9 * (q.norm() + 2.0 * a.norm() * x.norm()) {
        return Ok(x);
    }
    // Schur-based solve lost accuracy (e.g. an unrecognized 2x2 block); fall
    // back to the dense Kronecker system.
    kron_lyapunov(a, q)
}

/// `T Y + Y Tᵀ = R` with `T` upper quasi-triangular, solved column block by
/// column block from the right.
fn quasi_triangular_lyapunov(t: &Matrix, r: &Matrix) -> Result<Matrix> {
    let m = t.nrows();
    let mut y = Matrix::zeros(m, m);
    let mut end = m;
    while end > 0 {
        let size = if end >= 2 && t[(end - 1, end - 2)] != 0.0 { 2 } else { 1 };
        let start = end - size;
        // R_J − Σ_{K > J} Y_K T_{J,K}ᵀ
        let mut rhs = r.columns(start, size).into_owned();
        if end < m {
            let tail = t.view((start, end), (size, m - end));
            rhs -= y.columns(end, m - end) * tail.transpose();
        }
        if size == 1 {
            let mut sys = t.clone();
            let d = t[(start, start)];
            for i in 0..m {
                sys[(i, i)] += d;
            }
            let col = sys.lu().solve(&rhs).ok_or_else(|| {
                Error::numerical("solve_lyapunov", "singular diagonal system (λᵢ + λⱼ = 0)")
            })?;
            y.set_column(start, &col.column(0));
        } else {
            let b = t.view((start, start), (2, 2)).into_owned();
            let sys = kron(&Matrix::identity(2, 2), t) + kron(&b, &Matrix::identity(m, m));
            let v = DMatrix::from_column_slice(2 * m, 1, rhs.as_slice());
            let sol = sys.lu().solve(&v).ok_or_else(|| {
                Error::numerical("solve_lyapunov", "singular 2x2-block system (λᵢ + λⱼ = 0)")
            })?;
            y.columns_mut(start, 2)
                .copy_from(&DMatrix::from_column_slice(m, 2, sol.as_slice()));
        }
        end = start;
    }
    Ok(y)
}

fn kron_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let m = a.nrows();
    let id = Matrix::identity(m, m);
    let sys = kron(&id, a) + kron(a, &id);
    let rhs = -Vector::from_column_slice(q.as_slice());
    let v = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numerical("solve_lyapunov", "singular Kronecker system"))?;
    Ok(Matrix::from_column_slice(m, m, v.as_slice()))
}

/// PBH test on the closed right half-plane: `rank [λI − S; C] = m` for every
/// eigenvalue `λ` of `S` with `Re λ ≥ 0`.
pub fn is_detectable(s: &Matrix, c: &Matrix) -> Result<bool> {
    let m = s.nrows();
    let p = c.nrows();
    let scale = 1.0 + s.norm();
    for lam in spectrum(s)?.eigenvalues() {
        if lam.re < -1e-12 * scale {
            continue;
        }
        let pencil = DMatrix::<Complex64>::from_fn(m + p, m, |i, j| {
            if i < m {
                let d = if i == j { *lam } else { Complex64::new(0.0, 0.0) };
                d - Complex64::new(s[(i, j)], 0.0)
            } else {
                Complex64::new(c[(i - m, j)], 0.0)
            }
        });
        let sv = pencil.singular_values();
        let smax = sv.max().max(f64::MIN_POSITIVE);
        if sv.iter().filter(|&&x| x > 1e-10 * smax.max(1.0)).count() < m {
            return Ok(false);
        }
    }
    Ok(true)
}

fn hamiltonian(s: &Matrix, g: &Matrix) -> Matrix {
    let m = s.nrows();
    let mut h = Matrix::zeros(2 * m, 2 * m);
    h.view_mut((0, 0), (m, m)).copy_from(&s.transpose());
    h.view_mut((0, m), (m, m)).copy_from(&(-g));
    h.view_mut((m, 0), (m, m)).copy_from(&(-Matrix::identity(m, m)));
    h.view_mut((m, m), (m, m)).copy_from(&(-s));
    h
}

/// Stabilizing solution from the Hamiltonian matrix sign function.
fn sign_function_solve(s: &Matrix, g: &Matrix) -> Result<Matrix> {
    let m = s.nrows();
    let mut z = hamiltonian(s, g);
    let mut scaling = true;
    let mut converged = false;
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        // determinant scaling |det Z|^(-1/2m)
        let c = if scaling {
            let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
            (-log_det / (2 * m) as f64).exp()
        } else {
            1.0
        };
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::numerical("solve_care", "singular iterate in sign iteration"))?;
        let next = (&z * c + inv / c) * 0.5;
        let change = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if !size.is_finite() {
            return Err(Error::numerical("solve_care", "sign iteration diverged"));
        }
        if change <= 1e-2 * size {
            scaling = false;
        }
        if change <= 1e-13 * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(
            "solve_care",
            format!("sign iteration did not converge in {SIGN_MAX_ITER} steps"),
        ));
    }
    // (W + I)[I; P] = 0  ⇒  [W12; W22 + I] P = −[W11 + I; W21]
    let w = z;
    let mut lhs = Matrix::zeros(2 * m, m);
    let mut rhs = Matrix::zeros(2 * m, m);
    lhs.view_mut((0, 0), (m, m)).copy_from(&w.view((0, m), (m, m)));
    lhs.view_mut((m, 0), (m, m))
        .copy_from(&(w.view((m, m), (m, m)) + Matrix::identity(m, m)));
    rhs.view_mut((0, 0), (m, m))
        .copy_from(&(-(w.view((0, 0), (m, m)) + Matrix::identity(m, m))));
    rhs.view_mut((m, 0), (m, m)).copy_from(&(-w.view((m, 0), (m, m))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 0.0)
        .map_err(|e| Error::numerical("solve_care", e.to_string()))?;
    Ok(symmetrize(&p))
}

/// Newton–Kleinman sweeps from a stabilizing `p0`.
///
/// Fails if the closed loop of any iterate is not Hurwitz or if the residual
/// never reaches the acceptance bound.
pub fn newton_refine(prob: &CareProblem, p0: &Matrix) -> Result<CareSolution> {
    let s = &prob.s;
    let g = prob.c.transpose() * &prob.c;
    let m = s.nrows();
    let scale = prob.scale();
    let mut p = p0.clone();
    let mut asymmetry = 0.0;
    let mut prev = f64::INFINITY;
    for iter in 0..=NEWTON_MAX_ITER {
        let residual = care_residual(&p, s, &g).norm();
        if !residual.is_finite() {
            return Err(Error::numerical("newton_refine", "non-finite residual"));
        }
        let stalled = residual > 0.5 * prev && residual <= RESIDUAL_TOL * scale;
        if residual <= NEWTON_TOL * scale || stalled || iter == NEWTON_MAX_ITER {
            if residual > RESIDUAL_TOL * scale {
                return Err(Error::numerical(
                    "newton_refine",
                    format!("residual {residual:.3e} after {iter} iterations"),
                ));
            }
            let p_sym = symmetrize(&p);
            let closed = s - &p_sym * &g;
            let max_re = spectrum(&closed)?.max_re();
            if max_re >= 0.0 {
                return Err(Error::numerical(
                    "newton_refine",
                    format!("converged to a non-stabilizing solution (max Re = {max_re:.3e})"),
                ));
            }
            let residual = care_residual(&p_sym, s, &g).norm();
            return Ok(CareSolution {
                p: p_sym,
                residual,
                closed_loop_max_re: max_re,
                asymmetry,
                newton_iterations: iter,
            });
        }
        prev = residual;
        let closed = s - &p * &g;
        if iter == 0 && spectrum(&closed)?.max_re() >= 0.0 {
            return Err(Error::numerical(
                "newton_refine",
                "initial guess is not stabilizing",
            ));
        }
        let forcing = &p * &g * &p + Matrix::identity(m, m);
        let next = solve_lyapunov(&closed, &forcing)?;
        asymmetry = (&next - next.transpose()).norm();
        p = symmetrize(&next);
    }
    unreachable!("loop returns on its last iteration")
}

/// Maximal solution of `P Sᵀ + S P − P CᵀC P + I = 0`.
pub fn solve_care(prob: &CareProblem) -> Result<CareSolution> {
    if !is_detectable(&prob.s, &prob.c)? {
        return Err(Error::Precondition {
            context: "solve_care",
            detail: "(C, S) is not detectable".into(),
        });
    }
    let g = prob.c.transpose() * &prob.c;
    let ham = hamiltonian(&prob.s, &g);
    let gap = spectrum(&ham)?
        .eigenvalues()
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    if gap < HAMILTONIAN_GAP {
        return Err(Error::numerical(
            "solve_care",
            format!("Hamiltonian eigenvalue within {gap:.3e} of the imaginary axis"),
        ));
    }
    let p0 = sign_function_solve(&prob.s, &g)?;
    let sol = newton_refine(prob, &p0)?;
    if Cholesky::new(sol.p.clone()).is_none() {
        return Err(Error::numerical("solve_care", "solution is not positive definite"));
    }
    Ok(sol)
}

/// `ℱ = P Cᵀ`.
pub fn gain(p: &Matrix, c: &Matrix) -> Result<Matrix> {
    if p.ncols() != c.ncols() {
        return Err(Error::dim(
            "gain",
            format!("C with {} columns", p.ncols()),
            format!("{}x{}", c.nrows(), c.ncols()),
        ));
    }
    Ok(p * c.transpose())
}

/// Per-agent cache of the Riccati solution for `companion(α) ⊗ I_p`.
#[derive(Debug, Clone)]
pub struct GainCache {
    p: usize,
    recompute_tol: f64,
    last_alpha: Option<Vector>,
    scalar_p: Matrix,
    lifted_p: Matrix,
    lifted_f: Matrix,
    solve_count: usize,
    cold_solves: usize,
}

impl GainCache {
    pub fn new(p: usize, recompute_tol: f64) -> Self {
        Self {
            p,
            recompute_tol,
            last_alpha: None,
            scalar_p: Matrix::zeros(0, 0),
            lifted_p: Matrix::zeros(0, 0),
            lifted_f: Matrix::zeros(0, 0),
            solve_count: 0,
            cold_solves: 0,
        }
    }

    pub fn recompute_tol(&self) -> f64 {
        self.recompute_tol
    }

    pub fn last_alpha(&self) -> Option<&Vector> {
        self.last_alpha.as_ref()
    }

    /// Fresh Riccati solves performed so far (warm or cold).
    pub fn solve_count(&self) -> usize {
        self.solve_count
    }

    /// Solves that fell back to the Hamiltonian method.
    pub fn cold_solves(&self) -> usize {
        self.cold_solves
    }

    /// `(ℱᵢ, 𝒫ᵢ)` for the coefficient vector `alpha`, re-solving only when
    /// `alpha` moved by more than `recompute_tol · (1 + ‖last_alpha‖)`.
    pub fn scheduled_gain(&mut self, alpha: &[f64]) -> Result<(&Matrix, &Matrix)> {
        if alpha.is_empty() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument(
                "coefficient vector must be nonempty and finite".into(),
            ));
        }
        let reuse = match &self.last_alpha {
            Some(last) if last.len() == alpha.len() => {
                let diff = last
                    .iter()
                    .zip(alpha)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                diff <= self.recompute_tol * (1.0 + last.norm())
            }
            _ => false,
        };
        if !reuse {
            self.refresh(alpha)?;
        }
        Ok((&self.lifted_f, &self.lifted_p))
    }

    fn refresh(&mut self, alpha: &[f64]) -> Result<()> {
        let n = alpha.len();
        let prob = CareProblem::new(scalar_companion(alpha), lifted_output(n, 1))?;
        let warm = match &self.last_alpha {
            Some(last) if last.len() == n => newton_refine(&prob, &self.scalar_p).ok(),
            _ => None,
        };
        let sol = match warm {
            Some(sol) => sol,
            None => {
                self.cold_solves += 1;
                solve_care(&prob)?
            }
        };
        self.solve_count += 1;
        let id = Matrix::identity(self.p, self.p);
        self.lifted_p = kron(&sol.p, &id);
        self.lifted_f = self.lifted_p.columns(0, self.p).into_owned();
        self.scalar_p = sol.p;
        self.last_alpha = Some(Vector::from_column_slice(alpha));
        Ok(())
    }
}

/// Free-function form of [`GainCache::scheduled_gain`] returning owned matrices.
pub fn scheduled_gain(alpha: &[f64], cache: &mut GainCache) -> Result<(Matrix, Matrix)> {
    let (f, p) = cache.scheduled_gain(alpha)?;
    Ok((f.clone(), p.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leader::companion;

    fn scalar(x: f64) -> Matrix {
        Matrix::from_element(1, 1, x)
    }

    #[test]
    fn scalar_zero_dynamics() {
        let sol = solve_care(&CareProblem::new(scalar(0.0), scalar(1.0)).unwrap()).unwrap();
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((sol.closed_loop_max_re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_maximal_root() {
        for &a in &[1.0, -3.0, 0.25, 7.0] {
            let sol = solve_care(&CareProblem::new(scalar(a), scalar(1.0)).unwrap()).unwrap();
            let want = a + (a * a + 1.0_f64).sqrt();
            assert!((sol.p[(0, 0)] - want).abs() < 1e-10 * want.max(1.0), "a = {a}");
        }
        let sol = solve_care(&CareProblem::new(scalar(1.0), scalar(1.0)).unwrap()).unwrap();
        assert!((sol.p[(0, 0)] - 2.414_213_56).abs() < 1e-8);
    }

    #[test]
    fn oscillator_problem() {
        let s = companion(&[0.0, 1.0], 1).unwrap();
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sol = solve_care(&CareProblem::new(s.clone(), c.clone()).unwrap()).unwrap();
        assert!(sol.residual <= 1e-10);
        assert_eq!(sol.p, sol.p.transpose());
        assert!(Cholesky::new(sol.p.clone()).is_some());
        assert!(sol.closed_loop_max_re < 0.0);
        // independent Newton iteration started at P = I (stabilizing here)
        let mut p = Matrix::identity(2, 2);
        let g = c.transpose() * &c;
        for _ in 0..30 {
            let a = &s - &p * &g;
            p = kron_lyapunov(&a, &(&p * &g * &p + Matrix::identity(2, 2))).unwrap();
        }
        assert!((p - &sol.p).norm() < 1e-10);
    }

    #[test]
    fn undetectable_is_precondition_error() {
        // unstable mode invisible to C
        let s = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let c = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let err = solve_care(&CareProblem::new(s, c).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Precondition { .. }), "{err}");
    }

    #[test]
    fn lyapunov_against_kronecker() {
        let a = Matrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 2.0, 0.3, 0.0, //
                -2.0, -1.0, 0.0, 0.5, //
                0.1, 0.0, -3.0, 1.0, //
                0.0, -0.4, 0.0, -0.5,
            ],
        );
        let q = Matrix::from_fn(4, 4, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let x = solve_lyapunov(&a, &q).unwrap();
        let y = kron_lyapunov(&a, &q).unwrap();
        assert!((x - y).norm() < 1e-12);
    }

    #[test]
    fn gain_cases() {
        assert_eq!(gain(&scalar(1.0), &scalar(1.0)).unwrap(), scalar(1.0));
        let f = gain(&Matrix::identity(2, 2), &Matrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        assert_eq!(f, Matrix::from_column_slice(2, 1, &[1.0, 0.0]));
        assert!(gain(&Matrix::identity(2, 2), &scalar(1.0)).is_err());
    }

    #[test]
    fn cache_reuses_identical_alpha() {
        let mut cache = GainCache::new(3, DEFAULT_RECOMPUTE_TOL);
        let alpha = [0.0, 5.0, 0.0, 4.0, 0.0];
        cache.scheduled_gain(&alpha).unwrap();
        assert_eq!(cache.solve_count(), 1);
        cache.scheduled_gain(&alpha).unwrap();
        assert_eq!(cache.solve_count(), 1);
    }

    #[test]
    fn cache_matches_full_lifted_solve() {
        let alpha = [0.0, 5.0, 0.0, 4.0, 0.0];
        let mut cache = GainCache::new(3, DEFAULT_RECOMPUTE_TOL);
        let (f, p) = scheduled_gain(&alpha, &mut cache).unwrap();
        let prob = CareProblem::new(companion(&alpha, 3).unwrap(), lifted_output(5, 3)).unwrap();
        let direct = solve_care(&prob).unwrap();
        assert!((&p - &direct.p).norm() < 1e-6);
        assert!((f - gain(&direct.p, &prob.c).unwrap()).norm() < 1e-6);
        assert!(care_residual(&p, &prob.s, &(prob.c.transpose() * &prob.c)).norm() < 1e-8);
    }

    #[test]
    fn cache_warm_starts_after_small_moves() {
        let mut cache = GainCache::new(1, 1e-6);
        let mut alpha = vec![0.0, 5.0, 0.0, 4.0, 0.0];
        cache.scheduled_gain(&alpha).unwrap();
        for k in 0..20 {
            alpha[k % 5] += 1e-3;
            cache.scheduled_gain(&alpha).unwrap();
        }
        assert_eq!(cache.solve_count(), 21);
        assert_eq!(cache.cold_solves(), 1);
    }

    #[test]
    fn cache_rejects_non_finite() {
        let mut cache = GainCache::new(1, 1e-6);
        assert!(cache.scheduled_gain(&[f64::NAN]).is_err());
        assert!(cache.scheduled_gain(&[]).is_err());
    }
}
