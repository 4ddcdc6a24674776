//! The leader signal generator `v̇₀ = S₀v₀, y₀ = C₀v₀` and its lift into
//! observable canonical form driven by the minimal polynomial of `S₀`.
//!
//! If `sⁿ + α₁sⁿ⁻¹ + … + αₙ` annihilates `S₀`, the stacked output derivatives
//! `ζ₀ = col(y₀, ẏ₀, …, y₀⁽ⁿ⁻¹⁾)` obey `ζ̇₀ = 𝒮₀ζ₀`, `y₀ = 𝒞₀ζ₀` with
//! `𝒮₀ = companion(α) ⊗ I_p` and `𝒞₀ = [1 0 ⋯ 0] ⊗ I_p`. Followers only ever
//! need `α` and `y₀` to reconstruct this system.

use crate::error::{Error, Result};
use crate::numerics::{expm, kron, rank_with_tolerance, Matrix, Polynomial, Vector};

/// Coefficient solves worse conditioned than this are rejected.
const MAX_COEFF_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSystem {
    s0: Matrix,
    c0: Matrix,
    v0_init: Vector,
}

impl LeaderSystem {
    pub fn new(s0: Matrix, c0: Matrix, v0_init: Vector) -> Result<Self> {
        let q = s0.nrows();
        if q == 0 || s0.ncols() != q {
            return Err(Error::dim(
                "LeaderSystem::S0",
                "nonempty square matrix",
                format!("{}x{}", s0.nrows(), s0.ncols()),
            ));
        }
        if c0.nrows() == 0 || c0.ncols() != q {
            return Err(Error::dim(
                "LeaderSystem::C0",
                format!("p x {q}"),
                format!("{}x{}", c0.nrows(), c0.ncols()),
            ));
        }
        if v0_init.len() != q {
            return Err(Error::dim("LeaderSystem::v0", q, v0_init.len()));
        }
        let finite = s0.iter().chain(c0.iter()).chain(v0_init.iter()).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("leader data must be finite".into()));
        }
        Ok(Self { s0, c0, v0_init })
    }

    /// The five-state, three-output leader used throughout the examples:
    /// a constant plus sinusoids at frequencies 1 and 2.
    pub fn reference() -> Self {
        let s0 = Matrix::from_row_slice(
            5,
            5,
            &[
                0., 0., 0., 0., 0., //
                0., 0., 1., 0., 0., //
                0., -1., 0., 0., 0., //
                0., 0., 0., 0., 2., //
                0., 0., 0., -2., 0.,
            ],
        );
        let c0 = Matrix::from_row_slice(
            3,
            5,
            &[
                0.5, 0., 0., 0., 0., //
                0., 1., 0., 0., 0., //
                0., 0., 0., 0., 2.,
            ],
        );
        let v0 = Vector::from_vec(vec![1., 0., 1., 0., 1.]);
        Self::new(s0, c0, v0).expect("reference leader is well formed")
    }

    pub fn s0(&self) -> &Matrix {
        &self.s0
    }

    pub fn c0(&self) -> &Matrix {
        &self.c0
    }

    pub fn v0_init(&self) -> &Vector {
        &self.v0_init
    }

    /// State dimension `q`.
    pub fn q(&self) -> usize {
        self.s0.nrows()
    }

    /// Output dimension `p`.
    pub fn p(&self) -> usize {
        self.c0.nrows()
    }
}

/// Minimal-polynomial data and the lifted observable pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalLift {
    pub alpha0: Vector,
    pub s_script0: Matrix,
    pub c_script0: Matrix,
    pub zeta0_init: Vector,
    p: usize,
}

impl CanonicalLift {
    /// Minimal-polynomial degree `n`.
    pub fn n(&self) -> usize {
        self.alpha0.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn polynomial(&self) -> Polynomial {
        Polynomial::monic(self.alpha0.iter().copied().collect()).expect("degree >= 1")
    }
}

/// Minimal polynomial of `s0` from the first linear dependence among
/// `vec(I), vec(S), vec(S²), …`, detected with relative rank tolerance `tol`.
pub fn minimal_polynomial(s0: &Matrix, tol: f64) -> Result<Polynomial> {
    let q = s0.nrows();
    if q == 0 || s0.ncols() != q {
        return Err(Error::dim(
            "minimal_polynomial",
            "nonempty square matrix",
            format!("{}x{}", s0.nrows(), s0.ncols()),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank tolerance must be > 0, got {tol}")));
    }

    // Columns are vec(S^k) normalized to unit length; `scales` keeps the norms.
    let mut basis = Matrix::zeros(q * q, q + 1);
    let mut scales = vec![0.0; q + 1];
    let mut power = Matrix::identity(q, q);
    let mut degree = None;
    for k in 0..=q {
        if k > 0 {
            power = &power * s0;
        }
        let norm = power.norm();
        scales[k] = norm;
        if norm > 0.0 {
            basis.set_column(k, &Vector::from_iterator(q * q, power.iter().map(|x| x / norm)));
        }
        if k > 0 {
            let cols = basis.columns(0, k + 1).into_owned();
            if norm == 0.0 || rank_with_tolerance(&cols, tol) <= k {
                degree = Some(k);
                break;
            }
        }
    }
    // Cayley-Hamilton bounds the degree by q, so dependence must show up.
    let n = degree.ok_or_else(|| {
        Error::numerical("minimal_polynomial", "no linear dependence among powers up to S^q")
    })?;

    let lower = basis.columns(0, n).into_owned();
    let svd = lower.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_COEFF_CONDITION {
        return Err(Error::numerical(
            "minimal_polynomial",
            format!(
                "coefficient solve has condition number {cond:.3e}; \
                 supply exact input or loosen the rank tolerance"
            ),
        ));
    }
    // Σ_k c_k u_k = -u_n · scale_n, with c_k = α_{n-k} · scale_k.
    let rhs = -basis.column(n) * scales[n];
    let c = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::numerical("minimal_polynomial", e.to_string()))?;
    let mut alpha = vec![0.0; n];
    for k in 0..n {
        alpha[n - 1 - k] = if scales[k] > 0.0 { c[k] / scales[k] } else { 0.0 };
    }
    let poly = Polynomial::monic(alpha)?;

    let residual = poly.eval_matrix(s0).norm();
    let bound = tol * (q as f64 + 1.0) * s0.norm().powi(n as i32).max(1.0);
    if residual > bound {
        return Err(Error::numerical(
            "minimal_polynomial",
            format!("annihilation residual {residual:.3e} exceeds {bound:.3e}"),
        ));
    }
    Ok(poly)
}

/// Scalar companion matrix with superdiagonal ones and last row
/// `(-αₙ, …, -α₁)`.
pub fn scalar_companion(alpha: &[f64]) -> Matrix {
    let n = alpha.len();
    let mut m = Matrix::zeros(n, n);
    for r in 0..n.saturating_sub(1) {
        m[(r, r + 1)] = 1.0;
    }
    for c in 0..n {
        m[(n - 1, c)] = -alpha[n - 1 - c];
    }
    m
}

/// `scalar_companion(alpha) ⊗ I_p`.
pub fn companion(alpha: &[f64], p: usize) -> Result<Matrix> {
    if alpha.is_empty() || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "companion needs n >= 1 and p >= 1 (got n = {}, p = {p})",
            alpha.len()
        )));
    }
    Ok(kron(&scalar_companion(alpha), &Matrix::identity(p, p)))
}

/// `[1 0 ⋯ 0] ⊗ I_p`, the lifted output map.
pub fn lifted_output(n: usize, p: usize) -> Matrix {
    let mut e1 = Matrix::zeros(1, n);
    e1[(0, 0)] = 1.0;
    kron(&e1, &Matrix::identity(p, p))
}

/// Writes `(companion(alpha) ⊗ I_p) ζ` into `out` without forming the matrix.
pub fn apply_companion(alpha: &[f64], p: usize, zeta: &[f64], out: &mut [f64]) {
    let n = alpha.len();
    debug_assert_eq!(zeta.len(), n * p);
    debug_assert_eq!(out.len(), n * p);
    out[..(n - 1) * p].copy_from_slice(&zeta[p..]);
    let last = &mut out[(n - 1) * p..];
    last.fill(0.0);
    for c in 0..n {
        let a = alpha[n - 1 - c];
        if a != 0.0 {
            for (o, z) in last.iter_mut().zip(&zeta[c * p..(c + 1) * p]) {
                *o -= a * z;
            }
        }
    }
}

pub fn observability_matrix(c: &Matrix, a: &Matrix) -> Matrix {
    let m = a.nrows();
    let p = c.nrows();
    let mut o = Matrix::zeros(p * m, m);
    let mut block = c.clone();
    for k in 0..m {
        o.view_mut((k * p, 0), (p, m)).copy_from(&block);
        block = &block * a;
    }
    o
}

pub fn is_observable(c: &Matrix, a: &Matrix, tol: f64) -> bool {
    rank_with_tolerance(&observability_matrix(c, a), tol) == a.nrows()
}

pub fn canonical_lift(sys: &LeaderSystem, tol: f64) -> Result<CanonicalLift> {
    let poly = minimal_polynomial(sys.s0(), tol)?;
    let n = poly.degree();
    let p = sys.p();
    let alpha0 = Vector::from_column_slice(poly.coeffs());
    let s_script0 = companion(poly.coeffs(), p)?;
    let c_script0 = lifted_output(n, p);

    let mut zeta0_init = Vector::zeros(n * p);
    let mut v = sys.v0_init().clone();
    for k in 0..n {
        if k > 0 {
            v = sys.s0() * v;
        }
        zeta0_init.rows_mut(k * p, p).copy_from(&(sys.c0() * &v));
    }
    Ok(CanonicalLift {
        alpha0,
        s_script0,
        c_script0,
        zeta0_init,
        p,
    })
}

/// Exact leader state and output at time `t`.
pub fn leader_trajectory(sys: &LeaderSystem, t: f64) -> Result<(Vector, Vector)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let v = expm(sys.s0(), t)? * sys.v0_init();
    let y = sys.c0() * &v;
    Ok((v, y))
}
