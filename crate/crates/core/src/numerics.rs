//! Dense real-matrix kernels: spectra, Kronecker products, the matrix
//! exponential and numerical rank.
//!
//! Matrices are plain [`nalgebra::DMatrix<f64>`] values. Every function here is
//! pure; nothing caches or mutates shared state.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Eigenvalues of a square real matrix, sorted by real part and then by
/// imaginary part (both ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<Complex64>,
}

impl Spectrum {
    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest real part (the spectral abscissa).
    pub fn max_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue modulus.
    pub fn radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.max_re() < 0.0
    }
}

fn cmp_eig(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

fn ensure_square(a: &Matrix, context: &'static str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim(
            context,
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    Ok(a.nrows())
}

/// Eigenvalues of `a` (Hessenberg QR with exceptional shifts, via `faer`).
pub fn spectrum(a: &Matrix) -> Result<Spectrum> {
    let n = ensure_square(a, "spectrum")?;
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
        });
    }
    if !all_finite(a) {
        return Err(Error::numerical("spectrum", "non-finite matrix entries"));
    }
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let mut eigenvalues: Vec<Complex64> = m
        .eigenvalues()
        .map_err(|e| Error::numerical("spectrum", format!("eigenvalue iteration failed: {e:?}")))?
        .into_iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    eigenvalues.sort_by(cmp_eig);
    Ok(Spectrum { eigenvalues })
}

/// `(max Re σ(A), min Re σ(A))`.
pub fn real_part_bounds(a: &Matrix) -> Result<(f64, f64)> {
    let s = spectrum(a)?;
    Ok((s.max_re(), s.min_re()))
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// `e^{A t}` by scaling and squaring with a Padé core.
pub fn expm(a: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(a, "expm")?;
    let scaled = a * t;
    if scaled.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("expm", "non-finite input"));
    }
    let e = scaled.exp();
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical(
            "expm",
            format!("overflow for ||A t|| = {:.3e}", scaled.norm()),
        ));
    }
    Ok(e)
}

/// Number of singular values above `tol` times the largest one.
pub fn rank_with_tolerance(a: &Matrix, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}

pub fn all_finite(a: &Matrix) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Monic polynomial `sⁿ + c₁ sⁿ⁻¹ + … + cₙ`; only the trailing coefficients
/// are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn monic(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "monic polynomial needs degree >= 1".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `(c₁, …, cₙ)`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &c| acc * s + c)
    }

    /// `Aⁿ + c₁Aⁿ⁻¹ + … + cₙI` by Horner's rule.
    pub fn eval_matrix(&self, a: &Matrix) -> Matrix {
        let n = a.nrows();
        let id = Matrix::identity(n, n);
        self.coeffs
            .iter()
            .fold(id.clone(), |acc, &c| &acc * a + &id * c)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.degree();
        let term = |k: usize| match k {
            0 => String::new(),
            1 => "s".to_string(),
            _ => format!("s^{k}"),
        };
        // `{:.N}` rounds coefficients to N decimals and drops those that vanish
        let precision = f.precision();
        let round = |x: f64| match precision {
            Some(d) => {
                let scale = 10f64.powi(d as i32);
                (x * scale).round() / scale
            }
            None => x,
        };
        write!(f, "{}", term(n))?;
        for (i, &c) in self.coeffs.iter().enumerate() {
            let c = round(c);
            if c == 0.0 {
                continue;
            }
            let k = n - 1 - i;
            let sign = if c < 0.0 { '-' } else { '+' };
            let mag = c.abs();
            if k == 0 {
                write!(f, " {sign} {mag}")?;
            } else if mag == 1.0 {
                write!(f, " {sign} {}", term(k))?;
            } else {
                write!(f, " {sign} {mag}{}", term(k))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn sec4_s0() -> Matrix {
        Matrix::from_row_slice(
            5,
            5,
            &[
                0., 0., 0., 0., 0., //
                0., 0., 1., 0., 0., //
                0., -1., 0., 0., 0., //
                0., 0., 0., 0., 2., //
                0., 0., 0., -2., 0.,
            ],
        )
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn identity_spectrum() {
        let s = spectrum(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(s.len(), 3);
        for z in s.eigenvalues() {
            assert!(close(*z, c(1.0, 0.0), 1e-14));
        }
    }

    #[test]
    fn rotation_spectrum_is_ordered() {
        let a = Matrix::from_row_slice(2, 2, &[0., 1., -1., 0.]);
        let s = spectrum(&a).unwrap();
        assert!(close(s.eigenvalues()[0], c(0.0, -1.0), 1e-14));
        assert!(close(s.eigenvalues()[1], c(0.0, 1.0), 1e-14));
    }

    #[test]
    fn non_square_spectrum_is_dimension_error() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(spectrum(&a), Err(Error::Dimension { .. })));
    }

    #[test]
    fn real_part_bounds_cases() {
        assert_eq!(real_part_bounds(&Matrix::identity(3, 3)).unwrap(), (1.0, 1.0));
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 2.0]));
        assert_eq!(real_part_bounds(&d).unwrap(), (2.0, -1.0));
        let (hi, lo) = real_part_bounds(&sec4_s0()).unwrap();
        assert!(hi.abs() < 1e-12 && lo.abs() < 1e-12);
    }

    #[test]
    fn kron_cases() {
        let b = Matrix::from_row_slice(2, 2, &[1., 2., 3., 4.]);
        let k = kron(&Matrix::identity(2, 2), &b);
        assert_eq!(k.view((0, 0), (2, 2)), b);
        assert_eq!(k.view((2, 2), (2, 2)), b);
        assert_eq!(k.view((0, 2), (2, 2)), Matrix::zeros(2, 2));

        let shift = Matrix::from_row_slice(2, 2, &[0., 1., 0., 0.]);
        let k = kron(&shift, &Matrix::identity(3, 3));
        assert_eq!(k.shape(), (6, 6));
        assert_eq!(k.view((0, 3), (3, 3)), Matrix::identity(3, 3));
        assert_eq!(k.sum(), 3.0);

        let k = kron(&Matrix::from_element(1, 1, 2.0), &Matrix::from_element(1, 1, 3.0));
        assert_eq!(k[(0, 0)], 6.0);
    }

    #[test]
    fn expm_zero_and_rotation() {
        let e = expm(&Matrix::zeros(4, 4), 3.0).unwrap();
        assert_eq!(e, Matrix::identity(4, 4));
        let a = Matrix::from_row_slice(2, 2, &[0., 1., -1., 0.]);
        for &t in &[0.0, 0.3, 1.7, 6.0, 25.0] {
            let e = expm(&a, t).unwrap();
            let want = Matrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            assert!((e - want).norm() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn expm_sec4_leader_closed_form() {
        let v0 = Vector::from_vec(vec![1., 0., 1., 0., 1.]);
        for &t in &[0.0, 0.5, 2.0, 9.3] {
            let v = expm(&sec4_s0(), t).unwrap() * &v0;
            let want = Vector::from_vec(vec![
                1.0,
                t.sin(),
                t.cos(),
                (2.0 * t).sin(),
                (2.0 * t).cos(),
            ]);
            assert!((v - want).norm() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn expm_overflow_is_error() {
        let a = Matrix::from_element(1, 1, 1.0);
        assert!(matches!(expm(&a, 1e4), Err(Error::Numerical { .. })));
    }

    #[test]
    fn rank_cases() {
        assert_eq!(rank_with_tolerance(&Matrix::identity(3, 3), DEFAULT_RANK_TOL), 3);
        assert_eq!(rank_with_tolerance(&Matrix::zeros(3, 3), DEFAULT_RANK_TOL), 0);
        assert_eq!(rank_with_tolerance(&Matrix::from_element(2, 2, 1.0), DEFAULT_RANK_TOL), 1);
    }

    #[test]
    fn polynomial_display_and_eval() {
        let p = Polynomial::monic(vec![0., 5., 0., 4., 0.]).unwrap();
        assert_eq!(p.to_string(), "s^5 + 5s^3 + 4s");
        let q = Polynomial::monic(vec![-5., 6.]).unwrap();
        assert_eq!(q.to_string(), "s^2 - 5s + 6");
        let noisy = Polynomial::monic(vec![1e-16, 5.000000000001, 0.0, 4.0, -2e-15]).unwrap();
        assert_eq!(format!("{noisy:.6}"), "s^5 + 5s^3 + 4s");
        assert_eq!(q.eval(c(2.0, 0.0)), c(0.0, 0.0));
        assert!(Polynomial::monic(vec![]).is_err());
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![2., 3.]));
        assert_eq!(q.eval_matrix(&a), Matrix::zeros(2, 2));
    }
}
