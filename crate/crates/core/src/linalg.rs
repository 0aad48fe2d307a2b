//! Dense matrix primitives: SVD, spectral and nuclear norms, numerical rank
//! and a random subgradient of the nuclear norm.
//!
//! Matrices are `nalgebra::DMatrix<f64>` (column-major). Every public entry
//! point rejects non-finite input.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_SWEEPS: usize = 0; // 0 = run until convergence

/// Thin singular value decomposition `A = U diag(s) V'`.
///
/// With `k = min(m, n)`, `u` is `m x k`, `v` is `n x k` and the singular
/// values are sorted non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vector,
    pub v: Matrix,
}

impl Svd {
    /// Number of singular values `>= delta`.
    pub fn rank_at(&self, delta: f64) -> usize {
        self.singular_values.iter().filter(|&&s| s >= delta).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    pub fn largest(&self) -> f64 {
        self.singular_values.get(0).copied().unwrap_or(0.0)
    }
}

/// Threshold below which a singular value is treated as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Threshold {
    /// A fixed `delta`.
    Absolute(f64),
    /// `delta = factor * sigma_1(A)`.
    Relative(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Relative(1e-4)
    }
}

impl Threshold {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Threshold::Absolute(v) | Threshold::Relative(v) if v > 0.0 && v.is_finite() => Ok(()),
            Threshold::Absolute(v) | Threshold::Relative(v) => Err(Error::InvalidThreshold(v)),
        }
    }

    /// Resolves to an absolute delta for a matrix whose largest singular
    /// value is `sigma_max`. A relative policy on the zero matrix resolves to
    /// the smallest positive normal so that every singular value counts as
    /// small.
    pub fn resolve(&self, sigma_max: f64) -> f64 {
        match *self {
            Threshold::Absolute(v) => v,
            Threshold::Relative(f) => (f * sigma_max).max(f64::MIN_POSITIVE),
        }
    }
}

pub fn ensure_finite(a: &Matrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::EmptyMatrix {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    for (j, col) in a.column_iter().enumerate() {
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    Ok(())
}

fn ensure_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(delta))
    }
}

pub fn svd(a: &Matrix) -> Result<Svd> {
    ensure_finite(a)?;
    Ok(svd_unchecked(a))
}

pub(crate) fn svd_unchecked(a: &Matrix) -> Svd {
    let k = a.nrows().min(a.ncols());
    let dec = nalgebra::SVD::try_new(a.clone(), true, true, SVD_EPS, SVD_MAX_SWEEPS)
        .expect("SVD iteration without a cap always converges");
    let u = dec.u.expect("U requested");
    let v = dec.v_t.expect("V' requested").transpose();
    let sv = dec.singular_values;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));

    let mut su = Matrix::zeros(a.nrows(), k);
    let mut sv_sorted = Vector::zeros(k);
    let mut sv_mat = Matrix::zeros(a.ncols(), k);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        sv_mat.set_column(dst, &v.column(src));
        sv_sorted[dst] = sv[src].max(0.0);
    }
    Svd {
        u: su,
        singular_values: sv_sorted,
        v: sv_mat,
    }
}

/// Singular values only, sorted non-increasing. An empty matrix has none.
pub(crate) fn singular_values_unchecked(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let dec = nalgebra::SVD::try_new(a.clone(), false, false, SVD_EPS, SVD_MAX_SWEEPS)
        .expect("SVD iteration without a cap always converges");
    let mut s: Vec<f64> = dec.singular_values.iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    ensure_finite(a)?;
    Ok(singular_values_unchecked(a))
}

/// Sum of singular values.
pub fn nuclear_norm(a: &Matrix) -> Result<f64> {
    ensure_finite(a)?;
    Ok(nuclear_norm_unchecked(a))
}

/// Nuclear norm that treats a matrix with no columns (or rows) as zero.
pub(crate) fn nuclear_norm_unchecked(a: &Matrix) -> f64 {
    singular_values_unchecked(a).iter().sum()
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    ensure_finite(a)?;
    Ok(spectral_norm_unchecked(a))
}

pub(crate) fn spectral_norm_unchecked(a: &Matrix) -> f64 {
    singular_values_unchecked(a).first().copied().unwrap_or(0.0)
}

/// Number of singular values `>= delta`.
pub fn numerical_rank(a: &Matrix, delta: f64) -> Result<usize> {
    ensure_delta(delta)?;
    ensure_finite(a)?;
    Ok(singular_values_unchecked(a)
        .iter()
        .filter(|&&s| s >= delta)
        .count())
}

/// Numerical rank under a threshold policy.
pub fn numerical_rank_with(a: &Matrix, threshold: Threshold) -> Result<usize> {
    threshold.validate()?;
    ensure_finite(a)?;
    let s = singular_values_unchecked(a);
    let delta = threshold.resolve(s.first().copied().unwrap_or(0.0));
    Ok(s.iter().filter(|&&v| v >= delta).count())
}

/// Draws one element of the nuclear-norm subdifferential at `a`.
///
/// With `A = U S V'` and `s` singular values below `delta`, the result is
/// `U1 V1' + U2 B V2'` where `U1`, `V1` hold the `n - s` leading singular
/// vectors, `U2` spans the remaining `m - n + s` left directions and `B` is a
/// standard Gaussian `(m - n + s) x s` matrix divided by its spectral norm.
/// For `m < n` the subgradient of `A'` is transposed.
pub fn norm_subdifferential<R: Rng + ?Sized>(a: &Matrix, delta: f64, rng: &mut R) -> Result<Matrix> {
    ensure_delta(delta)?;
    ensure_finite(a)?;
    Ok(subdifferential_unchecked(a, delta, rng))
}

/// [`norm_subdifferential`] with `delta` resolved from a policy against
/// `sigma_1(a)`.
pub fn norm_subdifferential_with<R: Rng + ?Sized>(
    a: &Matrix,
    threshold: Threshold,
    rng: &mut R,
) -> Result<Matrix> {
    threshold.validate()?;
    ensure_finite(a)?;
    Ok(subdifferential_policy_unchecked(a, threshold, rng))
}

pub(crate) fn subdifferential_policy_unchecked<R: Rng + ?Sized>(
    a: &Matrix,
    threshold: Threshold,
    rng: &mut R,
) -> Matrix {
    nuclear_and_subgradient(a, threshold, rng).1
}

/// Nuclear norm and one subgradient from a single SVD.
pub(crate) fn nuclear_and_subgradient<R: Rng + ?Sized>(
    a: &Matrix,
    threshold: Threshold,
    rng: &mut R,
) -> (f64, Matrix) {
    if a.nrows() < a.ncols() {
        let (f, g) = nuclear_and_subgradient(&a.transpose(), threshold, rng);
        return (f, g.transpose());
    }
    let dec = svd_unchecked(a);
    let delta = threshold.resolve(dec.largest());
    (dec.singular_values.sum(), subdifferential_tall(&dec, a.nrows(), delta, rng))
}

pub(crate) fn subdifferential_unchecked<R: Rng + ?Sized>(a: &Matrix, delta: f64, rng: &mut R) -> Matrix {
    if a.nrows() < a.ncols() {
        return subdifferential_unchecked(&a.transpose(), delta, rng).transpose();
    }
    let dec = svd_unchecked(a);
    subdifferential_tall(&dec, a.nrows(), delta, rng)
}

fn subdifferential_tall<R: Rng + ?Sized>(dec: &Svd, m: usize, delta: f64, rng: &mut R) -> Matrix {
    let n = dec.v.nrows();
    let s = dec.singular_values.iter().filter(|&&v| v < delta).count();
    let keep = n - s;

    let u1 = dec.u.columns(0, keep);
    let v1 = dec.v.columns(0, keep);
    let mut g = u1 * v1.transpose();
    if s == 0 {
        return g;
    }

    // U2 = [U_small, U_perp] with U_perp the orthogonal complement of the thin
    // U. Writing B = [B_top; B_bot], U_perp * B_bot for Gaussian B_bot has the
    // law of (I - U U') W for Gaussian W (m x s), so U2 B is formed without
    // completing U to a full basis. ||U2 B|| = ||B|| since U2 is orthonormal.
    let u_small = dec.u.columns(keep, s);
    let b_top = gaussian(s, s, rng);
    let mut ub = u_small * b_top;
    if m > n {
        let w = gaussian(m, s, rng);
        let proj = &dec.u * (dec.u.transpose() * &w);
        ub += w - proj;
    }
    let scale = spectral_norm_unchecked(&ub);
    if scale > 0.0 {
        ub /= scale;
    }
    let v2 = dec.v.columns(keep, s);
    g += ub * v2.transpose();
    g
}

pub(crate) fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    // Column-major fill order keeps draws reproducible for a given seed.
    let mut m = Matrix::zeros(rows, cols);
    for v in m.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    m
}

/// `trace(A' B)`.
pub fn frobenius_inner(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> Matrix {
        Matrix::from_diagonal(&Vector::from_column_slice(values))
    }

    #[test]
    fn identity_singular_values() {
        let d = svd(&Matrix::identity(3, 3)).unwrap();
        assert_eq!(d.singular_values.as_slice(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_svd_and_norms() {
        let a = diag(&[1.0, 3.0, 2.0]);
        let d = svd(&a).unwrap();
        for (got, want) in d.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        // U and V are signed permutations; |U| == |V| entrywise.
        for (u, v) in d.u.iter().zip(d.v.iter()) {
            assert!((u.abs() - v.abs()).abs() < 1e-14);
        }
        assert!((nuclear_norm(&a).unwrap() - 6.0).abs() < 1e-14);
        assert!((spectral_norm(&a).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_norms() {
        let z = Matrix::zeros(4, 4);
        assert_eq!(nuclear_norm(&z).unwrap(), 0.0);
        assert_eq!(numerical_rank(&z, 1e-3).unwrap(), 0);
    }

    #[test]
    fn unit_outer_product_has_unit_spectral_norm() {
        let u = Vector::from_column_slice(&[0.6, 0.8, 0.0]);
        let v = Vector::from_column_slice(&[0.0, 1.0]);
        let a = &u * v.transpose();
        assert!((spectral_norm(&a).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_rank() {
        assert_eq!(numerical_rank(&Matrix::identity(3, 3), 0.5).unwrap(), 3);
    }

    #[test]
    fn rejects_non_finite_and_bad_delta() {
        let mut a = Matrix::identity(2, 2);
        a[(1, 0)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::NonFinite { row: 1, col: 0 })));
        assert!(matches!(nuclear_norm(&a), Err(Error::NonFinite { .. })));
        let b = Matrix::identity(2, 2);
        assert!(matches!(numerical_rank(&b, 0.0), Err(Error::InvalidThreshold(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(norm_subdifferential(&b, -1.0, &mut rng).is_err());
        assert!(Threshold::Relative(0.0).validate().is_err());
    }

    #[test]
    fn full_rank_subgradient_is_polar_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = gaussian(6, 4, &mut rng);
        let g = norm_subdifferential(&a, 1e-8, &mut rng).unwrap();
        let d = svd(&a).unwrap();
        let polar = &d.u * d.v.transpose();
        assert!((&g - polar).amax() < 1e-12);
        assert!((frobenius_inner(&g, &a) - nuclear_norm(&a).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn zero_matrix_subgradient_has_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (m, n) in [(5, 3), (3, 3), (2, 6)] {
            let g = norm_subdifferential(&Matrix::zeros(m, n), 1e-6, &mut rng).unwrap();
            assert_eq!(g.shape(), (m, n));
            assert!((spectral_norm(&g).unwrap() - 1.0).abs() < 1e-12);
        }
        let g = norm_subdifferential_with(&Matrix::zeros(4, 2), Threshold::default(), &mut rng).unwrap();
        assert!((spectral_norm(&g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_input_dispatches_through_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(3, 7, &mut rng);
        let g = norm_subdifferential(&a, 1e-8, &mut rng).unwrap();
        assert_eq!(g.shape(), (3, 7));
        assert!((frobenius_inner(&g, &a) - nuclear_norm(&a).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn relative_threshold_on_zero_matrix_is_positive() {
        assert!(Threshold::Relative(1e-4).resolve(0.0) > 0.0);
        assert_eq!(Threshold::Absolute(0.25).resolve(100.0), 0.25);
    }
}
