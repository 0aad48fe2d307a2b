//! Orthogonal matching pursuit: `min ||y - D x||_2  s.t.  ||x||_0 <= s_max`.

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, Matrix, Vector};

/// Residual below which pursuit stops early.
pub const RESIDUAL_STOP: f64 = 1e-10;

/// Pursuit also stops once the best normalized correlation falls below this
/// fraction of the residual norm, i.e. the residual is numerically orthogonal
/// to every remaining atom.
const ORTHOGONAL_STOP: f64 = 1e-10;

const ZERO_COLUMN: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    /// Selected column indices in selection order.
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// Residual norm after each selection; entry 0 is `||y||`.
    pub residual_path: Vec<f64>,
}

impl SparseCode {
    /// Dense coefficient vector of length `width`.
    pub fn dense(&self, width: usize) -> Vector {
        let mut x = Vector::zeros(width);
        for (&j, &c) in self.support.iter().zip(&self.coefficients) {
            x[j] = c;
        }
        x
    }
}

/// Least squares on the active columns via SVD.
fn least_squares(sub: &Matrix, y: &Vector) -> Vector {
    let dec = sub.clone().svd(true, true);
    let smax = dec.singular_values.max();
    let eps = smax * f64::EPSILON * sub.nrows().max(sub.ncols()) as f64;
    dec.solve(y, eps).expect("U and V' were computed")
}

pub fn omp_solve(dictionary: &Matrix, y: &Vector, s_max: usize) -> Result<SparseCode> {
    ensure_finite(dictionary)?;
    if y.len() != dictionary.nrows() {
        return Err(Error::DimensionMismatch {
            context: "signal length vs dictionary rows",
            expected: dictionary.nrows(),
            found: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("signal contains a non-finite entry".into()));
    }
    if s_max == 0 {
        return Err(Error::InvalidConfig("sparsity budget must be >= 1".into()));
    }

    let col_norms: Vec<f64> = dictionary.column_iter().map(|c| c.norm()).collect();
    let mut eligible: Vec<bool> = col_norms.iter().map(|&n| n > ZERO_COLUMN).collect();

    let mut support = Vec::new();
    let mut coefficients = Vec::new();
    let mut residual = y.clone();
    let mut residual_norm = residual.norm();
    let mut residual_path = vec![residual_norm];
    let limit = s_max.min(dictionary.ncols());

    while support.len() < limit && residual_norm > RESIDUAL_STOP {
        let correlations = dictionary.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..dictionary.ncols() {
            if !eligible[j] {
                continue;
            }
            let score = correlations[j].abs() / col_norms[j];
            // Strict comparison: the lowest index wins ties.
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        let Some((j, score)) = best else { break };
        if score <= ORTHOGONAL_STOP * residual_norm {
            break;
        }
        eligible[j] = false;
        support.push(j);

        let sub = dictionary.select_columns(&support);
        let x = least_squares(&sub, y);
        let candidate = y - &sub * &x;
        let candidate_norm = candidate.norm();
        coefficients = x.iter().copied().collect();
        residual = candidate;
        residual_norm = candidate_norm;
        residual_path.push(residual_norm);
    }

    Ok(SparseCode {
        support,
        coefficients,
        residual_norm,
        residual_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict() -> Matrix {
        Matrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.5, 0.0, //
                0.0, 1.0, 0.5, 0.0, //
                0.0, 0.0, 0.5, 0.0, //
                0.0, 0.0, 0.5, 0.0,
            ],
        )
    }

    #[test]
    fn signal_equal_to_a_column() {
        let d = dict();
        let y = d.column(2).into_owned();
        let code = omp_solve(&d, &y, 3).unwrap();
        assert_eq!(code.support, vec![2]);
        assert!((code.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(code.residual_norm < 1e-12);
    }

    #[test]
    fn orthogonal_signal_selects_nothing() {
        let d = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let y = Vector::from_column_slice(&[0.0, 0.0, 2.0]);
        let code = omp_solve(&d, &y, 2).unwrap();
        assert!(code.support.is_empty());
        assert_eq!(code.residual_norm, 2.0);
    }

    #[test]
    fn zero_dictionary_returns_empty_code() {
        let d = Matrix::zeros(3, 4);
        let y = Vector::from_column_slice(&[1.0, 2.0, 2.0]);
        let code = omp_solve(&d, &y, 2).unwrap();
        assert!(code.support.is_empty());
        assert_eq!(code.residual_norm, 3.0);
    }

    #[test]
    fn zero_columns_are_skipped() {
        let d = Matrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let y = Vector::from_column_slice(&[3.0, 4.0]);
        let code = omp_solve(&d, &y, 3).unwrap();
        let mut s = code.support.clone();
        s.sort();
        assert_eq!(s, vec![1, 2]);
        assert!(code.residual_norm < 1e-12);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let d = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let y = Vector::from_column_slice(&[1.0, 1.0]);
        let code = omp_solve(&d, &y, 1).unwrap();
        assert_eq!(code.support, vec![0]);
    }

    #[test]
    fn correlations_are_scale_invariant() {
        // Column 1 is long but less aligned with y; normalized selection picks 0.
        let d = Matrix::from_row_slice(2, 2, &[1.0, 100.0, 0.1, 100.0]);
        let y = Vector::from_column_slice(&[1.0, 0.0]);
        let code = omp_solve(&d, &y, 1).unwrap();
        assert_eq!(code.support, vec![0]);
    }

    #[test]
    fn bad_inputs_rejected() {
        let d = dict();
        assert!(omp_solve(&d, &Vector::zeros(3), 1).is_err());
        assert!(omp_solve(&d, &Vector::zeros(4), 0).is_err());
    }
}
