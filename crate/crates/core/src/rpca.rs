//! Robust PCA: split `M` into low-rank `L` and sparse `S` by approximately
//! solving `min ||L||_* + beta ||S||_1  s.t.  M = L + S` with an inexact
//! augmented Lagrangian method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, svd_unchecked, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpcaConfig {
    /// Sparsity weight; `None` means `1 / sqrt(max(rows, cols))`.
    pub beta: Option<f64>,
    /// Stop once `||M - L - S||_F / ||M||_F < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RpcaConfig {
    fn default() -> Self {
        Self {
            beta: None,
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

impl RpcaConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidConfig(format!("rpca beta must be > 0, got {b}")));
            }
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!("rpca tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("rpca max_iter must be >= 1".into()));
        }
        Ok(())
    }

    pub fn beta_for(&self, rows: usize, cols: usize) -> f64 {
        self.beta
            .unwrap_or_else(|| 1.0 / (rows.max(cols) as f64).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpcaResult {
    pub low_rank: Matrix,
    pub sparse: Matrix,
    pub converged: bool,
    pub iterations_used: usize,
    /// `||M - L - S||_F / ||M||_F` at exit (0 for the zero matrix).
    pub residual: f64,
}

const PENALTY_GROWTH: f64 = 1.05;
const PENALTY_CAP: f64 = 1e7;
const INITIAL_PENALTY: f64 = 1.25;

fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Singular value thresholding: `U shrink(S, tau) V'`.
fn svt(x: &Matrix, tau: f64) -> Matrix {
    let dec = svd_unchecked(x);
    let kept = dec.singular_values.iter().take_while(|&&s| s > tau).count();
    let mut out = Matrix::zeros(x.nrows(), x.ncols());
    for j in 0..kept {
        let s = dec.singular_values[j] - tau;
        out += (dec.u.column(j) * s) * dec.v.column(j).transpose();
    }
    out
}

pub fn rpca_decompose(m: &Matrix, cfg: &RpcaConfig) -> Result<RpcaResult> {
    cfg.validate()?;
    ensure_finite(m)?;
    let (rows, cols) = m.shape();

    let norm_fro = m.norm();
    if norm_fro == 0.0 {
        return Ok(RpcaResult {
            low_rank: Matrix::zeros(rows, cols),
            sparse: Matrix::zeros(rows, cols),
            converged: true,
            iterations_used: 0,
            residual: 0.0,
        });
    }

    let beta = cfg.beta_for(rows, cols);
    let norm_two = svd_unchecked(m).largest();
    let norm_inf = m.amax() / beta;
    let mut dual = m / norm_two.max(norm_inf);
    let mut mu = INITIAL_PENALTY / norm_two;
    let mu_max = mu * PENALTY_CAP;

    let mut low_rank = Matrix::zeros(rows, cols);
    let mut sparse = Matrix::zeros(rows, cols);
    let mut residual = f64::INFINITY;
    let mut iterations_used = 0;

    while iterations_used < cfg.max_iter {
        iterations_used += 1;
        let inv_mu = 1.0 / mu;

        low_rank = svt(&(m - &sparse + &dual * inv_mu), inv_mu);

        let target = m - &low_rank + &dual * inv_mu;
        let shrink = beta * inv_mu;
        sparse = target.map(|x| soft_threshold(x, shrink));

        let gap = m - &low_rank - &sparse;
        dual += &gap * mu;
        mu = (mu * PENALTY_GROWTH).min(mu_max);

        residual = gap.norm() / norm_fro;
        if residual < cfg.tol {
            break;
        }
    }

    Ok(RpcaResult {
        low_rank,
        sparse,
        converged: residual < cfg.tol,
        iterations_used,
        residual,
    })
}
