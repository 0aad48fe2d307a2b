//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use lrt_core::{Matrix, Vector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random matrix with the given singular values (rows >= values, cols >= values).
pub fn with_spectrum(rows: usize, cols: usize, sigma: &[f64], rng: &mut impl Rng) -> Matrix {
    let k = sigma.len();
    let u = randn(rows, k, rng).qr().q();
    let v = randn(cols, k, rng).qr().q();
    let s = Matrix::from_diagonal(&Vector::from_column_slice(sigma));
    &u * s * v.transpose()
}

/// One-sided Jacobi SVD. Returns `(U, sigma, V)` with `sigma` non-increasing
/// and `U` of shape `m x min(m, n)`.
pub fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = Matrix::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    alpha += w[(i, p)] * w[(i, p)];
                    beta += w[(i, q)] * w[(i, q)];
                    gamma += w[(i, p)] * w[(i, q)];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        sigma.push(norms[j]);
        if norms[j] > 0.0 {
            u.set_column(k, &(w.column(j) / norms[j]));
        }
        vs.set_column(k, &v.column(j));
    }
    (u, sigma, vs)
}

pub fn oracle_nuclear(a: &Matrix) -> f64 {
    jacobi_svd(a).1.iter().sum()
}

/// Largest singular value by power iteration on `A'A`.
pub fn power_spectral(a: &Matrix) -> f64 {
    let ata = a.transpose() * a;
    let mut x = Vector::from_fn(ata.nrows(), |i, _| 1.0 + 0.1 * i as f64);
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        let y = &ata * &x;
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / norm;
        if (next - lambda).abs() <= 1e-16 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// Least-squares residual norm of `y` over the columns of `a` via the normal
/// equations `A'A x = A'y`.
pub fn normal_equations_residual(a: &Matrix, y: &Vector) -> f64 {
    let gram = a.transpose() * a;
    let rhs = a.transpose() * y;
    let x = gram.cholesky().expect("well-conditioned columns").solve(&rhs);
    (y - a * x).norm()
}

/// Reference bilinear resampler in floating-point source coordinates.
pub fn bilinear_oracle(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    let sample = |x: isize, y: isize| {
        let x = x.clamp(0, sw as isize - 1) as usize;
        let y = y.clamp(0, sh as isize - 1) as usize;
        src[y * sw + x]
    };
    let mut out = Vec::with_capacity(dw * dh);
    for oy in 0..dh {
        for ox in 0..dw {
            let fx = ((ox as f64 + 0.5) * sw as f64 / dw as f64 - 0.5).max(0.0);
            let fy = ((oy as f64 + 0.5) * sh as f64 / dh as f64 - 0.5).max(0.0);
            let (x0, y0) = (fx.floor() as isize, fy.floor() as isize);
            let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
            let v = (1.0 - ax) * (1.0 - ay) * sample(x0, y0)
                + ax * (1.0 - ay) * sample(x0 + 1, y0)
                + (1.0 - ax) * ay * sample(x0, y0 + 1)
                + ax * ay * sample(x0 + 1, y0 + 1);
            out.push(v);
        }
    }
    out
}

/// Central difference `(f(x + eps E) - f(x - eps E)) / (2 eps)`.
pub fn central_difference(f: impl Fn(&Matrix) -> f64, x: &Matrix, e: &Matrix, eps: f64) -> f64 {
    (f(&(x + e * eps)) - f(&(x - e * eps))) / (2.0 * eps)
}
