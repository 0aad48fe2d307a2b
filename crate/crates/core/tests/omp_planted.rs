mod common;

use common::*;
use lrt_core::omp::omp_solve;
use lrt_core::{Matrix, Vector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

fn unit_columns(mut d: Matrix) -> Matrix {
    for mut c in d.column_iter_mut() {
        let n = c.norm();
        c /= n;
    }
    d
}

#[test]
fn recovers_planted_sparse_signals() {
    let mut exact = 0;
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let d = unit_columns(randn(30, 60, &mut r));
        let mut x0 = Vector::zeros(60);
        let support: Vec<usize> = sample(&mut r, 60, 4).into_vec();
        for &j in &support {
            x0[j] = r.sample(StandardNormal);
        }
        let y = &d * &x0;
        let code = omp_solve(&d, &y, 10).unwrap();
        let path = &code.residual_path;
        assert!(path.windows(2).all(|w| w[1] <= w[0] + 1e-12), "residual increased: {path:?}");
        let mut found = code.support.clone();
        found.sort();
        let mut want = support.clone();
        want.sort();
        if found == want && (code.dense(60) - &x0).amax() <= 1e-8 {
            exact += 1;
        }
    }
    println!("exact recoveries {exact}/100");
    assert!(exact >= 95, "exact recoveries {exact}/100");
}

#[test]
fn coefficients_solve_least_squares_on_support() {
    let mut r = rng(7);
    let d = randn(20, 12, &mut r);
    let y = randn(20, 1, &mut r).column(0).into_owned();
    let code = omp_solve(&d, &y, 5).unwrap();
    let sub = d.select_columns(&code.support);
    let expected = normal_equations_residual(&sub, &y);
    assert!((code.residual_norm - expected).abs() <= 1e-10);
    // Optimality: the residual is orthogonal to every selected atom.
    let resid = &y - &sub * Vector::from_vec(code.coefficients.clone());
    assert!((sub.transpose() * resid).amax() <= 1e-10);
}
