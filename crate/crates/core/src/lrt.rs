//! Low-rank transformation learning.
//!
//! A class-based transform `T_i` minimizes
//! `||T_i Y_i||_* - lambda ||T_i Y_{not i}||_*`; a global transform `T`
//! minimizes `(1/N) sum_i ||T Y_i||_* - lambda ||T Y||_*`. Both are driven by
//! subgradient steps built from [`crate::linalg::norm_subdifferential`],
//! followed by rescaling to unit spectral norm.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{
    ensure_finite, nuclear_and_subgradient, nuclear_norm_unchecked, spectral_norm_unchecked,
    Matrix, Threshold,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Global,
    PerClass(usize),
}

/// A square linear map applied to sample columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub matrix: Matrix,
    pub kind: TransformKind,
}

impl Transform {
    pub fn new(matrix: Matrix, kind: TransformKind) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                context: "transform must be square",
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        ensure_finite(&matrix)?;
        Ok(Self { matrix, kind })
    }

    pub fn identity(dim: usize, kind: TransformKind) -> Self {
        Self {
            matrix: Matrix::identity(dim, dim),
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, y: &Matrix) -> Result<Matrix> {
        if y.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "transform vs sample dimension",
                expected: self.dim(),
                found: y.nrows(),
            });
        }
        Ok(&self.matrix * y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// `T <- T - step * dT`.
    #[default]
    Descent,
    /// `T <- T + step * dT`, the sign as literally printed in the original
    /// update formula. Kept for reproduction experiments only.
    LiteralPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnConfig {
    pub lambda: f64,
    pub step: f64,
    pub iterations: usize,
    pub threshold: Threshold,
    pub seed: u64,
    pub record_trace: bool,
    pub update: UpdateRule,
    /// Halve the step after 5 consecutive objective increases.
    pub backtracking: bool,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            step: 0.05,
            iterations: 100,
            threshold: Threshold::default(),
            seed: 0,
            record_trace: true,
            update: UpdateRule::Descent,
            backtracking: false,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("step must be > 0, got {}", self.step)));
        }
        self.threshold.validate()
    }
}

/// Objective values at the initial transform and after every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnTrace {
    pub objective_values: Vec<f64>,
    pub final_objective: f64,
}

impl LearnTrace {
    fn from_values(objective_values: Vec<f64>) -> Self {
        let final_objective = *objective_values.last().expect("trace holds the initial value");
        Self {
            objective_values,
            final_objective,
        }
    }

    pub fn initial_objective(&self) -> f64 {
        self.objective_values[0]
    }

    /// Number of iterations whose objective strictly exceeded the previous one.
    pub fn increases(&self) -> usize {
        self.objective_values.windows(2).filter(|w| w[1] > w[0]).count()
    }

    /// One value per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.objective_values {
            out.push_str(&format!("{v:e}\n"));
        }
        out
    }
}

fn check_transform(t: &Matrix, dim: usize) -> Result<()> {
    if t.nrows() != dim || t.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "transform vs data dimension",
            expected: dim,
            found: if t.nrows() != dim { t.nrows() } else { t.ncols() },
        });
    }
    ensure_finite(t)
}

fn check_block(y: &Matrix, dim: usize, context: &'static str) -> Result<()> {
    if y.nrows() != dim {
        return Err(Error::DimensionMismatch {
            context,
            expected: dim,
            found: y.nrows(),
        });
    }
    if y.ncols() > 0 {
        ensure_finite(y)?;
    }
    Ok(())
}

/// `||T_i Y_i||_* - lambda ||T_i Y_{not i}||_*`. `y_not_i` may have no columns.
pub fn class_objective(t: &Matrix, y_i: &Matrix, y_not_i: &Matrix, lambda: f64) -> Result<f64> {
    check_transform(t, y_i.nrows())?;
    check_block(y_i, t.nrows(), "class block rows")?;
    check_block(y_not_i, t.nrows(), "complement block rows")?;
    let mut f = nuclear_norm_unchecked(&(t * y_i));
    if lambda != 0.0 && y_not_i.ncols() > 0 {
        f -= lambda * nuclear_norm_unchecked(&(t * y_not_i));
    }
    Ok(f)
}

/// `(1/N) sum_i ||T Y_i||_* - lambda ||T Y||_*`.
pub fn global_objective(t: &Matrix, data: &DataMatrix, lambda: f64) -> Result<f64> {
    check_transform(t, data.dim())?;
    let n = data.num_classes();
    if n == 0 {
        return Err(Error::InvalidConfig("data has no classes".into()));
    }
    let mut f = 0.0;
    for c in 0..n {
        f += nuclear_norm_unchecked(&(t * data.class_submatrix(c)));
    }
    f /= n as f64;
    if lambda != 0.0 {
        f -= lambda * nuclear_norm_unchecked(&(t * data.samples()));
    }
    Ok(f)
}

/// Objective and subgradient for one class. Returns `(f, dT)`.
fn class_step_terms<R: Rng + ?Sized>(
    t: &Matrix,
    y_i: &Matrix,
    y_not_i: &Matrix,
    lambda: f64,
    threshold: Threshold,
    rng: &mut R,
) -> (f64, Matrix) {
    let (mut f, g) = nuclear_and_subgradient(&(t * y_i), threshold, rng);
    let mut delta = g * y_i.transpose();
    if lambda != 0.0 && y_not_i.ncols() > 0 {
        let (h, g_not) = nuclear_and_subgradient(&(t * y_not_i), threshold, rng);
        f -= lambda * h;
        delta -= lambda * (g_not * y_not_i.transpose());
    }
    (f, delta)
}

fn global_step_terms<R: Rng + ?Sized>(
    t: &Matrix,
    blocks: &[Matrix],
    all: &Matrix,
    lambda: f64,
    threshold: Threshold,
    rng: &mut R,
) -> (f64, Matrix) {
    let n = blocks.len() as f64;
    let mut f = 0.0;
    let mut delta = Matrix::zeros(t.nrows(), t.ncols());
    for y_i in blocks {
        let (h, g) = nuclear_and_subgradient(&(t * y_i), threshold, rng);
        f += h;
        delta += g * y_i.transpose();
    }
    f /= n;
    delta /= n;
    if lambda != 0.0 {
        let (h, g) = nuclear_and_subgradient(&(t * all), threshold, rng);
        f -= lambda * h;
        delta -= lambda * (g * all.transpose());
    }
    (f, delta)
}

/// `dT_i = d||T_i Y_i|| Y_i' - lambda d||T_i Y_{not i}|| Y_{not i}'`.
pub fn class_gradient<R: Rng + ?Sized>(
    t: &Matrix,
    y_i: &Matrix,
    y_not_i: &Matrix,
    lambda: f64,
    threshold: Threshold,
    rng: &mut R,
) -> Result<Matrix> {
    threshold.validate()?;
    check_transform(t, y_i.nrows())?;
    check_block(y_i, t.nrows(), "class block rows")?;
    check_block(y_not_i, t.nrows(), "complement block rows")?;
    if y_i.ncols() == 0 {
        return Err(Error::EmptyClass(0));
    }
    Ok(class_step_terms(t, y_i, y_not_i, lambda, threshold, rng).1)
}

/// `dT = (1/N) sum_i d||T Y_i|| Y_i' - lambda d||T Y|| Y'`.
pub fn global_gradient<R: Rng + ?Sized>(
    t: &Matrix,
    data: &DataMatrix,
    lambda: f64,
    threshold: Threshold,
    rng: &mut R,
) -> Result<Matrix> {
    threshold.validate()?;
    check_transform(t, data.dim())?;
    data.ensure_classes_populated()?;
    let blocks: Vec<Matrix> = (0..data.num_classes()).map(|c| data.class_submatrix(c)).collect();
    Ok(global_step_terms(t, &blocks, data.samples(), lambda, threshold, rng).1)
}

/// Shared descent loop: `eval` returns objective and subgradient at `T`.
fn descend<F>(dim: usize, cfg: &LearnConfig, mut eval: F) -> (Matrix, Vec<f64>)
where
    F: FnMut(&Matrix) -> (f64, Matrix),
{
    let mut t = Matrix::identity(dim, dim);
    let mut values = Vec::with_capacity(cfg.iterations + 1);
    let mut step = cfg.step;
    let mut rising = 0usize;

    for _ in 0..cfg.iterations {
        let (f, delta) = eval(&t);
        if let Some(&prev) = values.last() {
            rising = if f > prev { rising + 1 } else { 0 };
            if cfg.backtracking && rising >= 5 {
                step *= 0.5;
                rising = 0;
            }
        }
        values.push(f);
        match cfg.update {
            UpdateRule::Descent => t -= step * delta,
            UpdateRule::LiteralPlus => t += step * delta,
        }
        let norm = spectral_norm_unchecked(&t);
        if norm > 0.0 {
            t /= norm;
        }
    }
    let (f, _) = eval(&t);
    values.push(f);
    (t, values)
}

fn check_learnable(data: &DataMatrix, cfg: &LearnConfig) -> Result<()> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("no training samples".into()));
    }
    ensure_finite(data.samples())?;
    data.ensure_classes_populated()
}

/// Learns one transform per class. Classes run in parallel; class `i` draws
/// from its own substream of `cfg.seed`, so results do not depend on
/// scheduling. Traces are returned when `cfg.record_trace` is set.
pub fn learn_class_transforms(
    data: &DataMatrix,
    cfg: &LearnConfig,
) -> Result<Vec<(Transform, Option<LearnTrace>)>> {
    check_learnable(data, cfg)?;
    if data.num_classes() < 2 {
        return Err(Error::InvalidConfig(
            "class-based learning needs at least two classes".into(),
        ));
    }
    let dim = data.dim();
    let out = (0..data.num_classes())
        .into_par_iter()
        .map(|c| {
            let y_i = data.class_submatrix(c);
            let y_not_i = data.complement(c);
            let mut rng = seed::stream_rng(cfg.seed, c as u64 + 1);
            let (t, values) = descend(dim, cfg, |t| {
                class_step_terms(t, &y_i, &y_not_i, cfg.lambda, cfg.threshold, &mut rng)
            });
            let trace = cfg.record_trace.then(|| LearnTrace::from_values(values));
            (
                Transform {
                    matrix: t,
                    kind: TransformKind::PerClass(c),
                },
                trace,
            )
        })
        .collect();
    Ok(out)
}

/// Learns a single transform shared by all classes.
pub fn learn_global_transform(data: &DataMatrix, cfg: &LearnConfig) -> Result<(Transform, Option<LearnTrace>)> {
    check_learnable(data, cfg)?;
    if data.num_classes() < 2 && cfg.lambda != 0.0 {
        return Err(Error::InvalidConfig(
            "a single class is only allowed with lambda = 0".into(),
        ));
    }
    let blocks: Vec<Matrix> = (0..data.num_classes()).map(|c| data.class_submatrix(c)).collect();
    let mut rng = seed::stream_rng(cfg.seed, 0);
    let (t, values) = descend(data.dim(), cfg, |t| {
        global_step_terms(t, &blocks, data.samples(), cfg.lambda, cfg.threshold, &mut rng)
    });
    let trace = cfg.record_trace.then(|| LearnTrace::from_values(values));
    Ok((
        Transform {
            matrix: t,
            kind: TransformKind::Global,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian, nuclear_norm, spectral_norm, svd};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn two_class_data(seed: u64) -> DataMatrix {
        let mut r = rng(seed);
        let y = gaussian(6, 10, &mut r);
        DataMatrix::new(y, vec![0, 1, 0, 1, 0, 1, 0, 1, 1, 0], 2).unwrap()
    }

    #[test]
    fn identity_transform_without_discrimination() {
        let mut r = rng(1);
        let y_i = gaussian(6, 4, &mut r);
        let y_not = gaussian(6, 8, &mut r);
        let f = class_objective(&Matrix::identity(6, 6), &y_i, &y_not, 0.0).unwrap();
        assert!((f - nuclear_norm(&y_i).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_transform_objective_is_zero() {
        let mut r = rng(2);
        let y_i = gaussian(5, 3, &mut r);
        let y_not = gaussian(5, 4, &mut r);
        for lambda in [0.0, 0.3, 2.0] {
            assert_eq!(class_objective(&Matrix::zeros(5, 5), &y_i, &y_not, lambda).unwrap(), 0.0);
        }
    }

    #[test]
    fn objective_rejects_shape_mismatch() {
        let t = Matrix::identity(4, 4);
        let y = Matrix::zeros(5, 2);
        assert!(matches!(
            class_objective(&t, &y, &y, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_class_global_objective() {
        let mut r = rng(3);
        let y = gaussian(4, 6, &mut r);
        let data = DataMatrix::new(y.clone(), vec![0; 6], 1).unwrap();
        let t = gaussian(4, 4, &mut r);
        let f = global_objective(&t, &data, 0.0).unwrap();
        assert!((f - nuclear_norm(&(&t * &y)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_branch_gradient() {
        let mut r = rng(4);
        let t = gaussian(6, 6, &mut r);
        let y_i = gaussian(6, 3, &mut r);
        let empty = Matrix::zeros(6, 0);
        let g = class_gradient(&t, &y_i, &empty, 0.0, Threshold::Absolute(1e-9), &mut r).unwrap();
        let d = svd(&(&t * &y_i)).unwrap();
        let want = &d.u * d.v.transpose() * y_i.transpose();
        assert!((g - want).amax() < 1e-10);
    }

    #[test]
    fn zero_lambda_ignores_complement() {
        let mut r = rng(5);
        let t = gaussian(5, 5, &mut r);
        let y_i = gaussian(5, 3, &mut r);
        let y_not = gaussian(5, 7, &mut r);
        let g1 = class_gradient(&t, &y_i, &y_not, 0.0, Threshold::default(), &mut rng(0)).unwrap();
        let g2 = class_gradient(&t, &y_i, &Matrix::zeros(5, 0), 0.0, Threshold::default(), &mut rng(0)).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn single_class_global_gradient_matches_class_gradient() {
        let mut r = rng(6);
        let y = gaussian(5, 4, &mut r);
        let t = gaussian(5, 5, &mut r);
        let data = DataMatrix::new(y.clone(), vec![0; 4], 1).unwrap();
        let g = global_gradient(&t, &data, 0.0, Threshold::default(), &mut rng(7)).unwrap();
        let h = class_gradient(&t, &y, &Matrix::zeros(5, 0), 0.0, Threshold::default(), &mut rng(7)).unwrap();
        assert!((g - h).amax() < 1e-12);
    }

    #[test]
    fn zero_iterations_returns_identity() {
        let data = two_class_data(8);
        let cfg = LearnConfig {
            iterations: 0,
            ..LearnConfig::default()
        };
        let (t, trace) = learn_global_transform(&data, &cfg).unwrap();
        assert_eq!(t.matrix, Matrix::identity(6, 6));
        assert_eq!(trace.unwrap().objective_values.len(), 1);
        for (t, _) in learn_class_transforms(&data, &cfg).unwrap() {
            assert_eq!(t.matrix, Matrix::identity(6, 6));
        }
    }

    #[test]
    fn iterates_have_unit_spectral_norm() {
        let data = two_class_data(9);
        for iterations in [1, 2, 7] {
            let cfg = LearnConfig {
                iterations,
                ..LearnConfig::default()
            };
            let (t, trace) = learn_global_transform(&data, &cfg).unwrap();
            assert!((spectral_norm(&t.matrix).unwrap() - 1.0).abs() < 1e-8);
            assert_eq!(trace.unwrap().objective_values.len(), iterations + 1);
        }
    }

    #[test]
    fn class_learning_is_deterministic() {
        let data = two_class_data(10);
        let cfg = LearnConfig {
            iterations: 10,
            lambda: 0.5,
            seed: 42,
            ..LearnConfig::default()
        };
        let a = learn_class_transforms(&data, &cfg).unwrap();
        let b = learn_class_transforms(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[1].0.kind, TransformKind::PerClass(1));
    }

    #[test]
    fn trace_can_be_disabled() {
        let data = two_class_data(11);
        let cfg = LearnConfig {
            iterations: 3,
            record_trace: false,
            ..LearnConfig::default()
        };
        assert!(learn_global_transform(&data, &cfg).unwrap().1.is_none());
    }

    #[test]
    fn rejects_bad_config_and_empty_class() {
        let data = two_class_data(12);
        let bad = LearnConfig {
            step: 0.0,
            ..LearnConfig::default()
        };
        assert!(learn_global_transform(&data, &bad).is_err());
        let neg = LearnConfig {
            lambda: -1.0,
            ..LearnConfig::default()
        };
        assert!(learn_class_transforms(&data, &neg).is_err());

        let y = Matrix::from_element(3, 2, 1.0);
        let sparse = DataMatrix::new(y, vec![0, 0], 2).unwrap();
        assert!(matches!(
            learn_class_transforms(&sparse, &LearnConfig::default()),
            Err(Error::EmptyClass(1))
        ));
    }

    #[test]
    fn single_class_global_requires_zero_lambda() {
        let mut r = rng(13);
        let data = DataMatrix::new(gaussian(3, 4, &mut r), vec![0; 4], 1).unwrap();
        assert!(learn_global_transform(&data, &LearnConfig::default()).is_err());
        let cfg = LearnConfig {
            lambda: 0.0,
            iterations: 2,
            ..LearnConfig::default()
        };
        assert!(learn_global_transform(&data, &cfg).is_ok());
        assert!(learn_class_transforms(&data, &cfg).is_err());
    }
}
