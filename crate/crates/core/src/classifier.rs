//! Recognition pipelines: nearest neighbour on raw or transformed features,
//! and OMP matching against RPCA-recovered low-rank class dictionaries.

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::lrt::{Transform, TransformKind};
use crate::omp::omp_solve;
use crate::rpca::{rpca_decompose, RpcaConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: usize,
    /// Score of the winning class (distance or residual; lower is better).
    pub score: f64,
    pub class_scores: Vec<f64>,
}

impl Prediction {
    /// Picks the lowest score; ties go to the lowest class index.
    pub fn from_scores(class_scores: Vec<f64>) -> Result<Self> {
        let mut best: Option<(usize, f64)> = None;
        for (c, &s) in class_scores.iter().enumerate() {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((c, s));
            }
        }
        let (label, score) = best.ok_or_else(|| Error::InvalidModel("no class scores".into()))?;
        Ok(Self {
            label,
            score,
            class_scores,
        })
    }
}

fn check_probe(dim: usize, probe: &Vector) -> Result<()> {
    if probe.len() != dim {
        return Err(Error::DimensionMismatch {
            context: "probe length vs feature dimension",
            expected: dim,
            found: probe.len(),
        });
    }
    Ok(())
}

/// Per-class minimum Euclidean distance from `probe` to the columns of
/// `gallery`. Classes without columns score `+inf`.
fn min_distances(gallery: &Matrix, labels: &[usize], num_classes: usize, probe: &Vector) -> Vec<f64> {
    let mut best = vec![f64::INFINITY; num_classes];
    for (j, col) in gallery.column_iter().enumerate() {
        let d2: f64 = col.iter().zip(probe.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let c = labels[j];
        if d2 < best[c] {
            best[c] = d2;
        }
    }
    best.into_iter().map(f64::sqrt).collect()
}

/// Nearest-neighbour label in the gallery's own feature space.
pub fn nn_classify(gallery: &DataMatrix, probe: &Vector) -> Result<Prediction> {
    if gallery.is_empty() {
        return Err(Error::InvalidModel("empty gallery".into()));
    }
    check_probe(gallery.dim(), probe)?;
    Prediction::from_scores(min_distances(
        gallery.samples(),
        gallery.labels(),
        gallery.num_classes(),
        probe,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Global,
    PerClass,
}

/// Transforms used to build a low-rank model.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformSet {
    Global(Transform),
    PerClass(Vec<Transform>),
}

impl TransformSet {
    pub fn mode(&self) -> ModelMode {
        match self {
            TransformSet::Global(_) => ModelMode::Global,
            TransformSet::PerClass(_) => ModelMode::PerClass,
        }
    }

    pub fn for_class(&self, class: usize) -> &Transform {
        match self {
            TransformSet::Global(t) => t,
            TransformSet::PerClass(ts) => &ts[class],
        }
    }

    pub fn transforms(&self) -> Vec<&Transform> {
        match self {
            TransformSet::Global(t) => vec![t],
            TransformSet::PerClass(ts) => ts.iter().collect(),
        }
    }
}

/// Per-class low-rank dictionaries `L_i` recovered from transformed
/// training data.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankModel {
    pub dictionaries: Vec<Matrix>,
    pub transforms: TransformSet,
    pub rpca: RpcaConfig,
    pub class_names: Vec<String>,
    /// Classes whose RPCA hit the iteration cap before converging.
    pub unconverged: Vec<usize>,
}

impl LowRankModel {
    pub fn mode(&self) -> ModelMode {
        self.transforms.mode()
    }

    pub fn num_classes(&self) -> usize {
        self.dictionaries.len()
    }

    pub fn dim(&self) -> usize {
        self.dictionaries.first().map_or(0, |d| d.nrows())
    }

    /// Checks structural consistency (used after deserialization too).
    pub fn validate(&self) -> Result<()> {
        if self.dictionaries.is_empty() {
            return Err(Error::InvalidModel("model has no classes".into()));
        }
        if self.class_names.len() != self.dictionaries.len() {
            return Err(Error::InvalidModel("class name table does not match dictionaries".into()));
        }
        let d = self.dim();
        if let TransformSet::PerClass(ts) = &self.transforms {
            if ts.len() != self.dictionaries.len() {
                return Err(Error::InvalidModel(format!(
                    "{} transforms for {} class dictionaries",
                    ts.len(),
                    self.dictionaries.len()
                )));
            }
            for (c, t) in ts.iter().enumerate() {
                if t.kind != TransformKind::PerClass(c) {
                    return Err(Error::InvalidModel(format!("transform {c} is tagged {:?}", t.kind)));
                }
            }
        }
        for t in self.transforms.transforms() {
            if t.dim() != d {
                return Err(Error::InvalidModel("transform and dictionary dimensions differ".into()));
            }
        }
        if self.dictionaries.iter().any(|l| l.nrows() != d || l.ncols() == 0) {
            return Err(Error::InvalidModel("dictionaries must share a dimension and be non-empty".into()));
        }
        Ok(())
    }
}

/// Builds `L_i` = low-rank part of RPCA on `T Y_i` (global) or `T_i Y_i`
/// (per-class). Classes are decomposed in parallel.
pub fn build_lowrank_model(transforms: TransformSet, train: &DataMatrix, cfg: &RpcaConfig) -> Result<LowRankModel> {
    cfg.validate()?;
    train.ensure_classes_populated()?;
    let n = train.num_classes();
    if let TransformSet::PerClass(ts) = &transforms {
        if ts.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} per-class transforms for {n} classes",
                ts.len()
            )));
        }
    }
    for t in transforms.transforms() {
        if t.dim() != train.dim() {
            return Err(Error::DimensionMismatch {
                context: "transform vs training dimension",
                expected: train.dim(),
                found: t.dim(),
            });
        }
    }

    let results: Vec<_> = (0..n)
        .into_par_iter()
        .map(|c| {
            let projected = transforms.for_class(c).apply(&train.class_submatrix(c))?;
            rpca_decompose(&projected, cfg)
        })
        .collect::<Result<_>>()?;

    let unconverged: Vec<usize> = results
        .iter()
        .enumerate()
        .filter_map(|(c, r)| (!r.converged).then_some(c))
        .collect();
    if !unconverged.is_empty() {
        log::warn!("rpca did not converge for classes {unconverged:?}");
    }
    let model = LowRankModel {
        dictionaries: results.into_iter().map(|r| r.low_rank).collect(),
        transforms,
        rpca: cfg.clone(),
        class_names: train.class_names().to_vec(),
        unconverged,
    };
    model.validate()?;
    Ok(model)
}

fn omp_scores(model: &LowRankModel, probe: &Vector, s_max: usize) -> Result<Vec<f64>> {
    model.validate()?;
    check_probe(model.dim(), probe)?;
    match &model.transforms {
        TransformSet::Global(t) => {
            let feature = &t.matrix * probe;
            model
                .dictionaries
                .iter()
                .map(|l| omp_solve(l, &feature, s_max).map(|c| c.residual_norm))
                .collect()
        }
        TransformSet::PerClass(ts) => model
            .dictionaries
            .iter()
            .zip(ts)
            .map(|(l, t)| omp_solve(l, &(&t.matrix * probe), s_max).map(|c| c.residual_norm))
            .collect(),
    }
}

/// Global LRT + OMP: score class `i` by the OMP residual of `T y` over `L_i`.
pub fn lrt_omp_classify(model: &LowRankModel, probe: &Vector, s_max: usize) -> Result<Prediction> {
    if model.mode() != ModelMode::Global {
        return Err(Error::InvalidModel("expected a model built from a global transform".into()));
    }
    Prediction::from_scores(omp_scores(model, probe, s_max)?)
}

/// Class LRT + OMP: apply every `T_i`, score by the OMP residual of
/// `T_i y` over `L_i`, keep the best.
pub fn class_lrt_classify(model: &LowRankModel, probe: &Vector, s_max: usize) -> Result<Prediction> {
    if model.mode() != ModelMode::PerClass {
        return Err(Error::InvalidModel("expected a model built from per-class transforms".into()));
    }
    Prediction::from_scores(omp_scores(model, probe, s_max)?)
}

/// Training data pre-multiplied by each class's own transform, for
/// [`class_lrt_nn_classify`].
#[derive(Debug, Clone)]
pub struct ClassNnGallery {
    blocks: Vec<Matrix>,
    transforms: Vec<Transform>,
}

impl ClassNnGallery {
    pub fn new(train: &DataMatrix, transforms: &[Transform]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidModel("empty gallery".into()));
        }
        if transforms.len() != train.num_classes() {
            return Err(Error::InvalidModel(format!(
                "{} per-class transforms for {} classes",
                transforms.len(),
                train.num_classes()
            )));
        }
        let blocks = transforms
            .iter()
            .enumerate()
            .map(|(c, t)| t.apply(&train.class_submatrix(c)))
            .collect::<Result<_>>()?;
        Ok(Self {
            blocks,
            transforms: transforms.to_vec(),
        })
    }

    pub fn classify(&self, probe: &Vector) -> Result<Prediction> {
        check_probe(self.transforms[0].dim(), probe)?;
        let scores = self
            .blocks
            .iter()
            .zip(&self.transforms)
            .map(|(block, t)| {
                let feature = &t.matrix * probe;
                block
                    .column_iter()
                    .map(|col| (col - &feature).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Prediction::from_scores(scores)
    }
}

/// Class LRT + NN: class `i` scores the smallest distance between `T_i y`
/// and the columns of `T_i Y_i`.
pub fn class_lrt_nn_classify(train: &DataMatrix, transforms: &[Transform], probe: &Vector) -> Result<Prediction> {
    ClassNnGallery::new(train, transforms)?.classify(probe)
}

/// Classifies every column of `probes` in parallel, preserving order.
pub fn classify_all<F>(probes: &DataMatrix, f: F) -> Result<Vec<Prediction>>
where
    F: Fn(&Vector) -> Result<Prediction> + Sync,
{
    (0..probes.len())
        .into_par_iter()
        .map(|j| f(&probes.column(j)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    /// Overall accuracy in percent.
    pub overall: f64,
    /// Per-class accuracy in percent; `None` for classes absent from the truth.
    pub per_class: Vec<Option<f64>>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub correct: usize,
    pub total: usize,
}

pub fn evaluate(predicted: &[usize], truth: &[usize], num_classes: usize) -> Result<AccuracyReport> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "predictions vs truth labels",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidConfig("nothing to evaluate".into()));
    }
    if let Some(&bad) = predicted.iter().chain(truth).find(|&&l| l >= num_classes) {
        return Err(Error::InvalidConfig(format!("label {bad} out of range")));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
    let per_class = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: usize = row.iter().sum();
            (n > 0).then(|| 100.0 * row[c] as f64 / n as f64)
        })
        .collect();
    Ok(AccuracyReport {
        overall: 100.0 * correct as f64 / truth.len() as f64,
        per_class,
        confusion,
        correct,
        total: truth.len(),
    })
}
