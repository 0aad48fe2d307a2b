//! Dataset ingestion, protocol splits and synthetic domain-shift data.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use image::{ColorType, DynamicImage};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{gaussian, Matrix, Vector};
use crate::seed::stream_rng;

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "pnm", "ppm", "pbm", "png"];

/// How class labels are derived from file paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "pattern", rename_all = "kebab-case")]
pub enum LabelRule {
    /// The first directory below the root names the class.
    Directory,
    /// A regex applied to the file stem; its `label` group names the class.
    Pattern(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub root: PathBuf,
    pub width: usize,
    pub height: usize,
    pub labels: LabelRule,
    /// Regex applied to the file stem; its `condition` group is the tag.
    /// Without one, the tag is the stem after its first `_` (or the whole
    /// stem), which matches the `yaleB01_P00A+000E+00` naming.
    pub condition_pattern: Option<String>,
    /// Rescale every column to unit Euclidean norm after loading.
    pub unit_norm: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            root: PathBuf::new(),
            width: 20,
            height: 20,
            labels: LabelRule::Directory,
            condition_pattern: None,
            unit_norm: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub data: DataMatrix,
    /// Files that could not be decoded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Recursive listing in sorted order so column order is platform-stable.
fn list_images(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            list_images(&p, out)?;
        } else if is_image(&p) {
            out.push(p);
        }
    }
    Ok(())
}

/// Converts to grayscale in `[0, 1]`. Color inputs use luma weights
/// 0.299 / 0.587 / 0.114.
pub fn to_gray(img: &DynamicImage) -> (usize, usize, Vec<f64>) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let has_color = !matches!(
        img.color(),
        ColorType::L8 | ColorType::L16 | ColorType::La8 | ColorType::La16
    );
    let pixels = if has_color {
        img.to_rgb32f()
            .pixels()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    } else {
        img.to_luma32f().pixels().map(|p| p[0] as f64).collect()
    };
    (w, h, pixels)
}

/// Bilinear resampling of a row-major grayscale image with pixel-centre
/// alignment and edge clamping.
pub fn resize_bilinear(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    assert_eq!(src.len(), sw * sh, "source size");
    let coord = |d: usize, s_len: usize, d_len: usize| -> (usize, usize, f64) {
        let s = ((d as f64 + 0.5) * s_len as f64 / d_len as f64 - 0.5).clamp(0.0, (s_len - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(s_len - 1);
        (lo, hi, s - lo as f64)
    };
    let mut out = vec![0.0; dw * dh];
    for y in 0..dh {
        let (y0, y1, fy) = coord(y, sh, dh);
        for x in 0..dw {
            let (x0, x1, fx) = coord(x, sw, dw);
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bottom = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out[y * dw + x] = top * (1.0 - fy) + bottom * fy;
        }
    }
    out
}

/// Row-major image to a column-major feature vector: pixel `(x, y)` lands at
/// `x * height + y`.
pub fn flatten_column_major(pixels: &[f64], width: usize, height: usize) -> Vector {
    Vector::from_fn(width * height, |i, _| {
        let (x, y) = (i / height, i % height);
        pixels[y * width + x]
    })
}

/// Mirrors a column-major image column: `(x, y) -> (width - 1 - x, y)`.
pub fn flip_horizontal(column: &Vector, width: usize, height: usize) -> Result<Vector> {
    if column.len() != width * height {
        return Err(Error::DimensionMismatch {
            context: "image column length vs width*height",
            expected: width * height,
            found: column.len(),
        });
    }
    Ok(Vector::from_fn(column.len(), |i, _| {
        let (x, y) = (i / height, i % height);
        column[(width - 1 - x) * height + y]
    }))
}

fn default_condition(stem: &str) -> String {
    match stem.split_once('_') {
        Some((_, rest)) => rest.to_string(),
        None => stem.to_string(),
    }
}

fn compile(pattern: &str, group: &str) -> Result<Regex> {
    let re = Regex::new(pattern).map_err(|e| Error::InvalidConfig(format!("bad pattern {pattern:?}: {e}")))?;
    if !re.capture_names().any(|n| n == Some(group)) {
        return Err(Error::InvalidConfig(format!(
            "pattern {pattern:?} lacks a named group `{group}`"
        )));
    }
    Ok(re)
}

fn load_one(path: &Path, spec: &DatasetSpec) -> std::result::Result<Vector, String> {
    let img = image::open(path).map_err(|e| e.to_string())?;
    let (w, h, gray) = to_gray(&img);
    if w == 0 || h == 0 {
        return Err("empty image".into());
    }
    let resized = if (w, h) == (spec.width, spec.height) {
        gray
    } else {
        resize_bilinear(&gray, w, h, spec.width, spec.height)
    };
    Ok(flatten_column_major(&resized, spec.width, spec.height).map(|v| v.clamp(0.0, 1.0)))
}

/// Loads every supported raster under `spec.root` into a `width*height x K`
/// data matrix. Unreadable files are skipped and reported.
pub fn load_image_dataset(spec: &DatasetSpec) -> Result<LoadedDataset> {
    if spec.width == 0 || spec.height == 0 {
        return Err(Error::InvalidConfig("target image size must be positive".into()));
    }
    let label_re = match &spec.labels {
        LabelRule::Directory => None,
        LabelRule::Pattern(p) => Some(compile(p, "label")?),
    };
    let cond_re = spec.condition_pattern.as_deref().map(|p| compile(p, "condition")).transpose()?;

    let mut files = Vec::new();
    list_images(&spec.root, &mut files)?;

    let mut records: Vec<(String, String, PathBuf)> = Vec::new();
    let mut skipped = Vec::new();
    for path in files {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let label = match &label_re {
            None => path
                .strip_prefix(&spec.root)
                .ok()
                .and_then(|rel| {
                    let mut comps = rel.components();
                    let first = comps.next()?;
                    comps.next().map(|_| first.as_os_str().to_string_lossy().into_owned())
                }),
            Some(re) => re.captures(&stem).and_then(|c| c.name("label")).map(|m| m.as_str().to_string()),
        };
        let Some(label) = label else {
            skipped.push((path, "no class label".to_string()));
            continue;
        };
        let condition = match &cond_re {
            None => default_condition(&stem),
            Some(re) => match re.captures(&stem).and_then(|c| c.name("condition")) {
                Some(m) => m.as_str().to_string(),
                None => {
                    skipped.push((path, "no condition tag".to_string()));
                    continue;
                }
            },
        };
        records.push((label, condition, path));
    }

    let loaded: Vec<_> = {
        use rayon::prelude::*;
        records
            .par_iter()
            .map(|(_, _, path)| load_one(path, spec))
            .collect()
    };

    let mut columns = Vec::new();
    let mut names = Vec::new();
    let mut conditions = Vec::new();
    for ((label, condition, path), result) in records.into_iter().zip(loaded) {
        match result {
            Ok(col) => {
                columns.push(col);
                names.push(label);
                conditions.push(condition);
            }
            Err(reason) => {
                log::warn!("skipping {}: {reason}", path.display());
                skipped.push((path, reason));
            }
        }
    }
    if columns.is_empty() {
        return Err(Error::NoImages(spec.root.clone()));
    }

    let class_names: Vec<String> = names.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&str, usize> = class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let labels = names.iter().map(|n| index[n.as_str()]).collect();
    let samples = Matrix::from_columns(&columns);
    let mut data = DataMatrix::with_metadata(samples, labels, conditions, class_names)?;
    if spec.unit_norm {
        data.normalize_columns();
    }
    Ok(LoadedDataset { data, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SplitSpec {
    /// Exact condition tags for each side; other columns are dropped.
    ByConditions { train: Vec<String>, test: Vec<String> },
    /// `count` distinct conditions drawn at random for training, the rest
    /// for testing.
    RandomConditions { count: usize, seed: u64 },
    /// Pose identifiers matched against the `_`/`-`-separated tokens of each
    /// condition tag (`c27_f12` carries pose `c27`).
    ByPoseSets { train: Vec<String>, test: Vec<String> },
}

fn tokens(tag: &str) -> impl Iterator<Item = &str> {
    tag.split(['_', '-', ' '])
}

fn ensure_disjoint(train: &[String], test: &[String]) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidSplit("train and test sets must be non-empty".into()));
    }
    let a: BTreeSet<_> = train.iter().collect();
    if let Some(dup) = test.iter().find(|t| a.contains(t)) {
        return Err(Error::InvalidSplit(format!("condition {dup:?} is on both sides")));
    }
    Ok(())
}

/// Partitions columns by condition tag.
pub fn split(data: &DataMatrix, spec: &SplitSpec) -> Result<(DataMatrix, DataMatrix)> {
    if data.conditions().iter().all(|c| c.is_empty()) {
        return Err(Error::InvalidSplit("data carries no condition tags".into()));
    }
    let side: Vec<Option<bool>> = match spec {
        SplitSpec::ByConditions { train, test } => {
            ensure_disjoint(train, test)?;
            data.conditions()
                .iter()
                .map(|c| {
                    if train.contains(c) {
                        Some(true)
                    } else if test.contains(c) {
                        Some(false)
                    } else {
                        None
                    }
                })
                .collect()
        }
        SplitSpec::ByPoseSets { train, test } => {
            ensure_disjoint(train, test)?;
            data.conditions()
                .iter()
                .map(|c| {
                    let in_train = tokens(c).any(|t| train.iter().any(|p| p == t));
                    let in_test = tokens(c).any(|t| test.iter().any(|p| p == t));
                    match (in_train, in_test) {
                        (true, false) => Some(true),
                        (false, true) => Some(false),
                        _ => None,
                    }
                })
                .collect()
        }
        SplitSpec::RandomConditions { count, seed } => {
            let mut distinct: Vec<&String> = data.conditions().iter().collect::<BTreeSet<_>>().into_iter().collect();
            if *count == 0 || *count >= distinct.len() {
                return Err(Error::InvalidSplit(format!(
                    "cannot draw {count} training conditions out of {}",
                    distinct.len()
                )));
            }
            distinct.shuffle(&mut stream_rng(*seed, 0));
            let chosen: BTreeSet<&String> = distinct[..*count].iter().copied().collect();
            data.conditions().iter().map(|c| Some(chosen.contains(c))).collect()
        }
    };

    let train_idx: Vec<usize> = (0..data.len()).filter(|&j| side[j] == Some(true)).collect();
    let test_idx: Vec<usize> = (0..data.len()).filter(|&j| side[j] == Some(false)).collect();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::InvalidSplit("a side of the split matched no columns".into()));
    }
    let train = data.select(&train_idx);
    if let Some(c) = train.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::InvalidSplit(format!(
            "class {:?} has no training samples",
            data.class_names()[c]
        )));
    }
    Ok((train, data.select(&test_idx)))
}

/// Parameters of the synthetic domain-shift generator.
///
/// Each class is a random `rank`-dimensional subspace of `R^dim`; clean
/// samples have subspace coefficients with variance `amplitude^2 / rank`,
/// so their expected squared norm is `amplitude^2`. Each
/// domain `k` owns a distortion `D_k = I + distortion * N W_k'` where `N`
/// (`dim x nuisance_rank`, orthonormal) is shared by all domains and `W_k`
/// is Gaussian with variance `1 / nuisance_rank`, so `D_k` pushes a sample
/// of norm `r` about `distortion * r` into the nuisance subspace. Sample `j`
/// of a class belongs to domain `j % domains`; the last `test_domains`
/// domains form the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub rank: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub domains: usize,
    pub test_domains: usize,
    pub amplitude: f64,
    pub distortion: f64,
    pub nuisance_rank: usize,
    /// Standard deviation of additive per-entry Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            rank: 3,
            dim: 64,
            samples_per_class: 40,
            domains: 3,
            test_domains: 1,
            amplitude: 0.2,
            distortion: 1.5,
            nuisance_rank: 4,
            noise: 0.002,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synthetic spec: {m}")));
        if self.classes < 2 {
            return bad("need at least two classes");
        }
        if self.rank == 0 || self.rank >= self.dim {
            return bad("rank must satisfy 0 < rank < dim");
        }
        if self.nuisance_rank >= self.dim {
            return bad("nuisance_rank must be < dim");
        }
        if self.domains < 2 || self.test_domains == 0 || self.test_domains >= self.domains {
            return bad("need 0 < test_domains < domains");
        }
        if self.samples_per_class < self.domains {
            return bad("every domain needs a sample per class");
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return bad("amplitude must be positive");
        }
        if !(self.distortion >= 0.0 && self.noise >= 0.0) {
            return bad("distortion and noise must be non-negative");
        }
        Ok(())
    }
}

fn orthonormal_basis<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Matrix {
    gaussian(dim, rank, rng).qr().q()
}

/// Generates `(train, test)` with disjoint domains.
pub fn synthesize_domain_shift(spec: &SyntheticSpec) -> Result<(DataMatrix, DataMatrix)> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, 0);
    let d = spec.dim;

    let bases: Vec<Matrix> = (0..spec.classes).map(|_| orthonormal_basis(d, spec.rank, &mut rng)).collect();
    let nuisance = if spec.nuisance_rank > 0 {
        orthonormal_basis(d, spec.nuisance_rank, &mut rng)
    } else {
        Matrix::zeros(d, 0)
    };
    let distortions: Vec<Matrix> = (0..spec.domains)
        .map(|_| {
            let q = spec.nuisance_rank.max(1) as f64;
            let w = gaussian(d, spec.nuisance_rank, &mut rng) / q.sqrt();
            Matrix::identity(d, d) + spec.distortion * &nuisance * w.transpose()
        })
        .collect();

    let first_test_domain = spec.domains - spec.test_domains;
    let mut train = (Vec::new(), Vec::new(), Vec::new());
    let mut test = (Vec::new(), Vec::new(), Vec::new());
    for (c, basis) in bases.iter().enumerate() {
        for j in 0..spec.samples_per_class {
            let domain = j % spec.domains;
            let coeffs = gaussian(spec.rank, 1, &mut rng) * (spec.amplitude / (spec.rank as f64).sqrt());
            let clean = basis * coeffs;
            let mut y = &distortions[domain] * clean;
            if spec.noise > 0.0 {
                for v in y.iter_mut() {
                    *v += spec.noise * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let side = if domain < first_test_domain { &mut train } else { &mut test };
            side.0.push(y.column(0).into_owned());
            side.1.push(c);
            side.2.push(format!("domain{domain}"));
        }
    }
    let names: Vec<String> = (0..spec.classes).map(|c| format!("class{c}")).collect();
    let build = |(cols, labels, conds): (Vec<Vector>, Vec<usize>, Vec<String>)| {
        DataMatrix::with_metadata(Matrix::from_columns(&cols), labels, conds, names.clone())
    };
    Ok((build(train)?, build(test)?))
}
