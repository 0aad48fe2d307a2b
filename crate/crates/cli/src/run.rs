//! The experiment pipeline: load, split, learn, model, classify, evaluate.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lrt_core::classifier::{
    build_lowrank_model, class_lrt_classify, classify_all, evaluate, lrt_omp_classify, nn_classify, ClassNnGallery,
    LowRankModel, Prediction, TransformSet,
};
use lrt_core::container::{encode_dataset, encode_model, encode_transform, write_atomic};
use lrt_core::dataio::{load_image_dataset, split, synthesize_domain_shift, SplitSpec};
use lrt_core::lrt::{learn_class_transforms, learn_global_transform, LearnTrace, Transform, TransformKind};
use lrt_core::seed::substream;
use lrt_core::{DataMatrix, Vector};
use sha2::{Digest, Sha256};

use crate::config::{ClassifierKind, DatasetSource, ExperimentConfig, LearnerKind, ReportFormat};
use crate::error::{RunError, Stage, StageExt};
use crate::report::{Accuracy, DatasetInfo, Report, TraceSummary, Timings, REPORT_FILE, REPORT_FORMAT};

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub output_dir: PathBuf,
    pub timings: Timings,
}

/// Fills every component seed from the top-level seed.
pub fn resolve_seeds(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if let DatasetSource::Synthetic(spec) = &mut cfg.dataset {
        spec.seed = substream(cfg.seed, "synthesis");
    }
    if let Some(SplitSpec::RandomConditions { seed, .. }) = &mut cfg.split {
        *seed = substream(cfg.seed, "split");
    }
    cfg.learn.seed = substream(cfg.seed, "learner");
    cfg
}

pub fn split_fingerprint(train: &DataMatrix, test: &DataMatrix) -> String {
    let mut h = Sha256::new();
    h.update(train.fingerprint());
    h.update(b":");
    h.update(test.fingerprint());
    hex::encode(h.finalize())
}

struct Loaded {
    pooled: DataMatrix,
    train: DataMatrix,
    test: DataMatrix,
}

fn load(cfg: &ExperimentConfig, timings: &mut Timings) -> Result<Loaded, RunError> {
    let start = Instant::now();
    let (pooled, presplit) = match &cfg.dataset {
        DatasetSource::Synthetic(spec) => {
            let (train, test) = synthesize_domain_shift(spec).stage(Stage::Load)?;
            (train.concat(&test).stage(Stage::Load)?, Some((train, test)))
        }
        DatasetSource::Images(spec) => {
            let loaded = load_image_dataset(spec).stage(Stage::Load)?;
            for (path, why) in &loaded.skipped {
                log::warn!("skipped {}: {why}", path.display());
            }
            (loaded.data, None)
        }
    };
    timings.record(Stage::Load, start.elapsed().as_secs_f64());

    let start = Instant::now();
    let (train, test) = match (&cfg.split, presplit) {
        (Some(spec), _) => split(&pooled, spec).stage(Stage::Split)?,
        (None, Some(parts)) => parts,
        (None, None) => return Err(RunError::new(Stage::Split, "no split specified")),
    };
    timings.record(Stage::Split, start.elapsed().as_secs_f64());
    log::info!("train {} / test {} samples, d = {}", train.len(), test.len(), train.dim());
    Ok(Loaded { pooled, train, test })
}

struct Learned {
    transforms: TransformSet,
    traces: Vec<(String, LearnTrace)>,
}

fn learn(cfg: &ExperimentConfig, train: &DataMatrix) -> Result<Learned, RunError> {
    let mut traces = Vec::new();
    let transforms = match cfg.learner {
        LearnerKind::None => TransformSet::Global(Transform::identity(train.dim(), TransformKind::Global)),
        LearnerKind::Global => {
            let (t, trace) = learn_global_transform(train, &cfg.learn).stage(Stage::Learn)?;
            traces.extend(trace.map(|tr| ("global".to_string(), tr)));
            TransformSet::Global(t)
        }
        LearnerKind::Class => {
            let learned = learn_class_transforms(train, &cfg.learn).stage(Stage::Learn)?;
            let mut ts = Vec::with_capacity(learned.len());
            for (c, (t, trace)) in learned.into_iter().enumerate() {
                traces.extend(trace.map(|tr| (train.class_names()[c].clone(), tr)));
                ts.push(t);
            }
            TransformSet::PerClass(ts)
        }
    };
    Ok(Learned { transforms, traces })
}

fn classify(
    cfg: &ExperimentConfig,
    train: &DataMatrix,
    test: &DataMatrix,
    transforms: &TransformSet,
    model: Option<&LowRankModel>,
) -> Result<Vec<Prediction>, RunError> {
    let model = || model.expect("OMP classifiers build a model");
    let preds = match (cfg.classifier, transforms) {
        (ClassifierKind::Nn, _) => classify_all(test, |p| nn_classify(train, p)),
        (ClassifierKind::LrtNn, TransformSet::Global(t)) => {
            let gallery = train.transformed(&t.matrix).stage(Stage::Classify)?;
            classify_all(test, |p: &Vector| nn_classify(&gallery, &(&t.matrix * p)))
        }
        (ClassifierKind::LrtOmp, _) => classify_all(test, |p| lrt_omp_classify(model(), p, cfg.s_max)),
        (ClassifierKind::ClassLrtNn, TransformSet::PerClass(ts)) => {
            let gallery = ClassNnGallery::new(train, ts).stage(Stage::Classify)?;
            classify_all(test, |p| gallery.classify(p))
        }
        (ClassifierKind::ClassLrtOmp, _) => classify_all(test, |p| class_lrt_classify(model(), p, cfg.s_max)),
        (kind, _) => {
            return Err(RunError::new(
                Stage::Classify,
                format!("classifier {kind} does not fit the learned transforms"),
            ))
        }
    };
    preds.stage(Stage::Classify)
}

/// Output files of a run, named relative to the output directory.
struct Artifacts(Vec<(String, Vec<u8>)>);

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.0.push((name.into(), bytes.into()));
    }

    fn names(&self) -> Vec<String> {
        self.0.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes every file atomically; on failure removes the ones already
    /// written by this call.
    fn write_all(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::new(Stage::Write, format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.0 {
            let path = dir.join(name);
            if let Err(e) = write_atomic(&path, bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(RunError::new(Stage::Write, format!("{}: {e}", path.display())));
            }
            written.push(path);
        }
        Ok(())
    }
}

fn transform_file(t: &Transform) -> (String, String) {
    match t.kind {
        TransformKind::Global => ("transform.lrt".into(), "trace.txt".into()),
        TransformKind::PerClass(c) => (format!("transform_{c:03}.lrt"), format!("trace_{c:03}.txt")),
    }
}

/// Runs the configured experiment and writes its artifacts to
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let cfg = resolve_seeds(cfg);
    let mut timings = Timings::default();

    let Loaded { pooled, train, test } = load(&cfg, &mut timings)?;

    let start = Instant::now();
    let learned = learn(&cfg, &train)?;
    timings.record(Stage::Learn, start.elapsed().as_secs_f64());

    let start = Instant::now();
    let model = if cfg.classifier.uses_omp() {
        let m = build_lowrank_model(learned.transforms.clone(), &train, &cfg.rpca).stage(Stage::Model)?;
        Some(m)
    } else {
        None
    };
    timings.record(Stage::Model, start.elapsed().as_secs_f64());

    let start = Instant::now();
    let preds = classify(&cfg, &train, &test, &learned.transforms, model.as_ref())?;
    timings.record(Stage::Classify, start.elapsed().as_secs_f64());

    let start = Instant::now();
    let labels: Vec<usize> = preds.iter().map(|p| p.label).collect();
    let acc = evaluate(&labels, test.labels(), train.num_classes()).stage(Stage::Evaluate)?;
    timings.record(Stage::Evaluate, start.elapsed().as_secs_f64());

    let start = Instant::now();
    let mut artifacts = Artifacts(Vec::new());
    if cfg.learner != LearnerKind::None {
        let by_name: std::collections::HashMap<_, _> = learned.traces.iter().map(|(n, t)| (n.clone(), t)).collect();
        for t in learned.transforms.transforms() {
            let (file, trace_file) = transform_file(t);
            artifacts.add(file, encode_transform(t));
            let key = match t.kind {
                TransformKind::Global => "global".to_string(),
                TransformKind::PerClass(c) => train.class_names()[c].clone(),
            };
            if let Some(trace) = by_name.get(&key) {
                artifacts.add(trace_file, trace.to_text());
            }
        }
    }
    if let Some(m) = &model {
        artifacts.add("model.lrm", encode_model(m));
    }
    if cfg.cache_dataset {
        artifacts.add("dataset.lrd", encode_dataset(&pooled));
    }
    let mut names = artifacts.names();
    for (format, file) in [
        (ReportFormat::Json, REPORT_FILE),
        (ReportFormat::Csv, "report.csv"),
        (ReportFormat::Summary, "summary.txt"),
    ] {
        if cfg.wants(format) {
            names.push(file.to_string());
        }
    }

    let report = Report {
        format: REPORT_FORMAT.to_string(),
        name: cfg.label(),
        seed: cfg.seed,
        learner: cfg.learner,
        classifier: cfg.classifier,
        dataset: DatasetInfo {
            fingerprint: pooled.fingerprint(),
            split_fingerprint: split_fingerprint(&train, &test),
            dim: train.dim(),
            class_names: train.class_names().to_vec(),
            train_samples: train.len(),
            test_samples: test.len(),
        },
        accuracy: Accuracy::from_report(&acc, train.class_names()),
        confusion: acc.confusion.clone(),
        traces: learned
            .traces
            .iter()
            .map(|(n, t)| TraceSummary::new(n.clone(), t))
            .collect(),
        rpca_unconverged: model
            .as_ref()
            .map(|m| m.unconverged.iter().map(|&c| train.class_names()[c].clone()).collect())
            .unwrap_or_default(),
        artifacts: names,
        config: cfg.clone(),
    };

    if cfg.wants(ReportFormat::Json) {
        artifacts.add(REPORT_FILE, report.to_json());
    }
    if cfg.wants(ReportFormat::Csv) {
        artifacts.add("report.csv", report.to_csv());
    }
    if cfg.wants(ReportFormat::Summary) {
        artifacts.add("summary.txt", report.summary());
    }
    timings.record(Stage::Write, start.elapsed().as_secs_f64());
    artifacts.add("timings.json", timings.to_json());
    artifacts.write_all(&cfg.output_dir)?;

    Ok(RunOutcome {
        report,
        output_dir: cfg.output_dir.clone(),
        timings,
    })
}
