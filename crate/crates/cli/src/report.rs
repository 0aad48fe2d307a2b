//! Run reports: JSON document, CSV accuracy table and a text summary.

use std::fmt::Write as _;
use std::path::Path;

use lrt_core::classifier::AccuracyReport;
use lrt_core::lrt::LearnTrace;
use serde::{Deserialize, Serialize};

use crate::config::{ClassifierKind, ExperimentConfig, LearnerKind};
use crate::error::{RunError, Stage, StageExt};

pub const REPORT_FORMAT: &str = "lrt-report/1";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    /// SHA-256 of the pooled data container.
    pub fingerprint: String,
    /// SHA-256 over the train and test fingerprints.
    pub split_fingerprint: String,
    pub dim: usize,
    pub class_names: Vec<String>,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: String,
    /// Percent; absent when the class has no test samples.
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub overall: f64,
    pub correct: usize,
    pub total: usize,
    pub per_class: Vec<ClassAccuracy>,
}

impl Accuracy {
    pub fn from_report(acc: &AccuracyReport, class_names: &[String]) -> Self {
        let per_class = class_names
            .iter()
            .enumerate()
            .map(|(c, name)| ClassAccuracy {
                class: name.clone(),
                accuracy: acc.per_class[c],
                correct: acc.confusion[c][c],
                total: acc.confusion[c].iter().sum(),
            })
            .collect();
        Self {
            overall: acc.overall,
            correct: acc.correct,
            total: acc.total,
            per_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// `global` or the class name.
    pub transform: String,
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_value: f64,
    pub increases: usize,
    pub values: Vec<f64>,
}

impl TraceSummary {
    pub fn new(transform: String, trace: &LearnTrace) -> Self {
        Self {
            transform,
            initial: trace.initial_objective(),
            final_value: trace.final_objective,
            increases: trace.increases(),
            values: trace.objective_values.clone(),
        }
    }
}

/// Everything a run reports. Deterministic for a given config; wall-clock
/// timings live in a separate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub name: String,
    pub seed: u64,
    pub learner: LearnerKind,
    pub classifier: ClassifierKind,
    pub dataset: DatasetInfo,
    pub accuracy: Accuracy,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub traces: Vec<TraceSummary>,
    /// Classes whose RPCA hit the iteration cap.
    pub rpca_unconverged: Vec<String>,
    pub artifacts: Vec<String>,
    /// Config with derived seeds filled in.
    pub config: ExperimentConfig,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let report: Report = serde_json::from_str(text).stage(Stage::Compare)?;
        if report.format != REPORT_FORMAT {
            return Err(RunError::new(
                Stage::Compare,
                format!("unsupported report format {:?}", report.format),
            ));
        }
        Ok(report)
    }

    /// Reads `path`, or `path/report.json` when `path` is a directory.
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let file = if path.is_dir() { path.join(REPORT_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file)
            .map_err(|e| RunError::new(Stage::Compare, format!("{}: {e}", file.display())))?;
        Self::from_json(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "class", "accuracy", "correct", "total"]).expect("in-memory write");
        let pct = |a: Option<f64>| a.map(|v| format!("{v:.4}")).unwrap_or_default();
        for c in &self.accuracy.per_class {
            w.write_record([
                self.name.as_str(),
                c.class.as_str(),
                &pct(c.accuracy),
                &c.correct.to_string(),
                &c.total.to_string(),
            ])
            .expect("in-memory write");
        }
        w.write_record([
            self.name.as_str(),
            "overall",
            &pct(Some(self.accuracy.overall)),
            &self.accuracy.correct.to_string(),
            &self.accuracy.total.to_string(),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let d = &self.dataset;
        let _ = writeln!(s, "run        {}", self.name);
        let _ = writeln!(s, "method     learner={} classifier={}", self.learner.name(), self.classifier);
        let _ = writeln!(s, "seed       {}", self.seed);
        let _ = writeln!(
            s,
            "data       d={} classes={} train={} test={}",
            d.dim,
            d.class_names.len(),
            d.train_samples,
            d.test_samples
        );
        let _ = writeln!(s, "dataset    {}", &d.fingerprint[..16]);
        let _ = writeln!(s, "split      {}", &d.split_fingerprint[..16]);
        for t in &self.traces {
            let _ = writeln!(
                s,
                "objective  {:<10} {:.6} -> {:.6} ({} increasing steps)",
                t.transform, t.initial, t.final_value, t.increases
            );
        }
        if !self.rpca_unconverged.is_empty() {
            let _ = writeln!(s, "warning    rpca unconverged for {}", self.rpca_unconverged.join(", "));
        }
        let _ = writeln!(s);
        let width = self.accuracy.per_class.iter().map(|c| c.class.len()).max().unwrap_or(5).max(7);
        let _ = writeln!(s, "{:<width$}  {:>8}  {:>9}", "class", "accuracy", "correct");
        for c in &self.accuracy.per_class {
            let acc = c.accuracy.map(|a| format!("{a:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "{:<width$}  {:>8}  {:>4}/{:<4}", c.class, acc, c.correct, c.total);
        }
        let a = &self.accuracy;
        let _ = writeln!(s, "{:<width$}  {:>8.2}  {:>4}/{:<4}", "overall", a.overall, a.correct, a.total);
        s
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
    pub total_seconds: f64,
}

impl Timings {
    pub fn record(&mut self, stage: Stage, seconds: f64) {
        self.stages.push((stage.to_string(), seconds));
        self.total_seconds += seconds;
    }

    pub fn to_json(&self) -> String {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.stages {
            map.insert(k.clone(), serde_json::json!(v));
        }
        let doc = serde_json::json!({ "stage_seconds": map, "wall_seconds": self.total_seconds });
        let mut s = serde_json::to_string_pretty(&doc).expect("timings serialize");
        s.push('\n');
        s
    }
}
