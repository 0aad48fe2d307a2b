//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use lrt_core::dataio::{DatasetSpec, SplitSpec, SyntheticSpec};
use lrt_core::lrt::LearnConfig;
use lrt_core::rpca::RpcaConfig;
use serde::{Deserialize, Serialize};

use crate::error::{RunError, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    None,
    Class,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    /// Nearest neighbour on raw features.
    Nn,
    /// Nearest neighbour after the global transform.
    LrtNn,
    /// OMP over RPCA dictionaries after the global transform.
    LrtOmp,
    /// Nearest neighbour under each class's own transform.
    ClassLrtNn,
    /// OMP over RPCA dictionaries under each class's own transform.
    ClassLrtOmp,
}

impl ClassifierKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Nn => "nn",
            Self::LrtNn => "lrt-nn",
            Self::LrtOmp => "lrt-omp",
            Self::ClassLrtNn => "class-lrt-nn",
            Self::ClassLrtOmp => "class-lrt-omp",
        }
    }

    pub fn uses_omp(self) -> bool {
        matches!(self, Self::LrtOmp | Self::ClassLrtOmp)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Class => "class",
            Self::Global => "global",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Generated train/test domains. A `split` section, if present,
    /// re-partitions the pooled columns by their `domain{k}` tags.
    Synthetic(SyntheticSpec),
    /// Image tree on disk; needs a `split` section.
    Images(DatasetSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used by `compare`; defaults to the classifier name.
    pub name: Option<String>,
    /// Top-level seed. Synthesis, random splits and learning each draw
    /// from a named substream of it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub learner: LearnerKind,
    pub classifier: ClassifierKind,
    pub s_max: usize,
    /// Write the loaded data as a `.lrd` container next to the report.
    pub cache_dataset: bool,
    pub formats: Vec<ReportFormat>,
    pub dataset: DatasetSource,
    pub split: Option<SplitSpec>,
    pub learn: LearnConfig,
    pub rpca: RpcaConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: None,
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            learner: LearnerKind::Global,
            classifier: ClassifierKind::LrtOmp,
            s_max: 10,
            cache_dataset: false,
            formats: vec![ReportFormat::Json, ReportFormat::Csv, ReportFormat::Summary],
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            split: None,
            learn: LearnConfig::default(),
            rpca: RpcaConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::new(Stage::Config, e))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.classifier.name().to_string())
    }

    pub fn wants(&self, format: ReportFormat) -> bool {
        self.formats.contains(&format)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::new(Stage::Config, m));
        use ClassifierKind::*;
        match (self.classifier, self.learner) {
            (ClassLrtNn | ClassLrtOmp, LearnerKind::Class) => {}
            (ClassLrtNn | ClassLrtOmp, l) => {
                return bad(format!("classifier {} needs learner = \"class\", got {:?}", self.classifier, l.name()))
            }
            (LrtNn | LrtOmp, LearnerKind::Class) => {
                return bad(format!(
                    "classifier {} uses one shared transform; use class-{} with the class learner",
                    self.classifier, self.classifier
                ))
            }
            (Nn, LearnerKind::Class | LearnerKind::Global) => {
                return bad("classifier nn works on raw features; use lrt-nn to apply learned transforms".into())
            }
            _ => {}
        }
        if self.classifier.uses_omp() && self.s_max == 0 {
            return bad("s_max must be >= 1".into());
        }
        if matches!(self.dataset, DatasetSource::Images(_)) && self.split.is_none() {
            return bad("image datasets need a [split] section".into());
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate().map_err(|e| RunError::new(Stage::Config, e))?;
        }
        self.learn.validate().map_err(|e| RunError::new(Stage::Config, e))?;
        self.rpca.validate().map_err(|e| RunError::new(Stage::Config, e))?;
        Ok(())
    }
}
