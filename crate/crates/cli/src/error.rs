use std::fmt;

/// Pipeline stage, used to tag failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Split,
    Learn,
    Model,
    Classify,
    Evaluate,
    Write,
    Compare,
    Inspect,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Learn => "learn",
            Stage::Model => "model",
            Stage::Classify => "classify",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
            Stage::Compare => "compare",
            Stage::Inspect => "inspect",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {message}")]
pub struct RunError {
    pub stage: Stage,
    pub message: String,
}

impl RunError {
    pub fn new(stage: Stage, message: impl fmt::Display) -> Self {
        Self {
            stage,
            message: message.to_string(),
        }
    }
}

/// Tags errors from a fallible step with a stage.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, RunError>;
}

impl<T, E: fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, RunError> {
        self.map_err(|e| RunError::new(stage, e))
    }
}
