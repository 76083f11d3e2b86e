use std::fmt;
use std::path::Path;

use datadiet::corpus::CorpusError;
use datadiet::dynamics::DynamicsError;
use datadiet::evaluation::EvalError;
use datadiet::pruning::PruneError;
use datadiet::scores::ScoreError;
use datadiet::trainer::TrainError;

/// Process exit statuses.
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// A failure reported as `DD-ERR:<code> <message>` on stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub exit: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: "usage", exit: EXIT_USAGE, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: "config", exit: EXIT_USAGE, message: message.into() }
    }

    pub fn data(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, exit: EXIT_DATA, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: "internal", exit: EXIT_INTERNAL, message: message.into() }
    }

    pub fn write(path: &Path, err: impl fmt::Display) -> Self {
        Self {
            code: "io",
            exit: EXIT_INTERNAL,
            message: format!("cannot write {}: {err}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the message contains
        write!(f, "DD-ERR:{} {}", self.code, self.message.replace('\n', " "))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidFraction(_) | CorpusError::InvalidFixture(_) => Self::usage(e.to_string()),
            _ => Self::data("corpus", e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => Self::config(e.to_string()),
            TrainError::NonFiniteLoss { .. } | TrainError::NonFiniteParameter { .. } => {
                Self::data("diverged", e.to_string())
            }
            TrainError::EmptyManifest => Self::data("corpus", e.to_string()),
            TrainError::Io { .. } | TrainError::Format(_) => Self::data("checkpoint", e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Train(t) => t.into(),
            _ => Self::data("ddlog", e.to_string()),
        }
    }
}

impl From<ScoreError> for CliError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::MissingNull { .. } => Self::data("missing-null", e.to_string()),
            ScoreError::MissingGradients { .. } => Self::data("missing-gradients", e.to_string()),
            _ => Self::data("score", e.to_string()),
        }
    }
}

impl From<PruneError> for CliError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::InvalidRate(_) => Self::usage(e.to_string()),
            PruneError::InvalidSweep(_) => Self::config(e.to_string()),
            _ => Self::data("prune", e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Rank(p) => p.into(),
            _ => Self::data("eval", e.to_string()),
        }
    }
}
