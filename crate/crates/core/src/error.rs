use thiserror::Error;

use crate::corpus::CorpusError;
use crate::dynamics::DynamicsError;
use crate::evaluation::EvalError;
use crate::pruning::PruneError;
use crate::scores::ScoreError;
use crate::trainer::TrainError;

/// Crate-level error: one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
