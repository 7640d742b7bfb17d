use thiserror::Error;

use crate::entry::EpochRecord;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid population: {0}")]
    InvalidPopulation(String),
    #[error("invalid score matrix: {0}")]
    InvalidScores(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("search needs {required} candidates but the budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("softmax needs a scalar type with an exponential")]
    InexactScalar,
    #[error("welfare is undefined for a run that timed out")]
    UndefinedWelfare,
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("fixture `{name}`: {message}")]
    Fixture { name: String, message: String },
    #[error("no trainable signal: {0}")]
    NoSignal(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        trace: Box<Vec<EpochRecord>>,
    },
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;
