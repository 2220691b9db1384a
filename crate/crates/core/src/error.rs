use thiserror::Error;

use crate::model::Stage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{0} must be non-empty")]
    EmptyField(&'static str),
    #[error("duplicate entity type `{0}`")]
    DuplicateType(String),
    #[error("stage cannot move backward from {from} to {to}")]
    StageRegression { from: Stage, to: Stage },
}
