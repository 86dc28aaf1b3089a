use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("label {label} outside the class set {{0,1,2,3}}")]
    InvalidLabel { label: u64 },
    #[error("no data rows")]
    NoRows,
    #[error("class {class} has {count} members, needs at least {required}")]
    ClassTooSmall { class: u8, count: usize, required: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("formula `{formula}`: {reason}")]
    Formula { formula: String, reason: String },
    #[error("element {0} missing from the mass table")]
    MissingMass(String),
    #[error("mass table line {line}: {reason}")]
    MassTable { line: usize, reason: String },
    #[error("invalid descriptor record: {0}")]
    InvalidRecord(String),
    #[error("record {row}: {source}")]
    AtRow { row: usize, source: Box<Error> },

    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data needs at least 2 classes")]
    SingleClass,
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
    #[error("fold {fold}: {source}")]
    InFold { fold: usize, source: Box<Error> },

    #[error("length mismatch: {left} true labels vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("class {0} does not occur among the true labels")]
    ClassAbsent(u8),
    #[error("all true labels belong to class {0}; ROC needs negatives")]
    NoNegatives(u8),

    #[error("stage {stage} (seed {seed}): {source}")]
    Stage { stage: &'static str, seed: u64, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_row(self, row: usize) -> Self {
        Error::AtRow { row, source: Box::new(self) }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::InFold { fold, source: Box::new(self) }
    }

    pub(crate) fn in_stage(self, stage: &'static str, seed: u64) -> Self {
        Error::Stage { stage, seed, source: Box::new(self) }
    }
}
