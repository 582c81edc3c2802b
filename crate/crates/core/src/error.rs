use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. Variant names are stable and are
/// printed by the CLI, so scripts can match on them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("row {row}, column {column}: value {value:?} is not finite")]
    NonFiniteValue { row: usize, column: String, value: String },
    #[error("row {row}, column {column}: cannot parse {value:?}")]
    Parse { row: usize, column: String, value: String },
    #[error("dataset has no observations")]
    EmptyDataset,
    #[error("row {row}: unlabeled observation in training data")]
    UnlabeledInTraining { row: usize },
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error("subject {subject} has {found} observations, need at least {needed}")]
    TooFewObservations {
        subject: String,
        found: usize,
        needed: usize,
    },
    #[error("matrix has {found} rows, need at least {needed}")]
    TooFewRows { found: usize, needed: usize },
    #[error("subject {subject} has no {class} observations")]
    MissingClass { subject: String, class: &'static str },
    #[error("need at least {needed} points, got {found}")]
    TooFewPoints { found: usize, needed: usize },
    #[error("cluster count {k} outside 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("partition has a single cluster")]
    SingleCluster,
    #[error("every cluster has zero diameter")]
    DegenerateDiameter,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("typology {tc} has {found} observations, need at least {needed}")]
    TooFewObservationsInTC { tc: usize, found: usize, needed: usize },
    #[error("no observations supplied")]
    EmptyObservations,
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("{found} training points for k = {k}")]
    TooFewTrainingPoints { found: usize, k: usize },
    #[error("invalid KNN configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient subjects: {found}, need at least {needed}")]
    InsufficientSubjects { found: usize, needed: usize },
    #[error("assignment maps cover different subjects")]
    SubjectSetMismatch,
    #[error("unsupported schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable variant name, used as the error tag on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "MissingColumn",
            Error::RaggedRow { .. } => "RaggedRow",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::Parse { .. } => "ParseError",
            Error::EmptyDataset => "EmptyDataset",
            Error::UnlabeledInTraining { .. } => "UnlabeledInTraining",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::TooFewObservations { .. } => "TooFewObservations",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::MissingClass { .. } => "MissingClass",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::BadK { .. } => "BadK",
            Error::SingleCluster => "SingleCluster",
            Error::DegenerateDiameter => "DegenerateDiameter",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::TooFewObservationsInTC { .. } => "TooFewObservationsInTC",
            Error::EmptyObservations => "EmptyObservations",
            Error::SingleClassTrainingSet => "SingleClassTrainingSet",
            Error::TooFewTrainingPoints { .. } => "TooFewTrainingPoints",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InsufficientSubjects { .. } => "InsufficientSubjects",
            Error::SubjectSetMismatch => "SubjectSetMismatch",
            Error::SchemaVersion { .. } => "SchemaVersion",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
            Error::Io(_) => "IoError",
        }
    }
}
