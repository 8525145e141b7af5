use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("phrase has no tokens after normalization")]
    EmptyPhrase,
    #[error("token {0:?} is reserved for the pair separator")]
    ReservedToken(String),
    #[error("no training records")]
    EmptyCorpus,
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("duplicate pair id {0:?}")]
    DuplicatePairId(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid feature file: {0}")]
    InvalidFeatureFile(String),
    #[error("unknown image id {0:?}")]
    UnknownImage(String),

    #[error("invalid world spec: {0}")]
    InvalidWorld(String),
    #[error("no feasible pair after {0} consecutive resamples")]
    InfeasibleWorld(usize),
    #[error("unknown value {value:?} for slot {slot:?}")]
    UnknownSlotValue { slot: String, value: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("checkpoint manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("empty beam")]
    EmptyBeam,
    #[error("empty lambda grid")]
    EmptyGrid,
    #[error("lambda {0} outside [0, 1]")]
    InvalidLambda(f64),

    #[error("pair {pair_id} target {target} lacks rank {rank}")]
    MissingRanks { pair_id: String, target: String, rank: usize },
    #[error("task {task_id} has {got} answers, panel needs {need}")]
    IncompletePanel { task_id: String, got: usize, need: usize },

    #[error("requested {requested} lexicon entries but only {available} distinct")]
    KTooLarge { requested: usize, available: usize },
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("empty query")]
    EmptyQuery,
    #[error("empty category")]
    EmptyCategory,

    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("requested {requested} tasks but only {available} available")]
    InsufficientTasks { requested: usize, available: usize },
    #[error("voter {voter:?} already answered task {task_id}")]
    DuplicateAnswer { task_id: String, voter: String },
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is closed")]
    SessionClosed(String),
    #[error("{incomplete} tasks lack a full panel")]
    IncompletePanels { incomplete: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable code, used on the wire by the session service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyPhrase => "EmptyPhrase",
            Error::ReservedToken(_) => "ReservedToken",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::ParseError { .. } => "ParseError",
            Error::DuplicatePairId(_) => "DuplicatePairId",
            Error::InvalidRecord(_) => "InvalidRecord",
            Error::InvalidFeatureFile(_) => "InvalidFeatureFile",
            Error::UnknownImage(_) => "UnknownImage",
            Error::InvalidWorld(_) => "InvalidWorld",
            Error::InfeasibleWorld(_) => "InfeasibleWorld",
            Error::UnknownSlotValue { .. } => "UnknownSlotValue",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFiniteGradient(_) => "NonFiniteGradient",
            Error::VocabMismatch(_) => "VocabMismatch",
            Error::ManifestMismatch(_) => "ManifestMismatch",
            Error::EmptyBeam => "EmptyBeam",
            Error::EmptyGrid => "EmptyGrid",
            Error::InvalidLambda(_) => "InvalidLambda",
            Error::MissingRanks { .. } => "MissingRanks",
            Error::IncompletePanel { .. } => "IncompletePanel",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::DegenerateLabels(_) => "DegenerateLabels",
            Error::EmptyQuery => "EmptyQuery",
            Error::EmptyCategory => "EmptyCategory",
            Error::ConfigError(_) => "ConfigError",
            Error::InsufficientTasks { .. } => "InsufficientTasks",
            Error::DuplicateAnswer { .. } => "DuplicateAnswer",
            Error::UnknownTask(_) => "UnknownTask",
            Error::UnknownSession(_) => "UnknownSession",
            Error::SessionClosed(_) => "SessionClosed",
            Error::IncompletePanels { .. } => "IncompletePanels",
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
            Error::Image(_) => "Image",
        }
    }
}
