use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("csv header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown address id `{0}`")]
    UnknownAddress(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid value for `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("unmapped category code `{code}` for variable `{variable}`")]
    UnmappedCode { variable: String, code: String },

    #[error("degenerate agreement: all ratings fall in a single category")]
    DegenerateAgreement,

    #[error("invalid rating table: {0}")]
    RatingTable(String),

    #[error("kappa {0} outside [-1, 1]")]
    KappaOutOfRange(f64),

    #[error("at least 2 raters required")]
    TooFewRaters,

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("offsets must be strictly positive and finite (row {0})")]
    NonPositiveOffset(usize),

    #[error("quasi-separation: coefficient for `{column}` diverged ({value:.3})")]
    QuasiSeparation { column: String, value: f64 },

    #[error("model did not converge")]
    NotConverged,

    #[error("design columns do not match the fitted model: missing {missing:?}, unexpected {unexpected:?}")]
    ColumnMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("Lorenz curve undefined: total outcome is zero")]
    UndefinedLorenz,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("no successful trials")]
    NoSuccessfulTrials,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Field {
            field: field.into(),
            message: message.into(),
        }
    }
}
