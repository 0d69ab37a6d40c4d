use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error classes, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Estimation,
    Calibration,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Estimation => 4,
            ErrorClass::Calibration => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Data => "data",
            ErrorClass::Estimation => "estimation",
            ErrorClass::Calibration => "calibration",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error(
        "near-singular denominator: |sum x^2 y| = {denominator:e} is below {threshold:e}; \
         the third-moment ratio is ill-defined when the latent coefficient is (close to) zero \
         or the latent regressor has no skewness; use the divide-and-conquer estimator instead"
    )]
    NearSingularDenominator { denominator: f64, threshold: f64 },

    #[error("degenerate block {block}: denominator sum is exactly zero")]
    DegenerateBlock { block: usize },

    #[error("all {0} subsample estimates were degenerate")]
    AllBlocksDegenerate(usize),

    #[error("n = {n} is not divisible by 2B = {two_b}; discard rows first")]
    Divisibility { n: usize, two_b: usize },

    #[error("too many blocks: B = {blocks} exceeds n/2 = {half}")]
    TooManyBlocks { blocks: usize, half: usize },

    #[error("degenerate covariance: {0}")]
    Degeneracy(String),

    #[error("calibration error: sigma_y^2 = {sigma_y_sq} must exceed var(xi*beta + z*gamma) = {signal_var}")]
    Calibration { sigma_y_sq: f64, signal_var: f64 },

    #[error("replication {replication}: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("window {start}-{end}: {source}")]
    Window {
        start: i64,
        end: i64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parameter(_) => ErrorClass::Usage,
            Error::Schema(_)
            | Error::Data(_)
            | Error::Parse { .. }
            | Error::NotFound(_)
            | Error::InsufficientData(_)
            | Error::Divisibility { .. }
            | Error::TooManyBlocks { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
            Error::SingularDesign(_)
            | Error::NearSingularDenominator { .. }
            | Error::DegenerateBlock { .. }
            | Error::AllBlocksDegenerate(_)
            | Error::Degeneracy(_) => ErrorClass::Estimation,
            Error::Calibration { .. } => ErrorClass::Calibration,
            Error::Replication { source, .. } | Error::Window { source, .. } => source.class(),
        }
    }
}
