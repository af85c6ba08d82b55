use std::path::PathBuf;

/// Errors raised by the kriging, validation and experiment routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid size: requested {requested}, available {available}")]
    InvalidSize { requested: usize, available: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("parse error in {path} at row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: pivot {index} is {pivot:e}")]
    SingularSystem { index: usize, pivot: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("negative prediction variance {0:e}")]
    NegativeVariance(f64),

    #[error("posterior degenerate: {0}")]
    PosteriorDegenerate(String),

    #[error("criterion undefined: {0}")]
    UndefinedCriterion(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used as the reason code in experiment tables.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDesign(_) => "invalid_design",
            Error::InvalidSize { .. } => "invalid_size",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::Parse { .. } => "parse",
            Error::Domain(_) => "domain",
            Error::SingularSystem { .. } => "singular_system",
            Error::Fit(_) => "fit",
            Error::DegenerateData(_) => "degenerate_data",
            Error::NegativeVariance(_) => "negative_variance",
            Error::PosteriorDegenerate(_) => "posterior_degenerate",
            Error::UndefinedCriterion(_) => "undefined_criterion",
            Error::Fold { source, .. } => source.code(),
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    /// True for failures of the numerical routines (as opposed to bad input or IO).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularSystem { .. }
            | Error::Fit(_)
            | Error::DegenerateData(_)
            | Error::NegativeVariance(_)
            | Error::PosteriorDegenerate(_)
            | Error::UndefinedCriterion(_) => true,
            Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
