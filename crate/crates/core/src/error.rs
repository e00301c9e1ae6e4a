use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at position {index}{}", context_suffix(.asset, .day))]
    NonFinite {
        index: usize,
        asset: Option<String>,
        day: Option<NaiveDate>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data for {what}: need at least {needed}, got {got}")]
    InsufficientData {
        what: String,
        needed: usize,
        got: usize,
    },

    #[error("design matrix is rank deficient; collinear columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("asset `{0}` not found")]
    MissingAsset(String),

    #[error("quantile {0} not present")]
    MissingQuantile(f64),

    #[error("{context}: {source}")]
    Context {
        context: String,
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

fn context_suffix(asset: &Option<String>, day: &Option<NaiveDate>) -> String {
    match (asset, day) {
        (Some(a), Some(d)) => format!(" (asset {a}, day {d})"),
        (Some(a), None) => format!(" (asset {a})"),
        (None, Some(d)) => format!(" (day {d})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Attach (asset, day) coordinates to a per-day failure.
    pub(crate) fn at_cell(self, asset: &str, day: NaiveDate) -> Self {
        match self {
            Error::NonFinite { index, .. } => Error::NonFinite {
                index,
                asset: Some(asset.to_string()),
                day: Some(day),
            },
            other => other.context(format!("asset {asset}, day {day}")),
        }
    }
}
