use chrono::NaiveDate;
use thiserror::Error;

/// Fatal input problems. Malformed individual rows are not errors; they are
/// skipped and counted by the parsers.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },

    #[error("duplicate price row for ({key}, {date})")]
    DuplicatePrice { key: String, date: NaiveDate },

    #[error("no event sequences in input")]
    EmptyCorpus,

    #[error("{0}")]
    Invalid(String),
}
