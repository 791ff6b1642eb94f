//! Schema-driven ingestion, discretization and token encoding.
//!
//! Column types, numeric bounds and category lists are public inputs and are
//! never derived from the data.

mod chars;
mod dataset;
mod discretize;
mod schema;
mod table;
mod vocab;

use thiserror::Error;

pub use chars::char_corpus_to_table;
pub use dataset::{split_train_val, EncodedDataset};
pub use discretize::{discretize, undiscretize, DEFAULT_BINS};
pub use schema::{ColumnKind, ColumnSpec, Schema};
pub use table::{format_cell, load_csv, parse_cell, read_csv, save_csv, write_csv, Table, Value};
pub use vocab::{ColumnOrder, TokenVocab};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("header {got:?} does not match schema columns {expected:?}")]
    HeaderMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("line {line}, column '{column}': {message}")]
    InvalidCell {
        line: usize,
        column: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("value {value} outside [{min}, {max}]")]
    ValueOutOfRange { value: f64, min: f64, max: f64 },
    #[error("bin {bin} out of range for {bins} bins")]
    BinOutOfRange { bin: usize, bins: usize },
    #[error("token {token} is outside the range of column '{column}'")]
    TokenOutOfRange { column: String, token: u32 },
    #[error("value type does not match column '{column}'")]
    TypeMismatch { column: String },
    #[error("row has {got} cells, expected {expected}")]
    RowWidth { expected: usize, got: usize },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("text corpus is empty")]
    EmptyText,
    #[error("bad dataset cache: {0}")]
    BadCache(String),
}
