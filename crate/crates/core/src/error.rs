use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    Dimension {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("length mismatch in {op}: expected {expected}, got {got}")]
    Length {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{op}: requested zero samples")]
    EmptyRequest { op: &'static str },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("utterance {id:?} too short: need {needed} {unit}, got {got}")]
    TooShort {
        id: String,
        needed: usize,
        got: usize,
        unit: &'static str,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("model kind mismatch: {0}")]
    ModelKind(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::Dimension {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }
}
