use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed JSON or CSV input.
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },

    /// Well-formed input that does not follow the expected schema.
    #[error("schema violation in field `{field}`: {msg}")]
    Schema { field: String, msg: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A matrix that must be inverted was singular even after jitter.
    #[error("singular {what} at timestep {t}")]
    Singular { what: &'static str, t: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parameter `{name}` = {value} outside bounds [{lo}, {hi}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("all {n} optimizer starts failed: {diagnostics}")]
    AllStartsFailed { n: usize, diagnostics: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn schema(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// True for failures caused by user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Schema { .. }
            | Error::InvalidModel(_)
            | Error::Shape(_)
            | Error::OutOfBounds { .. }
            | Error::InvalidInput(_)
            | Error::Io(_) => true,
            Error::Trial { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}
