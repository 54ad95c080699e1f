use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid thread operation: {0}")]
    Thread(String),

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("template `{template}` has no binding for placeholder {{{placeholder}}}")]
    MissingBinding { template: String, placeholder: String },

    #[error("malformed template `{template}`: {message}")]
    Template { template: String, message: String },

    #[error("backend transport error: {0}")]
    Transport(String),

    #[error("backend timed out after {0} ms")]
    Timeout(u64),

    #[error("malformed backend response: {0}")]
    MalformedResponse(String),

    #[error("unparseable persona response: {0}")]
    UnparseablePersona(String),

    #[error("generated post body is empty")]
    EmptyBody,

    #[error("persona generation exhausted {attempts} attempts: {reason}")]
    PersonaExhausted { attempts: usize, reason: String },

    #[error("unknown article source `{0}`")]
    UnknownSource(String),

    #[error("malformed article {path}: {message}")]
    MalformedArticle { path: PathBuf, message: String },

    #[error("duplicate article id `{id}` in {path}")]
    DuplicateArticle { id: String, path: PathBuf },

    #[error("depth {0} is outside 0..=6")]
    DepthOutOfRange(i64),

    #[error("inconsistent rating scale: {0}")]
    Scale(String),

    #[error("ratings line {line}: {message}")]
    RatingsLine { line: usize, message: String },

    #[error("no rating records to aggregate")]
    EmptyRatings,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the operation may succeed if simply repeated.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::Timeout(_))
    }

    /// Whether the error comes from a bad input or configuration rather
    /// than from something going wrong while running.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Thread(_)
                | Error::Transport(_)
                | Error::Timeout(_)
                | Error::MalformedResponse(_)
                | Error::UnparseablePersona(_)
                | Error::EmptyBody
                | Error::PersonaExhausted { .. }
        )
    }
}
