use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input text. `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A loaded structure violates one of its invariants.
    #[error("{0}")]
    Validation(String),

    #[error("unknown receiver {0}")]
    UnknownReceiver(i64),

    #[error("unknown room {0:?}")]
    UnknownRoom(String),

    #[error("{0}")]
    Shape(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("no path between rooms {0} and {1}")]
    Unreachable(usize, usize),

    #[error("training diverged at iteration {0} (loss is not finite)")]
    Diverged(usize),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable category used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) | Error::UnknownReceiver(_) | Error::UnknownRoom(_) => "schema",
            Error::Shape(_) => "shape",
            Error::InvalidArgument(_) => "argument",
            Error::Unreachable(..) => "graph",
            Error::Diverged(_) => "training",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
