use thiserror::Error;

use crate::config::Origin;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error{}: {message}", location(.origin))]
    Config { origin: Origin, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] dobscope_core::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn location(origin: &Origin) -> String {
    match origin {
        Origin::Line(n) => format!(" at line {n}"),
        Origin::Flag => " in --set".into(),
        Origin::Resolved => String::new(),
    }
}

impl CliError {
    pub fn config(origin: Origin, message: String) -> Self {
        CliError::Config { origin, message }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use dobscope_core::Error as E;
        match self {
            CliError::Config { .. } => 2,
            // bad inputs that only surface inside the analysis
            CliError::Numerical(E::InvalidParams(_) | E::InvalidGrid(_) | E::BadBracket { .. }) => {
                2
            }
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}
