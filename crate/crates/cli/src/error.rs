use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{0}")]
    Io(String),

    #[error("assembly error in {module}: {source}")]
    Assembly {
        module: &'static str,
        #[source]
        source: symdir_core::Error,
    },

    #[error("report error: {0}")]
    Report(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps a core error with the module it came from.
    pub fn in_module(module: &'static str) -> impl FnOnce(symdir_core::Error) -> Self {
        move |source| CliError::Assembly { module, source }
    }
}
