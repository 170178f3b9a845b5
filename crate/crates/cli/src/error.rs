use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    ConfigParse(String),
    #[error("{0}")]
    Output(String),
    /// A library error raised while validating the configuration.
    #[error("{0}")]
    Config(acmax::Error),
    /// A library error raised while running.
    #[error("{0}")]
    Run(acmax::Error),
}

impl From<acmax::Error> for CliError {
    fn from(e: acmax::Error) -> Self {
        CliError::Config(e)
    }
}

impl CliError {
    /// `module::Name` of the originating error.
    pub fn qualified_name(&self) -> String {
        match self {
            CliError::ConfigParse(_) => "cli::ConfigParse".into(),
            CliError::Output(_) => "cli::Output".into(),
            CliError::Config(e) | CliError::Run(e) => format!("{}::{}", e.module(), e.name()),
        }
    }

    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigParse(_) | CliError::Config(_) => 1,
            CliError::Output(_) | CliError::Run(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Tags library errors raised after configuration as run failures.
pub(crate) trait RunContext<T> {
    fn running(self) -> CliResult<T>;
}

impl<T> RunContext<T> for acmax::Result<T> {
    fn running(self) -> CliResult<T> {
        self.map_err(CliError::Run)
    }
}
