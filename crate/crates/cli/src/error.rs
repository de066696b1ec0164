use gridres_core::engine::EngineError;
use gridres_core::grid::GridError;
use gridres_core::mcdm::McdmError;
use gridres_core::risk::RiskError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("network error: {0}")]
    Network(#[from] GridError),
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
    #[error("{path}: {reason}")]
    Table { path: String, reason: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Mcdm(#[from] McdmError),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CliError>,
    },
    #[error("golden check failed: {0} mismatching entries")]
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Network(_) => 1,
            CliError::Stage { source, .. } => source.exit_code(),
            CliError::Verify(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: &std::path::Path, source: csv::Error) -> Self {
        CliError::Csv {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        CliError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
