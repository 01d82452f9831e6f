use snn_delay::config::ConfigError;
use snn_delay::data::DataError;
use snn_delay::gradcheck::GradCheckError;
use snn_delay::train::settings::SettingsError;
use snn_delay::train::{CheckpointError, TrainError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Numeric(_) => 3,
        }
    }

    pub fn io(what: &std::path::Path, e: std::io::Error) -> Self {
        Self::Data(format!("{}: {e}", what.display()))
    }
}

impl From<SettingsError> for CliError {
    fn from(e: SettingsError) -> Self {
        match e {
            SettingsError::Io { .. } => Self::Data(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Usage(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Shape(_) | CheckpointError::Config(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            _ if e.is_numeric() => Self::Numeric(e.to_string()),
            TrainError::Config(c) => c.into(),
            TrainError::Data(d) => d.into(),
            TrainError::Checkpoint(c) => c.into(),
            TrainError::Learn(_) => Self::Data(e.to_string()),
            TrainError::NonFiniteLoss { .. } | TrainError::Input(_) => Self::Usage(e.to_string()),
        }
    }
}

impl From<GradCheckError> for CliError {
    fn from(e: GradCheckError) -> Self {
        match e {
            GradCheckError::Config(c) => c.into(),
            GradCheckError::Learn(_) => Self::Numeric(e.to_string()),
        }
    }
}
