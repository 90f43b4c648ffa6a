use thiserror::Error;

use crate::corpus::CorpusError;
use crate::distfit::FitError;
use crate::encode::EncodeError;
use crate::netkit::NetError;
use crate::sampler::SampleError;
use crate::synthkit::SynthError;
use crate::trends::TrendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error, wrapping the per-module error enums.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Trend(#[from] TrendError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Corpus(_) => "corpus",
            Error::Encode(_) => "encode",
            Error::Sample(_) => "sample",
            Error::Fit(_) => "fit",
            Error::Net(_) => "network",
            Error::Trend(_) => "trend",
            Error::Synth(_) => "synth",
            Error::ConfigMismatch(_) => "config_mismatch",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
