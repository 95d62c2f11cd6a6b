use thiserror::Error;

/// Errors raised by the thermometry toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain on which a quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model, prior or simulation setting failed validation.
    #[error("configuration error: {0}")]
    Config(String),

    /// The posterior could not be updated, e.g. every node has zero weight.
    #[error("inference error: {0}")]
    Inference(String),

    /// A trajectory aborted; carries the repetition at which it failed.
    #[error("trajectory failed at step {step}: {source}")]
    Trajectory {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
