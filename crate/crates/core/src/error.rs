use thiserror::Error;

/// Errors raised anywhere in the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An explainer call failed while a metric was running.
    #[error("explainer failed at {context}: {source}")]
    Explainer {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("bridge error: {0}")]
    Bridge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn explainer(context: impl Into<String>, source: Error) -> Self {
        Error::Explainer {
            context: context.into(),
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
