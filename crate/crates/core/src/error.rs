use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The cloud cannot survive `stages` halvings.
    #[error("cloud has {actual} points but {stages} stages need at least {required}")]
    TooFewPoints {
        actual: usize,
        required: usize,
        stages: usize,
    },

    #[error("class {class} has {available} samples, episode needs {required}")]
    InsufficientSamples {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("malformed bank data: {0}")]
    Format(String),
}
