use alloc::string::String;
use core::fmt;

/// Errors produced by the decoding, training, and evaluation primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A record in a corpus or vocabulary file could not be parsed.
    Parse { index: usize, message: String },
    /// A configuration value violates its contract.
    Config(String),
    /// An argument is outside its mathematical domain.
    Domain(String),
    /// Tensor dimensions do not line up.
    Shape(String),
    /// Paired inputs have mismatched lengths or unjoinable ids.
    InputMismatch(String),
    /// Training loss became non-finite.
    Divergence { epoch: usize, step: usize, loss: f64 },
    /// A ratio-based diagnostic has a zero denominator.
    UndefinedRatio(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Parse { index, message } => {
                write!(f, "parse error at record {index}: {message}")
            }
            CoreError::Config(msg) => write!(f, "configuration error: {msg}"),
            CoreError::Domain(msg) => write!(f, "domain error: {msg}"),
            CoreError::Shape(msg) => write!(f, "shape error: {msg}"),
            CoreError::InputMismatch(msg) => write!(f, "input mismatch: {msg}"),
            CoreError::Divergence { epoch, step, loss } => write!(
                f,
                "training diverged at epoch {epoch}, step {step}: loss {loss}"
            ),
            CoreError::UndefinedRatio(msg) => write!(f, "undefined ratio: {msg}"),
        }
    }
}

impl core::error::Error for CoreError {}
