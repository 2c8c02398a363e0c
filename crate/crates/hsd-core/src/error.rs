//! Shared error types for the model and decoding layers.

use thiserror::Error;

use crate::confidence::ConfidenceError;
use crate::schedule::ScheduleError;

/// Model shape invariant violations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("num_layers must be at least 1")]
    ZeroLayers,
    #[error("hidden_size {hidden_size} must be a positive multiple of num_heads {num_heads}")]
    HeadSplit {
        hidden_size: usize,
        num_heads: usize,
    },
    #[error("vocab_size must be at least 2")]
    VocabTooSmall,
    #[error("max_positions must be at least 1")]
    ZeroPositions,
    #[error("layernorm_epsilon must be a finite positive number")]
    BadEpsilon,
}

/// Errors raised while driving the transformer.
///
/// `CacheMiss` is the decoding-integrity signal: an attention read hit an
/// absent cache entry. Under monotone schedules it never fires; under
/// confidence-gated exits the eager key/value repair keeps it from firing.
/// It is never downgraded to a zero fill.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("decoding integrity violated: cache miss at layer {layer}, position {position}")]
    CacheMiss { layer: usize, position: usize },
    #[error("position {position} exceeds max_positions {max_positions}")]
    PositionOverflow {
        position: usize,
        max_positions: usize,
    },
    #[error("token id {token} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange { token: u32, vocab_size: usize },
    #[error("layer {layer} outside model depth {num_layers}")]
    LayerOutOfRange { layer: usize, num_layers: usize },
    #[error("non-finite values produced in {context}")]
    NonFinite { context: &'static str },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Confidence(#[from] ConfidenceError),
}
