//! Confidence scores and descending exit thresholds.
//!
//! The confidence-gated policy (the CALM-style baseline) runs layers bottom
//! up and stops as soon as the softmax-response score of the current
//! intermediate distribution clears a per-layer threshold. The threshold
//! series decreases with depth, so deeper layers need less confidence to
//! exit.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::schedule::LayerSet;

/// Sum tolerance when validating a probability vector.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfidenceError {
    #[error("probabilities sum to {sum}, expected 1 within {NORMALIZATION_TOLERANCE}")]
    NotNormalized { sum: f64 },
    #[error("probability vector needs at least 2 entries, got {len}")]
    TooFewClasses { len: usize },
    #[error("probabilities must be finite")]
    NonFinite,
    #[error("lambda0 must be finite and non-negative")]
    BadLambda,
    #[error("decay d must be finite and non-negative")]
    BadDecay,
    #[error("check_layers must be non-empty and include the final layer {num_layers}")]
    BadCheckLayers { num_layers: usize },
}

/// Early-exit gate: initial threshold `lambda0`, linear decay `d` per
/// layer, and the set of layers at which the gate is consulted.
///
/// `lambda0` is meaningful in `[0, 1]`; values above 1 are accepted and
/// turn the gate off everywhere except the forced exit at the top layer,
/// which reduces the policy to full-depth decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidencePolicy<T> {
    lambda0: T,
    decay: T,
    check_layers: LayerSet,
    num_layers: usize,
}

impl<T: Scalar> ConfidencePolicy<T> {
    pub fn new(
        lambda0: T,
        decay: T,
        check_layers: LayerSet,
        num_layers: usize,
    ) -> Result<Self, ConfidenceError> {
        if !lambda0.is_finite() || lambda0 < T::zero() {
            return Err(ConfidenceError::BadLambda);
        }
        if !decay.is_finite() || decay < T::zero() {
            return Err(ConfidenceError::BadDecay);
        }
        let includes_top = check_layers.max() == Some(num_layers);
        if check_layers.is_empty() || !includes_top {
            return Err(ConfidenceError::BadCheckLayers { num_layers });
        }
        Ok(Self {
            lambda0,
            decay,
            check_layers,
            num_layers,
        })
    }

    /// Gate evaluated after every layer.
    pub fn every_layer(lambda0: T, decay: T, num_layers: usize) -> Result<Self, ConfidenceError> {
        Self::new(lambda0, decay, LayerSet::full(num_layers), num_layers)
    }

    pub fn lambda0(&self) -> T {
        self.lambda0
    }

    pub fn decay(&self) -> T {
        self.decay
    }

    pub fn check_layers(&self) -> &LayerSet {
        &self.check_layers
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    /// Exit threshold at 1-based `layer`: `max(0, lambda0 - d*(layer-1))`,
    /// non-increasing in the layer index.
    pub fn threshold(&self, layer: usize) -> T {
        let steps = T::from_usize(layer - 1).unwrap();
        (self.lambda0 - self.decay * steps).max(T::zero())
    }

    /// True iff `score >= threshold(layer)`; the final layer always exits.
    pub fn should_exit(&self, layer: usize, score: T) -> bool {
        layer == self.num_layers || score >= self.threshold(layer)
    }
}

/// Softmax-response confidence: the gap between the two largest
/// probabilities.
pub fn softmax_response<T: Scalar>(probabilities: &[T]) -> Result<T, ConfidenceError> {
    if probabilities.len() < 2 {
        return Err(ConfidenceError::TooFewClasses {
            len: probabilities.len(),
        });
    }
    let mut sum = 0.0f64;
    for &p in probabilities {
        if !p.is_finite() {
            return Err(ConfidenceError::NonFinite);
        }
        sum += p.to_f64().unwrap();
    }
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(ConfidenceError::NotNormalized { sum });
    }
    let (mut top, mut second) = if probabilities[0] >= probabilities[1] {
        (probabilities[0], probabilities[1])
    } else {
        (probabilities[1], probabilities[0])
    };
    for &p in &probabilities[2..] {
        if p > top {
            second = top;
            top = p;
        } else if p > second {
            second = p;
        }
    }
    Ok(top - second)
}
