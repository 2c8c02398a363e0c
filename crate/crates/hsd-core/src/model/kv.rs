//! Validity-tracked key/value cache.
//!
//! One cache belongs to one decode session. Every `(layer, position)` slot
//! is either absent or holds key/value rows tagged with how they were
//! produced. Attention reads go through [`KvCache::key`]/[`KvCache::value`],
//! which turn a read of an absent slot into a hard decoding-integrity error
//! instead of silently returning zeros.

use crate::error::EngineError;
use crate::model::ModelConfig;
use crate::scalar::Scalar;

/// How a cache entry was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Written by actually executing the layer at that position.
    Computed,
    /// Projected from a lower layer's hidden state after an early exit.
    Copied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvCache<T> {
    num_layers: usize,
    width: usize,
    max_positions: usize,
    keys: Vec<T>,
    values: Vec<T>,
    state: Vec<Option<Provenance>>,
}

impl<T: Scalar> KvCache<T> {
    pub fn new(config: &ModelConfig) -> Self {
        let slots = config.num_layers * config.max_positions;
        Self {
            num_layers: config.num_layers,
            width: config.hidden_size,
            max_positions: config.max_positions,
            keys: vec![T::zero(); slots * config.hidden_size],
            values: vec![T::zero(); slots * config.hidden_size],
            state: vec![None; slots],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn max_positions(&self) -> usize {
        self.max_positions
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn slot(&self, layer: usize, position: usize) -> usize {
        debug_assert!((1..=self.num_layers).contains(&layer));
        debug_assert!(position < self.max_positions);
        (layer - 1) * self.max_positions + position
    }

    /// Provenance of the entry at 1-based `layer` and `position`, `None` if
    /// nothing was stored there.
    pub fn provenance(&self, layer: usize, position: usize) -> Option<Provenance> {
        self.state[self.slot(layer, position)]
    }

    /// Key row for `(layer, position)`; reading an absent entry is a
    /// decoding-integrity error.
    pub fn key(&self, layer: usize, position: usize) -> Result<&[T], EngineError> {
        self.check(layer, position)?;
        Ok(self.key_raw(layer, position))
    }

    /// Value row for `(layer, position)`; same contract as [`KvCache::key`].
    pub fn value(&self, layer: usize, position: usize) -> Result<&[T], EngineError> {
        self.check(layer, position)?;
        Ok(self.value_raw(layer, position))
    }

    pub(crate) fn check(&self, layer: usize, position: usize) -> Result<(), EngineError> {
        if self.state[self.slot(layer, position)].is_none() {
            return Err(EngineError::CacheMiss { layer, position });
        }
        Ok(())
    }

    pub(crate) fn key_raw(&self, layer: usize, position: usize) -> &[T] {
        let start = self.slot(layer, position) * self.width;
        &self.keys[start..start + self.width]
    }

    pub(crate) fn value_raw(&self, layer: usize, position: usize) -> &[T] {
        let start = self.slot(layer, position) * self.width;
        &self.values[start..start + self.width]
    }

    pub(crate) fn store(
        &mut self,
        layer: usize,
        position: usize,
        key: &[T],
        value: &[T],
        provenance: Provenance,
    ) {
        debug_assert_eq!(key.len(), self.width);
        debug_assert_eq!(value.len(), self.width);
        let slot = self.slot(layer, position);
        let start = slot * self.width;
        self.keys[start..start + self.width].copy_from_slice(key);
        self.values[start..start + self.width].copy_from_slice(value);
        self.state[slot] = Some(provenance);
    }
}
