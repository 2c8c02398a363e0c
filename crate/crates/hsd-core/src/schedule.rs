//! Per-token layer schedules.
//!
//! Four depth policies decide which transformer layers run for the token at
//! generation position `t`:
//!
//! * `Full` — every layer, every token.
//! * `Hierarchical` — a fixed stride pattern: keep layer `i` iff
//!   `i mod (stride + 1) == 0` (1-based indices).
//! * `SkipDecode` — a descending budget of top layers: the token at
//!   position `t` runs the highest `budget(t)` layers, where the budget
//!   falls linearly from `e_max` at `t = 0` to `e_min` at `t >= t_max`.
//! * `Hsd` — the union of the stride pattern with the descending top band,
//!   so a small budget is redistributed over a fixed backbone.
//!
//! All operations are pure functions of their arguments. Positions count
//! generated tokens only, starting at 0; prompt tokens are always run at
//! full depth by the decoding loops.

use thiserror::Error;

/// Which of the four depth policies a [`ScheduleConfig`] selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Full,
    Hierarchical,
    SkipDecode,
    Hsd,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("num_layers must be at least 1")]
    ZeroLayers,
    #[error("t_max must be at least 1")]
    ZeroHorizon,
    #[error(
        "exit bounds must satisfy e_min <= e_max <= num_layers \
         (e_min={e_min}, e_max={e_max}, num_layers={num_layers})"
    )]
    ExitBounds {
        e_min: usize,
        e_max: usize,
        num_layers: usize,
    },
    #[error("stride {stride} leaves no layers to keep out of {num_layers}")]
    StrideTooLarge { stride: usize, num_layers: usize },
    #[error("layer index {index} outside [1, {num_layers}]")]
    LayerOutOfRange { index: usize, num_layers: usize },
    #[error("layer indices must be strictly increasing")]
    UnsortedLayers,
    #[error("sequence lengths must be non-empty, each at least 1")]
    BadLengths,
}

/// Sorted set of 1-based layer indices: the per-token depth decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSet {
    indices: Vec<usize>,
}

impl LayerSet {
    /// Builds a set from 1-based indices, enforcing strict ordering and the
    /// `[1, num_layers]` range.
    pub fn new(indices: Vec<usize>, num_layers: usize) -> Result<Self, ScheduleError> {
        for window in indices.windows(2) {
            if window[0] >= window[1] {
                return Err(ScheduleError::UnsortedLayers);
            }
        }
        for &index in &indices {
            if index < 1 || index > num_layers {
                return Err(ScheduleError::LayerOutOfRange { index, num_layers });
            }
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
        }
    }

    /// `{1, ..., num_layers}`.
    pub fn full(num_layers: usize) -> Self {
        Self {
            indices: (1..=num_layers).collect(),
        }
    }

    pub fn contains(&self, layer: usize) -> bool {
        self.indices.binary_search(&layer).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn max(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    /// Merge of two sorted sets.
    pub fn union(&self, other: &LayerSet) -> LayerSet {
        let mut merged = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            let (a, b) = (self.indices[i], other.indices[j]);
            if a < b {
                merged.push(a);
                i += 1;
            } else if b < a {
                merged.push(b);
                j += 1;
            } else {
                merged.push(a);
                i += 1;
                j += 1;
            }
        }
        merged.extend_from_slice(&self.indices[i..]);
        merged.extend_from_slice(&other.indices[j..]);
        LayerSet { indices: merged }
    }

    pub fn is_subset_of(&self, other: &LayerSet) -> bool {
        self.indices.iter().all(|&layer| other.contains(layer))
    }
}

/// Hyperparameters for the scheduled policies.
///
/// Invariants checked by [`ScheduleConfig::validate`]:
/// `0 <= e_min <= e_max <= num_layers`, `t_max >= 1`, and for the stride
/// policies `stride + 1 <= num_layers` (an all-skip pattern is forbidden).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConfig {
    pub policy: PolicyKind,
    /// Layers skipped between kept layers in the stride pattern.
    pub stride: usize,
    pub e_min: usize,
    pub e_max: usize,
    /// Planning horizon in generated tokens; the budget bottoms out at
    /// `e_min` there. Positions past the horizon stay clamped at `e_min`.
    pub t_max: usize,
    pub num_layers: usize,
}

impl ScheduleConfig {
    pub fn full(num_layers: usize) -> Self {
        Self {
            policy: PolicyKind::Full,
            stride: 0,
            e_min: 0,
            e_max: 0,
            t_max: 1,
            num_layers,
        }
    }

    pub fn hierarchical(num_layers: usize, stride: usize) -> Self {
        Self {
            policy: PolicyKind::Hierarchical,
            stride,
            e_min: 0,
            e_max: 0,
            t_max: 1,
            num_layers,
        }
    }

    pub fn skip_decode(num_layers: usize, e_min: usize, e_max: usize, t_max: usize) -> Self {
        Self {
            policy: PolicyKind::SkipDecode,
            stride: 0,
            e_min,
            e_max,
            t_max,
            num_layers,
        }
    }

    pub fn hsd(num_layers: usize, stride: usize, e_min: usize, e_max: usize, t_max: usize) -> Self {
        Self {
            policy: PolicyKind::Hsd,
            stride,
            e_min,
            e_max,
            t_max,
            num_layers,
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.num_layers == 0 {
            return Err(ScheduleError::ZeroLayers);
        }
        if self.t_max == 0 {
            return Err(ScheduleError::ZeroHorizon);
        }
        if self.e_min > self.e_max || self.e_max > self.num_layers {
            return Err(ScheduleError::ExitBounds {
                e_min: self.e_min,
                e_max: self.e_max,
                num_layers: self.num_layers,
            });
        }
        if matches!(self.policy, PolicyKind::Hierarchical | PolicyKind::Hsd)
            && self.stride + 1 > self.num_layers
        {
            return Err(ScheduleError::StrideTooLarge {
                stride: self.stride,
                num_layers: self.num_layers,
            });
        }
        Ok(())
    }

    /// Scheduled layer count for the token at generation position `t`:
    /// `floor((t'*e_min + (t_max - t')*e_max) / t_max)` with
    /// `t' = min(t, t_max)`. Non-increasing in `t`, bounded by
    /// `[e_min, e_max]`.
    pub fn budget(&self, t: usize) -> Result<usize, ScheduleError> {
        self.validate()?;
        let clamped = t.min(self.t_max);
        Ok((clamped * self.e_min + (self.t_max - clamped) * self.e_max) / self.t_max)
    }

    /// The stride pattern `{i | 1 <= i <= L, i mod (stride + 1) == 0}`.
    /// `stride = 0` keeps every layer.
    pub fn hierarchical_set(&self) -> Result<LayerSet, ScheduleError> {
        self.validate()?;
        if self.stride + 1 > self.num_layers {
            return Err(ScheduleError::StrideTooLarge {
                stride: self.stride,
                num_layers: self.num_layers,
            });
        }
        let step = self.stride + 1;
        Ok(LayerSet {
            indices: (1..=self.num_layers).filter(|i| i % step == 0).collect(),
        })
    }

    /// The top band `{i | L - budget(t) < i <= L}`, exactly `budget(t)`
    /// layers.
    pub fn top_set(&self, t: usize) -> Result<LayerSet, ScheduleError> {
        let budget = self.budget(t)?;
        Ok(LayerSet {
            indices: (self.num_layers - budget + 1..=self.num_layers).collect(),
        })
    }

    /// The layers the token at generation position `t` executes under this
    /// policy.
    ///
    /// Never empty for `Full`, `Hierarchical` and `Hsd`. `SkipDecode` may
    /// return an empty set once the budget reaches zero; the engine then
    /// treats the token as an embedding passthrough.
    pub fn executed_set(&self, t: usize) -> Result<LayerSet, ScheduleError> {
        self.validate()?;
        match self.policy {
            PolicyKind::Full => Ok(LayerSet::full(self.num_layers)),
            PolicyKind::Hierarchical => self.hierarchical_set(),
            PolicyKind::SkipDecode => self.top_set(t),
            PolicyKind::Hsd => Ok(self.hierarchical_set()?.union(&self.top_set(t)?)),
        }
    }

    /// Mean executed-layer count over every (sequence, position) pair where
    /// each sequence of length `n` contributes positions `0..n`.
    pub fn expected_avg_layers(&self, lengths: &[usize]) -> Result<f64, ScheduleError> {
        self.validate()?;
        if lengths.is_empty() || lengths.contains(&0) {
            return Err(ScheduleError::BadLengths);
        }
        let mut total_layers = 0u64;
        let mut total_positions = 0u64;
        for &len in lengths {
            for t in 0..len {
                total_layers += self.executed_set(t)?.len() as u64;
            }
            total_positions += len as u64;
        }
        Ok(total_layers as f64 / total_positions as f64)
    }
}
