//! Minimal decoder-only transformer with per-token layer masking.
//!
//! Architecture: token + position embeddings, a stack of pre-norm residual
//! blocks (attention then a 4x GELU feed-forward), a final layer norm and a
//! bias-free LM head. A layer that is not in the token's executed set is a
//! residual passthrough: the hidden state flows through unchanged and
//! nothing is written to the cache at that `(layer, position)`.
//!
//! Layer indices are 1-based at every public boundary, matching the
//! schedule module; storage is 0-based internally.

mod init;
mod io;
mod kv;

pub use init::{init_random, WEIGHT_SCALE};
pub use io::{
    bundle_checksum, decode_bundle, encode_bundle, load_bundle, save_bundle, FormatError,
};
pub use kv::{KvCache, Provenance};

use crate::error::{ConfigError, EngineError};
use crate::scalar::Scalar;
use crate::schedule::LayerSet;
use crate::tensor::{all_finite, layer_norm, matvec};

/// Shape of a transformer stack. The feed-forward inner width is fixed at
/// `4 * hidden_size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub layernorm_epsilon: f32,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_layers == 0 {
            return Err(ConfigError::ZeroLayers);
        }
        if self.num_heads == 0
            || self.hidden_size < self.num_heads
            || !self.hidden_size.is_multiple_of(self.num_heads)
        {
            return Err(ConfigError::HeadSplit {
                hidden_size: self.hidden_size,
                num_heads: self.num_heads,
            });
        }
        if self.vocab_size < 2 {
            return Err(ConfigError::VocabTooSmall);
        }
        if self.max_positions == 0 {
            return Err(ConfigError::ZeroPositions);
        }
        if !self.layernorm_epsilon.is_finite() || self.layernorm_epsilon <= 0.0 {
            return Err(ConfigError::BadEpsilon);
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn ff_size(&self) -> usize {
        4 * self.hidden_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormWeights<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T> {
    pub w_q: Vec<T>,
    pub b_q: Vec<T>,
    pub w_k: Vec<T>,
    pub b_k: Vec<T>,
    pub w_v: Vec<T>,
    pub b_v: Vec<T>,
    pub w_o: Vec<T>,
    pub b_o: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights<T> {
    pub w_fc: Vec<T>,
    pub b_fc: Vec<T>,
    pub w_proj: Vec<T>,
    pub b_proj: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights<T> {
    pub ln1: LayerNormWeights<T>,
    pub attn: AttentionWeights<T>,
    pub ln2: LayerNormWeights<T>,
    pub mlp: MlpWeights<T>,
}

/// Immutable weights plus config; shareable across any number of decode
/// sessions and threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<T> {
    pub config: ModelConfig,
    /// `[vocab_size, hidden_size]` row-major.
    pub token_embedding: Vec<T>,
    /// `[max_positions, hidden_size]` row-major.
    pub position_embedding: Vec<T>,
    pub layers: Vec<LayerWeights<T>>,
    pub final_norm: LayerNormWeights<T>,
    /// `[hidden_size, vocab_size]` row-major, no bias.
    pub lm_head: Vec<T>,
}

impl<T: Scalar> ModelBundle<T> {
    /// All tensors in the canonical serialization order.
    pub fn tensors(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = vec![
            ("token_embedding".into(), &self.token_embedding),
            ("position_embedding".into(), &self.position_embedding),
        ];
        for (idx, layer) in self.layers.iter().enumerate() {
            let l = idx + 1;
            out.push((format!("layer{l}.ln1.gamma"), &layer.ln1.gamma));
            out.push((format!("layer{l}.ln1.beta"), &layer.ln1.beta));
            out.push((format!("layer{l}.attn.w_q"), &layer.attn.w_q));
            out.push((format!("layer{l}.attn.b_q"), &layer.attn.b_q));
            out.push((format!("layer{l}.attn.w_k"), &layer.attn.w_k));
            out.push((format!("layer{l}.attn.b_k"), &layer.attn.b_k));
            out.push((format!("layer{l}.attn.w_v"), &layer.attn.w_v));
            out.push((format!("layer{l}.attn.b_v"), &layer.attn.b_v));
            out.push((format!("layer{l}.attn.w_o"), &layer.attn.w_o));
            out.push((format!("layer{l}.attn.b_o"), &layer.attn.b_o));
            out.push((format!("layer{l}.ln2.gamma"), &layer.ln2.gamma));
            out.push((format!("layer{l}.ln2.beta"), &layer.ln2.beta));
            out.push((format!("layer{l}.mlp.w_fc"), &layer.mlp.w_fc));
            out.push((format!("layer{l}.mlp.b_fc"), &layer.mlp.b_fc));
            out.push((format!("layer{l}.mlp.w_proj"), &layer.mlp.w_proj));
            out.push((format!("layer{l}.mlp.b_proj"), &layer.mlp.b_proj));
        }
        out.push(("final_norm.gamma".into(), &self.final_norm.gamma));
        out.push(("final_norm.beta".into(), &self.final_norm.beta));
        out.push(("lm_head".into(), &self.lm_head));
        out
    }
}

/// One token's hidden vector at a layer boundary. Entries are finite by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState<T> {
    values: Vec<T>,
}

impl<T: Scalar> HiddenState<T> {
    pub fn new(values: Vec<T>) -> Result<Self, EngineError> {
        if !all_finite(&values) {
            return Err(EngineError::NonFinite {
                context: "hidden state",
            });
        }
        Ok(Self { values })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Incremental forward pass of a single token.
///
/// [`TokenForward::begin`] embeds the token; [`TokenForward::run_layer`]
/// executes one block (layers must be visited in ascending order). The
/// confidence-gated decode loop drives this directly so it can project
/// logits between layers; masked decoding goes through [`forward_token`].
pub struct TokenForward<'a, T: Scalar> {
    bundle: &'a ModelBundle<T>,
    cache: &'a mut KvCache<T>,
    position: usize,
    hidden: Vec<T>,
    normed: Vec<T>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    att: Vec<T>,
    proj: Vec<T>,
    ff: Vec<T>,
    ff_out: Vec<T>,
    scores: Vec<T>,
}

impl<'a, T: Scalar> TokenForward<'a, T> {
    pub fn begin(
        bundle: &'a ModelBundle<T>,
        cache: &'a mut KvCache<T>,
        token_id: u32,
        position: usize,
    ) -> Result<Self, EngineError> {
        let cfg = &bundle.config;
        if token_id as usize >= cfg.vocab_size {
            return Err(EngineError::TokenOutOfRange {
                token: token_id,
                vocab_size: cfg.vocab_size,
            });
        }
        if position >= cfg.max_positions {
            return Err(EngineError::PositionOverflow {
                position,
                max_positions: cfg.max_positions,
            });
        }
        if cache.num_layers() != cfg.num_layers
            || cache.width() != cfg.hidden_size
            || cache.max_positions() != cfg.max_positions
        {
            return Err(EngineError::InvalidRequest(
                "cache was created for a different model shape".into(),
            ));
        }
        let d = cfg.hidden_size;
        let tok = &bundle.token_embedding[token_id as usize * d..(token_id as usize + 1) * d];
        let pos = &bundle.position_embedding[position * d..(position + 1) * d];
        let mut hidden = vec![T::zero(); d];
        for i in 0..d {
            hidden[i] = tok[i] + pos[i];
        }
        Ok(Self {
            bundle,
            cache,
            position,
            hidden,
            normed: vec![T::zero(); d],
            q: vec![T::zero(); d],
            k: vec![T::zero(); d],
            v: vec![T::zero(); d],
            att: vec![T::zero(); d],
            proj: vec![T::zero(); d],
            ff: vec![T::zero(); cfg.ff_size()],
            ff_out: vec![T::zero(); d],
            scores: Vec::new(),
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    /// Hidden state as it stands, before the final norm. This is the block
    /// input a higher layer would see.
    pub fn raw_hidden(&self) -> &[T] {
        &self.hidden
    }

    /// Executes the block at 1-based `layer`: pre-norm attention with a
    /// residual add, then pre-norm feed-forward with a residual add. Writes
    /// this position's key/value rows at `layer` tagged `Computed`, and
    /// fails with a decoding-integrity error if any attended position is
    /// absent from the cache at this layer.
    pub fn run_layer(&mut self, layer: usize) -> Result<(), EngineError> {
        let cfg = &self.bundle.config;
        if layer < 1 || layer > cfg.num_layers {
            return Err(EngineError::LayerOutOfRange {
                layer,
                num_layers: cfg.num_layers,
            });
        }
        let d = cfg.hidden_size;
        let heads = cfg.num_heads;
        let head_dim = cfg.head_dim();
        let eps = T::from_f32_exact(cfg.layernorm_epsilon);
        let weights = &self.bundle.layers[layer - 1];

        // Attention half.
        layer_norm(
            &self.hidden,
            &weights.ln1.gamma,
            &weights.ln1.beta,
            eps,
            &mut self.normed,
        );
        matvec(
            &self.normed,
            &weights.attn.w_q,
            Some(&weights.attn.b_q),
            d,
            d,
            &mut self.q,
        );
        matvec(
            &self.normed,
            &weights.attn.w_k,
            Some(&weights.attn.b_k),
            d,
            d,
            &mut self.k,
        );
        matvec(
            &self.normed,
            &weights.attn.w_v,
            Some(&weights.attn.b_v),
            d,
            d,
            &mut self.v,
        );
        self.cache
            .store(layer, self.position, &self.k, &self.v, Provenance::Computed);
        for p in 0..=self.position {
            self.cache.check(layer, p)?;
        }

        let scale = T::from_usize(head_dim).unwrap().sqrt();
        self.att.fill(T::zero());
        for h in 0..heads {
            let head = h * head_dim..(h + 1) * head_dim;
            self.scores.clear();
            for p in 0..=self.position {
                let key = &self.cache.key_raw(layer, p)[head.clone()];
                let q = &self.q[head.clone()];
                let mut dot = T::zero();
                for i in 0..head_dim {
                    dot += q[i] * key[i];
                }
                self.scores.push(dot / scale);
            }
            crate::tensor::softmax_in_place(&mut self.scores);
            for p in 0..=self.position {
                let value = &self.cache.value_raw(layer, p)[head.clone()];
                let w = self.scores[p];
                let out = &mut self.att[head.clone()];
                for i in 0..head_dim {
                    out[i] += w * value[i];
                }
            }
        }
        matvec(
            &self.att,
            &weights.attn.w_o,
            Some(&weights.attn.b_o),
            d,
            d,
            &mut self.proj,
        );
        for i in 0..d {
            self.hidden[i] = self.hidden[i] + self.proj[i];
        }

        // Feed-forward half.
        layer_norm(
            &self.hidden,
            &weights.ln2.gamma,
            &weights.ln2.beta,
            eps,
            &mut self.normed,
        );
        matvec(
            &self.normed,
            &weights.mlp.w_fc,
            Some(&weights.mlp.b_fc),
            d,
            cfg.ff_size(),
            &mut self.ff,
        );
        for x in self.ff.iter_mut() {
            *x = crate::tensor::gelu(*x);
        }
        matvec(
            &self.ff,
            &weights.mlp.w_proj,
            Some(&weights.mlp.b_proj),
            cfg.ff_size(),
            d,
            &mut self.ff_out,
        );
        for i in 0..d {
            self.hidden[i] = self.hidden[i] + self.ff_out[i];
        }
        Ok(())
    }

    /// Final-normed view of the current hidden state, ready for the LM
    /// head.
    pub fn normed_hidden(&self) -> Result<HiddenState<T>, EngineError> {
        let cfg = &self.bundle.config;
        let mut out = vec![T::zero(); cfg.hidden_size];
        layer_norm(
            &self.hidden,
            &self.bundle.final_norm.gamma,
            &self.bundle.final_norm.beta,
            T::from_f32_exact(cfg.layernorm_epsilon),
            &mut out,
        );
        HiddenState::new(out)
    }
}

/// Runs one token through the layers in `layers` (ascending), leaving all
/// other layers as residual passthroughs, and returns the final-normed top
/// hidden state. An empty set degrades to final-norm of the embedding.
pub fn forward_token<T: Scalar>(
    bundle: &ModelBundle<T>,
    cache: &mut KvCache<T>,
    token_id: u32,
    position: usize,
    layers: &LayerSet,
) -> Result<HiddenState<T>, EngineError> {
    if let Some(max) = layers.max() {
        if max > bundle.config.num_layers {
            return Err(EngineError::LayerOutOfRange {
                layer: max,
                num_layers: bundle.config.num_layers,
            });
        }
    }
    let mut forward = TokenForward::begin(bundle, cache, token_id, position)?;
    for layer in layers.iter() {
        forward.run_layer(layer)?;
    }
    forward.normed_hidden()
}

/// Repairs the cache above an early exit: for every layer above
/// `from_layer`, projects `hidden` through that layer's input norm and
/// key/value weights and stores the rows tagged `Copied`, as if the block
/// input at each remaining layer were the exit hidden state.
///
/// `hidden` must be the raw (pre-final-norm) hidden state at the exit.
/// `from_layer == num_layers` is a no-op.
pub fn kv_fill_copied<T: Scalar>(
    bundle: &ModelBundle<T>,
    cache: &mut KvCache<T>,
    position: usize,
    from_layer: usize,
    hidden: &[T],
) -> Result<(), EngineError> {
    let cfg = &bundle.config;
    if from_layer < 1 || from_layer > cfg.num_layers {
        return Err(EngineError::LayerOutOfRange {
            layer: from_layer,
            num_layers: cfg.num_layers,
        });
    }
    if position >= cfg.max_positions {
        return Err(EngineError::PositionOverflow {
            position,
            max_positions: cfg.max_positions,
        });
    }
    let d = cfg.hidden_size;
    let eps = T::from_f32_exact(cfg.layernorm_epsilon);
    let mut normed = vec![T::zero(); d];
    let mut k = vec![T::zero(); d];
    let mut v = vec![T::zero(); d];
    for layer in from_layer + 1..=cfg.num_layers {
        let weights = &bundle.layers[layer - 1];
        layer_norm(
            hidden,
            &weights.ln1.gamma,
            &weights.ln1.beta,
            eps,
            &mut normed,
        );
        matvec(
            &normed,
            &weights.attn.w_k,
            Some(&weights.attn.b_k),
            d,
            d,
            &mut k,
        );
        matvec(
            &normed,
            &weights.attn.w_v,
            Some(&weights.attn.b_v),
            d,
            d,
            &mut v,
        );
        cache.store(layer, position, &k, &v, Provenance::Copied);
    }
    Ok(())
}

/// LM-head projection of a hidden state: a `vocab_size` vector of logits.
pub fn logits<T: Scalar>(
    bundle: &ModelBundle<T>,
    hidden: &HiddenState<T>,
) -> Result<Vec<T>, EngineError> {
    let cfg = &bundle.config;
    if hidden.len() != cfg.hidden_size {
        return Err(EngineError::InvalidRequest(format!(
            "hidden state width {} does not match hidden_size {}",
            hidden.len(),
            cfg.hidden_size
        )));
    }
    let mut out = vec![T::zero(); cfg.vocab_size];
    matvec(
        hidden.as_slice(),
        &bundle.lm_head,
        None,
        cfg.hidden_size,
        cfg.vocab_size,
        &mut out,
    );
    if !all_finite(&out) {
        return Err(EngineError::NonFinite { context: "logits" });
    }
    Ok(out)
}
