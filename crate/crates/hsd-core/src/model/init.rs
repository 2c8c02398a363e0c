//! Seeded weight initialization.

use crate::error::ConfigError;
use crate::model::{
    AttentionWeights, LayerNormWeights, LayerWeights, MlpWeights, ModelBundle, ModelConfig,
};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

/// Half-width of the uniform weight distribution.
pub const WEIGHT_SCALE: f32 = 0.08;

/// Builds a bundle with deterministic pseudo-random weights.
///
/// Projection matrices and embeddings are drawn uniformly from
/// `[-WEIGHT_SCALE, WEIGHT_SCALE]`; biases start at zero and layer norms at
/// identity (gamma 1, beta 0). Random tensors consume the SplitMix64 stream
/// in the canonical serialization order, and draws are quantized to `f32`
/// before conversion, so the same `(config, seed)` produces bit-identical
/// bundles for every scalar type width.
pub fn init_random<T: Scalar>(
    config: &ModelConfig,
    seed: u64,
) -> Result<ModelBundle<T>, ConfigError> {
    config.validate()?;
    let mut rng = SplitMix64::new(seed);
    let mut uniform = |len: usize| -> Vec<T> {
        (0..len)
            .map(|_| T::from_f32_exact((rng.next_f32() * 2.0 - 1.0) * WEIGHT_SCALE))
            .collect()
    };
    let zeros = |len: usize| vec![T::zero(); len];
    let ones = |len: usize| vec![T::one(); len];

    let d = config.hidden_size;
    let ff = config.ff_size();
    let token_embedding = uniform(config.vocab_size * d);
    let position_embedding = uniform(config.max_positions * d);
    let mut layers = Vec::with_capacity(config.num_layers);
    for _ in 0..config.num_layers {
        layers.push(LayerWeights {
            ln1: LayerNormWeights {
                gamma: ones(d),
                beta: zeros(d),
            },
            attn: AttentionWeights {
                w_q: uniform(d * d),
                b_q: zeros(d),
                w_k: uniform(d * d),
                b_k: zeros(d),
                w_v: uniform(d * d),
                b_v: zeros(d),
                w_o: uniform(d * d),
                b_o: zeros(d),
            },
            ln2: LayerNormWeights {
                gamma: ones(d),
                beta: zeros(d),
            },
            mlp: MlpWeights {
                w_fc: uniform(d * ff),
                b_fc: zeros(ff),
                w_proj: uniform(ff * d),
                b_proj: zeros(d),
            },
        });
    }
    let final_norm = LayerNormWeights {
        gamma: ones(d),
        beta: zeros(d),
    };
    let lm_head = uniform(d * config.vocab_size);
    Ok(ModelBundle {
        config: *config,
        token_embedding,
        position_embedding,
        layers,
        final_norm,
        lm_head,
    })
}
