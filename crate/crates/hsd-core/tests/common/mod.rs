//! Shared test support: an independent full-depth reference implementation
//! of the forward pass and a few fixture helpers.
//!
//! The reference recomputes the whole sequence from scratch at every step —
//! no cache, no masking, its own kernels — while keeping the same
//! per-value summation order as the engine, so full-depth results must
//! match the engine bit for bit.

#![allow(dead_code)]

pub mod naive_metrics;

use hsd_core::model::{ModelBundle, ModelConfig};
use hsd_core::rng::SplitMix64;

fn matvec(
    x: &[f32],
    weight: &[f32],
    bias: Option<&[f32]>,
    in_dim: usize,
    out_dim: usize,
) -> Vec<f32> {
    let mut out = Vec::with_capacity(out_dim);
    for j in 0..out_dim {
        let mut acc = bias.map_or(0.0, |b| b[j]);
        for i in 0..in_dim {
            acc += x[i] * weight[i * out_dim + j];
        }
        out.push(acc);
    }
    out
}

fn layer_norm(x: &[f32], gamma: &[f32], beta: &[f32], eps: f32) -> Vec<f32> {
    let n = x.len() as f32;
    let mut sum = 0.0f32;
    for &v in x {
        sum += v;
    }
    let mean = sum / n;
    let mut var_sum = 0.0f32;
    for &v in x {
        let d = v - mean;
        var_sum += d * d;
    }
    let denom = (var_sum / n + eps).sqrt();
    (0..x.len())
        .map(|i| (x[i] - mean) / denom * gamma[i] + beta[i])
        .collect()
}

fn softmax(xs: &[f32]) -> Vec<f32> {
    let mut max = f32::NEG_INFINITY;
    for &v in xs {
        if v > max {
            max = v;
        }
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0f32;
    for &v in xs {
        let e = (v - max).exp();
        out.push(e);
        sum += e;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

fn gelu(x: f32) -> f32 {
    let half = 0.5f64 as f32;
    let sqrt_2_over_pi = 0.7978845608028654f64 as f32;
    let coeff = 0.044715f64 as f32;
    let x3 = x * x * x;
    half * x * (1.0 + (sqrt_2_over_pi * (x + coeff * x3)).tanh())
}

/// Full-depth forward over the whole token sequence; returns the logits at
/// every position.
// Index-based loops on purpose: the summation order is the contract here.
#[allow(clippy::needless_range_loop)]
pub fn reference_logits_all(bundle: &ModelBundle<f32>, tokens: &[u32]) -> Vec<Vec<f32>> {
    let cfg = &bundle.config;
    let d = cfg.hidden_size;
    let heads = cfg.num_heads;
    let head_dim = d / heads;
    let eps = cfg.layernorm_epsilon;
    let scale = (head_dim as f32).sqrt();

    let mut hiddens: Vec<Vec<f32>> = tokens
        .iter()
        .enumerate()
        .map(|(position, &token)| {
            let tok = &bundle.token_embedding[token as usize * d..(token as usize + 1) * d];
            let pos = &bundle.position_embedding[position * d..(position + 1) * d];
            (0..d).map(|i| tok[i] + pos[i]).collect()
        })
        .collect();

    for weights in &bundle.layers {
        let normed: Vec<Vec<f32>> = hiddens
            .iter()
            .map(|h| layer_norm(h, &weights.ln1.gamma, &weights.ln1.beta, eps))
            .collect();
        let qs: Vec<Vec<f32>> = normed
            .iter()
            .map(|x| matvec(x, &weights.attn.w_q, Some(&weights.attn.b_q), d, d))
            .collect();
        let ks: Vec<Vec<f32>> = normed
            .iter()
            .map(|x| matvec(x, &weights.attn.w_k, Some(&weights.attn.b_k), d, d))
            .collect();
        let vs: Vec<Vec<f32>> = normed
            .iter()
            .map(|x| matvec(x, &weights.attn.w_v, Some(&weights.attn.b_v), d, d))
            .collect();
        for p in 0..hiddens.len() {
            let mut att = vec![0.0f32; d];
            for h in 0..heads {
                let lo = h * head_dim;
                let mut scores = Vec::with_capacity(p + 1);
                for past in 0..=p {
                    let mut dot = 0.0f32;
                    for i in 0..head_dim {
                        dot += qs[p][lo + i] * ks[past][lo + i];
                    }
                    scores.push(dot / scale);
                }
                let weights_sm = softmax(&scores);
                for past in 0..=p {
                    let w = weights_sm[past];
                    for i in 0..head_dim {
                        att[lo + i] += w * vs[past][lo + i];
                    }
                }
            }
            let proj = matvec(&att, &weights.attn.w_o, Some(&weights.attn.b_o), d, d);
            for i in 0..d {
                hiddens[p][i] += proj[i];
            }
            let normed2 = layer_norm(&hiddens[p], &weights.ln2.gamma, &weights.ln2.beta, eps);
            let mut ff = matvec(
                &normed2,
                &weights.mlp.w_fc,
                Some(&weights.mlp.b_fc),
                d,
                cfg.ff_size(),
            );
            for x in ff.iter_mut() {
                *x = gelu(*x);
            }
            let ff_out = matvec(
                &ff,
                &weights.mlp.w_proj,
                Some(&weights.mlp.b_proj),
                cfg.ff_size(),
                d,
            );
            for i in 0..d {
                hiddens[p][i] += ff_out[i];
            }
        }
    }

    hiddens
        .iter()
        .map(|h| {
            let normed = layer_norm(h, &bundle.final_norm.gamma, &bundle.final_norm.beta, eps);
            matvec(&normed, &bundle.lm_head, None, d, cfg.vocab_size)
        })
        .collect()
}

/// Logits for the last position only.
pub fn reference_last_logits(bundle: &ModelBundle<f32>, tokens: &[u32]) -> Vec<f32> {
    reference_logits_all(bundle, tokens).pop().unwrap()
}

fn argmax(xs: &[f32]) -> usize {
    let mut best = 0;
    let mut best_val = xs[0];
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// Full-depth greedy decoding by whole-sequence recomputation at every
/// step. Returns the generated ids and the logits that chose each of them.
pub fn reference_greedy(
    bundle: &ModelBundle<f32>,
    prompt: &[u32],
    max_new_tokens: usize,
) -> (Vec<u32>, Vec<Vec<f32>>) {
    let mut sequence = prompt.to_vec();
    let mut generated = Vec::new();
    let mut chosen_logits = Vec::new();
    for _ in 0..max_new_tokens {
        let logits = reference_last_logits(bundle, &sequence);
        let token = argmax(&logits) as u32;
        chosen_logits.push(logits);
        sequence.push(token);
        generated.push(token);
    }
    (generated, chosen_logits)
}

pub fn toy_config(
    num_layers: usize,
    hidden_size: usize,
    num_heads: usize,
    vocab_size: usize,
    max_positions: usize,
) -> ModelConfig {
    ModelConfig {
        num_layers,
        hidden_size,
        num_heads,
        vocab_size,
        max_positions,
        layernorm_epsilon: 1e-5,
    }
}

pub fn random_prompt(rng: &mut SplitMix64, len: usize, vocab_size: usize) -> Vec<u32> {
    (0..len)
        .map(|_| rng.next_below(vocab_size as u64) as u32)
        .collect()
}

/// Brute-force schedule oracle: evaluates the set comprehensions directly,
/// independent of the schedule module.
pub mod schedule_oracle {
    use hsd_core::schedule::PolicyKind;

    pub fn budget(e_min: usize, e_max: usize, t_max: usize, t: usize) -> usize {
        let tp = t.min(t_max);
        (tp * e_min + (t_max - tp) * e_max) / t_max
    }

    pub fn executed_set(
        policy: PolicyKind,
        num_layers: usize,
        stride: usize,
        e_min: usize,
        e_max: usize,
        t_max: usize,
        t: usize,
    ) -> Vec<usize> {
        let b = budget(e_min, e_max, t_max, t);
        let keep = |i: usize| -> bool {
            match policy {
                PolicyKind::Full => true,
                PolicyKind::Hierarchical => i.is_multiple_of(stride + 1),
                PolicyKind::SkipDecode => i > num_layers - b,
                PolicyKind::Hsd => i.is_multiple_of(stride + 1) || i > num_layers - b,
            }
        };
        (1..=num_layers).filter(|&i| keep(i)).collect()
    }
}
