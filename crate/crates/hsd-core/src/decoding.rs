//! Autoregressive generation: greedy and beam search under a depth policy.
//!
//! Prompt tokens always run at full depth; generated tokens are scheduled
//! by the policy, with generation positions counted from 0. The token
//! chosen at step `t` is immediately forwarded under the policy's depth
//! decision for position `t`, which produces the distribution for step
//! `t + 1` and is what the per-position layer accounting reflects.
//!
//! Determinism: argmax ties resolve to the lowest token id; beam ranking
//! ties resolve by score first, then lexicographically smaller token
//! sequence. Scores are plain sums of per-token log probabilities with no
//! length normalization.

use crate::confidence::{softmax_response, ConfidencePolicy};
use crate::error::EngineError;
use crate::model::{forward_token, kv_fill_copied, logits, KvCache, ModelBundle, TokenForward};
use crate::scalar::Scalar;
use crate::schedule::{LayerSet, ScheduleConfig};
use crate::tensor::{argmax, softmax_in_place};

/// The per-token depth decision: a fixed schedule or a confidence gate.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthPolicy<T> {
    Scheduled(ScheduleConfig),
    Confidence(ConfidencePolicy<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRequest<T> {
    pub prompt: Vec<u32>,
    pub max_new_tokens: usize,
    pub beam_width: usize,
    pub policy: DepthPolicy<T>,
    pub eos_token_id: Option<u32>,
}

/// Outcome of one decode: generated ids plus the layer accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub token_ids: Vec<u32>,
    pub per_position_layer_counts: Vec<usize>,
    /// Exit layer per generated position; present for confidence policies.
    pub per_position_exit_layer: Option<Vec<usize>>,
    /// Sum of the chosen tokens' log probabilities.
    pub sequence_logprob: f64,
    pub avg_layers: f64,
}

fn validate_request<T: Scalar>(
    bundle: &ModelBundle<T>,
    request: &DecodeRequest<T>,
) -> Result<(), EngineError> {
    let cfg = &bundle.config;
    if request.prompt.is_empty() {
        return Err(EngineError::InvalidRequest(
            "prompt must be non-empty".into(),
        ));
    }
    if request.max_new_tokens == 0 {
        return Err(EngineError::InvalidRequest(
            "max_new_tokens must be at least 1".into(),
        ));
    }
    if request.beam_width == 0 {
        return Err(EngineError::InvalidRequest(
            "beam_width must be at least 1".into(),
        ));
    }
    let last_position = request.prompt.len() + request.max_new_tokens - 1;
    if last_position >= cfg.max_positions {
        return Err(EngineError::PositionOverflow {
            position: last_position,
            max_positions: cfg.max_positions,
        });
    }
    for &token in &request.prompt {
        if token as usize >= cfg.vocab_size {
            return Err(EngineError::TokenOutOfRange {
                token,
                vocab_size: cfg.vocab_size,
            });
        }
    }
    match &request.policy {
        DepthPolicy::Scheduled(schedule) => {
            schedule.validate()?;
            if schedule.num_layers != cfg.num_layers {
                return Err(EngineError::InvalidRequest(format!(
                    "schedule is for {} layers but the model has {}",
                    schedule.num_layers, cfg.num_layers
                )));
            }
        }
        DepthPolicy::Confidence(policy) => {
            if policy.num_layers() != cfg.num_layers {
                return Err(EngineError::InvalidRequest(format!(
                    "confidence policy is for {} layers but the model has {}",
                    policy.num_layers(),
                    cfg.num_layers
                )));
            }
        }
    }
    Ok(())
}

/// Runs the prompt at full depth and returns the next-token distribution
/// from its last position.
fn prefill<T: Scalar>(
    bundle: &ModelBundle<T>,
    cache: &mut KvCache<T>,
    prompt: &[u32],
) -> Result<Vec<T>, EngineError> {
    let full = LayerSet::full(bundle.config.num_layers);
    let mut last = None;
    for (position, &token) in prompt.iter().enumerate() {
        last = Some(forward_token(bundle, cache, token, position, &full)?);
    }
    let mut dist = logits(bundle, &last.expect("prompt is non-empty"))?;
    softmax_in_place(&mut dist);
    Ok(dist)
}

struct StepOutput<T> {
    dist: Vec<T>,
    layers_executed: usize,
    exit_layer: Option<usize>,
}

/// Forwards one generated token at `position` under the policy's decision
/// for generation step `gen_t` and returns the next distribution.
fn policy_step<T: Scalar>(
    bundle: &ModelBundle<T>,
    cache: &mut KvCache<T>,
    token: u32,
    position: usize,
    gen_t: usize,
    policy: &DepthPolicy<T>,
) -> Result<StepOutput<T>, EngineError> {
    match policy {
        DepthPolicy::Scheduled(schedule) => {
            let layers = schedule.executed_set(gen_t)?;
            let hidden = forward_token(bundle, cache, token, position, &layers)?;
            let mut dist = logits(bundle, &hidden)?;
            softmax_in_place(&mut dist);
            Ok(StepOutput {
                dist,
                layers_executed: layers.len(),
                exit_layer: None,
            })
        }
        DepthPolicy::Confidence(policy) => {
            let num_layers = bundle.config.num_layers;
            let mut exit: Option<(usize, Vec<T>, Vec<T>)> = None;
            {
                let mut forward = TokenForward::begin(bundle, cache, token, position)?;
                for layer in 1..=num_layers {
                    forward.run_layer(layer)?;
                    if !policy.check_layers().contains(layer) {
                        continue;
                    }
                    let normed = forward.normed_hidden()?;
                    let mut dist = logits(bundle, &normed)?;
                    softmax_in_place(&mut dist);
                    let score = softmax_response(&dist)?;
                    if policy.should_exit(layer, score) {
                        exit = Some((layer, dist, forward.raw_hidden().to_vec()));
                        break;
                    }
                }
            }
            let (layer, dist, hidden) =
                exit.expect("the top layer is a forced exit and is always checked");
            if layer < num_layers {
                kv_fill_copied(bundle, cache, position, layer, &hidden)?;
            }
            Ok(StepOutput {
                dist,
                layers_executed: layer,
                exit_layer: Some(layer),
            })
        }
    }
}

/// Highest-probability token with ties resolved to the lowest id, plus its
/// log probability.
fn select_top<T: Scalar>(dist: &[T]) -> (u32, f64) {
    let index = argmax(dist);
    (index as u32, dist[index].to_f64().unwrap().ln())
}

/// Top `k` tokens ordered by probability descending, ties by lowest id.
fn top_candidates<T: Scalar>(dist: &[T], k: usize) -> Vec<(u32, f64)> {
    let mut ids: Vec<u32> = (0..dist.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        let pa = dist[a as usize].to_f64().unwrap();
        let pb = dist[b as usize].to_f64().unwrap();
        pb.total_cmp(&pa).then(a.cmp(&b))
    });
    ids.truncate(k);
    ids.into_iter()
        .map(|id| (id, dist[id as usize].to_f64().unwrap().ln()))
        .collect()
}

fn build_record(
    tokens: Vec<u32>,
    layer_counts: Vec<usize>,
    exit_layers: Option<Vec<usize>>,
    sequence_logprob: f64,
) -> GenerationRecord {
    let avg_layers = layer_counts.iter().sum::<usize>() as f64 / layer_counts.len() as f64;
    GenerationRecord {
        token_ids: tokens,
        per_position_layer_counts: layer_counts,
        per_position_exit_layer: exit_layers,
        sequence_logprob,
        avg_layers,
    }
}

/// Greedy decoding: each step takes the argmax of the current distribution,
/// stopping after `max_new_tokens` or once the eos token is emitted (the
/// eos token itself is kept and accounted).
pub fn decode_greedy<T: Scalar>(
    bundle: &ModelBundle<T>,
    request: &DecodeRequest<T>,
) -> Result<GenerationRecord, EngineError> {
    validate_request(bundle, request)?;
    let confidence = matches!(request.policy, DepthPolicy::Confidence(_));
    let mut cache = KvCache::new(&bundle.config);
    let mut dist = prefill(bundle, &mut cache, &request.prompt)?;
    let mut tokens = Vec::new();
    let mut layer_counts = Vec::new();
    let mut exit_layers = Vec::new();
    let mut sequence_logprob = 0.0f64;
    for gen_t in 0..request.max_new_tokens {
        let (token, logprob) = select_top(&dist);
        let position = request.prompt.len() + gen_t;
        let step = policy_step(bundle, &mut cache, token, position, gen_t, &request.policy)?;
        tokens.push(token);
        layer_counts.push(step.layers_executed);
        if let Some(exit) = step.exit_layer {
            exit_layers.push(exit);
        }
        sequence_logprob += logprob;
        if request.eos_token_id == Some(token) {
            break;
        }
        dist = step.dist;
    }
    Ok(build_record(
        tokens,
        layer_counts,
        confidence.then_some(exit_layers),
        sequence_logprob,
    ))
}

struct Hypothesis<T: Scalar> {
    tokens: Vec<u32>,
    logprob: f64,
    cache: KvCache<T>,
    dist: Vec<T>,
    layer_counts: Vec<usize>,
    exit_layers: Vec<usize>,
    finished: bool,
}

enum Candidate {
    Carry { beam: usize },
    Extend { beam: usize, token: u32 },
}

/// Beam search over sum-of-logprob scores (no length normalization).
///
/// Position-scheduled policies apply identically to every beam at a given
/// step; confidence policies gate each hypothesis separately. Hypotheses
/// that emit eos are frozen and keep competing on score; when the step
/// budget runs out, still-live hypotheses compete as they stand. Each
/// extension forks its parent's cache, so sibling beams never share cache
/// state.
pub fn decode_beam<T: Scalar>(
    bundle: &ModelBundle<T>,
    request: &DecodeRequest<T>,
) -> Result<GenerationRecord, EngineError> {
    validate_request(bundle, request)?;
    let confidence = matches!(request.policy, DepthPolicy::Confidence(_));
    let width = request.beam_width;
    let mut cache = KvCache::new(&bundle.config);
    let dist = prefill(bundle, &mut cache, &request.prompt)?;
    let mut beams = vec![Hypothesis {
        tokens: Vec::new(),
        logprob: 0.0,
        cache,
        dist,
        layer_counts: Vec::new(),
        exit_layers: Vec::new(),
        finished: false,
    }];

    for gen_t in 0..request.max_new_tokens {
        if beams.iter().all(|beam| beam.finished) {
            break;
        }
        let mut candidates: Vec<(f64, Vec<u32>, Candidate)> = Vec::new();
        for (index, hypothesis) in beams.iter().enumerate() {
            if hypothesis.finished {
                candidates.push((
                    hypothesis.logprob,
                    hypothesis.tokens.clone(),
                    Candidate::Carry { beam: index },
                ));
                continue;
            }
            for (token, logprob) in top_candidates(&hypothesis.dist, width) {
                let mut sequence = hypothesis.tokens.clone();
                sequence.push(token);
                candidates.push((
                    hypothesis.logprob + logprob,
                    sequence,
                    Candidate::Extend { beam: index, token },
                ));
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        candidates.truncate(width);

        let mut next = Vec::with_capacity(candidates.len());
        for (score, _, candidate) in candidates {
            match candidate {
                Candidate::Carry { beam } => {
                    let parent = &beams[beam];
                    next.push(Hypothesis {
                        tokens: parent.tokens.clone(),
                        logprob: parent.logprob,
                        cache: parent.cache.clone(),
                        dist: parent.dist.clone(),
                        layer_counts: parent.layer_counts.clone(),
                        exit_layers: parent.exit_layers.clone(),
                        finished: true,
                    });
                }
                Candidate::Extend { beam, token } => {
                    let parent = &beams[beam];
                    let mut cache = parent.cache.clone();
                    let position = request.prompt.len() + gen_t;
                    let step =
                        policy_step(bundle, &mut cache, token, position, gen_t, &request.policy)?;
                    let mut tokens = parent.tokens.clone();
                    tokens.push(token);
                    let mut layer_counts = parent.layer_counts.clone();
                    layer_counts.push(step.layers_executed);
                    let mut exit_layers = parent.exit_layers.clone();
                    if let Some(exit) = step.exit_layer {
                        exit_layers.push(exit);
                    }
                    next.push(Hypothesis {
                        tokens,
                        logprob: score,
                        cache,
                        dist: step.dist,
                        layer_counts,
                        exit_layers,
                        finished: request.eos_token_id == Some(token),
                    });
                }
            }
        }
        beams = next;
    }

    beams.sort_by(|a, b| {
        b.logprob
            .total_cmp(&a.logprob)
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    let best = beams.into_iter().next().expect("beam width is at least 1");
    Ok(build_record(
        best.tokens,
        best.layer_counts,
        confidence.then_some(best.exit_layers),
        best.logprob,
    ))
}
