//! Depth-adaptive inference engine for decoder-only transformers.
//!
//! The engine decodes autoregressively while a per-token depth policy
//! decides which transformer layers run: full depth, a fixed stride
//! pattern, a descending top-layer budget (skip-decode), the union of both
//! (hsd), or a confidence-gated early exit (calm). A validity-tracked KV
//! cache turns any attention read of a never-written slot into a hard
//! error; the scheduled policies make such reads impossible by
//! construction (later tokens execute subsets of earlier tokens' layers)
//! and the confidence policy repairs skipped layers by projecting the exit
//! hidden state upward.
//!
//! The numeric core is generic over the scalar type ([`Scalar`]: `f32` or
//! `f64`). `f32` is the reference arithmetic — weight files store `f32`
//! and all golden values pin `f32` bit patterns — and the aliases below
//! name the `f32` instantiations the harness and CLI work with.

pub mod confidence;
pub mod decoding;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod tensor;

pub use scalar::Scalar;

pub type ModelBundleF32 = model::ModelBundle<f32>;
pub type ModelBundleF64 = model::ModelBundle<f64>;
pub type KvCacheF32 = model::KvCache<f32>;
pub type KvCacheF64 = model::KvCache<f64>;
pub type HiddenStateF32 = model::HiddenState<f32>;
pub type HiddenStateF64 = model::HiddenState<f64>;
pub type ConfidencePolicyF32 = confidence::ConfidencePolicy<f32>;
pub type ConfidencePolicyF64 = confidence::ConfidencePolicy<f64>;
pub type DepthPolicyF32 = decoding::DepthPolicy<f32>;
pub type DepthPolicyF64 = decoding::DepthPolicy<f64>;
pub type DecodeRequestF32 = decoding::DecodeRequest<f32>;
pub type DecodeRequestF64 = decoding::DecodeRequest<f64>;
