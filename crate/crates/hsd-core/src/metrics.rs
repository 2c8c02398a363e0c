//! Reference-based text quality metrics and corpus statistics.
//!
//! All metrics share one tokenizer: lowercase, punctuation characters split
//! into their own tokens, then whitespace split. Scores are percentages in
//! `[0, 100]` and are only comparable between texts scored by this module.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("candidate and reference lists differ in length ({candidates} vs {references})")]
    MismatchedLengths {
        candidates: usize,
        references: usize,
    },
    #[error("candidate and reference lists must be non-empty")]
    EmptyInput,
}

/// Aggregate quality row: ROUGE/BLEU percentages, the mean executed-layer
/// count of the run that produced the candidates, and the corpus novelty
/// statistics of reference over input.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub bleu1: f64,
    pub avg_layers: f64,
    pub novel_unigram_pct: f64,
    pub novel_bigram_pct: f64,
}

/// Lowercases, splits punctuation into standalone tokens, then splits on
/// whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(|c| c.to_lowercase()) {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn f1_pct(overlap: f64, candidate_total: f64, reference_total: f64) -> f64 {
    if candidate_total == 0.0 || reference_total == 0.0 {
        return 0.0;
    }
    let precision = overlap / candidate_total;
    let recall = overlap / reference_total;
    if precision + recall == 0.0 {
        return 0.0;
    }
    100.0 * 2.0 * precision * recall / (precision + recall)
}

/// ROUGE-N as an F1 over clipped n-gram counts, in `[0, 100]`. Empty
/// candidate or reference (after tokenization) scores 0.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    let candidate = tokenize(candidate);
    let reference = tokenize(reference);
    let candidate_counts = ngram_counts(&candidate, n);
    let reference_counts = ngram_counts(&reference, n);
    let overlap: usize = candidate_counts
        .iter()
        .map(|(gram, count)| (*count).min(*reference_counts.get(gram).unwrap_or(&0)))
        .sum();
    let candidate_total: usize = candidate_counts.values().sum();
    let reference_total: usize = reference_counts.values().sum();
    f1_pct(
        overlap as f64,
        candidate_total as f64,
        reference_total as f64,
    )
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(row[j])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// ROUGE-L: F1 over the longest common subsequence, in `[0, 100]`.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let candidate = tokenize(candidate);
    let reference = tokenize(reference);
    let lcs = lcs_len(&candidate, &reference);
    f1_pct(lcs as f64, candidate.len() as f64, reference.len() as f64)
}

/// Corpus-level BLEU-1: clipped unigram precision times the brevity
/// penalty `exp(min(0, 1 - ref_len/cand_len))`, in `[0, 100]`.
pub fn bleu1<S: AsRef<str>>(candidates: &[S], references: &[S]) -> Result<f64, MetricsError> {
    if candidates.len() != references.len() {
        return Err(MetricsError::MismatchedLengths {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut clipped = 0usize;
    let mut candidate_len = 0usize;
    let mut reference_len = 0usize;
    for (candidate, reference) in candidates.iter().zip(references.iter()) {
        let candidate = tokenize(candidate.as_ref());
        let reference = tokenize(reference.as_ref());
        let candidate_counts = ngram_counts(&candidate, 1);
        let reference_counts = ngram_counts(&reference, 1);
        clipped += candidate_counts
            .iter()
            .map(|(gram, count)| (*count).min(*reference_counts.get(gram).unwrap_or(&0)))
            .sum::<usize>();
        candidate_len += candidate.len();
        reference_len += reference.len();
    }
    if candidate_len == 0 {
        return Ok(0.0);
    }
    let precision = clipped as f64 / candidate_len as f64;
    let brevity = (1.0 - reference_len as f64 / candidate_len as f64)
        .min(0.0)
        .exp();
    Ok(100.0 * precision * brevity)
}

/// Percentage of distinct reference n-grams that never occur in the input
/// (type-level, deduplicated). A reference shorter than `n` scores 0.
pub fn novel_ngram_pct(input: &str, reference: &str, n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    let input = tokenize(input);
    let reference = tokenize(reference);
    if reference.len() < n {
        return 0.0;
    }
    let input_grams: HashSet<&[String]> = input.windows(n).collect();
    let reference_grams: HashSet<&[String]> = reference.windows(n).collect();
    let unseen = reference_grams
        .iter()
        .filter(|gram| !input_grams.contains(*gram))
        .count();
    100.0 * unseen as f64 / reference_grams.len() as f64
}
