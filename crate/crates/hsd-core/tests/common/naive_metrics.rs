//! Naive counting oracle for the text metrics: greedy one-to-one n-gram
//! matching and plain scans, no hash maps, no helpers shared with the
//! metrics module beyond the tokenizer contract.

use hsd_core::metrics::tokenize;

fn ngrams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.to_vec()).collect()
}

/// Clipped overlap via greedy bipartite matching: each candidate n-gram
/// consumes at most one unused reference n-gram.
fn clipped_overlap(candidate: &[Vec<String>], reference: &[Vec<String>]) -> usize {
    let mut used = vec![false; reference.len()];
    let mut overlap = 0;
    for gram in candidate {
        for (i, other) in reference.iter().enumerate() {
            if !used[i] && gram == other {
                used[i] = true;
                overlap += 1;
                break;
            }
        }
    }
    overlap
}

fn f1_pct(overlap: f64, candidate_total: f64, reference_total: f64) -> f64 {
    if candidate_total == 0.0 || reference_total == 0.0 {
        return 0.0;
    }
    let p = overlap / candidate_total;
    let r = overlap / reference_total;
    if p + r == 0.0 {
        return 0.0;
    }
    100.0 * 2.0 * p * r / (p + r)
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> f64 {
    let c = ngrams(&tokenize(candidate), n);
    let r = ngrams(&tokenize(reference), n);
    f1_pct(
        clipped_overlap(&c, &r) as f64,
        c.len() as f64,
        r.len() as f64,
    )
}

fn lcs(a: &[String], b: &[String]) -> usize {
    // Memoized recursion over suffixes; written differently from the
    // module's rolling-row DP on purpose.
    let mut memo = vec![usize::MAX; (a.len() + 1) * (b.len() + 1)];
    fn go(a: &[String], b: &[String], i: usize, j: usize, memo: &mut [usize], w: usize) -> usize {
        if i == 0 || j == 0 {
            return 0;
        }
        let key = i * w + j;
        if memo[key] != usize::MAX {
            return memo[key];
        }
        let value = if a[i - 1] == b[j - 1] {
            go(a, b, i - 1, j - 1, memo, w) + 1
        } else {
            go(a, b, i - 1, j, memo, w).max(go(a, b, i, j - 1, memo, w))
        };
        memo[key] = value;
        value
    }
    go(a, b, a.len(), b.len(), &mut memo, b.len() + 1)
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    f1_pct(lcs(&c, &r) as f64, c.len() as f64, r.len() as f64)
}

pub fn bleu1(candidates: &[&str], references: &[&str]) -> f64 {
    let mut clipped = 0usize;
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (c, r) in candidates.iter().zip(references.iter()) {
        let c = ngrams(&tokenize(c), 1);
        let r = ngrams(&tokenize(r), 1);
        clipped += clipped_overlap(&c, &r);
        cand_len += c.len();
        ref_len += r.len();
    }
    if cand_len == 0 {
        return 0.0;
    }
    let precision = clipped as f64 / cand_len as f64;
    let ratio = 1.0 - ref_len as f64 / cand_len as f64;
    let brevity = if ratio < 0.0 { ratio.exp() } else { 1.0 };
    100.0 * precision * brevity
}

pub fn novel_ngram_pct(input: &str, reference: &str, n: usize) -> f64 {
    let input = ngrams(&tokenize(input), n);
    let reference = ngrams(&tokenize(reference), n);
    if reference.is_empty() {
        return 0.0;
    }
    let mut distinct: Vec<&Vec<String>> = Vec::new();
    for gram in &reference {
        if !distinct.contains(&gram) {
            distinct.push(gram);
        }
    }
    let unseen = distinct
        .iter()
        .filter(|gram| !input.iter().any(|i| i == **gram))
        .count();
    100.0 * unseen as f64 / distinct.len() as f64
}
