//! Corpus loading, saving and synthesis.
//!
//! On disk a corpus is JSON Lines: one `{"input": ..., "reference": ...}`
//! object per line. Input must be non-empty; the reference may be empty.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::harness::text::{decode_tokens, SYNTH_VOCAB};
use crate::harness::HarnessError;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub input: String,
    pub reference: String,
}

/// Reference-length distribution for the synthetic generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LengthDist {
    Fixed(usize),
    Uniform {
        low: usize,
        high: usize,
    },
    /// Sample uniformly from an observed multiset of lengths.
    Empirical(Vec<usize>),
}

impl LengthDist {
    fn validate(&self) -> Result<(), HarnessError> {
        match self {
            LengthDist::Fixed(n) if *n == 0 => Err(HarnessError::BadSynthSpec(
                "fixed length must be at least 1".into(),
            )),
            LengthDist::Uniform { low, high } if *low == 0 || low > high => {
                Err(HarnessError::BadSynthSpec(format!(
                    "uniform bounds must satisfy 1 <= low <= high, got [{low}, {high}]"
                )))
            }
            LengthDist::Empirical(lengths) if lengths.is_empty() || lengths.contains(&0) => {
                Err(HarnessError::BadSynthSpec(
                    "empirical lengths must be non-empty, each at least 1".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut SplitMix64) -> usize {
        match self {
            LengthDist::Fixed(n) => *n,
            LengthDist::Uniform { low, high } => {
                low + rng.next_below((high - low + 1) as u64) as usize
            }
            LengthDist::Empirical(lengths) => {
                lengths[rng.next_below(lengths.len() as u64) as usize]
            }
        }
    }
}

/// Parses a JSONL corpus, preserving record order. Malformed lines fail
/// with their 1-based line number; an empty file is an error.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>, HarnessError> {
    let content = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for (number, line) in content.lines().enumerate() {
        let line_no = number + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(line).map_err(|e| HarnessError::CorpusParse {
                line: line_no,
                message: e.to_string(),
            })?;
        if record.input.trim().is_empty() {
            return Err(HarnessError::CorpusParse {
                line: line_no,
                message: "input must be non-empty".into(),
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(HarnessError::EmptyCorpus);
    }
    Ok(records)
}

pub fn save_corpus(records: &[CorpusRecord], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("corpus records serialize"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Deterministic synthetic corpus: `t<n>` token text with short random
/// inputs (4..=8 tokens) and references of the requested length
/// distribution, drawn from a vocabulary of [`SYNTH_VOCAB`] ids.
pub fn synth_corpus(
    count: usize,
    lengths: &LengthDist,
    seed: u64,
) -> Result<Vec<CorpusRecord>, HarnessError> {
    if count == 0 {
        return Err(HarnessError::BadSynthSpec(
            "count must be at least 1".into(),
        ));
    }
    lengths.validate()?;
    let mut rng = SplitMix64::new(seed);
    let draw = |len: usize, rng: &mut SplitMix64| -> String {
        let ids: Vec<u32> = (0..len)
            .map(|_| rng.next_below(SYNTH_VOCAB as u64) as u32)
            .collect();
        decode_tokens(&ids)
    };
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let input_len = 4 + rng.next_below(5) as usize;
        let input = draw(input_len, &mut rng);
        let reference_len = lengths.sample(&mut rng);
        let reference = draw(reference_len, &mut rng);
        records.push(CorpusRecord { input, reference });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_deterministic() {
        let dist = LengthDist::Fixed(10);
        let a = synth_corpus(5, &dist, 3).unwrap();
        let b = synth_corpus(5, &dist, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        for record in &a {
            assert_eq!(record.reference.split_whitespace().count(), 10);
            let input_len = record.input.split_whitespace().count();
            assert!((4..=8).contains(&input_len));
        }
        let c = synth_corpus(5, &dist, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_lengths_center_on_mean() {
        // Uniform over 5..=15: mean 10, variance 10; the mean of 1000 draws
        // stays within 3 sigma = 3*sqrt(10/1000) = 0.3 of 10.
        let dist = LengthDist::Uniform { low: 5, high: 15 };
        let records = synth_corpus(1000, &dist, 42).unwrap();
        let mean = records
            .iter()
            .map(|r| r.reference.split_whitespace().count() as f64)
            .sum::<f64>()
            / 1000.0;
        assert!((mean - 10.0).abs() <= 0.3, "mean={mean}");
    }

    #[test]
    fn empirical_lengths_come_from_pool() {
        let dist = LengthDist::Empirical(vec![3, 9]);
        let records = synth_corpus(50, &dist, 1).unwrap();
        for record in records {
            let len = record.reference.split_whitespace().count();
            assert!(len == 3 || len == 9);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(synth_corpus(0, &LengthDist::Fixed(5), 0).is_err());
        assert!(synth_corpus(1, &LengthDist::Fixed(0), 0).is_err());
        assert!(synth_corpus(1, &LengthDist::Uniform { low: 9, high: 3 }, 0).is_err());
        assert!(synth_corpus(1, &LengthDist::Empirical(vec![]), 0).is_err());
    }

    #[test]
    fn corpus_round_trip_and_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let records = synth_corpus(4, &LengthDist::Fixed(6), 9).unwrap();
        save_corpus(&records, &path).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), records);

        let bad = dir.path().join("bad.jsonl");
        std::fs::write(
            &bad,
            "{\"input\": \"t1\", \"reference\": \"t2\"}\n{\"input\": \"t1\"}\n",
        )
        .unwrap();
        match load_corpus(&bad) {
            Err(HarnessError::CorpusParse { line: 2, .. }) => {}
            other => panic!("expected parse error at line 2, got {other:?}"),
        }

        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(
            load_corpus(&empty),
            Err(HarnessError::EmptyCorpus)
        ));

        let blank_input = dir.path().join("blank.jsonl");
        std::fs::write(&blank_input, "{\"input\": \"  \", \"reference\": \"t2\"}\n").unwrap();
        assert!(matches!(
            load_corpus(&blank_input),
            Err(HarnessError::CorpusParse { line: 1, .. })
        ));
    }
}
