//! Experiment execution and CSV reporting.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::decoding::{decode_beam, decode_greedy, DecodeRequest, DepthPolicy, GenerationRecord};
use crate::harness::corpus::{load_corpus, synth_corpus, CorpusRecord, LengthDist};
use crate::harness::policy::{preset, PolicySpec};
use crate::harness::text::{decode_tokens, encode_text};
use crate::harness::HarnessError;
use crate::metrics::{bleu1, novel_ngram_pct, rouge_l, rouge_n, MetricReport};
use crate::model::{init_random, load_bundle, ModelBundle, ModelConfig};

#[derive(Debug, Clone)]
pub enum ModelSource {
    Bundle(PathBuf),
    Random { config: ModelConfig, seed: u64 },
}

#[derive(Debug, Clone)]
pub enum CorpusSource {
    File(PathBuf),
    Synthetic {
        count: usize,
        lengths: LengthDist,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub enum PolicyChoice {
    Preset(String),
    Explicit(PolicySpec),
}

/// Everything needed to reproduce one benchmark run.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub model: ModelSource,
    pub corpus: CorpusSource,
    pub policy: PolicyChoice,
    /// Schedule horizon; defaults to `max_new_tokens`.
    pub t_max: Option<usize>,
    pub max_new_tokens: usize,
    pub beam_width: usize,
    pub workers: usize,
    /// Report CSV destination; a `<stem>_plot.csv` sibling is written too.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RecordOutcome {
    pub index: usize,
    pub candidate: String,
    pub generation: GenerationRecord,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub novel_unigram_pct: f64,
    pub novel_bigram_pct: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub policy_label: String,
    pub outcomes: Vec<RecordOutcome>,
    pub aggregate: MetricReport,
    pub total_layers_executed: u64,
    pub total_positions: u64,
    pub wall_clock: Duration,
}

fn resolve_policy(choice: &PolicyChoice) -> Result<PolicySpec, HarnessError> {
    match choice {
        PolicyChoice::Preset(name) => {
            preset(name).ok_or_else(|| HarnessError::UnknownPreset(name.clone()))
        }
        PolicyChoice::Explicit(spec) => Ok(spec.clone()),
    }
}

fn resolve_model(source: &ModelSource) -> Result<ModelBundle<f32>, HarnessError> {
    match source {
        ModelSource::Bundle(path) => Ok(load_bundle(path)?),
        ModelSource::Random { config, seed } => Ok(init_random(config, *seed)?),
    }
}

fn resolve_corpus(source: &CorpusSource) -> Result<Vec<CorpusRecord>, HarnessError> {
    match source {
        CorpusSource::File(path) => load_corpus(path),
        CorpusSource::Synthetic {
            count,
            lengths,
            seed,
        } => synth_corpus(*count, lengths, *seed),
    }
}

fn score_record(
    index: usize,
    record: &CorpusRecord,
    bundle: &ModelBundle<f32>,
    policy: &DepthPolicy<f32>,
    max_new_tokens: usize,
    beam_width: usize,
) -> Result<RecordOutcome, HarnessError> {
    let request = DecodeRequest {
        prompt: encode_text(&record.input, bundle.config.vocab_size),
        max_new_tokens,
        beam_width,
        policy: policy.clone(),
        eos_token_id: None,
    };
    let generation = if beam_width == 1 {
        decode_greedy(bundle, &request)
    } else {
        decode_beam(bundle, &request)
    }
    .map_err(|source| HarnessError::Record { index, source })?;
    let candidate = decode_tokens(&generation.token_ids);
    Ok(RecordOutcome {
        index,
        rouge1: rouge_n(&candidate, &record.reference, 1),
        rouge2: rouge_n(&candidate, &record.reference, 2),
        rouge_l: rouge_l(&candidate, &record.reference),
        novel_unigram_pct: novel_ngram_pct(&record.input, &record.reference, 1),
        novel_bigram_pct: novel_ngram_pct(&record.input, &record.reference, 2),
        candidate,
        generation,
    })
}

/// Decodes every record under the policy, in index order regardless of the
/// worker count, and returns per-record outcomes.
fn process_records(
    bundle: &ModelBundle<f32>,
    records: &[CorpusRecord],
    policy: &DepthPolicy<f32>,
    max_new_tokens: usize,
    beam_width: usize,
    workers: usize,
) -> Result<Vec<RecordOutcome>, HarnessError> {
    if workers <= 1 {
        return records
            .iter()
            .enumerate()
            .map(|(index, record)| {
                score_record(index, record, bundle, policy, max_new_tokens, beam_width)
            })
            .collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RecordOutcome, HarnessError>>>> =
        Mutex::new((0..records.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.min(records.len()) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= records.len() {
                    break;
                }
                let result = score_record(
                    index,
                    &records[index],
                    bundle,
                    policy,
                    max_new_tokens,
                    beam_width,
                );
                slots.lock().unwrap()[index] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every record index was processed"))
        .collect()
}

/// Runs the experiment end to end: decode, score, aggregate, and write the
/// CSVs when an output path is set. Deterministic given the spec's seeds;
/// the worker count never changes results.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunReport, HarnessError> {
    let bundle = resolve_model(&spec.model)?;
    let records = resolve_corpus(&spec.corpus)?;
    let policy_spec = resolve_policy(&spec.policy)?;
    let t_max = spec.t_max.unwrap_or(spec.max_new_tokens);
    let policy = policy_spec.to_depth_policy(bundle.config.num_layers, t_max)?;

    let start = Instant::now();
    let outcomes = process_records(
        &bundle,
        &records,
        &policy,
        spec.max_new_tokens,
        spec.beam_width,
        spec.workers,
    )?;
    let wall_clock = start.elapsed();

    let total_layers_executed: u64 = outcomes
        .iter()
        .flat_map(|o| o.generation.per_position_layer_counts.iter())
        .map(|&c| c as u64)
        .sum();
    let total_positions: u64 = outcomes
        .iter()
        .map(|o| o.generation.per_position_layer_counts.len() as u64)
        .sum();
    let n = outcomes.len() as f64;
    let candidates: Vec<&str> = outcomes.iter().map(|o| o.candidate.as_str()).collect();
    let references: Vec<&str> = records.iter().map(|r| r.reference.as_str()).collect();
    let aggregate = MetricReport {
        rouge1: outcomes.iter().map(|o| o.rouge1).sum::<f64>() / n,
        rouge2: outcomes.iter().map(|o| o.rouge2).sum::<f64>() / n,
        rouge_l: outcomes.iter().map(|o| o.rouge_l).sum::<f64>() / n,
        bleu1: bleu1(&candidates, &references)?,
        avg_layers: total_layers_executed as f64 / total_positions as f64,
        novel_unigram_pct: outcomes.iter().map(|o| o.novel_unigram_pct).sum::<f64>() / n,
        novel_bigram_pct: outcomes.iter().map(|o| o.novel_bigram_pct).sum::<f64>() / n,
    };

    let report = RunReport {
        policy_label: policy_spec.label(),
        outcomes,
        aggregate,
        total_layers_executed,
        total_positions,
        wall_clock,
    };
    if let Some(path) = &spec.output {
        write_report_files(&report, path)?;
    }
    Ok(report)
}

/// Report row mirroring the benchmark table column order.
pub fn report_csv(report: &RunReport) -> String {
    let m = &report.aggregate;
    format!(
        "policy,avg_layers,R-1,R-2,R-L,BLEU-1\n{},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
        report.policy_label, m.avg_layers, m.rouge1, m.rouge2, m.rouge_l, m.bleu1
    )
}

/// Long-format companion data for efficiency/quality trade-off plots.
pub fn plot_csv(report: &RunReport) -> String {
    let m = &report.aggregate;
    let mut out = String::from("policy,avg_layers,metric,value\n");
    for (metric, value) in [
        ("R-1", m.rouge1),
        ("R-2", m.rouge2),
        ("R-L", m.rouge_l),
        ("BLEU-1", m.bleu1),
    ] {
        out.push_str(&format!(
            "{},{:.2},{metric},{value:.2}\n",
            report.policy_label, m.avg_layers
        ));
    }
    out
}

fn plot_path(report_path: &Path) -> PathBuf {
    let stem = report_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report_path.with_file_name(format!("{stem}_plot.csv"))
}

fn write_report_files(report: &RunReport, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, report_csv(report)).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let plot = plot_path(path);
    std::fs::write(&plot, plot_csv(report)).map_err(|source| HarnessError::Io {
        path: plot.clone(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_spec() -> ExperimentSpec {
        ExperimentSpec {
            model: ModelSource::Random {
                config: ModelConfig {
                    num_layers: 6,
                    hidden_size: 16,
                    num_heads: 2,
                    vocab_size: 32,
                    max_positions: 48,
                    layernorm_epsilon: 1e-5,
                },
                seed: 5,
            },
            corpus: CorpusSource::Synthetic {
                count: 4,
                lengths: LengthDist::Fixed(12),
                seed: 9,
            },
            policy: PolicyChoice::Explicit(PolicySpec::Hsd {
                stride: 1,
                e_min: 0,
                e_max: 4,
            }),
            t_max: None,
            max_new_tokens: 16,
            beam_width: 1,
            workers: 1,
            output: None,
        }
    }

    #[test]
    fn aggregate_matches_recomputation() {
        let report = run_experiment(&toy_spec()).unwrap();
        assert_eq!(report.outcomes.len(), 4);
        let positions: u64 = report
            .outcomes
            .iter()
            .map(|o| o.generation.per_position_layer_counts.len() as u64)
            .sum();
        assert_eq!(report.total_positions, positions);
        let mean_of_counts = report
            .outcomes
            .iter()
            .flat_map(|o| o.generation.per_position_layer_counts.iter())
            .map(|&c| c as f64)
            .sum::<f64>()
            / positions as f64;
        assert!((report.aggregate.avg_layers - mean_of_counts).abs() < 1e-12);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut spec = toy_spec();
        let sequential = run_experiment(&spec).unwrap();
        spec.workers = 4;
        let parallel = run_experiment(&spec).unwrap();
        assert_eq!(report_csv(&sequential), report_csv(&parallel));
        for (a, b) in sequential.outcomes.iter().zip(parallel.outcomes.iter()) {
            assert_eq!(a.generation, b.generation);
            assert_eq!(a.candidate, b.candidate);
        }
    }

    #[test]
    fn preset_policy_resolves() {
        let mut spec = toy_spec();
        spec.policy = PolicyChoice::Preset("hsd_s1_min0_max8".into());
        // e_max 8 exceeds nothing on a 6-layer model? It does: 8 > 6.
        assert!(run_experiment(&spec).is_err());
        spec.policy = PolicyChoice::Preset("full".into());
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.aggregate.avg_layers, 6.0);
        spec.policy = PolicyChoice::Preset("missing".into());
        assert!(matches!(
            run_experiment(&spec),
            Err(HarnessError::UnknownPreset(_))
        ));
    }

    #[test]
    fn csv_shapes() {
        let report = run_experiment(&toy_spec()).unwrap();
        let csv = report_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("policy,avg_layers,R-1,R-2,R-L,BLEU-1"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("hsd_s1_min0_max4,"));
        assert_eq!(row.split(',').count(), 6);
        let plot = plot_csv(&report);
        assert_eq!(plot.lines().count(), 5);
    }

    #[test]
    fn report_files_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = toy_spec();
        spec.output = Some(dir.path().join("run.csv"));
        let report = run_experiment(&spec).unwrap();
        let report_bytes = std::fs::read(dir.path().join("run.csv")).unwrap();
        assert_eq!(report_bytes, report_csv(&report).into_bytes());
        let plot_bytes = std::fs::read(dir.path().join("run_plot.csv")).unwrap();
        assert_eq!(plot_bytes, plot_csv(&report).into_bytes());
    }
}
