//! `hsd` — decode, benchmark and inspect depth-adaptive transformer
//! inference from the command line.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hsd_core::decoding::{decode_beam, decode_greedy, DecodeRequest};
use hsd_core::harness::text::{decode_tokens, encode_text};
use hsd_core::harness::{
    plot_csv, report_csv, run_experiment, save_corpus, schedule_table, synth_corpus, CorpusSource,
    ExperimentSpec, LengthDist, ModelSource, PolicyChoice, PolicySpec,
};
use hsd_core::metrics::{bleu1, novel_ngram_pct, rouge_l, rouge_n};
use hsd_core::model::{init_random, load_bundle, ModelConfig};
use hsd_core::schedule::ScheduleConfig;
use hsd_core::ModelBundleF32;

#[derive(Parser)]
#[command(name = "hsd", version, about = "Depth-adaptive transformer decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode one prompt and print the text plus its layer trace
    Generate(GenerateArgs),
    /// Run a policy over a corpus and write the report CSVs
    Bench(BenchArgs),
    /// Print the per-position schedule of a policy
    ScheduleTable(ScheduleTableArgs),
    /// Score candidate texts against references
    Metrics(MetricsArgs),
    /// Emit a deterministic synthetic corpus
    Synth(SynthArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Weight bundle path; omitted, a seeded random model is built instead
    #[arg(long)]
    model: Option<PathBuf>,
    /// Seed for the random model
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random model depth
    #[arg(long, default_value_t = 12)]
    layers: usize,
    /// Random model hidden size
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Random model attention heads
    #[arg(long, default_value_t = 4)]
    heads: usize,
    /// Random model vocabulary size
    #[arg(long, default_value_t = 256)]
    vocab: usize,
    /// Random model maximum sequence length
    #[arg(long, default_value_t = 512)]
    max_positions: usize,
}

impl ModelArgs {
    fn source(&self) -> ModelSource {
        match &self.model {
            Some(path) => ModelSource::Bundle(path.clone()),
            None => ModelSource::Random {
                config: self.config(),
                seed: self.seed,
            },
        }
    }

    fn config(&self) -> ModelConfig {
        ModelConfig {
            num_layers: self.layers,
            hidden_size: self.hidden,
            num_heads: self.heads,
            vocab_size: self.vocab,
            max_positions: self.max_positions,
            layernorm_epsilon: 1e-5,
        }
    }

    fn bundle(&self) -> Result<ModelBundleF32> {
        match &self.model {
            Some(path) => load_bundle(path).with_context(|| format!("loading {}", path.display())),
            None => init_random(&self.config(), self.seed).context("building random model"),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PolicyName {
    Full,
    Hier,
    Skipdecode,
    Hsd,
    Calm,
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyName::Full)]
    policy: PolicyName,
    /// Stride: layers skipped between kept layers (hier, hsd)
    #[arg(long, default_value_t = 1)]
    s: usize,
    /// Minimum scheduled layers (skipdecode, hsd)
    #[arg(long, default_value_t = 0)]
    emin: usize,
    /// Maximum scheduled layers (skipdecode, hsd)
    #[arg(long, default_value_t = 8)]
    emax: usize,
    /// Schedule horizon in generated tokens; defaults to max-new-tokens
    #[arg(long)]
    tmax: Option<usize>,
    /// Threshold decay per layer (calm)
    #[arg(long, default_value_t = 0.02)]
    d: f64,
    /// Initial exit threshold (calm)
    #[arg(long, default_value_t = 0.9)]
    lambda0: f64,
}

impl PolicyArgs {
    fn spec(&self) -> PolicySpec {
        match self.policy {
            PolicyName::Full => PolicySpec::Full,
            PolicyName::Hier => PolicySpec::Hierarchical { stride: self.s },
            PolicyName::Skipdecode => PolicySpec::SkipDecode {
                e_min: self.emin,
                e_max: self.emax,
            },
            PolicyName::Hsd => PolicySpec::Hsd {
                stride: self.s,
                e_min: self.emin,
                e_max: self.emax,
            },
            PolicyName::Calm => PolicySpec::Calm {
                decay: self.d,
                lambda0: self.lambda0,
            },
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Prompt text; words map into the model vocabulary
    #[arg(long)]
    prompt: String,
    #[arg(long, default_value_t = 32)]
    max_new_tokens: usize,
    #[arg(long, default_value_t = 1)]
    beam: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// JSONL corpus path; omitted, a synthetic corpus is generated
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Synthetic corpus size
    #[arg(long, default_value_t = 16)]
    count: usize,
    /// Synthetic reference length (fixed)
    #[arg(long, default_value_t = 16)]
    len: usize,
    /// Synthetic reference length range (uniform; overrides --len)
    #[arg(long, requires = "len_max")]
    len_min: Option<usize>,
    #[arg(long, requires = "len_min")]
    len_max: Option<usize>,
    /// Synthetic corpus seed
    #[arg(long, default_value_t = 1)]
    corpus_seed: u64,
    #[arg(long, default_value_t = 32)]
    max_new_tokens: usize,
    #[arg(long, default_value_t = 1)]
    beam: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Report CSV path; printed to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleTableArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 36)]
    layers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Candidate texts, one per line
    #[arg(long)]
    candidates: PathBuf,
    /// Reference texts, line-aligned with the candidates
    #[arg(long)]
    references: PathBuf,
    /// Input texts for the novelty statistics (optional)
    #[arg(long)]
    inputs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Fixed reference length
    #[arg(long, default_value_t = 16)]
    len: usize,
    /// Uniform reference length range (overrides --len)
    #[arg(long, requires = "len_max")]
    len_min: Option<usize>,
    #[arg(long, requires = "len_min")]
    len_max: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn length_dist(len: usize, len_min: Option<usize>, len_max: Option<usize>) -> LengthDist {
    match (len_min, len_max) {
        (Some(low), Some(high)) => LengthDist::Uniform { low, high },
        _ => LengthDist::Fixed(len),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let bundle = args.model.bundle()?;
    let t_max = args.policy.tmax.unwrap_or(args.max_new_tokens);
    let policy = args
        .policy
        .spec()
        .to_depth_policy(bundle.config.num_layers, t_max)?;
    let request = DecodeRequest {
        prompt: encode_text(&args.prompt, bundle.config.vocab_size),
        max_new_tokens: args.max_new_tokens,
        beam_width: args.beam,
        policy,
        eos_token_id: None,
    };
    let record = if args.beam == 1 {
        decode_greedy(&bundle, &request)?
    } else {
        decode_beam(&bundle, &request)?
    };

    println!("text: {}", decode_tokens(&record.token_ids));
    let ids: Vec<String> = record.token_ids.iter().map(|t| t.to_string()).collect();
    println!("tokens: {}", ids.join(" "));
    let counts: Vec<String> = record
        .per_position_layer_counts
        .iter()
        .map(|c| c.to_string())
        .collect();
    println!("layer_counts: {}", counts.join(" "));
    if let Some(exits) = &record.per_position_exit_layer {
        let exits: Vec<String> = exits.iter().map(|e| e.to_string()).collect();
        println!("exit_layers: {}", exits.join(" "));
    }
    println!("avg_layers: {:.2}", record.avg_layers);
    println!("sequence_logprob: {:.6}", record.sequence_logprob);
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let corpus = match &args.corpus {
        Some(path) => CorpusSource::File(path.clone()),
        None => CorpusSource::Synthetic {
            count: args.count,
            lengths: length_dist(args.len, args.len_min, args.len_max),
            seed: args.corpus_seed,
        },
    };
    let spec = ExperimentSpec {
        model: args.model.source(),
        corpus,
        policy: PolicyChoice::Explicit(args.policy.spec()),
        t_max: args.policy.tmax,
        max_new_tokens: args.max_new_tokens,
        beam_width: args.beam,
        workers: args.workers,
        output: args.out.clone(),
    };
    let report = run_experiment(&spec)?;
    match &args.out {
        None => {
            print!("{}", report_csv(&report));
            print!("{}", plot_csv(&report));
        }
        Some(path) => eprintln!("wrote {} and its _plot sibling", path.display()),
    }
    eprintln!(
        "policy={} records={} avg_layers={:.2} R-1={:.2} R-2={:.2} R-L={:.2} BLEU-1={:.2} wall_clock={:.2}s",
        report.policy_label,
        report.outcomes.len(),
        report.aggregate.avg_layers,
        report.aggregate.rouge1,
        report.aggregate.rouge2,
        report.aggregate.rouge_l,
        report.aggregate.bleu1,
        report.wall_clock.as_secs_f64(),
    );
    Ok(())
}

fn schedule_table_cmd(args: ScheduleTableArgs) -> Result<()> {
    let t_max = args.policy.tmax.unwrap_or(64);
    let config = match args.policy.spec() {
        PolicySpec::Full => ScheduleConfig {
            t_max,
            ..ScheduleConfig::full(args.layers)
        },
        PolicySpec::Hierarchical { stride } => ScheduleConfig {
            t_max,
            ..ScheduleConfig::hierarchical(args.layers, stride)
        },
        PolicySpec::SkipDecode { e_min, e_max } => {
            ScheduleConfig::skip_decode(args.layers, e_min, e_max, t_max)
        }
        PolicySpec::Hsd {
            stride,
            e_min,
            e_max,
        } => ScheduleConfig::hsd(args.layers, stride, e_min, e_max, t_max),
        PolicySpec::Calm { .. } => {
            bail!("calm is confidence-gated per token; it has no fixed schedule to tabulate")
        }
    };
    let table = schedule_table(&config)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, table).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn read_lines(path: &PathBuf) -> Result<Vec<String>> {
    let content =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(content.lines().map(|l| l.to_string()).collect())
}

fn metrics_cmd(args: MetricsArgs) -> Result<()> {
    let candidates = read_lines(&args.candidates)?;
    let references = read_lines(&args.references)?;
    if candidates.len() != references.len() {
        bail!(
            "candidate and reference files differ in line count ({} vs {})",
            candidates.len(),
            references.len()
        );
    }
    if candidates.is_empty() {
        bail!("no lines to score");
    }
    let inputs = match &args.inputs {
        Some(path) => {
            let inputs = read_lines(path)?;
            if inputs.len() != references.len() {
                bail!(
                    "input file differs in line count ({} vs {})",
                    inputs.len(),
                    references.len()
                );
            }
            Some(inputs)
        }
        None => None,
    };

    let n = candidates.len() as f64;
    let mean = |f: &dyn Fn(&str, &str) -> f64| -> f64 {
        candidates
            .iter()
            .zip(references.iter())
            .map(|(c, r)| f(c, r))
            .sum::<f64>()
            / n
    };
    let rouge1 = mean(&|c, r| rouge_n(c, r, 1));
    let rouge2 = mean(&|c, r| rouge_n(c, r, 2));
    let rougel = mean(&rouge_l);
    let bleu = bleu1(&candidates, &references)?;
    let (novel1, novel2) = match &inputs {
        Some(inputs) => {
            let mean_novel = |order: usize| -> f64 {
                inputs
                    .iter()
                    .zip(references.iter())
                    .map(|(i, r)| novel_ngram_pct(i, r, order))
                    .sum::<f64>()
                    / n
            };
            (mean_novel(1), mean_novel(2))
        }
        None => (0.0, 0.0),
    };

    // avg_layers is 0.00 here: no decoding happened in this subcommand.
    let csv = format!(
        "rouge1,rouge2,rougeL,bleu1,avg_layers,novel_unigram_pct,novel_bigram_pct\n\
         {rouge1:.2},{rouge2:.2},{rougel:.2},{bleu:.2},0.00,{novel1:.2},{novel2:.2}\n"
    );
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    let lengths = length_dist(args.len, args.len_min, args.len_max);
    let records = synth_corpus(args.count, &lengths, args.seed)?;
    save_corpus(&records, &args.out)?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(args) => generate(args),
        Command::Bench(args) => bench(args),
        Command::ScheduleTable(args) => schedule_table_cmd(args),
        Command::Metrics(args) => metrics_cmd(args),
        Command::Synth(args) => synth_cmd(args),
    }
}
