use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pignn::nn::{Arch, EmbeddingSource};
use pignn::noise::NoiseSpec;
use pignn::pi::{PiReduction, PiSource};
use pignn::trainer::{Beta, Method, NegativeMode, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "pignn",
    version,
    about = "Pairwise-interaction GNN training under label noise"
)]
pub struct Cli {
    /// Suppress progress lines on stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load or generate a dataset, apply a split and optional noise, write a bundle.
    Prepare(PrepareArgs),
    /// Train one model on a prepared bundle and emit the result JSON.
    Run(RunArgs),
    /// Run a method x noise x seed grid from an experiment file.
    Sweep(SweepArgs),
    /// Histogram of mask-generator confidences, optionally comparing confident halves.
    MaskReport(MaskReportArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct SourceArgs {
    /// Generate an SBM; optional KEY=VALUE tokens: blocks, size, p-in, p-out,
    /// dim, signal, seed.
    #[arg(long, num_args = 0.., value_name = "KEY=VALUE", conflicts_with_all = ["content", "nodes_csv"])]
    pub sbm: Option<Vec<String>>,

    /// Whitespace-separated `<id> <features..> <class>` file.
    #[arg(long, requires = "cites", conflicts_with = "nodes_csv")]
    pub content: Option<PathBuf>,

    #[arg(long, requires = "content")]
    pub cites: Option<PathBuf>,

    /// CSV with header `id,label,f_1,..`.
    #[arg(long, requires = "edges_csv")]
    pub nodes_csv: Option<PathBuf>,

    /// CSV with header `src,dst`.
    #[arg(long, requires = "nodes_csv")]
    pub edges_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 20)]
    pub train_per_class: usize,

    #[arg(long, default_value_t = 30)]
    pub val_per_class: usize,

    /// JSON file `{"train": [..], "val": [..], "test": [..]}`; overrides the
    /// per-class counts.
    #[arg(long)]
    pub split_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    pub split: SplitArgs,

    /// Store corrupted labels, e.g. `sym:0.6` or `pair:0.4`.
    #[arg(long)]
    pub noise: Option<NoiseSpec>,

    #[arg(long, requires = "noise")]
    pub noise_seed: Option<u64>,

    /// Leave validation labels clean.
    #[arg(long)]
    pub clean_val: bool,

    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Training flags shared by `run`, `sweep` and `mask-report`. Unset flags
/// leave the configuration untouched.
#[derive(Debug, Args, Clone, Default)]
pub struct TrainArgs {
    /// Total epochs N.
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Warm-up epochs K with an all-ones mask.
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,

    /// Pair-loss weight: `auto` or a number.
    #[arg(long)]
    pub beta: Option<Beta>,

    #[arg(long)]
    pub lr: Option<f64>,

    #[arg(long)]
    pub weight_decay: Option<f64>,

    /// Architecture of both networks: gcn or sage.
    #[arg(long)]
    pub arch: Option<Arch>,

    #[arg(long)]
    pub arch_mask: Option<Arch>,

    #[arg(long)]
    pub hidden: Option<usize>,

    #[arg(long)]
    pub hidden_mask: Option<usize>,

    /// adjacency, label_comparison or random.
    #[arg(long)]
    pub pi_source: Option<PiSource>,

    #[arg(long)]
    pub random_pi_density: Option<f64>,

    /// `auto`, `all`, or a number of sampled negatives per positive.
    #[arg(long, value_parser = parse_negatives)]
    pub negatives: Option<NegativeMode>,

    #[arg(long, value_parser = parse_embedding)]
    pub embedding: Option<EmbeddingSource>,

    #[arg(long, value_parser = parse_reduction)]
    pub reduction: Option<PiReduction>,

    #[arg(long)]
    pub dropout: Option<f64>,

    /// Base seed; defaults to $PIGNN_SEED, then 1.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl TrainArgs {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(
            epochs => epochs,
            pretrain_epochs => pretrain_epochs,
            beta => beta,
            weight_decay => weight_decay,
            arch => arch_task,
            arch => arch_mask,
            arch_mask => arch_mask,
            pi_source => pi_source,
            negatives => negatives,
            embedding => embedding,
            reduction => reduction,
            dropout => dropout,
            seed => seed,
        );
        if self.lr.is_some() {
            cfg.lr = self.lr;
        }
        if self.hidden.is_some() {
            cfg.hidden_task = self.hidden;
            cfg.hidden_mask = self.hidden;
        }
        if self.hidden_mask.is_some() {
            cfg.hidden_mask = self.hidden_mask;
        }
        if self.random_pi_density.is_some() {
            cfg.random_pi_density = self.random_pi_density;
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct LabelArgs {
    /// Corrupt labels with this noise instead of using the bundle's stored labels.
    #[arg(long)]
    pub noise: Option<NoiseSpec>,

    /// Defaults to a seed derived from the run seed.
    #[arg(long)]
    pub noise_seed: Option<u64>,

    #[arg(long)]
    pub clean_val: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset bundle written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,

    /// JSON file `{"method", "noise", "noise_seed", "clean_val", "train": {..}}`.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// vanilla, pi_no_ue, pi_gnn or pi_task_self.
    #[arg(long)]
    pub method: Option<Method>,

    #[command(flatten)]
    pub labels: LabelArgs,

    #[command(flatten)]
    pub train: TrainArgs,

    /// Omit wall-clock time so repeated runs give identical output.
    #[arg(long)]
    pub deterministic: bool,

    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub save_model: Option<PathBuf>,

    #[arg(long)]
    pub save_mask_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment file.
    #[arg(long)]
    pub spec: PathBuf,

    /// Output directory for runs.csv, summary.csv, table.csv and results.json.
    #[arg(long)]
    pub out: PathBuf,

    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,

    #[arg(long)]
    pub deterministic: bool,

    /// Overrides applied after the file's `train` section.
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct MaskReportArgs {
    #[arg(long)]
    pub data: PathBuf,

    /// Saved mask generator; trained inline when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,

    /// Seeds as a list `1,2,3` or range `1..5` (inclusive).
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<Seeds>,

    #[command(flatten)]
    pub labels: LabelArgs,

    #[command(flatten)]
    pub train: TrainArgs,

    /// Histogram CSV; stdout when absent.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,

    /// Also train task executors on the confident and unconfident halves.
    #[arg(long)]
    pub compare: bool,

    /// Comparison JSON; stdout when absent.
    #[arg(long, requires = "compare")]
    pub compare_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

pub fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let bad = |t: &str| format!("bad seed `{t}`");
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad(a))?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad(b))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad(t)))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("empty seed list".into());
    }
    Ok(Seeds(seeds))
}

fn parse_negatives(s: &str) -> Result<NegativeMode, String> {
    match s {
        "auto" => Ok(NegativeMode::Auto),
        "all" => Ok(NegativeMode::All),
        k => k
            .parse()
            .map(|per_positive| NegativeMode::Sampled { per_positive })
            .map_err(|_| format!("expected auto, all or a count, got `{k}`")),
    }
}

fn parse_embedding(s: &str) -> Result<EmbeddingSource, String> {
    match s {
        "penultimate" | "hidden" => Ok(EmbeddingSource::Penultimate),
        "logits" | "output" => Ok(EmbeddingSource::Logits),
        other => Err(format!("expected penultimate or logits, got `{other}`")),
    }
}

fn parse_reduction(s: &str) -> Result<PiReduction, String> {
    match s {
        "sum" => Ok(PiReduction::Sum),
        "mean" => Ok(PiReduction::Mean),
        other => Err(format!("expected sum or mean, got `{other}`")),
    }
}
