use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cawe",
    version,
    about = "Contextual acoustic word embeddings from an attention-based acoustic-to-word model",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Random seed (printed in the output header)
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; 1 makes every stage deterministic
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Settings file of `key = value` lines (keys are long flag names);
    /// command-line flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and evaluation task files
    GenData(GenData),
    /// Train the acoustic-to-word model
    Train(Train),
    /// Extract acoustic word embeddings from a trained model
    Extract(Extract),
    /// Train CBOW word2vec embeddings on corpus transcripts
    Cbow(Cbow),
    /// Score a similarity task (Spearman correlation)
    EvalSim(EvalSim),
    /// Score a sentence classification task (logistic regression)
    EvalCls(EvalCls),
    /// Score an intent task with a fine-tuned recurrent classifier
    EvalSlu(EvalSlu),
    /// Tabulate evaluation rows by task and method
    Report(Report),
    /// Summarise a checkpoint or embedding file
    Inspect(Inspect),
}

#[derive(Debug, Args)]
pub struct GenData {
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of utterances, held-out ones included
    #[arg(long, default_value_t = 2000)]
    pub utts: usize,
    /// Number of content words
    #[arg(long, default_value_t = 30)]
    pub vocab: usize,
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,
    #[arg(long, default_value_t = 5)]
    pub markers: usize,
    /// Minimum words per utterance
    #[arg(long, default_value_t = 3)]
    pub min_len: usize,
    /// Maximum words per utterance
    #[arg(long, default_value_t = 8)]
    pub max_len: usize,
    /// Minimum frames per word
    #[arg(long, default_value_t = 4)]
    pub min_dur: usize,
    /// Maximum frames per word
    #[arg(long, default_value_t = 10)]
    pub max_dur: usize,
    /// Standard deviation of the additive frame noise
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Zipf word frequencies instead of uniform ones
    #[arg(long)]
    pub zipf: bool,
    /// Utterances moved to the held-out split (taken from the end)
    #[arg(long, default_value_t = 200)]
    pub held_out: usize,
    #[arg(long, default_value_t = 1000)]
    pub sim_pairs: usize,
    #[arg(long, default_value_t = 1000)]
    pub cls_examples: usize,
    #[arg(long, default_value_t = 1000)]
    pub slu_examples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Train {
    /// Training corpus directory
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Checkpoint to write
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Held-out corpus to score after training
    #[arg(long, value_name = "DIR")]
    pub heldout: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Global gradient-norm clip threshold
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0.9)]
    pub rms_decay: f64,
    /// Minimum count for a word to enter the vocabulary
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    /// Hidden units per encoder direction
    #[arg(long, default_value_t = 16)]
    pub enc_hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub enc_layers: usize,
    /// Leading encoder layers that halve the frame rate
    #[arg(long, default_value_t = 1)]
    pub pyramid_stages: usize,
    #[arg(long, default_value_t = 32)]
    pub dec_hidden: usize,
    #[arg(long, default_value_t = 32)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub att_dim: usize,
    /// Location-feature convolution kernels
    #[arg(long, default_value_t = 4)]
    pub loc_kernels: usize,
    /// Location-feature kernel width (odd)
    #[arg(long, default_value_t = 5)]
    pub loc_width: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Extract {
    #[arg(long, value_name = "FILE")]
    pub ckpt: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// uavg, cawe-w or cawe-m
    #[arg(long)]
    pub method: String,
    /// Embedding file to write (word2vec text format)
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Also write the occurrence audit table
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
    /// Divide CAWE-W sums by the total attention weight instead of the count
    #[arg(long)]
    pub alpha_norm: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Cbow {
    #[arg(long, value_name = "DIR")]
    pub corpus: PathBuf,
    /// Held-out corpus, used only with --all-splits
    #[arg(long, value_name = "DIR")]
    pub heldout: Option<PathBuf>,
    /// Train on the held-out transcripts as well
    #[arg(long)]
    pub all_splits: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EmbeddingInput {
    /// Embedding file (word2vec text format)
    #[arg(long, value_name = "FILE")]
    pub emb: PathBuf,
    /// Method tag of the embeddings: uavg, cawe-w, cawe-m, cbow or concat
    #[arg(long)]
    pub method: String,
    /// Append evaluation rows to this file as well
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalSim {
    #[arg(long, value_name = "FILE")]
    pub task: PathBuf,
    #[command(flatten)]
    pub input: EmbeddingInput,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalCls {
    #[arg(long, value_name = "FILE")]
    pub task: PathBuf,
    /// Separate test file; without it the task is split 80/20
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    /// Second embedding file concatenated to --emb (method becomes CONCAT)
    #[arg(long, value_name = "FILE")]
    pub concat: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
    #[command(flatten)]
    pub input: EmbeddingInput,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalSlu {
    #[arg(long, value_name = "FILE")]
    pub task: PathBuf,
    /// Separate test file; without it the task is split 80/20
    #[arg(long, value_name = "FILE")]
    pub test: Option<PathBuf>,
    /// Recurrent cell: rnn or gru
    #[arg(long, default_value = "gru")]
    pub cell: String,
    #[arg(long, default_value_t = 32)]
    pub hidden: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Training runs, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    #[command(flatten)]
    pub input: EmbeddingInput,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Report {
    /// Files of evaluation rows written by the eval-* commands
    #[arg(required = true, value_name = "FILE")]
    pub inputs: Vec<PathBuf>,
    /// Also write the table as CSV
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Inspect {
    /// Checkpoint or embedding file
    #[arg(value_name = "FILE")]
    pub file: PathBuf,
    /// Print the nearest neighbours of this word by cosine
    #[arg(long, value_name = "WORD")]
    pub neighbors: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Method tag to display for embedding files
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    pub common: Common,
}
