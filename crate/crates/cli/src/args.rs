//! Clap argument definitions for the five subcommands.

use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use recipe_retrieval::{Activation, NegativeStrategy};

#[derive(Debug, Parser)]
#[command(
    name = "recipe-retrieval",
    version,
    about = "Build, train, query and evaluate a recipe embedding library"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble library files from an embedding matrix and recipe
    /// dictionary, or generate a synthetic library
    Build(BuildArgs),
    /// Train the projection encoder against the library embeddings
    Train(TrainArgs),
    /// Retrieve the top-k recipes for one query vector
    Query(QueryArgs),
    /// Compute MedR and Recall@K over a paired evaluation set
    Eval(EvalArgs),
    /// Append one recipe to an existing library (atomic rewrite)
    Add(AddArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    InBatchRandom,
    InBatchAll,
}

impl From<StrategyArg> for NegativeStrategy {
    fn from(value: StrategyArg) -> Self {
        match value {
            StrategyArg::InBatchRandom => NegativeStrategy::InBatchRandom,
            StrategyArg::InBatchAll => NegativeStrategy::InBatchAll,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Identity,
    Tanh,
}

impl From<ActivationArg> for Activation {
    fn from(value: ActivationArg) -> Self {
        match value {
            ActivationArg::Identity => Activation::Identity,
            ActivationArg::Tanh => Activation::Tanh,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Input recipe dictionary (.jsonl)
    #[arg(long, conflicts_with = "synthetic")]
    pub recipes: Option<PathBuf>,
    /// Input embedding matrix (.rsnp)
    #[arg(long, conflicts_with = "synthetic")]
    pub embeddings: Option<PathBuf>,
    /// Generate a synthetic library instead of reading input files
    #[arg(long)]
    pub synthetic: bool,
    /// Synthetic: number of recipe/embedding pairs
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Synthetic: encoder input feature dimension
    #[arg(long, default_value_t = 32)]
    pub f_dim: usize,
    /// Synthetic: embedding dimension
    #[arg(long, default_value_t = 1024)]
    pub d_dim: usize,
    /// Synthetic: per-coordinate feature noise
    #[arg(long, default_value_t = 0.05)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Synthetic: where to write the paired encoder input features
    #[arg(long, requires = "synthetic")]
    pub out_features: Option<PathBuf>,
    #[arg(long)]
    pub out_embeddings: PathBuf,
    #[arg(long)]
    pub out_recipes: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Library embedding matrix (.rsnp); rows are the training targets
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Library recipe dictionary (.jsonl)
    #[arg(long)]
    pub recipes: PathBuf,
    /// Feature vectors, one per library row, pairing by position
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out_params: PathBuf,
    #[arg(long)]
    pub out_trace: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub margin: f64,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = StrategyArg::InBatchAll)]
    pub negative_strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = ActivationArg::Identity)]
    pub activation: ActivationArg,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["embedding_vec", "features_vec"])))]
pub struct QueryArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub recipes: PathBuf,
    /// Query as a raw embedding vector (text, one line)
    #[arg(long)]
    pub embedding_vec: Option<PathBuf>,
    /// Query as encoder input features (text, one line); needs --params
    #[arg(long, requires = "params")]
    pub features_vec: Option<PathBuf>,
    /// Encoder params file (.rspe)
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Emit machine-readable JSON instead of the table
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["queries", "features"])))]
pub struct EvalArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub recipes: PathBuf,
    /// Query embeddings, one vector per line
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Encoder input features, one vector per line; needs --params
    #[arg(long, requires = "params")]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// True library id per query, one per line
    #[arg(long)]
    pub true_ids: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    /// Recall cutoffs, e.g. --ks 1,5,10
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON instead of the table
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this path
    #[arg(long)]
    pub out_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["embedding_vec", "features_vec"])))]
pub struct AddArgs {
    /// Library embedding matrix (.rsnp), rewritten in place
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Library recipe dictionary (.jsonl), rewritten in place
    #[arg(long)]
    pub recipes: PathBuf,
    /// JSON file holding the new recipe record
    #[arg(long)]
    pub recipe: PathBuf,
    /// Embedding for the new recipe (text, one line)
    #[arg(long)]
    pub embedding_vec: Option<PathBuf>,
    /// Features for the new recipe (text, one line); needs --params
    #[arg(long, requires = "params")]
    pub features_vec: Option<PathBuf>,
    #[arg(long)]
    pub params: Option<PathBuf>,
}
