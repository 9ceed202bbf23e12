use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedcf::data::{IdMapping, Preset};
use fedcf::{BiasCorrection, HyperParams, Optimizer};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "fedcf",
    version,
    about = "Federated collaborative filtering experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a simulated dataset and write it to the cache format.
    GenData(GenDataArgs),
    /// Train a centralized or federated model on a whole dataset.
    Train(TrainArgs),
    /// Trace how far federated item factors are from the centralized ones.
    Convergence(ConvergenceArgs),
    /// Repeated-split comparison of the centralized and federated models.
    Compare(CompareArgs),
    /// Re-run a command from the config.json it wrote.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    SimulatedPaper,
    SimulatedSmall,
    InHouseShape,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::SimulatedPaper => Preset::SimulatedPaper,
            PresetArg::SimulatedSmall => Preset::SimulatedSmall,
            PresetArg::InHouseShape => Preset::InHouseShape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdMappingArg {
    #[default]
    Original,
    Compact,
}

impl From<IdMappingArg> for IdMapping {
    fn from(m: IdMappingArg) -> Self {
        match m {
            IdMappingArg::Original => IdMapping::Original,
            IdMappingArg::Compact => IdMapping::Compact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerArg {
    Gd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasCorrectionArg {
    Constant,
    TimeIndexed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Cf,
    Fcf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceArg {
    /// Centralized model after the same epoch.
    #[default]
    PerEpoch,
    /// Centralized model after the last epoch.
    Final,
}

/// Where the interactions come from. Exactly one of the two is required.
#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    /// A cache directory written by gen-data, or a MovieLens ratings.dat file.
    #[arg(long, conflicts_with = "preset")]
    pub dataset: Option<PathBuf>,
    /// Generate a simulated dataset in memory.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Index mapping for MovieLens ids.
    #[arg(long, value_enum, default_value_t)]
    pub id_mapping: IdMappingArg,
}

/// Model overrides; unset values take the command's defaults.
#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub gd_iters: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Upper bound of the uniform initialization, times 1/√k.
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long, value_enum)]
    pub bias_correction: Option<BiasCorrectionArg>,
}

impl ModelArgs {
    /// `base` with every set flag applied.
    pub fn resolve(&self, base: HyperParams, alpha: Option<f64>) -> HyperParams {
        let mut hp = base;
        if let Some(o) = self.optimizer {
            hp.optimizer = match o {
                OptimizerArg::Gd => Optimizer::PlainGd,
                OptimizerArg::Adam => Optimizer::Adam,
            };
        }
        if let Some(b) = self.bias_correction {
            hp.bias_correction = match b {
                BiasCorrectionArg::Constant => BiasCorrection::Constant,
                BiasCorrectionArg::TimeIndexed => BiasCorrection::TimeIndexed,
            };
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut hp.alpha, alpha);
        set(&mut hp.lambda, self.lambda);
        set(&mut hp.gamma, self.gamma);
        set(&mut hp.beta1, self.beta1);
        set(&mut hp.beta2, self.beta2);
        set(&mut hp.epsilon, self.epsilon);
        set(&mut hp.init_scale, self.init_scale);
        hp.k = self.k.unwrap_or(hp.k);
        hp.gd_iters_per_epoch = self.gd_iters.unwrap_or(hp.gd_iters_per_epoch);
        hp.epochs = self.epochs.unwrap_or(hp.epochs);
        hp
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub min_views: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also write every client payload of every round under <out>/rounds.
    #[arg(long)]
    pub round_log: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// One or more confidence weights; one trace per value and restart.
    #[arg(long, num_args = 1.., value_delimiter = ',', default_value = "1")]
    pub alpha: Vec<f64>,
    /// Independent initializations per alpha.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t)]
    pub reference: ReferenceArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub rebuilds: usize,
    /// Length of the recommendation lists.
    #[arg(long = "top-k", default_value_t = 10)]
    pub top_k: usize,
    /// Never-observed items sampled per test positive for RMSE.
    #[arg(long, default_value_t = 1)]
    pub negative_rate: usize,
    #[arg(long, default_value_t = fedcf::eval::DEFAULT_ROPE)]
    pub rope: f64,
    #[arg(long, default_value_t = fedcf::eval::DEFAULT_RHO)]
    pub rho: f64,
    /// Pick k, alpha and lambda on the validation split of rebuild 0.
    #[arg(long)]
    pub grid_search: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
