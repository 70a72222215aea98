use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use blocksim::montecarlo::{default_ratio_grid, ExperimentPlan, PlanKind, DEFAULT_M_SWEEP};
use blocksim::{DistributionSpec, Engine, EngineConfig, TreeFormat};

use crate::request::{ExperimentRequest, SimulateRequest};

/// Environment variable supplying the base seed when none is given.
pub const SEED_ENV: &str = "BLOCKSIM_SEED";

#[derive(Debug, Parser)]
#[command(name = "blocksim", version, about = "Simulate block trees grown under broadcast delay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its outcome as JSON.
    Simulate(SimulateArgs),
    /// Run a replicated experiment and write a CSV table.
    Experiment(ExperimentArgs),
    /// Run the built-in consistency checks.
    Validate(ValidateArgs),
    /// Redo a run from its manifest and compare output digests.
    Rerun(RerunArgs),
    /// Print the closed-form estimate and regime for given means.
    Predict(PredictArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineName {
    Network,
    Matrix,
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Convergence,
    Efficiency,
    #[value(alias = "pdf-histogram")]
    #[serde(alias = "pdf_histogram")]
    Histogram,
    Single,
}

impl From<ExperimentKind> for PlanKind {
    fn from(k: ExperimentKind) -> Self {
        match k {
            ExperimentKind::Convergence => PlanKind::Convergence,
            ExperimentKind::Efficiency => PlanKind::Efficiency,
            ExperimentKind::Histogram => PlanKind::PdfHistogram,
            ExperimentKind::Single => PlanKind::Single,
        }
    }
}

/// Model parameters shared by `simulate` and `experiment`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub engine: Option<EngineName>,
    /// Number of workers (network and matrix engines).
    #[arg(long)]
    pub m: Option<usize>,
    /// Blocks to produce, origin included.
    #[arg(long)]
    pub n: Option<usize>,
    /// Production-time distribution, e.g. `exp:1`.
    #[arg(long)]
    pub alpha: Option<DistributionSpec>,
    /// Delay distribution, e.g. `exp:0.1`, `gamma:0.5:2`, `chi2:3`, `const:0`.
    #[arg(long)]
    pub beta: Option<DistributionSpec>,
    /// Base seed; defaults to $BLOCKSIM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with any of these settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Use the full visibility scan (matrix and infinite engines).
    #[arg(long)]
    pub no_pruning: bool,
    /// Outcome JSON destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the block tree here (network engine only).
    #[arg(long)]
    pub tree_out: Option<PathBuf>,
    /// Tree format; guessed from the `--tree-out` extension when absent.
    #[arg(long)]
    pub tree_format: Option<TreeFormat>,
    /// Write the per-block height series as CSV.
    #[arg(long)]
    pub series_out: Option<PathBuf>,
    /// Manifest destination; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: Option<ExperimentKind>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated worker counts (convergence) or delay ratios (efficiency).
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// Replications per sweep point.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Histogram bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Worker threads for replications.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Smaller run that finishes in a few seconds.
    #[arg(long)]
    pub quick: bool,
    /// Number of random configurations.
    #[arg(long, default_value_t = 20)]
    pub configs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Switch the matrix engine to non-strict visibility to check that the
    /// suite catches it.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Write regenerated outputs into this directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub alpha_mean: f64,
    #[arg(long)]
    pub beta_mean: f64,
}

/// Contents of a `--config` file. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub engine: Option<EngineName>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub alpha: Option<DistributionSpec>,
    pub beta: Option<DistributionSpec>,
    pub seed: Option<u64>,
    pub no_pruning: Option<bool>,
    pub kind: Option<ExperimentKind>,
    pub sweep: Option<Vec<f64>>,
    pub replications: Option<usize>,
    pub bins: Option<usize>,
}

fn read_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let data = fs::read(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_slice(&data).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Flag, then config file, then `$BLOCKSIM_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

fn engine_from(name: EngineName, m: Option<usize>, no_pruning: bool) -> Result<Engine> {
    Ok(match name {
        EngineName::Network => Engine::Network { m: m.context("--m is required for the network engine")? },
        EngineName::Matrix => Engine::Matrix { m: m.context("--m is required for the matrix engine")? },
        EngineName::Infinite => Engine::Infinite { pruning: !no_pruning },
    })
}

fn spec(s: &str) -> DistributionSpec {
    s.parse().expect("built-in default spec")
}

impl SimulateArgs {
    pub fn resolve(&self) -> Result<SimulateRequest> {
        let file: ConfigFile = read_json(self.model.config.as_deref())?;
        let name = self.model.engine.or(file.engine).context("--engine is required")?;
        let no_pruning = self.no_pruning || file.no_pruning.unwrap_or(false);
        let request = SimulateRequest {
            engine: engine_from(name, self.model.m.or(file.m), no_pruning)?,
            n: self.model.n.or(file.n).context("--n is required")?,
            alpha: self.model.alpha.or(file.alpha).context("--alpha is required")?,
            beta: self.model.beta.or(file.beta).context("--beta is required")?,
            seed: resolve_seed(self.model.seed, file.seed)?,
            no_pruning,
            out: self.out.clone(),
            tree_out: self.tree_out.clone(),
            tree_format: self.tree_format,
            series_out: self.series_out.clone(),
        };
        request.validate()?;
        Ok(request)
    }
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentRequest> {
        let file: ConfigFile = read_json(self.model.config.as_deref())?;
        let kind = self.kind.or(file.kind).context("experiment kind is required")?;
        let m = self.model.m.or(file.m);
        let sweep = match (self.sweep.clone().or(file.sweep), kind) {
            (Some(s), _) => s,
            (None, ExperimentKind::Convergence) => DEFAULT_M_SWEEP.iter().map(|&m| m as f64).collect(),
            (None, ExperimentKind::Efficiency) => default_ratio_grid(),
            (None, ExperimentKind::Histogram) => vec![m.unwrap_or(100) as f64],
            (None, ExperimentKind::Single) => Vec::new(),
        };
        let default_reps = if kind == ExperimentKind::Histogram { 1000 } else { 100 };
        let name = self.model.engine.or(file.engine).unwrap_or(EngineName::Infinite);
        let no_pruning = file.no_pruning.unwrap_or(false);
        let engine = match kind {
            ExperimentKind::Single | ExperimentKind::Efficiency => engine_from(name, m, no_pruning)?,
            ExperimentKind::Convergence | ExperimentKind::Histogram => {
                if self.model.engine.is_some() {
                    bail!("{kind:?} experiments choose their engines themselves; drop --engine");
                }
                Engine::Infinite { pruning: true }
            }
        };
        let base = EngineConfig::new(
            engine,
            self.model.n.or(file.n).unwrap_or(1000),
            self.model.alpha.or(file.alpha).unwrap_or_else(|| spec("exp:1")),
            self.model.beta.or(file.beta).unwrap_or_else(|| spec("exp:0.1")),
        );
        let mut plan = ExperimentPlan::new(
            kind.into(),
            sweep,
            self.reps.or(file.replications).unwrap_or(default_reps),
            base,
            resolve_seed(self.model.seed, file.seed)?,
        );
        if let Some(b) = self.bins.or(file.bins) {
            plan.bins = b;
        }
        plan.validate()?;
        plan.base.validate()?;
        Ok(ExperimentRequest { plan, out: self.out.clone() })
    }
}
