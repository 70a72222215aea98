//! Fully resolved commands and their execution.
//!
//! A request holds every value needed to produce the outputs, so storing it in
//! a manifest is enough to reproduce the run.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use blocksim::draws::{SeededDraws, StreamSeeds};
use blocksim::matrix::{simulate_matrix_with, HeightScan, MatrixOptions};
use blocksim::montecarlo::{
    convergence_experiment, efficiency_experiment, pdf_histogram_experiment, single_experiment, ConvergenceTable,
    EfficiencyTable, ExperimentPlan, PdfComparison, PlanKind,
};
use blocksim::{
    simulate_infinite, simulate_network, DistributionSpec, Engine, EngineConfig, McEstimate, NetSimConfig,
    SimOutcome, TreeFormat,
};

/// A `simulate` invocation after merging the config file and flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub engine: Engine,
    pub n: usize,
    pub alpha: DistributionSpec,
    pub beta: DistributionSpec,
    pub seed: u64,
    /// Full scans instead of the pruned one (matrix and infinite engines).
    #[serde(default)]
    pub no_pruning: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_format: Option<TreeFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_out: Option<PathBuf>,
}

/// An `experiment` invocation after merging the config file and flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRequest {
    pub plan: ExperimentPlan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Simulate(SimulateRequest),
    Experiment(ExperimentRequest),
}

/// One produced file, held in memory until written.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub role: &'static str,
    /// `None` means standard output.
    pub path: Option<PathBuf>,
    pub bytes: Vec<u8>,
    pub csv_schema: Option<&'static str>,
}

/// Everything a command produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub artifacts: Vec<Artifact>,
    pub stream_seeds: Option<StreamSeeds>,
    /// Extra numbers worth printing and recording (KS distance and so on).
    pub summary: serde_json::Value,
}

/// Summary of one simulation written by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub p_n: f64,
    pub height: usize,
    pub n: usize,
    pub engine: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream_seeds: Option<StreamSeeds>,
}

impl SimulateRequest {
    pub fn engine_config(&self) -> EngineConfig {
        let engine = match self.engine {
            Engine::Infinite { .. } => Engine::Infinite { pruning: !self.no_pruning },
            other => other,
        };
        EngineConfig::new(engine, self.n, self.alpha, self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        self.engine_config().validate()?;
        if self.tree_out.is_some() && !matches!(self.engine, Engine::Network { .. }) {
            bail!("--tree-out needs the network engine; the {} engine does not build trees", self.engine.name());
        }
        if self.no_pruning && matches!(self.engine, Engine::Network { .. }) {
            bail!("--no-pruning applies to the matrix and infinite engines only");
        }
        Ok(())
    }

    pub fn tree_format(&self) -> TreeFormat {
        if let Some(f) = self.tree_format {
            return f;
        }
        match self.tree_out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("dot" | "gv") => TreeFormat::Dot,
            _ => TreeFormat::Json,
        }
    }

    fn outcome(&self) -> Result<SimOutcome> {
        let record_series = self.series_out.is_some();
        let out = match self.engine {
            Engine::Network { m } => {
                let cfg = NetSimConfig {
                    record_tree: self.tree_out.is_some(),
                    record_series,
                    ..NetSimConfig::new(m, self.n, self.alpha, self.beta, self.seed)
                };
                simulate_network(&cfg)?
            }
            Engine::Matrix { m } => {
                let cfg = NetSimConfig { record_series, ..NetSimConfig::new(m, self.n, self.alpha, self.beta, self.seed) };
                cfg.validate()?;
                let scan = if self.no_pruning { HeightScan::Naive } else { HeightScan::Pruned };
                let draws = SeededDraws::new(&cfg.alpha, &cfg.beta, cfg.seed)?;
                let mut out = simulate_matrix_with(&cfg, draws, MatrixOptions { scan, ..Default::default() })?;
                out.seeds = Some(StreamSeeds::for_seed(cfg.seed));
                out
            }
            Engine::Infinite { .. } => {
                let mut cfg = self.engine_config().inf_config(!self.no_pruning, self.seed);
                cfg.record_series = record_series;
                simulate_infinite(&cfg)?
            }
        };
        Ok(out)
    }

    pub fn execute(&self) -> Result<RunResult> {
        self.validate()?;
        let out = self.outcome()?;
        let record = OutcomeRecord {
            p_n: out.p_n,
            height: out.final_height,
            n: out.n,
            engine: self.engine.name(),
            m: self.engine.workers(),
            seed: self.seed,
            stream_seeds: out.seeds,
        };
        let mut json = serde_json::to_vec_pretty(&record)?;
        json.push(b'\n');
        let mut artifacts = vec![Artifact { role: "outcome", path: self.out.clone(), bytes: json, csv_schema: None }];

        if let Some(path) = &self.tree_out {
            let tree = out.tree.as_ref().context("network engine returned no tree")?;
            artifacts.push(Artifact {
                role: "tree",
                path: Some(path.clone()),
                bytes: tree.export(self.tree_format()),
                csv_schema: None,
            });
        }
        if let Some(path) = &self.series_out {
            let series = out.height_series.as_ref().context("engine returned no height series")?;
            let mut csv = String::from(SERIES_HEADER);
            csv.push('\n');
            for (k, h) in series.iter().enumerate() {
                csv.push_str(&format!("{k},{h}\n"));
            }
            artifacts.push(Artifact {
                role: "series",
                path: Some(path.clone()),
                bytes: csv.into_bytes(),
                csv_schema: Some(SERIES_HEADER),
            });
        }
        let summary = serde_json::json!({
            "ratio": self.beta.mean() / self.alpha.mean(),
            "regime": blocksim::classify(self.alpha.mean(), self.beta.mean()),
        });
        Ok(RunResult { artifacts, stream_seeds: out.seeds, summary })
    }
}

pub const SERIES_HEADER: &str = "k,height";

impl ExperimentRequest {
    pub fn execute(&self, jobs: Option<usize>) -> Result<RunResult> {
        let plan = &self.plan;
        let (csv, schema, summary) = match plan.kind {
            PlanKind::Convergence => {
                let t = convergence_experiment(plan, jobs)?;
                let gap = t.rows.iter().filter_map(|r| r.m.map(|m| (m, r.estimate.mean - t.reference().mean)));
                let gaps: Vec<_> = gap.map(|(m, g)| serde_json::json!({ "m": m, "gap": g })).collect();
                (t.to_csv(), ConvergenceTable::HEADER, serde_json::json!({ "gaps_to_unbounded": gaps }))
            }
            PlanKind::Efficiency => {
                let t = efficiency_experiment(plan, jobs)?;
                let worst = t.rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
                let summary = serde_json::json!({ "log_slope": t.log_slope(), "max_abs_error": worst });
                (t.to_csv(), EfficiencyTable::HEADER, summary)
            }
            PlanKind::PdfHistogram => {
                let c = pdf_histogram_experiment(plan, jobs)?;
                let summary = serde_json::json!({ "m": c.m, "ks_distance": c.ks_distance, "mean_shift": c.mean_shift });
                (c.to_csv(), PdfComparison::HEADER, summary)
            }
            PlanKind::Single => {
                let e = single_experiment(plan, jobs)?;
                let summary = serde_json::json!({ "mean": e.mean, "std_error": e.std_error });
                (e.to_csv(&plan.base), McEstimate::CSV_HEADER, summary)
            }
        };
        Ok(RunResult {
            artifacts: vec![Artifact {
                role: "table",
                path: self.out.clone(),
                bytes: csv.into_bytes(),
                csv_schema: Some(schema),
            }],
            stream_seeds: None,
            summary,
        })
    }
}

impl Invocation {
    pub fn name(&self) -> &'static str {
        match self {
            Invocation::Simulate(_) => "simulate",
            Invocation::Experiment(_) => "experiment",
        }
    }

    pub fn base_seed(&self) -> u64 {
        match self {
            Invocation::Simulate(r) => r.seed,
            Invocation::Experiment(r) => r.plan.base_seed,
        }
    }

    pub fn execute(&self, jobs: Option<usize>) -> Result<RunResult> {
        match self {
            Invocation::Simulate(r) => r.execute(),
            Invocation::Experiment(r) => r.execute(jobs),
        }
    }
}
