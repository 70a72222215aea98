//! Replication harness and the experiment designs built on it.
//!
//! Replication `r` of a point with seed `s` runs with seed `mix64(s, r)`.
//! Replications may run on a thread pool, but results are collected and
//! reduced in replication order, so every estimate is reproducible bit for
//! bit regardless of the number of threads.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocktree::{classify, BlockTree, Regime};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::infinite::{simulate_infinite, InfSimConfig};
use crate::matrix::simulate_matrix;
use crate::network::{simulate_network, NetSimConfig};
use crate::outcome::SimOutcome;
use crate::stats::{ks_distance_two_sample, mean_std, quantile_sorted};
use crate::stream::mix64;

/// Which simulation algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum Engine {
    /// Priority-queue simulation of `m` workers.
    Network { m: usize },
    /// Delay-matrix simulation of `m` workers.
    Matrix { m: usize },
    /// Unbounded-workers approximation.
    Infinite {
        #[serde(default = "yes")]
        pruning: bool,
    },
}

fn yes() -> bool {
    true
}

impl Engine {
    pub fn name(&self) -> &'static str {
        match self {
            Engine::Network { .. } => "network",
            Engine::Matrix { .. } => "matrix",
            Engine::Infinite { .. } => "infinite",
        }
    }

    pub fn workers(&self) -> Option<usize> {
        match *self {
            Engine::Network { m } | Engine::Matrix { m } => Some(m),
            Engine::Infinite { .. } => None,
        }
    }
}

/// One engine plus the model parameters it runs with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(flatten)]
    pub engine: Engine,
    pub n: usize,
    pub alpha: DistributionSpec,
    pub beta: DistributionSpec,
}

impl EngineConfig {
    pub fn new(engine: Engine, n: usize, alpha: DistributionSpec, beta: DistributionSpec) -> Self {
        Self { engine, n, alpha, beta }
    }

    pub fn net_config(&self, m: usize, seed: u64) -> NetSimConfig {
        NetSimConfig::new(m, self.n, self.alpha, self.beta, seed)
    }

    pub fn inf_config(&self, pruning: bool, seed: u64) -> InfSimConfig {
        InfSimConfig { use_pruning: pruning, ..InfSimConfig::new(self.n, self.alpha, self.beta, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        match self.engine {
            Engine::Network { m } | Engine::Matrix { m } => self.net_config(m, 0).validate(),
            Engine::Infinite { pruning } => self.inf_config(pruning, 0).validate(),
        }
    }

    pub fn run(&self, seed: u64) -> Result<SimOutcome> {
        match self.engine {
            Engine::Network { m } => simulate_network(&self.net_config(m, seed)),
            Engine::Matrix { m } => simulate_matrix(&self.net_config(m, seed)),
            Engine::Infinite { pruning } => simulate_infinite(&self.inf_config(pruning, seed)),
        }
    }
}

/// Seed of replication `index` under `base_seed`.
pub fn replication_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed, index)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(replications)`.
    pub std_error: f64,
    pub quantiles: Quartiles,
    pub min: f64,
    pub max: f64,
    pub replications: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_rep_values: Option<Vec<f64>>,
}

impl McEstimate {
    pub fn from_values(values: Vec<f64>, keep_values: bool) -> Self {
        assert!(!values.is_empty(), "need at least one replication");
        let (mean, sd) = mean_std(&values);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let r = values.len();
        Self {
            mean,
            std_error: sd / (r as f64).sqrt(),
            quantiles: Quartiles {
                q25: quantile_sorted(&sorted, 0.25),
                q50: quantile_sorted(&sorted, 0.5),
                q75: quantile_sorted(&sorted, 0.75),
            },
            min: sorted[0],
            max: sorted[r - 1],
            replications: r,
            per_rep_values: keep_values.then_some(values),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct McOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub keep_values: bool,
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// `p_n` of `reps` independent runs, in replication order.
pub fn replicate(config: &EngineConfig, reps: usize, base_seed: u64, jobs: Option<usize>) -> Result<Vec<f64>> {
    if reps == 0 {
        return Err(Error::InvalidConfig("replication count must be at least 1".into()));
    }
    config.validate()?;
    in_pool(jobs, || {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                config
                    .run(replication_seed(base_seed, r))
                    .map(|o| o.p_n)
                    .map_err(|e| Error::Replication { index: r, source: Box::new(e) })
            })
            .collect::<Result<Vec<f64>>>()
    })?
}

pub fn run_replications(config: &EngineConfig, reps: usize, base_seed: u64, options: McOptions) -> Result<McEstimate> {
    let values = replicate(config, reps, base_seed, options.jobs)?;
    Ok(McEstimate::from_values(values, options.keep_values))
}

/// `ᾱ / (ᾱ + β̅)`, the expected proportion of valid blocks with unboundedly
/// many workers outside the chaotic regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub p: f64,
    pub ratio: f64,
    /// Set when β̅/ᾱ > 1, where the formula is not expected to hold well.
    pub chaotic_warning: bool,
    pub regime: Regime,
}

pub fn predicted_p(alpha_mean: f64, beta_mean: f64) -> Prediction {
    assert!(alpha_mean > 0.0 && beta_mean >= 0.0);
    let ratio = beta_mean / alpha_mean;
    Prediction {
        p: alpha_mean / (alpha_mean + beta_mean),
        ratio,
        chaotic_warning: ratio > 1.0,
        regime: classify(alpha_mean, beta_mean),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedMetrics {
    /// Growth rate of the longest branch, `p / ᾱ`.
    pub growth_rate: f64,
    /// Rate of invalid blocks, `(1 - p) / ᾱ`.
    pub invalid_rate: f64,
    /// Expected time to one confirmation, `ᾱ / p`.
    pub confirmation_time: f64,
}

pub fn derived_metrics(p_mean: f64, alpha_mean: f64) -> DerivedMetrics {
    assert!(p_mean > 0.0 && p_mean <= 1.0, "p must lie in (0, 1]");
    DerivedMetrics {
        growth_rate: p_mean / alpha_mean,
        invalid_rate: (1.0 - p_mean) / alpha_mean,
        confirmation_time: alpha_mean / p_mean,
    }
}

/// Invalid-gap statistics of a tree next to the two closed-form estimates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSummary {
    pub empirical_mean: Option<f64>,
    /// `(1 - p̄) / ᾱ`, a rate.
    pub rate_form: f64,
    /// `(1 - p̄) / p̄`, invalid blocks per valid block.
    pub count_form: f64,
    pub trailing: usize,
}

pub fn gap_summary(tree: &BlockTree, p_mean: f64, alpha_mean: f64) -> GapSummary {
    let hist = tree.invalid_gap_histogram();
    GapSummary {
        empirical_mean: hist.mean(),
        rate_form: (1.0 - p_mean) / alpha_mean,
        count_form: (1.0 - p_mean) / p_mean,
        trailing: hist.trailing,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Convergence,
    Efficiency,
    PdfHistogram,
    Single,
}

/// Parameters of one experiment.
///
/// `sweep` holds worker counts for `Convergence`, β̅/ᾱ ratios for
/// `Efficiency` and a single worker count for `PdfHistogram`; `Single` ignores
/// it. `base.engine` selects the engine for `Single` and `Efficiency`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub sweep: Vec<f64>,
    pub replications: usize,
    pub base: EngineConfig,
    pub base_seed: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    40
}

/// Default convergence sweep, `m ∈ {1, 2, 5, 10, 20, ..., 1000}`.
pub const DEFAULT_M_SWEEP: [usize; 10] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000];

/// Log grid of β̅/ᾱ from 10^-3 to 10^2, ten steps per decade, endpoints
/// included (51 points).
pub fn default_ratio_grid() -> Vec<f64> {
    (0..=50).map(|i| 10f64.powf(-3.0 + i as f64 / 10.0)).collect()
}

/// Seed of sweep point `index` (point seeds never collide with replication
/// seeds of the same base).
pub fn point_seed(base_seed: u64, index: usize) -> u64 {
    mix64(base_seed ^ 0x5EED_0F_9017, index as u64)
}

impl ExperimentPlan {
    pub fn new(kind: PlanKind, sweep: Vec<f64>, replications: usize, base: EngineConfig, base_seed: u64) -> Self {
        Self { kind, sweep, replications, base, base_seed, bins: default_bins() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replication count must be at least 1".into()));
        }
        if self.kind != PlanKind::Single && self.sweep.is_empty() {
            return Err(Error::InvalidConfig("sweep must not be empty".into()));
        }
        if matches!(self.kind, PlanKind::Convergence | PlanKind::PdfHistogram)
            && self.sweep.iter().any(|&m| m < 1.0 || m.fract() != 0.0)
        {
            return Err(Error::InvalidConfig("worker counts must be positive integers".into()));
        }
        if self.kind == PlanKind::Efficiency && self.sweep.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidConfig("ratios must be finite and non-negative".into()));
        }
        if self.kind == PlanKind::PdfHistogram && self.bins == 0 {
            return Err(Error::InvalidConfig("bins must be at least 1".into()));
        }
        self.base.alpha.validate(crate::distributions::Role::Alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// `None` is the unbounded-workers reference.
    pub m: Option<usize>,
    pub estimate: McEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub const HEADER: &'static str = "m,mean_p,q25,q75,replications";

    pub fn reference(&self) -> &McEstimate {
        &self.rows.last().expect("table has a reference row").estimate
    }

    pub fn row(&self, m: usize) -> Option<&McEstimate> {
        self.rows.iter().find(|r| r.m == Some(m)).map(|r| &r.estimate)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for row in &self.rows {
            let m = row.m.map_or_else(|| "inf".to_string(), |m| m.to_string());
            let e = &row.estimate;
            let _ = writeln!(out, "{m},{},{},{},{}", e.mean, e.quantiles.q25, e.quantiles.q75, e.replications);
        }
        out
    }
}

/// One matrix-engine estimate per worker count, then the unbounded reference.
pub fn convergence_experiment(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<ConvergenceTable> {
    plan.validate()?;
    let mut rows = Vec::with_capacity(plan.sweep.len() + 1);
    for (idx, &m) in plan.sweep.iter().enumerate() {
        let m = m as usize;
        let cfg = EngineConfig { engine: Engine::Matrix { m }, ..plan.base.clone() };
        let values = replicate(&cfg, plan.replications, point_seed(plan.base_seed, idx), jobs)?;
        rows.push(ConvergenceRow { m: Some(m), estimate: McEstimate::from_values(values, false) });
    }
    let cfg = EngineConfig { engine: Engine::Infinite { pruning: true }, ..plan.base.clone() };
    let values = replicate(&cfg, plan.replications, point_seed(plan.base_seed, plan.sweep.len()), jobs)?;
    rows.push(ConvergenceRow { m: None, estimate: McEstimate::from_values(values, false) });
    Ok(ConvergenceTable { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub ratio: f64,
    pub alpha_mean: f64,
    pub beta_mean: f64,
    pub estimate: McEstimate,
    pub predicted_p: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficiencyTable {
    pub rows: Vec<EfficiencyRow>,
}

impl EfficiencyTable {
    pub const HEADER: &'static str = "ratio,alpha_mean,beta_mean,mean_p,std_err,predicted_p,abs_error";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.ratio, r.alpha_mean, r.beta_mean, r.estimate.mean, r.estimate.std_error, r.predicted_p, r.abs_error
            );
        }
        out
    }

    /// Least-squares slope of mean p against log10 of the ratio, over the
    /// positive ratios.
    pub fn log_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.rows.iter().filter(|r| r.ratio > 0.0).map(|r| (r.ratio.log10(), r.estimate.mean)).collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// Mean `p` per β̅/ᾱ ratio next to `1 / (1 + ratio)`. β keeps its family and
/// shape; only its mean changes.
pub fn efficiency_experiment(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<EfficiencyTable> {
    plan.validate()?;
    let alpha_mean = plan.base.alpha.mean();
    let mut rows = Vec::with_capacity(plan.sweep.len());
    for (idx, &ratio) in plan.sweep.iter().enumerate() {
        let beta_mean = ratio * alpha_mean;
        let cfg = EngineConfig { beta: plan.base.beta.with_mean(beta_mean)?, ..plan.base.clone() };
        let values = replicate(&cfg, plan.replications, point_seed(plan.base_seed, idx), jobs)?;
        let estimate = McEstimate::from_values(values, false);
        let predicted = predicted_p(alpha_mean, beta_mean).p;
        rows.push(EfficiencyRow {
            ratio,
            alpha_mean,
            beta_mean,
            abs_error: (estimate.mean - predicted).abs(),
            estimate,
            predicted_p: predicted,
        });
    }
    Ok(EfficiencyTable { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub density_bounded: f64,
    pub density_unbounded: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdfComparison {
    pub m: usize,
    pub bins: Vec<HistogramBin>,
    pub bounded: Vec<f64>,
    pub unbounded: Vec<f64>,
    pub ks_distance: f64,
    /// `mean(A_∞) - mean(A_m)`.
    pub mean_shift: f64,
}

impl PdfComparison {
    pub const HEADER: &'static str = "bin_left,bin_right,density_Am,density_Ainf";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for b in &self.bins {
            let _ = writeln!(out, "{},{},{},{}", b.left, b.right, b.density_bounded, b.density_unbounded);
        }
        out
    }
}

/// Equal-width bins over the pooled range of both samples. A degenerate range
/// gets a single bin of width 0.01 centered on the value.
pub fn paired_histogram(a: &[f64], b: &[f64], bins: usize) -> Vec<HistogramBin> {
    assert!(bins >= 1 && !a.is_empty() && !b.is_empty());
    let (lo, hi) = a.iter().chain(b).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (lo, hi, bins) = if hi > lo { (lo, hi, bins) } else { (lo - 0.005, hi + 0.005, 1) };
    let width = (hi - lo) / bins as f64;
    let count = |xs: &[f64]| {
        let mut c = vec![0usize; bins];
        for &x in xs {
            let idx = (((x - lo) / width) as usize).min(bins - 1);
            c[idx] += 1;
        }
        c
    };
    let (ca, cb) = (count(a), count(b));
    (0..bins)
        .map(|i| HistogramBin {
            left: lo + i as f64 * width,
            right: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
            density_bounded: ca[i] as f64 / (a.len() as f64 * width),
            density_unbounded: cb[i] as f64 / (b.len() as f64 * width),
        })
        .collect()
}

/// Outcome distributions of the matrix engine with `m = sweep[0]` workers and
/// of the unbounded approximation, on common bins.
pub fn pdf_histogram_experiment(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<PdfComparison> {
    plan.validate()?;
    let m = plan.sweep[0] as usize;
    let bounded_cfg = EngineConfig { engine: Engine::Matrix { m }, ..plan.base.clone() };
    let unbounded_cfg = EngineConfig { engine: Engine::Infinite { pruning: true }, ..plan.base.clone() };
    let bounded = replicate(&bounded_cfg, plan.replications, point_seed(plan.base_seed, 0), jobs)?;
    let unbounded = replicate(&unbounded_cfg, plan.replications, point_seed(plan.base_seed, 1), jobs)?;
    let bins = paired_histogram(&bounded, &unbounded, plan.bins);
    let shift = mean_std(&unbounded).0 - mean_std(&bounded).0;
    Ok(PdfComparison {
        m,
        ks_distance: ks_distance_two_sample(&bounded, &unbounded),
        mean_shift: shift,
        bins,
        bounded,
        unbounded,
    })
}

/// Estimate for `plan.base` as is.
pub fn single_experiment(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<McEstimate> {
    plan.validate()?;
    run_replications(&plan.base, plan.replications, point_seed(plan.base_seed, 0), McOptions { jobs, keep_values: false })
}

impl McEstimate {
    pub const CSV_HEADER: &'static str = "engine,m,n,alpha,beta,mean_p,std_err,q25,q50,q75,replications";

    pub fn to_csv(&self, config: &EngineConfig) -> String {
        let m = config.engine.workers().map_or_else(|| "inf".to_string(), |m| m.to_string());
        format!(
            "{}\n{},{m},{},{},{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            config.engine.name(),
            config.n,
            config.alpha,
            config.beta,
            self.mean,
            self.std_error,
            self.quantiles.q25,
            self.quantiles.q50,
            self.quantiles.q75,
            self.replications
        )
    }
}
