//! Self-checks that can be run on demand: engine equivalence, pruning
//! exactness, the mixture-CDF bound and the trivial regimes.

use serde::Serialize;

use crate::distributions::{mixture_cdf, sup_gap_bound, DistributionSpec};
use crate::draws::SeededDraws;
use crate::error::Result;
use crate::infinite::{run_infinite, InfSimConfig};
use crate::matrix::{run_matrix, visible_height_naive, visible_height_pruned, MatrixOptions, Visibility};
use crate::montecarlo::{Engine, EngineConfig};
use crate::network::{simulate_network_with, NetSimConfig};
use crate::stream::SampleStream;

/// Deliberate defects used to check that the suite notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// The matrix engine admits arrivals exactly at creation time.
    NonStrictVisibility,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationOptions {
    pub configs: usize,
    pub quick: bool,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { configs: 20, quick: false, seed: 0, fault: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status} {} ({} cases)\n", c.name, c.cases));
            for f in c.failures.iter().take(5) {
                out.push_str(&format!("    {f}\n"));
            }
        }
        out
    }
}

/// A random bounded-engine configuration: m in [2, 20], n in [10, 500],
/// exponential α, β exponential, gamma or constant with β̅/ᾱ in [0.01, 10].
pub fn random_net_config(stream: &mut SampleStream) -> NetSimConfig {
    let m = 2 + stream.next_index(19);
    let n = 10 + stream.next_index(491);
    let alpha_mean = 0.5 + 1.5 * stream.next_open01();
    let ratio = 10f64.powf(-2.0 + 3.0 * stream.next_open01());
    let beta_mean = ratio * alpha_mean;
    let beta = match stream.next_index(3) {
        0 => DistributionSpec::exponential(beta_mean),
        1 => DistributionSpec::gamma([1.0, 1.5, 2.0, 3.0, 5.0, 10.0][stream.next_index(6)], beta_mean),
        _ => DistributionSpec::constant(beta_mean),
    }
    .expect("valid beta");
    let seed = stream.next_u64_public();
    NetSimConfig::new(m, n, DistributionSpec::exponential(alpha_mean).expect("valid alpha"), beta, seed)
}

trait NextU64 {
    fn next_u64_public(&mut self) -> u64;
}

impl NextU64 for SampleStream {
    fn next_u64_public(&mut self) -> u64 {
        rand::RngCore::next_u64(self)
    }
}

/// Configurations whose arrivals land exactly on creation times.
fn tie_configs() -> Vec<NetSimConfig> {
    let c = |x: f64| DistributionSpec::constant(x).expect("valid constant");
    vec![
        NetSimConfig::new(3, 60, c(1.0), c(1.0), 1),
        NetSimConfig::new(4, 60, c(1.0), c(2.0), 2),
    ]
}

fn fault_options(fault: Option<Fault>) -> MatrixOptions {
    MatrixOptions {
        visibility: match fault {
            Some(Fault::NonStrictVisibility) => Visibility::NonStrict,
            None => Visibility::Strict,
        },
        ..Default::default()
    }
}

/// Network and matrix engines on shared seeded draws must agree exactly.
pub fn check_engine_equivalence(configs: &[NetSimConfig], fault: Option<Fault>) -> Result<CheckResult> {
    let mut failures = Vec::new();
    for cfg in configs {
        let mut cfg = cfg.clone();
        cfg.record_series = true;
        let net = simulate_network_with(&cfg, SeededDraws::new(&cfg.alpha, &cfg.beta, cfg.seed)?)?;
        let (mat, _) = run_matrix(&cfg, SeededDraws::new(&cfg.alpha, &cfg.beta, cfg.seed)?, fault_options(fault))?;
        if net.p_n.to_bits() != mat.p_n.to_bits() || net.height_series != mat.height_series {
            failures.push(format!(
                "m={} n={} beta={} seed={}: network p={} matrix p={}",
                cfg.m, cfg.n, cfg.beta, cfg.seed, net.p_n, mat.p_n
            ));
        }
    }
    Ok(CheckResult { name: "engine_equivalence", cases: configs.len(), failures })
}

/// Pruned and full scans agree with the recorded height at every step.
pub fn check_pruning(configs: &[NetSimConfig], fault: Option<Fault>) -> Result<CheckResult> {
    let mut failures = Vec::new();
    let mut steps = 0;
    let opts = fault_options(fault);
    for cfg in configs {
        let (_, state) = run_matrix(cfg, SeededDraws::new(&cfg.alpha, &cfg.beta, cfg.seed)?, opts)?;
        for k in 1..state.len() {
            steps += 1;
            let (j, t_k) = (state.producers()[k], state.times()[k]);
            let naive = visible_height_naive(k, j, t_k, &state, opts.visibility);
            let (pruned, _) = visible_height_pruned(k, j, t_k, &state, opts.visibility);
            if naive != pruned || naive != state.heights()[k] {
                failures.push(format!("seed={} k={k}: naive={naive} pruned={pruned}", cfg.seed));
            }
        }
    }
    Ok(CheckResult { name: "pruning_exactness", cases: steps, failures })
}

/// The unbounded engine gives identical heights with and without pruning.
pub fn check_infinite_pruning(configs: &[NetSimConfig]) -> Result<CheckResult> {
    let mut failures = Vec::new();
    for cfg in configs {
        let mut inf = InfSimConfig::new(cfg.n, cfg.alpha, cfg.beta, cfg.seed);
        let (_, pruned) = run_infinite(&inf)?;
        inf.use_pruning = false;
        let (_, full) = run_infinite(&inf)?;
        if pruned != full {
            failures.push(format!("n={} beta={} seed={}", cfg.n, cfg.beta, cfg.seed));
        }
    }
    Ok(CheckResult { name: "infinite_pruning_exactness", cases: configs.len(), failures })
}

/// Every supported β kind, used by the CDF-bound check.
pub fn cdf_check_specs() -> Vec<DistributionSpec> {
    let mut specs = vec![
        DistributionSpec::exponential(1.0).expect("valid"),
        DistributionSpec::exponential(0.1).expect("valid"),
        DistributionSpec::chi_squared(1.0).expect("valid"),
        DistributionSpec::chi_squared(4.0).expect("valid"),
        DistributionSpec::constant(0.0).expect("valid"),
        DistributionSpec::constant(1.5).expect("valid"),
    ];
    for k in [1.0, 1.5, 2.0, 3.0, 5.0, 10.0] {
        specs.push(DistributionSpec::gamma(k, 1.0).expect("valid"));
    }
    specs
}

/// `sup |mixture_cdf - cdf|` over `points` evenly spaced values of `r` in
/// `[0, mean + 12 sd]` (plus a point just below zero).
pub fn mixture_sup_gap(spec: &DistributionSpec, m: usize, points: usize) -> f64 {
    let hi = (spec.mean() + 12.0 * spec.variance().sqrt()).max(1.0) * 1.5;
    let step = hi / (points - 1) as f64;
    std::iter::once(-1e-9)
        .chain((0..points).map(|i| i as f64 * step))
        .map(|r| (mixture_cdf(spec, m, r) - spec.cdf(r)).abs())
        .fold(0.0, f64::max)
}

pub fn check_cdf_bound(points: usize) -> CheckResult {
    let mut failures = Vec::new();
    let mut cases = 0;
    for spec in cdf_check_specs() {
        for m in [1, 2, 10, 100] {
            cases += 1;
            let sup = mixture_sup_gap(&spec, m, points);
            if !(sup <= sup_gap_bound(m)) {
                failures.push(format!("{spec} m={m}: sup gap {sup} > {}", sup_gap_bound(m)));
            }
        }
    }
    CheckResult { name: "mixture_cdf_bound", cases, failures }
}

/// One worker or zero delay gives `p_n = 1` on every engine.
pub fn check_trivial_regimes(seeds: &[u64], n: usize) -> Result<CheckResult> {
    let mut failures = Vec::new();
    let mut cases = 0;
    let exp = |x: f64| DistributionSpec::exponential(x).expect("valid");
    let zero = DistributionSpec::constant(0.0).expect("valid");
    for &seed in seeds {
        let runs = [
            EngineConfig::new(Engine::Network { m: 1 }, n, exp(1.0), exp(5.0)),
            EngineConfig::new(Engine::Matrix { m: 1 }, n, exp(1.0), exp(5.0)),
            EngineConfig::new(Engine::Network { m: 16 }, n, exp(1.0), zero),
            EngineConfig::new(Engine::Matrix { m: 16 }, n, exp(1.0), zero),
            EngineConfig::new(Engine::Infinite { pruning: true }, n, exp(1.0), zero),
            EngineConfig::new(Engine::Infinite { pruning: false }, n.min(300), exp(1.0), zero),
        ];
        for cfg in runs {
            cases += 1;
            let p = cfg.run(seed)?.p_n;
            if p != 1.0 {
                failures.push(format!("{} {:?} beta={} seed={seed}: p={p}", cfg.engine.name(), cfg.engine, cfg.beta));
            }
        }
    }
    Ok(CheckResult { name: "trivial_regimes", cases, failures })
}

pub fn run_validation(opts: &ValidationOptions) -> Result<ValidationReport> {
    let count = if opts.quick { opts.configs.min(8) } else { opts.configs };
    let mut stream = SampleStream::new(opts.seed, 0xC0_4F16);
    let mut configs: Vec<NetSimConfig> = (0..count).map(|_| random_net_config(&mut stream)).collect();
    configs.extend(tie_configs());

    let checks = vec![
        check_engine_equivalence(&configs, opts.fault)?,
        check_pruning(&configs, opts.fault)?,
        check_infinite_pruning(&configs)?,
        check_cdf_bound(if opts.quick { 1_000 } else { 10_000 }),
        check_trivial_regimes(&[opts.seed, opts.seed ^ 1, opts.seed ^ 2], if opts.quick { 200 } else { 1000 })?,
    ];
    Ok(ValidationReport { checks })
}
