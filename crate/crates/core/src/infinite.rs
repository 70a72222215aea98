//! Unbounded-workers approximation.
//!
//! With infinitely many workers the producer of each block is a fresh worker,
//! so a delay-matrix entry is replaced by an independent β-draw every time the
//! visibility of block `i` at the creation of block `k` is tested. This drops
//! the matrix and the worker count, at the cost of ignoring that a real delay
//! is drawn once and then fixed (the hysteresis effect). The bias is
//! negligible in slow and fast regimes and visible when β̅ ≫ ᾱ.
//!
//! The delay for the pair `(i, k)` is drawn from its own keyed substream, so
//! the value does not depend on the order in which pairs are tested. That is
//! what makes the pruned and the full scan agree exactly.

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Role, Sampler};
use crate::draws::{StreamSeeds, DELAY_STREAM, PRODUCTION_STREAM};
use crate::error::{Error, Result};
use crate::matrix::Visibility;
use crate::outcome::{ScanStats, SimOutcome};
use crate::stream::SampleStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSimConfig {
    pub n: usize,
    pub alpha: DistributionSpec,
    pub beta: DistributionSpec,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub use_pruning: bool,
    #[serde(default)]
    pub record_series: bool,
}

fn default_true() -> bool {
    true
}

impl InfSimConfig {
    pub fn new(n: usize, alpha: DistributionSpec, beta: DistributionSpec, seed: u64) -> Self {
        Self { n, alpha, beta, seed, use_pruning: true, record_series: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.n as u64 > u32::MAX as u64 {
            return Err(Error::InvalidConfig("n must fit in 32 bits".into()));
        }
        self.alpha.validate(Role::Alpha)?;
        self.beta.validate(Role::Beta)
    }
}

/// β-draws keyed by the tested pair `(i, k)`.
#[derive(Clone, Debug)]
pub struct PairDelays {
    sampler: Sampler,
    seed: u64,
}

impl PairDelays {
    pub fn new(beta: &DistributionSpec, run_seed: u64) -> Result<Self> {
        Ok(Self { sampler: beta.sampler()?, seed: SampleStream::new(run_seed, DELAY_STREAM).derived_seed() })
    }

    #[inline]
    pub fn delay(&self, i: usize, k: usize) -> f64 {
        let key = ((k as u64) << 32) | i as u64;
        self.sampler.sample(&mut SampleStream::new(self.seed, key))
    }
}

/// Heights and cumulative maxima of the blocks created so far.
#[derive(Clone, Debug, PartialEq)]
pub struct InfState {
    pub t: Vec<f64>,
    pub h: Vec<usize>,
    pub z: Vec<usize>,
}

impl InfState {
    fn new(capacity: usize) -> Self {
        let mut s = Self { t: Vec::with_capacity(capacity), h: Vec::with_capacity(capacity), z: Vec::with_capacity(capacity) };
        s.t.push(0.0);
        s.h.push(1);
        s.z.push(1);
        s
    }
}

/// `1 + max { h_i : 0 < i < k, t_i + β(i,k) < t_k } ∪ {1}`, testing every `i`.
pub fn infinite_height_naive(k: usize, t_k: f64, state: &InfState, delays: &PairDelays, vis: Visibility) -> usize {
    let mut best = 1;
    for i in (1..k).rev() {
        let arrival = state.t[i] + delays.delay(i, k);
        if admits(vis, arrival, t_k) && state.h[i] > best {
            best = state.h[i];
        }
    }
    1 + best
}

/// Pruned backward scan; returns the height and the number of inspected blocks.
pub fn infinite_height_pruned(
    k: usize,
    t_k: f64,
    state: &InfState,
    delays: &PairDelays,
    vis: Visibility,
) -> (usize, usize) {
    let mut best = 1;
    let mut scanned = 0;
    for i in (0..k).rev() {
        if best >= state.z[i] {
            break;
        }
        scanned += 1;
        if state.h[i] > best && admits(vis, state.t[i] + delays.delay(i, k), t_k) {
            best = state.h[i];
        }
    }
    (1 + best, scanned)
}

#[inline]
fn admits(vis: Visibility, arrival: f64, now: f64) -> bool {
    match vis {
        Visibility::Strict => arrival < now,
        Visibility::NonStrict => arrival <= now,
    }
}

pub fn simulate_infinite(config: &InfSimConfig) -> Result<SimOutcome> {
    let (out, _) = run_infinite(config)?;
    Ok(out)
}

/// Like [`simulate_infinite`], also returning the final state.
pub fn run_infinite(config: &InfSimConfig) -> Result<(SimOutcome, InfState)> {
    config.validate()?;
    let alpha = config.alpha.sampler()?;
    let mut production = SampleStream::new(config.seed, PRODUCTION_STREAM);
    let delays = PairDelays::new(&config.beta, config.seed)?;
    let mut state = InfState::new(config.n);
    let mut stats = ScanStats::default();

    for k in 1..config.n {
        let t_k = state.t[k - 1] + alpha.sample(&mut production);
        let (h, scanned) = if config.use_pruning {
            infinite_height_pruned(k, t_k, &state, &delays, Visibility::Strict)
        } else {
            (infinite_height_naive(k, t_k, &state, &delays, Visibility::Strict), k - 1)
        };
        stats.record(scanned);
        let z = h.max(state.z[k - 1]);
        state.t.push(t_k);
        state.h.push(h);
        state.z.push(z);
    }

    let mut out = SimOutcome::new(config.n, *state.z.last().unwrap_or(&1));
    out.scan = Some(stats);
    let seeds = StreamSeeds::for_seed(config.seed);
    out.seeds = Some(StreamSeeds { producer: None, ..seeds });
    if config.record_series {
        out.height_series = Some(state.h.clone());
    }
    Ok((out, state))
}
