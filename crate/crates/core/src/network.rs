//! Exact simulation of `m` workers with a priority queue of in-flight
//! announcements.
//!
//! Each step advances the clock by a production time, delivers every message
//! due strictly before the new time, lets a uniformly chosen worker extend its
//! own chain and announces the new tip to every other worker with an
//! independent delay. Messages carry only `(tip, height)`: adoption compares
//! lengths, and the tree is rebuilt from producer/parent records.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::blocktree::{BlockTree, WorkerPositions};
use crate::distributions::{DistributionSpec, Role};
use crate::draws::{DrawSource, SeededDraws, StreamSeeds};
use crate::error::{Error, Result};
use crate::outcome::SimOutcome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSimConfig {
    pub m: usize,
    pub n: usize,
    pub alpha: DistributionSpec,
    pub beta: DistributionSpec,
    pub seed: u64,
    #[serde(default)]
    pub record_tree: bool,
    #[serde(default)]
    pub record_series: bool,
}

impl NetSimConfig {
    pub fn new(m: usize, n: usize, alpha: DistributionSpec, beta: DistributionSpec, seed: u64) -> Self {
        Self { m, n, alpha, beta, seed, record_tree: false, record_series: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        self.alpha.validate(Role::Alpha)?;
        self.beta.validate(Role::Beta)
    }
}

/// Announcement of a new tip to one recipient.
#[derive(Clone, Copy, Debug)]
pub struct Message {
    pub arrival: f64,
    pub recipient: usize,
    pub tip: usize,
    pub height: usize,
    seq: u64,
}

impl PartialEq for Message {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Message {}

impl PartialOrd for Message {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Message {
    fn cmp(&self, other: &Self) -> Ordering {
        self.arrival.total_cmp(&other.arrival).then(self.seq.cmp(&other.seq))
    }
}

/// Min-queue of messages by arrival time, FIFO among equal arrivals.
#[derive(Debug, Default)]
pub struct MessageQueue {
    heap: BinaryHeap<Reverse<Message>>,
    next_seq: u64,
}

impl MessageQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, arrival: f64, recipient: usize, tip: usize, height: usize) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Message { arrival, recipient, tip, height, seq }));
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    fn pop_due(&mut self, now: f64) -> Option<Message> {
        match self.heap.peek() {
            Some(Reverse(msg)) if msg.arrival < now => self.heap.pop().map(|Reverse(m)| m),
            _ => None,
        }
    }
}

/// A worker's local chain, summarized by its tip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkerTip {
    pub tip: usize,
    pub height: usize,
}

impl WorkerTip {
    pub const ORIGIN: WorkerTip = WorkerTip { tip: 0, height: 1 };
}

/// Delivers every message with `arrival < now`. A recipient switches to the
/// announced tip only if it is strictly higher than its own.
pub fn delivery_sweep(queue: &mut MessageQueue, now: f64, workers: &mut [WorkerTip]) {
    while let Some(msg) = queue.pop_due(now) {
        let w = &mut workers[msg.recipient];
        if msg.height > w.height {
            *w = WorkerTip { tip: msg.tip, height: msg.height };
        }
    }
}

pub fn simulate_network(config: &NetSimConfig) -> Result<SimOutcome> {
    config.validate()?;
    let mut draws = SeededDraws::new(&config.alpha, &config.beta, config.seed)?;
    let mut out = simulate_network_with(config, &mut draws)?;
    out.seeds = Some(StreamSeeds::for_seed(config.seed));
    Ok(out)
}

/// Runs the engine on injected draws; `config.seed` and the distributions are
/// ignored.
pub fn simulate_network_with<D: DrawSource>(config: &NetSimConfig, mut draws: D) -> Result<SimOutcome> {
    if config.m == 0 || config.n == 0 {
        return Err(Error::InvalidConfig("m and n must be at least 1".into()));
    }
    let m = config.m;
    let mut workers = vec![WorkerTip::ORIGIN; m];
    let mut queue = MessageQueue::new();
    let mut tree = config.record_tree.then(BlockTree::origin);
    let mut series = config.record_series.then(|| {
        let mut v = Vec::with_capacity(config.n);
        v.push(1);
        v
    });
    let mut t = 0.0;

    for k in 1..config.n {
        t += draws.production_time();
        delivery_sweep(&mut queue, t, &mut workers);

        let j = draws.producer(m);
        let height = workers[j].height + 1;
        if let Some(tree) = tree.as_mut() {
            tree.push(workers[j].tip, j, t);
        }
        workers[j] = WorkerTip { tip: k, height };
        if let Some(series) = series.as_mut() {
            series.push(height);
        }

        for i in (0..m).filter(|&i| i != j) {
            queue.push(t + draws.delay(), i, k, height);
        }
    }

    let best = workers.iter().map(|w| w.height).max().unwrap_or(1);
    let mut out = SimOutcome::new(config.n, best);
    if let Some(tree) = tree {
        debug_assert_eq!(tree.height(), best);
        out.tree = Some(tree);
        out.positions = Some(WorkerPositions(workers.iter().map(|w| w.tip).collect()));
    }
    out.height_series = series;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::draws::ScriptedDraws;

    fn spec(s: &str) -> DistributionSpec {
        s.parse().unwrap()
    }

    #[test]
    fn single_worker_never_forks() {
        let cfg = NetSimConfig::new(1, 50, spec("exp:1"), spec("exp:10"), 3);
        let out = simulate_network(&cfg).unwrap();
        assert_eq!(out.p_n, 1.0);
        assert_eq!(out.final_height, 50);
    }

    #[test]
    fn zero_delay_is_perfect_sync() {
        let cfg = NetSimConfig::new(20, 200, spec("exp:1"), spec("const:0"), 11);
        assert_eq!(simulate_network(&cfg).unwrap().p_n, 1.0);
    }

    #[test]
    fn hand_trace_two_workers() {
        let mut cfg = NetSimConfig::new(2, 5, spec("const:1"), spec("const:1.5"), 0);
        cfg.record_tree = true;
        cfg.record_series = true;
        let draws = ScriptedDraws::new(vec![1.0], vec![0, 1, 0, 1], vec![1.5]);
        let out = simulate_network_with(&cfg, draws).unwrap();
        assert_eq!(out.height_series.as_deref(), Some(&[1, 2, 2, 3, 3][..]));
        assert_eq!(out.final_height, 3);
        assert_eq!(out.p_n, 3.0 / 5.0);
        let tree = out.tree.unwrap();
        assert_eq!(tree.parents(), &[0, 0, 1, 2]);
        assert_eq!(tree.producers(), Some(&[0, 1, 0, 1][..]));
        assert_eq!(out.positions, Some(WorkerPositions(vec![3, 4])));
    }

    #[test]
    fn sweep_empty_queue_is_noop() {
        let mut q = MessageQueue::new();
        let mut w = vec![WorkerTip::ORIGIN; 3];
        delivery_sweep(&mut q, 10.0, &mut w);
        assert_eq!(w, vec![WorkerTip::ORIGIN; 3]);
    }

    #[test]
    fn sweep_keeps_incumbent_on_tie() {
        let mut q = MessageQueue::new();
        let mut w = vec![WorkerTip { tip: 4, height: 3 }];
        q.push(1.0, 0, 7, 3);
        delivery_sweep(&mut q, 2.0, &mut w);
        assert_eq!(w[0], WorkerTip { tip: 4, height: 3 });
        assert!(q.is_empty());
    }

    #[test]
    fn sweep_is_strict_in_time() {
        let mut q = MessageQueue::new();
        let mut w = vec![WorkerTip::ORIGIN];
        q.push(2.0, 0, 1, 2);
        delivery_sweep(&mut q, 2.0, &mut w);
        assert_eq!(w[0], WorkerTip::ORIGIN);
        assert_eq!(q.len(), 1);
        delivery_sweep(&mut q, 2.0 + f64::EPSILON * 4.0, &mut w);
        assert_eq!(w[0].height, 2);
    }

    #[test]
    fn sweep_order_independent() {
        // heights 3 and 5 to the same worker, due at the same or permuted times
        for arrivals in [[1.0, 1.0], [1.0, 0.5], [0.5, 1.0]] {
            for swap in [false, true] {
                let mut q = MessageQueue::new();
                let mut w = vec![WorkerTip::ORIGIN];
                let msgs = if swap { [(5, 9), (3, 8)] } else { [(3, 8), (5, 9)] };
                for ((h, tip), a) in msgs.into_iter().zip(arrivals) {
                    q.push(a, 0, tip, h);
                }
                delivery_sweep(&mut q, 2.0, &mut w);
                assert_eq!(w[0], WorkerTip { tip: 9, height: 5 });
            }
        }
    }

    #[test]
    fn n_one_is_origin_only() {
        let mut cfg = NetSimConfig::new(4, 1, spec("exp:1"), spec("exp:1"), 0);
        cfg.record_tree = true;
        let out = simulate_network(&cfg).unwrap();
        assert_eq!(out.p_n, 1.0);
        assert_eq!(out.tree.unwrap().len(), 1);
    }

    #[test]
    fn tree_matches_outcome() {
        let mut cfg = NetSimConfig::new(6, 400, spec("exp:1"), spec("exp:2"), 5);
        cfg.record_tree = true;
        let out = simulate_network(&cfg).unwrap();
        let tree = out.tree.as_ref().unwrap();
        assert_eq!(tree.len(), 400);
        assert_eq!(tree.height(), out.final_height);
        assert!(out.p_n < 1.0);
        assert!(BlockTree::from_parts(tree.parents().to_vec(), None, tree.times().to_vec()).is_ok());
    }

    #[test]
    fn deterministic() {
        let mut cfg = NetSimConfig::new(5, 300, spec("exp:1"), spec("gamma:0.7:2"), 42);
        cfg.record_series = true;
        assert_eq!(simulate_network(&cfg).unwrap(), simulate_network(&cfg).unwrap());
    }

    #[test]
    fn invalid_configs() {
        assert!(simulate_network(&NetSimConfig::new(0, 5, spec("exp:1"), spec("exp:1"), 0)).is_err());
        assert!(simulate_network(&NetSimConfig::new(2, 0, spec("exp:1"), spec("exp:1"), 0)).is_err());
        assert!(simulate_network(&NetSimConfig::new(2, 5, spec("const:0"), spec("exp:1"), 0)).is_err());
    }
}
