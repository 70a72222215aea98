//! Random inputs consumed by the bounded-worker engines.
//!
//! Both the priority-queue engine and the matrix engine read three independent
//! substreams per step, in this order: one production time, one producer index,
//! then `m - 1` delays for recipients `0..m` skipping the producer. Feeding the
//! same [`DrawSource`] state to both engines therefore yields the same model
//! trajectory.

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, Role, Sampler};
use crate::error::Result;
use crate::stream::SampleStream;

/// Stream id of the production-time substream.
pub const PRODUCTION_STREAM: u64 = 1;
/// Stream id of the producer-choice substream.
pub const PRODUCER_STREAM: u64 = 2;
/// Stream id of the delay substream.
pub const DELAY_STREAM: u64 = 3;

pub trait DrawSource {
    /// Time to produce the next block (α).
    fn production_time(&mut self) -> f64;
    /// Index of the worker producing the next block, in `0..m`.
    fn producer(&mut self, m: usize) -> usize;
    /// Delay before one recipient learns of a block (β).
    fn delay(&mut self) -> f64;
}

/// Derived seeds of the three substreams of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamSeeds {
    pub production: u64,
    /// Absent for the unbounded-workers engine, which has no producer choice.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub producer: Option<u64>,
    pub delay: u64,
}

impl StreamSeeds {
    pub fn for_seed(seed: u64) -> Self {
        Self {
            production: SampleStream::new(seed, PRODUCTION_STREAM).derived_seed(),
            producer: Some(SampleStream::new(seed, PRODUCER_STREAM).derived_seed()),
            delay: SampleStream::new(seed, DELAY_STREAM).derived_seed(),
        }
    }
}

/// The default source: three seeded substreams of one run seed.
#[derive(Clone, Debug)]
pub struct SeededDraws {
    alpha: Sampler,
    beta: Sampler,
    production: SampleStream,
    producer: SampleStream,
    delay: SampleStream,
}

impl SeededDraws {
    pub fn new(alpha: &DistributionSpec, beta: &DistributionSpec, seed: u64) -> Result<Self> {
        alpha.validate(Role::Alpha)?;
        beta.validate(Role::Beta)?;
        Ok(Self {
            alpha: alpha.sampler()?,
            beta: beta.sampler()?,
            production: SampleStream::new(seed, PRODUCTION_STREAM),
            producer: SampleStream::new(seed, PRODUCER_STREAM),
            delay: SampleStream::new(seed, DELAY_STREAM),
        })
    }

    /// Words consumed so far from (production, producer, delay).
    pub fn positions(&self) -> (u64, u64, u64) {
        (self.production.position(), self.producer.position(), self.delay.position())
    }
}

impl DrawSource for SeededDraws {
    #[inline]
    fn production_time(&mut self) -> f64 {
        self.alpha.sample(&mut self.production)
    }

    #[inline]
    fn producer(&mut self, m: usize) -> usize {
        self.producer.next_index(m)
    }

    #[inline]
    fn delay(&mut self) -> f64 {
        self.beta.sample(&mut self.delay)
    }
}

/// Replays fixed sequences, cycling when a sequence runs out. Producer values
/// are reduced modulo `m`.
#[derive(Clone, Debug)]
pub struct ScriptedDraws {
    times: Vec<f64>,
    producers: Vec<usize>,
    delays: Vec<f64>,
    cursor: [usize; 3],
}

impl ScriptedDraws {
    pub fn new(times: Vec<f64>, producers: Vec<usize>, delays: Vec<f64>) -> Self {
        assert!(!times.is_empty() && !producers.is_empty() && !delays.is_empty());
        assert!(times.iter().all(|&t| t > 0.0), "production times must be positive");
        assert!(delays.iter().all(|&d| d >= 0.0), "delays must be non-negative");
        Self { times, producers, delays, cursor: [0; 3] }
    }
}

fn next_cyclic<T: Copy>(xs: &[T], cursor: &mut usize) -> T {
    let v = xs[*cursor % xs.len()];
    *cursor += 1;
    v
}

impl DrawSource for ScriptedDraws {
    fn production_time(&mut self) -> f64 {
        next_cyclic(&self.times, &mut self.cursor[0])
    }

    fn producer(&mut self, m: usize) -> usize {
        next_cyclic(&self.producers, &mut self.cursor[1]) % m
    }

    fn delay(&mut self) -> f64 {
        next_cyclic(&self.delays, &mut self.cursor[2])
    }
}

impl<D: DrawSource + ?Sized> DrawSource for &mut D {
    fn production_time(&mut self) -> f64 {
        (**self).production_time()
    }

    fn producer(&mut self, m: usize) -> usize {
        (**self).producer(m)
    }

    fn delay(&mut self) -> f64 {
        (**self).delay()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_is_reproducible() {
        let a = DistributionSpec::exponential(1.0).unwrap();
        let b = DistributionSpec::gamma(2.0, 0.5).unwrap();
        let mut x = SeededDraws::new(&a, &b, 99).unwrap();
        let mut y = SeededDraws::new(&a, &b, 99).unwrap();
        for _ in 0..100 {
            assert_eq!(x.production_time().to_bits(), y.production_time().to_bits());
            assert_eq!(x.producer(7), y.producer(7));
            assert_eq!(x.delay().to_bits(), y.delay().to_bits());
        }
        assert_eq!(x.positions().0, 100);
        assert_eq!(x.positions().1, 100);
    }

    #[test]
    fn seeded_rejects_zero_alpha() {
        let zero = DistributionSpec::constant(0.0).unwrap();
        assert!(SeededDraws::new(&zero, &zero, 1).is_err());
        assert!(SeededDraws::new(&DistributionSpec::constant(1.0).unwrap(), &zero, 1).is_ok());
    }

    #[test]
    fn scripted_cycles() {
        let mut s = ScriptedDraws::new(vec![1.0], vec![0, 1, 5], vec![1.5, 2.5]);
        let prods: Vec<usize> = (0..4).map(|_| s.producer(2)).collect();
        assert_eq!(prods, vec![0, 1, 1, 0]);
        assert_eq!(s.delay(), 1.5);
        assert_eq!(s.delay(), 2.5);
        assert_eq!(s.delay(), 1.5);
    }
}
