//! Simulation of block trees grown by workers that hear about each other's
//! blocks only after random delays.
//!
//! Three engines are provided: a message-passing simulation over `m` workers,
//! an equivalent delay-matrix formulation, and an approximation with
//! infinitely many workers. [`montecarlo`] runs replications and sweeps on
//! top of them.

pub mod blocktree;
pub mod distributions;
pub mod draws;
pub mod error;
pub mod infinite;
pub mod matrix;
pub mod montecarlo;
pub mod network;
pub mod outcome;
pub mod stats;
pub mod stream;
pub mod validate;

pub use blocktree::{classify, BlockTree, GapHistogram, Regime, TreeFormat, WorkerPositions};
pub use distributions::{mixture_cdf, sup_gap_bound, DistKind, DistributionSpec, Role};
pub use draws::{DrawSource, ScriptedDraws, SeededDraws, StreamSeeds};
pub use error::{Error, Result};
pub use infinite::{simulate_infinite, InfSimConfig};
pub use matrix::{simulate_matrix, HeightScan, MatrixOptions, Visibility};
pub use montecarlo::{Engine, EngineConfig, McEstimate};
pub use network::{simulate_network, NetSimConfig};
pub use outcome::{ScanStats, SimOutcome};
pub use stream::SampleStream;
