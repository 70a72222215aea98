use serde::Serialize;

use crate::blocktree::{BlockTree, WorkerPositions};
use crate::draws::StreamSeeds;

/// Result of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimOutcome {
    /// Blocks produced, origin included.
    pub n: usize,
    /// Length of the longest chain, origin included.
    pub final_height: usize,
    /// `final_height / n`.
    pub p_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<BlockTree>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<WorkerPositions>,
    /// `h_k` for `k = 0..n`, with `h_0 = 1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height_series: Option<Vec<usize>>,
    /// Seeds of the substreams, absent when draws were injected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<StreamSeeds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanStats>,
}

impl SimOutcome {
    pub(crate) fn new(n: usize, final_height: usize) -> Self {
        Self {
            n,
            final_height,
            p_n: final_height as f64 / n as f64,
            tree: None,
            positions: None,
            height_series: None,
            seeds: None,
            scan: None,
        }
    }
}

/// How far back the visibility scans reached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ScanStats {
    pub steps: u64,
    pub scanned: u64,
    pub max_window: u64,
}

impl ScanStats {
    pub(crate) fn record(&mut self, window: usize) {
        self.steps += 1;
        self.scanned += window as u64;
        self.max_window = self.max_window.max(window as u64);
    }

    /// Mean number of earlier blocks inspected per step.
    pub fn mean_window(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.scanned as f64 / self.steps as f64
        }
    }
}

// BlockTree's JSON form is its export format.
impl Serialize for BlockTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let value: serde_json::Value = serde_json::from_str(&self.to_json()).map_err(serde::ser::Error::custom)?;
        value.serialize(serializer)
    }
}
