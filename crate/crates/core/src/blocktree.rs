//! The global blockchain: a rooted tree of blocks stored as parent pointers.
//!
//! Block `0` is the origin. Every other block `k` attaches to a block created
//! before it, so `parent(k) < k` and depths can be computed in one forward
//! pass. Heights count nodes: the origin-only tree has height 1.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Number, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BlockTree {
    parents: Vec<usize>,
    producers: Option<Vec<usize>>,
    times: Vec<f64>,
}

impl BlockTree {
    /// The tree holding only the origin, created at time 0, with an empty
    /// producer record.
    pub fn origin() -> Self {
        Self { parents: Vec::new(), producers: Some(Vec::new()), times: vec![0.0] }
    }

    /// `parents[k - 1]` and `producers[k - 1]` describe block `k`; `times[k]`
    /// is the creation time of block `k` (so `times` has one extra entry).
    pub fn from_parts(parents: Vec<usize>, producers: Option<Vec<usize>>, times: Vec<f64>) -> Result<Self> {
        if times.len() != parents.len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "tree has {} parent entries but {} times",
                parents.len(),
                times.len()
            )));
        }
        if let Some(p) = &producers {
            if p.len() != parents.len() {
                return Err(Error::InvalidConfig("producers must cover blocks 1..n".into()));
            }
        }
        for (i, &parent) in parents.iter().enumerate() {
            if parent > i {
                return Err(Error::InvalidConfig(format!("block {} has parent {parent}", i + 1)));
            }
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("creation times must be finite and strictly increasing".into()));
        }
        Ok(Self { parents, producers, times })
    }

    /// Builds from parents only, with times `0, 1, 2, ...`.
    pub fn from_parents(parents: Vec<usize>) -> Result<Self> {
        let times = (0..=parents.len()).map(|k| k as f64).collect();
        Self::from_parts(parents, None, times)
    }

    /// A path `0 <- 1 <- ... <- len-1`.
    pub fn chain(len: usize) -> Self {
        assert!(len >= 1);
        Self::from_parents((0..len - 1).collect()).expect("chain is a valid tree")
    }

    pub(crate) fn push(&mut self, parent: usize, producer: usize, time: f64) -> usize {
        debug_assert!(parent < self.times.len());
        self.parents.push(parent);
        self.producers.get_or_insert_with(Vec::new).push(producer);
        self.times.push(time);
        self.times.len() - 1
    }

    /// Number of blocks, origin included.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn parent(&self, block: usize) -> Option<usize> {
        block.checked_sub(1).map(|i| self.parents[i])
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn producers(&self) -> Option<&[usize]> {
        self.producers.as_deref()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Node-count depth of every block (origin = 1).
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = Vec::with_capacity(self.len());
        depth.push(1);
        for &p in &self.parents {
            depth.push(depth[p] + 1);
        }
        depth
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(1)
    }

    /// `height / len`, the proportion of valid blocks.
    pub fn proportion_valid(&self) -> f64 {
        self.height() as f64 / self.len() as f64
    }

    pub fn is_path(&self) -> bool {
        self.parents.iter().enumerate().all(|(i, &p)| p == i)
    }

    /// Blocks of the longest branch, origin first. Among equally long branches
    /// the one whose tip was created first wins.
    pub fn longest_branch(&self) -> Vec<usize> {
        let depth = self.depths();
        let max = *depth.iter().max().unwrap_or(&1);
        let tip = depth.iter().position(|&d| d == max).unwrap_or(0);
        let mut branch = vec![tip];
        let mut cur = tip;
        while let Some(p) = self.parent(cur) {
            branch.push(p);
            cur = p;
        }
        branch.reverse();
        branch
    }

    /// Histogram of the number of invalid blocks created between consecutive
    /// blocks of the longest branch.
    ///
    /// Blocks created after the tip of the longest branch fall in no gap;
    /// they are counted in [`GapHistogram::trailing`].
    pub fn invalid_gap_histogram(&self) -> GapHistogram {
        let branch = self.longest_branch();
        let mut counts = BTreeMap::new();
        for w in branch.windows(2) {
            *counts.entry(w[1] - w[0] - 1).or_insert(0u64) += 1;
        }
        let tip = *branch.last().unwrap_or(&0);
        GapHistogram { counts, trailing: self.len() - 1 - tip }
    }

    pub fn export(&self, format: TreeFormat) -> Vec<u8> {
        match format {
            TreeFormat::Json => self.to_json().into_bytes(),
            TreeFormat::Dot => self.to_dot().into_bytes(),
        }
    }

    /// `{"parents":[...],"producers":[...],"times":[...]}`. Integral times are
    /// written without a fractional part.
    pub fn to_json(&self) -> String {
        let times: Vec<Value> = self.times.iter().map(|&t| time_value(t)).collect();
        let producers = match &self.producers {
            Some(p) => json!(p),
            None => Value::Null,
        };
        json!({ "parents": self.parents, "producers": producers, "times": times }).to_string()
    }

    pub fn from_json(data: &[u8]) -> Result<Self> {
        let raw: TreeJson = serde_json::from_slice(data).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_parts(raw.parents, raw.producers, raw.times)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph blocktree {\n  rankdir=RL;\n  0;\n");
        for (i, &p) in self.parents.iter().enumerate() {
            let _ = writeln!(out, "  {} -> {};", i + 1, p);
        }
        out.push_str("}\n");
        out
    }
}

fn time_value(t: f64) -> Value {
    if t.fract() == 0.0 && t >= 0.0 && t < 9.007_199_254_740_992e15 {
        Value::Number(Number::from(t as u64))
    } else {
        Number::from_f64(t).map(Value::Number).unwrap_or(Value::Null)
    }
}

#[derive(Deserialize, Serialize)]
struct TreeJson {
    parents: Vec<usize>,
    #[serde(default)]
    producers: Option<Vec<usize>>,
    times: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeFormat {
    Dot,
    Json,
}

impl FromStr for TreeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dot" | "gv" => Ok(TreeFormat::Dot),
            "json" => Ok(TreeFormat::Json),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Tip of every worker's local chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerPositions(pub Vec<usize>);

impl WorkerPositions {
    pub fn initial(m: usize) -> Self {
        Self(vec![0; m])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GapHistogram {
    /// gap size -> number of consecutive valid pairs with that gap
    pub counts: BTreeMap<usize, u64>,
    /// invalid blocks created after the tip of the longest branch
    pub trailing: usize,
}

impl GapHistogram {
    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Σ gap · count, the number of invalid blocks inside gaps.
    pub fn invalid_in_gaps(&self) -> u64 {
        self.counts.iter().map(|(&g, &c)| g as u64 * c).sum()
    }

    pub fn mean(&self) -> Option<f64> {
        let n = self.total_count();
        (n > 0).then(|| self.invalid_in_gaps() as f64 / n as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Slow,
    Fast,
    Chaotic,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Slow => "slow",
            Regime::Fast => "fast",
            Regime::Chaotic => "chaotic",
        })
    }
}

/// Ratio β̅/ᾱ below which a system counts as slow.
pub const SLOW_RATIO: f64 = 0.01;
/// Ratio β̅/ᾱ above which a system counts as chaotic.
pub const CHAOTIC_RATIO: f64 = 100.0;

/// Speed class from the mean production time and mean broadcast delay.
/// The boundaries are soft; report the ratio alongside the label.
pub fn classify(alpha_mean: f64, beta_mean: f64) -> Regime {
    let ratio = beta_mean / alpha_mean;
    if ratio < SLOW_RATIO {
        Regime::Slow
    } else if ratio > CHAOTIC_RATIO {
        Regime::Chaotic
    } else {
        Regime::Fast
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig1() -> BlockTree {
        // 0 <- 1 <- 5, 0 <- 2 <- 3 <- 6, 2 <- 4
        BlockTree::from_parents(vec![0, 0, 2, 2, 1, 3]).unwrap()
    }

    #[test]
    fn heights() {
        assert_eq!(BlockTree::origin().height(), 1);
        assert_eq!(fig1().height(), 4);
        assert_eq!(BlockTree::chain(100).height(), 100);
    }

    #[test]
    fn proportions() {
        assert_eq!(BlockTree::chain(37).proportion_valid(), 1.0);
        assert_eq!(fig1().proportion_valid(), 4.0 / 7.0);
        assert_eq!(BlockTree::origin().proportion_valid(), 1.0);
    }

    #[test]
    fn fig1_gaps() {
        let t = fig1();
        assert_eq!(t.longest_branch(), vec![0, 2, 3, 6]);
        let h = t.invalid_gap_histogram();
        assert_eq!(h.counts, BTreeMap::from([(0, 1), (1, 1), (2, 1)]));
        assert_eq!(h.trailing, 0);
        assert_eq!(h.invalid_in_gaps() as usize, t.len() - t.height());
        assert_eq!(h.total_count() as usize, t.height() - 1);
    }

    #[test]
    fn chain_gaps_are_zero() {
        let h = BlockTree::chain(10).invalid_gap_histogram();
        assert_eq!(h.counts, BTreeMap::from([(0, 9)]));
    }

    #[test]
    fn tie_prefers_earliest_tip() {
        // 0 <- 1 <- 2 and 1 <- 3: tips 2 and 3 both at depth 3
        let t = BlockTree::from_parents(vec![0, 1, 1]).unwrap();
        assert_eq!(t.longest_branch(), vec![0, 1, 2]);
        let h = t.invalid_gap_histogram();
        assert_eq!(h.trailing, 1);
        assert_eq!(h.invalid_in_gaps(), 0);
    }

    #[test]
    fn rejects_bad_trees() {
        assert!(BlockTree::from_parents(vec![1]).is_err());
        assert!(BlockTree::from_parts(vec![0], None, vec![0.0, 0.0]).is_err());
        assert!(BlockTree::from_parts(vec![0], Some(vec![]), vec![0.0, 1.0]).is_err());
        assert!(BlockTree::from_parts(vec![0], None, vec![0.0]).is_err());
    }

    #[test]
    fn classify_thresholds() {
        assert_eq!(classify(600.0, 12.6), Regime::Fast);
        assert_eq!(classify(1.0, 0.0), Regime::Slow);
        assert_eq!(classify(1.0, 1000.0), Regime::Chaotic);
        assert_eq!(classify(1.0, 1.0), Regime::Fast);
        assert_eq!(classify(1000.0, 1.0), Regime::Slow);
    }

    #[test]
    fn json_export() {
        let mut t = BlockTree::origin();
        assert_eq!(t.to_json(), r#"{"parents":[],"producers":[],"times":[0]}"#);
        assert_eq!(BlockTree::chain(1).to_json(), r#"{"parents":[],"producers":null,"times":[0]}"#);
        t.push(0, 3, 1.25);
        assert_eq!(t.to_json(), r#"{"parents":[0],"producers":[3],"times":[0,1.25]}"#);
    }

    #[test]
    fn dot_export() {
        let dot = BlockTree::chain(2).to_dot();
        assert!(dot.starts_with("digraph"));
        let edges: Vec<&str> = dot.lines().filter(|l| l.contains("->")).collect();
        assert_eq!(edges, vec!["  1 -> 0;"]);
    }

    #[test]
    fn format_parsing() {
        assert_eq!("DOT".parse::<TreeFormat>().unwrap(), TreeFormat::Dot);
        assert_eq!("json".parse::<TreeFormat>().unwrap(), TreeFormat::Json);
        assert!(matches!("xml".parse::<TreeFormat>(), Err(Error::UnsupportedFormat(_))));
    }

    fn arb_tree() -> impl Strategy<Value = BlockTree> {
        (1usize..60)
            .prop_flat_map(|n| {
                let parents: Vec<BoxedStrategy<usize>> = (0..n - 1).map(|i| (0..=i).boxed()).collect();
                let gaps = proptest::collection::vec(1e-6f64..10.0, n - 1);
                let producers = proptest::collection::vec(0usize..8, n - 1);
                (parents, gaps, proptest::option::of(producers))
            })
            .prop_map(|(parents, gaps, producers)| {
                let mut times = vec![0.0];
                for g in gaps {
                    let last = *times.last().unwrap();
                    times.push(last + g);
                }
                BlockTree::from_parts(parents, producers, times).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn json_round_trip(tree in arb_tree()) {
            let back = BlockTree::from_json(&tree.export(TreeFormat::Json)).unwrap();
            prop_assert_eq!(back, tree);
        }

        #[test]
        fn gap_partition_identity(tree in arb_tree()) {
            let h = tree.invalid_gap_histogram();
            prop_assert_eq!(h.invalid_in_gaps() as usize + h.trailing, tree.len() - tree.height());
            prop_assert_eq!(h.total_count() as usize, tree.height() - 1);
        }

        #[test]
        fn path_iff_full_height(tree in arb_tree()) {
            prop_assert!(tree.height() <= tree.len());
            prop_assert_eq!(tree.is_path(), tree.height() == tree.len());
            prop_assert_eq!(tree.is_path(), tree.proportion_valid() == 1.0);
        }
    }
}
