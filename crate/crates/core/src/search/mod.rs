//! Branch-and-bound over the prefix trie of rule lists with a hard fairness
//! constraint on incumbents.
//!
//! Prefixes are explored in the order given by a [`Strategy`]. A prefix's
//! lower bound is its mistakes on the samples it already captures plus
//! `lambda` per rule; no completion can do better. Any prefix whose bound
//! cannot beat the incumbent is discarded. The fairness constraint
//! `unfairness <= 1 - epsilon` only filters which completed rule lists may
//! become the incumbent; it never prunes, so infeasible prefixes are still
//! extended.

mod bnb;
mod queue;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::FairnessMetric;
use crate::rules::{objective_value, RuleList};

pub use bnb::search;
pub use queue::Priority;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Breadth-first, FIFO within a depth.
    #[serde(rename = "bfs")]
    BfsOriginal,
    /// Breadth-first; within a depth, higher objective first.
    #[serde(rename = "bfs-obj")]
    BfsObjAware,
    /// Best-first on lower bound divided by normalized support.
    #[serde(rename = "curious")]
    Curious,
    /// Best-first on lower bound.
    #[serde(rename = "lower-bound")]
    LowerBound,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::BfsOriginal,
        Strategy::BfsObjAware,
        Strategy::Curious,
        Strategy::LowerBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::BfsOriginal => "bfs",
            Strategy::BfsObjAware => "bfs-obj",
            Strategy::Curious => "curious",
            Strategy::LowerBound => "lower-bound",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy `{s}`")))
    }
}

/// Which consequents a new rule may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionMode {
    /// Both 0 and 1 are branched on.
    Free,
    /// The majority label of the newly captured samples (ties predict 0).
    Majority,
}

impl FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "free" => Ok(PredictionMode::Free),
            "majority" => Ok(PredictionMode::Majority),
            _ => Err(Error::InvalidConfig(format!(
                "unknown prediction mode `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pruning {
    /// Only queue a prefix if one more rule could still beat the incumbent.
    pub lookahead: bool,
    /// Skip rules that capture no new sample.
    pub min_capture: bool,
    /// Drop prefixes whose captured samples and predictions on them match an
    /// already queued prefix of equal or smaller length.
    pub permutation: bool,
}

impl Default for Pruning {
    fn default() -> Self {
        Pruning {
            lookahead: true,
            min_capture: true,
            permutation: false,
        }
    }
}

impl Pruning {
    pub fn none() -> Self {
        Pruning {
            lookahead: false,
            min_capture: false,
            permutation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub metric: FairnessMetric,
    pub strategy: Strategy,
    /// Cap on prefixes inserted into the trie, the root included.
    pub max_nodes: usize,
    pub max_length: Option<usize>,
    /// Seconds.
    pub time_limit: Option<f64>,
    pub pruning: Pruning,
    pub predictions: PredictionMode,
    /// Direction of the objective tie-break for [`Strategy::BfsObjAware`];
    /// `true` dequeues higher objectives first.
    pub obj_aware_descending: bool,
    /// Log a progress line every this many dequeued prefixes.
    pub progress_every: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lambda: 1e-3,
            epsilon: 0.0,
            metric: FairnessMetric::Sp,
            strategy: Strategy::Curious,
            max_nodes: 4_000_000,
            max_length: None,
            time_limit: None,
            pruning: Pruning::default(),
            predictions: PredictionMode::Free,
            obj_aware_descending: true,
            progress_every: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.max_nodes == 0 {
            return Err(Error::InvalidConfig("max nodes must be >= 1".into()));
        }
        if let Some(t) = self.time_limit {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "time limit must be > 0, got {t}"
                )));
            }
        }
        Ok(())
    }

    /// Largest admissible unfairness.
    pub fn max_unfairness(&self) -> f64 {
        1.0 - self.epsilon
    }

    pub(crate) fn time_limit(&self) -> Option<Duration> {
        self.time_limit.map(Duration::from_secs_f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    /// The queue was exhausted: the incumbent is optimal.
    OptimalCertified,
    NodeCapReached,
    TimeLimitReached,
    /// The queue was exhausted without any rule list meeting the constraint.
    Infeasible,
}

impl SearchStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchStatus::OptimalCertified => "optimal",
            SearchStatus::NodeCapReached => "node_cap",
            SearchStatus::TimeLimitReached => "time_limit",
            SearchStatus::Infeasible => "infeasible",
        }
    }

    pub fn is_truncated(self) -> bool {
        matches!(
            self,
            SearchStatus::NodeCapReached | SearchStatus::TimeLimitReached
        )
    }
}

impl fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncumbentUpdate {
    pub evaluated: u64,
    pub objective: f64,
    pub unfairness: f64,
    pub length: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    /// Best feasible rule list, if any was found.
    #[serde(skip)]
    pub model: Option<RuleList>,
    pub objective: Option<f64>,
    pub unfairness: Option<f64>,
    pub status: SearchStatus,
    /// Whether the incumbent moved past the initial rule list.
    pub improved: bool,
    pub nodes_evaluated: u64,
    pub nodes_inserted: u64,
    pub nodes_expanded: u64,
    pub nodes_pruned: u64,
    pub wall_time: f64,
    pub history: Vec<IncumbentUpdate>,
}

/// Summary statistics of a prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrefixNode {
    pub depth: usize,
    /// Samples captured by the prefix's rules.
    pub captured: usize,
    /// Mistakes among the captured samples.
    pub captured_mistakes: usize,
    /// Objective of the prefix completed with its default.
    pub objective: f64,
}

impl PrefixNode {
    /// Lower bound on the objective of every rule list that starts with this
    /// prefix.
    pub fn lower_bound(&self, n_samples: usize, lambda: f64) -> f64 {
        objective_value(self.captured_mistakes, n_samples, self.depth, lambda)
    }

    /// Lower bound on every strict extension of this prefix.
    pub fn lookahead_bound(&self, n_samples: usize, lambda: f64) -> f64 {
        objective_value(self.captured_mistakes, n_samples, self.depth + 1, lambda)
    }

    pub fn priority(&self, strategy: Strategy, n_samples: usize, lambda: f64) -> Priority {
        self.priority_with(strategy, n_samples, lambda, true)
    }

    pub(crate) fn priority_with(
        &self,
        strategy: Strategy,
        n_samples: usize,
        lambda: f64,
        descending: bool,
    ) -> Priority {
        let bound = self.lower_bound(n_samples, lambda);
        match strategy {
            Strategy::BfsOriginal => Priority::new(self.depth as f64, 0.0),
            Strategy::BfsObjAware => {
                let o = if descending {
                    -self.objective
                } else {
                    self.objective
                };
                Priority::new(self.depth as f64, o)
            }
            Strategy::Curious => {
                let support = self.captured.max(1) as f64 / n_samples as f64;
                Priority::new(bound / support, 0.0)
            }
            Strategy::LowerBound => Priority::new(bound, 0.0),
        }
    }
}
