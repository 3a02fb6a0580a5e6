//! Epsilon sweeps with k-fold cross-validation, and Pareto filtering of the
//! averaged (test error, test unfairness) points.

use std::io::Write;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AntecedentSet, BinaryDataset};
use crate::error::{Error, Result};
use crate::fairness::{confusion, FairnessMetric};
use crate::rules::{predict, Provenance, RuleList};
use crate::search::{search, SearchConfig, Strategy};

/// `n` evenly spaced values from 0 to 1 inclusive.
pub fn linear_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Fold index of every sample: a seeded shuffle, then a contiguous
/// partition where the first `m % folds` folds get one extra sample.
pub fn kfold_split(m: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds == 0 || folds > m {
        return Err(Error::InvalidConfig(format!(
            "cannot split {m} samples into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (m / folds, m % folds);
    let mut assignment = vec![0; m];
    let mut pos = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        for &s in &order[pos..pos + size] {
            assignment[s] = f;
        }
        pos += size;
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub metric: FairnessMetric,
    pub strategies: Vec<Strategy>,
    pub folds: usize,
    pub seed: u64,
    /// Template for every run; its epsilon, metric and strategy are overridden.
    pub search: SearchConfig,
    /// Worker threads.
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            epsilons: linear_grid(60),
            metric: FairnessMetric::Sp,
            strategies: Strategy::ALL.to_vec(),
            folds: 5,
            seed: 0,
            search: SearchConfig::default(),
            jobs: 1,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidConfig("epsilon grid is empty".into()));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvalidConfig(format!("epsilon {e} outside [0, 1]")));
        }
        if self.epsilons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "epsilon grid must be strictly increasing".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidConfig("no strategies given".into()));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            if self.strategies[..i].contains(s) {
                return Err(Error::InvalidConfig(format!("strategy `{s}` given twice")));
            }
        }
        if self.jobs == 0 {
            return Err(Error::InvalidConfig("jobs must be >= 1".into()));
        }
        self.search.validate()
    }

    fn run_config(&self, epsilon: f64, strategy: Strategy) -> SearchConfig {
        SearchConfig {
            epsilon,
            metric: self.metric,
            strategy,
            ..self.search.clone()
        }
    }
}

/// One (epsilon, strategy, fold) search run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub epsilon: f64,
    pub metric: FairnessMetric,
    pub strategy: Strategy,
    pub fold: usize,
    pub train_error: Option<f64>,
    pub test_error: Option<f64>,
    pub train_unf: Option<f64>,
    pub test_unf: Option<f64>,
    pub length: Option<usize>,
    pub nodes_explored: u64,
    /// A search status, or `error` when the run failed.
    pub status: String,
    pub model: Option<RuleList>,
}

impl RunRecord {
    pub fn has_model(&self) -> bool {
        self.model.is_some()
    }
}

/// Fold-averaged result of one (epsilon, strategy) setting.
///
/// Means are `None` unless every fold produced a model.
#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub epsilon: f64,
    pub strategy: Strategy,
    pub mean_train_error: Option<f64>,
    pub mean_test_error: Option<f64>,
    pub mean_train_unf: Option<f64>,
    pub mean_test_unf: Option<f64>,
    pub mean_length: Option<f64>,
    /// Fold whose test point is closest to the means.
    pub representative: Option<usize>,
    pub runs: Vec<RunRecord>,
}

impl ParetoPoint {
    fn from_runs(epsilon: f64, strategy: Strategy, runs: Vec<RunRecord>) -> Self {
        let complete = !runs.is_empty() && runs.iter().all(RunRecord::has_model);
        let mean = |f: &dyn Fn(&RunRecord) -> f64| {
            complete.then(|| runs.iter().map(f).sum::<f64>() / runs.len() as f64)
        };
        let mean_train_error = mean(&|r| r.train_error.unwrap());
        let mean_test_error = mean(&|r| r.test_error.unwrap());
        let mean_train_unf = mean(&|r| r.train_unf.unwrap());
        let mean_test_unf = mean(&|r| r.test_unf.unwrap());
        let mean_length = mean(&|r| r.length.unwrap() as f64);
        let representative = match (mean_test_error, mean_test_unf) {
            (Some(e), Some(u)) => {
                let dist = |r: &RunRecord| {
                    (r.test_error.unwrap() - e).powi(2) + (r.test_unf.unwrap() - u).powi(2)
                };
                // first fold wins ties
                (0..runs.len()).reduce(|best, i| {
                    if dist(&runs[i]) < dist(&runs[best]) {
                        i
                    } else {
                        best
                    }
                })
            }
            _ => None,
        };
        ParetoPoint {
            epsilon,
            strategy,
            mean_train_error,
            mean_test_error,
            mean_train_unf,
            mean_test_unf,
            mean_length,
            representative: representative.map(|i| runs[i].fold),
            runs,
        }
    }

    pub fn representative_model(&self) -> Option<&RuleList> {
        let fold = self.representative?;
        self.runs.iter().find(|r| r.fold == fold)?.model.as_ref()
    }

    /// `(mean test error, mean test unfairness)`, NaN when incomplete.
    pub fn test_point(&self) -> (f64, f64) {
        (
            self.mean_test_error.unwrap_or(f64::NAN),
            self.mean_test_unf.unwrap_or(f64::NAN),
        )
    }
}

fn run_one(
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
    assignment: &[usize],
    config: &SearchConfig,
    fold: usize,
) -> RunRecord {
    let mut record = RunRecord {
        epsilon: config.epsilon,
        metric: config.metric,
        strategy: config.strategy,
        fold,
        train_error: None,
        test_error: None,
        train_unf: None,
        test_unf: None,
        length: None,
        nodes_explored: 0,
        status: "error".into(),
        model: None,
    };
    let (train_idx, test_idx): (Vec<usize>, Vec<usize>) =
        (0..assignment.len()).partition(|&i| assignment[i] != fold);
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let train_ants = antecedents.rebuild_on(&train);
    let test_ants = antecedents.rebuild_on(&test);

    let result = match search(&train, &train_ants, config, None) {
        Ok(r) => r,
        Err(e) => {
            warn!(
                "run eps={} strategy={} fold={fold} failed: {e}",
                config.epsilon, config.strategy
            );
            return record;
        }
    };
    record.status = result.status.as_str().into();
    record.nodes_explored = result.nodes_expanded;
    let Some(model) = result.model else {
        return record;
    };

    let eval = |d: &BinaryDataset, a: &AntecedentSet| -> Result<(f64, f64)> {
        let p = predict(&model, d, a)?;
        let conf = confusion(&p.predictions, d)?;
        let err = if d.n_samples() == 0 {
            0.0
        } else {
            1.0 - conf.correct() as f64 / d.n_samples() as f64
        };
        Ok((err, conf.unfairness(config.metric)))
    };
    match (eval(&train, &train_ants), eval(&test, &test_ants)) {
        (Ok((tre, tru)), Ok((tee, teu))) => {
            record.train_error = Some(tre);
            record.train_unf = Some(tru);
            record.test_error = Some(tee);
            record.test_unf = Some(teu);
            record.length = Some(model.len());
            record.model = Some(model.with_provenance(Provenance {
                epsilon: Some(config.epsilon),
                metric: Some(config.metric),
                lambda: Some(config.lambda),
                strategy: Some(config.strategy.as_str().into()),
                train_samples: Some(train.n_samples()),
                train_error: Some(tre),
                train_unfairness: Some(tru),
            }));
        }
        (Err(e), _) | (_, Err(e)) => {
            warn!("evaluation failed: {e}");
            record.status = "error".into();
        }
    }
    debug!(
        "eps={} strategy={} fold={fold} status={} test_error={:?} test_unf={:?}",
        config.epsilon, config.strategy, record.status, record.test_error, record.test_unf
    );
    record
}

/// Runs every (epsilon, strategy, fold) combination and averages over folds.
///
/// Points are ordered by epsilon, then by the configured strategy order;
/// runs within a point by fold. The order does not depend on `jobs`.
pub fn sweep(
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
    config: &SweepConfig,
) -> Result<Vec<ParetoPoint>> {
    config.validate()?;
    if antecedents.n_samples() != data.n_samples() {
        return Err(Error::LengthMismatch {
            expected: data.n_samples(),
            found: antecedents.n_samples(),
        });
    }
    let assignment = kfold_split(data.n_samples(), config.folds, config.seed)?;

    let mut tasks = Vec::new();
    for &eps in &config.epsilons {
        for &strategy in &config.strategies {
            for fold in 0..config.folds {
                tasks.push((config.run_config(eps, strategy), fold));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(c, fold)| run_one(data, antecedents, &assignment, c, *fold))
            .collect()
    });

    let mut runs = runs.into_iter();
    let mut points = Vec::new();
    for &eps in &config.epsilons {
        for &strategy in &config.strategies {
            let chunk: Vec<RunRecord> = runs.by_ref().take(config.folds).collect();
            points.push(ParetoPoint::from_runs(eps, strategy, chunk));
        }
    }
    Ok(points)
}

/// Indices of the non-dominated points when minimizing both coordinates,
/// sorted by the first coordinate. Of identical points only the earliest is
/// kept; points with a NaN coordinate are ignored.
pub fn pareto_filter(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len())
        .filter(|&i| !points[i].0.is_nan() && !points[i].1.is_nan())
        .collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
            .then(a.cmp(&b))
    });
    let mut front = Vec::new();
    let mut best = f64::INFINITY;
    for i in order {
        if points[i].1 < best {
            best = points[i].1;
            front.push(i);
        }
    }
    front
}

/// Front of the averaged test points, as indices into `points`.
pub fn pareto_front(points: &[ParetoPoint]) -> Vec<usize> {
    let coords: Vec<(f64, f64)> = points.iter().map(ParetoPoint::test_point).collect();
    pareto_filter(&coords)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per run.
pub fn write_runs_csv<W: Write>(out: W, points: &[ParetoPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "epsilon",
        "metric",
        "strategy",
        "fold",
        "train_error",
        "test_error",
        "train_unf",
        "test_unf",
        "length",
        "nodes_explored",
        "status",
    ])?;
    for r in points.iter().flat_map(|p| &p.runs) {
        w.write_record([
            r.epsilon.to_string(),
            r.metric.to_string(),
            r.strategy.to_string(),
            r.fold.to_string(),
            cell(r.train_error),
            cell(r.test_error),
            cell(r.train_unf),
            cell(r.test_unf),
            r.length.map(|l| l.to_string()).unwrap_or_default(),
            r.nodes_explored.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// One row per front point, in front order.
pub fn write_front_csv<W: Write>(
    out: W,
    points: &[ParetoPoint],
    front: &[usize],
    model_path: impl Fn(&ParetoPoint) -> String,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "epsilon",
        "strategy",
        "mean_test_error",
        "mean_test_unf",
        "model_path",
    ])?;
    for &i in front {
        let p = &points[i];
        w.write_record([
            p.epsilon.to_string(),
            p.strategy.to_string(),
            cell(p.mean_test_error),
            cell(p.mean_test_unf),
            model_path(p),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
