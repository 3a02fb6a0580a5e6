//! Brute-force reference implementation shared by the integration tests.
//!
//! Everything here works sample by sample on plain `Vec<bool>` columns and
//! only uses the library to build the inputs handed to `search`.

#![allow(dead_code)]

use fairlist::bits::BitVec;
use fairlist::data::{AntecedentSet, BinaryDataset, Literal};
use fairlist::fairness::FairnessMetric;
use fairlist::rules::RuleList;
use fairlist::search::{PredictionMode, SearchConfig, SearchResult, SearchStatus};
use rand::Rng;

pub struct Toy {
    pub data: BinaryDataset,
    pub ants: AntecedentSet,
    pub y: Vec<bool>,
    pub a: Vec<bool>,
    /// `caps[j][i]`: antecedent `j` holds on sample `i`.
    pub caps: Vec<Vec<bool>>,
}

impl Toy {
    pub fn m(&self) -> usize {
        self.y.len()
    }
}

/// Random instance with `m` samples and up to `n_ants` antecedents of one
/// or two literals.
pub fn random_toy<R: Rng>(rng: &mut R, m: usize, n_features: usize, n_ants: usize) -> Toy {
    let x: Vec<Vec<bool>> = (0..n_features)
        .map(|_| {
            let p = rng.gen_range(0.2..0.8);
            (0..m).map(|_| rng.gen_bool(p)).collect()
        })
        .collect();
    let a: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.5)).collect();
    let noise = rng.gen_range(0.0..0.4);
    let y: Vec<bool> = (0..m)
        .map(|i| {
            let signal = (x[0][i] && x[1 % n_features][i]) || (a[i] && x[2 % n_features][i]);
            signal ^ rng.gen_bool(noise)
        })
        .collect();

    let mut lists: Vec<Vec<Literal>> = Vec::new();
    let mut tries = 0;
    while lists.len() < n_ants && tries < 1000 {
        tries += 1;
        let arity = rng.gen_range(1..=2);
        let mut lits: Vec<Literal> = (0..arity)
            .map(|_| Literal {
                feature: rng.gen_range(0..n_features),
                negated: rng.gen_bool(0.3),
            })
            .collect();
        lits.sort_by_key(|l| (l.feature, l.negated));
        lits.dedup_by_key(|l| l.feature);
        if !lists.contains(&lits) {
            lists.push(lits);
        }
    }
    let caps: Vec<Vec<bool>> = lists
        .iter()
        .map(|lits| {
            (0..m)
                .map(|i| lits.iter().all(|l| x[l.feature][i] != l.negated))
                .collect()
        })
        .collect();

    let names = (0..n_features).map(|f| format!("f{f}")).collect();
    let data = BinaryDataset::new(
        names,
        x.iter()
            .map(|c| BitVec::from_bools(c.iter().copied()))
            .collect(),
        BitVec::from_bools(y.iter().copied()),
        BitVec::from_bools(a.iter().copied()),
    )
    .unwrap();
    let ants = AntecedentSet::from_literals(&data, lists).unwrap();
    Toy {
        data,
        ants,
        y,
        a,
        caps,
    }
}

/// Unfairness computed straight from the definitions, with a rate gap of 0
/// when its denominator vanishes in either group.
pub fn oracle_unfairness(y: &[bool], yhat: &[bool], a: &[bool], metric: FairnessMetric) -> f64 {
    // counts[g] = (tp, fp, tn, fn)
    type Counts = (usize, usize, usize, usize);
    let mut counts: [Counts; 2] = [(0, 0, 0, 0); 2];
    for i in 0..y.len() {
        let c = &mut counts[usize::from(a[i])];
        match (yhat[i], y[i]) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    let gap = |f: &dyn Fn(&Counts) -> (usize, usize)| {
        let (n0, d0) = f(&counts[0]);
        let (n1, d1) = f(&counts[1]);
        if d0 == 0 || d1 == 0 {
            0.0
        } else {
            (n0 as f64 / d0 as f64 - n1 as f64 / d1 as f64).abs()
        }
    };
    let pr = |c: &Counts| (c.0 + c.1, c.0 + c.1 + c.2 + c.3);
    let ppv = |c: &Counts| (c.0, c.0 + c.1);
    let fpr = |c: &Counts| (c.1, c.1 + c.2);
    let tpr = |c: &Counts| (c.0, c.0 + c.3);
    let npv = |c: &Counts| (c.2, c.2 + c.3);
    match metric {
        FairnessMetric::Sp => gap(&pr),
        FairnessMetric::Pp => gap(&ppv),
        FairnessMetric::Pe => gap(&fpr),
        FairnessMetric::Eopp => gap(&tpr),
        FairnessMetric::Eodds => gap(&tpr) + gap(&fpr),
        FairnessMetric::Cuae => gap(&ppv) + gap(&npv),
    }
}

pub fn oracle_objective(mistakes: usize, m: usize, k: usize, lambda: f64) -> f64 {
    mistakes as f64 / m as f64 + lambda * k as f64
}

/// First-match predictions of `rules` with `default`.
pub fn oracle_predict(toy: &Toy, rules: &[(usize, bool)], default: bool) -> Vec<bool> {
    (0..toy.m())
        .map(|i| {
            rules
                .iter()
                .find(|&&(j, _)| toy.caps[j][i])
                .map_or(default, |&(_, p)| p)
        })
        .collect()
}

/// Majority label of the samples no rule captures; ties predict 0.
pub fn oracle_default(toy: &Toy, rules: &[(usize, bool)]) -> bool {
    let (mut pos, mut tot) = (0, 0);
    for i in 0..toy.m() {
        if !rules.iter().any(|&(j, _)| toy.caps[j][i]) {
            tot += 1;
            pos += usize::from(toy.y[i]);
        }
    }
    2 * pos > tot
}

pub struct Evaluation {
    pub mistakes: usize,
    pub objective: f64,
    pub unfairness: f64,
}

pub fn oracle_evaluate(
    toy: &Toy,
    rules: &[(usize, bool)],
    default: bool,
    metric: FairnessMetric,
    lambda: f64,
) -> Evaluation {
    let yhat = oracle_predict(toy, rules, default);
    let mistakes = (0..toy.m()).filter(|&i| yhat[i] != toy.y[i]).count();
    Evaluation {
        mistakes,
        objective: oracle_objective(mistakes, toy.m(), rules.len(), lambda),
        unfairness: oracle_unfairness(&toy.y, &yhat, &toy.a, metric),
    }
}

pub fn model_rules(model: &RuleList) -> Vec<(usize, bool)> {
    model
        .rules
        .iter()
        .map(|r| (r.antecedent, r.prediction))
        .collect()
}

/// Minimum objective over all rule lists of distinct antecedents with at
/// most `max_len` rules and the majority default, among those with
/// unfairness at most `1 - epsilon`.
pub fn brute_force(
    toy: &Toy,
    metric: FairnessMetric,
    epsilon: f64,
    lambda: f64,
    max_len: usize,
    mode: PredictionMode,
) -> Option<f64> {
    let bound = 1.0 - epsilon;
    let mut best: Option<f64> = None;
    let mut stack: Vec<(usize, bool)> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        toy: &Toy,
        stack: &mut Vec<(usize, bool)>,
        metric: FairnessMetric,
        bound: f64,
        lambda: f64,
        max_len: usize,
        mode: PredictionMode,
        best: &mut Option<f64>,
    ) {
        let default = oracle_default(toy, stack);
        let e = oracle_evaluate(toy, stack, default, metric, lambda);
        if e.unfairness <= bound && best.is_none_or(|b| e.objective < b) {
            *best = Some(e.objective);
        }
        if stack.len() == max_len {
            return;
        }
        for j in 0..toy.caps.len() {
            if stack.iter().any(|&(s, _)| s == j) {
                continue;
            }
            let preds: Vec<bool> = match mode {
                PredictionMode::Free => vec![false, true],
                PredictionMode::Majority => {
                    let (mut pos, mut tot) = (0, 0);
                    for i in 0..toy.m() {
                        if toy.caps[j][i] && !stack.iter().any(|&(s, _)| toy.caps[s][i]) {
                            tot += 1;
                            pos += usize::from(toy.y[i]);
                        }
                    }
                    vec![2 * pos > tot]
                }
            };
            for p in preds {
                stack.push((j, p));
                rec(toy, stack, metric, bound, lambda, max_len, mode, best);
                stack.pop();
            }
        }
    }
    rec(
        toy, &mut stack, metric, bound, lambda, max_len, mode, &mut best,
    );
    best
}

/// Checks a completed search against the brute-force optimum.
pub fn check_result(toy: &Toy, config: &SearchConfig, result: &SearchResult) -> Result<(), String> {
    let max_len = config.max_length.expect("oracle needs a length cap");
    let expected = brute_force(
        toy,
        config.metric,
        config.epsilon,
        config.lambda,
        max_len,
        config.predictions,
    );
    match (&result.model, expected) {
        (None, None) => {
            if result.status != SearchStatus::Infeasible {
                return Err(format!("no model but status {}", result.status));
            }
            Ok(())
        }
        (Some(_), None) => Err("search found a model the oracle says is infeasible".into()),
        (None, Some(o)) => Err(format!("search found nothing, oracle optimum {o}")),
        (Some(model), Some(o)) => {
            if result.status != SearchStatus::OptimalCertified {
                return Err(format!("status {}", result.status));
            }
            let rules = model_rules(model);
            if rules.len() > max_len {
                return Err(format!("model has {} rules", rules.len()));
            }
            if model.default != oracle_default(toy, &rules) {
                return Err("default is not the uncaptured majority".into());
            }
            let e = oracle_evaluate(toy, &rules, model.default, config.metric, config.lambda);
            if e.unfairness > 1.0 - config.epsilon {
                return Err(format!("model unfairness {} infeasible", e.unfairness));
            }
            if e.objective != o {
                return Err(format!("objective {} vs oracle {o}", e.objective));
            }
            if result.objective != Some(o) {
                return Err(format!(
                    "reported objective {:?} vs oracle {o}",
                    result.objective
                ));
            }
            Ok(())
        }
    }
}

pub fn oracle_config(
    metric: FairnessMetric,
    epsilon: f64,
    lambda: f64,
    max_len: usize,
) -> SearchConfig {
    SearchConfig {
        lambda,
        epsilon,
        metric,
        max_nodes: 50_000_000,
        max_length: Some(max_len),
        ..SearchConfig::default()
    }
}
