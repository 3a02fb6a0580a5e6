use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::time::Instant;

use log::info;

use super::queue::NodeQueue;
use super::{
    IncumbentUpdate, PredictionMode, PrefixNode, SearchConfig, SearchResult, SearchStatus,
};
use crate::bits::BitVec;
use crate::data::{AntecedentSet, BinaryDataset};
use crate::error::{Error, Result};
use crate::fairness::{confusion, Confusion, GroupConfusion};
use crate::rules::{majority_label, objective_value, predict, Rule, RuleList};

const NO_PARENT: u32 = u32::MAX;

/// Trie node. The captured set is not stored; it is rebuilt from the parent
/// chain when the node is dequeued.
#[derive(Debug, Clone, Copy)]
struct Node {
    parent: u32,
    antecedent: u32,
    captured: u32,
    captured_mistakes: u32,
    depth: u16,
    prediction: bool,
}

/// Sample counts split by (label, group).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Cells {
    y1g0: usize,
    y1g1: usize,
    y0g0: usize,
    y0g1: usize,
}

impl Cells {
    fn total(&self) -> usize {
        self.y1g0 + self.y1g1 + self.y0g0 + self.y0g1
    }

    fn positives(&self) -> usize {
        self.y1g0 + self.y1g1
    }

    fn negatives(&self) -> usize {
        self.y0g0 + self.y0g1
    }

    fn minus(&self, o: &Cells) -> Cells {
        Cells {
            y1g0: self.y1g0 - o.y1g0,
            y1g1: self.y1g1 - o.y1g1,
            y0g0: self.y0g0 - o.y0g0,
            y0g1: self.y0g1 - o.y0g1,
        }
    }

    /// Mistakes made by predicting `pred` on all these samples.
    fn mistakes(&self, pred: bool) -> usize {
        if pred {
            self.negatives()
        } else {
            self.positives()
        }
    }

    /// Adds these samples, all predicted `pred`, to a confusion table.
    fn assign(&self, conf: &mut GroupConfusion, pred: bool) {
        let add = |c: &mut Confusion, y1: usize, y0: usize| {
            if pred {
                c.tp += y1;
                c.fp += y0;
            } else {
                c.fn_ += y1;
                c.tn += y0;
            }
        };
        add(&mut conf.groups[0], self.y1g0, self.y0g0);
        add(&mut conf.groups[1], self.y1g1, self.y0g1);
    }
}

/// Precomputed (label, group) masks for counting cells word by word.
struct Masks {
    y1g1: Vec<u64>,
    y1g0: Vec<u64>,
    y0g1: Vec<u64>,
}

impl Masks {
    fn new(data: &BinaryDataset) -> Self {
        let y = data.labels();
        let g = data.group();
        Masks {
            y1g1: y.and(g).words().to_vec(),
            y1g0: y.and_not(g).words().to_vec(),
            y0g1: g.and_not(y).words().to_vec(),
        }
    }

    /// Cells of `capture & uncaptured`.
    fn cells(&self, capture: &[u64], uncaptured: &[u64]) -> Cells {
        let (mut total, mut y1g1, mut y1g0, mut y0g1) = (0u32, 0u32, 0u32, 0u32);
        for i in 0..capture.len() {
            let w = capture[i] & uncaptured[i];
            if w == 0 {
                continue;
            }
            total += w.count_ones();
            y1g1 += (w & self.y1g1[i]).count_ones();
            y1g0 += (w & self.y1g0[i]).count_ones();
            y0g1 += (w & self.y0g1[i]).count_ones();
        }
        let (total, y1g1, y1g0, y0g1) =
            (total as usize, y1g1 as usize, y1g0 as usize, y0g1 as usize);
        Cells {
            y1g0,
            y1g1,
            y0g0: total - y1g1 - y1g0 - y0g1,
            y0g1,
        }
    }
}

/// 128-bit digest of a prefix's captured set and its positive predictions.
/// Two independently seeded SipHash passes keep collisions negligible at
/// trie-cap scale while storing 16 bytes instead of two bit vectors.
fn perm_key(captured: &BitVec, positive: &BitVec) -> u128 {
    let half = |seed: u64| {
        let mut h = DefaultHasher::new();
        seed.hash(&mut h);
        captured.words().hash(&mut h);
        positive.words().hash(&mut h);
        h.finish()
    };
    (u128::from(half(0x9e37_79b9_7f4a_7c15)) << 64) | u128::from(half(0x6a09_e667_f3bc_c909))
}

/// The dequeued prefix, rebuilt from its parent chain.
struct Prefix {
    rules: Vec<Rule>,
    uncaptured: BitVec,
    /// Captured samples predicted positive; only kept for permutation pruning.
    positive: Option<BitVec>,
    remaining: Cells,
    captured_conf: GroupConfusion,
    captured: usize,
    captured_mistakes: usize,
}

struct Incumbent {
    model: RuleList,
    objective: f64,
    unfairness: f64,
}

struct Searcher<'a> {
    antecedents: &'a AntecedentSet,
    config: &'a SearchConfig,
    masks: Masks,
    m: usize,
    max_unfairness: f64,
    nodes: Vec<Node>,
    queue: NodeQueue,
    incumbent: Option<Incumbent>,
    improved: bool,
    history: Vec<IncumbentUpdate>,
    /// Permutation-pruning table: digest of (captured, positive) to depth.
    seen: HashMap<u128, u16>,
    evaluated: u64,
    expanded: u64,
    pruned: u64,
}

impl Searcher<'_> {
    fn best_objective(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::INFINITY, |i| i.objective)
    }

    /// Algorithm-level incumbent test: strictly better and feasible.
    fn offer(&mut self, objective: f64, conf: &GroupConfusion, build: impl FnOnce() -> RuleList) {
        self.evaluated += 1;
        if objective >= self.best_objective() {
            return;
        }
        let unfairness = conf.unfairness(self.config.metric);
        if unfairness > self.max_unfairness {
            return;
        }
        let model = build();
        self.history.push(IncumbentUpdate {
            evaluated: self.evaluated,
            objective,
            unfairness,
            length: model.len(),
        });
        self.incumbent = Some(Incumbent {
            model,
            objective,
            unfairness,
        });
    }

    fn push(&mut self, node: Node, objective: f64) {
        let stats = PrefixNode {
            depth: node.depth as usize,
            captured: node.captured as usize,
            captured_mistakes: node.captured_mistakes as usize,
            objective,
        };
        let priority = stats.priority_with(
            self.config.strategy,
            self.m,
            self.config.lambda,
            self.config.obj_aware_descending,
        );
        let idx = self.nodes.len() as u32;
        self.nodes.push(node);
        self.queue.push(idx, priority);
    }

    fn rebuild(&self, idx: u32) -> Prefix {
        let mut chain = Vec::new();
        let mut cur = idx;
        while cur != NO_PARENT {
            let n = self.nodes[cur as usize];
            if n.parent != NO_PARENT {
                chain.push(Rule {
                    antecedent: n.antecedent as usize,
                    prediction: n.prediction,
                });
            }
            cur = n.parent;
        }
        chain.reverse();

        let mut uncaptured = BitVec::ones(self.m);
        let mut positive = self
            .config
            .pruning
            .permutation
            .then(|| BitVec::zeros(self.m));
        let mut captured_conf = GroupConfusion::default();
        let mut captured_mistakes = 0;
        for r in &chain {
            let cap = &self.antecedents[r.antecedent].capture;
            let cells = self.masks.cells(cap.words(), uncaptured.words());
            cells.assign(&mut captured_conf, r.prediction);
            captured_mistakes += cells.mistakes(r.prediction);
            if let Some(pos) = positive.as_mut() {
                if r.prediction {
                    pos.or_assign(&cap.and(&uncaptured));
                }
            }
            uncaptured.and_not_assign(cap);
        }
        let all = BitVec::ones(self.m);
        let remaining = self.masks.cells(all.words(), uncaptured.words());
        Prefix {
            captured: self.m - remaining.total(),
            rules: chain,
            uncaptured,
            positive,
            remaining,
            captured_conf,
            captured_mistakes,
        }
    }

    /// Objective and full confusion of `prefix` + (`new` cells predicted
    /// `pred`) + majority default.
    fn complete(
        &self,
        prefix: &Prefix,
        new: &Cells,
        pred: bool,
        depth: usize,
    ) -> (f64, GroupConfusion, bool, usize) {
        let rest = prefix.remaining.minus(new);
        let default = majority_label(rest.positives(), rest.total());
        let mut conf = prefix.captured_conf;
        new.assign(&mut conf, pred);
        rest.assign(&mut conf, default);
        let captured_mistakes = prefix.captured_mistakes + new.mistakes(pred);
        let mistakes = captured_mistakes + rest.mistakes(default);
        (
            objective_value(mistakes, self.m, depth, self.config.lambda),
            conf,
            default,
            captured_mistakes,
        )
    }

    fn expand(&mut self, parent: u32, prefix: &Prefix) -> Option<SearchStatus> {
        let lambda = self.config.lambda;
        let depth = self.nodes[parent as usize].depth as usize + 1;
        let mut in_prefix = vec![false; self.antecedents.len()];
        for r in &prefix.rules {
            in_prefix[r.antecedent] = true;
        }
        for (s, &used) in in_prefix.iter().enumerate() {
            if used {
                continue;
            }
            let capture = &self.antecedents[s].capture;
            let new = self.masks.cells(capture.words(), prefix.uncaptured.words());
            if self.config.pruning.min_capture && new.total() == 0 {
                self.pruned += 1;
                continue;
            }
            let preds: &[bool] = match self.config.predictions {
                PredictionMode::Free => &[false, true],
                PredictionMode::Majority => {
                    if majority_label(new.positives(), new.total()) {
                        &[true]
                    } else {
                        &[false]
                    }
                }
            };
            for &pred in preds {
                let captured_mistakes = prefix.captured_mistakes + new.mistakes(pred);
                let bound = objective_value(captured_mistakes, self.m, depth, lambda);
                if bound >= self.best_objective() {
                    self.pruned += 1;
                    continue;
                }
                let (objective, conf, default, _) = self.complete(prefix, &new, pred, depth);
                self.offer(objective, &conf, || {
                    let mut rules = prefix.rules.clone();
                    rules.push(Rule {
                        antecedent: s,
                        prediction: pred,
                    });
                    RuleList::new(rules, default)
                });

                if self.config.max_length.is_some_and(|cap| depth >= cap) {
                    continue;
                }
                let extendable = if self.config.pruning.lookahead {
                    objective_value(captured_mistakes, self.m, depth + 1, lambda)
                } else {
                    bound
                };
                if extendable >= self.best_objective() {
                    self.pruned += 1;
                    continue;
                }
                if self.config.pruning.permutation {
                    let newly = capture.and(&prefix.uncaptured);
                    let captured = prefix.uncaptured.not().or(&newly);
                    let mut positive = prefix
                        .positive
                        .clone()
                        .expect("tracked when permutation pruning");
                    if pred {
                        positive.or_assign(&newly);
                    }
                    let key = perm_key(&captured, &positive);
                    match self.seen.get(&key) {
                        Some(&d) if d as usize <= depth => {
                            self.pruned += 1;
                            continue;
                        }
                        _ => {
                            self.seen.insert(key, depth as u16);
                        }
                    }
                }
                if self.nodes.len() >= self.config.max_nodes {
                    return Some(SearchStatus::NodeCapReached);
                }
                self.push(
                    Node {
                        parent,
                        antecedent: s as u32,
                        captured: (prefix.captured + new.total()) as u32,
                        captured_mistakes: captured_mistakes as u32,
                        depth: depth as u16,
                        prediction: pred,
                    },
                    objective,
                );
            }
        }
        None
    }
}

/// Finds the rule list of minimum objective among those whose unfairness on
/// `data` is at most `1 - epsilon`.
///
/// `initial`, when given, must itself satisfy the constraint and seeds the
/// incumbent. The empty rule list with majority default is always offered as
/// a candidate first. Hitting the node cap or time limit returns the
/// incumbent with the corresponding status; if no feasible list was seen the
/// result carries no model.
pub fn search(
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
    config: &SearchConfig,
    initial: Option<&RuleList>,
) -> Result<SearchResult> {
    config.validate()?;
    let m = data.n_samples();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    if antecedents.n_samples() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: antecedents.n_samples(),
        });
    }
    if m > u32::MAX as usize || antecedents.len() > u32::MAX as usize {
        return Err(Error::InvalidConfig("dataset too large".into()));
    }
    let start = Instant::now();
    let time_limit = config.time_limit();

    let mut s = Searcher {
        antecedents,
        config,
        masks: Masks::new(data),
        m,
        max_unfairness: config.max_unfairness(),
        nodes: Vec::new(),
        queue: NodeQueue::default(),
        incumbent: None,
        improved: false,
        history: Vec::new(),
        seen: HashMap::new(),
        evaluated: 0,
        expanded: 0,
        pruned: 0,
    };

    if let Some(init) = initial {
        let p = predict(init, data, antecedents)?;
        let conf = confusion(&p.predictions, data)?;
        let u = conf.unfairness(config.metric);
        if u > s.max_unfairness {
            return Err(Error::InvalidConfig(format!(
                "initial rule list has unfairness {u} > {}",
                s.max_unfairness
            )));
        }
        let objective = objective_value(m - conf.correct(), m, init.len(), config.lambda);
        s.incumbent = Some(Incumbent {
            model: RuleList::new(init.rules.clone(), init.default),
            objective,
            unfairness: u,
        });
    }

    // root: the empty rule list
    s.push(
        Node {
            parent: NO_PARENT,
            antecedent: 0,
            captured: 0,
            captured_mistakes: 0,
            depth: 0,
            prediction: false,
        },
        0.0,
    );
    let root = s.rebuild(0);
    let (objective, conf, default, _) = s.complete(&root, &Cells::default(), false, 0);
    s.offer(objective, &conf, || RuleList::constant(default));
    let baseline = s.history.len();

    let mut status = None;
    while let Some(entry) = s.queue.pop() {
        if time_limit.is_some_and(|t| start.elapsed() >= t) {
            status = Some(SearchStatus::TimeLimitReached);
            break;
        }
        let node = s.nodes[entry.node as usize];
        let stats = PrefixNode {
            depth: node.depth as usize,
            captured: node.captured as usize,
            captured_mistakes: node.captured_mistakes as usize,
            objective: 0.0,
        };
        let bound = if config.pruning.lookahead {
            stats.lookahead_bound(m, config.lambda)
        } else {
            stats.lower_bound(m, config.lambda)
        };
        if bound >= s.best_objective() {
            s.pruned += 1;
            continue;
        }
        s.expanded += 1;
        if let Some(every) = config.progress_every {
            if every > 0 && s.expanded.is_multiple_of(every) {
                info!(
                    "expanded={} inserted={} queue={} best={:.6}",
                    s.expanded,
                    s.nodes.len(),
                    s.queue.len(),
                    s.best_objective()
                );
            }
        }
        let prefix = s.rebuild(entry.node);
        if let Some(st) = s.expand(entry.node, &prefix) {
            status = Some(st);
            break;
        }
    }
    s.improved = s.history.len() > baseline;

    let status = status.unwrap_or(if s.incumbent.is_some() {
        SearchStatus::OptimalCertified
    } else {
        SearchStatus::Infeasible
    });

    if let Some(inc) = &s.incumbent {
        // independent re-check through the plain prediction path
        let p = predict(&inc.model, data, antecedents)?;
        let conf = confusion(&p.predictions, data)?;
        let u = conf.unfairness(config.metric);
        assert!(
            u <= s.max_unfairness,
            "returned model violates the fairness constraint: {u} > {}",
            s.max_unfairness
        );
        debug_assert_eq!(
            objective_value(m - conf.correct(), m, inc.model.len(), config.lambda),
            inc.objective
        );
    }

    let (model, objective, unfairness) = match s.incumbent {
        Some(i) => (Some(i.model), Some(i.objective), Some(i.unfairness)),
        None => (None, None, None),
    };
    Ok(SearchResult {
        model,
        objective,
        unfairness,
        status,
        improved: s.improved,
        nodes_evaluated: s.evaluated,
        nodes_inserted: s.nodes.len() as u64,
        nodes_expanded: s.expanded,
        nodes_pruned: s.pruned,
        wall_time: start.elapsed().as_secs_f64(),
        history: s.history,
    })
}
