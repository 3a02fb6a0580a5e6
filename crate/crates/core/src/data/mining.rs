//! Antecedent mining: every feature, its negation, and the pairwise
//! conjunctions of positive features that reach the minimum support.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dataset::BinaryDataset;
use crate::bits::BitVec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningConfig {
    /// Minimum support of two-clause antecedents, as a fraction of samples.
    pub sigma: f64,
    pub include_negations: bool,
    pub max_arity: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            sigma: 0.01,
            include_negations: true,
            max_arity: 2,
        }
    }
}

impl MiningConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        MiningConfig {
            sigma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::InvalidConfig(format!(
                "minimum support must be in [0, 1], got {}",
                self.sigma
            )));
        }
        if !(1..=2).contains(&self.max_arity) {
            return Err(Error::InvalidConfig(format!(
                "clause arity must be 1 or 2, got {}",
                self.max_arity
            )));
        }
        Ok(())
    }
}

/// Smallest sample count that satisfies `support >= sigma * m`.
pub fn min_support_count(sigma: f64, m: usize) -> usize {
    let t = sigma * m as f64;
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as usize
    } else {
        t.ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Literal {
    pub feature: usize,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Antecedent {
    pub literals: Vec<Literal>,
    pub name: String,
    pub capture: BitVec,
    pub support: usize,
}

impl Antecedent {
    fn build(data: &BinaryDataset, literals: Vec<Literal>) -> Self {
        let capture = capture_of(data, &literals);
        let name = display_name(data, &literals);
        Antecedent {
            support: capture.count_ones(),
            literals,
            name,
            capture,
        }
    }
}

fn capture_of(data: &BinaryDataset, literals: &[Literal]) -> BitVec {
    let mut cap = BitVec::ones(data.n_samples());
    for lit in literals {
        let f = data.feature(lit.feature);
        if lit.negated {
            cap.and_not_assign(f);
        } else {
            cap.and_assign(f);
        }
    }
    cap
}

fn display_name(data: &BinaryDataset, literals: &[Literal]) -> String {
    literals
        .iter()
        .map(|l| {
            let n = &data.feature_names()[l.feature];
            if l.negated {
                format!("not {n}")
            } else {
                n.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" && ")
}

/// Feature-name form of an antecedent, independent of feature numbering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntecedentSpec {
    pub name: String,
    pub literals: Vec<LiteralSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiteralSpec {
    pub feature: String,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntecedentSet {
    antecedents: Vec<Antecedent>,
    n_samples: usize,
    by_name: HashMap<String, usize>,
}

impl AntecedentSet {
    fn from_vec(antecedents: Vec<Antecedent>, n_samples: usize) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(antecedents.len());
        for (i, a) in antecedents.iter().enumerate() {
            if by_name.insert(a.name.clone(), i).is_some() {
                return Err(Error::malformed(
                    "antecedent set",
                    format!("duplicate `{}`", a.name),
                ));
            }
        }
        Ok(AntecedentSet {
            antecedents,
            n_samples,
            by_name,
        })
    }

    /// Antecedents given as literal lists over `data`'s feature indices.
    pub fn from_literals(data: &BinaryDataset, lists: Vec<Vec<Literal>>) -> Result<Self> {
        let mut out = Vec::with_capacity(lists.len());
        for lits in lists {
            if lits.is_empty() {
                return Err(Error::malformed("antecedent", "no literals"));
            }
            if let Some(l) = lits.iter().find(|l| l.feature >= data.n_features()) {
                return Err(Error::UnknownFeature(format!("#{}", l.feature)));
            }
            out.push(Antecedent::build(data, lits));
        }
        Self::from_vec(out, data.n_samples())
    }

    /// Resolves feature names against `data` and recomputes captures.
    pub fn from_specs(data: &BinaryDataset, specs: &[AntecedentSpec]) -> Result<Self> {
        let mut out = Vec::with_capacity(specs.len());
        for spec in specs {
            let literals = spec
                .literals
                .iter()
                .map(|l| {
                    data.feature_index(&l.feature)
                        .map(|feature| Literal {
                            feature,
                            negated: l.negated,
                        })
                        .ok_or_else(|| Error::UnknownFeature(l.feature.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut a = Antecedent::build(data, literals);
            a.name = spec.name.clone();
            out.push(a);
        }
        Self::from_vec(out, data.n_samples())
    }

    pub fn specs(&self, data: &BinaryDataset) -> Vec<AntecedentSpec> {
        self.antecedents.iter().map(|a| spec_of(data, a)).collect()
    }

    /// Same antecedents with captures recomputed on `data`, which must share
    /// this set's feature numbering (e.g. a row subset).
    pub fn rebuild_on(&self, data: &BinaryDataset) -> AntecedentSet {
        let antecedents = self
            .antecedents
            .iter()
            .map(|a| {
                let capture = capture_of(data, &a.literals);
                Antecedent {
                    literals: a.literals.clone(),
                    name: a.name.clone(),
                    support: capture.count_ones(),
                    capture,
                }
            })
            .collect();
        AntecedentSet {
            antecedents,
            n_samples: data.n_samples(),
            by_name: self.by_name.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.antecedents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.antecedents.is_empty()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn get(&self, id: usize) -> Option<&Antecedent> {
        self.antecedents.get(id)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Antecedent> {
        self.antecedents.iter()
    }
}

impl std::ops::Index<usize> for AntecedentSet {
    type Output = Antecedent;

    fn index(&self, id: usize) -> &Antecedent {
        &self.antecedents[id]
    }
}

pub(crate) fn spec_of(data: &BinaryDataset, a: &Antecedent) -> AntecedentSpec {
    AntecedentSpec {
        name: a.name.clone(),
        literals: a
            .literals
            .iter()
            .map(|l| LiteralSpec {
                feature: data.feature_names()[l.feature].clone(),
                negated: l.negated,
            })
            .collect(),
    }
}

/// Mines singles, negations (when enabled) and supported positive pairs, in
/// that order. Pairs come in lexicographic `(i, j)` order with `i < j`.
pub fn mine_antecedents(data: &BinaryDataset, config: &MiningConfig) -> Result<AntecedentSet> {
    config.validate()?;
    if data.n_samples() == 0 || data.n_features() == 0 {
        return Err(Error::EmptyDataset);
    }
    let nf = data.n_features();
    let mut out = Vec::new();
    for i in 0..nf {
        out.push(Antecedent::build(
            data,
            vec![Literal {
                feature: i,
                negated: false,
            }],
        ));
    }
    if config.include_negations {
        for i in 0..nf {
            out.push(Antecedent::build(
                data,
                vec![Literal {
                    feature: i,
                    negated: true,
                }],
            ));
        }
    }
    if config.max_arity >= 2 {
        let threshold = min_support_count(config.sigma, data.n_samples());
        for i in 0..nf {
            for j in i + 1..nf {
                if data.feature(i).and_count(data.feature(j)) >= threshold {
                    out.push(Antecedent::build(
                        data,
                        vec![
                            Literal {
                                feature: i,
                                negated: false,
                            },
                            Literal {
                                feature: j,
                                negated: false,
                            },
                        ],
                    ));
                }
            }
        }
    }
    AntecedentSet::from_vec(out, data.n_samples())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(features: &[&str], labels: &str, group: &str) -> BinaryDataset {
        BinaryDataset::new(
            (0..features.len()).map(|i| format!("f{}", i + 1)).collect(),
            features
                .iter()
                .map(|s| BitVec::from_bit_str(s).unwrap())
                .collect(),
            BitVec::from_bit_str(labels).unwrap(),
            BitVec::from_bit_str(group).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn three_features_sigma_zero() {
        let d = dataset(&["1100", "1010", "0110"], "1001", "0011");
        let set = mine_antecedents(&d, &MiningConfig::with_sigma(0.0)).unwrap();
        assert_eq!(set.len(), 9);
        let names: Vec<&str> = set.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            ["f1", "f2", "f3", "not f1", "not f2", "not f3", "f1 && f2", "f1 && f3", "f2 && f3"]
        );
        assert_eq!(set[6].capture.to_string(), "1000");
        assert_eq!(set[3].capture.to_string(), "0011");
    }

    #[test]
    fn low_support_pair_excluded() {
        let d = dataset(&["1100", "1010"], "1001", "0011");
        let set = mine_antecedents(&d, &MiningConfig::with_sigma(0.5)).unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.id_of("f1 && f2").is_none());
    }

    #[test]
    fn support_threshold_is_robust_to_rounding() {
        assert_eq!(min_support_count(0.01, 5200), 52);
        assert_eq!(min_support_count(0.5, 4), 2);
        assert_eq!(min_support_count(0.3, 4), 2);
        assert_eq!(min_support_count(0.0, 4), 0);
    }

    #[test]
    fn empty_dataset_rejected() {
        let d = BinaryDataset::new(vec![], vec![], BitVec::zeros(0), BitVec::zeros(0)).unwrap();
        assert!(matches!(
            mine_antecedents(&d, &MiningConfig::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn specs_round_trip() {
        let d = dataset(&["1100", "1010", "0110"], "1001", "0011");
        let set = mine_antecedents(&d, &MiningConfig::with_sigma(0.0)).unwrap();
        let again = AntecedentSet::from_specs(&d, &set.specs(&d)).unwrap();
        assert_eq!(again, set);
    }

    fn random_dataset() -> impl Strategy<Value = BinaryDataset> {
        (1usize..40, 1usize..6).prop_flat_map(|(m, nf)| {
            (
                prop::collection::vec(prop::collection::vec(any::<bool>(), m), nf),
                prop::collection::vec(any::<bool>(), m),
                prop::collection::vec(any::<bool>(), m),
            )
                .prop_map(move |(feats, y, a)| {
                    BinaryDataset::new(
                        (0..nf).map(|i| format!("x{i}")).collect(),
                        feats.into_iter().map(BitVec::from_bools).collect(),
                        BitVec::from_bools(y),
                        BitVec::from_bools(a),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn mined_set_invariants(d in random_dataset(), sigma in 0.0f64..0.6) {
            let set = mine_antecedents(&d, &MiningConfig::with_sigma(sigma)).unwrap();
            let m = d.n_samples();
            let threshold = min_support_count(sigma, m);
            let nf = d.n_features();
            for a in set.iter() {
                // per-sample re-evaluation of the capture
                for s in 0..m {
                    let expect = a.literals.iter().all(|l| d.feature(l.feature).get(s) != l.negated);
                    prop_assert_eq!(a.capture.get(s), expect);
                }
                prop_assert_eq!(a.support, a.capture.count_ones());
                if a.literals.len() == 2 {
                    prop_assert!(a.support >= threshold);
                    prop_assert!(a.literals[0].feature != a.literals[1].feature);
                }
            }
            for i in 0..nf {
                let pos = &set[i];
                let neg = &set[nf + i];
                prop_assert_eq!(pos.capture.not(), neg.capture.clone());
            }
        }
    }
}
