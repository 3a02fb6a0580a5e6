//! Rule lists: first-match prediction, the regularized objective, and the
//! listing-style text and JSON record formats.

use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::data::{AntecedentSet, AntecedentSpec, BinaryDataset};
use crate::error::{Error, Result};
use crate::fairness::FairnessMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rule {
    pub antecedent: usize,
    pub prediction: bool,
}

/// Optional metadata attached to a learned model. Never affects prediction
/// or equality.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<FairnessMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_unfairness: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RuleList {
    pub rules: Vec<Rule>,
    pub default: bool,
    pub provenance: Option<Provenance>,
}

impl PartialEq for RuleList {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules && self.default == other.default
    }
}

impl Eq for RuleList {}

impl RuleList {
    pub fn new(rules: Vec<Rule>, default: bool) -> Self {
        RuleList {
            rules,
            default,
            provenance: None,
        }
    }

    /// The constant classifier.
    pub fn constant(default: bool) -> Self {
        Self::new(Vec::new(), default)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    fn check(&self, data: &BinaryDataset, antecedents: &AntecedentSet) -> Result<()> {
        if antecedents.n_samples() != data.n_samples() {
            return Err(Error::LengthMismatch {
                expected: data.n_samples(),
                found: antecedents.n_samples(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.rules {
            if antecedents.get(r.antecedent).is_none() {
                return Err(Error::UnknownAntecedent(format!("#{}", r.antecedent)));
            }
            if !seen.insert(r.antecedent) {
                return Err(Error::malformed(
                    "rule list",
                    format!("antecedent #{} appears twice", r.antecedent),
                ));
            }
        }
        Ok(())
    }
}

/// Per-sample output of a rule list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionVector {
    pub predictions: BitVec,
    /// Index of the rule that fired for each sample; `K` means the default.
    pub firing: Vec<usize>,
}

impl PredictionVector {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

pub fn predict(
    model: &RuleList,
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
) -> Result<PredictionVector> {
    model.check(data, antecedents)?;
    let m = data.n_samples();
    let k = model.rules.len();
    let mut uncaptured = BitVec::ones(m);
    let mut predictions = BitVec::zeros(m);
    let mut firing = vec![k; m];
    for (idx, rule) in model.rules.iter().enumerate() {
        let newly = antecedents[rule.antecedent].capture.and(&uncaptured);
        for s in newly.iter_ones() {
            firing[s] = idx;
            if rule.prediction {
                predictions.set(s, true);
            }
        }
        uncaptured.and_not_assign(&newly);
    }
    if model.default {
        predictions.or_assign(&uncaptured);
    }
    Ok(PredictionVector {
        predictions,
        firing,
    })
}

/// Number of samples `model` misclassifies.
pub fn mistakes(
    model: &RuleList,
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
) -> Result<usize> {
    let p = predict(model, data, antecedents)?;
    let correct = p.predictions.and_count(data.labels())
        + p.predictions.not().and_count(&data.labels().not());
    Ok(data.n_samples() - correct)
}

/// Misclassification rate of `model` on `data`.
pub fn error(model: &RuleList, data: &BinaryDataset, antecedents: &AntecedentSet) -> Result<f64> {
    let m = data.n_samples();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(mistakes(model, data, antecedents)? as f64 / m as f64)
}

/// Error plus `lambda` times the number of rules.
pub fn objective(
    model: &RuleList,
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
    lambda: f64,
) -> Result<f64> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let m = data.n_samples();
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(objective_value(
        mistakes(model, data, antecedents)?,
        m,
        model.len(),
        lambda,
    ))
}

/// `mistakes / m + lambda * k`.
///
/// Every objective and bound in the crate goes through this one expression so
/// that equal (mistakes, k) pairs compare bit-identically.
#[inline]
pub fn objective_value(mistakes: usize, m: usize, k: usize, lambda: f64) -> f64 {
    mistakes as f64 / m as f64 + lambda * k as f64
}

/// Error-minimizing constant prediction for a set with `positives` out of
/// `total` labels set. An exact tie predicts 0.
#[inline]
pub fn majority_label(positives: usize, total: usize) -> bool {
    2 * positives > total
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

/// Listing-style rendering:
///
/// ```text
/// if (priors:>3) then (1)
/// else if (age:18-20) then (1)
/// else (0)
/// ```
///
/// The empty list renders as the bare default, e.g. `(0)`.
pub fn to_text(model: &RuleList, antecedents: &AntecedentSet) -> Result<String> {
    let mut out = String::new();
    for (i, r) in model.rules.iter().enumerate() {
        let a = antecedents
            .get(r.antecedent)
            .ok_or_else(|| Error::UnknownAntecedent(format!("#{}", r.antecedent)))?;
        let kw = if i == 0 { "if" } else { "else if" };
        out.push_str(&format!("{kw} ({}) then ({})\n", a.name, bit(r.prediction)));
    }
    if model.rules.is_empty() {
        out.push_str(&format!("({})\n", bit(model.default)));
    } else {
        out.push_str(&format!("else ({})\n", bit(model.default)));
    }
    Ok(out)
}

/// Inverse of [`to_text`].
pub fn parse_text(text: &str, antecedents: &AntecedentSet) -> Result<RuleList> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let Some((last, body)) = lines.split_last() else {
        return Err(Error::malformed("rule list text", "empty"));
    };
    let parse_bit = |s: &str| match s {
        "(0)" => Ok(false),
        "(1)" => Ok(true),
        other => Err(Error::malformed(
            "rule list text",
            format!("prediction `{other}`"),
        )),
    };
    let mut rules = Vec::with_capacity(body.len());
    for (i, line) in body.iter().enumerate() {
        let kw = if i == 0 { "if (" } else { "else if (" };
        let rest = line.strip_prefix(kw).ok_or_else(|| {
            Error::malformed("rule list text", format!("expected `{kw}` in `{line}`"))
        })?;
        let split = rest.rfind(") then ").ok_or_else(|| {
            Error::malformed("rule list text", format!("missing `then` in `{line}`"))
        })?;
        let name = &rest[..split];
        let prediction = parse_bit(&rest[split + ") then ".len()..])?;
        let antecedent = antecedents
            .id_of(name)
            .ok_or_else(|| Error::UnknownAntecedent(name.to_string()))?;
        rules.push(Rule {
            antecedent,
            prediction,
        });
    }
    let default = if body.is_empty() {
        parse_bit(last)?
    } else {
        parse_bit(last.strip_prefix("else ").ok_or_else(|| {
            Error::malformed("rule list text", format!("expected `else` in `{last}`"))
        })?)?
    };
    Ok(RuleList::new(rules, default))
}

/// Structured model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub rules: Vec<RuleRecord>,
    pub default: bool,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub antecedent: AntecedentSpec,
    pub prediction: bool,
}

impl ModelRecord {
    /// Antecedents referenced by the record, in rule order.
    pub fn antecedent_specs(&self) -> Vec<AntecedentSpec> {
        self.rules.iter().map(|r| r.antecedent.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::malformed("model record", e.to_string()))
    }

    /// Rebuilds the model against `data`, returning it with an antecedent
    /// set holding exactly the rules' antecedents.
    pub fn resolve(&self, data: &BinaryDataset) -> Result<(RuleList, AntecedentSet)> {
        let set = AntecedentSet::from_specs(data, &self.antecedent_specs())?;
        let model = from_record(self, &set)?;
        Ok((model, set))
    }
}

pub fn to_record(
    model: &RuleList,
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
) -> Result<ModelRecord> {
    let rules = model
        .rules
        .iter()
        .map(|r| {
            let a = antecedents
                .get(r.antecedent)
                .ok_or_else(|| Error::UnknownAntecedent(format!("#{}", r.antecedent)))?;
            Ok(RuleRecord {
                antecedent: crate::data::spec_of(data, a),
                prediction: r.prediction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelRecord {
        rules,
        default: model.default,
        provenance: model.provenance.clone(),
    })
}

/// Resolves a record's antecedents by name in `antecedents`.
pub fn from_record(record: &ModelRecord, antecedents: &AntecedentSet) -> Result<RuleList> {
    let rules = record
        .rules
        .iter()
        .map(|r| {
            antecedents
                .id_of(&r.antecedent.name)
                .map(|antecedent| Rule {
                    antecedent,
                    prediction: r.prediction,
                })
                .ok_or_else(|| Error::UnknownAntecedent(r.antecedent.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RuleList {
        rules,
        default: record.default,
        provenance: record.provenance.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{mine_antecedents, MiningConfig};
    use proptest::prelude::*;

    /// Features a = {0}, b = {0, 1}, c = {} over five samples.
    fn toy() -> (BinaryDataset, AntecedentSet) {
        let d = BinaryDataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                BitVec::from_bit_str("10000").unwrap(),
                BitVec::from_bit_str("11000").unwrap(),
                BitVec::from_bit_str("00000").unwrap(),
            ],
            BitVec::from_bit_str("10110").unwrap(),
            BitVec::from_bit_str("00011").unwrap(),
        )
        .unwrap();
        let set = mine_antecedents(&d, &MiningConfig::with_sigma(0.0)).unwrap();
        (d, set)
    }

    fn rule(antecedent: usize, prediction: bool) -> Rule {
        Rule {
            antecedent,
            prediction,
        }
    }

    #[test]
    fn empty_list_predicts_default() {
        let (d, set) = toy();
        let p = predict(&RuleList::constant(true), &d, &set).unwrap();
        assert_eq!(p.predictions.to_string(), "11111");
        assert_eq!(p.firing, vec![0; 5]);
    }

    #[test]
    fn first_match_wins() {
        let (d, set) = toy();
        let model = RuleList::new(vec![rule(0, true), rule(1, false)], true);
        let p = predict(&model, &d, &set).unwrap();
        assert_eq!(p.predictions.to_string(), "10111");
        assert_eq!(p.firing, vec![0, 1, 2, 2, 2]);
    }

    #[test]
    fn dead_rule_changes_nothing() {
        let (d, set) = toy();
        let with = RuleList::new(vec![rule(0, true), rule(2, false)], true);
        let without = RuleList::new(vec![rule(0, true)], true);
        assert_eq!(
            predict(&with, &d, &set).unwrap().predictions,
            predict(&without, &d, &set).unwrap().predictions
        );
    }

    #[test]
    fn unknown_antecedent_and_length_mismatch() {
        let (d, set) = toy();
        let bad = RuleList::new(vec![rule(99, true)], false);
        assert!(matches!(
            predict(&bad, &d, &set),
            Err(Error::UnknownAntecedent(_))
        ));
        let other = d.subset(&[0, 1]);
        assert!(matches!(
            predict(&RuleList::constant(false), &other, &set),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn error_and_objective() {
        let (d, set) = toy();
        // labels 10110: the default-1 classifier misses samples 1 and 4
        assert_eq!(error(&RuleList::constant(true), &d, &set).unwrap(), 0.4);
        let perfect = RuleList::new(vec![rule(0, true), rule(1, false)], true);
        let e = error(&perfect, &d, &set).unwrap();
        assert_eq!(e, 0.2);
        assert_eq!(objective(&perfect, &d, &set, 0.0).unwrap(), e);
        assert_eq!(
            objective(&RuleList::constant(true), &d, &set, 0.5).unwrap(),
            0.4
        );
    }

    #[test]
    fn majority_default_error() {
        // labels 1110, majority 1, one mistake
        let d = BinaryDataset::new(
            vec![],
            vec![],
            BitVec::from_bit_str("1110").unwrap(),
            BitVec::from_bit_str("0011").unwrap(),
        )
        .unwrap();
        let set = AntecedentSet::from_literals(&d, vec![]).unwrap();
        assert!(majority_label(3, 4));
        assert!(!majority_label(2, 4));
        assert_eq!(error(&RuleList::constant(true), &d, &set).unwrap(), 0.25);
    }

    #[test]
    fn objective_formula() {
        // 0.2 error over 10 samples with 3 rules at lambda 0.01
        let v = objective_value(2, 10, 3, 0.01);
        assert!((v - 0.23).abs() < 1e-15);
    }

    #[test]
    fn text_format() {
        let (_, set) = toy();
        assert_eq!(to_text(&RuleList::constant(false), &set).unwrap(), "(0)\n");
        let m = RuleList::new(vec![rule(0, true)], false);
        let text = to_text(&m, &set).unwrap();
        assert_eq!(text, "if (a) then (1)\nelse (0)\n");
        let m = RuleList::new(vec![rule(0, true), rule(4, false)], true);
        assert_eq!(
            to_text(&m, &set).unwrap(),
            "if (a) then (1)\nelse if (not b) then (0)\nelse (1)\n"
        );
    }

    #[test]
    fn parse_errors() {
        let (_, set) = toy();
        assert!(parse_text("", &set).is_err());
        assert!(parse_text("if (zzz) then (1)\nelse (0)", &set).is_err());
        assert!(parse_text("if (a) then (2)\nelse (0)", &set).is_err());
        assert!(ModelRecord::from_json("{\"rules\": 3}").is_err());
    }

    fn random_model(n: usize) -> impl Strategy<Value = RuleList> {
        (
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            0..=n,
            prop::collection::vec(any::<bool>(), n),
            any::<bool>(),
        )
            .prop_map(|(ids, k, preds, default)| {
                RuleList::new(
                    ids[..k]
                        .iter()
                        .zip(preds)
                        .map(|(&a, p)| Rule {
                            antecedent: a,
                            prediction: p,
                        })
                        .collect(),
                    default,
                )
            })
    }

    proptest! {
        #[test]
        fn serialization_round_trips(model in random_model(9)) {
            let (d, set) = toy();
            let model = model.with_provenance(Provenance { epsilon: Some(0.1 + 0.2), lambda: Some(1e-3), ..Default::default() });
            let text = to_text(&model, &set).unwrap();
            prop_assert_eq!(&parse_text(&text, &set).unwrap(), &model);

            let record = to_record(&model, &d, &set).unwrap();
            let back = ModelRecord::from_json(&record.to_json().unwrap()).unwrap();
            prop_assert_eq!(&back, &record);
            let restored = from_record(&back, &set).unwrap();
            prop_assert_eq!(&restored, &model);
            prop_assert_eq!(restored.provenance, model.provenance);
        }

        #[test]
        fn prefix_coherence(model in random_model(9), extra in 0usize..9, pred in any::<bool>()) {
            let (d, set) = toy();
            prop_assume!(!model.rules.iter().any(|r| r.antecedent == extra));
            let base = predict(&model, &d, &set).unwrap();
            let mut ext = model.clone();
            ext.rules.push(Rule { antecedent: extra, prediction: pred });
            let after = predict(&ext, &d, &set).unwrap();
            for s in 0..d.n_samples() {
                let newly = set[extra].capture.get(s) && base.firing[s] == model.len();
                if !newly {
                    prop_assert_eq!(base.predictions.get(s), after.predictions.get(s));
                }
            }
            let e = error(&ext, &d, &set).unwrap();
            prop_assert!((0.0..=1.0).contains(&e));
            prop_assert!(objective(&ext, &d, &set, 0.05).unwrap() >= 0.05 * ext.len() as f64);
        }
    }
}
