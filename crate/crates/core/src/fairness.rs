//! Group confusion counts and the six statistical unfairness measures.
//!
//! Every measure is an absolute difference (or a sum of two) of conditional
//! rates between group 0 (A = 0) and group 1 (A = 1). When a rate's
//! denominator is zero in either group, its difference term counts as 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::data::{AntecedentSet, BinaryDataset};
use crate::error::{Error, Result};
use crate::rules::{predict, PredictionVector, RuleList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessMetric {
    /// Statistical parity: positive prediction rate.
    Sp,
    /// Predictive parity: positive predictive value.
    Pp,
    /// Predictive equality: false positive rate.
    Pe,
    /// Equal opportunity: true positive rate.
    Eopp,
    /// Equalized odds: TPR and FPR differences, summed.
    Eodds,
    /// Conditional use accuracy equality: PPV and NPV differences, summed.
    Cuae,
}

impl FairnessMetric {
    pub const ALL: [FairnessMetric; 6] = [
        FairnessMetric::Sp,
        FairnessMetric::Pp,
        FairnessMetric::Pe,
        FairnessMetric::Eopp,
        FairnessMetric::Eodds,
        FairnessMetric::Cuae,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FairnessMetric::Sp => "sp",
            FairnessMetric::Pp => "pp",
            FairnessMetric::Pe => "pe",
            FairnessMetric::Eopp => "eopp",
            FairnessMetric::Eodds => "eodds",
            FairnessMetric::Cuae => "cuae",
        }
    }

    /// Largest value the measure can take.
    pub fn max_value(self) -> f64 {
        match self {
            FairnessMetric::Eodds | FairnessMetric::Cuae => 2.0,
            _ => 1.0,
        }
    }

    /// Rates whose between-group differences make up this measure.
    pub fn rates(self) -> &'static [Rate] {
        match self {
            FairnessMetric::Sp => &[Rate::PositiveRate],
            FairnessMetric::Pp => &[Rate::Ppv],
            FairnessMetric::Pe => &[Rate::Fpr],
            FairnessMetric::Eopp => &[Rate::Tpr],
            FairnessMetric::Eodds => &[Rate::Tpr, Rate::Fpr],
            FairnessMetric::Cuae => &[Rate::Ppv, Rate::Npv],
        }
    }
}

impl fmt::Display for FairnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FairnessMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FairnessMetric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric `{s}`")))
    }
}

/// Conditional rates used by the measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rate {
    /// P(Ŷ=1)
    PositiveRate,
    /// P(Y=1 | Ŷ=1)
    Ppv,
    /// P(Ŷ=1 | Y=0)
    Fpr,
    /// P(Ŷ=1 | Y=1)
    Tpr,
    /// P(Y=0 | Ŷ=0)
    Npv,
}

impl Rate {
    pub fn as_str(self) -> &'static str {
        match self {
            Rate::PositiveRate => "pr",
            Rate::Ppv => "ppv",
            Rate::Fpr => "fpr",
            Rate::Tpr => "tpr",
            Rate::Npv => "npv",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// (numerator, denominator) of a rate.
    pub fn ratio(&self, rate: Rate) -> (usize, usize) {
        match rate {
            Rate::PositiveRate => (self.tp + self.fp, self.total()),
            Rate::Ppv => (self.tp, self.tp + self.fp),
            Rate::Fpr => (self.fp, self.fp + self.tn),
            Rate::Tpr => (self.tp, self.tp + self.fn_),
            Rate::Npv => (self.tn, self.tn + self.fn_),
        }
    }

    /// The rate, or `None` when its denominator is zero.
    pub fn rate(&self, rate: Rate) -> Option<f64> {
        let (num, den) = self.ratio(rate);
        (den > 0).then(|| num as f64 / den as f64)
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Confusion counts for group 0 (`groups[0]`, A = 0) and group 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub groups: [Confusion; 2],
}

impl GroupConfusion {
    pub fn new(group0: Confusion, group1: Confusion) -> Self {
        GroupConfusion {
            groups: [group0, group1],
        }
    }

    pub fn total(&self) -> usize {
        self.groups[0].total() + self.groups[1].total()
    }

    pub fn correct(&self) -> usize {
        self.groups.iter().map(|g| g.tp + g.tn).sum()
    }

    /// Same counts with the group labels exchanged.
    pub fn swapped(&self) -> Self {
        GroupConfusion {
            groups: [self.groups[1], self.groups[0]],
        }
    }

    /// |rate₀ − rate₁|, or 0 when either group's denominator is zero.
    pub fn rate_gap(&self, rate: Rate) -> f64 {
        match (self.groups[0].rate(rate), self.groups[1].rate(rate)) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => 0.0,
        }
    }

    /// True when `rate` has a zero denominator in at least one group.
    pub fn is_degenerate(&self, rate: Rate) -> bool {
        self.groups.iter().any(|g| g.ratio(rate).1 == 0)
    }

    pub fn unfairness(&self, metric: FairnessMetric) -> f64 {
        metric.rates().iter().map(|&r| self.rate_gap(r)).sum()
    }
}

/// Per-group confusion counts of `predictions` against `data`'s labels.
pub fn confusion(predictions: &BitVec, data: &BinaryDataset) -> Result<GroupConfusion> {
    let m = data.n_samples();
    if predictions.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: predictions.len(),
        });
    }
    let y = data.labels();
    let not_y = y.not();
    let not_pred = predictions.not();
    let count = |in_group: &BitVec| {
        let pos = predictions.and(in_group);
        let neg = not_pred.and(in_group);
        Confusion {
            tp: pos.and_count(y),
            fp: pos.and_count(&not_y),
            tn: neg.and_count(&not_y),
            fn_: neg.and_count(y),
        }
    };
    let g1 = data.group();
    Ok(GroupConfusion::new(count(&g1.not()), count(g1)))
}

pub fn confusion_of(
    predictions: &PredictionVector,
    data: &BinaryDataset,
) -> Result<GroupConfusion> {
    confusion(&predictions.predictions, data)
}

pub fn unfairness(conf: &GroupConfusion, metric: FairnessMetric) -> f64 {
    conf.unfairness(metric)
}

/// Unfairness of the complete classifier `model` (rules plus default).
pub fn unfairness_of(
    model: &RuleList,
    data: &BinaryDataset,
    antecedents: &AntecedentSet,
    metric: FairnessMetric,
) -> Result<f64> {
    let p = predict(model, data, antecedents)?;
    Ok(confusion(&p.predictions, data)?.unfairness(metric))
}

/// One line of an audit report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub metric: FairnessMetric,
    pub value: f64,
    /// (rate name, group 0 value, group 1 value); `None` when undefined.
    pub rates: Vec<(Rate, Option<f64>, Option<f64>)>,
    pub degenerate: bool,
}

pub fn audit(conf: &GroupConfusion, metrics: &[FairnessMetric]) -> Vec<AuditRow> {
    metrics
        .iter()
        .map(|&metric| AuditRow {
            metric,
            value: conf.unfairness(metric),
            rates: metric
                .rates()
                .iter()
                .map(|&r| (r, conf.groups[0].rate(r), conf.groups[1].rate(r)))
                .collect(),
            degenerate: metric.rates().iter().any(|&r| conf.is_degenerate(r)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(labels: &str, group: &str) -> BinaryDataset {
        BinaryDataset::new(
            vec![],
            vec![],
            BitVec::from_bit_str(labels).unwrap(),
            BitVec::from_bit_str(group).unwrap(),
        )
        .unwrap()
    }

    fn conf(tp: usize, fp: usize, tn: usize, fn_: usize) -> Confusion {
        Confusion { tp, fp, tn, fn_ }
    }

    #[test]
    fn all_positive_all_correct() {
        let d = data("1111", "0011");
        let c = confusion(&BitVec::from_bit_str("1111").unwrap(), &d).unwrap();
        assert_eq!(c.groups[0], conf(2, 0, 0, 0));
        assert_eq!(c.groups[1], conf(2, 0, 0, 0));
    }

    #[test]
    fn hand_enumerated_counts() {
        // ŷ=1010, y=1100, A=0101
        let d = data("1100", "0101");
        let c = confusion(&BitVec::from_bit_str("1010").unwrap(), &d).unwrap();
        // s0: ŷ1 y1 A0, s1: ŷ0 y1 A1, s2: ŷ1 y0 A0, s3: ŷ0 y0 A1
        assert_eq!(c.groups[0], conf(1, 1, 0, 0));
        assert_eq!(c.groups[1], conf(0, 0, 1, 1));
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn length_mismatch() {
        let d = data("1100", "0101");
        assert!(confusion(&BitVec::zeros(3), &d).is_err());
    }

    #[test]
    fn statistical_parity_example() {
        // group 0 predicts positive 3/4, group 1 predicts positive 1/4
        let c = GroupConfusion::new(conf(2, 1, 1, 0), conf(1, 0, 2, 1));
        assert_eq!(c.unfairness(FairnessMetric::Sp), 0.5);
    }

    #[test]
    fn perfect_predictions_are_fair_except_parity() {
        let c = GroupConfusion::new(conf(3, 0, 2, 0), conf(1, 0, 4, 0));
        for m in FairnessMetric::ALL
            .into_iter()
            .filter(|&m| m != FairnessMetric::Sp)
        {
            assert_eq!(c.unfairness(m), 0.0, "{m}");
        }
        // positive rates follow the base rates 3/5 and 1/5
        assert!((c.unfairness(FairnessMetric::Sp) - 0.4).abs() < 1e-15);
        let same_base = GroupConfusion::new(conf(1, 0, 3, 0), conf(2, 0, 6, 0));
        assert_eq!(same_base.unfairness(FairnessMetric::Sp), 0.0);
    }

    #[test]
    fn constant_classifiers() {
        // base rates 0.5 and 0.25
        let ones = GroupConfusion::new(conf(2, 2, 0, 0), conf(1, 3, 0, 0));
        let zeros = GroupConfusion::new(conf(0, 0, 2, 2), conf(0, 0, 3, 1));
        for c in [ones, zeros] {
            for m in [
                FairnessMetric::Sp,
                FairnessMetric::Pe,
                FairnessMetric::Eopp,
                FairnessMetric::Eodds,
            ] {
                assert_eq!(c.unfairness(m), 0.0);
            }
        }
        // predictive parity of an all-positive classifier is the base-rate gap
        assert_eq!(ones.unfairness(FairnessMetric::Pp), 0.25);
        assert_eq!(zeros.unfairness(FairnessMetric::Pp), 0.0);
        assert_eq!(zeros.unfairness(FairnessMetric::Cuae), 0.25);
        assert!(zeros.is_degenerate(Rate::Ppv));
    }

    #[test]
    fn metric_names_parse() {
        for m in FairnessMetric::ALL {
            assert_eq!(m.as_str().parse::<FairnessMetric>().unwrap(), m);
        }
        assert!("dp".parse::<FairnessMetric>().is_err());
        assert_eq!(
            serde_json::to_string(&FairnessMetric::Eodds).unwrap(),
            "\"eodds\""
        );
    }

    #[test]
    fn audit_rows() {
        let zeros = GroupConfusion::new(conf(0, 0, 2, 2), conf(0, 0, 3, 1));
        let rows = audit(&zeros, &FairnessMetric::ALL);
        assert_eq!(rows.len(), 6);
        let pp = &rows[1];
        assert!(pp.degenerate);
        assert_eq!(pp.rates, vec![(Rate::Ppv, None, None)]);
        assert!(!rows[0].degenerate);
    }

    fn any_confusion() -> impl Strategy<Value = GroupConfusion> {
        prop::array::uniform8(0usize..20).prop_map(|c| {
            GroupConfusion::new(conf(c[0], c[1], c[2], c[3]), conf(c[4], c[5], c[6], c[7]))
        })
    }

    proptest! {
        #[test]
        fn identities_and_ranges(c in any_confusion()) {
            let u = |m| c.unfairness(m);
            prop_assert!((u(FairnessMetric::Eodds) - (u(FairnessMetric::Pe) + u(FairnessMetric::Eopp))).abs() <= 1e-12);
            prop_assert!(u(FairnessMetric::Cuae) >= u(FairnessMetric::Pp));
            prop_assert!(u(FairnessMetric::Cuae) >= c.rate_gap(Rate::Npv));
            for m in FairnessMetric::ALL {
                prop_assert!((0.0..=m.max_value()).contains(&u(m)));
                prop_assert_eq!(u(m), c.swapped().unfairness(m));
            }
        }

        #[test]
        fn invariant_to_sample_order(bits in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..60), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let build = |rows: &[(bool, bool, bool)]| {
                let d = BinaryDataset::new(
                    vec![],
                    vec![],
                    BitVec::from_bools(rows.iter().map(|r| r.1)),
                    BitVec::from_bools(rows.iter().map(|r| r.2)),
                ).unwrap();
                confusion(&BitVec::from_bools(rows.iter().map(|r| r.0)), &d).unwrap()
            };
            let mut shuffled = bits.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = build(&bits);
            prop_assert_eq!(a, build(&shuffled));
            prop_assert_eq!(a.total(), bits.len());
        }
    }
}
