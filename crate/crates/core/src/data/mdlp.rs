//! Supervised discretization of numeric columns by recursive entropy
//! minimization with the Fayyad–Irani MDL stopping rule.

use std::collections::BTreeMap;

use log::warn;

use super::table::RawTable;
use crate::error::{Error, Result};

/// Learned cut points per numeric column, ascending.
pub type SplitMap = BTreeMap<String, Vec<f64>>;

/// Learns cut points for `numeric` columns and replaces them by interval
/// labels.
///
/// Thresholds are learned on the first `ceil(split_fraction * M)` rows and the
/// remaining rows form the returned table. A fraction of 0 learns and applies
/// on the full table.
pub fn mdlp_discretize(
    table: &RawTable,
    numeric: &[String],
    split_fraction: f64,
) -> Result<(SplitMap, RawTable)> {
    if !(0.0..1.0).contains(&split_fraction) {
        return Err(Error::InvalidConfig(format!(
            "split fraction must be in [0, 1), got {split_fraction}"
        )));
    }
    let m = table.n_rows();
    let (learn_rows, apply_rows): (Vec<usize>, Vec<usize>) = if split_fraction == 0.0 {
        ((0..m).collect(), (0..m).collect())
    } else {
        let n_learn = ((split_fraction * m as f64).ceil() as usize).min(m);
        ((0..n_learn).collect(), (n_learn..m).collect())
    };
    let labels = table.labels()?;

    let mut splits = SplitMap::new();
    let mut out = table.with_rows(apply_rows.iter().copied());
    for name in numeric {
        let col = table.column(name)?;
        if col == table.label || col == table.sensitive {
            return Err(Error::InvalidConfig(format!(
                "column `{name}` is the label or sensitive column"
            )));
        }
        let parsed = parse_numeric(table, col)?;
        let learn_values: Vec<f64> = learn_rows.iter().map(|&i| parsed[i]).collect();
        let learn_labels: Vec<bool> = learn_rows.iter().map(|&i| labels[i]).collect();
        let distinct = {
            let mut v = learn_values.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        if distinct < 2 {
            warn!("column `{name}` has fewer than 2 distinct values; passed through unchanged");
            continue;
        }
        let cuts = mdlp_cut_points(&learn_values, &learn_labels);
        for (row, &src) in out.rows.iter_mut().zip(&apply_rows) {
            row[col] = interval_label(&cuts, parsed[src]);
        }
        splits.insert(name.clone(), cuts);
    }
    Ok((splits, out))
}

/// Columns whose every value parses as a number and that take more than two
/// distinct values. Label and sensitive columns are never reported.
pub fn detect_numeric(table: &RawTable) -> Vec<String> {
    (0..table.columns.len())
        .filter(|&c| c != table.label && c != table.sensitive)
        .filter(|&c| {
            let mut seen = std::collections::HashSet::new();
            for v in table.values(c) {
                if v.parse::<f64>().is_err() {
                    return false;
                }
                seen.insert(v);
            }
            seen.len() > 2
        })
        .map(|c| table.columns[c].clone())
        .collect()
}

fn parse_numeric(table: &RawTable, col: usize) -> Result<Vec<f64>> {
    table
        .values(col)
        .map(|v| match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(Error::NotNumeric {
                column: table.columns[col].clone(),
                value: v.to_string(),
            }),
        })
        .collect()
}

/// Interval label for `x` given ascending cut points: `<=t1`, `(t1,t2]`, ...,
/// `>tk`. With no cuts every value maps to `all`.
pub fn interval_label(cuts: &[f64], x: f64) -> String {
    let pos = cuts.partition_point(|&t| t < x);
    match (pos, cuts.len()) {
        (_, 0) => "all".to_string(),
        (0, _) => format!("<={}", cuts[0]),
        (p, n) if p == n => format!(">{}", cuts[n - 1]),
        (p, _) => format!("({},{}]", cuts[p - 1], cuts[p]),
    }
}

/// Cut points for one numeric column against binary labels. Each cut is the
/// midpoint between the two adjacent distinct values it separates.
pub fn mdlp_cut_points(values: &[f64], labels: &[bool]) -> Vec<f64> {
    assert_eq!(values.len(), labels.len());
    let mut pairs: Vec<(f64, bool)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    // positives[i] = number of positive labels among the first i sorted samples
    let mut positives = Vec::with_capacity(pairs.len() + 1);
    positives.push(0usize);
    for p in &pairs {
        positives.push(positives.last().unwrap() + p.1 as usize);
    }
    let mut cuts = Vec::new();
    split_segment(&sorted, &positives, 0, sorted.len(), &mut cuts);
    cuts
}

fn split_segment(values: &[f64], positives: &[usize], lo: usize, hi: usize, cuts: &mut Vec<f64>) {
    let n = hi - lo;
    if n < 2 {
        return;
    }
    let pos = positives[hi] - positives[lo];
    let whole = ClassCounts { pos, neg: n - pos };

    let mut best: Option<(usize, f64)> = None;
    for c in lo + 1..hi {
        if values[c - 1] == values[c] {
            continue;
        }
        let left = ClassCounts::of(positives, lo, c);
        let right = ClassCounts::of(positives, c, hi);
        let e = (left.total() as f64 * left.entropy() + right.total() as f64 * right.entropy())
            / n as f64;
        if best.is_none_or(|(_, be)| e < be) {
            best = Some((c, e));
        }
    }
    let Some((c, weighted)) = best else {
        return;
    };
    let left = ClassCounts::of(positives, lo, c);
    let right = ClassCounts::of(positives, c, hi);
    if !mdl_accepts(whole, left, right, weighted) {
        return;
    }
    split_segment(values, positives, lo, c, cuts);
    cuts.push((values[c - 1] + values[c]) / 2.0);
    split_segment(values, positives, c, hi, cuts);
}

/// Fayyad–Irani acceptance: gain > (log2(N-1) + delta) / N.
fn mdl_accepts(whole: ClassCounts, left: ClassCounts, right: ClassCounts, weighted: f64) -> bool {
    let n = whole.total() as f64;
    let ent = whole.entropy();
    let gain = ent - weighted;
    let k = whole.n_classes() as f64;
    let k1 = left.n_classes() as f64;
    let k2 = right.n_classes() as f64;
    let delta =
        (3f64.powf(k) - 2.0).log2() - (k * ent - k1 * left.entropy() - k2 * right.entropy());
    gain > ((n - 1.0).log2() + delta) / n
}

#[derive(Debug, Clone, Copy)]
struct ClassCounts {
    pos: usize,
    neg: usize,
}

impl ClassCounts {
    fn of(positives: &[usize], lo: usize, hi: usize) -> Self {
        let pos = positives[hi] - positives[lo];
        ClassCounts {
            pos,
            neg: hi - lo - pos,
        }
    }

    fn total(self) -> usize {
        self.pos + self.neg
    }

    fn n_classes(self) -> usize {
        (self.pos > 0) as usize + (self.neg > 0) as usize
    }

    fn entropy(self) -> f64 {
        let n = self.total() as f64;
        [self.pos, self.neg]
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force reference for a single MDL decision: scans every cut
    /// position by counting labels sample by sample.
    fn oracle_first_cut(values: &[f64], labels: &[bool]) -> Option<f64> {
        let mut pairs: Vec<(f64, bool)> =
            values.iter().copied().zip(labels.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ent = |s: &[(f64, bool)]| {
            let n = s.len() as f64;
            let p = s.iter().filter(|x| x.1).count() as f64;
            let mut h = 0.0;
            for c in [p, n - p] {
                if c > 0.0 {
                    h -= c / n * (c / n).log2();
                }
            }
            h
        };
        let classes = |s: &[(f64, bool)]| {
            let p = s.iter().any(|x| x.1) as i32;
            let q = s.iter().any(|x| !x.1) as i32;
            (p + q) as f64
        };
        let n = pairs.len();
        let mut best: Option<(usize, f64)> = None;
        for c in 1..n {
            if pairs[c - 1].0 == pairs[c].0 {
                continue;
            }
            let (l, r) = pairs.split_at(c);
            let e = (l.len() as f64 * ent(l) + r.len() as f64 * ent(r)) / n as f64;
            if best.is_none_or(|(_, b)| e < b) {
                best = Some((c, e));
            }
        }
        let (c, e) = best?;
        let (l, r) = pairs.split_at(c);
        let k = classes(&pairs);
        let delta = (3f64.powf(k) - 2.0).log2()
            - (k * ent(&pairs) - classes(l) * ent(l) - classes(r) * ent(r));
        let nf = n as f64;
        if ent(&pairs) - e > ((nf - 1.0).log2() + delta) / nf {
            Some((pairs[c - 1].0 + pairs[c].0) / 2.0)
        } else {
            None
        }
    }

    #[test]
    fn separable_column_gets_one_cut() {
        let values = [1.0, 1.0, 2.0, 9.0, 10.0, 10.0];
        let labels = [false, false, false, true, true, true];
        assert_eq!(oracle_first_cut(&values, &labels), Some(5.5));
        assert_eq!(mdlp_cut_points(&values, &labels), vec![5.5]);
    }

    #[test]
    fn constant_column_passes_through() {
        let csv = "x,s,y\n3,0,1\n3,1,0\n3,1,1\n3,0,0\n";
        let t = crate::data::read_csv(csv.as_bytes(), "y", "s").unwrap();
        let (splits, out) = mdlp_discretize(&t, &["x".into()], 0.0).unwrap();
        assert!(splits.is_empty());
        assert_eq!(out, t);
    }

    #[test]
    fn uninformative_column_has_no_cuts() {
        let values = [1.0, 2.0, 3.0, 4.0];
        let labels = [true, false, true, false];
        assert!(mdlp_cut_points(&values, &labels).is_empty());
    }

    #[test]
    fn learn_on_prefix_apply_on_rest() {
        let mut csv = String::from("x,s,y\n");
        for i in 0..30 {
            let y = (i % 10) >= 5;
            csv.push_str(&format!("{},{},{}\n", i % 10, i % 2, y as u8));
        }
        let t = crate::data::read_csv(csv.as_bytes(), "y", "s").unwrap();
        let (splits, out) = mdlp_discretize(&t, &["x".into()], 1.0 / 3.0).unwrap();
        assert_eq!(splits["x"], vec![4.5]);
        assert_eq!(out.n_rows(), 20);
        assert_eq!(out.rows[0][0], "<=4.5");
        assert_eq!(out.rows[5][0], ">4.5");
    }

    #[test]
    fn non_numeric_column_is_an_error() {
        let csv = "x,s,y\n1,0,1\nfoo,1,0\n";
        let t = crate::data::read_csv(csv.as_bytes(), "y", "s").unwrap();
        assert!(matches!(
            mdlp_discretize(&t, &["x".into()], 0.0),
            Err(Error::NotNumeric { .. })
        ));
    }

    #[test]
    fn labels_for_intervals() {
        let cuts = [1.5, 4.0];
        assert_eq!(interval_label(&cuts, 1.0), "<=1.5");
        assert_eq!(interval_label(&cuts, 1.5), "<=1.5");
        assert_eq!(interval_label(&cuts, 3.0), "(1.5,4]");
        assert_eq!(interval_label(&cuts, 9.0), ">4");
    }

    fn partition(values: &[f64], cuts: &[f64]) -> Vec<usize> {
        values
            .iter()
            .map(|&x| cuts.partition_point(|&t| t < x))
            .collect()
    }

    proptest! {
        #[test]
        fn first_cut_matches_oracle(data in prop::collection::vec((0u8..20, any::<bool>()), 2..60)) {
            let values: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            let cuts = mdlp_cut_points(&values, &labels);
            match oracle_first_cut(&values, &labels) {
                None => prop_assert!(cuts.is_empty()),
                Some(c) => prop_assert!(cuts.contains(&c)),
            }
        }

        #[test]
        fn invariant_under_monotone_transform(data in prop::collection::vec((0u8..30, any::<bool>()), 2..80)) {
            let values: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1 || d.0 > 20).collect();
            let mapped: Vec<f64> = values.iter().map(|x| (x / 4.0).exp() * 3.0 - 7.0).collect();
            let a = mdlp_cut_points(&values, &labels);
            let b = mdlp_cut_points(&mapped, &labels);
            prop_assert_eq!(a.len(), b.len());
            prop_assert_eq!(partition(&values, &a), partition(&mapped, &b));
        }
    }
}
