use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::table::RawTable;
use crate::bits::BitVec;
use crate::error::{Error, Result};

/// Binary feature matrix with labels and protected-group membership.
///
/// `group` bit set means the sample belongs to group 1 (A = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDataset {
    feature_names: Vec<String>,
    features: Vec<BitVec>,
    labels: BitVec,
    group: BitVec,
}

impl BinaryDataset {
    pub fn new(
        feature_names: Vec<String>,
        features: Vec<BitVec>,
        labels: BitVec,
        group: BitVec,
    ) -> Result<Self> {
        let m = labels.len();
        if group.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: group.len(),
            });
        }
        if feature_names.len() != features.len() {
            return Err(Error::LengthMismatch {
                expected: feature_names.len(),
                found: features.len(),
            });
        }
        if let Some(f) = features.iter().find(|f| f.len() != m) {
            return Err(Error::LengthMismatch {
                expected: m,
                found: f.len(),
            });
        }
        let mut seen = HashMap::new();
        for (i, name) in feature_names.iter().enumerate() {
            if seen.insert(name.as_str(), i).is_some() {
                return Err(Error::malformed(
                    "dataset",
                    format!("duplicate feature `{name}`"),
                ));
            }
        }
        Ok(BinaryDataset {
            feature_names,
            features,
            labels,
            group,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature(&self, i: usize) -> &BitVec {
        &self.features[i]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> &BitVec {
        &self.labels
    }

    pub fn group(&self) -> &BitVec {
        &self.group
    }

    /// Number of samples with A = 1.
    pub fn group1_count(&self) -> usize {
        self.group.count_ones()
    }

    /// Number of samples with A = 0.
    pub fn group0_count(&self) -> usize {
        self.group.count_zeros()
    }

    /// Size of the smaller of the two groups.
    pub fn minority_count(&self) -> usize {
        self.group0_count().min(self.group1_count())
    }

    pub fn majority_count(&self) -> usize {
        self.group0_count().max(self.group1_count())
    }

    /// The dataset restricted to `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> BinaryDataset {
        BinaryDataset {
            feature_names: self.feature_names.clone(),
            features: self.features.iter().map(|f| f.select(indices)).collect(),
            labels: self.labels.select(indices),
            group: self.group.select(indices),
        }
    }

    /// Writes the interchange files `<stem>.out`, `<stem>.label` and
    /// `<stem>.group`.
    pub fn write_files(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        let mut out = String::new();
        for (name, bits) in self.feature_names.iter().zip(&self.features) {
            write_line(&mut out, name, bits);
        }
        write_file(&with_ext(stem, "out"), &out)?;

        let mut label = String::new();
        write_line(&mut label, "label=0", &self.labels.not());
        write_line(&mut label, "label=1", &self.labels);
        write_file(&with_ext(stem, "label"), &label)?;

        let mut group = String::new();
        write_line(&mut group, "group=1", &self.group);
        write_file(&with_ext(stem, "group"), &group)
    }

    /// Reads the files written by [`BinaryDataset::write_files`].
    pub fn read_files(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let features = parse_lines(&read_file(&with_ext(stem, "out"))?)?;
        let labels = parse_lines(&read_file(&with_ext(stem, "label"))?)?;
        let group = parse_lines(&read_file(&with_ext(stem, "group"))?)?;

        let label_bits = labels
            .into_iter()
            .find(|(name, _)| name == "label=1")
            .ok_or_else(|| Error::malformed("label file", "missing {label=1} line"))?
            .1;
        let group_bits = group
            .into_iter()
            .find(|(name, _)| name == "group=1")
            .ok_or_else(|| Error::malformed("group file", "missing {group=1} line"))?
            .1;
        let (names, bits) = features.into_iter().unzip();
        BinaryDataset::new(names, bits, label_bits, group_bits)
    }
}

fn with_ext(stem: &Path, ext: &str) -> std::path::PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    s.into()
}

fn write_line(out: &mut String, name: &str, bits: &BitVec) {
    write!(out, "{{{name}}}").unwrap();
    for b in bits.iter() {
        out.push(' ');
        out.push(if b { '1' } else { '0' });
    }
    out.push('\n');
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_lines(text: &str) -> Result<Vec<(String, BitVec)>> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let close = line
            .find("} ")
            .or_else(|| line.strip_suffix('}').map(|s| s.len()))
            .filter(|_| line.starts_with('{'))
            .ok_or_else(|| {
                Error::malformed("dataset line", line.chars().take(40).collect::<String>())
            })?;
        let name = line[1..close].to_string();
        let bits = line[close + 1..]
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::malformed(
                    "dataset line",
                    format!("bit `{other}` in {{{name}}}"),
                )),
            })
            .collect::<Result<Vec<bool>>>()?;
        out.push((name, BitVec::from_bools(bits)));
    }
    Ok(out)
}

/// One-hot encodes every column except the label and sensitive ones.
///
/// Categories are numbered in order of first appearance, and each becomes a
/// feature named `column:value`.
pub fn binarize(table: &RawTable) -> Result<BinaryDataset> {
    let m = table.n_rows();
    let labels = BitVec::from_bools(table.labels()?);
    let group = BitVec::from_bools(table.groups()?);
    let mut names = Vec::new();
    let mut features = Vec::new();
    for (col, col_name) in table.columns.iter().enumerate() {
        if col == table.label || col == table.sensitive {
            continue;
        }
        let mut categories: Vec<&str> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut bits: Vec<BitVec> = Vec::new();
        for (row, v) in table.values(col).enumerate() {
            let k = *index.entry(v).or_insert_with(|| {
                categories.push(v);
                bits.push(BitVec::zeros(m));
                categories.len() - 1
            });
            bits[k].set(row, true);
        }
        for (cat, b) in categories.into_iter().zip(bits) {
            names.push(format!("{col_name}:{cat}"));
            features.push(b);
        }
    }
    BinaryDataset::new(names, features, labels, group)
}
