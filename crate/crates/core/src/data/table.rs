use std::io::Read;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

/// A parsed CSV with its label and sensitive columns resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub label: usize,
    pub sensitive: usize,
}

impl RawTable {
    pub fn new(
        columns: Vec<String>,
        rows: Vec<Vec<String>>,
        label: &str,
        sensitive: &str,
    ) -> Result<Self> {
        let label = column_index(&columns, label)?;
        let sensitive = column_index(&columns, sensitive)?;
        if label == sensitive {
            return Err(Error::InvalidConfig(
                "label and sensitive column must differ".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::NonRectangular {
                    row: i + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        let table = RawTable {
            columns,
            rows,
            label,
            sensitive,
        };
        table.binary_column(label)?;
        table.binary_column(sensitive)?;
        Ok(table)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        column_index(&self.columns, name)
    }

    pub fn values(&self, col: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[col].as_str())
    }

    /// Label values as booleans.
    pub fn labels(&self) -> Result<Vec<bool>> {
        self.binary_column(self.label)
    }

    /// Sensitive group membership as booleans (`true` = group 1).
    pub fn groups(&self) -> Result<Vec<bool>> {
        self.binary_column(self.sensitive)
    }

    fn binary_column(&self, col: usize) -> Result<Vec<bool>> {
        self.values(col)
            .map(|v| {
                parse_binary(v).ok_or_else(|| Error::NotBinary {
                    column: self.columns[col].clone(),
                    value: v.to_string(),
                })
            })
            .collect()
    }

    /// Copy of the table restricted to the given rows, in order.
    pub fn with_rows(&self, rows: impl IntoIterator<Item = usize>) -> RawTable {
        RawTable {
            columns: self.columns.clone(),
            rows: rows.into_iter().map(|i| self.rows[i].clone()).collect(),
            label: self.label,
            sensitive: self.sensitive,
        }
    }
}

fn column_index(columns: &[String], name: &str) -> Result<usize> {
    columns
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Accepts `0/1`, `true/false` and `yes/no` (case-insensitive).
pub fn parse_binary(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

pub fn load_csv(path: impl AsRef<Path>, label: &str, sensitive: &str) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label, sensitive)
}

/// Reads an RFC 4180 CSV with a header row. Cells are trimmed; rows with an
/// empty cell are dropped.
pub fn read_csv<R: Read>(reader: R, label: &str, sensitive: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != columns.len() {
            return Err(Error::NonRectangular {
                row: i + 1,
                expected: columns.len(),
                found: rec.len(),
            });
        }
        if rec.iter().any(|c| c.is_empty()) {
            dropped += 1;
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if dropped > 0 {
        warn!("dropped {dropped} rows with missing cells");
    }
    RawTable::new(columns, rows, label, sensitive)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "age,sex,income\n25,1,0\n40,0,1\n 33 ,1, 1\n51,0,0\n";

    #[test]
    fn parses_small_table() {
        let t = read_csv(SMALL.as_bytes(), "income", "sex").unwrap();
        assert_eq!(t.n_rows(), 4);
        assert_eq!(t.columns, vec!["age", "sex", "income"]);
        assert_eq!(t.rows[2], vec!["33", "1", "1"]);
        assert_eq!(t.labels().unwrap(), vec![false, true, true, false]);
        assert_eq!(t.groups().unwrap(), vec![true, false, true, false]);
    }

    #[test]
    fn label_not_binarizable() {
        let csv = "x,s,y\na,0,1\nb,1,maybe\n";
        match read_csv(csv.as_bytes(), "y", "s") {
            Err(Error::NotBinary { column, value }) => {
                assert_eq!(column, "y");
                assert_eq!(value, "maybe");
            }
            other => panic!("expected NotBinary, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_ragged_rows() {
        assert!(matches!(
            read_csv(SMALL.as_bytes(), "salary", "sex"),
            Err(Error::MissingColumn(c)) if c == "salary"
        ));
        let ragged = "a,s,y\n1,0,1\n2,1\n";
        assert!(matches!(
            read_csv(ragged.as_bytes(), "y", "s"),
            Err(Error::NonRectangular {
                row: 2,
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn quoted_cells_and_missing_rows() {
        let csv = "name,s,y\n\"Smith, J\",0,1\n,1,0\n\"x\",1,0\n";
        let t = read_csv(csv.as_bytes(), "y", "s").unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.rows[0][0], "Smith, J");
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", "s"),
            Err(Error::Io { .. })
        ));
    }
}
