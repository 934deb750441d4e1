//! Ternary articulatory feature table (tab-separated, one phone per row).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const PANPHONE_DIM: usize = 26;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTable {
    names: Vec<String>,
    rows: BTreeMap<String, [i8; PANPHONE_DIM]>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() != PANPHONE_DIM {
            return Err(Error::Invalid(format!(
                "feature table needs {PANPHONE_DIM} feature names, got {}",
                names.len()
            )));
        }
        Ok(Self {
            names,
            rows: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, phone: impl Into<String>, features: [i8; PANPHONE_DIM]) -> Result<()> {
        if let Some(v) = features.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::Invalid(format!("feature value {v} is not ternary")));
        }
        let phone = phone.into();
        if self.rows.contains_key(&phone) {
            return Err(Error::Invalid(format!("duplicate phone {phone:?}")));
        }
        self.rows.insert(phone, features);
        Ok(())
    }

    pub fn get(&self, phone: &str) -> Option<&[i8; PANPHONE_DIM]> {
        self.rows.get(phone)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[i8; PANPHONE_DIM])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// A random ternary table over `phones`, for synthetic corpora that have
    /// no real articulatory description. Rows are pairwise distinct.
    pub fn synthetic<S: AsRef<str>>(phones: &[S], seed: u64) -> Self {
        let names = (1..=PANPHONE_DIM).map(|i| format!("f{i}")).collect();
        let mut table = Self::new(names).expect("26 names");
        let mut rng = seed::rng(&[seed, 0xFEA7]);
        for p in phones {
            loop {
                let mut row = [0i8; PANPHONE_DIM];
                for v in &mut row {
                    *v = rng.random_range(-1..=1);
                }
                if table.rows.values().all(|r| r != &row) {
                    table.rows.insert(p.as_ref().to_string(), row);
                    break;
                }
            }
        }
        table
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("phone");
        for n in &self.names {
            out.push('\t');
            out.push_str(n);
        }
        out.push('\n');
        for (phone, row) in &self.rows {
            out.push_str(phone);
            for v in row {
                write!(out, "\t{v}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_panphone_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(path, &text)
}

fn parse(path: &Path, text: &str) -> Result<FeatureTable> {
    let bad = |row: usize, message: String| Error::FeatureTable {
        path: path.into(),
        row,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header row".into()))?;
    let mut cols = header.split('\t');
    if cols.next() != Some("phone") {
        return Err(bad(1, "header must start with `phone`".into()));
    }
    let names: Vec<String> = cols.map(str::to_string).collect();
    if names.len() != PANPHONE_DIM {
        return Err(bad(
            1,
            format!("header has {} feature columns, expected {PANPHONE_DIM}", names.len()),
        ));
    }
    let mut table = FeatureTable::new(names)?;
    for (i, line) in lines {
        let row = i + 1;
        let mut cols = line.split('\t');
        let phone = cols.next().unwrap_or_default();
        let values: Vec<&str> = cols.collect();
        if values.len() != PANPHONE_DIM {
            return Err(bad(
                row,
                format!("{} feature columns, expected {PANPHONE_DIM}", values.len()),
            ));
        }
        let mut features = [0i8; PANPHONE_DIM];
        for (slot, raw) in features.iter_mut().zip(&values) {
            *slot = match raw.trim() {
                "-1" => -1,
                "0" => 0,
                "1" | "+1" => 1,
                other => return Err(bad(row, format!("value {other:?} is not in {{-1, 0, 1}}"))),
            };
        }
        if table.get(phone).is_some() {
            return Err(bad(row, format!("duplicate phone {phone:?}")));
        }
        table.insert(phone, features)?;
    }
    Ok(table)
}

pub fn write_panphone_table(path: impl AsRef<Path>, table: &FeatureTable) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, table.to_tsv()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        let mut h = String::from("phone");
        for i in 0..PANPHONE_DIM {
            h.push_str(&format!("\tf{i}"));
        }
        h
    }

    fn row(phone: &str, values: &[&str]) -> String {
        format!("{phone}\t{}", values.join("\t"))
    }

    #[test]
    fn parses_a_row() {
        let mut v = vec!["0"; PANPHONE_DIM];
        v[0] = "1";
        v[1] = "1";
        v[2] = "-1";
        let text = format!("{}\n{}\n", header(), row("a", &v));
        let t = parse(Path::new("t"), &text).unwrap();
        let a = t.get("a").unwrap();
        assert_eq!(&a[..3], &[1, 1, -1]);
        assert!(a[3..].iter().all(|&x| x == 0));
    }

    #[test]
    fn short_row_reports_row_number() {
        let text = format!("{}\n{}\n{}\n", header(), row("a", &["0"; 26]), row("b", &["0"; 25]));
        assert!(matches!(
            parse(Path::new("t"), &text),
            Err(Error::FeatureTable { row: 3, .. })
        ));
    }

    #[test]
    fn non_ternary_value() {
        let mut v = vec!["0"; PANPHONE_DIM];
        v[7] = "2";
        let text = format!("{}\n{}\n", header(), row("a", &v));
        assert!(matches!(
            parse(Path::new("t"), &text),
            Err(Error::FeatureTable { row: 2, .. })
        ));
    }

    #[test]
    fn duplicate_phone() {
        let r = row("a", &["0"; 26]);
        let text = format!("{}\n{r}\n{r}\n", header());
        assert!(parse(Path::new("t"), &text).is_err());
    }

    #[test]
    fn synthetic_table_round_trips() {
        let t = FeatureTable::synthetic(&["a", "b", "ʃ"], 1);
        assert_eq!(t.len(), 3);
        assert_eq!(parse(Path::new("t"), &t.to_tsv()).unwrap(), t);
    }
}
