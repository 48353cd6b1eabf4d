use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// What to do with rows holding missing or unreadable values. Without a
/// policy such rows are errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaPolicy {
    DropRow,
    /// Mean for numeric columns, mode for categorical ones, computed over
    /// the whole file. Rows missing the target or protected value are
    /// still dropped.
    ImputeModeMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Fixed category set for a categorical column. When absent the
    /// categories observed in the file are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl FeatureColumn {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: None,
        }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: None,
        }
    }
}

/// Binds the columns of a CSV file to the label, the protected attribute
/// and the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub target_column: String,
    /// Raw target value mapped to y = 1; every other value maps to 0.
    pub favorable_label: String,
    pub protected_column: String,
    /// Raw protected value mapped to a = 1; every other value maps to 0.
    pub privileged_value: String,
    pub feature_columns: Vec<FeatureColumn>,
    #[serde(default)]
    pub na_policy: Option<NaPolicy>,
}

impl DatasetSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let schema: DatasetSchema = serde_json::from_reader(File::open(path)?)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_column == self.protected_column {
            return Err(Error::Schema(format!(
                "target and protected column are both `{}`",
                self.target_column
            )));
        }
        let mut seen = BTreeSet::new();
        for col in &self.feature_columns {
            if col.name == self.target_column || col.name == self.protected_column {
                return Err(Error::Schema(format!(
                    "`{}` cannot be both a feature and the target/protected column",
                    col.name
                )));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("feature `{}` listed twice", col.name)));
            }
            if col.kind == ColumnKind::Numeric && col.categories.is_some() {
                return Err(Error::Schema(format!("numeric feature `{}` has categories", col.name)));
            }
        }
        Ok(())
    }
}

fn is_missing(raw: &str) -> bool {
    raw.is_empty()
        || raw == "?"
        || raw.eq_ignore_ascii_case("na")
        || raw.eq_ignore_ascii_case("n/a")
        || raw.eq_ignore_ascii_case("nan")
}

enum Cell {
    Num(Option<f64>),
    Cat(Option<String>),
}

struct RawRow {
    y: u8,
    a: u8,
    cells: Vec<Cell>,
}

/// Loads and encodes a CSV file (header row, comma delimiter, UTF-8).
///
/// Numeric features come first in schema order, followed by the one-hot
/// block of each categorical feature (schema order, then lexicographic
/// category order). One-hot columns are named `column=category`.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    load_csv_from_reader(File::open(path)?, schema)
}

pub fn load_csv_from_reader<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let target_idx = position(&schema.target_column)?;
    let protected_idx = position(&schema.protected_column)?;
    let feature_idx = schema
        .feature_columns
        .iter()
        .map(|c| position(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let fixed_categories: Vec<Option<BTreeSet<&str>>> = schema
        .feature_columns
        .iter()
        .map(|c| c.categories.as_ref().map(|cs| cs.iter().map(String::as_str).collect()))
        .collect();

    let policy = schema.na_policy;
    let mut rows = Vec::new();
    'records: for (record_no, record) in rdr.records().enumerate() {
        let record = record?;
        let record_no = record_no + 1;
        let unreadable = |column: &str, value: &str| Error::Parse {
            record: record_no,
            column: column.to_string(),
            value: value.to_string(),
        };

        let raw_target = record.get(target_idx).unwrap_or("");
        let raw_protected = record.get(protected_idx).unwrap_or("");
        if is_missing(raw_target) || is_missing(raw_protected) {
            if policy.is_some() {
                continue 'records;
            }
            let (col, val) = if is_missing(raw_target) {
                (&schema.target_column, raw_target)
            } else {
                (&schema.protected_column, raw_protected)
            };
            return Err(unreadable(col, val));
        }
        let y = u8::from(raw_target == schema.favorable_label);
        let a = u8::from(raw_protected == schema.privileged_value);

        let mut cells = Vec::with_capacity(feature_idx.len());
        for ((col, &idx), fixed) in schema.feature_columns.iter().zip(&feature_idx).zip(&fixed_categories) {
            let raw = record.get(idx).unwrap_or("");
            let readable = match col.kind {
                ColumnKind::Numeric => {
                    let parsed = if is_missing(raw) { None } else { raw.parse::<f64>().ok() };
                    parsed.filter(|v| v.is_finite()).map(|v| Cell::Num(Some(v)))
                }
                ColumnKind::Categorical => {
                    let known = fixed.as_ref().is_none_or(|set| set.contains(raw));
                    (!is_missing(raw) && known).then(|| Cell::Cat(Some(raw.to_string())))
                }
            };
            match (readable, policy) {
                (Some(cell), _) => cells.push(cell),
                (None, Some(NaPolicy::DropRow)) => continue 'records,
                (None, Some(NaPolicy::ImputeModeMean)) => cells.push(match col.kind {
                    ColumnKind::Numeric => Cell::Num(None),
                    ColumnKind::Categorical => Cell::Cat(None),
                }),
                (None, None) => return Err(unreadable(&col.name, raw)),
            }
        }
        rows.push(RawRow { y, a, cells });
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    encode(rows, schema)
}

fn encode(mut rows: Vec<RawRow>, schema: &DatasetSchema) -> Result<Dataset> {
    let n = rows.len();
    // imputation values and category sets, per feature column
    let mut categories: Vec<Vec<String>> = Vec::new();
    for (j, col) in schema.feature_columns.iter().enumerate() {
        match col.kind {
            ColumnKind::Numeric => {
                let present: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| match &r.cells[j] {
                        Cell::Num(v) => *v,
                        Cell::Cat(_) => None,
                    })
                    .collect();
                if present.len() < n {
                    if present.is_empty() {
                        return Err(Error::Schema(format!("column `{}` has no readable values", col.name)));
                    }
                    let mean = present.iter().sum::<f64>() / present.len() as f64;
                    for r in rows.iter_mut() {
                        if let Cell::Num(v @ None) = &mut r.cells[j] {
                            *v = Some(mean);
                        }
                    }
                }
                categories.push(Vec::new());
            }
            ColumnKind::Categorical => {
                let mut freq: BTreeMap<String, usize> = BTreeMap::new();
                for r in &rows {
                    if let Cell::Cat(Some(v)) = &r.cells[j] {
                        *freq.entry(v.clone()).or_default() += 1;
                    }
                }
                if freq.is_empty() {
                    return Err(Error::Schema(format!("column `{}` has no readable values", col.name)));
                }
                // BTreeMap iteration is lexicographic, so ties go to the smallest category
                let mode = freq
                    .iter()
                    .fold((None::<&String>, 0usize), |best, (k, &c)| if c > best.1 { (Some(k), c) } else { best })
                    .0
                    .cloned()
                    .expect("nonempty frequency table");
                for r in rows.iter_mut() {
                    if let Cell::Cat(v @ None) = &mut r.cells[j] {
                        *v = Some(mode.clone());
                    }
                }
                let mut cats: Vec<String> = match &col.categories {
                    Some(fixed) => fixed.clone(),
                    None => freq.into_keys().collect(),
                };
                cats.sort();
                cats.dedup();
                categories.push(cats);
            }
        }
    }

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    for col in schema.feature_columns.iter().filter(|c| c.kind == ColumnKind::Numeric) {
        names.push(col.name.clone());
        kinds.push(FeatureKind::Numeric);
    }
    for (col, cats) in schema.feature_columns.iter().zip(&categories) {
        if col.kind == ColumnKind::Categorical {
            for cat in cats {
                names.push(format!("{}={}", col.name, cat));
                kinds.push(FeatureKind::OneHot {
                    group: col.name.clone(),
                    category: cat.clone(),
                });
            }
        }
    }

    let d = names.len();
    let mut x = Vec::with_capacity(n * d);
    for r in &rows {
        for cell in &r.cells {
            if let Cell::Num(v) = cell {
                x.push(v.expect("imputed"));
            }
        }
        for (cell, cats) in r.cells.iter().zip(&categories) {
            if let Cell::Cat(v) = cell {
                let v = v.as_deref().expect("imputed");
                x.extend(cats.iter().map(|c| if c == v { 1.0 } else { 0.0 }));
            }
        }
    }
    Dataset::from_parts(
        x,
        rows.iter().map(|r| r.y).collect(),
        rows.iter().map(|r| r.a).collect(),
        vec![1.0; n],
        names,
        kinds,
    )
}

const TARGET_COLUMN: &str = "target";
const PROTECTED_COLUMN: &str = "protected";

impl Dataset {
    /// The schema that reloads a file produced by [`Dataset::write_csv`].
    pub fn induced_schema(&self) -> DatasetSchema {
        let (target, protected) = self.label_column_names();
        let mut columns: Vec<FeatureColumn> = Vec::new();
        for (name, kind) in self.feature_names.iter().zip(&self.feature_kinds) {
            match kind {
                FeatureKind::Numeric => columns.push(FeatureColumn::numeric(name.clone())),
                FeatureKind::OneHot { group, category } => {
                    match columns.iter_mut().find(|c| &c.name == group) {
                        Some(col) => col.categories.get_or_insert_with(Vec::new).push(category.clone()),
                        None => columns.push(FeatureColumn {
                            name: group.clone(),
                            kind: ColumnKind::Categorical,
                            categories: Some(vec![category.clone()]),
                        }),
                    }
                }
            }
        }
        DatasetSchema {
            target_column: target,
            favorable_label: "1".into(),
            protected_column: protected,
            privileged_value: "1".into(),
            feature_columns: columns,
            na_policy: None,
        }
    }

    fn label_column_names(&self) -> (String, String) {
        let taken = |name: &str| {
            self.feature_names.iter().any(|f| f == name)
                || self.feature_kinds.iter().any(|k| matches!(k, FeatureKind::OneHot { group, .. } if group == name))
        };
        let mut target = TARGET_COLUMN.to_string();
        while taken(&target) {
            target.insert(0, '_');
        }
        let mut protected = PROTECTED_COLUMN.to_string();
        while taken(&protected) {
            protected.insert(0, '_');
        }
        (target, protected)
    }

    /// Writes features, label and protected attribute as CSV. One-hot
    /// groups are folded back into a single categorical column. Weights
    /// are not written.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let schema = self.induced_schema();
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = schema.feature_columns.iter().map(|c| c.name.as_str()).collect();
        header.push(&schema.target_column);
        header.push(&schema.protected_column);
        wtr.write_record(&header)?;

        let positions: Vec<Vec<usize>> = schema
            .feature_columns
            .iter()
            .map(|col| {
                self.feature_kinds
                    .iter()
                    .enumerate()
                    .filter(|&(j, k)| match (k, col.kind) {
                        (FeatureKind::Numeric, ColumnKind::Numeric) => self.feature_names[j] == col.name,
                        (FeatureKind::OneHot { group, .. }, ColumnKind::Categorical) => group == &col.name,
                        _ => false,
                    })
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();

        for i in 0..self.n_rows() {
            let mut record = Vec::with_capacity(header.len());
            for (col, cols) in schema.feature_columns.iter().zip(&positions) {
                match col.kind {
                    ColumnKind::Numeric => record.push(self.value(i, cols[0]).to_string()),
                    ColumnKind::Categorical => {
                        let hot: Vec<usize> = cols.iter().copied().filter(|&j| self.value(i, j) == 1.0).collect();
                        let [j] = hot[..] else {
                            return Err(Error::Schema(format!(
                                "row {i}: one-hot group `{}` does not have exactly one hot column",
                                col.name
                            )));
                        };
                        match &self.feature_kinds[j] {
                            FeatureKind::OneHot { category, .. } => record.push(category.clone()),
                            FeatureKind::Numeric => unreachable!(),
                        }
                    }
                }
            }
            record.push(self.y[i].to_string());
            record.push(self.a[i].to_string());
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(policy: Option<NaPolicy>) -> DatasetSchema {
        DatasetSchema {
            target_column: "class".into(),
            favorable_label: "good".into(),
            protected_column: "sex".into(),
            privileged_value: "male".into(),
            feature_columns: vec![FeatureColumn::numeric("amount"), FeatureColumn::categorical("color")],
            na_policy: policy,
        }
    }

    #[test]
    fn drops_row_missing_target() {
        let csv = "amount,color,class,sex\n1,red,good,male\n2,blue,,female\n3,red,bad,female\n";
        let ds = load_csv_from_reader(csv.as_bytes(), &schema(Some(NaPolicy::DropRow))).unwrap();
        assert_eq!(ds.n_rows(), 2);
        assert_eq!(ds.y(), &[1, 0]);
        assert_eq!(ds.a(), &[1, 0]);
    }

    #[test]
    fn missing_target_without_policy_is_an_error() {
        let csv = "amount,color,class,sex\n1,red,good,male\n2,blue,,female\n";
        assert!(matches!(
            load_csv_from_reader(csv.as_bytes(), &schema(None)),
            Err(Error::Parse { record: 2, .. })
        ));
    }

    #[test]
    fn one_hot_is_lexicographic() {
        let csv = "amount,color,class,sex\n1,red,good,male\n2,blue,bad,female\n";
        let ds = load_csv_from_reader(csv.as_bytes(), &schema(None)).unwrap();
        assert_eq!(ds.feature_names(), &["amount", "color=blue", "color=red"]);
        assert_eq!(ds.x(), &[1.0, 0.0, 1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn non_numeric_value() {
        let csv = "amount,color,class,sex\nabc,red,good,male\n2,blue,bad,female\n";
        let dropped = load_csv_from_reader(csv.as_bytes(), &schema(Some(NaPolicy::DropRow))).unwrap();
        assert_eq!(dropped.n_rows(), 1);
        assert!(matches!(
            load_csv_from_reader(csv.as_bytes(), &schema(None)),
            Err(Error::Parse { ref column, .. }) if column == "amount"
        ));
    }

    #[test]
    fn imputes_mean_and_mode() {
        let csv = "amount,color,class,sex\n1,red,good,male\n?,blue,bad,female\n5,,bad,female\n3,blue,good,male\n";
        let ds = load_csv_from_reader(csv.as_bytes(), &schema(Some(NaPolicy::ImputeModeMean))).unwrap();
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.value(1, 0), 3.0);
        // blue is the mode
        assert_eq!(ds.row(2), &[5.0, 1.0, 0.0]);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let csv = "amount,class,sex\n1,good,male\n";
        assert!(matches!(
            load_csv_from_reader(csv.as_bytes(), &schema(None)),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn zero_usable_rows() {
        let csv = "amount,color,class,sex\n1,red,,male\n";
        assert!(matches!(
            load_csv_from_reader(csv.as_bytes(), &schema(Some(NaPolicy::DropRow))),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn schema_rejects_overlapping_columns() {
        let mut s = schema(None);
        s.feature_columns.push(FeatureColumn::numeric("sex"));
        assert!(s.validate().is_err());
        let mut s = schema(None);
        s.protected_column = "class".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let csv = "amount,color,class,sex\n1.25,red,good,male\n-2e-3,blue,bad,female\n7,green,bad,male\n";
        let ds = load_csv_from_reader(csv.as_bytes(), &schema(None)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let again = load_csv_from_reader(buf.as_slice(), &ds.induced_schema()).unwrap();
        assert_eq!(again.x(), ds.x());
        assert_eq!(again.y(), ds.y());
        assert_eq!(again.a(), ds.a());
        assert_eq!(again.feature_names(), ds.feature_names());
    }
}
