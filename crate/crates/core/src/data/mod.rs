//! Encoded tabular datasets with a binary label and a binary protected
//! attribute.

mod folds;
mod schema;
mod synthetic;

pub use folds::{stratified_kfold, FoldPlan};
pub use schema::{load_csv, load_csv_from_reader, ColumnKind, DatasetSchema, FeatureColumn, NaPolicy};
pub use synthetic::synthetic_biased;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an encoded feature column came to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// Indicator column for `category` of the source column `group`.
    OneHot { group: String, category: String },
}

/// Per-cell row counts indexed as `counts[y][a]`.
pub type CellCounts = [[usize; 2]; 2];

/// Row indices of each (y, a) cell, indexed as `cells[y][a]`.
pub type CellIndices = [[Vec<usize>; 2]; 2];

/// An encoded dataset: an `n x d` feature matrix (row-major), binary
/// labels `y` (1 = favorable), binary protected indicators `a`
/// (1 = privileged) and positive instance weights `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n_features: usize,
    y: Vec<u8>,
    a: Vec<u8>,
    w: Vec<f64>,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
}

impl Dataset {
    /// Builds an all-numeric dataset with unit weights.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<u8>, a: Vec<u8>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Schema("ragged feature rows".into()));
        }
        let names = (0..d).map(|j| format!("x{}", j + 1)).collect::<Vec<_>>();
        let kinds = vec![FeatureKind::Numeric; d];
        let n = rows.len();
        Self::from_parts(rows.concat(), y, a, vec![1.0; n], names, kinds)
    }

    pub fn from_parts(
        x: Vec<f64>,
        y: Vec<u8>,
        a: Vec<u8>,
        w: Vec<f64>,
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
    ) -> Result<Self> {
        let n = y.len();
        let d = feature_names.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if feature_kinds.len() != d {
            return Err(Error::Schema(format!(
                "{} feature names but {} feature kinds",
                d,
                feature_kinds.len()
            )));
        }
        if a.len() != n || w.len() != n || x.len() != n * d {
            return Err(Error::Schema(format!(
                "row count mismatch: y={}, a={}, w={}, x={} values for d={}",
                n,
                a.len(),
                w.len(),
                x.len(),
                d
            )));
        }
        if y.iter().chain(a.iter()).any(|&v| v > 1) {
            return Err(Error::Schema("labels and protected indicators must be 0 or 1".into()));
        }
        if let Some(bad) = w.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Numeric(format!("instance weight {bad} is not positive and finite")));
        }
        Ok(Self {
            x,
            n_features: d,
            y,
            a,
            w,
            feature_names,
            feature_kinds,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.n_features + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics, and d == 0 datasets are legal
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows()).map(move |i| self.value(i, j))
    }

    /// The row-major feature matrix.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn a(&self) -> &[u8] {
        &self.a
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    /// Indices of numeric (non one-hot) feature columns.
    pub fn numeric_columns(&self) -> Vec<usize> {
        self.feature_kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| matches!(k, FeatureKind::Numeric))
            .map(|(j, _)| j)
            .collect()
    }

    /// Column indices of each one-hot group, in column order.
    pub fn one_hot_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (j, kind) in self.feature_kinds.iter().enumerate() {
            if let FeatureKind::OneHot { group, .. } = kind {
                match groups.iter_mut().find(|(g, _)| g == group) {
                    Some((_, cols)) => cols.push(j),
                    None => groups.push((group.clone(), vec![j])),
                }
            }
        }
        groups.into_iter().map(|(_, cols)| cols).collect()
    }

    pub fn cell_counts(&self) -> CellCounts {
        let mut counts = [[0usize; 2]; 2];
        for (&y, &a) in self.y.iter().zip(&self.a) {
            counts[y as usize][a as usize] += 1;
        }
        counts
    }

    pub fn cell_indices(&self) -> CellIndices {
        let mut cells: CellIndices = Default::default();
        for (i, (&y, &a)) in self.y.iter().zip(&self.a).enumerate() {
            cells[y as usize][a as usize].push(i);
        }
        cells
    }

    /// Row indices of each protected group, indexed by `a`.
    pub fn group_indices(&self) -> [Vec<usize>; 2] {
        let mut groups: [Vec<usize>; 2] = Default::default();
        for (i, &a) in self.a.iter().enumerate() {
            groups[a as usize].push(i);
        }
        groups
    }

    /// A new dataset made of the given rows, in the given order.
    /// Indices may repeat.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let d = self.n_features;
        let mut x = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            x.extend_from_slice(self.row(i));
        }
        Dataset::from_parts(
            x,
            indices.iter().map(|&i| self.y[i]).collect(),
            indices.iter().map(|&i| self.a[i]).collect(),
            indices.iter().map(|&i| self.w[i]).collect(),
            self.feature_names.clone(),
            self.feature_kinds.clone(),
        )
    }

    /// Appends rows given as (features, y, a, w).
    pub fn with_appended_rows(&self, rows: Vec<(Vec<f64>, u8, u8, f64)>) -> Result<Dataset> {
        let mut out = self.clone();
        for (features, y, a, w) in rows {
            if features.len() != self.n_features {
                return Err(Error::Shape {
                    expected: self.n_features,
                    got: features.len(),
                });
            }
            out.x.extend(features);
            out.y.push(y);
            out.a.push(a);
            out.w.push(w);
        }
        Dataset::from_parts(out.x, out.y, out.a, out.w, out.feature_names, out.feature_kinds)
    }

    /// Replaces the feature matrix, keeping labels, groups and weights.
    pub fn with_features(&self, x: Vec<f64>) -> Result<Dataset> {
        Dataset::from_parts(
            x,
            self.y.clone(),
            self.a.clone(),
            self.w.clone(),
            self.feature_names.clone(),
            self.feature_kinds.clone(),
        )
    }

    pub fn with_weights(&self, w: Vec<f64>) -> Result<Dataset> {
        Dataset::from_parts(
            self.x.clone(),
            self.y.clone(),
            self.a.clone(),
            w,
            self.feature_names.clone(),
            self.feature_kinds.clone(),
        )
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }
}
