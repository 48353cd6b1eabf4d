use serde::Serialize;

use crate::data::Dataset;
use crate::error::Result;

/// Per-column `x' = (x - shift) * factor` on the numeric columns of a
/// dataset. One-hot columns pass through.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineScaler {
    pub columns: Vec<usize>,
    pub shift: Vec<f64>,
    pub factor: Vec<f64>,
}

impl AffineScaler {
    /// Zero mean, unit population standard deviation. Constant columns map
    /// to zero.
    pub fn standard(ds: &Dataset) -> Self {
        let columns = ds.numeric_columns();
        let n = ds.n_rows() as f64;
        let mut shift = Vec::with_capacity(columns.len());
        let mut factor = Vec::with_capacity(columns.len());
        for &j in &columns {
            let mean = ds.column(j).sum::<f64>() / n;
            let var = ds.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            shift.push(mean);
            factor.push(if std > 0.0 { 1.0 / std } else { 0.0 });
        }
        Self { columns, shift, factor }
    }

    /// Maps the training range onto [0, 1]. Constant columns map to zero.
    pub fn min_max(ds: &Dataset) -> Self {
        let columns = ds.numeric_columns();
        let mut shift = Vec::with_capacity(columns.len());
        let mut factor = Vec::with_capacity(columns.len());
        for &j in &columns {
            let (lo, hi) = ds
                .column(j)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            shift.push(lo);
            factor.push(if hi > lo { 1.0 / (hi - lo) } else { 0.0 });
        }
        Self { columns, shift, factor }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let d = ds.n_features();
        let mut x = ds.x().to_vec();
        for row in x.chunks_mut(d.max(1)) {
            for ((&j, &s), &f) in self.columns.iter().zip(&self.shift).zip(&self.factor) {
                row[j] = (row[j] - s) * f;
            }
        }
        ds.with_features(x)
    }
}

/// The feature matrix with numeric columns z-scored on `ds` itself and
/// one-hot columns untouched. Used as the distance space for clustering
/// and matching.
pub(crate) fn distance_space(ds: &Dataset) -> Vec<f64> {
    AffineScaler::standard(ds)
        .apply(ds)
        .map(|scaled| scaled.x().to_vec())
        .unwrap_or_else(|_| ds.x().to_vec())
}

pub(crate) fn squared_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}
