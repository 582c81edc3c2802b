//! Per-subject Z-scoring of feature windows and column standardization of
//! profile matrices. All standard deviations are population (divide by n).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::matrix::{mean_std, Matrix};

/// Standard deviations below this are treated as constant columns.
pub const VARIANCE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ColumnStats {
    pub fn of_rows<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, cols: usize) -> Self {
        let (means, stds) = (0..cols).map(|j| mean_std(rows.clone().map(|r| r[j]))).unzip();
        ColumnStats { means, stds }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Standardizes one row; constant columns map to 0.
    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&m, &s))| if s < VARIANCE_GUARD { 0.0 } else { (x - m) / s })
            .collect()
    }

    pub fn apply_matrix(&self, m: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            out.row_mut(i).copy_from_slice(&self.apply(m.row(i)));
        }
        out
    }
}

pub type SubjectStats = BTreeMap<String, ColumnStats>;

/// Z-scores every subject's windows with that subject's own statistics.
///
/// Labels are ignored, so the same transform serves enrollment data. The
/// returned stats normalize future windows of the same subject.
pub fn zscore_per_subject(d: &Dataset) -> Result<(Dataset, SubjectStats)> {
    let f = d.feature_count();
    let obs = d.observations();
    let mut out: Vec<Observation> = obs.to_vec();
    let mut stats = SubjectStats::new();
    for (id, rows) in d.subject_ids().iter().zip(d.subject_rows()) {
        if rows.len() < 2 {
            return Err(Error::TooFewObservations {
                subject: id.clone(),
                found: rows.len(),
                needed: 2,
            });
        }
        let s = ColumnStats::of_rows(rows.iter().map(|&r| obs[r].features.as_slice()), f);
        for &r in rows {
            out[r].features = s.apply(&obs[r].features);
        }
        stats.insert(id.clone(), s);
    }
    Ok((Dataset::new(out, f)?, stats))
}

/// Standardizes each column to zero mean and unit population std.
pub fn standardize_columns(m: &Matrix) -> Result<(Matrix, ColumnStats)> {
    if m.nrows() < 2 {
        return Err(Error::TooFewRows {
            found: m.nrows(),
            needed: 2,
        });
    }
    let stats = ColumnStats::of_rows(m.rows(), m.ncols());
    Ok((stats.apply_matrix(m), stats))
}
