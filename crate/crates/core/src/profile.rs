//! Subject profiles: one row per subject holding class-conditional feature
//! means and standard deviations.
//!
//! Row layout for `F` features is `[mean_fear, std_fear, mean_non_fear,
//! std_non_fear]`, each segment `F` long, so a profile has `4F` entries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{ClassLabel, Dataset, Observation};
use crate::error::{Error, Result};
use crate::matrix::{mean_std, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMatrix {
    pub rows: Vec<SubjectProfile>,
    pub feature_count: usize,
}

impl ProfileMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Profile width, `4F`.
    pub fn width(&self) -> usize {
        4 * self.feature_count
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.subject_id.clone()).collect()
    }

    pub fn to_matrix(&self) -> Matrix {
        if self.rows.is_empty() {
            return Matrix::zeros(0, self.width());
        }
        Matrix::from_rows(&self.rows.iter().map(|r| r.vector.as_slice()).collect::<Vec<_>>())
    }

    pub fn get(&self, subject_id: &str) -> Option<&SubjectProfile> {
        self.rows.iter().find(|r| r.subject_id == subject_id)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let f = self.feature_count;
        let mut header = vec!["subject_id".to_string()];
        for seg in ["mean_fear", "std_fear", "mean_non_fear", "std_non_fear"] {
            header.extend((0..f).map(|j| format!("{seg}_f{j}")));
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.subject_id.clone()];
            record.extend(row.vector.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Profile of a single subject's labeled windows.
pub fn subject_profile<'a>(
    subject_id: &str,
    observations: impl IntoIterator<Item = &'a Observation>,
    feature_count: usize,
) -> Result<SubjectProfile> {
    let mut fear = Vec::new();
    let mut non_fear = Vec::new();
    for o in observations {
        match o.label {
            ClassLabel::Fear => fear.push(o),
            ClassLabel::NonFear => non_fear.push(o),
            ClassLabel::Unknown => {}
        }
    }
    let mut vector = Vec::with_capacity(4 * feature_count);
    for (class, members) in [("fear", &fear), ("non_fear", &non_fear)] {
        if members.is_empty() {
            return Err(Error::MissingClass {
                subject: subject_id.to_string(),
                class,
            });
        }
        let (means, stds): (Vec<f64>, Vec<f64>) = (0..feature_count)
            .map(|j| mean_std(members.iter().map(|o| o.features[j])))
            .unzip();
        vector.extend(means);
        vector.extend(stds);
    }
    Ok(SubjectProfile {
        subject_id: subject_id.to_string(),
        vector,
    })
}

/// Builds one profile row per subject, in dataset subject order.
///
/// Expects per-subject Z-scored input with both classes present for every
/// subject; flagged subjects must already have been excluded.
pub fn build_profiles(d: &Dataset) -> Result<ProfileMatrix> {
    let f = d.feature_count();
    let rows = d
        .subject_ids()
        .iter()
        .zip(d.subject_rows())
        .map(|(id, rows)| subject_profile(id, rows.iter().map(|&r| &d.observations()[r]), f))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProfileMatrix { rows, feature_count: f })
}
