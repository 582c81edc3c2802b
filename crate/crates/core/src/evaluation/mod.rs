//! Metrics, the shared training pipeline and the two evaluation protocols:
//! repeated 70/30 subject splits with per-typology robustness and
//! performance tests, and leave-one-subject-out comparison of the general,
//! M1 and M2 pipelines.

mod pipeline;
mod protocols;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::ClassLabel;
use crate::error::{Error, Result};

pub use pipeline::{derive_seed, prepare_cohort, train_system, PipelineConfig, PreparedCohort, TrainedSystem};
pub use protocols::{run_config1, run_config2};

/// Accuracy and F1 with fear as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
}

/// F1 is 0 whenever precision + recall is 0, including the case with no
/// positive truths and no positive predictions.
pub fn compute_metrics(predictions: &[ClassLabel], truths: &[ClassLabel]) -> Result<Metrics> {
    if predictions.len() != truths.len() || truths.is_empty() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if let Some(row) = truths.iter().position(|t| !t.is_known()) {
        return Err(Error::UnlabeledInTraining { row });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p == ClassLabel::Fear, t == ClassLabel::Fear) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / truths.len() as f64;
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Metrics { accuracy, f1 })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub accuracy: MeanStd,
    pub f1: MeanStd,
    /// Folds or subjects that contributed.
    pub count: usize,
}

impl MetricsSummary {
    pub fn of(values: &[Metrics]) -> Option<Self> {
        let acc: Vec<f64> = values.iter().map(|m| m.accuracy).collect();
        let f1: Vec<f64> = values.iter().map(|m| m.f1).collect();
        Some(MetricsSummary {
            accuracy: MeanStd::of(&acc)?,
            f1: MeanStd::of(&f1)?,
            count: values.len(),
        })
    }
}

/// Fraction of subjects routed to the same TC by both methods.
pub fn assignment_agreement(m1: &BTreeMap<String, usize>, m2: &BTreeMap<String, usize>) -> Result<f64> {
    if m1.len() != m2.len() || m1.keys().zip(m2.keys()).any(|(a, b)| a != b) {
        return Err(Error::SubjectSetMismatch);
    }
    if m1.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let same = m1.iter().filter(|(s, tc)| m2[*s] == **tc).count();
    Ok(same as f64 / m1.len() as f64)
}
