//! Synthetic cohorts with planted reaction typologies.
//!
//! Each typology `t` has a base mean `b_t` and a fear-shift direction
//! `r_t = unit(g + b_t)` where `g` is a unit direction shared by every
//! typology. When `typology_count + 1 <= feature_count` the shared direction
//! and the typology directions are orthonormal, so every pair of base means
//! is exactly `typology_separation` apart; otherwise the typology directions
//! are independent random unit vectors scaled by `typology_separation / sqrt(2)`.
//! With `typology_separation = 0` all typologies react the same way. A
//! subject's non-fear windows are drawn around `b_t + offset` and fear
//! windows around `b_t + offset + class_separation_t * r_t`, with isotropic
//! Gaussian noise.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ClassLabel, Dataset, Observation};
use crate::error::{Error, Result};

/// Subject offsets are drawn with this std, relative to `noise_std`.
pub const SUBJECT_OFFSET_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub typology_count: usize,
    pub subjects_per_typology: usize,
    pub windows_per_class: usize,
    pub feature_count: usize,
    /// Distance between class means, one value per typology or a single
    /// value shared by all.
    pub class_separation: Vec<f64>,
    pub typology_separation: f64,
    pub noise_std: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            typology_count: 4,
            subjects_per_typology: 10,
            windows_per_class: 20,
            feature_count: 8,
            class_separation: vec![3.0],
            typology_separation: 3.0,
            noise_std: 1.0,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.typology_count == 0
            || self.subjects_per_typology == 0
            || self.windows_per_class == 0
            || self.feature_count == 0
        {
            return bad("all counts must be at least 1");
        }
        if self.class_separation.len() != 1 && self.class_separation.len() != self.typology_count {
            return bad("class_separation needs one value or one per typology");
        }
        if self
            .class_separation
            .iter()
            .chain([&self.typology_separation])
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return bad("separations must be finite and non-negative");
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad("noise_std must be positive");
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn class_separation_of(&self, typology: usize) -> f64 {
        if self.class_separation.len() == 1 {
            self.class_separation[0]
        } else {
            self.class_separation[typology]
        }
    }

    pub fn subject_count(&self) -> usize {
        self.typology_count * self.subjects_per_typology
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub typology_of: BTreeMap<String, usize>,
}

impl GroundTruth {
    /// Typology indices in the order of `subject_ids`.
    pub fn labels_for(&self, subject_ids: &[String]) -> Vec<usize> {
        subject_ids.iter().map(|s| self.typology_of[s]).collect()
    }
}

/// The class-conditional means the generator draws around.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortPlan {
    pub subject_ids: Vec<String>,
    pub typology_of: Vec<usize>,
    pub fear_means: Vec<Vec<f64>>,
    pub non_fear_means: Vec<Vec<f64>>,
}

fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `count` orthonormal vectors by Gram-Schmidt on Gaussian draws.
fn orthonormal(rng: &mut impl Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v = unit_vector(rng, dim);
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

pub fn subject_id(index: usize) -> String {
    format!("s{index:03}")
}

/// Draws typology geometry and subject offsets. Subject `i` belongs to
/// typology `i % typology_count`.
pub fn plan_cohort(spec: &CohortSpec) -> Result<CohortPlan> {
    spec.validate()?;
    let f = spec.feature_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let directions = if spec.typology_count < f {
        orthonormal(&mut rng, spec.typology_count + 1, f)
    } else {
        (0..=spec.typology_count).map(|_| unit_vector(&mut rng, f)).collect()
    };
    let shared = &directions[0];
    let scale = spec.typology_separation / std::f64::consts::SQRT_2;
    let mut bases = Vec::with_capacity(spec.typology_count);
    let mut shifts = Vec::with_capacity(spec.typology_count);
    for (t, u) in directions[1..].iter().enumerate() {
        let base: Vec<f64> = u.iter().map(|x| x * scale).collect();
        let mut dir: Vec<f64> = shared.iter().zip(&base).map(|(g, b)| g + b).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            dir.clone_from(shared);
        } else {
            dir.iter_mut().for_each(|x| *x /= norm);
        }
        let c = spec.class_separation_of(t);
        shifts.push(dir.into_iter().map(|x| x * c).collect::<Vec<_>>());
        bases.push(base);
    }

    let offset =
        Normal::new(0.0, SUBJECT_OFFSET_SCALE * spec.noise_std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let n = spec.subject_count();
    let mut plan = CohortPlan {
        subject_ids: Vec::with_capacity(n),
        typology_of: Vec::with_capacity(n),
        fear_means: Vec::with_capacity(n),
        non_fear_means: Vec::with_capacity(n),
    };
    for i in 0..n {
        let t = i % spec.typology_count;
        let non_fear: Vec<f64> = bases[t].iter().map(|b| b + offset.sample(&mut rng)).collect();
        let fear = non_fear.iter().zip(&shifts[t]).map(|(m, s)| m + s).collect();
        plan.subject_ids.push(subject_id(i));
        plan.typology_of.push(t);
        plan.fear_means.push(fear);
        plan.non_fear_means.push(non_fear);
    }
    Ok(plan)
}

/// Generates the cohort; fully determined by `spec.seed`.
///
/// Every subject gets `windows_per_class` fear windows followed by as many
/// non-fear windows. Label noise flips each label independently after the
/// features are drawn.
pub fn generate_cohort(spec: &CohortSpec) -> Result<(Dataset, GroundTruth)> {
    let plan = plan_cohort(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    let mut observations = Vec::with_capacity(plan.subject_ids.len() * 2 * spec.windows_per_class);
    for (s, id) in plan.subject_ids.iter().enumerate() {
        let classes = [
            (ClassLabel::Fear, &plan.fear_means[s]),
            (ClassLabel::NonFear, &plan.non_fear_means[s]),
        ];
        let mut window = 0u64;
        for (label, mean) in classes {
            for _ in 0..spec.windows_per_class {
                let features = mean.iter().map(|m| m + noise.sample(&mut rng)).collect();
                let flip = spec.label_noise > 0.0 && rng.random_bool(spec.label_noise);
                let label = match (flip, label) {
                    (false, l) => l,
                    (true, ClassLabel::Fear) => ClassLabel::NonFear,
                    (true, _) => ClassLabel::Fear,
                };
                observations.push(Observation {
                    subject_id: id.clone(),
                    window_id: window,
                    label,
                    features,
                });
                window += 1;
            }
        }
    }
    let truth = GroundTruth {
        typology_of: plan
            .subject_ids
            .iter()
            .cloned()
            .zip(plan.typology_of.iter().copied())
            .collect(),
    };
    Ok((Dataset::new(observations, spec.feature_count)?, truth))
}
