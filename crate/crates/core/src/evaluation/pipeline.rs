use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{build_internal_clusters, fit_typologies, IcParams, InternalClusterModel, TypologyModel};
use crate::cluster::SearchParams;
use crate::data::{exclude_flagged, validate_dataset, ClassLabel, Dataset, DEFAULT_MIN_PER_CLASS};
use crate::error::{Error, Result};
use crate::knn::{fit_knn, tune_knn, KnnGrid, LabeledSet, TrainedKnn};
use crate::preprocess::{zscore_per_subject, SubjectStats};
use crate::profile::{build_profiles, ProfileMatrix};

/// Every tunable of the training and evaluation pipeline. Serialized into
/// each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub typology: SearchParams,
    pub internal: IcParams,
    pub knn_grid: KnnGrid,
    pub tuning_folds: usize,
    pub folds: usize,
    pub train_frac: f64,
    pub min_per_class: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            typology: SearchParams::default(),
            internal: IcParams::default(),
            knn_grid: KnnGrid::default(),
            tuning_folds: 5,
            folds: 20,
            train_frac: 0.7,
            min_per_class: DEFAULT_MIN_PER_CLASS,
        }
    }
}

/// Independent seed for one stream of randomness (a fold, a tuning run).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// A cohort ready for the protocols: flagged subjects removed, windows
/// Z-scored per subject, and one profile per remaining subject. Profile row
/// `i` belongs to subject `data.subject_ids()[i]`.
#[derive(Debug, Clone)]
pub struct PreparedCohort {
    pub data: Dataset,
    pub stats: SubjectStats,
    pub profiles: ProfileMatrix,
    pub excluded: Vec<String>,
}

impl PreparedCohort {
    pub fn subject_count(&self) -> usize {
        self.data.subject_count()
    }

    pub fn rows_of(&self, subjects: &[usize]) -> Vec<usize> {
        subjects
            .iter()
            .flat_map(|&s| self.data.subject_rows()[s].iter().copied())
            .collect()
    }

    pub fn labels_of(&self, subject: usize) -> Vec<ClassLabel> {
        self.data.subject_rows()[subject]
            .iter()
            .map(|&r| self.data.observations()[r].label)
            .collect()
    }

    pub fn windows_of(&self, subject: usize) -> Vec<&[f64]> {
        self.data.subject_rows()[subject]
            .iter()
            .map(|&r| self.data.observations()[r].features.as_slice())
            .collect()
    }
}

pub fn prepare_cohort(raw: &Dataset, min_per_class: usize) -> Result<PreparedCohort> {
    if let Some(row) = raw.observations().iter().position(|o| !o.label.is_known()) {
        return Err(Error::UnlabeledInTraining { row: row + 1 });
    }
    let report = validate_dataset(raw, min_per_class.max(1));
    let kept = exclude_flagged(raw, &report)?;
    let (data, stats) = zscore_per_subject(&kept)?;
    let profiles = build_profiles(&data)?;
    Ok(PreparedCohort {
        data,
        stats,
        profiles,
        excluded: report.flagged,
    })
}

/// Everything fitted on one training partition.
#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub typology: TypologyModel,
    pub internal: InternalClusterModel,
    pub tc_models: Vec<TrainedKnn>,
    pub baseline: TrainedKnn,
}

const TC_MODEL_STREAM: u64 = 1 << 32;
const BASELINE_STREAM: u64 = 2 << 32;

fn tuned_model(cohort: &PreparedCohort, subjects: &[usize], config: &PipelineConfig, seed: u64) -> Result<TrainedKnn> {
    let train = LabeledSet::from_rows(&cohort.data, &cohort.rows_of(subjects));
    let grid = config.knn_grid.configs()?;
    let chosen = tune_knn(&train, &grid, config.tuning_folds, seed)?;
    fit_knn(&train, chosen)
}

/// Fits typologies, one tuned KNN per typology, the general baseline KNN
/// and the internal clusters, using only `train_subjects`.
pub fn train_system(
    cohort: &PreparedCohort,
    train_subjects: &[usize],
    config: &PipelineConfig,
    seed: u64,
) -> Result<TrainedSystem> {
    let profiles = ProfileMatrix {
        rows: train_subjects
            .iter()
            .map(|&s| cohort.profiles.rows[s].clone())
            .collect(),
        feature_count: cohort.profiles.feature_count,
    };
    let typology = fit_typologies(&profiles, &config.typology)?;
    let tc_models = typology
        .member_subjects
        .iter()
        .enumerate()
        .map(|(tc, members)| {
            let positions: Vec<usize> = members
                .iter()
                .map(|id| cohort.data.subject_position(id).expect("member of cohort"))
                .collect();
            tuned_model(
                cohort,
                &positions,
                config,
                derive_seed(seed, TC_MODEL_STREAM + tc as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let baseline = tuned_model(cohort, train_subjects, config, derive_seed(seed, BASELINE_STREAM))?;
    let train_data = cohort.data.retain_subjects(|id| typology.tc_of(id).is_some())?;
    let internal = build_internal_clusters(&train_data, &typology, &config.internal)?;
    Ok(TrainedSystem {
        typology,
        internal,
        tc_models,
        baseline,
    })
}
