//! Typology clusters (TCs) over subject profiles, internal clusters (ICs)
//! over observations, and the two enrollment routes:
//!
//! * M1: a labeled subject's profile goes to the nearest TC centroid in
//!   standardized profile space.
//! * M2: an unlabeled subject goes to the TC whose ICs minimize the summed
//!   distance from each of the subject's windows to its nearest IC centroid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{centroids, cut_tree, search_with_tree, ward_linkage, ClusterSearchResult, SearchParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};
use crate::preprocess::{standardize_columns, ColumnStats};
use crate::profile::{ProfileMatrix, SubjectProfile};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypologyModel {
    pub k: usize,
    pub feature_count: usize,
    /// Centroids in standardized profile space, `4F` long each.
    pub tc_centroids: Vec<Vec<f64>>,
    pub profile_column_stats: ColumnStats,
    pub member_subjects: Vec<Vec<String>>,
    pub search: ClusterSearchResult,
}

impl TypologyModel {
    pub fn profile_width(&self) -> usize {
        self.profile_column_stats.len()
    }

    pub fn tc_of(&self, subject_id: &str) -> Option<usize> {
        self.member_subjects
            .iter()
            .position(|m| m.iter().any(|s| s == subject_id))
    }

    pub fn is_fallback(&self) -> bool {
        self.search.fallback
    }
}

/// Result of enrolling one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub tc: usize,
    /// Distance to every TC: centroid distance for M1, summed nearest-IC
    /// distance for M2.
    pub distances: Vec<f64>,
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Finds the typologies among training subjects: standardize profile
/// columns, run the Dunn-guided Ward search, and take centroids.
pub fn fit_typologies(profiles: &ProfileMatrix, params: &SearchParams) -> Result<TypologyModel> {
    if profiles.len() < 2 {
        return Err(Error::TooFewPoints {
            found: profiles.len(),
            needed: 2,
        });
    }
    let (standardized, stats) = standardize_columns(&profiles.to_matrix())?;
    let tree = ward_linkage(&standardized)?;
    let search = search_with_tree(&standardized, &tree, params)?;
    let partition = &search.partition;
    let member_subjects = (0..partition.k())
        .map(|c| {
            partition
                .members(c)
                .into_iter()
                .map(|i| profiles.rows[i].subject_id.clone())
                .collect()
        })
        .collect();
    Ok(TypologyModel {
        k: partition.k(),
        feature_count: profiles.feature_count,
        tc_centroids: centroids(&standardized, partition),
        profile_column_stats: stats,
        member_subjects,
        search,
    })
}

/// M1 enrollment; ties go to the lowest TC index.
pub fn assign_profile_m1(profile: &SubjectProfile, tm: &TypologyModel) -> Result<Assignment> {
    if profile.vector.len() != tm.profile_width() {
        return Err(Error::DimensionMismatch {
            expected: tm.profile_width(),
            found: profile.vector.len(),
        });
    }
    let z = tm.profile_column_stats.apply(&profile.vector);
    let distances: Vec<f64> = tm.tc_centroids.iter().map(|c| euclidean(&z, c)).collect();
    Ok(Assignment {
        tc: argmin(&distances),
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcParams {
    pub ic_min: usize,
    pub ic_max: usize,
    /// Minimum IC share of the TC's observations; 0 disables the rule.
    pub min_frac: f64,
}

impl Default for IcParams {
    fn default() -> Self {
        IcParams {
            ic_min: 4,
            ic_max: 6,
            min_frac: 0.15,
        }
    }
}

impl IcParams {
    /// Observations a TC needs: one per IC, or two per IC when the
    /// min-size rule is active so every IC can have a non-zero diameter.
    pub fn required_observations(&self) -> usize {
        if self.min_frac > 0.0 {
            2 * self.ic_min
        } else {
            self.ic_min
        }
    }

    fn search_params(&self) -> SearchParams {
        SearchParams {
            k_min: self.ic_min,
            k_max: self.ic_max,
            min_frac: self.min_frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcInternalClusters {
    /// IC centroids in Z-scored feature space.
    pub centroids: Vec<Vec<f64>>,
    pub observation_count: usize,
    pub dunn: Option<f64>,
    /// The search produced fewer than `ic_min` clusters and the plain
    /// `ic_min` cut was used instead.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalClusterModel {
    pub params: IcParams,
    pub feature_count: usize,
    pub tcs: Vec<TcInternalClusters>,
}

impl InternalClusterModel {
    pub fn ic_counts(&self) -> Vec<usize> {
        self.tcs.iter().map(|t| t.centroids.len()).collect()
    }
}

/// Clusters each TC's training observations (per-subject Z-scored) into
/// `ic_min..=ic_max` internal clusters with the same Dunn-guided search used
/// for typologies.
pub fn build_internal_clusters(d: &Dataset, tm: &TypologyModel, params: &IcParams) -> Result<InternalClusterModel> {
    if params.ic_min < 2 || params.ic_max < params.ic_min {
        return Err(Error::InvalidConfig(format!(
            "IC range [{}, {}] must satisfy 2 <= min <= max",
            params.ic_min, params.ic_max
        )));
    }
    let member_rows: Vec<Vec<usize>> = tm
        .member_subjects
        .iter()
        .map(|members| {
            members
                .iter()
                .filter_map(|s| d.subject_position(s))
                .flat_map(|i| d.subject_rows()[i].iter().copied())
                .collect()
        })
        .collect();
    for (tc, rows) in member_rows.iter().enumerate() {
        if rows.len() < params.required_observations() {
            return Err(Error::TooFewObservationsInTC {
                tc,
                found: rows.len(),
                needed: params.required_observations(),
            });
        }
    }
    let tcs = member_rows
        .par_iter()
        .map(|rows| internal_clusters_of(d, rows, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(InternalClusterModel {
        params: *params,
        feature_count: d.feature_count(),
        tcs,
    })
}

fn internal_clusters_of(d: &Dataset, rows: &[usize], params: &IcParams) -> Result<TcInternalClusters> {
    let obs = d.observations();
    let points = Matrix::from_rows(&rows.iter().map(|&r| obs[r].features.as_slice()).collect::<Vec<_>>());
    let tree = ward_linkage(&points)?;
    let search = search_with_tree(&points, &tree, &params.search_params())?;
    let (partition, forced, dunn) = if search.k_selected >= params.ic_min {
        (search.partition, false, search.dunn)
    } else {
        (cut_tree(&tree, params.ic_min)?, true, None)
    };
    Ok(TcInternalClusters {
        centroids: centroids(&points, &partition),
        observation_count: rows.len(),
        dunn,
        forced,
    })
}

/// M2 enrollment from unlabeled windows that were Z-scored with the
/// subject's own statistics. Ties go to the lowest TC index.
pub fn assign_subject_m2<R: AsRef<[f64]>>(observations: &[R], icm: &InternalClusterModel) -> Result<Assignment> {
    if observations.is_empty() {
        return Err(Error::EmptyObservations);
    }
    for o in observations {
        if o.as_ref().len() != icm.feature_count {
            return Err(Error::DimensionMismatch {
                expected: icm.feature_count,
                found: o.as_ref().len(),
            });
        }
    }
    let distances: Vec<f64> = icm
        .tcs
        .iter()
        .map(|tc| {
            observations
                .iter()
                .map(|o| {
                    tc.centroids
                        .iter()
                        .map(|c| euclidean(o.as_ref(), c))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum()
        })
        .collect();
    Ok(Assignment {
        tc: argmin(&distances),
        distances,
    })
}

/// Versioned on-disk form of a fitted personalization model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub typology: TypologyModel,
    pub internal: InternalClusterModel,
    /// Settings that produced the model, echoed verbatim.
    pub run_config: serde_json::Value,
}

impl ModelDocument {
    pub fn new(typology: TypologyModel, internal: InternalClusterModel, run_config: serde_json::Value) -> Self {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            typology,
            internal,
            run_config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: doc.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        Ok(doc)
    }
}
