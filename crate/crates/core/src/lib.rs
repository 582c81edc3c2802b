//! Cluster-personalized emotion classification.
//!
//! Subjects are grouped into reaction typologies from per-class profiles of
//! their feature windows, one cost-sensitive KNN is trained per typology,
//! and new subjects are enrolled either from labeled windows (profile
//! nearest-centroid) or from unlabeled windows (internal-cluster distance
//! sums).

pub mod assignment;
pub mod cluster;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod knn;
pub mod matrix;
pub mod preprocess;
pub mod profile;
pub mod report;
pub mod synth;

pub use assignment::{
    assign_profile_m1, assign_subject_m2, build_internal_clusters, fit_typologies, Assignment, IcParams,
    InternalClusterModel, ModelDocument, TypologyModel,
};
pub use cluster::{Partition, SearchParams};
pub use data::{load_dataset, ClassLabel, Dataset, LoadOptions, Observation};
pub use error::{Error, Result};
pub use evaluation::{run_config1, run_config2, Metrics, PipelineConfig};
pub use knn::{KnnConfig, KnnGrid, Weighting};
pub use matrix::Matrix;
pub use profile::{build_profiles, ProfileMatrix, SubjectProfile};
pub use report::{render_report, ExperimentReport, ReportStyle};
pub use synth::{generate_cohort, CohortSpec, GroundTruth};
