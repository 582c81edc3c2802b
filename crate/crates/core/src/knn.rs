//! Cost-sensitive binary KNN and its cross-validated hyperparameter search.
//!
//! The misclassification cost multiplies the vote weight of fear neighbours:
//! a query is labelled fear iff `cost * w_fear >= w_non_fear`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ClassLabel, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::compute_metrics;
use crate::matrix::{euclidean, Matrix};

/// Misclassification cost used by default.
pub const DEFAULT_COST: f64 = 1.6;
/// Added to distances before inverting them.
pub const INVERSE_DISTANCE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k_neighbors: usize,
    pub misclassification_cost: f64,
    pub weighting: Weighting,
}

impl KnnConfig {
    pub fn new(k_neighbors: usize, misclassification_cost: f64, weighting: Weighting) -> Result<Self> {
        let c = KnnConfig {
            k_neighbors,
            misclassification_cost,
            weighting,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 || self.k_neighbors.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "k_neighbors must be odd and positive, got {}",
                self.k_neighbors
            )));
        }
        if !self.misclassification_cost.is_finite() || self.misclassification_cost < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "misclassification cost must be finite and >= 1, got {}",
                self.misclassification_cost
            )));
        }
        Ok(())
    }

    fn weight(&self, distance: f64) -> f64 {
        match self.weighting {
            Weighting::Uniform => 1.0,
            Weighting::InverseDistance => 1.0 / (distance + INVERSE_DISTANCE_EPS),
        }
    }

    /// Decides the label from neighbours sorted nearest first; only the first
    /// `k_neighbors` entries are used.
    pub fn decide(&self, neighbours: &[(f64, bool)]) -> ClassLabel {
        let (mut fear, mut non_fear) = (0.0, 0.0);
        for &(d, is_fear) in neighbours.iter().take(self.k_neighbors) {
            if is_fear {
                fear += self.weight(d);
            } else {
                non_fear += self.weight(d);
            }
        }
        if fear * self.misclassification_cost >= non_fear {
            ClassLabel::Fear
        } else {
            ClassLabel::NonFear
        }
    }
}

/// Grid of candidate configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnGrid {
    pub k_values: Vec<usize>,
    pub costs: Vec<f64>,
    pub weightings: Vec<Weighting>,
}

impl Default for KnnGrid {
    /// Odd `k` from 1 to 31, both weightings, cost fixed at 1.6.
    fn default() -> Self {
        KnnGrid {
            k_values: (1..=31).step_by(2).collect(),
            costs: vec![DEFAULT_COST],
            weightings: vec![Weighting::Uniform, Weighting::InverseDistance],
        }
    }
}

impl KnnGrid {
    /// Default grid with the cost swept over 1.0, 1.2, ..., 2.0.
    pub fn with_cost_sweep() -> Self {
        KnnGrid {
            costs: (0..=5).map(|i| 1.0 + 0.2 * i as f64).collect(),
            ..KnnGrid::default()
        }
    }

    pub fn configs(&self) -> Result<Vec<KnnConfig>> {
        let mut out = Vec::new();
        for &k in &self.k_values {
            for &cost in &self.costs {
                for &w in &self.weightings {
                    out.push(KnnConfig::new(k, cost, w)?);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("empty KNN grid".into()));
        }
        Ok(out)
    }
}

/// Feature rows with labels and the subject each row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub points: Matrix,
    pub labels: Vec<ClassLabel>,
    pub groups: Vec<usize>,
}

impl LabeledSet {
    /// Rows of `d` selected by `rows`; groups are dataset subject positions.
    pub fn from_rows(d: &Dataset, rows: &[usize]) -> Self {
        let obs = d.observations();
        let mut group_of = vec![0; d.len()];
        for (s, subject_rows) in d.subject_rows().iter().enumerate() {
            for &r in subject_rows {
                group_of[r] = s;
            }
        }
        let features: Vec<&[f64]> = rows.iter().map(|&r| obs[r].features.as_slice()).collect();
        let points = if features.is_empty() {
            Matrix::zeros(0, d.feature_count())
        } else {
            Matrix::from_rows(&features)
        };
        LabeledSet {
            points,
            labels: rows.iter().map(|&r| obs[r].label).collect(),
            groups: rows.iter().map(|&r| group_of[r]).collect(),
        }
    }

    pub fn from_dataset(d: &Dataset) -> Self {
        let rows: Vec<usize> = (0..d.len()).collect();
        LabeledSet::from_rows(d, &rows)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedKnn {
    points: Matrix,
    is_fear: Vec<bool>,
    config: KnnConfig,
}

pub fn fit_knn(train: &LabeledSet, config: KnnConfig) -> Result<TrainedKnn> {
    config.validate()?;
    if let Some(row) = train.labels.iter().position(|l| !l.is_known()) {
        return Err(Error::UnlabeledInTraining { row });
    }
    if train.len() < config.k_neighbors {
        return Err(Error::TooFewTrainingPoints {
            found: train.len(),
            k: config.k_neighbors,
        });
    }
    let fear = train.labels.iter().filter(|&&l| l == ClassLabel::Fear).count();
    if fear == 0 || fear == train.len() {
        return Err(Error::SingleClassTrainingSet);
    }
    Ok(TrainedKnn {
        points: train.points.clone(),
        is_fear: train.labels.iter().map(|&l| l == ClassLabel::Fear).collect(),
        config,
    })
}

/// The `k` nearest rows of `points` to `x`, as `(distance, index)` sorted by
/// distance and then index.
fn nearest(points: &Matrix, x: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = points.rows().enumerate().map(|(i, r)| (euclidean(r, x), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(all.len());
    if k < all.len() {
        all.select_nth_unstable_by(k, cmp);
        all.truncate(k);
    }
    all.sort_by(cmp);
    all
}

impl TrainedKnn {
    pub fn config(&self) -> &KnnConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.is_fear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_fear.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        predict_knn(self, x)
    }

    pub fn predict_many(&self, points: &Matrix) -> Result<Vec<ClassLabel>> {
        points.rows().map(|x| self.predict(x)).collect()
    }
}

pub fn predict_knn(model: &TrainedKnn, x: &[f64]) -> Result<ClassLabel> {
    if x.len() != model.points.ncols() {
        return Err(Error::DimensionMismatch {
            expected: model.points.ncols(),
            found: x.len(),
        });
    }
    let neighbours: Vec<(f64, bool)> = nearest(&model.points, x, model.config.k_neighbors)
        .into_iter()
        .map(|(d, i)| (d, model.is_fear[i]))
        .collect();
    Ok(model.config.decide(&neighbours))
}

/// Picks a configuration from a grid given an objective to maximize.
pub trait Optimizer: Sync {
    fn optimize(&self, grid: &[KnnConfig], objective: &mut dyn FnMut(&KnnConfig) -> f64) -> KnnConfig;
}

/// Exhaustive evaluation of every grid point. Ties go to fewer neighbours,
/// then lower cost, then uniform weighting.
#[derive(Debug, Clone, Copy, Default)]
pub struct GridSearch;

impl Optimizer for GridSearch {
    fn optimize(&self, grid: &[KnnConfig], objective: &mut dyn FnMut(&KnnConfig) -> f64) -> KnnConfig {
        let mut best: Option<(f64, KnnConfig)> = None;
        for c in grid {
            let score = objective(c);
            let better = match &best {
                None => true,
                Some((s, b)) => {
                    score > *s
                        || (score == *s
                            && (c.k_neighbors, c.misclassification_cost, c.weighting).partial_cmp(&(
                                b.k_neighbors,
                                b.misclassification_cost,
                                b.weighting,
                            )) == Some(std::cmp::Ordering::Less))
                }
            };
            if better {
                best = Some((score, *c));
            }
        }
        best.expect("grid is non-empty").1
    }
}

/// Deals rows into `folds` folds, shuffling within every (subject, label)
/// group so that each fold sees every subject and both classes in
/// proportion. Returns the fold index of each row.
pub fn stratified_folds(train: &LabeledSet, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys: Vec<(usize, i8)> = train
        .groups
        .iter()
        .zip(&train.labels)
        .map(|(&g, l)| (g, l.code()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let mut fold_of = vec![0; train.len()];
    let mut next = 0;
    for key in keys {
        let mut rows: Vec<usize> = (0..train.len())
            .filter(|&r| (train.groups[r], train.labels[r].code()) == key)
            .collect();
        rows.shuffle(&mut rng);
        for r in rows {
            fold_of[r] = next % folds;
            next += 1;
        }
    }
    fold_of
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub config: KnnConfig,
    pub mean_f1: Option<f64>,
}

/// Cross-validated selection of the configuration maximizing mean F1.
pub fn tune_knn(train: &LabeledSet, grid: &[KnnConfig], folds: usize, seed: u64) -> Result<KnnConfig> {
    Ok(tune_knn_with(train, grid, folds, seed, &GridSearch)?.config)
}

pub fn tune_knn_with(
    train: &LabeledSet,
    grid: &[KnnConfig],
    folds: usize,
    seed: u64,
    optimizer: &dyn Optimizer,
) -> Result<TuningOutcome> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty KNN grid".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 tuning folds, got {folds}"
        )));
    }
    for c in grid {
        c.validate()?;
    }
    if grid.len() == 1 {
        return Ok(TuningOutcome {
            config: grid[0],
            mean_f1: None,
        });
    }
    let fold_of = stratified_folds(train, folds, seed);
    let k_max = grid.iter().map(|c| c.k_neighbors).max().unwrap_or(1);

    // Nearest-neighbour lists are computed once per fold; every grid point
    // reuses them.
    struct FoldCache {
        truths: Vec<ClassLabel>,
        neighbours: Vec<Vec<(f64, bool)>>,
        train_len: usize,
    }
    let mut caches = Vec::with_capacity(folds);
    for f in 0..folds {
        let train_rows: Vec<usize> = (0..train.len()).filter(|&r| fold_of[r] != f).collect();
        let val_rows: Vec<usize> = (0..train.len()).filter(|&r| fold_of[r] == f).collect();
        if val_rows.is_empty() {
            continue;
        }
        let points = train.points.select_rows(&train_rows);
        let neighbours = val_rows
            .iter()
            .map(|&r| {
                nearest(&points, train.points.row(r), k_max)
                    .into_iter()
                    .map(|(d, i)| (d, train.labels[train_rows[i]] == ClassLabel::Fear))
                    .collect()
            })
            .collect();
        caches.push(FoldCache {
            truths: val_rows.iter().map(|&r| train.labels[r]).collect(),
            neighbours,
            train_len: train_rows.len(),
        });
    }

    let mut best_score = None;
    let mut objective = |c: &KnnConfig| -> f64 {
        let mut total = 0.0;
        for cache in &caches {
            if cache.train_len < c.k_neighbors {
                return f64::NEG_INFINITY;
            }
            let preds: Vec<ClassLabel> = cache.neighbours.iter().map(|n| c.decide(n)).collect();
            total += compute_metrics(&preds, &cache.truths).map(|m| m.f1).unwrap_or(0.0);
        }
        let score = total / caches.len().max(1) as f64;
        if best_score.is_none_or(|b| score > b) {
            best_score = Some(score);
        }
        score
    };
    let config = optimizer.optimize(grid, &mut objective);
    Ok(TuningOutcome {
        config,
        mean_f1: best_score.filter(|s| s.is_finite()),
    })
}
