use serde::{Deserialize, Serialize};

use super::dunn::{dunn_index_with, DistanceMatrix};
use super::ward::{cut_tree, ward_linkage, MergeTree};
use super::Partition;
use crate::error::{Error, Result};
use crate::matrix::{squared_euclidean, Matrix};

/// Search bounds for the number of clusters and the minimum cluster share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub k_min: usize,
    pub k_max: usize,
    pub min_frac: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            k_min: 2,
            k_max: 10,
            min_frac: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDiagnostics {
    /// Cut level before the min-size rule.
    pub k: usize,
    /// Cluster count after the min-size rule.
    pub k_after_merge: usize,
    pub merges_applied: usize,
    pub dunn: Option<f64>,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSearchResult {
    pub partition: Partition,
    pub k_selected: usize,
    /// `None` only for the single-cluster fallback.
    pub dunn: Option<f64>,
    pub merges_applied: usize,
    pub fallback: bool,
    pub per_k_diagnostics: Vec<CandidateDiagnostics>,
}

/// Smallest admissible cluster size, `ceil(min_frac * n)`.
///
/// A small slack absorbs representation error, so that 0.15 * 100 gives 15
/// and not 16.
pub fn min_size_threshold(n: usize, min_frac: f64) -> usize {
    if min_frac <= 0.0 {
        return 0;
    }
    (min_frac * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Arithmetic mean of each cluster, ordered by cluster index.
pub fn centroids(points: &Matrix, p: &Partition) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; points.ncols()]; p.k()];
    let mut counts = vec![0usize; p.k()];
    for (row, &l) in points.rows().zip(p.labels()) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(row) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            for v in s.iter_mut() {
                *v /= c as f64;
            }
        }
    }
    sums
}

/// Merges undersized clusters into the cluster with the nearest centroid,
/// smallest offender first, until every cluster reaches
/// `ceil(min_frac * n)` points or only one cluster remains.
pub fn enforce_min_size(points: &Matrix, p: &Partition, min_frac: f64) -> Partition {
    enforce_counting(points, p, min_frac).0
}

fn enforce_counting(points: &Matrix, p: &Partition, min_frac: f64) -> (Partition, usize) {
    let threshold = min_size_threshold(p.len(), min_frac);
    let mut current = p.clone();
    let mut merges = 0;
    while current.k() > 1 {
        let sizes = current.sizes();
        let Some(small) = (0..current.k())
            .filter(|&c| sizes[c] < threshold)
            .min_by_key(|&c| (sizes[c], c))
        else {
            break;
        };
        let cents = centroids(points, &current);
        let target = (0..current.k())
            .filter(|&c| c != small)
            .min_by(|&a, &b| {
                squared_euclidean(&cents[small], &cents[a])
                    .total_cmp(&squared_euclidean(&cents[small], &cents[b]))
                    .then(a.cmp(&b))
            })
            .expect("at least two clusters");
        let raw: Vec<usize> = current
            .labels()
            .iter()
            .map(|&l| if l == small { target } else { l })
            .collect();
        current = Partition::from_labels(&raw);
        merges += 1;
    }
    (current, merges)
}

/// Cuts the Ward tree at every `k` in range, applies the min-size rule and
/// keeps the candidate with the highest Dunn index. Ties go to the smaller
/// cluster count. When no candidate keeps at least two clusters with a
/// defined Dunn index, the single-cluster partition is returned with
/// `fallback` set.
pub fn search_optimal_clusters(points: &Matrix, params: &SearchParams) -> Result<ClusterSearchResult> {
    let tree = ward_linkage(points)?;
    search_with_tree(points, &tree, params)
}

pub fn search_with_tree(points: &Matrix, tree: &MergeTree, params: &SearchParams) -> Result<ClusterSearchResult> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { found: n, needed: 2 });
    }
    if params.k_min < 2 || params.k_max < params.k_min {
        return Err(Error::InvalidConfig(format!(
            "cluster range [{}, {}] must satisfy 2 <= k_min <= k_max",
            params.k_min, params.k_max
        )));
    }
    let dist = DistanceMatrix::new(points);
    let mut diagnostics = Vec::new();
    let mut best: Option<(f64, Partition, usize)> = None;
    for k in params.k_min..=params.k_max.min(n) {
        let cut = cut_tree(tree, k)?;
        let (merged, merges_applied) = enforce_counting(points, &cut, params.min_frac);
        let dunn = if merged.k() >= 2 {
            dunn_index_with(&dist, &merged).ok()
        } else {
            None
        };
        diagnostics.push(CandidateDiagnostics {
            k,
            k_after_merge: merged.k(),
            merges_applied,
            dunn,
            valid: dunn.is_some(),
        });
        if let Some(d) = dunn {
            let better = match &best {
                None => true,
                Some((bd, bp, _)) => d > *bd || (d == *bd && merged.k() < bp.k()),
            };
            if better {
                best = Some((d, merged, merges_applied));
            }
        }
    }
    Ok(match best {
        Some((d, partition, merges_applied)) => ClusterSearchResult {
            k_selected: partition.k(),
            partition,
            dunn: Some(d),
            merges_applied,
            fallback: false,
            per_k_diagnostics: diagnostics,
        },
        None => ClusterSearchResult {
            partition: Partition::single(n),
            k_selected: 1,
            dunn: None,
            merges_applied: 0,
            fallback: true,
            per_k_diagnostics: diagnostics,
        },
    })
}
