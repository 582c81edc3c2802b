//! Agglomerative Ward clustering, Dunn validity and the constrained search
//! for the number of clusters.

mod ari;
mod dunn;
mod search;
mod ward;

use serde::{Deserialize, Serialize};

pub use ari::adjusted_rand_index;
pub use dunn::{dunn_index, dunn_index_with, DistanceMatrix};
pub use search::{
    centroids, enforce_min_size, min_size_threshold, search_optimal_clusters, search_with_tree, CandidateDiagnostics,
    ClusterSearchResult, SearchParams,
};
pub use ward::{cut_tree, ward_linkage, Merge, MergeTree};

/// Cluster index per row, with indices contiguous in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Relabels arbitrary cluster ids contiguously by order of first
    /// appearance.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Partition { labels, k: map.len() }
    }

    pub fn single(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == cluster).then_some(i))
            .collect()
    }
}
