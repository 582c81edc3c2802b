use super::Partition;
use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};

/// Condensed pairwise Euclidean distances (upper triangle, row-major).
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: &Matrix) -> Self {
        let n = points.nrows();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(euclidean(points.row(i), points.row(j)));
            }
        }
        DistanceMatrix { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Visits every unordered pair `i < j` with its distance.
    fn for_each_pair(&self, mut f: impl FnMut(usize, usize, f64)) {
        let mut idx = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                f(i, j, self.values[idx]);
                idx += 1;
            }
        }
    }
}

/// Dunn index: smallest distance between points of different clusters over
/// the largest cluster diameter.
pub fn dunn_index(points: &Matrix, p: &Partition) -> Result<f64> {
    if points.nrows() != p.len() {
        return Err(Error::LengthMismatch {
            left: points.nrows(),
            right: p.len(),
        });
    }
    dunn_index_with(&DistanceMatrix::new(points), p)
}

pub fn dunn_index_with(dist: &DistanceMatrix, p: &Partition) -> Result<f64> {
    if dist.len() != p.len() {
        return Err(Error::LengthMismatch {
            left: dist.len(),
            right: p.len(),
        });
    }
    if p.k() < 2 {
        return Err(Error::SingleCluster);
    }
    let labels = p.labels();
    let mut min_inter = f64::INFINITY;
    let mut max_diameter = 0.0f64;
    dist.for_each_pair(|i, j, d| {
        if labels[i] == labels[j] {
            max_diameter = max_diameter.max(d);
        } else {
            min_inter = min_inter.min(d);
        }
    });
    if max_diameter <= 0.0 {
        return Err(Error::DegenerateDiameter);
    }
    Ok(min_inter / max_diameter)
}
