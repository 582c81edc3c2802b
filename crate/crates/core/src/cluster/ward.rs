use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::Partition;
use crate::error::{Error, Result};
use crate::matrix::{squared_euclidean, Matrix};

/// One agglomeration step. Leaves are nodes `0..n`; the node created by
/// step `s` has id `n + s`. `left < right` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Ward distance `sqrt(2 |A||B| / (|A|+|B|)) * ||c_A - c_B||`; equals
    /// the Euclidean distance when both sides are single points.
    pub cost: f64,
    pub node: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

/// Total order used to pick the next merge: cost, then lowest node-id pair.
fn key_cmp(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

/// Ward agglomeration over Euclidean points.
///
/// Distances are updated with the Lance-Williams recurrence on squared
/// Euclidean distances. Each active cluster caches its nearest neighbour, so
/// only rows whose neighbour was consumed by a merge need a full rescan.
pub fn ward_linkage(points: &Matrix) -> Result<MergeTree> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { found: n, needed: 2 });
    }
    for i in 0..n {
        if let Some(j) = points.row(i).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: i,
                column: format!("f{j}"),
                value: points.row(i)[j].to_string(),
            });
        }
    }

    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_euclidean(points.row(i), points.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut active = vec![true; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut size = vec![1usize; n];
    let mut nn = vec![usize::MAX; n];

    let key = |dist: &[f64], node: &[usize], a: usize, b: usize| {
        let (x, y) = (node[a], node[b]);
        (dist[a * n + b], x.min(y), x.max(y))
    };
    let rescan = |dist: &[f64], node: &[usize], active: &[bool], i: usize| -> usize {
        let mut best = usize::MAX;
        for (j, &alive) in active.iter().enumerate() {
            if j == i || !alive {
                continue;
            }
            if best == usize::MAX || key_cmp(key(dist, node, i, j), key(dist, node, i, best)) == Ordering::Less {
                best = j;
            }
        }
        best
    };

    for (i, slot) in nn.iter_mut().enumerate() {
        *slot = rescan(&dist, &node, &active, i);
    }

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..(n - 1) {
        let mut a = usize::MAX;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if a == usize::MAX || key_cmp(key(&dist, &node, i, nn[i]), key(&dist, &node, a, nn[a])) == Ordering::Less {
                a = i;
            }
        }
        let b = nn[a];
        let d_ab = dist[a * n + b];
        let (na, nb) = (size[a] as f64, size[b] as f64);
        merges.push(Merge {
            left: node[a].min(node[b]),
            right: node[a].max(node[b]),
            cost: d_ab.max(0.0).sqrt(),
            node: n + step,
            size: size[a] + size[b],
        });

        // Slot `a` becomes the merged cluster, slot `b` retires.
        active[b] = false;
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            let nk = size[k] as f64;
            let updated = ((na + nk) * dist[a * n + k] + (nb + nk) * dist[b * n + k] - nk * d_ab) / (na + nb + nk);
            dist[a * n + k] = updated;
            dist[k * n + a] = updated;
        }
        size[a] += size[b];
        node[a] = n + step;

        if step + 2 == n {
            break;
        }
        nn[a] = rescan(&dist, &node, &active, a);
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            if nn[k] == a || nn[k] == b {
                nn[k] = rescan(&dist, &node, &active, k);
            } else if key_cmp(key(&dist, &node, k, a), key(&dist, &node, k, nn[k])) == Ordering::Less {
                nn[k] = a;
            }
        }
    }

    Ok(MergeTree { leaves: n, merges })
}

/// Undoes the last `k - 1` merges; clusters are labelled by first row
/// occurrence.
pub fn cut_tree(tree: &MergeTree, k: usize) -> Result<Partition> {
    let n = tree.leaves;
    if k == 0 || k > n {
        return Err(Error::BadK { k, n });
    }
    let mut parent: Vec<usize> = (0..(2 * n).max(1)).collect();
    for m in &tree.merges[..n - k] {
        parent[m.left] = m.node;
        parent[m.right] = m.node;
    }
    let root = |mut x: usize| {
        while parent[x] != x {
            x = parent[x];
        }
        x
    };
    let raw: Vec<usize> = (0..n).map(root).collect();
    Ok(Partition::from_labels(&raw))
}
