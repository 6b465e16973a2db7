//! Complete-linkage agglomeration over a [`CodMatrix`] and tree cuts.
//!
//! Node ids follow the usual convention: leaves are `0..m`, and the merge at
//! position `t` creates node `m + t`.

use serde::{Deserialize, Serialize};

use crate::cod::CodMatrix;
use crate::error::{CodError, Result};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Number of leaves under the new node.
    pub size: usize,
}

/// Merge tree with `m − 1` merges in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    /// Partition after applying the first `count` merges.
    fn partition_after(&self, count: usize) -> Partition {
        let m = self.leaves;
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        // Any leaf of a node identifies its union-find set.
        let mut rep: Vec<usize> = (0..m).collect();
        for merge in &self.merges[..count] {
            let (a, b) = (rep[merge.left], rep[merge.right]);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
            rep.push(a);
        }
        let labels: Vec<usize> = (0..m).map(|i| find(&mut parent, i)).collect();
        Partition::from_labels(&labels).expect("non-empty")
    }
}

/// Complete-linkage agglomeration.
///
/// Ties on the linkage value go to the pair whose cluster keys (minimum leaf
/// index) are lexicographically smallest.
pub fn agglomerate(codm: &CodMatrix) -> Dendrogram {
    let m = codm.dim();
    let mut dist = codm.matrix().clone();
    let mut active = vec![true; m];
    let mut node: Vec<usize> = (0..m).collect();
    let mut size = vec![1usize; m];
    let mut merges = Vec::with_capacity(m.saturating_sub(1));

    for step in 0..m.saturating_sub(1) {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for i in 0..m {
            if !active[i] {
                continue;
            }
            for j in i + 1..m {
                if active[j] && dist[(i, j)] < best.0 {
                    best = (dist[(i, j)], i, j);
                }
            }
        }
        let (height, i, j) = best;
        // Clusters keep their smallest leaf as key, so the union lives at slot i.
        for k in 0..m {
            if active[k] && k != i && k != j {
                let d = dist[(i, k)].max(dist[(j, k)]);
                dist[(i, k)] = d;
                dist[(k, i)] = d;
            }
        }
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge {
            left: node[i],
            right: node[j],
            height,
            size: size[i],
        });
        node[i] = m + step;
    }
    Dendrogram { leaves: m, merges }
}

/// Applies every merge with height `≤ alpha`.
pub fn cut_threshold(tree: &Dendrogram, alpha: f64) -> Result<Partition> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(CodError::arg(format!(
            "threshold must be finite and non-negative, got {alpha}"
        )));
    }
    let count = tree.merges.iter().take_while(|m| m.height <= alpha).count();
    Ok(tree.partition_after(count))
}

/// Stops after `m − k` merges, leaving `k` clusters.
pub fn cut_k(tree: &Dendrogram, k: usize) -> Result<Partition> {
    if k == 0 || k > tree.leaves {
        return Err(CodError::arg(format!(
            "cluster count must be in 1..={}, got {k}",
            tree.leaves
        )));
    }
    Ok(tree.partition_after(tree.leaves - k))
}
