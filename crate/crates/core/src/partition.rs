//! Hard partitions of `0..m` and their binary membership-matrix view.
//!
//! A [`Partition`] is always stored in canonical form: clusters are numbered
//! by first appearance, so `labels[0] == 0` and every new id is one more than
//! the largest id seen so far. Two partitions that differ only by a label
//! permutation therefore compare equal.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CodError, Result};

/// Exhaustive, non-overlapping assignment of `m` indices to `k` clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Canonicalizes arbitrary cluster ids by order of first appearance.
    pub fn from_labels<T: Hash + Eq + Clone>(labels: &[T]) -> Result<Self> {
        if labels.is_empty() {
            return Err(CodError::arg("partition labels must be non-empty"));
        }
        let mut seen: HashMap<T, usize> = HashMap::with_capacity(labels.len());
        let mut canonical = Vec::with_capacity(labels.len());
        for label in labels {
            let next = seen.len();
            let id = *seen.entry(label.clone()).or_insert(next);
            canonical.push(id);
        }
        Ok(Partition {
            k: seen.len(),
            labels: canonical,
        })
    }

    /// Every index in its own cluster.
    pub fn singletons(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(CodError::arg("partition size must be positive"));
        }
        Ok(Partition {
            labels: (0..m).collect(),
            k: m,
        })
    }

    /// All `m` indices in one cluster.
    pub fn single_cluster(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(CodError::arg("partition size must be positive"));
        }
        Ok(Partition {
            labels: vec![0; m],
            k: 1,
        })
    }

    /// Contiguous blocks with the given sizes, in order.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(CodError::arg("cluster sizes must be non-empty and positive"));
        }
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat(k).take(s))
            .collect();
        Ok(Partition { labels, k: sizes.len() })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of indices being partitioned.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    /// Cluster sizes indexed by cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Member indices of each cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn same_cluster(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.len() != coarser.len() {
            return false;
        }
        let mut parent: Vec<Option<usize>> = vec![None; self.k];
        for (&fine, &coarse) in self.labels.iter().zip(coarser.labels()) {
            match parent[fine] {
                None => parent[fine] = Some(coarse),
                Some(c) if c != coarse => return false,
                _ => {}
            }
        }
        true
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = CodError;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Partition::from_labels(&labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

/// Binary `m × k` membership matrix with exactly one 1 per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    matrix: DMatrix<f64>,
}

impl Membership {
    /// Validates a 0/1 matrix: one 1 per row, at least one 1 per column.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(CodError::arg("membership matrix must be non-empty"));
        }
        for (i, row) in matrix.row_iter().enumerate() {
            if row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(CodError::arg(format!("membership row {i} is not binary")));
            }
            if row.sum() != 1.0 {
                return Err(CodError::arg(format!("membership row {i} must contain exactly one 1")));
            }
        }
        for (j, col) in matrix.column_iter().enumerate() {
            if col.sum() < 1.0 {
                return Err(CodError::arg(format!("membership column {j} is empty")));
            }
        }
        Ok(Membership { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Number of indices (rows of the matrix).
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// Number of clusters (columns of the matrix).
    pub fn k(&self) -> usize {
        self.matrix.ncols()
    }

    /// Column sums.
    pub fn sizes(&self) -> Vec<usize> {
        self.matrix.column_iter().map(|c| c.sum() as usize).collect()
    }

    pub fn to_partition(&self) -> Partition {
        let labels: Vec<usize> = self
            .matrix
            .row_iter()
            .map(|row| row.iter().position(|&v| v == 1.0).expect("validated row"))
            .collect();
        Partition::from_labels(&labels).expect("validated non-empty")
    }
}

impl From<&Partition> for Membership {
    fn from(part: &Partition) -> Self {
        membership_matrix(part)
    }
}

/// `m × k` binary matrix with `matrix[a][labels[a]] = 1`.
pub fn membership_matrix(part: &Partition) -> Membership {
    let mut matrix = DMatrix::zeros(part.len(), part.k());
    for (a, &l) in part.labels().iter().enumerate() {
        matrix[(a, l)] = 1.0;
    }
    Membership { matrix }
}

/// Convenience wrapper around [`Partition::from_labels`].
pub fn partition_from_labels<T: Hash + Eq + Clone>(labels: &[T]) -> Result<Partition> {
    Partition::from_labels(labels)
}
