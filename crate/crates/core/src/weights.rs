//! Positive-semidefinite weight matrices `W = LLᵀ`, carried with their factor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CodError, Result};
use crate::partition::{Membership, Partition};

/// How a weight was constructed. Drives the fast paths in covariance
/// accumulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightKind {
    /// `I/d`.
    Identity,
    /// `B(BᵀB)⁻²Bᵀ/s` for an estimated membership with `s` clusters.
    Optimal { labels: Vec<usize>, clusters: usize },
    /// Anything else, supplied as an explicit factor.
    Custom,
}

/// A `d × d` PSD weight with factor `L` (`d × s`) such that `LLᵀ = W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    kind: WeightKind,
    factor: DMatrix<f64>,
    /// Multiplier applied on top of `kind` (1 unless rescaled).
    scale: f64,
}

impl Weight {
    /// Wraps an explicit factor.
    pub fn from_factor(factor: DMatrix<f64>) -> Result<Self> {
        if factor.nrows() == 0 || factor.ncols() == 0 {
            return Err(CodError::arg("weight factor must be non-empty"));
        }
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(CodError::arg("weight factor has non-finite entries"));
        }
        Ok(Weight {
            kind: WeightKind::Custom,
            factor,
            scale: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Number of columns of the factor.
    pub fn rank_bound(&self) -> usize {
        self.factor.ncols()
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Dense `W = LLᵀ`.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    /// `tW` for `t > 0`; the factor is rescaled by `√t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(CodError::arg("weight scale must be positive and finite"));
        }
        Ok(Weight {
            kind: self.kind.clone(),
            factor: &self.factor * t.sqrt(),
            scale: self.scale * t,
        })
    }

    /// Short human-readable tag, e.g. `identity` or `optimal(s=4)`.
    pub fn tag(&self) -> String {
        let base = match &self.kind {
            WeightKind::Identity => "identity".to_string(),
            WeightKind::Optimal { clusters, .. } => format!("optimal(s={clusters})"),
            WeightKind::Custom => "custom".to_string(),
        };
        if self.scale == 1.0 {
            base
        } else {
            format!("{}*{base}", self.scale)
        }
    }

    /// Computes `Y = Xᵀ·L` style products through the factor: given a matrix
    /// whose columns are indexed by the weight dimension, returns `M·L`.
    ///
    /// Identity and optimal weights skip the dense product: `L` has one
    /// nonzero per row for both.
    pub fn right_apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        debug_assert_eq!(m.ncols(), self.dim());
        match &self.kind {
            WeightKind::Identity => m * (self.scale.sqrt() / (self.dim() as f64).sqrt()),
            WeightKind::Optimal { labels, clusters } => {
                let mut out = DMatrix::zeros(m.nrows(), *clusters);
                let mut sizes = vec![0usize; *clusters];
                for (j, &t) in labels.iter().enumerate() {
                    let mut dst = out.column_mut(t);
                    dst += m.column(j);
                    sizes[t] += 1;
                }
                let root = (self.scale / *clusters as f64).sqrt();
                for (t, &size) in sizes.iter().enumerate() {
                    out.column_mut(t).scale_mut(root / size as f64);
                }
                out
            }
            WeightKind::Custom => m * &self.factor,
        }
    }
}

/// `W_I = I_d/d` with factor `I_d/√d`.
pub fn identity_weight(dim: usize) -> Result<Weight> {
    if dim == 0 {
        return Err(CodError::arg("weight dimension must be positive"));
    }
    Ok(Weight {
        kind: WeightKind::Identity,
        factor: DMatrix::identity(dim, dim) / (dim as f64).sqrt(),
        scale: 1.0,
    })
}

/// `Ŵ_O = B̂(B̂ᵀB̂)⁻²B̂ᵀ/s` with factor `L = B̂(B̂ᵀB̂)⁻¹/√s`.
pub fn optimal_weight(bhat: &Membership) -> Result<Weight> {
    let sizes = bhat.sizes();
    if sizes.contains(&0) {
        return Err(CodError::arg("membership has an empty cluster"));
    }
    // Relabeling only permutes the factor's columns, which leaves W unchanged.
    optimal_weight_from_partition(&bhat.to_partition())
}

/// Same as [`optimal_weight`] for a partition directly.
pub fn optimal_weight_from_partition(part: &Partition) -> Result<Weight> {
    let s = part.k();
    let sizes = part.sizes();
    let root_s = (s as f64).sqrt();
    let mut factor = DMatrix::zeros(part.len(), s);
    for (j, &t) in part.labels().iter().enumerate() {
        factor[(j, t)] = 1.0 / (sizes[t] as f64 * root_s);
    }
    Ok(Weight {
        kind: WeightKind::Optimal {
            labels: part.labels().to_vec(),
            clusters: s,
        },
        factor,
        scale: 1.0,
    })
}
