//! Covariance-difference dissimilarity between variables.

use nalgebra::DMatrix;

use crate::error::{CodError, Result};
use crate::partition::Partition;

/// Symmetric, non-negative dissimilarity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CodMatrix {
    values: DMatrix<f64>,
}

impl CodMatrix {
    /// Wraps an arbitrary dissimilarity matrix after validating it.
    pub fn from_dissimilarities(values: DMatrix<f64>) -> Result<Self> {
        let m = values.nrows();
        if m == 0 || values.ncols() != m {
            return Err(CodError::arg("dissimilarities must be a non-empty square matrix"));
        }
        for a in 0..m {
            if values[(a, a)] != 0.0 {
                return Err(CodError::arg(format!("diagonal entry {a} is not zero")));
            }
            for b in 0..a {
                let v = values[(a, b)];
                if !v.is_finite() || v < 0.0 {
                    return Err(CodError::arg(format!(
                        "entry ({a}, {b}) must be finite and non-negative"
                    )));
                }
                if v != values[(b, a)] {
                    return Err(CodError::arg(format!("entry ({a}, {b}) is not symmetric")));
                }
            }
        }
        Ok(CodMatrix { values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[(a, b)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Strict upper-triangle entries in row-major order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m * (m - 1) / 2);
        for a in 0..m {
            for b in a + 1..m {
                out.push(self.values[(a, b)]);
            }
        }
        out
    }
}

/// `COD(a, b) = max_{c ≠ a, b} |Σ_ac − Σ_bc|` for every pair.
pub fn cod_matrix(sigma: &DMatrix<f64>) -> Result<CodMatrix> {
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(CodError::arg("covariance must be square"));
    }
    if p < 3 {
        return Err(CodError::arg(format!("COD needs at least 3 variables, got {p}")));
    }
    for a in 0..p {
        for b in 0..a {
            let (x, y) = (sigma[(a, b)], sigma[(b, a)]);
            if !x.is_finite() || (x - y).abs() > 1e-8 {
                return Err(CodError::arg(format!("covariance is not symmetric at ({a}, {b})")));
            }
        }
    }
    let mut values = DMatrix::zeros(p, p);
    for a in 0..p {
        let col_a = sigma.column(a);
        for b in a + 1..p {
            let col_b = sigma.column(b);
            let mut best = 0.0f64;
            for c in 0..p {
                if c != a && c != b {
                    best = best.max((col_a[c] - col_b[c]).abs());
                }
            }
            values[(a, b)] = best;
            values[(b, a)] = best;
        }
    }
    Ok(CodMatrix { values })
}

/// Minimum dissimilarity over pairs lying in different clusters.
pub fn mcod(codm: &CodMatrix, part: &Partition) -> Result<f64> {
    if part.len() != codm.dim() {
        return Err(CodError::arg(format!(
            "partition has {} elements, dissimilarities have {}",
            part.len(),
            codm.dim()
        )));
    }
    if part.k() < 2 {
        return Err(CodError::arg("MCOD needs at least two clusters"));
    }
    let m = codm.dim();
    let mut best = f64::INFINITY;
    for a in 0..m {
        for b in a + 1..m {
            if !part.same_cluster(a, b) {
                best = best.min(codm.get(a, b));
            }
        }
    }
    Ok(best)
}
