//! Sample weighted covariance `(1/|S|) Σ X W Xᵀ`, accumulated through the
//! weight factor.

use nalgebra::DMatrix;

use crate::data::{Axis, DataSet};
use crate::error::{CodError, Result};
use crate::weights::Weight;

/// Weighted second-moment matrix of the rows (`X W Xᵀ`) or columns
/// (`Xᵀ W X`) averaged over `subset` (all samples when `None`).
///
/// The weight dimension must be `q` for rows and `p` for columns. The result
/// is symmetrized after accumulation.
pub fn sample_weighted_covariance(
    data: &DataSet,
    w: &Weight,
    axis: Axis,
    subset: Option<&[usize]>,
) -> Result<DMatrix<f64>> {
    let (dim, inner) = match axis {
        Axis::Rows => (data.p(), data.q()),
        Axis::Columns => (data.q(), data.p()),
    };
    if w.dim() != inner {
        return Err(CodError::arg(format!(
            "weight has dimension {}, expected {inner} for {} clustering",
            w.dim(),
            axis.name()
        )));
    }
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => {
            if s.is_empty() {
                return Err(CodError::arg("sample subset must be non-empty"));
            }
            if let Some(&bad) = s.iter().find(|&&i| i >= data.n()) {
                return Err(CodError::arg(format!(
                    "sample index {bad} out of range for n = {}",
                    data.n()
                )));
            }
            s
        }
        None => {
            all = (0..data.n()).collect();
            &all
        }
    };

    // Stack Y⁽ⁱ⁾ = X⁽ⁱ⁾L side by side so the sum of Y Yᵀ is one product.
    let s = w.rank_bound();
    let mut stacked = DMatrix::zeros(dim, s * idx.len());
    for (slot, &i) in idx.iter().enumerate() {
        let x = data.sample(i);
        let y = match axis {
            Axis::Rows => w.right_apply(x),
            Axis::Columns => w.right_apply(&x.transpose()),
        };
        stacked.columns_mut(slot * s, s).copy_from(&y);
    }
    let mut sigma = &stacked * stacked.transpose();
    sigma /= idx.len() as f64;
    Ok(symmetrize(sigma))
}

/// `(S + Sᵀ)/2`.
pub fn symmetrize(s: DMatrix<f64>) -> DMatrix<f64> {
    let t = s.transpose();
    (s + t) * 0.5
}
