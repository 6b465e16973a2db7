//! Three-way arrays, mode-k unfolding, and identity-weight clustering of
//! each mode.
//!
//! Entries are stored row-major: element `(j, p, q)` of a `J × P × Q` array
//! sits at `(j·P + p)·Q + q`. The mode-k unfolding puts mode k on the rows and
//! orders the columns with the earlier remaining mode varying fastest.

use nalgebra::DMatrix;

use crate::cod::cod_matrix;
use crate::covariance::symmetrize;
use crate::data::{Axis, DataSet};
use crate::error::{CodError, Result};
use crate::hclust::{agglomerate, cut_k, cut_threshold};
use crate::partition::Partition;
use crate::pipeline::StopRule;
use crate::tuning::select_alpha;
use crate::weights::identity_weight;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    values: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(CodError::arg("tensor dimensions must be positive"));
        }
        if values.len() != dims.iter().product::<usize>() {
            return Err(CodError::arg(format!(
                "tensor of shape {dims:?} needs {} values, got {}",
                dims.iter().product::<usize>(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CodError::arg("tensor has non-finite entries"));
        }
        Ok(Tensor3 { dims, values })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(dims.iter().product());
        for j in 0..dims[0] {
            for p in 0..dims[1] {
                for q in 0..dims[2] {
                    values.push(f(j, p, q));
                }
            }
        }
        Tensor3 { dims, values }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn get(&self, j: usize, p: usize, q: usize) -> f64 {
        self.values[(j * self.dims[1] + p) * self.dims[2] + q]
    }

    /// Row-major entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if !(1..=3).contains(&mode) {
        return Err(CodError::arg(format!("mode must be 1, 2 or 3, got {mode}")));
    }
    Ok(())
}

/// Maps `(j, p, q)` to its (row, column) position in the mode-`mode` unfolding.
fn unfold_index(dims: [usize; 3], mode: usize, j: usize, p: usize, q: usize) -> (usize, usize) {
    let [nj, np, _] = dims;
    match mode {
        1 => (j, p + np * q),
        2 => (p, j + nj * q),
        _ => (q, j + nj * p),
    }
}

/// Mode-`mode` unfolding (`mode` in 1..=3).
pub fn matricize(x: &Tensor3, mode: usize) -> Result<DMatrix<f64>> {
    check_mode(mode)?;
    let [nj, np, nq] = x.dims;
    let (rows, cols) = match mode {
        1 => (nj, np * nq),
        2 => (np, nj * nq),
        _ => (nq, nj * np),
    };
    let mut out = DMatrix::zeros(rows, cols);
    for j in 0..nj {
        for p in 0..np {
            for q in 0..nq {
                let (r, c) = unfold_index(x.dims, mode, j, p, q);
                out[(r, c)] = x.get(j, p, q);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`matricize`].
pub fn fold(m: &DMatrix<f64>, mode: usize, dims: [usize; 3]) -> Result<Tensor3> {
    check_mode(mode)?;
    let expected = match mode {
        1 => (dims[0], dims[1] * dims[2]),
        2 => (dims[1], dims[0] * dims[2]),
        _ => (dims[2], dims[0] * dims[1]),
    };
    if m.shape() != expected {
        return Err(CodError::arg(format!(
            "unfolding has shape {:?}, expected {expected:?}",
            m.shape()
        )));
    }
    Tensor3::new(
        dims,
        Tensor3::from_fn(dims, |j, p, q| {
            let (r, c) = unfold_index(dims, mode, j, p, q);
            m[(r, c)]
        })
        .values,
    )
}

/// `n` samples of a `J × P × Q` array.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDataSet {
    dims: [usize; 3],
    samples: Vec<Tensor3>,
}

impl TensorDataSet {
    pub fn new(samples: Vec<Tensor3>) -> Result<Self> {
        let dims = samples
            .first()
            .ok_or_else(|| CodError::arg("a data set needs at least one sample"))?
            .dims;
        if let Some(i) = samples.iter().position(|s| s.dims != dims) {
            return Err(CodError::arg(format!("sample {i} has a different shape")));
        }
        Ok(TensorDataSet { dims, samples })
    }

    pub fn from_row_major(dims: [usize; 3], rows: &[Vec<f64>]) -> Result<Self> {
        TensorDataSet::new(
            rows.iter()
                .map(|r| Tensor3::new(dims, r.clone()))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn samples(&self) -> &[Tensor3] {
        &self.samples
    }
}

/// `(1/n) Σ X₍ₖ₎ W X₍ₖ₎ᵀ` with `W = I/(product of the other two dimensions)`.
pub fn mode_covariance(data: &TensorDataSet, mode: usize) -> Result<DMatrix<f64>> {
    check_mode(mode)?;
    let d = data.dims[mode - 1];
    let other: usize = data.dims.iter().product::<usize>() / d;
    let mut acc = DMatrix::zeros(d, d);
    for x in &data.samples {
        let m = matricize(x, mode)?;
        acc += &m * m.transpose();
    }
    acc /= (data.n() * other) as f64;
    Ok(symmetrize(acc))
}

/// Mode-k unfoldings of every sample as a matrix data set, so the matrix
/// machinery applies to mode k as its row axis.
pub fn unfolded(data: &TensorDataSet, mode: usize) -> Result<DataSet> {
    check_mode(mode)?;
    DataSet::new(data.samples.iter().map(|x| matricize(x, mode)).collect::<Result<_>>()?)
}

/// Clusters each mode with its identity-weight covariance and the given stop
/// rule. Tuned rules run threshold selection on that mode's unfoldings with
/// stream index `mode − 1`.
pub fn cluster_tensor_identity(data: &TensorDataSet, stops: &[StopRule; 3], seed: u64) -> Result<[Partition; 3]> {
    let mut out = Vec::with_capacity(3);
    for mode in 1..=3 {
        let d = data.dims[mode - 1];
        if d < 3 {
            return Err(CodError::arg(format!(
                "mode {mode} has dimension {d}; at least 3 is needed"
            )));
        }
        let tree = agglomerate(&cod_matrix(&mode_covariance(data, mode)?)?);
        let part = match &stops[mode - 1] {
            StopRule::Threshold(alpha) => cut_threshold(&tree, *alpha)?,
            StopRule::Clusters(k) => cut_k(&tree, *k)?,
            StopRule::Tuned(spec) => {
                let flat = unfolded(data, mode)?;
                let weight = identity_weight(flat.q())?;
                let report = select_alpha(&flat, Axis::Rows, &weight, spec, seed, (mode - 1) as u32)?;
                cut_threshold(&tree, report.chosen)?
            }
        };
        out.push(part);
    }
    Ok(out.try_into().expect("three modes"))
}
