//! Observed samples `X⁽¹⁾ … X⁽ⁿ⁾` of a `p × q` random matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CodError, Result};

/// Which dimension of the sample matrices is being clustered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Rows,
    Columns,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::Rows => Axis::Columns,
            Axis::Columns => Axis::Rows,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Rows => "rows",
            Axis::Columns => "cols",
        }
    }
}

/// Divisor used for the per-feature sample variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VarianceDivisor {
    /// Divide by `n`.
    N,
    /// Divide by `n − 1` (unbiased).
    #[default]
    NMinusOne,
}

/// `n` stacked `p × q` sample matrices with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    p: usize,
    q: usize,
    samples: Vec<DMatrix<f64>>,
}

impl DataSet {
    pub fn new(samples: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| CodError::arg("a data set needs at least one sample"))?;
        let (p, q) = first.shape();
        if p < 2 || q < 1 {
            return Err(CodError::arg(format!(
                "sample matrices must be at least 2 x 1, got {p} x {q}"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.shape() != (p, q) {
                return Err(CodError::arg(format!(
                    "sample {i} has shape {:?}, expected ({p}, {q})",
                    s.shape()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(CodError::arg(format!("sample {i} has non-finite entries")));
            }
        }
        Ok(DataSet { p, q, samples })
    }

    /// Builds from `n` row-major flattened samples of length `p·q`.
    pub fn from_row_major(p: usize, q: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if r.len() != p * q {
                    Err(CodError::arg(format!(
                        "sample {i} has {} values, expected {}",
                        r.len(),
                        p * q
                    )))
                } else {
                    Ok(DMatrix::from_row_slice(p, q, r))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        DataSet::new(samples)
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Length of the clustered dimension.
    pub fn dim(&self, axis: Axis) -> usize {
        match axis {
            Axis::Rows => self.p,
            Axis::Columns => self.q,
        }
    }

    pub fn samples(&self) -> &[DMatrix<f64>] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &DMatrix<f64> {
        &self.samples[i]
    }

    /// Restricts every sample to the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        DataSet::new(self.samples.iter().map(|s| s.select_rows(rows.iter())).collect())
    }

    /// Restricts every sample to the given columns (in the given order).
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        DataSet::new(self.samples.iter().map(|s| s.select_columns(cols.iter())).collect())
    }

    /// Keeps the given samples (in the given order).
    pub fn select_samples(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n()) {
            return Err(CodError::arg(format!(
                "sample index {bad} out of range for n = {}",
                self.n()
            )));
        }
        DataSet::new(idx.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// Transposes every sample, turning columns into rows.
    pub fn transposed(&self) -> Self {
        DataSet {
            p: self.q,
            q: self.p,
            samples: self.samples.iter().map(|s| s.transpose()).collect(),
        }
    }

    /// Entrywise sample mean `(1/n) Σ X⁽ⁱ⁾`.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.p, self.q);
        for s in &self.samples {
            acc += s;
        }
        acc / self.n() as f64
    }

    /// Row-major flattening of sample `i`.
    pub fn row_major(&self, i: usize) -> Vec<f64> {
        let s = &self.samples[i];
        let mut out = Vec::with_capacity(self.p * self.q);
        for r in 0..self.p {
            for c in 0..self.q {
                out.push(s[(r, c)]);
            }
        }
        out
    }
}

/// Centers and scales every feature `(i, j)` across samples to mean 0 and
/// variance 1 under the chosen divisor.
pub fn standardize(data: &DataSet, divisor: VarianceDivisor) -> Result<DataSet> {
    let n = data.n();
    if n < 2 {
        return Err(CodError::arg("standardization needs at least 2 samples"));
    }
    let mean = data.mean_matrix();
    let mut ss = DMatrix::<f64>::zeros(data.p, data.q);
    for s in &data.samples {
        ss.zip_zip_apply(s, &mean, |acc, x, m| *acc += (x - m) * (x - m));
    }
    let denom = match divisor {
        VarianceDivisor::N => n as f64,
        VarianceDivisor::NMinusOne => (n - 1) as f64,
    };
    let mut sd = ss / denom;
    for r in 0..data.p {
        for c in 0..data.q {
            let v = sd[(r, c)];
            if !(v > 0.0) {
                return Err(CodError::DegenerateFeature { row: r, col: c });
            }
            sd[(r, c)] = v.sqrt();
        }
    }
    let samples = data
        .samples
        .iter()
        .map(|s| {
            let mut out = s - &mean;
            out.component_div_assign(&sd);
            out
        })
        .collect();
    Ok(DataSet {
        p: data.p,
        q: data.q,
        samples,
    })
}
