//! Seeded generators for matrix-normal latent block data and its three-way
//! analogue.
//!
//! For sample `i` a single stream is used: first the latent standard normals
//! in row-major order, then the noise standard normals in row-major order.
//! Square roots of covariances are lower Cholesky factors.

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{CodError, Result};
use crate::partition::Partition;
use crate::population::PopulationModel;
use crate::rng::{stream, Purpose};
use crate::tensor::{Tensor3, TensorDataSet};

/// `M_jk = rho^|j−k|`.
pub fn toeplitz(rho: f64, k: usize) -> Result<DMatrix<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(CodError::arg(format!(
            "Toeplitz base must satisfy |rho| < 1, got {rho}"
        )));
    }
    if k == 0 {
        return Err(CodError::arg("Toeplitz dimension must be positive"));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| rho.powi((i as i32 - j as i32).abs())))
}

/// Noise-variance regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSpec {
    /// Every entry has the same variance.
    Homogeneous { variance: f64 },
    /// Proportional to the product of the entry's row and column cluster sizes.
    Proportional { mean: f64 },
    /// `u^h` with `u ~ Unif(0, 1)`, normalized to the given mean.
    Random { mean: f64, h: f64 },
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        let m = match *self {
            NoiseSpec::Homogeneous { variance } => variance,
            NoiseSpec::Proportional { mean } => mean,
            NoiseSpec::Random { mean, h } => {
                if !h.is_finite() {
                    return Err(CodError::arg("noise heterogeneity h must be finite"));
                }
                mean
            }
        };
        if !(m > 0.0) || !m.is_finite() {
            return Err(CodError::arg("mean noise variance must be positive"));
        }
        Ok(())
    }
}

/// Deterministic mean `M = Ã T B̃ᵀ` over contiguous first-layer blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanBlocks {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    /// `row_sizes.len() × col_sizes.len()` block means, row-major.
    pub values: Vec<Vec<f64>>,
}

impl MeanBlocks {
    pub fn row_partition(&self) -> Result<Partition> {
        Partition::from_sizes(&self.row_sizes)
    }

    pub fn col_partition(&self) -> Result<Partition> {
        Partition::from_sizes(&self.col_sizes)
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let (r, c) = (self.row_partition()?, self.col_partition()?);
        if self.values.len() != r.k() || self.values.iter().any(|row| row.len() != c.k()) {
            return Err(CodError::arg("block mean table does not match the block counts"));
        }
        Ok(DMatrix::from_fn(r.len(), c.len(), |i, j| {
            self.values[r.label(i)][c.label(j)]
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    pub u_decay: f64,
    pub v_decay: f64,
    pub noise: NoiseSpec,
    pub n: usize,
    pub seed: u64,
    /// Optional first-layer mean structure; the covariance clusters must
    /// nest inside it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<MeanBlocks>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let rows = Partition::from_sizes(&self.row_sizes)?;
        let cols = Partition::from_sizes(&self.col_sizes)?;
        toeplitz(self.u_decay, 1)?;
        toeplitz(self.v_decay, 1)?;
        self.noise.validate()?;
        if self.n == 0 {
            return Err(CodError::arg("sample count must be positive"));
        }
        if rows.len() < 2 {
            return Err(CodError::arg("at least 2 rows are needed"));
        }
        if let Some(mean) = &self.mean {
            mean.matrix()?;
            let (mr, mc) = (mean.row_partition()?, mean.col_partition()?);
            if mr.len() != rows.len() || mc.len() != cols.len() {
                return Err(CodError::arg("mean blocks must cover the full matrix"));
            }
            if !rows.refines(&mr) || !cols.refines(&mc) {
                return Err(CodError::arg("covariance clusters must nest inside the mean blocks"));
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.row_sizes.iter().sum()
    }

    pub fn q(&self) -> usize {
        self.col_sizes.iter().sum()
    }
}

/// Per-entry noise variances `σ²_ij` for the configured regime.
pub fn noise_variances(config: &SimConfig) -> Result<DMatrix<f64>> {
    config.validate()?;
    let rows = Partition::from_sizes(&config.row_sizes)?;
    let cols = Partition::from_sizes(&config.col_sizes)?;
    let (p, q) = (rows.len(), cols.len());
    let pq = (p * q) as f64;
    let normalize = |raw: DMatrix<f64>, mean: f64| {
        let total = raw.sum();
        raw * (mean * pq / total)
    };
    Ok(match config.noise {
        NoiseSpec::Homogeneous { variance } => DMatrix::from_element(p, q, variance),
        NoiseSpec::Proportional { mean } => {
            let (rs, cs) = (rows.sizes(), cols.sizes());
            let scale = (pq / (rows.k() * cols.k()) as f64).sqrt();
            let raw = DMatrix::from_fn(p, q, |i, j| (rs[rows.label(i)] * cs[cols.label(j)]) as f64 / scale);
            normalize(raw, mean)
        }
        NoiseSpec::Random { mean, h } => {
            let mut rng = stream(config.seed, Purpose::NoiseVariances, 0);
            let mut raw = DMatrix::zeros(p, q);
            for i in 0..p {
                for j in 0..q {
                    let u: f64 = rng.sample(Open01);
                    raw[(i, j)] = u.powf(h);
                }
            }
            normalize(raw, mean)
        }
    })
}

/// Population parameters implied by a configuration.
pub fn population_model(config: &SimConfig) -> Result<PopulationModel> {
    let sigma2 = noise_variances(config)?;
    PopulationModel::new(
        Partition::from_sizes(&config.row_sizes)?,
        Partition::from_sizes(&config.col_sizes)?,
        toeplitz(config.u_decay, config.row_sizes.len())?,
        toeplitz(config.v_decay, config.col_sizes.len())?,
        sigma2,
    )
}

fn lower_cholesky(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| CodError::Model(format!("{name} is not numerically positive definite")))
}

fn normals(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// `n` draws of `X = M + AZBᵀ + Γ` from an explicit model.
pub fn sample_from_model(model: &PopulationModel, mean: Option<&DMatrix<f64>>, n: usize, seed: u64) -> Result<DataSet> {
    if n == 0 {
        return Err(CodError::arg("sample count must be positive"));
    }
    let (p, q) = (model.p(), model.q());
    if let Some(m) = mean {
        if m.shape() != (p, q) {
            return Err(CodError::arg("mean matrix shape does not match the model"));
        }
    }
    let lu = lower_cholesky(model.u(), "U")?;
    let lv = lower_cholesky(model.v(), "V")?;
    let sd = model.sigma2().map(f64::sqrt);
    let (rows, cols) = (model.row_partition(), model.col_partition());
    let (k1, k2) = (rows.k(), cols.k());
    let samples = (0..n)
        .map(|i| {
            let mut rng = stream(seed, Purpose::Sample, i as u32);
            let e = normals(&mut rng, k1, k2);
            let z = &lu * e * lv.transpose();
            let mut x = DMatrix::from_fn(p, q, |a, b| z[(rows.label(a), cols.label(b))]);
            for a in 0..p {
                for b in 0..q {
                    let g: f64 = rng.sample(StandardNormal);
                    x[(a, b)] += sd[(a, b)] * g;
                }
            }
            if let Some(m) = mean {
                x += m;
            }
            x
        })
        .collect();
    DataSet::new(samples)
}

/// Simulated matrix data with the generating model and the truth.
#[derive(Debug, Clone)]
pub struct SimulatedMatrix {
    pub data: DataSet,
    pub model: PopulationModel,
    pub rows: Partition,
    pub cols: Partition,
    /// First-layer (mean) partitions when a mean structure is configured.
    pub mean_rows: Option<Partition>,
    pub mean_cols: Option<Partition>,
}

pub fn sample_matrix_normal_dataset(config: &SimConfig) -> Result<SimulatedMatrix> {
    let model = population_model(config)?;
    let mean = config.mean.as_ref().map(MeanBlocks::matrix).transpose()?;
    let data = sample_from_model(&model, mean.as_ref(), config.n, config.seed)?;
    Ok(SimulatedMatrix {
        data,
        rows: model.row_partition().clone(),
        cols: model.col_partition().clone(),
        mean_rows: config.mean.as_ref().map(MeanBlocks::row_partition).transpose()?,
        mean_cols: config.mean.as_ref().map(MeanBlocks::col_partition).transpose()?,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSimConfig {
    /// Cluster sizes along each of the three modes.
    pub sizes: [Vec<usize>; 3],
    pub decays: [f64; 3],
    /// Homogeneous noise variance.
    pub noise_variance: f64,
    pub n: usize,
    pub seed: u64,
}

impl TensorSimConfig {
    pub fn validate(&self) -> Result<()> {
        for (s, &d) in self.sizes.iter().zip(&self.decays) {
            Partition::from_sizes(s)?;
            toeplitz(d, 1)?;
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(CodError::arg("noise variance must be positive"));
        }
        if self.n == 0 {
            return Err(CodError::arg("sample count must be positive"));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [
            self.sizes[0].iter().sum(),
            self.sizes[1].iter().sum(),
            self.sizes[2].iter().sum(),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedTensor {
    pub data: TensorDataSet,
    pub truth: [Partition; 3],
}

/// `X = Z ×₁ A ×₂ B ×₃ C + Γ` with separable Toeplitz covariance for `Z`.
pub fn sample_tensor_dataset(config: &TensorSimConfig) -> Result<SimulatedTensor> {
    config.validate()?;
    let parts: Vec<Partition> = config
        .sizes
        .iter()
        .map(|s| Partition::from_sizes(s))
        .collect::<Result<_>>()?;
    let factors: Vec<DMatrix<f64>> = config
        .sizes
        .iter()
        .zip(&config.decays)
        .map(|(s, &d)| lower_cholesky(&toeplitz(d, s.len())?, "mode covariance"))
        .collect::<Result<_>>()?;
    let k = [parts[0].k(), parts[1].k(), parts[2].k()];
    let dims = config.dims();
    let sd = config.noise_variance.sqrt();
    let samples = (0..config.n)
        .map(|i| {
            let mut rng = stream(config.seed, Purpose::Sample, i as u32);
            let e = Tensor3::from_fn(k, |_, _, _| rng.sample(StandardNormal));
            let z = Tensor3::from_fn(k, |a, b, c| {
                let mut acc = 0.0;
                for x in 0..=a {
                    for y in 0..=b {
                        for w in 0..=c {
                            acc += factors[0][(a, x)] * factors[1][(b, y)] * factors[2][(c, w)] * e.get(x, y, w);
                        }
                    }
                }
                acc
            });
            Tensor3::from_fn(dims, |j, p, q| {
                let g: f64 = rng.sample(StandardNormal);
                z.get(parts[0].label(j), parts[1].label(p), parts[2].label(q)) + sd * g
            })
        })
        .collect();
    Ok(SimulatedTensor {
        data: TensorDataSet::new(samples)?,
        truth: [parts[0].clone(), parts[1].clone(), parts[2].clone()],
    })
}

/// A named design: either matrix-valued or three-way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Design {
    Matrix(SimConfig),
    Tensor(TensorSimConfig),
}

pub const PRESET_NAMES: &[&str] = &[
    "main-homogeneous",
    "main-proportional",
    "main-random",
    "unbalanced-homogeneous",
    "unbalanced-proportional",
    "unbalanced-random",
    "supp-table1",
    "nested-g23",
    "tensor-g32",
];

const MAIN_SIZES: [usize; 10] = [3, 6, 6, 8, 10, 10, 12, 12, 14, 19];

fn main_noise(regime: &str) -> Option<NoiseSpec> {
    match regime {
        "homogeneous" => Some(NoiseSpec::Homogeneous { variance: 15.0 }),
        "proportional" => Some(NoiseSpec::Proportional { mean: 15.0 }),
        "random" => Some(NoiseSpec::Random { mean: 15.0, h: 0.87 }),
        _ => None,
    }
}

/// Looks up a preset design by name.
pub fn preset(name: &str, n: usize, seed: u64) -> Result<Design> {
    let unknown = || CodError::arg(format!("unknown preset '{name}'"));
    let design = if let Some(regime) = name.strip_prefix("main-") {
        Design::Matrix(SimConfig {
            row_sizes: MAIN_SIZES.to_vec(),
            col_sizes: MAIN_SIZES.to_vec(),
            u_decay: -0.4,
            v_decay: 0.3,
            noise: main_noise(regime).ok_or_else(unknown)?,
            n,
            seed,
            mean: None,
        })
    } else if let Some(regime) = name.strip_prefix("unbalanced-") {
        Design::Matrix(SimConfig {
            row_sizes: MAIN_SIZES.to_vec(),
            col_sizes: vec![2, 2, 2, 3, 6],
            u_decay: -0.4,
            v_decay: 0.3,
            noise: main_noise(regime).ok_or_else(unknown)?,
            n,
            seed,
            mean: None,
        })
    } else {
        match name {
            "supp-table1" => Design::Matrix(SimConfig {
                row_sizes: vec![4, 6, 9, 11],
                col_sizes: vec![4, 6, 9, 11],
                u_decay: -0.2,
                v_decay: 0.2,
                noise: NoiseSpec::Proportional { mean: 15.0 },
                n,
                seed,
                mean: None,
            }),
            "nested-g23" => {
                let half_cols = [2, 3, 3, 4, 4, 5, 6, 7, 7, 9];
                Design::Matrix(SimConfig {
                    row_sizes: vec![3, 4, 5, 8, 3, 4, 5, 8],
                    col_sizes: half_cols.iter().chain(&half_cols).copied().collect(),
                    u_decay: -0.4,
                    v_decay: 0.3,
                    noise: NoiseSpec::Homogeneous { variance: 15.0 },
                    n,
                    seed,
                    mean: Some(MeanBlocks {
                        row_sizes: vec![20, 20],
                        col_sizes: vec![50, 50],
                        values: vec![vec![0.0, 6.0], vec![12.0, 18.0]],
                    }),
                })
            }
            "tensor-g32" => Design::Tensor(TensorSimConfig {
                sizes: [vec![3, 5, 7], vec![2, 3, 5], vec![4, 6]],
                decays: [-0.4, 0.3, -0.2],
                noise_variance: 15.0,
                n,
                seed,
            }),
            _ => return Err(unknown()),
        }
    };
    match &design {
        Design::Matrix(c) => c.validate()?,
        Design::Tensor(c) => c.validate()?,
    }
    Ok(design)
}
