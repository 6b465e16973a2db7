//! Exact population quantities under the matrix-normal latent model
//! `X = AZBᵀ + Γ`, `Z ~ MN(0, U, V)`, independent noise `Var(Γ_ab) = σ²_ab`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cod::{cod_matrix, mcod};
use crate::data::Axis;
use crate::error::{CodError, Result};
use crate::partition::{membership_matrix, Membership, Partition};
use crate::weights::Weight;

/// Generative parameters `(A, B, U, V, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationModel {
    rows: Partition,
    cols: Partition,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    sigma2: DMatrix<f64>,
}

fn check_symmetric(m: &DMatrix<f64>, k: usize, name: &str) -> Result<()> {
    if m.shape() != (k, k) {
        return Err(CodError::Model(format!(
            "{name} must be {k} x {k}, got {:?}",
            m.shape()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CodError::Model(format!("{name} has non-finite entries")));
    }
    if (m - m.transpose()).amax() > 1e-12 {
        return Err(CodError::Model(format!("{name} is not symmetric")));
    }
    Ok(())
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

impl PopulationModel {
    /// Requires `U` and `V` symmetric positive definite and `σ² > 0`.
    pub fn new(
        rows: Partition,
        cols: Partition,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        sigma2: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self::new_semidefinite(rows, cols, u, v, sigma2)?;
        for (m, name) in [(&model.u, "U"), (&model.v, "V")] {
            if !(min_eigenvalue(m) > 0.0) {
                return Err(CodError::Model(format!("{name} is not positive definite")));
            }
        }
        Ok(model)
    }

    /// Like [`PopulationModel::new`] but accepts singular PSD `U` and `V`
    /// (eigenvalues down to `−1e−10`), as needed by rank-deficient
    /// constructions.
    pub fn new_semidefinite(
        rows: Partition,
        cols: Partition,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        sigma2: DMatrix<f64>,
    ) -> Result<Self> {
        check_symmetric(&u, rows.k(), "U")?;
        check_symmetric(&v, cols.k(), "V")?;
        for (m, name) in [(&u, "U"), (&v, "V")] {
            if min_eigenvalue(m) < -1e-10 {
                return Err(CodError::Model(format!("{name} is not positive semidefinite")));
            }
        }
        if sigma2.shape() != (rows.len(), cols.len()) {
            return Err(CodError::Model(format!(
                "noise variances must be {} x {}",
                rows.len(),
                cols.len()
            )));
        }
        if sigma2.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(CodError::Model("noise variances must be positive".into()));
        }
        Ok(PopulationModel {
            rows,
            cols,
            u,
            v,
            sigma2,
        })
    }

    pub fn p(&self) -> usize {
        self.rows.len()
    }

    pub fn q(&self) -> usize {
        self.cols.len()
    }

    pub fn row_partition(&self) -> &Partition {
        &self.rows
    }

    pub fn col_partition(&self) -> &Partition {
        &self.cols
    }

    pub fn partition(&self, axis: Axis) -> &Partition {
        match axis {
            Axis::Rows => &self.rows,
            Axis::Columns => &self.cols,
        }
    }

    pub fn row_membership(&self) -> Membership {
        membership_matrix(&self.rows)
    }

    pub fn col_membership(&self) -> Membership {
        membership_matrix(&self.cols)
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn sigma2(&self) -> &DMatrix<f64> {
        &self.sigma2
    }

    /// Latent covariance of the clustered axis, the other axis's latent
    /// covariance, the clustered partition, the other partition, and σ²
    /// oriented with the clustered axis first.
    fn oriented(&self, axis: Axis) -> (&DMatrix<f64>, &DMatrix<f64>, &Partition, &Partition, DMatrix<f64>) {
        match axis {
            Axis::Rows => (&self.u, &self.v, &self.rows, &self.cols, self.sigma2.clone()),
            Axis::Columns => (&self.v, &self.u, &self.cols, &self.rows, self.sigma2.transpose()),
        }
    }
}

fn check_weight(model: &PopulationModel, w: &Weight, axis: Axis) -> Result<()> {
    let inner = match axis {
        Axis::Rows => model.q(),
        Axis::Columns => model.p(),
    };
    if w.dim() != inner {
        return Err(CodError::arg(format!(
            "weight has dimension {}, expected {inner}",
            w.dim()
        )));
    }
    Ok(())
}

/// `Bᵀ L` for the partition `part` (rows summed per cluster).
fn collapse(part: &Partition, l: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(part.k(), l.ncols());
    for (j, &t) in part.labels().iter().enumerate() {
        let mut row = out.row_mut(t);
        row += l.row(j);
    }
    out
}

/// Exact `E(XWXᵀ)` (rows) or `E(XᵀWX)` (columns).
pub fn population_weighted_covariance(model: &PopulationModel, w: &Weight, axis: Axis) -> Result<DMatrix<f64>> {
    check_weight(model, w, axis)?;
    let (near, far, part, other, sigma2) = model.oriented(axis);
    let bl = collapse(other, w.factor());
    // tr(V BᵀWB) = tr((BᵀL)ᵀ V (BᵀL))
    let trace = (bl.transpose() * far * &bl).trace();
    let d = part.len();
    let wdiag = w.matrix().diagonal();
    let mut sigma = DMatrix::zeros(d, d);
    for a in 0..d {
        for c in 0..d {
            sigma[(a, c)] = near[(part.label(a), part.label(c))] * trace;
        }
        sigma[(a, a)] += sigma2.row(a).transpose().dot(&wdiag);
    }
    Ok(sigma)
}

/// Noise part `E(ΓWΓᵀ)` (rows) or `E(ΓᵀWΓ)` (columns); diagonal for
/// independent noise.
pub fn population_noise_covariance(model: &PopulationModel, w: &Weight, axis: Axis) -> Result<DMatrix<f64>> {
    check_weight(model, w, axis)?;
    let (_, _, part, _, sigma2) = model.oriented(axis);
    let wdiag = w.matrix().diagonal();
    let diag = DMatrix::from_fn(part.len(), 1, |a, _| sigma2.row(a).transpose().dot(&wdiag));
    Ok(DMatrix::from_diagonal(&diag.column(0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XNorm {
    pub value: f64,
    /// Clustered-axis index attaining the maximum.
    pub argmax: usize,
}

/// `‖X‖_W = √K_other · max_a ‖Lᵀ Var(X_a·) L‖_F` (rows) and the analogous
/// column version with `Var(X_·b)`.
pub fn population_x_norm(model: &PopulationModel, w: &Weight, axis: Axis) -> Result<XNorm> {
    check_weight(model, w, axis)?;
    let (near, far, part, other, sigma2) = model.oriented(axis);
    let l = w.factor();
    let bl = collapse(other, l);
    let signal = bl.transpose() * far * &bl;
    let mut best = XNorm {
        value: f64::NEG_INFINITY,
        argmax: 0,
    };
    for a in 0..part.len() {
        let r = part.label(a);
        let mut scaled = l.clone();
        for (b, mut row) in scaled.row_iter_mut().enumerate() {
            row *= sigma2[(a, b)].sqrt();
        }
        let m = &signal * near[(r, r)] + scaled.transpose() * &scaled;
        let norm = m.norm();
        if norm > best.value {
            best = XNorm { value: norm, argmax: a };
        }
    }
    best.value *= (other.k() as f64).sqrt();
    Ok(best)
}

/// Minimum population COD over cross-cluster pairs of `truth`.
pub fn population_mcod(model: &PopulationModel, w: &Weight, axis: Axis, truth: &Partition) -> Result<f64> {
    let sigma = population_weighted_covariance(model, w, axis)?;
    mcod(&cod_matrix(&sigma)?, truth)
}

/// `max_{a,b} max_{c≠a,b} |M_ac − M_bc|` for a noise covariance `M`.
pub fn gamma_diagnostic(noise: &DMatrix<f64>) -> Result<f64> {
    let p = noise.nrows();
    if noise.ncols() != p {
        return Err(CodError::arg("noise covariance must be square"));
    }
    if p < 3 {
        return Err(CodError::arg("gamma needs at least 3 variables"));
    }
    Ok(cod_matrix(noise)?.matrix().amax())
}

/// Upper bound `2 · max_{a≠c} |M_ac|` on [`gamma_diagnostic`].
pub fn gamma_upper_bound(noise: &DMatrix<f64>) -> f64 {
    let p = noise.nrows();
    let mut best = 0.0f64;
    for a in 0..p {
        for c in 0..p {
            if a != c {
                best = best.max(noise[(a, c)].abs());
            }
        }
    }
    2.0 * best
}

/// Caller-supplied constants for the separation and stability checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub c0: f64,
    pub c1: f64,
    /// Lower eigenvalue bound for `V`.
    pub c_min: f64,
    /// Upper eigenvalue bound for `V`.
    pub c_max: f64,
    /// Sample size entering the separation rate.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `BᵀB̂(B̂ᵀB̂)⁻¹`, `K₂ × s`.
    #[serde(skip)]
    pub g: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub c_k: f64,
    pub c_s: f64,
    /// `C_min ≤ λ(V) ≤ C_max`.
    pub eigen_bounds_hold: bool,
    /// Smallest row-separation gap of `U` minus the required separation.
    pub separation_margin: f64,
    pub separation_holds: bool,
    pub stability_i: bool,
    pub stability_ii: bool,
}

impl StabilityReport {
    pub fn stability_holds(&self) -> bool {
        self.stability_i || self.stability_ii
    }
}

/// `max_a (1/k) Σ_t (Σ_{j∈t} σ²_aj)² / |t|⁴` over the clusters of `part`.
pub fn weighted_noise_level(sigma2: &DMatrix<f64>, part: &Partition) -> f64 {
    let sizes = part.sizes();
    let k = part.k() as f64;
    let mut best = f64::NEG_INFINITY;
    for a in 0..sigma2.nrows() {
        let mut sums = vec![0.0; part.k()];
        for (j, &t) in part.labels().iter().enumerate() {
            sums[t] += sigma2[(a, j)];
        }
        let total: f64 = sums.iter().zip(&sizes).map(|(s, &m)| s * s / (m as f64).powi(4)).sum();
        best = best.max(total / k);
    }
    best
}

/// Column-clustering accuracy matrix `G`, `C_K`, `C_s`, and the separation
/// and stability inequalities for the row step driven by `bhat`.
pub fn stability_diagnostics(
    model: &PopulationModel,
    bhat: &Membership,
    consts: &TheoryConstants,
) -> Result<StabilityReport> {
    if bhat.len() != model.q() {
        return Err(CodError::arg(format!(
            "estimated membership has {} rows, expected {}",
            bhat.len(),
            model.q()
        )));
    }
    let b = model.col_membership();
    let bt_b_hat = b.matrix().transpose() * bhat.matrix();
    let sizes = bhat.sizes();
    let mut g = bt_b_hat;
    for (t, &m) in sizes.iter().enumerate() {
        g.column_mut(t).scale_mut(1.0 / m as f64);
    }
    let eig = (&g * g.transpose()).symmetric_eigen().eigenvalues;
    let (lambda_min, lambda_max) = (eig.min().max(0.0), eig.max());

    let est = bhat.to_partition();
    let c_k = weighted_noise_level(&model.sigma2, &model.cols);
    let c_s = weighted_noise_level(&model.sigma2, &est);

    let v_eig = model.v.clone().symmetric_eigen().eigenvalues;
    let eigen_bounds_hold = consts.c_min <= v_eig.min() && v_eig.max() <= consts.c_max;

    let k1 = model.rows.k();
    let k2 = model.cols.k() as f64;
    let s = bhat.k() as f64;
    let u = &model.u;
    let diag_max = u.diagonal().max();
    let diag_min = u.diagonal().min();

    let separation_margin = if k1 < 2 {
        f64::INFINITY
    } else {
        let mut gap = f64::INFINITY;
        for j in 0..k1 {
            for k in j + 1..k1 {
                let d = (u.row(j) - u.row(k)).amax();
                gap = gap.min(d);
            }
        }
        let rate = ((model.p() as f64).ln() / (consts.n as f64 * k2)).sqrt();
        let needed = consts.c0 * consts.c1 * rate * k2 / model.v.trace() * (diag_max * consts.c_max + c_k.sqrt());
        gap - needed
    };

    let spread = s.min(k2).sqrt() * lambda_max * diag_max * consts.c_max;
    let noise = s.sqrt() * c_s.sqrt();
    let stability_i = spread <= noise && 1.0 / lambda_min <= consts.c0 / 8.0 * (c_k / c_s).sqrt() * (k2 / s).sqrt();
    let stability_ii = spread > noise
        && lambda_max / lambda_min
            <= consts.c0 / 8.0 * (consts.c_min / consts.c_max) * (diag_min / diag_max) * (k2 / s.min(k2)).sqrt();

    Ok(StabilityReport {
        g,
        lambda_min,
        lambda_max,
        c_k,
        c_s,
        eigen_bounds_hold,
        separation_margin,
        separation_holds: separation_margin > 0.0,
        stability_i,
        stability_ii,
    })
}

/// Row covariance of the three-cluster construction whose optimal-weight
/// MCOD equals `2ε`; it is singular, so pair it with
/// [`PopulationModel::new_semidefinite`].
pub fn separation_construction_u(eps: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[eps, eps - eps * eps, -eps, eps - eps * eps, eps, eps, -eps, eps, 2.0],
    )
}
