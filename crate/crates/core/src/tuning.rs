//! Split-sample selection of the merge threshold.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cod::cod_matrix;
use crate::covariance::sample_weighted_covariance;
use crate::data::{Axis, DataSet};
use crate::error::{CodError, Result};
use crate::hclust::{agglomerate, cut_threshold};
use crate::partition::Partition;
use crate::rng::{stream, Purpose};
use crate::weights::Weight;

/// Number of points in the default threshold grid.
pub const DEFAULT_GRID_POINTS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub grid: Vec<f64>,
    pub losses: Vec<f64>,
    pub chosen: f64,
    /// The random halves used, in evaluation order.
    pub splits: Vec<(Vec<usize>, Vec<usize>)>,
}

/// Shuffles `0..n` and splits it into sorted halves of sizes `⌈n/2⌉`, `⌊n/2⌋`.
pub(crate) fn random_halves(n: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let cut = n.div_ceil(2);
    let mut a = idx[..cut].to_vec();
    let mut b = idx[cut..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Block-averages `sigma` under `part`: within-block off-diagonal entries
/// become the block's off-diagonal mean, entries between two blocks become
/// their cross mean, and the diagonal becomes 1.
pub fn smooth(sigma: &DMatrix<f64>, part: &Partition) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    if sigma.ncols() != d || part.len() != d {
        return Err(CodError::arg(format!(
            "matrix is {:?} but the partition has {} elements",
            sigma.shape(),
            part.len()
        )));
    }
    let k = part.k();
    let mut sums = DMatrix::<f64>::zeros(k, k);
    let mut counts = DMatrix::<f64>::zeros(k, k);
    for a in 0..d {
        for c in 0..d {
            if a != c {
                let (s, t) = ordered(part.label(a), part.label(c));
                sums[(s, t)] += sigma[(a, c)];
                counts[(s, t)] += 1.0;
            }
        }
    }
    Ok(DMatrix::from_fn(d, d, |a, c| {
        if a == c {
            1.0
        } else {
            let (s, t) = ordered(part.label(a), part.label(c));
            sums[(s, t)] / counts[(s, t)]
        }
    }))
}

fn ordered(s: usize, t: usize) -> (usize, usize) {
    if s <= t {
        (s, t)
    } else {
        (t, s)
    }
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Log-spaced points between the 1st and 99th percentiles of the
/// off-diagonal dissimilarities.
pub fn default_grid(dissimilarities: &[f64], points: usize) -> Vec<f64> {
    let mut v: Vec<f64> = dissimilarities.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() || points == 0 {
        return vec![0.0];
    }
    v.sort_by(f64::total_cmp);
    let hi = percentile(&v, 99.0);
    if !(hi > 0.0) {
        return vec![0.0];
    }
    let mut lo = percentile(&v, 1.0);
    if !(lo > 0.0) {
        // fall back to the smallest positive value
        lo = v.iter().copied().find(|&x| x > 0.0).unwrap_or(hi).min(hi);
    }
    if points == 1 || lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// How many fold evaluations a tuning run averages over by default.
pub const DEFAULT_EVALUATIONS: usize = 20;

/// Threshold tuning settings.
///
/// Evaluation `j` uses random split `j / 2` and, for odd `j`, swaps the
/// roles of its two halves. One evaluation is a single split-and-validate
/// pass; more evaluations average the loss curves, which steadies the
/// choice when the loss is flat near its minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSpec {
    /// Candidate thresholds (strictly ascending); a percentile grid when `None`.
    pub grid: Option<Vec<f64>>,
    pub evaluations: usize,
}

impl Default for TuneSpec {
    fn default() -> Self {
        TuneSpec {
            grid: None,
            evaluations: DEFAULT_EVALUATIONS,
        }
    }
}

impl TuneSpec {
    pub fn single_split(grid: Option<Vec<f64>>) -> Self {
        TuneSpec { grid, evaluations: 1 }
    }
}

/// Chooses the threshold minimizing `‖Υ(Σ̂₁, 𝒢_α) − Σ̂₂‖_F` over the grid,
/// where `Σ̂₁`, `Σ̂₂` come from a seeded two-fold split and `𝒢_α` cuts the
/// tree of `Σ̂₁` at `α`. With several evaluations the reported loss is the
/// root mean square over them. Squares are averaged so that the constant
/// diagonal term of each evaluation cannot reorder the grid. Ties go to the
/// smallest threshold.
///
/// `stream_index` separates the splits of successive tuning calls made
/// with the same seed.
pub fn select_alpha(
    data: &DataSet,
    axis: Axis,
    weight: &Weight,
    spec: &TuneSpec,
    seed: u64,
    stream_index: u32,
) -> Result<TuneReport> {
    let n = data.n();
    if n < 4 {
        return Err(CodError::arg(format!("tuning needs at least 4 samples, got {n}")));
    }
    if spec.evaluations == 0 || spec.evaluations > 1 << 17 {
        return Err(CodError::arg("tuning needs between 1 and 131072 evaluations"));
    }
    if stream_index >= 1 << 16 {
        return Err(CodError::arg("tuning stream index must be below 65536"));
    }
    if let Some(g) = &spec.grid {
        if g.is_empty() {
            return Err(CodError::arg("threshold grid must be non-empty"));
        }
        if g.iter().any(|a| !a.is_finite() || *a < 0.0) || g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CodError::arg(
                "threshold grid must be finite, non-negative and strictly ascending",
            ));
        }
    }
    let mut splits = Vec::with_capacity(spec.evaluations.div_ceil(2));
    let mut grid = spec.grid.clone();
    let mut losses: Vec<f64> = Vec::new();
    for j in 0..spec.evaluations {
        if j % 2 == 0 {
            let index = (stream_index << 16) | (j / 2) as u32;
            splits.push(random_halves(n, &mut stream(seed, Purpose::Tuning, index)));
        }
        let (f1, f2) = splits.last().expect("split drawn above");
        let (fit, check) = if j % 2 == 0 { (f1, f2) } else { (f2, f1) };
        let s1 = sample_weighted_covariance(data, weight, axis, Some(fit))?;
        let s2 = sample_weighted_covariance(data, weight, axis, Some(check))?;
        let cod = cod_matrix(&s1)?;
        let tree = agglomerate(&cod);
        let grid = grid.get_or_insert_with(|| default_grid(&cod.off_diagonal(), DEFAULT_GRID_POINTS));
        losses.resize(grid.len(), 0.0);
        for (loss, &alpha) in losses.iter_mut().zip(grid.iter()) {
            let part = cut_threshold(&tree, alpha)?;
            *loss += (smooth(&s1, &part)? - &s2).norm_squared();
        }
    }
    let grid = grid.expect("at least one evaluation");
    for loss in &mut losses {
        *loss = (*loss / spec.evaluations as f64).sqrt();
    }
    let mut best = 0;
    for (i, &loss) in losses.iter().enumerate() {
        if loss < losses[best] {
            best = i;
        }
    }
    Ok(TuneReport {
        chosen: grid[best],
        grid,
        losses,
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::identity_weight;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_by_three_example() {
        let s = DMatrix::from_row_slice(3, 3, &[1., 0.4, 0.6, 0.4, 1., 0.8, 0.6, 0.8, 1.]);
        let part = Partition::from_labels(&[0, 0, 1]).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1., 0.4, 0.7, 0.4, 1., 0.7, 0.7, 0.7, 1.]);
        assert!((smooth(&s, &part).unwrap() - expected).amax() < 1e-15);
    }

    #[test]
    fn singletons_only_reset_diagonal() {
        let s = DMatrix::from_row_slice(3, 3, &[2., 0.4, 0.6, 0.4, 3., 0.8, 0.6, 0.8, 4.]);
        let out = smooth(&s, &Partition::singletons(3).unwrap()).unwrap();
        let mut want = s.clone();
        want.fill_diagonal(1.0);
        assert_eq!(out, want);
    }

    #[test]
    fn block_constant_is_fixed_point() {
        let part = Partition::from_labels(&[0, 1, 0, 2, 1, 2, 2]).unwrap();
        let table = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, -0.2, 0.1, 0.3, 0.0, -0.2, 0.0, 0.7]);
        let s = DMatrix::from_fn(7, 7, |a, c| {
            if a == c {
                1.0
            } else {
                table[(part.label(a), part.label(c))]
            }
        });
        assert!((smooth(&s, &part).unwrap() - &s).amax() < 1e-15);
        assert!(smooth(&s, &Partition::singletons(6).unwrap()).is_err());
    }

    #[test]
    fn grid_shapes() {
        let g = default_grid(&(1..=100).map(|i| i as f64).collect::<Vec<_>>(), 40);
        assert_eq!(g.len(), 40);
        assert!((g[0] - 1.99).abs() < 1e-12 && (g[39] - 99.01).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(default_grid(&[0.0, 0.0], 40), vec![0.0]);
        let g = default_grid(&[0.0, 0.0, 0.0, 2.0, 3.0], 5);
        assert!(g[0] > 0.0);
    }

    fn random_data(n: usize, p: usize, q: usize, seed: u64) -> DataSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DataSet::new(
            (0..n)
                .map(|_| DMatrix::from_fn(p, q, |_, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_point_grid_and_errors() {
        let data = random_data(6, 5, 4, 1);
        let w = identity_weight(4).unwrap();
        let r = select_alpha(&data, Axis::Rows, &w, &TuneSpec::single_split(Some(vec![0.3])), 1, 0).unwrap();
        assert_eq!(r.chosen, 0.3);
        assert_eq!(r.losses.len(), 1);
        assert!(r.losses[0].is_finite());
        assert_eq!(r.splits.len(), 1);
        assert_eq!(r.splits[0].0.len() + r.splits[0].1.len(), 6);
        let many = TuneSpec {
            grid: Some(vec![0.3]),
            evaluations: 5,
        };
        assert_eq!(
            select_alpha(&data, Axis::Rows, &w, &many, 1, 0).unwrap().splits.len(),
            3
        );
        let small = random_data(3, 5, 4, 1);
        assert!(select_alpha(&small, Axis::Rows, &w, &TuneSpec::default(), 1, 0).is_err());
        for bad in [
            TuneSpec::single_split(Some(vec![])),
            TuneSpec::single_split(Some(vec![0.2, 0.1])),
            TuneSpec {
                grid: None,
                evaluations: 0,
            },
        ] {
            assert!(select_alpha(&data, Axis::Rows, &w, &bad, 1, 0).is_err());
        }
    }

    #[test]
    fn duplicated_halves_pick_true_blocks() {
        // Every sample appears twice, once in each fold, so both fold
        // covariances coincide. The samples are built so that this common
        // covariance is block-constant with unit diagonal: the true cut then
        // has zero loss while any other cut leaves a positive residual.
        let blocks = Partition::from_labels(&[0, 0, 0, 1, 1, 1]).unwrap();
        let rho = 0.6;
        let cov = DMatrix::from_fn(6, 6, |a, c| {
            if a == c {
                1.0
            } else if blocks.same_cluster(a, c) {
                rho
            } else {
                0.0
            }
        });
        // Exact square-root draws: X = L·E with Eᵀ E/m = I across the
        // distinct samples (columns of a scaled orthogonal design).
        let l = cov.clone().cholesky().unwrap().l();
        let m = 6;
        let design = DMatrix::identity(m, m) * (m as f64).sqrt();
        let base: Vec<DMatrix<f64>> = (0..m)
            .map(|i| DMatrix::from_column_slice(6, 1, (&l * design.column(i)).as_slice()))
            .collect();
        let mut ordered = vec![DMatrix::zeros(6, 1); 2 * m];
        let mut rng = stream(5, Purpose::Tuning, 0);
        let (f1, f2) = random_halves(2 * m, &mut rng);
        for (i, (&a, &b)) in f1.iter().zip(&f2).enumerate() {
            ordered[a] = base[i].clone();
            ordered[b] = base[i].clone();
        }
        let data = DataSet::new(ordered).unwrap();
        let w = identity_weight(1).unwrap();
        let s1 = sample_weighted_covariance(&data, &w, Axis::Rows, Some(&f1)).unwrap();
        assert!((&s1 - &cov).amax() < 1e-12);

        let grid = [0.1, 0.7, 1.5];
        let r = select_alpha(
            &data,
            Axis::Rows,
            &w,
            &TuneSpec::single_split(Some(grid.to_vec())),
            5,
            0,
        )
        .unwrap();
        assert_eq!(r.splits[0].0, f1);
        // COD is 0 within blocks and rho across them.
        let tree = agglomerate(&cod_matrix(&s1).unwrap());
        assert_eq!(cut_threshold(&tree, 0.1).unwrap(), blocks);
        assert!(r.losses[0] < 1e-12);
        assert!(r.losses[2] > 0.1);
        assert_eq!(r.chosen, 0.1);
    }

    #[test]
    fn deterministic() {
        let data = random_data(10, 6, 5, 3);
        let w = identity_weight(5).unwrap();
        let spec = TuneSpec::default();
        let a = select_alpha(&data, Axis::Rows, &w, &spec, 9, 2).unwrap();
        let b = select_alpha(&data, Axis::Rows, &w, &spec, 9, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.losses.len(), DEFAULT_GRID_POINTS);
        // later evaluations only add splits
        let c = select_alpha(
            &data,
            Axis::Rows,
            &w,
            &TuneSpec {
                evaluations: 30,
                ..spec
            },
            9,
            2,
        )
        .unwrap();
        assert_eq!(a.splits[..], c.splits[..10]);
        assert!(a.losses.iter().all(|l| l.is_finite()));
    }

    proptest! {
        #[test]
        fn smoothing_invariants(m in 2usize..=15, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
            let s = (&r + r.transpose()) * 0.5;
            let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..4)).collect();
            let part = Partition::from_labels(&labels).unwrap();
            let once = smooth(&s, &part).unwrap();
            let twice = smooth(&once, &part).unwrap();
            prop_assert!((&once - &twice).amax() < 1e-12);
            prop_assert_eq!(&once, &once.transpose());
            for a in 0..m {
                prop_assert_eq!(once[(a, a)], 1.0);
                for c in 0..m {
                    for b in 0..m {
                        for d in 0..m {
                            if a != c && b != d && part.label(a) == part.label(b) && part.label(c) == part.label(d) {
                                prop_assert!((once[(a, c)] - once[(b, d)]).abs() < 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }
}
