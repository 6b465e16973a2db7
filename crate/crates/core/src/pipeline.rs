//! End-to-end clustering pipelines: naive, one-step, two-step and nested.

use std::borrow::Cow;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cod::{cod_matrix, CodMatrix};
use crate::covariance::sample_weighted_covariance;
use crate::data::{standardize, Axis, DataSet, VarianceDivisor};
use crate::error::{CodError, Result};
use crate::hclust::{agglomerate, cut_k, cut_threshold, Dendrogram};
use crate::partition::Partition;
use crate::rng::{stream, Purpose};
use crate::tuning::{random_halves, select_alpha, TuneReport, TuneSpec};
use crate::weights::{identity_weight, optimal_weight_from_partition, Weight};

/// How a dendrogram is turned into a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "kebab-case")]
pub enum StopRule {
    /// Apply every merge at height `<= alpha`.
    Threshold(f64),
    /// Stop at this many clusters.
    Clusters(usize),
    /// Pick the threshold by split-sample validation.
    Tuned(TuneSpec),
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule::Tuned(TuneSpec::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SplitMode {
    #[default]
    Off,
    /// Rows are clustered on one half of the samples and columns on the other.
    TwoFold { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub standardize: bool,
    pub divisor: VarianceDivisor,
    pub split: SplitMode,
    pub row_stop: StopRule,
    pub col_stop: StopRule,
    /// Seed for threshold tuning.
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            standardize: true,
            divisor: VarianceDivisor::default(),
            split: SplitMode::Off,
            row_stop: StopRule::default(),
            col_stop: StopRule::default(),
            seed: 0,
        }
    }
}

impl PipelineOptions {
    pub fn stop(&self, axis: Axis) -> &StopRule {
        match axis {
            Axis::Rows => &self.row_stop,
            Axis::Columns => &self.col_stop,
        }
    }
}

/// What one clustering step did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub axis: Axis,
    pub weight: String,
    /// 1 or 2 when the step used one fold of a split.
    pub fold: Option<u8>,
    /// Threshold used for the cut, if any.
    pub alpha: Option<f64>,
    pub clusters: usize,
    /// Set when the step returned a single cluster or all singletons.
    pub degenerate: bool,
    pub merge_heights: Vec<f64>,
    pub tuning: Option<TuneReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub rows: Option<Partition>,
    pub cols: Option<Partition>,
    pub trace: Vec<StepTrace>,
    /// Sample folds when splitting was on.
    pub folds: Option<(Vec<usize>, Vec<usize>)>,
}

/// Seeded two-fold split of `0..n` into sorted halves of sizes `⌈n/2⌉` and `⌊n/2⌋`.
pub fn split_folds(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(CodError::arg(format!("splitting needs at least 2 samples, got {n}")));
    }
    Ok(random_halves(n, &mut stream(seed, Purpose::Split, 0)))
}

/// Builds the dendrogram of one axis under a weight.
pub fn build_tree(data: &DataSet, axis: Axis, weight: &Weight, samples: Option<&[usize]>) -> Result<Dendrogram> {
    let dim = data.dim(axis);
    if dim < 3 {
        return Err(CodError::arg(format!(
            "clustering {} needs at least 3 of them, got {dim}",
            axis.name()
        )));
    }
    let sigma = sample_weighted_covariance(data, weight, axis, samples)?;
    Ok(agglomerate(&cod_matrix(&sigma)?))
}

struct Prepared<'a> {
    data: Cow<'a, DataSet>,
    folds: Option<(Vec<usize>, Vec<usize>)>,
}

fn prepare<'a>(data: &'a DataSet, opts: &PipelineOptions) -> Result<Prepared<'a>> {
    let data = if opts.standardize {
        Cow::Owned(standardize(data, opts.divisor)?)
    } else {
        Cow::Borrowed(data)
    };
    let folds = match opts.split {
        SplitMode::Off => None,
        SplitMode::TwoFold { seed } => Some(split_folds(data.n(), seed)?),
    };
    Ok(Prepared { data, folds })
}

impl Prepared<'_> {
    // Rows use the second fold and columns the first, so every weight is
    // estimated on the opposite half from the covariance it weights.
    fn fold_for(&self, axis: Axis) -> Option<(u8, &[usize])> {
        self.folds.as_ref().map(|(f1, f2)| match axis {
            Axis::Rows => (2, f2.as_slice()),
            Axis::Columns => (1, f1.as_slice()),
        })
    }

    fn step(&self, axis: Axis, weight: &Weight, opts: &PipelineOptions, index: u32) -> Result<(Partition, StepTrace)> {
        let fold = self.fold_for(axis);
        let samples = fold.map(|(_, s)| s);
        let tree = build_tree(&self.data, axis, weight, samples)?;
        let (part, alpha, tuning) = match opts.stop(axis) {
            StopRule::Threshold(a) => (cut_threshold(&tree, *a)?, Some(*a), None),
            StopRule::Clusters(k) => (cut_k(&tree, *k)?, None, None),
            StopRule::Tuned(spec) => {
                let sub = match samples {
                    Some(s) => Cow::Owned(self.data.select_samples(s)?),
                    None => Cow::Borrowed(self.data.as_ref()),
                };
                let report = select_alpha(&sub, axis, weight, spec, opts.seed, index)?;
                (cut_threshold(&tree, report.chosen)?, Some(report.chosen), Some(report))
            }
        };
        let k = part.k();
        let trace = StepTrace {
            axis,
            weight: weight.tag(),
            fold: fold.map(|(f, _)| f),
            alpha,
            clusters: k,
            degenerate: k == 1 || k == part.len(),
            merge_heights: tree.heights(),
            tuning,
        };
        Ok((part, trace))
    }
}

/// Clusters one axis with the identity weight.
pub fn cluster_naive(data: &DataSet, axis: Axis, opts: &PipelineOptions) -> Result<ClusterResult> {
    let prep = prepare(data, opts)?;
    let weight = identity_weight(data.dim(axis.other()))?;
    let (part, trace) = prep.step(axis, &weight, opts, 0)?;
    let (rows, cols) = match axis {
        Axis::Rows => (Some(part), None),
        Axis::Columns => (None, Some(part)),
    };
    Ok(ClusterResult {
        rows,
        cols,
        trace: vec![trace],
        folds: prep.folds.clone(),
    })
}

/// Rows with the identity weight, then columns weighted by the row clusters.
pub fn cluster_one_step(data: &DataSet, opts: &PipelineOptions) -> Result<ClusterResult> {
    run_steps(data, opts, false)
}

/// As [`cluster_one_step`], then rows again weighted by the column clusters.
pub fn cluster_two_step(data: &DataSet, opts: &PipelineOptions) -> Result<ClusterResult> {
    run_steps(data, opts, true)
}

fn run_steps(data: &DataSet, opts: &PipelineOptions, second_row_pass: bool) -> Result<ClusterResult> {
    let prep = prepare(data, opts)?;
    let (rows, t1) = prep.step(Axis::Rows, &identity_weight(data.q())?, opts, 0)?;
    let (cols, t2) = prep.step(Axis::Columns, &optimal_weight_from_partition(&rows)?, opts, 1)?;
    let mut trace = vec![t1, t2];
    let rows = if second_row_pass {
        let (rows, t3) = prep.step(Axis::Rows, &optimal_weight_from_partition(&cols)?, opts, 2)?;
        trace.push(t3);
        rows
    } else {
        rows
    };
    Ok(ClusterResult {
        rows: Some(rows),
        cols: Some(cols),
        trace,
        folds: prep.folds.clone(),
    })
}

/// Stop rules of the mean layer of nested clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanLayerSpec {
    pub rows: StopRule,
    pub cols: StopRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTrace {
    pub axis: Axis,
    pub members: Vec<usize>,
    /// Too small to cluster further, kept as one cluster.
    pub passthrough: bool,
    pub trace: Vec<StepTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedResult {
    pub mean_rows: Partition,
    pub mean_cols: Partition,
    pub rows: Partition,
    pub cols: Partition,
    pub blocks: Vec<BlockTrace>,
}

/// Complete-linkage tree of the rows (or columns) of the sample mean under
/// the Chebyshev distance.
pub fn mean_tree(data: &DataSet, axis: Axis) -> Result<Dendrogram> {
    let mean = data.mean_matrix();
    let m = match axis {
        Axis::Rows => mean,
        Axis::Columns => mean.transpose(),
    };
    let d = m.nrows();
    let dist = DMatrix::from_fn(d, d, |a, b| (m.row(a) - m.row(b)).amax());
    Ok(agglomerate(&CodMatrix::from_dissimilarities(dist)?))
}

/// Clusters by the mean structure first and then runs the two-step
/// pipeline inside every mean block.
///
/// The mean layer uses the raw data. Inner runs follow `opts` and accept
/// threshold or tuned stop rules only, since a global cluster count has no
/// meaning inside a block. Blocks with fewer than three members are kept
/// whole. Final labels are unique across blocks.
pub fn cluster_nested(data: &DataSet, layer: &MeanLayerSpec, opts: &PipelineOptions) -> Result<NestedResult> {
    for rule in [&opts.row_stop, &opts.col_stop] {
        if matches!(rule, StopRule::Clusters(_)) {
            return Err(CodError::arg(
                "nested clustering takes threshold or tuned stop rules for the inner layer",
            ));
        }
    }
    let mut blocks = Vec::new();
    let mut layers = Vec::with_capacity(2);
    let mut finals = Vec::with_capacity(2);
    for (axis, rule) in [(Axis::Rows, &layer.rows), (Axis::Columns, &layer.cols)] {
        let tree = mean_tree(data, axis)?;
        let first = match rule {
            StopRule::Threshold(a) => cut_threshold(&tree, *a)?,
            StopRule::Clusters(k) => cut_k(&tree, *k)?,
            StopRule::Tuned(_) => {
                return Err(CodError::arg("the mean layer takes a threshold or a cluster count"));
            }
        };
        let mut labels = vec![(0usize, 0usize); first.len()];
        for (b, members) in first.clusters().into_iter().enumerate() {
            let (local, trace, passthrough) = if members.len() < 3 {
                (vec![0; members.len()], Vec::new(), true)
            } else {
                let sub = match axis {
                    Axis::Rows => data.select_rows(&members)?,
                    Axis::Columns => data.select_columns(&members)?,
                };
                let res = cluster_two_step(&sub, opts)?;
                let part = match axis {
                    Axis::Rows => res.rows,
                    Axis::Columns => res.cols,
                }
                .expect("two-step fills both axes");
                (part.labels().to_vec(), res.trace, false)
            };
            for (&i, &l) in members.iter().zip(&local) {
                labels[i] = (b, l);
            }
            blocks.push(BlockTrace {
                axis,
                members,
                passthrough,
                trace,
            });
        }
        finals.push(Partition::from_labels(&labels)?);
        layers.push(first);
    }
    let cols = finals.pop().unwrap();
    let rows = finals.pop().unwrap();
    let mean_cols = layers.pop().unwrap();
    let mean_rows = layers.pop().unwrap();
    Ok(NestedResult {
        mean_rows,
        mean_cols,
        rows,
        cols,
        blocks,
    })
}
