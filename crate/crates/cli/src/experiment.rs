//! Repeated simulate-cluster-score runs over a preset design.

use std::fmt;
use std::str::FromStr;

use codclust_core::rng::{derive_seed, Purpose};
use codclust_core::simulate::{SimulatedMatrix, SimulatedTensor};
use codclust_core::{
    ari, cluster_naive, cluster_nested, cluster_one_step, cluster_tensor_identity, cluster_two_step, preset,
    sample_matrix_normal_dataset, sample_tensor_dataset, Axis, Design, MeanLayerSpec, Partition, PipelineOptions,
    SplitMode, StopRule,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naive,
    OneStep,
    TwoStep,
    Nested,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Naive, Method::OneStep, Method::TwoStep, Method::Nested];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::OneStep => "one-step",
            Method::TwoStep => "two-step",
            Method::Nested => "nested",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}' (expected naive, one-step, two-step or nested)"))
    }
}

/// How every clustering step is stopped in an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum StopChoice {
    /// The same rule on both axes.
    Rule(StopRule),
    /// Cut at the true number of clusters of each axis.
    TrueK,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub stop: StopChoice,
    pub split: bool,
    pub standardize: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            stop: StopChoice::Rule(StopRule::default()),
            split: false,
            standardize: true,
        }
    }
}

impl RunSettings {
    fn options(&self, rows: Option<&Partition>, cols: Option<&Partition>, seed: u64) -> PipelineOptions {
        let rule = |truth: Option<&Partition>| match (&self.stop, truth) {
            (StopChoice::Rule(r), _) => r.clone(),
            (StopChoice::TrueK, Some(t)) => StopRule::Clusters(t.k()),
            (StopChoice::TrueK, None) => StopRule::default(),
        };
        PipelineOptions {
            standardize: self.standardize,
            split: if self.split {
                SplitMode::TwoFold { seed }
            } else {
                SplitMode::Off
            },
            row_stop: rule(rows),
            col_stop: rule(cols),
            seed,
            ..PipelineOptions::default()
        }
    }
}

/// ARI per axis of one method on one simulated matrix data set.
///
/// Rows and columns are each scored from the run in which that axis gets
/// the refined weight: for one-step, rows come from the run on the
/// transposed data, where rows are the second step.
pub fn score_matrix(
    sim: &SimulatedMatrix,
    method: Method,
    settings: &RunSettings,
    seed: u64,
) -> CliResult<Vec<(&'static str, f64)>> {
    let stage = method.name();
    let opts = settings.options(Some(&sim.rows), Some(&sim.cols), seed);
    let (rows, cols) = match method {
        Method::Naive => {
            let r = cluster_naive(&sim.data, Axis::Rows, &opts).map_err(CliError::at(stage))?;
            let c = cluster_naive(&sim.data, Axis::Columns, &opts).map_err(CliError::at(stage))?;
            (r.rows, c.cols)
        }
        Method::OneStep => {
            let c = cluster_one_step(&sim.data, &opts).map_err(CliError::at(stage))?;
            let t_opts = settings.options(Some(&sim.cols), Some(&sim.rows), seed);
            let r = cluster_one_step(&sim.data.transposed(), &t_opts).map_err(CliError::at(stage))?;
            (r.cols, c.cols)
        }
        Method::TwoStep => {
            let res = cluster_two_step(&sim.data, &opts).map_err(CliError::at(stage))?;
            (res.rows, res.cols)
        }
        Method::Nested => {
            let (Some(mr), Some(mc)) = (&sim.mean_rows, &sim.mean_cols) else {
                return Err(CliError::usage("nested clustering needs a design with mean blocks"));
            };
            let layer = MeanLayerSpec {
                rows: StopRule::Clusters(mr.k()),
                cols: StopRule::Clusters(mc.k()),
            };
            // A global cluster count means nothing inside a block; tune there.
            let inner = match settings.stop {
                StopChoice::TrueK => PipelineOptions {
                    row_stop: StopRule::default(),
                    col_stop: StopRule::default(),
                    ..opts
                },
                StopChoice::Rule(_) => opts,
            };
            let res = cluster_nested(&sim.data, &layer, &inner).map_err(CliError::at(stage))?;
            (Some(res.rows), Some(res.cols))
        }
    };
    let score = |est: Option<Partition>, truth: &Partition| {
        ari(truth, &est.expect("axis was clustered")).map_err(CliError::at("evaluate"))
    };
    Ok(vec![
        ("rows", score(rows, &sim.rows)?),
        ("cols", score(cols, &sim.cols)?),
    ])
}

/// ARI per mode of identity-weight clustering on simulated three-way data.
pub fn score_tensor(sim: &SimulatedTensor, settings: &RunSettings, seed: u64) -> CliResult<Vec<(&'static str, f64)>> {
    let stops = sim.truth.clone().map(|t| match &settings.stop {
        StopChoice::Rule(r) => r.clone(),
        StopChoice::TrueK => StopRule::Clusters(t.k()),
    });
    let parts = cluster_tensor_identity(&sim.data, &stops, seed).map_err(CliError::at("tensor"))?;
    ["rows", "cols", "tubes"]
        .into_iter()
        .zip(parts.iter().zip(&sim.truth))
        .map(|(name, (est, truth))| Ok((name, ari(truth, est).map_err(CliError::at("evaluate"))?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub preset: String,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub settings: RunSettings,
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub n: usize,
    pub axis: String,
    pub mean_ari: f64,
    pub sd_ari: f64,
    pub reps: usize,
}

/// Seed of repetition `rep`; shared across sample sizes and methods so that
/// every method sees the same data sets.
pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    derive_seed(seed, Purpose::Replicate, rep as u32)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Runs every (n, method) cell; repetitions run in parallel on the current
/// rayon pool. Output order and values do not depend on the thread count.
pub fn run_bench(spec: &BenchSpec) -> CliResult<Vec<BenchRow>> {
    if spec.reps == 0 || spec.n_list.is_empty() || spec.methods.is_empty() {
        return Err(CliError::usage(
            "bench needs at least one sample size, method and repetition",
        ));
    }
    let mut rows = Vec::new();
    for &n in &spec.n_list {
        let design = preset(&spec.preset, n, 0).map_err(CliError::at("preset"))?;
        if matches!(design, Design::Tensor(_)) && spec.methods.iter().any(|&m| m != Method::Naive) {
            return Err(CliError::usage("three-way presets support only the naive method"));
        }
        // per repetition: one score list per method
        let per_rep: Vec<Vec<Vec<(&'static str, f64)>>> = (0..spec.reps)
            .into_par_iter()
            .map(|rep| {
                let seed = rep_seed(spec.seed, rep);
                match preset(&spec.preset, n, seed).map_err(CliError::at("preset"))? {
                    Design::Matrix(cfg) => {
                        let sim = sample_matrix_normal_dataset(&cfg).map_err(CliError::at("simulate"))?;
                        spec.methods
                            .iter()
                            .map(|&m| score_matrix(&sim, m, &spec.settings, seed))
                            .collect()
                    }
                    Design::Tensor(cfg) => {
                        let sim = sample_tensor_dataset(&cfg).map_err(CliError::at("simulate"))?;
                        Ok(vec![score_tensor(&sim, &spec.settings, seed)?])
                    }
                }
            })
            .collect::<CliResult<_>>()?;
        for (mi, method) in spec.methods.iter().enumerate() {
            let axes: Vec<&str> = per_rep[0][mi].iter().map(|(a, _)| *a).collect();
            for (ai, axis) in axes.into_iter().enumerate() {
                let values: Vec<f64> = per_rep.iter().map(|r| r[mi][ai].1).collect();
                let (mean_ari, sd_ari) = mean_sd(&values);
                rows.push(BenchRow {
                    method: method.name().into(),
                    n,
                    axis: axis.into(),
                    mean_ari,
                    sd_ari,
                    reps: spec.reps,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], out: impl std::io::Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean ARI of `method` on `axis` in a finished table.
pub fn lookup(rows: &[BenchRow], method: Method, n: usize, axis: &str) -> Option<f64> {
    rows.iter()
        .find(|r| r.method == method.name() && r.n == n && r.axis == axis)
        .map(|r| r.mean_ari)
}
