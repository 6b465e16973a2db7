//! Command-line surface: argument definitions and the four subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use codclust_core::{
    cluster_naive, cluster_nested, cluster_one_step, cluster_tensor_identity, cluster_two_step, preset,
    sample_matrix_normal_dataset, sample_tensor_dataset, Axis, ClusterResult, DataSet, Design, MeanLayerSpec,
    PipelineOptions, SplitMode, StepTrace, StopRule, TensorDataSet, TuneSpec,
};
use serde_json::json;

use crate::dataset::{Dataset, Provenance, Samples};
use crate::error::{CliError, CliResult};
use crate::experiment::{run_bench, write_csv, BenchSpec, Method, RunSettings, StopChoice};
use crate::result::{load_partitions, metrics_against, AxisMetrics, Partitions, ResultFile, TOOL};

#[derive(Debug, Parser)]
#[command(
    name = "codclust",
    version,
    about = "Covariance-difference clustering of matrix-valued data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic data set from a preset or a design file.
    Simulate(SimulateArgs),
    /// Cluster the rows and/or columns of a data set.
    Cluster(ClusterArgs),
    /// Compare estimated partitions with reference partitions.
    Evaluate(EvaluateArgs),
    /// Repeat simulate-cluster-score and summarize the ARI.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Named design.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// JSON design file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sample size; required with --preset, overrides the file otherwise.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Rows,
    Cols,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Off,
    Seeded,
}

#[derive(Debug, Args)]
pub struct StopArgs {
    /// Cut every tree at this height.
    #[arg(long, group = "stop")]
    pub alpha: Option<f64>,
    /// Cut every tree into this many clusters.
    #[arg(long, group = "stop")]
    pub k: Option<usize>,
    /// Choose the height by split-sample validation (the default).
    #[arg(long, group = "stop")]
    pub tune: bool,
    /// Number of split evaluations averaged when tuning.
    #[arg(long)]
    pub tune_evals: Option<usize>,
}

impl StopArgs {
    fn rule(&self) -> CliResult<StopRule> {
        if self.tune_evals.is_some() && (self.alpha.is_some() || self.k.is_some()) {
            return Err(CliError::usage("--tune-evals only applies to tuned cuts"));
        }
        Ok(match (self.alpha, self.k) {
            (Some(a), _) => StopRule::Threshold(a),
            (_, Some(k)) => StopRule::Clusters(k),
            _ => StopRule::Tuned(TuneSpec {
                evaluations: self.tune_evals.unwrap_or(TuneSpec::default().evaluations),
                ..TuneSpec::default()
            }),
        })
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Data set directory or manifest.
    pub data: PathBuf,
    #[arg(long, default_value = "two-step")]
    pub method: Method,
    /// Axes to cluster; only the naive method clusters a single axis.
    #[arg(long)]
    pub axis: Option<AxisArg>,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Scale every entry to unit sample variance first.
    #[arg(long)]
    pub standardize: Option<OnOff>,
    /// Cluster rows and columns on disjoint halves of the samples.
    #[arg(long, default_value = "off")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mean-layer cluster count for the nested method.
    #[arg(long, conflicts_with = "mean_alpha")]
    pub mean_k: Option<usize>,
    /// Mean-layer threshold for the nested method.
    #[arg(long)]
    pub mean_alpha: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Data set, result or labels file with the reference partitions.
    #[arg(long)]
    pub truth: PathBuf,
    /// Result or labels file with the estimates.
    #[arg(long)]
    pub est: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub preset: String,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "naive,one-step,two-step")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Cut at the true cluster counts instead.
    #[arg(long, group = "stop")]
    pub true_k: bool,
    #[arg(long, default_value = "off")]
    pub split: SplitArg,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "CODCLUST_THREADS")]
    pub threads: Option<usize>,
    /// Output CSV; standard output when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Cluster(a) => {
            let result = cluster(&a)?;
            emit(a.out.as_deref(), &result.to_json())
        }
        Command::Evaluate(a) => {
            let lines = evaluate(&a.truth, &a.est)?;
            let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
            emit(None, &text)
        }
        Command::Bench(a) => bench(&a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::usage(format!("cannot write output: {e}")))
        }
    }
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let mut design = match (&a.preset, &a.config) {
        (Some(name), _) => {
            let n = a.n.ok_or_else(|| CliError::usage("--preset needs --n"))?;
            preset(name, n, a.seed.unwrap_or(0)).map_err(CliError::at("preset"))?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: bad design: {e}", path.display())))?
        }
        (None, None) => return Err(CliError::usage("give --preset or --config")),
    };
    match &mut design {
        Design::Matrix(c) => {
            c.n = a.n.unwrap_or(c.n);
            c.seed = a.seed.unwrap_or(c.seed);
        }
        Design::Tensor(c) => {
            c.n = a.n.unwrap_or(c.n);
            c.seed = a.seed.unwrap_or(c.seed);
        }
    }
    let provenance = Some(Provenance {
        preset: a.preset.clone(),
        design: design.clone(),
    });
    let ds = match &design {
        Design::Matrix(c) => Dataset::from_simulated_matrix(
            &sample_matrix_normal_dataset(c).map_err(CliError::at("simulate"))?,
            provenance,
        ),
        Design::Tensor(c) => {
            Dataset::from_simulated_tensor(&sample_tensor_dataset(c).map_err(CliError::at("simulate"))?, provenance)
        }
    };
    ds.write(&a.out)
}

pub fn cluster(a: &ClusterArgs) -> CliResult<ResultFile> {
    let ds = Dataset::read(&a.data)?;
    let rule = a.stop.rule()?;
    if a.method != Method::Nested && (a.mean_k.is_some() || a.mean_alpha.is_some()) {
        return Err(CliError::usage(
            "--mean-k and --mean-alpha apply to the nested method only",
        ));
    }
    if a.method != Method::Naive && matches!(a.axis, Some(AxisArg::Rows | AxisArg::Cols)) {
        return Err(CliError::usage(format!("the {} method clusters both axes", a.method)));
    }
    let (partitions, trace, blocks, options) = match &ds.samples {
        Samples::Matrix(data) => {
            let opts = PipelineOptions {
                standardize: a.standardize != Some(OnOff::Off),
                split: match a.split {
                    SplitArg::Off => SplitMode::Off,
                    SplitArg::Seeded => SplitMode::TwoFold { seed: a.seed },
                },
                row_stop: rule.clone(),
                col_stop: rule,
                seed: a.seed,
                ..PipelineOptions::default()
            };
            cluster_matrix(data, a, opts)?
        }
        Samples::Tensor(data) => cluster_tensor(data, a, rule)?,
    };
    let metrics = match ds.truth() {
        Some(truth) => metrics_against(truth, &partitions)?,
        None => Default::default(),
    };
    Ok(ResultFile {
        tool: TOOL.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        dataset: a.data.display().to_string(),
        method: a.method.name().into(),
        seed: a.seed,
        options,
        partitions,
        trace,
        blocks,
        metrics,
    })
}

type Clustered = (
    Partitions,
    Vec<StepTrace>,
    Option<Vec<codclust_core::pipeline::BlockTrace>>,
    serde_json::Value,
);

fn cluster_matrix(data: &DataSet, a: &ClusterArgs, opts: PipelineOptions) -> CliResult<Clustered> {
    let stage = a.method.name();
    let merge = |results: Vec<ClusterResult>| {
        let mut parts = Partitions::default();
        let mut trace = Vec::new();
        for r in results {
            parts.rows = r.rows.or(parts.rows);
            parts.cols = r.cols.or(parts.cols);
            trace.extend(r.trace);
        }
        (parts, trace)
    };
    let options = serde_json::to_value(&opts).expect("options serialize");
    Ok(match a.method {
        Method::Naive => {
            let axes: &[Axis] = match a.axis.unwrap_or(AxisArg::Both) {
                AxisArg::Rows => &[Axis::Rows],
                AxisArg::Cols => &[Axis::Columns],
                AxisArg::Both => &[Axis::Rows, Axis::Columns],
            };
            let results = axes
                .iter()
                .map(|&axis| cluster_naive(data, axis, &opts).map_err(CliError::at(stage)))
                .collect::<CliResult<Vec<_>>>()?;
            let (parts, trace) = merge(results);
            (parts, trace, None, options)
        }
        Method::OneStep | Method::TwoStep => {
            let run = if a.method == Method::OneStep {
                cluster_one_step
            } else {
                cluster_two_step
            };
            let (parts, trace) = merge(vec![run(data, &opts).map_err(CliError::at(stage))?]);
            (parts, trace, None, options)
        }
        Method::Nested => {
            let mean_rule = match (a.mean_k, a.mean_alpha) {
                (Some(k), _) => StopRule::Clusters(k),
                (_, Some(alpha)) => StopRule::Threshold(alpha),
                _ => return Err(CliError::usage("the nested method needs --mean-k or --mean-alpha")),
            };
            let layer = MeanLayerSpec {
                rows: mean_rule.clone(),
                cols: mean_rule,
            };
            let res = cluster_nested(data, &layer, &opts).map_err(CliError::at(stage))?;
            let parts = Partitions {
                rows: Some(res.rows),
                cols: Some(res.cols),
                mean_rows: Some(res.mean_rows),
                mean_cols: Some(res.mean_cols),
                ..Partitions::default()
            };
            let options = json!({ "pipeline": options, "mean_layer": layer });
            (parts, Vec::new(), Some(res.blocks), options)
        }
    })
}

fn cluster_tensor(data: &TensorDataSet, a: &ClusterArgs, rule: StopRule) -> CliResult<Clustered> {
    if a.method != Method::Naive {
        return Err(CliError::usage("three-way data supports only the naive method"));
    }
    if a.axis.is_some_and(|ax| ax != AxisArg::Both) {
        return Err(CliError::usage("three-way data is clustered along every mode"));
    }
    if a.standardize == Some(OnOff::On) || a.split != SplitArg::Off {
        return Err(CliError::usage(
            "three-way data supports neither standardization nor sample splitting",
        ));
    }
    let stops = [rule.clone(), rule.clone(), rule];
    let [rows, cols, tubes] = cluster_tensor_identity(data, &stops, a.seed).map_err(CliError::at("tensor"))?;
    let parts = Partitions {
        rows: Some(rows),
        cols: Some(cols),
        tubes: Some(tubes),
        ..Partitions::default()
    };
    let options = json!({ "stops": stops, "seed": a.seed });
    Ok((parts, Vec::new(), None, options))
}

/// One compact JSON object per axis shared by the two files.
pub fn evaluate(truth: &Path, est: &Path) -> CliResult<Vec<String>> {
    let truth = load_partitions(truth)?;
    let est = load_partitions(est)?;
    let metrics = metrics_against(&truth, &est)?;
    if metrics.is_empty() {
        return Err(CliError::usage("the two files share no axis"));
    }
    Ok(Partitions::AXES
        .iter()
        .filter_map(|axis| metrics.get(*axis).map(|m| line(axis, m)))
        .collect())
}

fn line(axis: &str, m: &AxisMetrics) -> String {
    json!({
        "axis": axis,
        "ari": m.ari,
        "ari_degenerate": m.ari_degenerate,
        "sensitivity": m.sensitivity,
        "specificity": m.specificity,
    })
    .to_string()
}

pub fn bench(a: &BenchArgs) -> CliResult<()> {
    let stop = if a.true_k {
        StopChoice::TrueK
    } else {
        StopChoice::Rule(a.stop.rule()?)
    };
    let spec = BenchSpec {
        preset: a.preset.clone(),
        n_list: a.n_list.clone(),
        reps: a.reps,
        methods: a.methods.clone(),
        seed: a.seed,
        settings: RunSettings {
            stop,
            split: a.split == SplitArg::Seeded,
            standardize: true,
        },
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = a.threads {
        if t == 0 {
            return Err(CliError::usage("thread count must be positive"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker threads: {e}")))?;
    let rows = pool.install(|| run_bench(&spec))?;
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(|e| CliError::usage(format!("cannot format table: {e}")))?;
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("ASCII output"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn stop_flags_map_to_rules() {
        let parse = |args: &[&str]| {
            let cli = Cli::try_parse_from([&["codclust", "cluster", "d"], args].concat())?;
            let Command::Cluster(c) = cli.command else {
                unreachable!()
            };
            Ok::<_, clap::Error>(c.stop.rule())
        };
        assert_eq!(parse(&["--alpha", "0.3"]).unwrap().unwrap(), StopRule::Threshold(0.3));
        assert_eq!(parse(&["--k", "4"]).unwrap().unwrap(), StopRule::Clusters(4));
        assert_eq!(parse(&[]).unwrap().unwrap(), StopRule::default());
        let tuned = parse(&["--tune", "--tune-evals", "1"]).unwrap().unwrap();
        assert_eq!(
            tuned,
            StopRule::Tuned(TuneSpec {
                evaluations: 1,
                ..TuneSpec::default()
            })
        );
        assert!(parse(&["--alpha", "0.3", "--k", "2"]).is_err());
        assert!(matches!(
            parse(&["--k", "2", "--tune-evals", "3"]).unwrap(),
            Err(CliError::Usage(_))
        ));
    }
}
