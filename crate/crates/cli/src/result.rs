//! The JSON file written by `cluster` and read back by `evaluate`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use codclust_core::pipeline::BlockTrace;
use codclust_core::{ari_score, sensitivity_specificity, Partition, StepTrace};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{Dataset, Truth};
use crate::error::{CliError, CliResult};

pub const TOOL: &str = "codclust";

/// Agreement of one estimated axis partition with the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMetrics {
    pub ari: f64,
    /// Both partitions were trivial, so the chance correction was 0/0.
    pub ari_degenerate: bool,
    /// `None` when the reference has no within-cluster pairs.
    pub sensitivity: Option<f64>,
    /// `None` when the reference has no between-cluster pairs.
    pub specificity: Option<f64>,
}

impl AxisMetrics {
    pub fn compute(truth: &Partition, est: &Partition) -> CliResult<Self> {
        let a = ari_score(truth, est).map_err(CliError::at("evaluate"))?;
        let s = sensitivity_specificity(truth, est).map_err(CliError::at("evaluate"))?;
        Ok(AxisMetrics {
            ari: a.value,
            ari_degenerate: a.degenerate,
            sensitivity: (!s.sensitivity_undefined).then_some(s.sensitivity),
            specificity: (!s.specificity_undefined).then_some(s.specificity),
        })
    }
}

/// Estimated partitions by axis name; the same shape as a data set's
/// reference labels, and accepted as a bare labels file by `evaluate`.
pub type Partitions = Truth;

/// Metrics for every axis present in both `truth` and `est`.
pub fn metrics_against(truth: &Partitions, est: &Partitions) -> CliResult<BTreeMap<String, AxisMetrics>> {
    let mut out = BTreeMap::new();
    for axis in Partitions::AXES {
        if let (Some(t), Some(e)) = (truth.axis(axis), est.axis(axis)) {
            out.insert(axis.to_string(), AxisMetrics::compute(t, e)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub tool: String,
    pub version: String,
    /// The data set path as given on the command line.
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub options: Value,
    pub partitions: Partitions,
    #[serde(default)]
    pub trace: Vec<StepTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<BlockTrace>>,
    /// Present when the data set carried reference partitions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, AxisMetrics>,
}

impl ResultFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_json()).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
    }
}

/// Reads partitions from a data set (its reference labels), a result file,
/// or a bare `{"rows": [...], "cols": [...]}` labels file.
pub fn load_partitions(path: &Path) -> CliResult<Partitions> {
    let from_dataset = || Ok(Dataset::read(path)?.truth().cloned().unwrap_or_default());
    if path.is_dir() {
        return from_dataset();
    }
    let value = read_json(path)?;
    if value.get("format").is_some() {
        return from_dataset();
    }
    let labels = match value.get("partitions") {
        Some(p) if value.get("tool").is_some() => p.clone(),
        _ => value,
    };
    serde_json::from_value(labels).map_err(|e| CliError::usage(format!("{}: not a labels file: {e}", path.display())))
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: invalid JSON: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(labels: &[usize]) -> Partition {
        Partition::from_labels(labels).unwrap()
    }

    #[test]
    fn metrics_cover_shared_axes_only() {
        let truth = Partitions {
            rows: Some(p(&[0, 0, 1, 1])),
            cols: Some(p(&[0, 1, 2])),
            ..Default::default()
        };
        let est = Partitions {
            rows: Some(p(&[0, 0, 1, 2])),
            ..Default::default()
        };
        let m = metrics_against(&truth, &est).unwrap();
        assert_eq!(m.keys().collect::<Vec<_>>(), ["rows"]);
        let r = m["rows"];
        assert_eq!(r.specificity, Some(1.0));
        assert_eq!(r.sensitivity, Some(0.5));
        assert!(!r.ari_degenerate);
    }

    #[test]
    fn undefined_rates_are_null() {
        let truth = p(&[0, 1, 2]);
        let m = AxisMetrics::compute(&truth, &truth).unwrap();
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.specificity, Some(1.0));
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"sensitivity\":null"));
    }

    #[test]
    fn loads_bare_labels_and_result_files() {
        let dir = tempfile::tempdir().unwrap();
        let bare = dir.path().join("labels.json");
        fs::write(&bare, r#"{"rows":[3,3,7],"cols":[1,0]}"#).unwrap();
        let parts = load_partitions(&bare).unwrap();
        assert_eq!(parts.rows, Some(p(&[0, 0, 1])));
        assert_eq!(parts.cols, Some(p(&[0, 1])));

        let result = ResultFile {
            tool: TOOL.into(),
            version: "0".into(),
            dataset: "x".into(),
            method: "naive".into(),
            seed: 1,
            options: Value::Null,
            partitions: parts.clone(),
            trace: vec![],
            blocks: None,
            metrics: BTreeMap::new(),
        };
        let path = dir.path().join("result.json");
        result.write(&path).unwrap();
        assert_eq!(load_partitions(&path).unwrap(), parts);
        let back: ResultFile = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, result);

        fs::write(&bare, "[1,2").unwrap();
        assert!(matches!(load_partitions(&bare), Err(CliError::Usage(_))));
    }
}
