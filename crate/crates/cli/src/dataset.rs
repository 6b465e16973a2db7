//! On-disk data sets: a JSON manifest next to a plain-text data file.
//!
//! The data file has one line per sample holding the row-major flattening
//! of that sample, written with 17 significant digits so every `f64` reads
//! back bit-for-bit. Three-way samples are flattened as `(j, p, q)` with `q`
//! fastest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use codclust_core::simulate::{SimulatedMatrix, SimulatedTensor};
use codclust_core::{DataSet, Design, Partition, TensorDataSet};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const DATA_NAME: &str = "data.txt";
const FORMAT: &str = "codclust-dataset";

/// Reference partitions stored with a data set. For three-way data `rows`,
/// `cols` and `tubes` refer to modes 1, 2 and 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tubes: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_rows: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_cols: Option<Partition>,
}

impl Truth {
    pub const AXES: [&'static str; 5] = ["rows", "cols", "tubes", "mean_rows", "mean_cols"];

    pub fn axis(&self, name: &str) -> Option<&Partition> {
        match name {
            "rows" => self.rows.as_ref(),
            "cols" => self.cols.as_ref(),
            "tubes" => self.tubes.as_ref(),
            "mean_rows" => self.mean_rows.as_ref(),
            "mean_cols" => self.mean_cols.as_ref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub design: Design,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub n: usize,
    /// Leading mode size for three-way data; absent for matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    pub p: usize,
    pub q: usize,
    pub layout: String,
    pub data_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Truth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Manifest {
    fn values_per_sample(&self) -> usize {
        self.j.unwrap_or(1) * self.p * self.q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Matrix(DataSet),
    Tensor(TensorDataSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Samples,
}

impl Dataset {
    pub fn from_matrix(data: DataSet, truth: Option<Truth>, provenance: Option<Provenance>) -> Self {
        let manifest = Manifest {
            format: FORMAT.into(),
            version: 1,
            n: data.n(),
            j: None,
            p: data.p(),
            q: data.q(),
            layout: "row-major".into(),
            data_file: DATA_NAME.into(),
            truth,
            provenance,
        };
        Dataset {
            manifest,
            samples: Samples::Matrix(data),
        }
    }

    pub fn from_tensor(data: TensorDataSet, truth: Option<Truth>, provenance: Option<Provenance>) -> Self {
        let [j, p, q] = data.dims();
        let manifest = Manifest {
            format: FORMAT.into(),
            version: 1,
            n: data.n(),
            j: Some(j),
            p,
            q,
            layout: "row-major".into(),
            data_file: DATA_NAME.into(),
            truth,
            provenance,
        };
        Dataset {
            manifest,
            samples: Samples::Tensor(data),
        }
    }

    pub fn from_simulated_matrix(sim: &SimulatedMatrix, provenance: Option<Provenance>) -> Self {
        let truth = Truth {
            rows: Some(sim.rows.clone()),
            cols: Some(sim.cols.clone()),
            tubes: None,
            mean_rows: sim.mean_rows.clone(),
            mean_cols: sim.mean_cols.clone(),
        };
        Self::from_matrix(sim.data.clone(), Some(truth), provenance)
    }

    pub fn from_simulated_tensor(sim: &SimulatedTensor, provenance: Option<Provenance>) -> Self {
        let [r, c, t] = sim.truth.clone();
        let truth = Truth {
            rows: Some(r),
            cols: Some(c),
            tubes: Some(t),
            ..Truth::default()
        };
        Self::from_tensor(sim.data.clone(), Some(truth), provenance)
    }

    pub fn truth(&self) -> Option<&Truth> {
        self.manifest.truth.as_ref()
    }

    /// Writes `manifest.json` and the data file into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, manifest + "\n").map_err(|e| io_error(&path, e))?;
        let path = dir.join(&self.manifest.data_file);
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let n = self.manifest.n;
        for i in 0..n {
            let values = match &self.samples {
                Samples::Matrix(d) => d.row_major(i),
                Samples::Tensor(t) => t.samples()[i].values().to_vec(),
            };
            let line: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(" ")).map_err(|e| io_error(&path, e))?;
        }
        out.flush().map_err(|e| io_error(&path, e))
    }

    /// Reads a data set from its directory or from the manifest path.
    pub fn read(path: &Path) -> CliResult<Self> {
        let manifest_path = manifest_path(path);
        let text = fs::read_to_string(&manifest_path).map_err(|e| io_error(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: bad manifest: {e}", manifest_path.display())))?;
        if manifest.format != FORMAT {
            return Err(CliError::usage(format!(
                "{}: not a {FORMAT} manifest",
                manifest_path.display()
            )));
        }
        if manifest.layout != "row-major" {
            return Err(CliError::usage(format!("unsupported layout '{}'", manifest.layout)));
        }
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let data_path = base.join(&manifest.data_file);
        let text = fs::read_to_string(&data_path).map_err(|e| io_error(&data_path, e))?;
        let rows = parse_lines(&text, &data_path, manifest.n, manifest.values_per_sample())?;
        let bad = |e: codclust_core::CodError| CliError::usage(format!("{}: {e}", data_path.display()));
        let samples = match manifest.j {
            None => Samples::Matrix(DataSet::from_row_major(manifest.p, manifest.q, &rows).map_err(bad)?),
            Some(j) => Samples::Tensor(TensorDataSet::from_row_major([j, manifest.p, manifest.q], &rows).map_err(bad)?),
        };
        let ds = Dataset { manifest, samples };
        ds.check_truth()?;
        Ok(ds)
    }

    fn check_truth(&self) -> CliResult<()> {
        let Some(t) = &self.manifest.truth else {
            return Ok(());
        };
        let (rows, cols, tubes) = match self.manifest.j {
            None => (self.manifest.p, self.manifest.q, None),
            Some(j) => (j, self.manifest.p, Some(self.manifest.q)),
        };
        let checks = [
            ("rows", t.rows.as_ref(), Some(rows)),
            ("cols", t.cols.as_ref(), Some(cols)),
            ("tubes", t.tubes.as_ref(), tubes),
            ("mean_rows", t.mean_rows.as_ref(), Some(rows)),
            ("mean_cols", t.mean_cols.as_ref(), Some(cols)),
        ];
        for (name, part, want) in checks {
            if let Some(part) = part {
                if Some(part.len()) != want {
                    return Err(CliError::usage(format!(
                        "truth '{name}' has {} labels but the data has {}",
                        part.len(),
                        want.map_or("no such axis".to_string(), |w| w.to_string())
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    }
}

fn parse_lines(text: &str, path: &Path, n: usize, per_line: usize) -> CliResult<Vec<Vec<f64>>> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != n {
        return Err(CliError::usage(format!(
            "{}: manifest says n = {n} but the file has {} sample lines",
            path.display(),
            lines.len()
        )));
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| CliError::usage(format!("{}:{}: cannot parse '{tok}'", path.display(), i + 1)))
                })
                .collect::<CliResult<_>>()?;
            if values.len() != per_line {
                return Err(CliError::usage(format!(
                    "{}:{}: expected {per_line} values, found {}",
                    path.display(),
                    i + 1,
                    values.len()
                )));
            }
            Ok(values)
        })
        .collect()
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}
