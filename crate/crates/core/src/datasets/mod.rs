//! Datasets: the synthetic picture frames, MNIST digit pairs, CSV tables,
//! plus train-statistics standardisation and image tiling.

mod frames;
mod idx;
mod tiles;

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::matrix::Matrix;

pub use frames::{gen_picture_frames, FramesConfig};
pub use idx::{load_mnist_pair, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use tiles::{make_tilemap, TileMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Distinguishes shot streams of train and test rows.
    pub fn stream_id(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: String, found: u32, expected: u32 },
    #[error("{path}: file truncated")]
    Truncated { path: String },
    #[error("{0}")]
    Mismatch(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("row {row} is not finite")]
    NonFinite { row: usize },
    #[error("{0}")]
    Csv(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Inputs `M × p` with labels in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Matrix,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(inputs: Matrix, labels: Vec<u8>, split: Split) -> Result<Self, DataError> {
        if inputs.rows() != labels.len() {
            return Err(DataError::Mismatch(format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l > 1) {
            return Err(DataError::Mismatch(format!("label {l} is not 0 or 1")));
        }
        if let Some(row) = (0..inputs.rows()).find(|&i| !inputs.row(i).iter().all(|x| x.is_finite())) {
            return Err(DataError::NonFinite { row });
        }
        Ok(LabeledDataset { inputs, labels, split })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    /// SHA-256 over dimensions, inputs (little-endian f64) and labels.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.inputs.rows() as u64).to_le_bytes());
        h.update((self.inputs.cols() as u64).to_le_bytes());
        for x in self.inputs.as_slice() {
            h.update(x.to_le_bytes());
        }
        h.update(&self.labels);
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `x0,x1,…,label` rows with a header.
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let io_err = |e: csv::Error| DataError::Csv(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io_err)?;
        let mut header: Vec<String> = match self.dim() {
            2 => vec!["x".into(), "y".into()],
            d => (0..d).map(|j| format!("x{j}")).collect(),
        };
        header.push("label".into());
        w.write_record(&header).map_err(io_err)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.inputs.row(i).iter().map(|x| format!("{x:?}")).collect();
            rec.push(self.labels[i].to_string());
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| DataError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Reads a CSV with a header row; the last column is the 0/1 label.
    pub fn read_csv(path: &Path, split: Split) -> Result<Self, DataError> {
        let ctx = |e: csv::Error| DataError::Csv(format!("{}: {e}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(ctx)?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(ctx)?;
            let fields: Vec<&str> = rec.iter().collect();
            let Some((label, xs)) = fields.split_last() else {
                continue;
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| DataError::Csv(format!("{}: row {}: bad number `{s}`", path.display(), n + 1)))
            };
            let label = parse(label)?;
            if label != 0.0 && label != 1.0 {
                return Err(DataError::Csv(format!(
                    "{}: row {}: label must be 0 or 1",
                    path.display(),
                    n + 1
                )));
            }
            labels.push(label as u8);
            rows.push(xs.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?);
        }
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let p = rows[0].len();
        if let Some(n) = rows.iter().position(|r| r.len() != p) {
            return Err(DataError::Csv(format!(
                "{}: row {} has a different width",
                path.display(),
                n + 1
            )));
        }
        LabeledDataset::new(Matrix::from_rows(&rows), labels, split)
    }
}

/// Per-feature train statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant feature.
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &Matrix) -> Self {
        let (m, d) = (x.rows(), x.cols());
        let mut mean = vec![0.0; d];
        for row in x.iter_rows() {
            for (a, v) in mean.iter_mut().zip(row) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m.max(1) as f64);
        let mut var = vec![0.0; d];
        for row in x.iter_rows() {
            for ((a, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                *a += (v - mu) * (v - mu);
            }
        }
        let std = var.iter().map(|v| (v / m.max(1) as f64).sqrt()).collect();
        Standardization { mean, std }
    }

    /// `(x - mean) / std`, with constant features mapped to 0.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *sd > 0.0 { (*v - mu) / sd } else { 0.0 };
            }
        }
        out
    }
}

/// Fits on `train` only and applies to both.
pub fn standardize(train: &LabeledDataset, test: &LabeledDataset) -> (LabeledDataset, LabeledDataset, Standardization) {
    let stats = Standardization::fit(&train.inputs);
    let tr = LabeledDataset {
        inputs: stats.apply(&train.inputs),
        labels: train.labels.clone(),
        split: train.split,
    };
    let te = LabeledDataset {
        inputs: stats.apply(&test.inputs),
        labels: test.labels.clone(),
        split: test.split,
    };
    (tr, te, stats)
}
