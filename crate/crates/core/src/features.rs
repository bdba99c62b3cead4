//! Single-shot feature extraction and the bit-packed feature matrix.
//!
//! Row `i` of a [`FeatureMatrix`] is the concatenation of one shot per
//! episode on input `i`: bit `e * n + j` is qubit `j` of episode `e`, where
//! `n` is the ansatz qubit count. Rows are packed LSB-first into `u64` words.
//!
//! On disk a matrix is a 16-byte header (`b"QKSF"`, version `u32`, row count
//! `u64`, all little-endian) followed by the row-major words. The column
//! count lives in a JSON sidecar next to the file.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::Split;
use crate::encoding::{EncodingStructure, Pattern, QksMachine};
use crate::matrix::Matrix;
use crate::rng::shot_stream;
use crate::statevector::Workspace;

pub const MAGIC: [u8; 4] = *b"QKSF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        FeatureMatrix {
            rows,
            cols,
            words_per_row,
            words: vec![0; rows * words_per_row],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(j < self.cols);
        (self.row_words(i)[j / 64] >> (j % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        let w = &mut self.words[i * self.words_per_row + j / 64];
        if value {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Keeps the first `cols` columns.
    pub fn truncate_cols(&self, cols: usize) -> FeatureMatrix {
        assert!(cols <= self.cols, "cannot widen a feature matrix");
        let mut out = FeatureMatrix::zeros(self.rows, cols);
        let wpr = out.words_per_row;
        for i in 0..self.rows {
            let dst = &mut out.words[i * wpr..(i + 1) * wpr];
            dst.copy_from_slice(&self.row_words(i)[..wpr]);
            if !cols.is_multiple_of(64) {
                dst[wpr - 1] &= (1u64 << (cols % 64)) - 1;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let row = m.row_mut(i);
            for (j, x) in row.iter_mut().enumerate() {
                *x = if self.get(i, j) { 1.0 } else { 0.0 };
            }
        }
        m
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.words.len() * 8);
        for word in &self.words {
            buf.extend_from_slice(&word.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Decodes a matrix whose column count is known from the sidecar.
    pub fn from_bytes(bytes: &[u8], cols: usize) -> Result<Self, FeatureFileError> {
        if bytes.len() < 16 {
            return Err(FeatureFileError::Truncated);
        }
        if bytes[0..4] != MAGIC {
            return Err(FeatureFileError::BadMagic);
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(FeatureFileError::Version(version));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let payload = &bytes[16..];
        let wpr = cols.div_ceil(64);
        if !payload.len().is_multiple_of(8) || payload.len() / 8 != rows * wpr {
            return Err(FeatureFileError::Size {
                rows,
                cols,
                bytes: payload.len(),
            });
        }
        let words: Vec<u64> = payload
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = FeatureMatrix {
            rows,
            cols,
            words_per_row: wpr,
            words,
        };
        if !cols.is_multiple_of(64) {
            let pad = !((1u64 << (cols % 64)) - 1);
            if (0..rows).any(|i| m.row_words(i)[wpr - 1] & pad != 0) {
                return Err(FeatureFileError::PaddingBits);
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Error)]
pub enum FeatureFileError {
    #[error("not a feature file (bad magic)")]
    BadMagic,
    #[error("unsupported feature file version {0}")]
    Version(u32),
    #[error("feature file truncated")]
    Truncated,
    #[error("payload of {bytes} bytes does not hold {rows} rows of {cols} columns")]
    Size { rows: usize, cols: usize, bytes: usize },
    #[error("nonzero padding bits past the last column")]
    PaddingBits,
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// JSON sidecar written next to a feature file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetadata {
    pub template: String,
    pub num_qubits: usize,
    pub sigma: f64,
    pub episodes: usize,
    pub seed: u64,
    pub layers: usize,
    pub structure: StructureSummary,
    pub split: Split,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSummary {
    pub pattern: Pattern,
    pub p: usize,
    pub q: usize,
    pub r: Option<usize>,
}

impl From<&EncodingStructure> for StructureSummary {
    fn from(s: &EncodingStructure) -> Self {
        StructureSummary {
            pattern: s.pattern(),
            p: s.input_dim(),
            q: s.q(),
            r: s.nonzeros_per_row(),
        }
    }
}

impl FeatureMetadata {
    pub fn describe(machine: &QksMachine, split: Split, features: &FeatureMatrix) -> Self {
        FeatureMetadata {
            template: machine.base_template().name().to_string(),
            num_qubits: machine.num_qubits(),
            sigma: machine.sigma(),
            episodes: machine.num_episodes(),
            seed: machine.seed(),
            layers: machine.layers(),
            structure: machine.structure().into(),
            split,
            rows: features.rows(),
            cols: features.cols(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn save_features(path: &Path, features: &FeatureMatrix, meta: &FeatureMetadata) -> Result<(), FeatureFileError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    features.write_to(&mut file)?;
    file.flush()?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<(FeatureMatrix, FeatureMetadata), FeatureFileError> {
    let meta: FeatureMetadata = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    let features = FeatureMatrix::from_bytes(&fs::read(path)?, meta.cols)?;
    if features.rows() != meta.rows {
        return Err(FeatureFileError::Size {
            rows: meta.rows,
            cols: meta.cols,
            bytes: features.words.len() * 8,
        });
    }
    Ok((features, meta))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeaturizeError {
    #[error("input has {got} columns, machine expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("input row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("could not build a worker pool: {0}")]
    Pool(String),
}

/// Runs every episode once on every input row, on rayon's global pool.
pub fn featurize(machine: &QksMachine, inputs: &Matrix, split: Split) -> Result<FeatureMatrix, FeaturizeError> {
    check_inputs(machine, inputs)?;
    Ok(featurize_rows(machine, inputs, split))
}

/// As [`featurize`], on a dedicated pool of `workers` threads. The result is
/// identical for every worker count.
pub fn featurize_with_workers(
    machine: &QksMachine,
    inputs: &Matrix,
    split: Split,
    workers: usize,
) -> Result<FeatureMatrix, FeaturizeError> {
    check_inputs(machine, inputs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| FeaturizeError::Pool(e.to_string()))?;
    Ok(pool.install(|| featurize_rows(machine, inputs, split)))
}

fn check_inputs(machine: &QksMachine, inputs: &Matrix) -> Result<(), FeaturizeError> {
    if inputs.cols() != machine.input_dim() {
        return Err(FeaturizeError::Dimension {
            expected: machine.input_dim(),
            got: inputs.cols(),
        });
    }
    if let Some(row) = (0..inputs.rows()).find(|&i| !inputs.row(i).iter().all(|x| x.is_finite())) {
        return Err(FeaturizeError::NonFinite { row });
    }
    Ok(())
}

struct RowScratch {
    ws: Workspace,
    gathered: Vec<f64>,
    theta: Vec<f64>,
}

fn featurize_rows(machine: &QksMachine, inputs: &Matrix, split: Split) -> FeatureMatrix {
    let n = machine.num_qubits();
    let episodes = machine.num_episodes();
    let mut out = FeatureMatrix::zeros(inputs.rows(), episodes * n);
    let wpr = out.words_per_row;
    if wpr == 0 {
        return out;
    }
    let seed = machine.seed();
    let template = machine.template();
    out.words.par_chunks_mut(wpr).enumerate().for_each_init(
        || RowScratch {
            ws: Workspace::for_template(template).expect("template validated at sampling"),
            gathered: Vec::with_capacity(machine.structure().nnz()),
            theta: vec![0.0; machine.num_params()],
        },
        |scratch, (i, row)| {
            machine.gather_into(inputs.row(i), &mut scratch.gathered);
            let mut rng = shot_stream(seed, i as u64, split.stream_id(), 0);
            for e in 0..episodes {
                machine.encode_gathered(&scratch.gathered, e, &mut scratch.theta);
                let shot = scratch
                    .ws
                    .run_episode(template, &scratch.theta, &mut rng)
                    .expect("arity validated at sampling");
                let base = e * n;
                let mut bits = shot.0 as u64;
                while bits != 0 {
                    let j = base + bits.trailing_zeros() as usize;
                    row[j / 64] |= 1 << (j % 64);
                    bits &= bits - 1;
                }
            }
        },
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::Ansatz;
    use crate::encoding::MachineConfig;
    use crate::quil::CircuitTemplate;

    fn grid(m: usize) -> Matrix {
        Matrix::from_rows(
            &(0..m)
                .map(|i| vec![(i as f64 * 0.13).sin() * 2.0, (i as f64 * 0.71).cos()])
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn identity_template_gives_zero_features() {
        let id = CircuitTemplate::parse("DEFCIRCUIT ID:\n").unwrap();
        let m = QksMachine::sample(
            &id,
            EncodingStructure::empty(2).unwrap(),
            MachineConfig::new(1.0, 100, 3),
        )
        .unwrap();
        let f = featurize(&m, &grid(10), Split::Train).unwrap();
        assert_eq!(f.cols(), 100);
        assert_eq!(f.count_ones(), 0);
    }

    #[test]
    fn bits_and_truncation() {
        let mut f = FeatureMatrix::zeros(3, 130);
        f.set(0, 0, true);
        f.set(1, 64, true);
        f.set(2, 129, true);
        assert!(f.get(2, 129) && !f.get(2, 128));
        let t = f.truncate_cols(65);
        assert_eq!(t.cols(), 65);
        assert!(t.get(1, 64));
        assert_eq!(t.count_ones(), 2);
        assert_eq!(t.to_dense().get(0, 0), 1.0);
    }

    #[test]
    fn dimension_and_finiteness_checked() {
        let m = QksMachine::sample(
            &Ansatz::Cnot2.template(),
            EncodingStructure::split(2).unwrap(),
            MachineConfig::new(1.0, 4, 0),
        )
        .unwrap();
        let bad = Matrix::zeros(3, 3);
        assert_eq!(
            featurize(&m, &bad, Split::Train).unwrap_err(),
            FeaturizeError::Dimension { expected: 2, got: 3 }
        );
        let mut nan = grid(4);
        nan.row_mut(2)[1] = f64::NAN;
        assert_eq!(
            featurize(&m, &nan, Split::Train).unwrap_err(),
            FeaturizeError::NonFinite { row: 2 }
        );
    }

    #[test]
    fn layout_matches_per_episode_shots() {
        let m = QksMachine::sample(
            &Ansatz::Cnot2.template(),
            EncodingStructure::split(2).unwrap(),
            MachineConfig::new(1.0, 70, 5),
        )
        .unwrap();
        let x = grid(5);
        let f = featurize(&m, &x, Split::Test).unwrap();
        assert_eq!(f.cols(), 140);
        for i in 0..5 {
            let mut ws = Workspace::for_template(m.template()).unwrap();
            for e in 0..70 {
                let mut rng = shot_stream(5, i as u64, Split::Test.stream_id(), e as u64);
                let shot = ws.run_episode(m.template(), &m.encode(x.row(i), e), &mut rng).unwrap();
                assert_eq!(f.get(i, 2 * e), shot.bit(0));
                assert_eq!(f.get(i, 2 * e + 1), shot.bit(1));
            }
        }
    }

    #[test]
    fn file_round_trip_and_errors() {
        let mut f = FeatureMatrix::zeros(4, 70);
        for i in 0..4 {
            for j in (i..70).step_by(3) {
                f.set(i, j, true);
            }
        }
        let mut bytes = Vec::new();
        f.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"QKSF");
        assert_eq!(bytes.len(), 16 + 4 * 2 * 8);
        assert_eq!(FeatureMatrix::from_bytes(&bytes, 70).unwrap(), f);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            FeatureMatrix::from_bytes(&bad, 70),
            Err(FeatureFileError::BadMagic)
        ));
        assert!(matches!(
            FeatureMatrix::from_bytes(&bytes[..bytes.len() - 8], 70),
            Err(FeatureFileError::Size { .. })
        ));
        assert!(matches!(
            FeatureMatrix::from_bytes(&bytes, 64),
            Err(FeatureFileError::Size { .. })
        ));
        assert!(matches!(
            FeatureMatrix::from_bytes(&bytes[..10], 70),
            Err(FeatureFileError::Truncated)
        ));
    }
}
