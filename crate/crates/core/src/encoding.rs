//! Random linear encodings θ = Ω·u + β and the machine that owns them.
//!
//! An [`EncodingStructure`] fixes which input components feed each circuit
//! parameter (the sparsity mask of Ω). A [`QksMachine`] samples one
//! (Ω, β) pair per episode and layer, once, and reuses them for every
//! input it sees afterwards.

use std::f64::consts::TAU;

use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quil::CircuitTemplate;
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    /// One parameter fed by every input component.
    Dense,
    /// One input component per parameter.
    Split,
    /// Disjoint blocks of components, one block per parameter.
    Tiled,
    Custom,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("input dimension must be positive")]
    EmptyInput,
    #[error("at least one encoded parameter is required")]
    NoRows,
    #[error("tiled encoding needs q | p, got p = {p}, q = {q}")]
    NotDivisible { p: usize, q: usize },
    #[error("row {row} selects no input component")]
    EmptyRow { row: usize },
    #[error("row {row} references component {index} but p = {p}")]
    IndexOutOfRange { row: usize, index: usize, p: usize },
    #[error("row {row} lists component {index} twice")]
    DuplicateIndex { row: usize, index: usize },
    #[error("mask rows must all have the same number of nonzeros ({expected}), row {row} has {got}")]
    UnequalRows { row: usize, expected: usize, got: usize },
    #[error("tiles overlap at component {index}")]
    Overlap { index: usize },
}

/// Sparsity pattern of Ω: for each of the q rows, the sorted list of input
/// components with a nonzero weight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingStructure {
    input_dim: usize,
    pattern: Pattern,
    rows: Vec<Vec<usize>>,
}

impl EncodingStructure {
    /// q = 1, r = p.
    pub fn dense(p: usize) -> Result<Self, StructureError> {
        Self::build(p, Pattern::Dense, vec![(0..p).collect()])
    }

    /// q = p, r = 1.
    pub fn split(p: usize) -> Result<Self, StructureError> {
        Self::build(p, Pattern::Split, (0..p).map(|j| vec![j]).collect())
    }

    /// q contiguous blocks of r = p/q components.
    pub fn tiled(p: usize, q: usize) -> Result<Self, StructureError> {
        if q == 0 {
            return Err(StructureError::NoRows);
        }
        if !p.is_multiple_of(q) {
            return Err(StructureError::NotDivisible { p, q });
        }
        let r = p / q;
        Self::build(
            p,
            Pattern::Tiled,
            (0..q).map(|k| (k * r..(k + 1) * r).collect()).collect(),
        )
    }

    /// No encoded parameters, for templates without parameters.
    pub fn empty(p: usize) -> Result<Self, StructureError> {
        if p == 0 {
            return Err(StructureError::EmptyInput);
        }
        Ok(EncodingStructure {
            input_dim: p,
            pattern: Pattern::Custom,
            rows: Vec::new(),
        })
    }

    /// Disjoint index sets, one per parameter. Sets need not cover every
    /// component or share a size.
    pub fn from_tiles(p: usize, tiles: Vec<Vec<usize>>) -> Result<Self, StructureError> {
        let mut owner = vec![false; p];
        for tile in &tiles {
            for &j in tile {
                if j < p {
                    if owner[j] {
                        return Err(StructureError::Overlap { index: j });
                    }
                    owner[j] = true;
                }
            }
        }
        Self::build(p, Pattern::Tiled, tiles)
    }

    /// Boolean mask, q rows by p columns, each row with the same count r.
    pub fn from_mask(mask: &[Vec<bool>]) -> Result<Self, StructureError> {
        let p = mask.first().map_or(0, Vec::len);
        let rows: Vec<Vec<usize>> = mask
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &m)| m).map(|(j, _)| j).collect())
            .collect();
        if let Some(first) = rows.first() {
            for (k, row) in rows.iter().enumerate() {
                if row.len() != first.len() {
                    return Err(StructureError::UnequalRows {
                        row: k,
                        expected: first.len(),
                        got: row.len(),
                    });
                }
            }
        }
        for (k, row) in mask.iter().enumerate() {
            if row.len() != p {
                return Err(StructureError::IndexOutOfRange {
                    row: k,
                    index: row.len(),
                    p,
                });
            }
        }
        Self::build(p, Pattern::Custom, rows)
    }

    fn build(p: usize, pattern: Pattern, mut rows: Vec<Vec<usize>>) -> Result<Self, StructureError> {
        if p == 0 {
            return Err(StructureError::EmptyInput);
        }
        if rows.is_empty() {
            return Err(StructureError::NoRows);
        }
        for (k, row) in rows.iter_mut().enumerate() {
            if row.is_empty() {
                return Err(StructureError::EmptyRow { row: k });
            }
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(StructureError::DuplicateIndex { row: k, index: w[0] });
                }
            }
            if let Some(&j) = row.last().filter(|&&j| j >= p) {
                return Err(StructureError::IndexOutOfRange { row: k, index: j, p });
            }
        }
        Ok(EncodingStructure {
            input_dim: p,
            pattern,
            rows,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of encoded parameters per layer.
    pub fn q(&self) -> usize {
        self.rows.len()
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    pub fn row(&self, k: usize) -> &[usize] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// r, when every row has the same number of nonzeros.
    pub fn nonzeros_per_row(&self) -> Option<usize> {
        let r = self.rows.first()?.len();
        self.rows.iter().all(|row| row.len() == r).then_some(r)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn mask(&self) -> Vec<Vec<bool>> {
        self.rows
            .iter()
            .map(|row| {
                let mut m = vec![false; self.input_dim];
                for &j in row {
                    m[j] = true;
                }
                m
            })
            .collect()
    }
}

/// Ω and β for one episode. `omega` holds only the nonzero weights, row by
/// row and layer by layer, in the order of [`EncodingStructure::rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeEncoding {
    omega: Vec<f64>,
    beta: Vec<f64>,
}

impl EpisodeEncoding {
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn omega_values(&self) -> &[f64] {
        &self.omega
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MachineError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("sigma must be positive and finite, got {0}")]
    Sigma(f64),
    #[error("episode count must be positive")]
    NoEpisodes,
    #[error("layer count must be positive")]
    NoLayers,
    #[error("template `{template}` has {params} parameters but the encoding produces {q}")]
    ParamMismatch { template: String, params: usize, q: usize },
    #[error("{0}")]
    Simulator(#[from] crate::statevector::SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub sigma: f64,
    pub episodes: usize,
    pub seed: u64,
    pub layers: usize,
}

impl MachineConfig {
    pub fn new(sigma: f64, episodes: usize, seed: u64) -> Self {
        MachineConfig {
            sigma,
            episodes,
            seed,
            layers: 1,
        }
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }
}

/// A sampled quantum kitchen sink: template, encoding structure and the
/// frozen per-episode (Ω, β).
#[derive(Debug, Clone)]
pub struct QksMachine {
    base_template: CircuitTemplate,
    template: CircuitTemplate,
    structure: EncodingStructure,
    config: MachineConfig,
    offsets: Vec<usize>,
    episodes: Vec<EpisodeEncoding>,
}

impl QksMachine {
    pub fn sample(
        template: &CircuitTemplate,
        structure: EncodingStructure,
        config: MachineConfig,
    ) -> Result<Self, MachineError> {
        if !(config.sigma > 0.0 && config.sigma.is_finite()) {
            return Err(MachineError::Sigma(config.sigma));
        }
        if config.episodes == 0 {
            return Err(MachineError::NoEpisodes);
        }
        if config.layers == 0 {
            return Err(MachineError::NoLayers);
        }
        if template.num_params() != structure.q() {
            return Err(MachineError::ParamMismatch {
                template: template.name().to_string(),
                params: template.num_params(),
                q: structure.q(),
            });
        }
        crate::statevector::Workspace::for_template(template)?;

        let mut offsets = Vec::with_capacity(structure.q() + 1);
        let mut acc = 0;
        for row in structure.rows() {
            offsets.push(acc);
            acc += row.len();
        }
        offsets.push(acc);

        let episodes = (0..config.episodes)
            .map(|e| sample_episode(&structure, &config, e as u64))
            .collect();
        Ok(QksMachine {
            base_template: template.clone(),
            template: template.layered(config.layers),
            structure,
            config,
            offsets,
            episodes,
        })
    }

    /// The template actually simulated (layers concatenated).
    pub fn template(&self) -> &CircuitTemplate {
        &self.template
    }

    pub fn base_template(&self) -> &CircuitTemplate {
        &self.base_template
    }

    pub fn structure(&self) -> &EncodingStructure {
        &self.structure
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn sigma(&self) -> f64 {
        self.config.sigma
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn layers(&self) -> usize {
        self.config.layers
    }

    pub fn num_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.template.num_qubits()
    }

    pub fn input_dim(&self) -> usize {
        self.structure.input_dim()
    }

    /// Circuit parameters per episode, all layers included.
    pub fn num_params(&self) -> usize {
        self.structure.q() * self.config.layers
    }

    pub fn episode(&self, e: usize) -> &EpisodeEncoding {
        &self.episodes[e]
    }

    /// Dense Ω for episode `e`, `num_params() × p`.
    pub fn omega_dense(&self, e: usize) -> Vec<Vec<f64>> {
        let q = self.structure.q();
        let ep = &self.episodes[e];
        (0..self.num_params())
            .map(|row| {
                let (l, k) = (row / q, row % q);
                let base = l * self.structure.nnz() + self.offsets[k];
                let mut dense = vec![0.0; self.input_dim()];
                for (t, &j) in self.structure.row(k).iter().enumerate() {
                    dense[j] = ep.omega[base + t];
                }
                dense
            })
            .collect()
    }

    /// Copies the components of `u` that feed each row into `buf`, in the
    /// same order as the stored Ω weights.
    pub fn gather_into(&self, u: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        for row in self.structure.rows() {
            buf.extend(row.iter().map(|&j| u[j]));
        }
    }

    /// θ for episode `e` from an input already passed through
    /// [`gather_into`](Self::gather_into).
    #[inline]
    pub fn encode_gathered(&self, gathered: &[f64], e: usize, theta: &mut [f64]) {
        let ep = &self.episodes[e];
        let q = self.structure.q();
        let nnz = self.structure.nnz();
        for l in 0..self.config.layers {
            let weights = &ep.omega[l * nnz..(l + 1) * nnz];
            for k in 0..q {
                let span = self.offsets[k]..self.offsets[k + 1];
                theta[l * q + k] = dot(&weights[span.clone()], &gathered[span]) + ep.beta[l * q + k];
            }
        }
    }

    /// θ = Ω_e·u + β_e.
    pub fn encode(&self, u: &[f64], e: usize) -> Vec<f64> {
        assert_eq!(u.len(), self.input_dim(), "input dimension");
        let mut buf = Vec::with_capacity(self.structure.nnz());
        self.gather_into(u, &mut buf);
        let mut theta = vec![0.0; self.num_params()];
        self.encode_gathered(&buf, e, &mut theta);
        theta
    }
}

fn sample_episode(structure: &EncodingStructure, config: &MachineConfig, e: u64) -> EpisodeEncoding {
    let q = structure.q();
    let nnz = structure.nnz();
    let phase = Uniform::new(0.0, TAU);
    let mut omega = Vec::with_capacity(nnz * config.layers);
    let mut beta = Vec::with_capacity(q * config.layers);
    for l in 0..config.layers {
        let mut rng = substream(config.seed, Purpose::Encoding, e, l as u64);
        beta.extend((0..q).map(|_| phase.sample(&mut rng)));
        omega.extend((0..nnz).map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            config.sigma * z
        }));
    }
    EpisodeEncoding { omega, beta }
}

/// Four-lane dot product.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::Ansatz;

    fn machine(structure: EncodingStructure, ansatz: Ansatz, sigma: f64, e: usize) -> QksMachine {
        QksMachine::sample(&ansatz.template(), structure, MachineConfig::new(sigma, e, 42)).unwrap()
    }

    #[test]
    fn split_has_one_entry_per_row() {
        let m = machine(EncodingStructure::split(2).unwrap(), Ansatz::Cnot2, 1.0, 20);
        for e in 0..20 {
            let om = m.omega_dense(e);
            assert_eq!(om[0][1], 0.0);
            assert_eq!(om[1][0], 0.0);
            assert_ne!(om[0][0], 0.0);
            assert_ne!(om[1][1], 0.0);
            assert!(m.episode(e).beta().iter().all(|b| (0.0..TAU).contains(b)));
        }
    }

    #[test]
    fn tiled_784_by_4() {
        let s = EncodingStructure::tiled(784, 4).unwrap();
        assert_eq!(s.nonzeros_per_row(), Some(196));
        assert_eq!(s.row(1)[0], 196);
        assert_eq!(
            EncodingStructure::tiled(784, 3).unwrap_err(),
            StructureError::NotDivisible { p: 784, q: 3 }
        );
    }

    #[test]
    fn rejects_bad_config() {
        let t = Ansatz::Cnot2.template();
        let s = EncodingStructure::split(2).unwrap();
        for sigma in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                QksMachine::sample(&t, s.clone(), MachineConfig::new(sigma, 5, 0)),
                Err(MachineError::Sigma(_))
            ));
        }
        assert_eq!(
            QksMachine::sample(&t, s.clone(), MachineConfig::new(1.0, 0, 0)).unwrap_err(),
            MachineError::NoEpisodes
        );
        assert!(matches!(
            QksMachine::sample(&t, EncodingStructure::dense(2).unwrap(), MachineConfig::new(1.0, 3, 0)),
            Err(MachineError::ParamMismatch { .. })
        ));
    }

    #[test]
    fn zero_input_gives_beta() {
        let m = machine(EncodingStructure::tiled(8, 2).unwrap(), Ansatz::Cnot2, 0.7, 10);
        for e in 0..10 {
            assert_eq!(m.encode(&[0.0; 8], e), m.episode(e).beta());
        }
    }

    #[test]
    fn dense_encoding_is_scalar() {
        let m = machine(EncodingStructure::dense(2).unwrap(), Ansatz::Rx1, 1.3, 4);
        let u = [0.4, -1.1];
        for e in 0..4 {
            let om = m.omega_dense(e);
            let theta = m.encode(&u, e);
            assert_eq!(theta.len(), 1);
            let expect = om[0][0] * u[0] + om[0][1] * u[1] + m.episode(e).beta()[0];
            assert!((theta[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn tiny_sigma_collapses_to_beta() {
        let m = machine(
            EncodingStructure::split(2).unwrap(),
            Ansatz::Cnot2,
            f64::MIN_POSITIVE,
            10,
        );
        for e in 0..10 {
            assert_eq!(m.encode(&[3.0, -7.5], e), m.episode(e).beta());
        }
    }

    #[test]
    fn episodes_do_not_depend_on_count() {
        let s = EncodingStructure::split(2).unwrap();
        let small = machine(s.clone(), Ansatz::Cnot2, 1.0, 5);
        let big = machine(s, Ansatz::Cnot2, 1.0, 50);
        for e in 0..5 {
            assert_eq!(small.episode(e), big.episode(e));
        }
    }

    #[test]
    fn layers_sample_independent_encodings() {
        let t = Ansatz::Cnot2.template();
        let m = QksMachine::sample(
            &t,
            EncodingStructure::split(2).unwrap(),
            MachineConfig::new(1.0, 3, 9).with_layers(3),
        )
        .unwrap();
        assert_eq!(m.num_params(), 6);
        assert_eq!(m.template().num_params(), 6);
        let om = m.omega_dense(0);
        assert_eq!(om.len(), 6);
        assert_ne!(om[0][0], om[2][0]);
        assert_eq!(om[2][1], 0.0);
        let single =
            QksMachine::sample(&t, EncodingStructure::split(2).unwrap(), MachineConfig::new(1.0, 3, 9)).unwrap();
        assert_eq!(single.omega_dense(0)[..], om[..2]);
    }

    #[test]
    fn mask_validation() {
        let ok = EncodingStructure::from_mask(&[vec![true, false, true], vec![false, true, true]]).unwrap();
        assert_eq!(ok.nonzeros_per_row(), Some(2));
        assert!(matches!(
            EncodingStructure::from_mask(&[vec![true, false], vec![true, true]]),
            Err(StructureError::UnequalRows { .. })
        ));
        assert!(matches!(
            EncodingStructure::from_tiles(4, vec![vec![0, 1], vec![1, 2]]),
            Err(StructureError::Overlap { index: 1 })
        ));
        assert!(matches!(
            EncodingStructure::from_tiles(4, vec![vec![0, 9]]),
            Err(StructureError::IndexOutOfRange { index: 9, .. })
        ));
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..23).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..23).map(|i| (i as f64 * 1.1).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-13);
    }
}
