//! Implied kernels of a sampled machine.
//!
//! For one episode the expected inner product of two single-shot bit
//! vectors is `p_uᵀ S p_v`, with `S[z][z'] = popcount(z & z')`. Averaging that
//! exact per-episode value over the machine's episodes estimates the kernel
//! integral over the encoding distribution.

use rayon::prelude::*;
use serde::Serialize;

use crate::encoding::{EncodingStructure, QksMachine};
use crate::statevector::{SimError, Workspace};

/// Shared-ones matrix over `num_qubits`-bit outcomes. Only practical for a
/// handful of qubits; [`expected_inner`] never materialises it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SMatrix {
    num_qubits: usize,
    entries: Vec<u8>,
}

impl SMatrix {
    pub fn new(num_qubits: usize) -> Self {
        assert!(num_qubits <= 12, "S has 4^q entries; keep q small");
        let n = 1usize << num_qubits;
        let entries = (0..n * n).map(|k| ((k / n) & (k % n)).count_ones() as u8).collect();
        SMatrix { num_qubits, entries }
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn get(&self, z: usize, z2: usize) -> u8 {
        self.entries[z * self.dim() + z2]
    }

    /// The bilinear form `aᵀ S b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        for (z, &az) in a.iter().enumerate().take(n) {
            if az == 0.0 {
                continue;
            }
            let row: f64 = (0..n).map(|z2| self.get(z, z2) as f64 * b[z2]).sum();
            total += az * row;
        }
        total
    }
}

/// Probability that each qubit reads 1.
pub fn marginals(probs: &[f64]) -> Vec<f64> {
    let q = probs.len().trailing_zeros() as usize;
    let mut m = vec![0.0; q.max(1)];
    marginals_into(probs, &mut m);
    m
}

fn marginals_into(probs: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (z, &p) in probs.iter().enumerate() {
        let mut bits = z;
        while bits != 0 {
            out[bits.trailing_zeros() as usize] += p;
            bits &= bits - 1;
        }
    }
}

/// `p_uᵀ S p_v`, computed as Σ_j P_u(bit j = 1)·P_v(bit j = 1).
pub fn expected_inner(u_probs: &[f64], v_probs: &[f64]) -> f64 {
    assert_eq!(u_probs.len(), v_probs.len(), "probability vectors differ in length");
    let mu = marginals(u_probs);
    let mv = marginals(v_probs);
    mu.iter().zip(&mv).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelEstimate {
    pub value: f64,
    /// Sample standard deviation over episodes divided by √episodes.
    pub stderr: f64,
    pub episodes_used: usize,
}

/// Streaming mean and sum of squared deviations, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }
}

const CHUNK: usize = 1024;

/// Episode-average of the exact per-episode expected inner product.
pub fn mc_kernel(machine: &QksMachine, u: &[f64], v: &[f64]) -> Result<KernelEstimate, SimError> {
    assert_eq!(u.len(), machine.input_dim(), "u has the wrong dimension");
    assert_eq!(v.len(), machine.input_dim(), "v has the wrong dimension");
    let template = machine.template();
    let episodes = machine.num_episodes();
    let n_out = 1usize << machine.num_qubits();
    let q = machine.num_qubits();

    // chunk boundaries are fixed, so the merge tree does not depend on threads
    let chunks: Vec<Moments> = (0..episodes.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| -> Result<Moments, SimError> {
            let mut ws = Workspace::for_template(template)?;
            let (mut gu, mut gv) = (Vec::new(), Vec::new());
            machine.gather_into(u, &mut gu);
            machine.gather_into(v, &mut gv);
            let mut theta = vec![0.0; machine.num_params()];
            let mut pu = vec![0.0; n_out];
            let mut pv = vec![0.0; n_out];
            let (mut mu, mut mv) = (vec![0.0; q], vec![0.0; q]);
            let mut acc = Moments::default();
            for e in c * CHUNK..((c + 1) * CHUNK).min(episodes) {
                machine.encode_gathered(&gu, e, &mut theta);
                ws.exact_probabilities_into(template, &theta, &mut pu)?;
                machine.encode_gathered(&gv, e, &mut theta);
                ws.exact_probabilities_into(template, &theta, &mut pv)?;
                marginals_into(&pu, &mut mu);
                marginals_into(&pv, &mut mv);
                acc.push(mu.iter().zip(&mv).map(|(a, b)| a * b).sum());
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;
    let total = chunks.into_iter().fold(Moments::default(), Moments::merge);
    let var = if total.n > 1 {
        (total.m2 / (total.n - 1) as f64).max(0.0)
    } else {
        0.0
    };
    Ok(KernelEstimate {
        value: total.mean,
        stderr: (var / total.n as f64).sqrt(),
        episodes_used: total.n,
    })
}

/// Closed-form kernel of the two-qubit RX/RX/CNOT ansatz under Gaussian Ω
/// and uniform β:
///
/// `1/2 + (1/8)·exp(-σ²‖u⁽¹⁾ - v⁽¹⁾‖²/2) + (1/16)·exp(-σ²‖u - v‖²/2)`
///
/// where `u⁽¹⁾` are the components feeding the control qubit's angle
/// (`first_tile`).
pub fn closed_form_cnot2(u: &[f64], v: &[f64], sigma: f64, first_tile: &[usize]) -> f64 {
    let tile: f64 = first_tile.iter().map(|&j| (u[j] - v[j]).powi(2)).sum();
    let full: f64 = u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
    let s2 = sigma * sigma;
    0.5 + 0.125 * (-0.5 * s2 * tile).exp() + 0.0625 * (-0.5 * s2 * full).exp()
}

/// [`closed_form_cnot2`] with `u⁽¹⁾` taken from row 0 of the encoding mask.
pub fn closed_form_cnot2_for(structure: &EncodingStructure, u: &[f64], v: &[f64], sigma: f64) -> f64 {
    closed_form_cnot2(u, v, sigma, structure.row(0))
}

/// Closed form for RX/RX/CZ read out in the computational basis: the two
/// qubits act independently, giving a sum of per-tile Gaussian terms.
pub fn closed_form_rxcz2(structure: &EncodingStructure, u: &[f64], v: &[f64], sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    structure
        .rows()
        .iter()
        .map(|tile| {
            let d: f64 = tile.iter().map(|&j| (u[j] - v[j]).powi(2)).sum();
            0.25 + 0.125 * (-0.5 * s2 * d).exp()
        })
        .sum()
}

/// Constant kernel of the CZ ansatz with X-basis readout.
pub const CZ2_KERNEL: f64 = 0.5;
