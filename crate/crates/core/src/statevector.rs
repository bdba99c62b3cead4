//! Dense statevector simulation for small circuits.
//!
//! Qubit `j` is bit `j` of the amplitude index (qubit 0 is least
//! significant). States start in |0…0⟩. A shot is drawn with a single
//! uniform variate inverted through the outcome CDF, so each shot consumes
//! exactly one `f64` from the generator.

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::quil::{resolve, ArityError, CircuitTemplate, GateOp};

pub const MAX_QUBITS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("qubit {qubit} out of range for a {num_qubits}-qubit state")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("{0} qubits requested, simulator supports at most {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error(transparent)]
    Arity(#[from] ArityError),
}

/// Measured bits of one shot; bit `j` is the outcome of qubit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shot(pub u32);

impl Shot {
    #[inline]
    pub fn bit(self, qubit: usize) -> bool {
        (self.0 >> qubit) & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    pub fn new(num_qubits: usize) -> Result<Self, SimError> {
        if num_qubits > MAX_QUBITS {
            return Err(SimError::TooManyQubits(num_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amps, num_qubits })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn reset(&mut self) {
        self.amps.fill(Complex64::new(0.0, 0.0));
        self.amps[0] = Complex64::new(1.0, 0.0);
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&mut self, gate: &GateOp<f64>) -> Result<(), SimError> {
        let q = gate.max_qubit();
        if q >= self.num_qubits {
            return Err(SimError::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            });
        }
        self.apply_unchecked(gate);
        Ok(())
    }

    #[inline]
    fn apply_unchecked(&mut self, gate: &GateOp<f64>) {
        match *gate {
            GateOp::Rx { qubit, angle } => self.rx(qubit, angle),
            GateOp::H { qubit } => self.h(qubit),
            GateOp::Cnot { control, target } => self.cnot(control, target),
            GateOp::Cz { a, b } => self.cz(a, b),
        }
    }

    fn rx(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (0.5 * theta).sin_cos();
        let mask = 1usize << qubit;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + mask {
                let a = self.amps[i];
                let b = self.amps[i | mask];
                // [[c, -is], [-is, c]]
                self.amps[i] = Complex64::new(c * a.re + s * b.im, c * a.im - s * b.re);
                self.amps[i | mask] = Complex64::new(s * a.im + c * b.re, c * b.im - s * a.re);
            }
            base += mask << 1;
        }
    }

    fn h(&mut self, qubit: usize) {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mask = 1usize << qubit;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + mask {
                let a = self.amps[i];
                let b = self.amps[i | mask];
                self.amps[i] = (a + b) * r;
                self.amps[i | mask] = (a - b) * r;
            }
            base += mask << 1;
        }
    }

    fn cnot(&mut self, control: usize, target: usize) {
        let (cm, tm) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    fn cz(&mut self, a: usize, b: usize) {
        let m = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *amp = -*amp;
            }
        }
    }

    /// Runs `template` bound to `theta` starting from |0…0⟩.
    pub fn run_template(&mut self, template: &CircuitTemplate, theta: &[f64]) -> Result<(), SimError> {
        template.check_arity(theta.len())?;
        if template.num_qubits() > self.num_qubits {
            return Err(SimError::QubitOutOfRange {
                qubit: template.num_qubits() - 1,
                num_qubits: self.num_qubits,
            });
        }
        self.reset();
        for gate in template.gates() {
            let g = match *gate {
                GateOp::Rx { qubit, angle } => GateOp::Rx {
                    qubit,
                    angle: resolve(angle, theta),
                },
                GateOp::H { qubit } => GateOp::H { qubit },
                GateOp::Cnot { control, target } => GateOp::Cnot { control, target },
                GateOp::Cz { a, b } => GateOp::Cz { a, b },
            };
            self.apply_unchecked(&g);
        }
        Ok(())
    }

    pub fn probabilities_into(&self, out: &mut [f64]) {
        for (p, a) in out.iter_mut().zip(&self.amps) {
            *p = a.norm_sqr();
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Outcome whose cumulative probability first exceeds `u`.
    pub fn sample_at(&self, u: f64) -> Shot {
        let mut acc = 0.0;
        let mut last = 0;
        for (z, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                acc += p;
                last = z;
                if u < acc {
                    return Shot(z as u32);
                }
            }
        }
        // rounding left the CDF just below 1
        Shot(last as u32)
    }

    pub fn sample_shot<R: Rng + ?Sized>(&self, rng: &mut R) -> Shot {
        self.sample_at(rng.gen::<f64>())
    }
}

/// Reusable per-worker simulation buffer sized for one template.
#[derive(Debug, Clone)]
pub struct Workspace {
    state: StateVector,
}

impl Workspace {
    pub fn for_template(template: &CircuitTemplate) -> Result<Self, SimError> {
        Ok(Workspace {
            state: StateVector::new(template.num_qubits())?,
        })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Instantiate, simulate and draw a single shot. Allocation-free.
    pub fn run_episode<R: Rng + ?Sized>(
        &mut self,
        template: &CircuitTemplate,
        theta: &[f64],
        rng: &mut R,
    ) -> Result<Shot, SimError> {
        self.state.run_template(template, theta)?;
        Ok(self.state.sample_shot(rng))
    }

    pub fn exact_probabilities_into(
        &mut self,
        template: &CircuitTemplate,
        theta: &[f64],
        out: &mut [f64],
    ) -> Result<(), SimError> {
        self.state.run_template(template, theta)?;
        self.state.probabilities_into(out);
        Ok(())
    }
}

pub fn run_episode<R: Rng + ?Sized>(template: &CircuitTemplate, theta: &[f64], rng: &mut R) -> Result<Shot, SimError> {
    Workspace::for_template(template)?.run_episode(template, theta, rng)
}

/// |⟨z|U(θ)|0…0⟩|² for every outcome z.
pub fn exact_probabilities(template: &CircuitTemplate, theta: &[f64]) -> Result<Vec<f64>, SimError> {
    let mut state = StateVector::new(template.num_qubits())?;
    state.run_template(template, theta)?;
    Ok(state.probabilities())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::Ansatz;
    use crate::rng::{substream, Purpose};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rx_pi_flips() {
        let mut s = StateVector::new(1).unwrap();
        s.apply(&GateOp::Rx { qubit: 0, angle: PI }).unwrap();
        let p = s.probabilities();
        assert!(p[0] < 1e-30);
        assert!((p[1] - 1.0).abs() < 1e-15);
        let mut rng = substream(0, Purpose::Scratch, 0, 0);
        for _ in 0..100 {
            assert_eq!(s.sample_shot(&mut rng), Shot(1));
        }
    }

    #[test]
    fn rx_matrix_elements() {
        let theta = 0.83;
        let mut s = StateVector::new(1).unwrap();
        s.apply(&GateOp::Rx { qubit: 0, angle: theta }).unwrap();
        let a = s.amplitudes();
        assert!((a[0] - c((theta / 2.0).cos(), 0.0)).norm() < 1e-15);
        assert!((a[1] - c(0.0, -(theta / 2.0).sin())).norm() < 1e-15);
    }

    #[test]
    fn hadamard_is_involution() {
        let mut s = StateVector::new(1).unwrap();
        s.apply(&GateOp::H { qubit: 0 }).unwrap();
        s.apply(&GateOp::H { qubit: 0 }).unwrap();
        assert!((s.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(s.amplitudes()[1].norm() < 1e-12);
    }

    #[test]
    fn cnot_truth_table() {
        // |10> in ket order q1 q0 means qubit 0 set: index 1
        let mut s = StateVector::new(2).unwrap();
        s.apply(&GateOp::Rx { qubit: 0, angle: PI }).unwrap();
        s.apply(&GateOp::Cnot { control: 0, target: 1 }).unwrap();
        let p = s.probabilities();
        assert!((p[0b11] - 1.0).abs() < 1e-15);

        let mut s = StateVector::new(2).unwrap();
        s.apply(&GateOp::Cnot { control: 0, target: 1 }).unwrap();
        assert_eq!(s.probabilities()[0], 1.0);
    }

    #[test]
    fn cz_phases_only_11() {
        let mut s = StateVector::new(2).unwrap();
        s.apply(&GateOp::H { qubit: 0 }).unwrap();
        s.apply(&GateOp::H { qubit: 1 }).unwrap();
        s.apply(&GateOp::Cz { a: 0, b: 1 }).unwrap();
        let a = s.amplitudes();
        assert!((a[3] + c(0.5, 0.0)).norm() < 1e-15);
        assert!((a[1] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn out_of_range_qubit() {
        let mut s = StateVector::new(2).unwrap();
        let err = s.apply(&GateOp::H { qubit: 2 }).unwrap_err();
        assert_eq!(
            err,
            SimError::QubitOutOfRange {
                qubit: 2,
                num_qubits: 2
            }
        );
        assert!(StateVector::new(17).is_err());
    }

    #[test]
    fn zero_state_always_measures_zero() {
        let s = StateVector::new(2).unwrap();
        let mut rng = substream(1, Purpose::Scratch, 0, 0);
        for _ in 0..1000 {
            assert_eq!(s.sample_shot(&mut rng), Shot(0));
        }
    }

    #[test]
    fn identity_template_probabilities() {
        let t = CircuitTemplate::parse("DEFCIRCUIT ID:\n").unwrap();
        assert_eq!(exact_probabilities(&t, &[]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn single_qubit_closed_form() {
        let t = Ansatz::Rx1.template();
        for theta in [-2.0, 0.0, 0.3, 1.9, 4.0] {
            let p = exact_probabilities(&t, &[theta]).unwrap();
            assert!((p[0] - (theta / 2.0_f64).cos().powi(2)).abs() < 1e-15);
            assert!((p[1] - (theta / 2.0_f64).sin().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_uses_one_draw() {
        let t = Ansatz::P4.template();
        let mut ws = Workspace::for_template(&t).unwrap();
        let mut a = substream(3, Purpose::Scratch, 0, 0);
        let mut b = substream(3, Purpose::Scratch, 0, 0);
        ws.run_episode(&t, &[0.1, 0.2, 0.3, 0.4], &mut a).unwrap();
        let _: f64 = b.gen();
        assert_eq!(a.gen::<u64>(), b.gen::<u64>());
    }

    #[test]
    fn arity_is_checked() {
        let t = Ansatz::P9.template();
        let mut rng = substream(3, Purpose::Scratch, 0, 0);
        assert!(matches!(run_episode(&t, &[0.0; 8], &mut rng), Err(SimError::Arity(_))));
    }
}
