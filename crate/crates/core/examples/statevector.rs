//! Simulate a template, read exact outcome probabilities and draw shots.
//!
//!     cargo run --release --example statevector

use std::f64::consts::FRAC_PI_2;

use qks::ansatz::Ansatz;
use qks::rng::{substream, Purpose};
use qks::statevector::{exact_probabilities, StateVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = Ansatz::Cnot2.template();
    let theta = [FRAC_PI_2, FRAC_PI_2];

    let probs = exact_probabilities(&template, &theta)?;
    // outcome index z has qubit 0 in its lowest bit
    for (z, p) in probs.iter().enumerate() {
        println!("P(q1 q0 = {z:02b}) = {p:.4}");
    }

    let mut state = StateVector::new(template.num_qubits())?;
    state.run_template(&template, &theta)?;
    let mut rng = substream(42, Purpose::Scratch, 0, 0);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[state.sample_shot(&mut rng).0 as usize] += 1;
    }
    for (z, c) in counts.iter().enumerate() {
        println!("sampled {z:02b}: {:.4}", *c as f64 / n as f64);
    }

    for (name, a) in [("x-basis cz2", Ansatz::Cz2), ("computational rxcz2", Ansatz::Rxcz2)] {
        let p = exact_probabilities(&a.template(), &[0.7, 2.2])?;
        println!("{name}: P(q0=1) = {:.4}, P(q1=1) = {:.4}", p[1] + p[3], p[2] + p[3]);
    }
    Ok(())
}
