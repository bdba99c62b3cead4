//! Episodes simulated per second for each built-in ansatz.
//!
//!     cargo run --release --example episode_throughput

use std::time::Instant;

use qks::ansatz::Ansatz;
use qks::encoding::{EncodingStructure, MachineConfig, QksMachine};
use qks::features::featurize_with_workers;
use qks::{Matrix, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = 256;
    for ansatz in Ansatz::ALL {
        let template = ansatz.template();
        let q = template.num_params();
        let structure = EncodingStructure::split(q)?;
        let episodes = ((1usize << 22 >> q) / rows).max(8);
        let machine = QksMachine::sample(&template, structure, MachineConfig::new(1.0, episodes, 0))?;
        let x = Matrix::from_vec(rows, q, (0..rows * q).map(|i| (i % 17) as f64 / 17.0).collect());
        let start = Instant::now();
        featurize_with_workers(&machine, &x, Split::Train, 1)?;
        let secs = start.elapsed().as_secs_f64();
        let rate = (rows * episodes) as f64 / secs;
        println!(
            "{:>6} ({:>2} qubits): {:>12.0} episodes/s on one worker",
            ansatz.as_str(),
            q,
            rate
        );
    }
    Ok(())
}
