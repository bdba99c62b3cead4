//! The picture-frames task: a linear model fails, kitchen-sink features
//! from the 2-qubit CNOT circuit succeed, and the CZ circuit does not.
//!
//!     cargo run --release --example picture_frames

use qks::ansatz::Ansatz;
use qks::experiments::{run_baseline, run_qks, DatasetSource, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = DatasetSource::frames(0).load()?;
    println!("{}: {} train, {} test", data.name, data.train.len(), data.test.len());

    let base = run_baseline(&data, None)?;
    println!("linear on raw coordinates: test error {:.3}", base.test_error);

    for ansatz in [Ansatz::Cnot2, Ansatz::Cz2, Ansatz::Rxcz2] {
        let r = run_qks(&data, &RunConfig::new(ansatz, 1.0, 1000, 0))?;
        println!(
            "{:>6}, sigma 1, 1000 episodes: train {:.3} test {:.3} ({:.2}s)",
            ansatz.as_str(),
            r.train_error,
            r.test_error,
            r.seconds
        );
    }
    Ok(())
}
