//! (3,5)-MNIST with tiled encodings. Needs the four IDX files in
//! `$QKS_MNIST_DIR` (default `data/mnist`).
//!
//!     QKS_MNIST_DIR=/path/to/mnist cargo run --release --example mnist_qks -- 2000

use std::path::PathBuf;

use qks::ansatz::Ansatz;
use qks::experiments::{run_baseline, run_qks, DatasetSource, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::var_os("QKS_MNIST_DIR").map_or_else(|| PathBuf::from("data/mnist"), PathBuf::from);
    let episodes: usize = std::env::args().nth(1).map_or(Ok(500), |s| s.parse())?;
    let data = DatasetSource::Mnist { dir, digits: (3, 5) }.load()?;
    println!(
        "{}: {} train, {} test, p = {}",
        data.name,
        data.train.len(),
        data.test.len(),
        data.dim()
    );

    let base = run_baseline(&data, None)?;
    println!("standardized pixels, linear: test error {:.4}", base.test_error);

    for (ansatz, sigma) in [(Ansatz::Cnot2, 0.05), (Ansatz::P4, 0.05)] {
        let r = run_qks(&data, &RunConfig::new(ansatz, sigma, episodes, 0))?;
        println!(
            "{:>6} q={} r={:?} E={episodes}: test error {:.4} ({:.1}s)",
            ansatz.as_str(),
            r.structure.q,
            r.structure.r,
            r.test_error,
            r.seconds
        );
    }
    Ok(())
}
