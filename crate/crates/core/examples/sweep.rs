//! σ × E grid on picture frames, printed as CSV.
//!
//!     cargo run --release --example sweep

use qks::ansatz::Ansatz;
use qks::experiments::{run_sweep, DatasetSource, SweepRequest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = DatasetSource::frames(0).load()?;
    let request = SweepRequest {
        ansatz: Ansatz::Cnot2,
        layers: 1,
        sigmas: vec![0.1, 0.3, 1.0, 3.0, 10.0],
        episodes: vec![10, 30, 100, 300, 1000],
        seeds: vec![0, 1, 2],
        lambda: None,
    };
    let result = run_sweep(&data, &request)?;
    println!("sigma,episodes,train_error,test_error,seconds");
    for c in &result.cells {
        println!(
            "{},{},{:.4},{:.4},{:.3}",
            c.sigma, c.episodes, c.train_error, c.test_error, c.seconds
        );
    }
    if let Some(best) = result.best() {
        println!(
            "# best: sigma {} with {} episodes, test error {:.4}",
            best.sigma, best.episodes, best.test_error
        );
    }
    Ok(())
}
