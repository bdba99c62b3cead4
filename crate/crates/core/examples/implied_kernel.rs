//! Monte Carlo implied kernels against their closed forms.
//!
//!     cargo run --release --example implied_kernel

use qks::ansatz::Ansatz;
use qks::experiments::{kernel_check, random_pairs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pairs = random_pairs(5, 2, 7);
    for ansatz in [Ansatz::Cnot2, Ansatz::Cz2, Ansatz::Rxcz2] {
        println!("{ansatz}");
        for sigma in [0.25, 1.0, 4.0] {
            for row in kernel_check(ansatz, sigma, 50_000, 0, &pairs)? {
                let cf = row.closed_form.unwrap_or(f64::NAN);
                println!(
                    "  sigma {sigma:<4} mc {:.5} ± {:.5}  closed form {cf:.5}  ({:+.1} stderr)",
                    row.mc,
                    row.stderr,
                    (row.mc - cf) / row.stderr.max(1e-300)
                );
            }
        }
    }
    Ok(())
}
