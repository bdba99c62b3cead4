//! Parse a circuit template, inspect it and bind parameters.
//!
//!     cargo run --example parse_ansatz

use qks::ansatz::Ansatz;
use qks::quil::{CircuitTemplate, GateKind};

const SOURCE: &str = "
# three-qubit chain
DEFCIRCUIT CHAIN(%a, %b, %c):
    RX(%a) 0
    RX(%b) 1
    RX(%c) 2
    CNOT 0 1
    CNOT 1 2
    RX(pi/2) 2
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let chain = CircuitTemplate::parse(SOURCE)?;
    println!("{chain}");
    println!(
        "{} params, {} qubits, {} CNOTs",
        chain.num_params(),
        chain.num_qubits(),
        chain.count(GateKind::Cnot)
    );

    let bound = chain.instantiate(&[0.1, 0.2, 0.3])?;
    println!("bound gates: {:?}", bound.gates);

    if let Err(e) = chain.instantiate(&[0.1]) {
        println!("wrong arity: {e}");
    }
    if let Err(e) = CircuitTemplate::parse("DEFCIRCUIT BAD(%t):\n    RY(%t) 0\n") {
        println!("parse error: {e}");
    }

    for a in Ansatz::ALL {
        let t = a.template();
        println!(
            "{:>6}: {:>2} qubits {:>2} RX {:>2} CNOT {} CZ",
            a.as_str(),
            t.num_qubits(),
            t.count(GateKind::Rx),
            t.count(GateKind::Cnot),
            t.count(GateKind::Cz)
        );
    }

    // two layers of the 2-qubit ansatz, each with its own parameters
    println!("{}", Ansatz::Cnot2.template().layered(2));
    Ok(())
}
