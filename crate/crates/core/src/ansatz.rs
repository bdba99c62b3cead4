//! Built-in circuit ansätze, shipped as Quil sources under `ansatz/`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::quil::CircuitTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ansatz {
    /// Single RX rotation on one qubit.
    Rx1,
    /// RX on each of two qubits followed by CNOT 0 -> 1.
    Cnot2,
    /// RX on each of two qubits, CZ, then X-basis readout. Implied kernel is 1/2.
    Cz2,
    /// RX on each of two qubits followed by CZ, computational-basis readout.
    Rxcz2,
    P4,
    P9,
    P16,
}

impl Ansatz {
    pub const ALL: [Ansatz; 7] = [
        Ansatz::Rx1,
        Ansatz::Cnot2,
        Ansatz::Cz2,
        Ansatz::Rxcz2,
        Ansatz::P4,
        Ansatz::P9,
        Ansatz::P16,
    ];

    pub fn source(self) -> &'static str {
        match self {
            Ansatz::Rx1 => include_str!("../ansatz/rx1.quil"),
            Ansatz::Cnot2 => include_str!("../ansatz/cnot2.quil"),
            Ansatz::Cz2 => include_str!("../ansatz/cz2.quil"),
            Ansatz::Rxcz2 => include_str!("../ansatz/rxcz2.quil"),
            Ansatz::P4 => include_str!("../ansatz/p4.quil"),
            Ansatz::P9 => include_str!("../ansatz/p9.quil"),
            Ansatz::P16 => include_str!("../ansatz/p16.quil"),
        }
    }

    pub fn template(self) -> CircuitTemplate {
        CircuitTemplate::parse(self.source()).expect("built-in ansatz sources parse")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ansatz::Rx1 => "rx1",
            Ansatz::Cnot2 => "cnot2",
            Ansatz::Cz2 => "cz2",
            Ansatz::Rxcz2 => "rxcz2",
            Ansatz::P4 => "p4",
            Ansatz::P9 => "p9",
            Ansatz::P16 => "p16",
        }
    }
}

impl fmt::Display for Ansatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ansatz {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ansatz::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Ansatz::ALL.iter().map(|a| a.as_str()).collect();
                format!("unknown ansatz `{s}` (expected one of {})", names.join(", "))
            })
    }
}
