//! Quantum kitchen sinks: random parameterised circuits as a feature map for
//! linear classifiers, simulated exactly on a state vector.

pub mod ansatz;
pub mod datasets;
pub mod encoding;
pub mod experiments;
pub mod features;
pub mod kernels;
pub mod linear;
pub mod matrix;
pub mod quil;
pub mod rng;
pub mod statevector;

pub use ansatz::Ansatz;
pub use datasets::{LabeledDataset, Split};
pub use encoding::{EncodingStructure, MachineConfig, QksMachine};
pub use features::{featurize, FeatureMatrix};
pub use linear::{train, LinearClassifier, TrainOptions};
pub use matrix::Matrix;
pub use quil::CircuitTemplate;
