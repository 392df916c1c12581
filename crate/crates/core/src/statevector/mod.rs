//! Dense statevector simulation of number-conserving circuits.

mod ansatz;
mod gates;
mod sampling;
mod state;

pub use ansatz::{
    build_excitation_ansatz, build_excitation_ansatz_layers, build_ground_ansatz,
    build_ground_ansatz_layers, energy_and_gradient, run_circuit, AnsatzCircuit, ExcitationKind, DEFAULT_SHELL_LAYERS,
};
pub use gates::{apply_gate, Gate, GateKind};
pub use sampling::{sample_counts, sample_group, GroupSample};
pub use state::StateVector;
