use serde::{Deserialize, Serialize};

use super::gates::{Gate, GateKind};
use super::state::StateVector;
use crate::error::{domain, Result};
use crate::hamiltonian::PauliSum;

/// Phased-Givens layers per bath shell in the default ground ansatz.
pub const DEFAULT_SHELL_LAYERS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationKind {
    Particle,
    Hole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzCircuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub n_params: usize,
    /// Target `(n_up, n_down)` occupation.
    pub sector: (usize, usize),
}

impl AnsatzCircuit {
    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.n_params];
        for g in &self.gates {
            g.validate(self.n_qubits)?;
            if let Some(s) = g.parameter_slot {
                if s >= self.n_params {
                    return domain(format!("slot {s} outside 0..{}", self.n_params));
                }
                used[s] = true;
            }
        }
        if let Some(s) = used.iter().position(|u| !u) {
            return domain(format!("parameter slot {s} is unused"));
        }
        Ok(())
    }

    /// Indices of gates reading slot `k`.
    pub fn gates_for_slot(&self, k: usize) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.parameter_slot == Some(k))
            .map(|(i, _)| i)
            .collect()
    }
}

fn check_n_bath(n_bath: usize) -> Result<()> {
    if n_bath == 0 || n_bath % 2 == 0 {
        return domain(format!("n_bath must be a positive odd integer, got {n_bath}"));
    }
    Ok(())
}

/// Spin chains ordered impurity first: `(up, down)` qubit lists.
fn chains(n_bath: usize) -> (Vec<usize>, Vec<usize>) {
    let up = (0..=n_bath).map(|k| n_bath - k).collect();
    let dn = (0..=n_bath).map(|k| n_bath + 1 + k).collect();
    (up, dn)
}

/// Bath shells beyond the impurity pair: each adds two sites per spin, the
/// first at a negative level (filled in the reference) and the second empty.
fn push_shells(gates: &mut Vec<Gate>, next: &mut usize, n_bath: usize, layers: usize) {
    use GateKind::{ControlledPhasedGivens as Cpg, PhasedGivens as Pg};
    let (up, dn) = chains(n_bath);
    for s in 1..=(n_bath - 1) / 2 {
        let (o1, o2) = (2 * s, 2 * s + 1);
        gates.push(Gate::x(up[o1]));
        gates.push(Gate::x(dn[o1]));
        for _ in 0..layers {
            for blk in [&up, &dn] {
                for (i, j) in [(o1, o2), (o1 - 1, o1), (o1 - 2, o1 - 1)] {
                    gates.push(Gate::param(Pg, &[blk[i], blk[j]], *next));
                    *next += 1;
                }
            }
            gates.push(Gate::param(Cpg, &[up[0], dn[0], dn[1]], *next));
            *next += 1;
            gates.push(Gate::param(Cpg, &[dn[0], up[0], up[1]], *next));
            *next += 1;
        }
    }
}

/// Ground-state ansatz with [`DEFAULT_SHELL_LAYERS`] layers per shell.
pub fn build_ground_ansatz(n_bath: usize) -> Result<AnsatzCircuit> {
    build_ground_ansatz_layers(n_bath, DEFAULT_SHELL_LAYERS)
}

/// Half-filled, `S_z = 0` ansatz.
///
/// The impurity pair of each spin gets one electron from a half-filling
/// gate, and a controlled Givens correlates the down electron with the up
/// one. Every further shell of two bath sites per spin adds phased Givens
/// ladders toward the impurity plus controlled phased Givens on the
/// impurity pairs. The circuit for `n_bath` is a prefix of the one for
/// `n_bath + 2`, slots included.
pub fn build_ground_ansatz_layers(n_bath: usize, layers: usize) -> Result<AnsatzCircuit> {
    check_n_bath(n_bath)?;
    let (up, dn) = chains(n_bath);
    let mut gates = vec![
        Gate::param(GateKind::HalfFilling, &[up[0], up[1]], 0),
        Gate::param(GateKind::HalfFilling, &[dn[0], dn[1]], 1),
        Gate::param(GateKind::ControlledGivens, &[up[0], dn[0], dn[1]], 2),
    ];
    let mut next = 3;
    push_shells(&mut gates, &mut next, n_bath, layers);
    let half = (n_bath + 1) / 2;
    let c = AnsatzCircuit { n_qubits: 2 * (n_bath + 1), gates, n_params: next, sector: (half, half) };
    c.validate()?;
    Ok(c)
}

/// Ansatz for one added particle or hole with spin projection `sz = +-1/2`
/// (pass `sz_up = true` for `+1/2`). Same slots as the ground ansatz.
///
/// Only the impurity-pair block changes: at `pi - theta` the one-bath
/// block reproduces `c^dag|psi(theta)>` or `c|psi(theta)>` on the spin
/// whose occupation moves, up to a global sign. Larger baths reuse the
/// ground shells unchanged.
pub fn build_excitation_ansatz(n_bath: usize, kind: ExcitationKind, sz_up: bool) -> Result<AnsatzCircuit> {
    build_excitation_ansatz_layers(n_bath, kind, sz_up, DEFAULT_SHELL_LAYERS)
}

pub fn build_excitation_ansatz_layers(
    n_bath: usize,
    kind: ExcitationKind,
    sz_up: bool,
    layers: usize,
) -> Result<AnsatzCircuit> {
    check_n_bath(n_bath)?;
    let (up, dn) = chains(n_bath);
    // The spin whose impurity occupation changes.
    let moves_up = matches!((kind, sz_up), (ExcitationKind::Particle, true) | (ExcitationKind::Hole, false));
    let (a, b) = if moves_up { (&up, &dn) } else { (&dn, &up) };
    let mut gates = Vec::new();
    if kind == ExcitationKind::Particle {
        gates.push(Gate::x(a[0]));
        gates.push(Gate::x(a[1]));
    }
    gates.extend([
        Gate::param(GateKind::Givens, &[a[0], a[1]], 0),
        Gate::x(b[0]),
        Gate::param(GateKind::Givens, &[b[1], b[0]], 1),
        Gate::param(GateKind::ControlledGivens, &[a[0], b[0], b[1]], 2),
    ]);
    let mut next = 3;
    push_shells(&mut gates, &mut next, n_bath, layers);
    let half = (n_bath + 1) / 2;
    let delta: isize = if kind == ExcitationKind::Particle { 1 } else { -1 };
    let shift = |n: usize, moved: bool| if moved { (n as isize + delta) as usize } else { n };
    let sector = (shift(half, moves_up), shift(half, !moves_up));
    let c = AnsatzCircuit { n_qubits: 2 * (n_bath + 1), gates, n_params: next, sector };
    c.validate()?;
    Ok(c)
}

/// Runs the circuit on `|0...0>`.
pub fn run_circuit(circuit: &AnsatzCircuit, params: &[f64]) -> Result<StateVector> {
    if params.len() != circuit.n_params {
        return domain(format!("expected {} parameters, got {}", circuit.n_params, params.len()));
    }
    let mut s = StateVector::zero_state(circuit.n_qubits);
    for g in &circuit.gates {
        g.apply_in_place(&mut s, g.parameter_slot.map(|k| params[k]))?;
    }
    Ok(s)
}

/// Energy and exact gradient by reverse-mode accumulation through the
/// circuit: one forward pass, one backward pass.
pub fn energy_and_gradient(circuit: &AnsatzCircuit, params: &[f64], h: &PauliSum) -> Result<(f64, Vec<f64>)> {
    let mut psi = run_circuit(circuit, params)?;
    let energy = psi.expectation(h)?;
    let mut lambda = psi.apply_sum(h)?;
    let mut grad = vec![0.0; circuit.n_params];
    for g in circuit.gates.iter().rev() {
        let theta = g.parameter_slot.map(|k| params[k]);
        g.apply_inverse_in_place(&mut psi, theta)?;
        if let (Some(k), Some(t)) = (g.parameter_slot, theta) {
            grad[k] += 2.0 * lambda.inner(&g.derivative(&psi, t)?).re;
        }
        g.apply_inverse_in_place(&mut lambda, theta)?;
    }
    Ok((energy, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts_grow_linearly() {
        let n: Vec<usize> = [1, 3, 5, 7].iter().map(|&b| build_ground_ansatz(b).unwrap().n_params).collect();
        assert_eq!(n, vec![3, 27, 51, 75]);
    }

    #[test]
    fn even_bath_rejected() {
        assert!(build_ground_ansatz(2).is_err());
        assert!(build_excitation_ansatz(0, ExcitationKind::Hole, true).is_err());
    }

    #[test]
    fn nesting_prefix() {
        let small = build_ground_ansatz(1).unwrap();
        let big = build_ground_ansatz(3).unwrap();
        for (g, h) in small.gates.iter().zip(&big.gates) {
            assert_eq!(g.kind, h.kind);
            assert_eq!(g.parameter_slot, h.parameter_slot);
            let shifted: Vec<usize> = g.targets.iter().map(|t| t + 2).collect();
            assert_eq!(shifted, h.targets);
        }
    }

    #[test]
    fn empty_circuit_gives_vacuum() {
        let c = AnsatzCircuit { n_qubits: 3, gates: vec![], n_params: 0, sector: (0, 0) };
        assert_eq!(run_circuit(&c, &[]).unwrap(), StateVector::zero_state(3));
        assert!(run_circuit(&c, &[0.0]).is_err());
    }

    #[test]
    fn excitation_sectors() {
        use ExcitationKind::*;
        let cases = [((Particle, true), (2, 1)), ((Particle, false), (1, 2)), ((Hole, true), (1, 0)), ((Hole, false), (0, 1))];
        for ((k, up), sector) in cases {
            assert_eq!(build_excitation_ansatz(1, k, up).unwrap().sector, sector);
        }
    }
}
