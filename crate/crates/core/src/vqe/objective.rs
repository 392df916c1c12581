use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{estimate_observable, EstimateReport, Shots};
use crate::hamiltonian::{CommutingGroups, PauliSum};
use crate::rng;
use crate::statevector::{energy_and_gradient, run_circuit, AnsatzCircuit};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Tallies {
    pub evaluations: usize,
    pub circuit_executions: usize,
    pub total_shots: usize,
}

pub trait Objective {
    fn n_params(&self) -> usize;
    fn value(&mut self, x: &[f64]) -> Result<f64>;
    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>>;
    /// True when repeated evaluations at one point differ.
    fn noisy(&self) -> bool {
        false
    }
    fn tallies(&self) -> Tallies;
    /// Standard error of the most recent value; zero for exact objectives.
    fn noise_level(&self) -> f64 {
        0.0
    }
}

/// `<psi(theta)|H|psi(theta)>` estimated exactly or from shots.
///
/// Sampled evaluation `e` of run `run_seed` draws group `g` from the stream
/// keyed `(run_seed, e, g)`.
pub struct EnergyObjective<'a> {
    pub circuit: &'a AnsatzCircuit,
    pub hamiltonian: &'a PauliSum,
    pub groups: &'a CommutingGroups,
    pub shots: Shots,
    pub run_seed: u64,
    tallies: Tallies,
    last_std_error: f64,
}

impl<'a> EnergyObjective<'a> {
    pub fn new(
        circuit: &'a AnsatzCircuit,
        hamiltonian: &'a PauliSum,
        groups: &'a CommutingGroups,
        shots: Shots,
        run_seed: u64,
    ) -> Self {
        Self { circuit, hamiltonian, groups, shots, run_seed, tallies: Tallies::default(), last_std_error: 0.0 }
    }

    /// Executions charged for one energy estimate.
    pub fn executions_per_evaluation(&self) -> usize {
        match self.shots {
            Some(_) => self.groups.len(),
            None => 1,
        }
    }

    /// One energy estimate with its report; updates the cost tallies.
    pub fn energy(&mut self, params: &[f64]) -> Result<(f64, EstimateReport)> {
        let state = run_circuit(self.circuit, params)?;
        let key = rng::stream_seed(&[self.run_seed, self.tallies.evaluations as u64]);
        let report = estimate_observable(&state, self.hamiltonian, self.groups, self.shots, key)?;
        self.tallies.evaluations += 1;
        self.tallies.circuit_executions += self.executions_per_evaluation();
        self.tallies.total_shots += report.total_shots;
        if !report.value.is_finite() {
            return Err(Error::Numerical("non-finite energy estimate".into()));
        }
        Ok((report.value, report))
    }

    /// `dE/dtheta_k = (E(theta_k + pi/2) - E(theta_k - pi/2)) / 2`.
    pub fn parameter_shift_gradient(&mut self, params: &[f64]) -> Result<Vec<f64>> {
        let shift = std::f64::consts::FRAC_PI_2;
        let mut grad = Vec::with_capacity(params.len());
        let mut x = params.to_vec();
        for k in 0..params.len() {
            x[k] = params[k] + shift;
            let plus = self.energy(&x)?.0;
            x[k] = params[k] - shift;
            let minus = self.energy(&x)?.0;
            x[k] = params[k];
            grad.push(0.5 * (plus - minus));
        }
        Ok(grad)
    }
}

impl Objective for EnergyObjective<'_> {
    fn n_params(&self) -> usize {
        self.circuit.n_params
    }

    fn value(&mut self, x: &[f64]) -> Result<f64> {
        let (v, report) = self.energy(x)?;
        self.last_std_error = report.std_error;
        Ok(v)
    }

    fn noise_level(&self) -> f64 {
        self.last_std_error
    }

    /// Parameter-shift gradient under shot noise. Exact objectives use the
    /// reverse-mode gradient, which equals the shift rule on these circuits,
    /// and are charged the `2n` executions the shift rule would cost.
    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if self.shots.is_some() {
            return self.parameter_shift_gradient(x);
        }
        let (_, grad) = energy_and_gradient(self.circuit, x, self.hamiltonian)?;
        let n = 2 * x.len();
        self.tallies.evaluations += n;
        self.tallies.circuit_executions += n;
        Ok(grad)
    }

    fn noisy(&self) -> bool {
        self.shots.is_some()
    }

    fn tallies(&self) -> Tallies {
        self.tallies
    }
}

/// Starting point drawn uniformly from `[-pi, pi]^n`.
pub fn initial_params(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(&[seed, 0x1A17]);
    let pi = std::f64::consts::PI;
    (0..n).map(|_| r.gen_range(-pi..pi)).collect()
}
