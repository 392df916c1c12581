//! Variational energy minimization with COBYLA, Adam and L-BFGS-B under
//! exact or shot-noise evaluation, with measurement-cost tallies.

mod adam;
mod cobyla;
mod lbfgsb;
mod objective;

pub use objective::{initial_params, EnergyObjective, Objective, Tallies};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cobyla,
    Adam,
    Lbfgsb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cobyla, Method::Adam, Method::Lbfgsb];

    pub fn uses_gradient(self) -> bool {
        self != Method::Cobyla
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Cap on objective evaluations, parameter-shift evaluations included.
    pub max_evals: usize,
    pub energy_tol: f64,
    pub grad_tol: f64,
    pub cobyla_rho0: f64,
    pub cobyla_rho_end: f64,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub adam_max_steps: usize,
    pub lbfgs_memory: usize,
    pub armijo_c1: f64,
    /// Box applied by L-BFGS-B to every parameter.
    pub bounds: (f64, f64),
    /// Wrap iterates into `bounds` instead of clipping. Exact when the box
    /// spans one period of the objective, as the default does for the ansatz.
    pub periodic_bounds: bool,
    /// Window of the energy moving average used under shot noise.
    pub noisy_window: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Lbfgsb,
            max_evals: 100_000,
            energy_tol: 1e-6,
            grad_tol: 1e-9,
            cobyla_rho0: std::f64::consts::PI,
            cobyla_rho_end: 1e-6,
            adam_lr: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            adam_max_steps: 2000,
            lbfgs_memory: 10,
            armijo_c1: 1e-4,
            bounds: (-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI),
            periodic_bounds: true,
            noisy_window: 5,
        }
    }
}

impl OptimizerConfig {
    pub fn for_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.energy_tol,
            self.grad_tol,
            self.cobyla_rho0,
            self.cobyla_rho_end,
            self.adam_lr,
            self.adam_eps,
            self.armijo_c1,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return domain("optimizer tolerances and step sizes must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return domain("Adam betas must lie in [0, 1)");
        }
        if self.max_evals == 0 || self.lbfgs_memory == 0 || self.noisy_window == 0 {
            return domain("evaluation cap, memory and window must be positive");
        }
        if !(self.bounds.0 < self.bounds.1) {
            return domain("lower bound must be below the upper bound");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EnergyTol,
    GradTol,
    MaxEvals,
    /// COBYLA trust radius reached its final value.
    TrustRadius,
    /// Adam step cap.
    MaxSteps,
    /// Backtracking found no acceptable step.
    LineSearch,
    /// The objective returned a non-finite value.
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub method: Method,
    pub best_params: Vec<f64>,
    /// Lowest value seen for exact objectives; under noise, the mean of the
    /// energies of the last `noisy_window` accepted iterates.
    pub best_energy: f64,
    /// Every plain energy evaluation in order; parameter-shift evaluations
    /// are not included.
    pub energy_history: Vec<f64>,
    pub n_evaluations: usize,
    pub n_steps: usize,
    pub circuit_executions: usize,
    pub total_shots: usize,
    pub converged: bool,
    pub termination: Termination,
}

/// Bookkeeping shared by the three methods.
pub(crate) struct Trace {
    pub history: Vec<f64>,
    /// Energies of accepted iterates, in order.
    pub iterates: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub noisy: bool,
    pub window: usize,
    pub max_evals: usize,
}

impl Trace {
    pub fn new(noisy: bool, cfg: &OptimizerConfig) -> Self {
        Self { history: vec![], iterates: vec![], points: vec![], noisy, window: cfg.noisy_window, max_evals: cfg.max_evals }
    }

    /// Energy evaluation that is recorded in the history.
    pub fn value(&mut self, obj: &mut dyn Objective, x: &[f64]) -> Result<f64> {
        let v = obj.value(x)?;
        self.history.push(v);
        self.points.push(x.to_vec());
        Ok(v)
    }

    pub fn out_of_budget(&self, obj: &dyn Objective, upcoming: usize) -> bool {
        obj.tallies().evaluations + upcoming > self.max_evals
    }

    /// Records the energy of an accepted iterate.
    pub fn accept(&mut self, e: f64) {
        self.iterates.push(e);
    }

    fn moving_average(&self, end: usize) -> f64 {
        let start = end.saturating_sub(self.window);
        self.iterates[start..end].iter().sum::<f64>() / (end - start) as f64
    }

    /// Energy-change test between successive iterates. Under noise the
    /// moving averages of the iterate energies are compared instead.
    pub fn energy_converged(&self, previous: f64, current: f64, tol: f64) -> bool {
        if !self.noisy {
            return (current - previous).abs() < tol;
        }
        let n = self.iterates.len();
        if n <= self.window {
            return false;
        }
        (self.moving_average(n) - self.moving_average(n - 1)).abs() < tol
    }

    pub fn finish(
        self,
        method: Method,
        obj: &dyn Objective,
        final_x: Vec<f64>,
        n_steps: usize,
        termination: Termination,
    ) -> VqeResult {
        let t = obj.tallies();
        let (best_params, best_energy) = if self.history.is_empty() {
            (final_x, f64::NAN)
        } else if self.noisy && !self.iterates.is_empty() {
            let e = self.moving_average(self.iterates.len());
            (final_x, e)
        } else if self.noisy {
            (final_x, *self.history.last().expect("nonempty"))
        } else {
            let (i, e) = self
                .history
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, e)| (i, *e))
                .expect("nonempty");
            (self.points[i].clone(), e)
        };
        let converged = matches!(
            termination,
            Termination::EnergyTol | Termination::GradTol | Termination::TrustRadius
        );
        VqeResult {
            method,
            best_params,
            best_energy,
            energy_history: self.history,
            n_evaluations: t.evaluations,
            n_steps,
            circuit_executions: t.circuit_executions,
            total_shots: t.total_shots,
            converged,
            termination,
        }
    }
}

/// Runs the configured method from `x0`.
pub fn minimize(config: &OptimizerConfig, objective: &mut dyn Objective, x0: &[f64]) -> Result<VqeResult> {
    config.validate()?;
    if x0.len() != objective.n_params() {
        return domain(format!("expected {} initial parameters, got {}", objective.n_params(), x0.len()));
    }
    match config.method {
        Method::Cobyla => cobyla::run(config, objective, x0),
        Method::Adam => adam::run(config, objective, x0),
        Method::Lbfgsb => lbfgsb::run(config, objective, x0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Result;

    /// `sum_i (x_i - 1)^2 + 0.5 (x_0 - x_1)^2` with analytic gradients.
    struct Quadratic {
        evals: usize,
    }

    impl Objective for Quadratic {
        fn n_params(&self) -> usize {
            2
        }
        fn value(&mut self, x: &[f64]) -> Result<f64> {
            self.evals += 1;
            Ok((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2) + 0.5 * (x[0] - x[1]).powi(2))
        }
        fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
            self.evals += 2;
            Ok(vec![2.0 * (x[0] - 1.0) + (x[0] - x[1]), 2.0 * (x[1] - 1.0) - (x[0] - x[1])])
        }
        fn tallies(&self) -> Tallies {
            Tallies { evaluations: self.evals, circuit_executions: self.evals, total_shots: 0 }
        }
    }

    #[test]
    fn every_method_solves_a_quadratic() {
        for m in Method::ALL {
            let mut q = Quadratic { evals: 0 };
            let mut cfg = OptimizerConfig::for_method(m);
            if m == Method::Adam {
                cfg.adam_lr = 0.1;
            }
            // Adam stops on the energy tolerance, which leaves ~sqrt(tol) in x.
            let tol = if m == Method::Adam { 1e-2 } else { 1e-4 };
            let r = minimize(&cfg, &mut q, &[-2.0, 3.0]).unwrap();
            for x in &r.best_params {
                assert!((x - 1.0).abs() < tol, "{m:?}: {:?}", r.best_params);
            }
        }
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = OptimizerConfig { energy_tol: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let mut q = Quadratic { evals: 0 };
        assert!(minimize(&OptimizerConfig::default(), &mut q, &[0.0]).is_err());
    }
}
