//! Derivative-free trust-region minimization on a linear interpolation
//! model over `n + 1` simplex points (COBYLA without constraints).
//!
//! The radius starts at `rho0` and halves whenever a step on an acceptable
//! simplex fails to reduce the objective enough, until it reaches `rho_end`.

use nalgebra::{DMatrix, DVector};

use super::{Method, Objective, OptimizerConfig, Termination, Trace, VqeResult};
use crate::error::Result;

const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;

struct Simplex {
    /// `pts[0]` is the pivot: the best vertex.
    pts: Vec<Vec<f64>>,
    vals: Vec<f64>,
}

impl Simplex {
    fn promote_best(&mut self) {
        let best = (0..self.vals.len()).min_by(|&a, &b| self.vals[a].total_cmp(&self.vals[b])).unwrap();
        self.pts.swap(0, best);
        self.vals.swap(0, best);
    }

    /// Rows `x_i - x_0` for `i = 1..=n`.
    fn offsets(&self) -> DMatrix<f64> {
        let n = self.pts[0].len();
        DMatrix::from_fn(n, n, |i, j| self.pts[i + 1][j] - self.pts[0][j])
    }
}

pub(super) fn run(cfg: &OptimizerConfig, obj: &mut dyn Objective, x0: &[f64]) -> Result<VqeResult> {
    let n = x0.len();
    let mut trace = Trace::new(obj.noisy(), cfg);
    let mut rho = cfg.cobyla_rho0;
    let mut steps = 0;

    let mut sim = Simplex { pts: vec![x0.to_vec()], vals: vec![trace.value(obj, x0)?] };
    for i in 0..n {
        if trace.out_of_budget(obj, 1) {
            let x = sim.pts[0].clone();
            return Ok(trace.finish(Method::Cobyla, obj, x, steps, Termination::MaxEvals));
        }
        let mut p = x0.to_vec();
        p[i] += rho;
        let v = trace.value(obj, &p)?;
        sim.pts.push(p);
        sim.vals.push(v);
    }

    let termination = loop {
        if sim.vals.iter().any(|v| !v.is_finite()) {
            break Termination::NonFinite;
        }
        if trace.out_of_budget(obj, 1) {
            break Termination::MaxEvals;
        }
        sim.promote_best();
        if trace.iterates.last() != Some(&sim.vals[0]) {
            trace.accept(sim.vals[0]);
        }
        let d = sim.offsets();
        let Some(dinv) = d.clone().try_inverse() else {
            // Collapsed simplex: rebuild around the pivot.
            let base = sim.pts[0].clone();
            for i in 0..n {
                let mut p = base.clone();
                p[i] += rho;
                sim.vals[i + 1] = trace.value(obj, &p)?;
                sim.pts[i + 1] = p;
            }
            continue;
        };
        let df = DVector::from_fn(n, |i, _| sim.vals[i + 1] - sim.vals[0]);
        let grad = &dinv * df;

        // Geometry: vertices too far away, or too close to the opposite face.
        let lengths: Vec<f64> = (0..n).map(|i| d.row(i).norm()).collect();
        let sigmas: Vec<f64> = (0..n).map(|i| 1.0 / dinv.column(i).norm()).collect();
        let far = (0..n).max_by(|&a, &b| lengths[a].total_cmp(&lengths[b])).unwrap();
        let flat = (0..n).min_by(|&a, &b| sigmas[a].total_cmp(&sigmas[b])).unwrap();
        let bad = if lengths[far] > BETA * rho {
            Some(far)
        } else if sigmas[flat] < ALPHA * rho {
            Some(flat)
        } else {
            None
        };

        if let Some(j) = bad {
            let normal = dinv.column(j).normalize();
            let sign = if grad.dot(&normal) > 0.0 { -1.0 } else { 1.0 };
            let p: Vec<f64> = (0..n).map(|k| sim.pts[0][k] + sign * GAMMA * rho * normal[k]).collect();
            sim.vals[j + 1] = trace.value(obj, &p)?;
            sim.pts[j + 1] = p;
            continue;
        }

        let gnorm = grad.norm();
        let step_ok = gnorm > 0.0 && gnorm.is_finite();
        let mut improved = false;
        if step_ok {
            steps += 1;
            let step = -&grad * (rho / gnorm);
            let xt: Vec<f64> = (0..n).map(|k| sim.pts[0][k] + step[k]).collect();
            let ft = trace.value(obj, &xt)?;
            let predicted = rho * gnorm;
            let ratio = (sim.vals[0] - ft) / predicted;
            improved = ratio >= 0.1;
            // Replace the vertex whose removal keeps the simplex volume largest.
            let lambda = dinv.transpose() * &step;
            let j = (0..n)
                .max_by(|&a, &b| {
                    let wa = lambda[a].abs() * (lengths[a] / rho).max(1.0);
                    let wb = lambda[b].abs() * (lengths[b] / rho).max(1.0);
                    wa.total_cmp(&wb)
                })
                .unwrap();
            if ft < sim.vals[0] || lambda[j].abs() > 1e-12 {
                sim.pts[j + 1] = xt;
                sim.vals[j + 1] = ft;
            }
        }
        if !improved {
            if rho <= cfg.cobyla_rho_end {
                break Termination::TrustRadius;
            }
            rho = (0.5 * rho).max(cfg.cobyla_rho_end);
        }
    };
    sim.promote_best();
    let x = sim.pts[0].clone();
    Ok(trace.finish(Method::Cobyla, obj, x, steps, termination))
}
