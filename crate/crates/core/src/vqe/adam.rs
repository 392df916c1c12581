use super::{Method, Objective, OptimizerConfig, Termination, Trace, VqeResult};
use crate::error::Result;

pub(super) fn run(cfg: &OptimizerConfig, obj: &mut dyn Objective, x0: &[f64]) -> Result<VqeResult> {
    let n = x0.len();
    let mut trace = Trace::new(obj.noisy(), cfg);
    let mut x = x0.to_vec();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let per_step = 1 + 2 * n;
    let mut prev = trace.value(obj, &x)?;
    trace.accept(prev);
    let mut steps = 0;
    let termination = loop {
        if !prev.is_finite() {
            break Termination::NonFinite;
        }
        if steps >= cfg.adam_max_steps {
            break Termination::MaxSteps;
        }
        if trace.out_of_budget(obj, per_step) {
            break Termination::MaxEvals;
        }
        let g = obj.gradient(&x)?;
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < cfg.grad_tol {
            break Termination::GradTol;
        }
        steps += 1;
        let t = steps as i32;
        let c1 = 1.0 - cfg.adam_beta1.powi(t);
        let c2 = 1.0 - cfg.adam_beta2.powi(t);
        for i in 0..n {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            x[i] -= cfg.adam_lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.adam_eps);
        }
        let e = trace.value(obj, &x)?;
        trace.accept(e);
        if trace.energy_converged(prev, e, cfg.energy_tol) {
            break Termination::EnergyTol;
        }
        prev = e;
    };
    Ok(trace.finish(Method::Adam, obj, x, steps, termination))
}
