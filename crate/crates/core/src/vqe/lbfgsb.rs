//! Limited-memory BFGS on a box, using projected steps and an Armijo
//! backtracking line search. With periodic bounds the box is treated as one
//! period of the objective and iterates are wrapped instead of clipped.

use std::collections::VecDeque;

use super::{Method, Objective, OptimizerConfig, Termination, Trace, VqeResult};
use crate::error::Result;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion: `-H g` restricted to the free variables.
fn direction(g: &[f64], free: &[bool], mem: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(free).map(|(v, f)| if *f { *v } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y) in mem.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push((a, rho));
    }
    if let Some((s, y)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y), (a, rho)) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter()
        .zip(free)
        .map(|(v, f)| if *f { -v } else { 0.0 })
        .collect()
}

/// Step actually taken; under wrapping this is the unwrapped `alpha * d`.
fn displacement(xt: &[f64], x: &[f64], d: &[f64], alpha: f64, periodic: bool) -> Vec<f64> {
    if periodic {
        d.iter().map(|di| alpha * di).collect()
    } else {
        xt.iter().zip(x).map(|(a, b)| a - b).collect()
    }
}

pub(super) fn run(cfg: &OptimizerConfig, obj: &mut dyn Objective, x0: &[f64]) -> Result<VqeResult> {
    let n = x0.len();
    let (lo, hi) = cfg.bounds;
    let periodic = cfg.periodic_bounds;
    let clamp = |v: f64| if periodic { lo + (v - lo).rem_euclid(hi - lo) } else { v.clamp(lo, hi) };
    let mut trace = Trace::new(obj.noisy(), cfg);
    let mut x: Vec<f64> = x0.iter().map(|v| clamp(*v)).collect();
    let mut f = trace.value(obj, &x)?;
    let mut noise_f = obj.noise_level();
    trace.accept(f);
    let mut g = obj.gradient(&x)?;
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut steps = 0;
    let max_backtracks = 30;

    let termination = 'outer: loop {
        if !f.is_finite() {
            break Termination::NonFinite;
        }
        let free: Vec<bool> = (0..n)
            .map(|i| periodic || !((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0)))
            .collect();
        let pg: f64 = g.iter().zip(&free).map(|(v, f)| if *f { v * v } else { 0.0 }).sum::<f64>().sqrt();
        if pg < cfg.grad_tol {
            break Termination::GradTol;
        }

        let mut d = direction(&g, &free, &mem);
        if dot(&d, &g) >= 0.0 {
            mem.clear();
            d = direction(&g, &free, &mem);
        }
        // First step without curvature information: unit length.
        let mut alpha = if mem.is_empty() { (1.0 / pg).min(1.0) } else { 1.0 };
        let accepted = loop {
            let mut found = None;
            for _ in 0..max_backtracks {
                if trace.out_of_budget(obj, 1 + 2 * n) {
                    break 'outer Termination::MaxEvals;
                }
                let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| clamp(xi + alpha * di)).collect();
                let step = displacement(&xt, &x, &d, alpha, periodic);
                let decrease = dot(&g, &step);
                if decrease >= 0.0 {
                    break;
                }
                let ft = trace.value(obj, &xt)?;
                // Under shot noise the sufficient-decrease test is relaxed by
                // twice the standard error of the two estimates.
                let slack = 2.0 * (noise_f + obj.noise_level());
                if ft.is_finite() && ft <= f + cfg.armijo_c1 * decrease + slack {
                    found = Some((xt, ft, step, obj.noise_level()));
                    break;
                }
                alpha *= 0.5;
            }
            match found {
                Some(p) => break p,
                None if !mem.is_empty() => {
                    mem.clear();
                    d = direction(&g, &free, &mem);
                    alpha = (1.0 / pg).min(1.0);
                }
                None => break 'outer Termination::LineSearch,
            }
        };

        let (xt, ft, s, noise_t) = accepted;
        let gt = obj.gradient(&xt)?;
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            mem.push_back((s, y));
            if mem.len() > cfg.lbfgs_memory {
                mem.pop_front();
            }
        }
        steps += 1;
        let previous = f;
        x = xt;
        f = ft;
        noise_f = noise_t;
        g = gt;
        trace.accept(f);
        if trace.energy_converged(previous, f, cfg.energy_tol) {
            break Termination::EnergyTol;
        }
    };
    Ok(trace.finish(Method::Lbfgsb, obj, x, steps, termination))
}
