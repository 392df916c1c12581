//! Impurity Green's function as particle and hole continued fractions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimator::{moments, MomentPlan};
use crate::hamiltonian::Spin;
use crate::qcm::{cumulants, lanczos_from_cumulants, CumulantSet};
use crate::statevector::{build_excitation_ansatz, run_circuit, ExcitationKind, StateVector};

/// Excitations with squared norm below this contribute nothing.
pub const EMPTY_BRANCH_WEIGHT: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Particle,
    Hole,
}

impl From<Branch> for ExcitationKind {
    fn from(b: Branch) -> Self {
        match b {
            Branch::Particle => ExcitationKind::Particle,
            Branch::Hole => ExcitationKind::Hole,
        }
    }
}

/// One branch of the Green's function. `b_sq[l-1]` couples levels `l-1` and `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    pub a: Vec<f64>,
    pub b_sq: Vec<f64>,
    pub branch: Branch,
    pub weight: f64,
    pub e0: f64,
}

impl ContinuedFraction {
    pub fn empty(branch: Branch, e0: f64) -> Self {
        Self { a: vec![0.0], b_sq: vec![], branch, weight: 0.0, e0 }
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.b_sq.len() + 1 != self.a.len() {
            return domain("continued fraction needs len(b_sq) == len(a) - 1 >= 0");
        }
        if let Some(b) = self.b_sq.iter().find(|b| **b < -1e-9) {
            return domain(format!("negative b^2 = {b:.3e}"));
        }
        if !(self.weight >= 0.0) {
            return domain("branch weight must be nonnegative");
        }
        Ok(())
    }
}

/// Evaluates a branch at complex energy `omega` (bottom-up).
///
/// Particle: `w / (omega + E0 - a0 - b1^2 / (omega + E0 - a1 - ...))`;
/// hole: `w / (omega - E0 + a0 - b1^2 / (omega - E0 + a1 - ...))`.
pub fn continued_fraction_eval(cf: &ContinuedFraction, omega: Complex64) -> Result<Complex64> {
    if !(omega.im > 0.0) {
        return domain("continued fractions are evaluated above the real axis");
    }
    if cf.weight == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let base = |l: usize| match cf.branch {
        Branch::Particle => omega + cf.e0 - cf.a[l],
        Branch::Hole => omega - cf.e0 + cf.a[l],
    };
    let mut tail = Complex64::new(0.0, 0.0);
    for l in (1..cf.a.len()).rev() {
        tail = cf.b_sq[l - 1].max(0.0) / (base(l) - tail);
    }
    let d = base(0) - tail;
    if d.norm() == 0.0 {
        return Err(Error::Numerical("zero continued-fraction denominator".into()));
    }
    Ok(cf.weight / d)
}

/// Normalized excitation state with its weight; `state` is `None` for an
/// empty branch.
#[derive(Clone, Debug)]
pub struct Excitation {
    pub state: Option<StateVector>,
    pub weight: f64,
    /// Overlap with the operator-method state when built from the ansatz.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationMethod {
    /// Apply the ladder operator to the ground state.
    #[default]
    Operator,
    /// Run the excitation ansatz at `pi - theta`.
    Ansatz,
}

/// `c^dag_{0,spin}|psi>` (particle) or `c_{0,spin}|psi>` (hole).
pub fn excitation_operator(ground: &StateVector, n_bath: usize, spin: Spin, branch: Branch) -> Result<Excitation> {
    let (s, n) = ground.apply_fermion_operator(0, spin, branch == Branch::Particle, n_bath)?;
    let weight = n * n;
    if weight < EMPTY_BRANCH_WEIGHT {
        return Ok(Excitation { state: None, weight: 0.0, fidelity: None });
    }
    Ok(Excitation { state: s.normalized(), weight, fidelity: None })
}

/// Spin projection of the excited state is `+1/2` for an added up particle
/// or a removed down electron.
pub fn excitation_sz_up(spin: Spin, branch: Branch) -> bool {
    matches!((spin, branch), (Spin::Up, Branch::Particle) | (Spin::Down, Branch::Hole))
}

/// Excitation ansatz at `pi - theta_ground`. The weight comes from the
/// operator-method state, and the fidelity between the two is recorded.
pub fn excitation_ansatz(
    ground: &StateVector,
    ground_params: &[f64],
    n_bath: usize,
    spin: Spin,
    branch: Branch,
) -> Result<Excitation> {
    let reference = excitation_operator(ground, n_bath, spin, branch)?;
    let circuit = build_excitation_ansatz(n_bath, branch.into(), excitation_sz_up(spin, branch))?;
    let flipped: Vec<f64> = ground_params.iter().map(|t| std::f64::consts::PI - t).collect();
    let state = run_circuit(&circuit, &flipped)?;
    let Some(r) = reference.state else {
        return Ok(Excitation { state: None, weight: 0.0, fidelity: None });
    };
    let fidelity = state.fidelity(&r);
    Ok(Excitation { state: Some(state), weight: reference.weight, fidelity: Some(fidelity) })
}

/// Coefficients of one branch from the moments of its excitation state.
#[derive(Clone, Debug)]
pub struct MomentBranch {
    pub fraction: ContinuedFraction,
    pub cumulants: Option<CumulantSet>,
    pub warnings: Vec<String>,
}

/// Lanczos ladder `l = 0..depth-1` from the first-order cumulant expansion.
/// Ladders stop early once `b_l^2` falls below `1e-12`.
pub fn branch_coefficients_moments(
    excitation: &Excitation,
    plan: &MomentPlan,
    shots: Option<&[usize]>,
    seed: u64,
    depth: usize,
    system_size_n: f64,
    branch: Branch,
    e0: f64,
) -> Result<MomentBranch> {
    if depth < 1 {
        return domain("depth must be at least 1");
    }
    let Some(state) = &excitation.state else {
        return Ok(MomentBranch { fraction: ContinuedFraction::empty(branch, e0), cumulants: None, warnings: vec![] });
    };
    let est = moments(state, plan, shots, seed)?;
    let mut m: Vec<f64> = est.iter().map(|r| r.value).collect();
    m.resize(4, 0.0);
    let c = cumulants(&m)?.with_system_size(system_size_n);
    let mut warnings = Vec::new();
    if depth > 2 {
        warnings.push(format!("depth {depth} extrapolates the first-order expansion beyond l = 1"));
    }
    let mut a = vec![c.c1];
    let mut b_sq = Vec::new();
    for l in 1..depth {
        if c.c2 < 1e-12 {
            break;
        }
        let (al, bl) = lanczos_from_cumulants(&c, l)?;
        if bl < 1e-12 {
            if bl < -1e-9 {
                warnings.push(format!("negative b^2 = {bl:.3e} at l = {l}; ladder truncated"));
            }
            break;
        }
        a.push(al);
        b_sq.push(bl);
    }
    let fraction = ContinuedFraction { a, b_sq, branch, weight: excitation.weight, e0 };
    fraction.validate()?;
    Ok(MomentBranch { fraction, cumulants: Some(c), warnings })
}

/// Diagonal impurity Green's function of one spin on a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpinGreens {
    pub spin: Spin,
    pub particle: ContinuedFraction,
    pub hole: ContinuedFraction,
    pub values: Vec<Complex64>,
}

/// `G(omega + i eta) = particle + hole` for one spin at every grid point.
pub fn evaluate_spin(
    spin: Spin,
    particle: ContinuedFraction,
    hole: ContinuedFraction,
    omega_grid: &[f64],
    eta: f64,
) -> Result<SpinGreens> {
    if !(eta > 0.0) {
        return domain("broadening must be positive");
    }
    let values = omega_grid
        .iter()
        .map(|&w| {
            let z = Complex64::new(w, eta);
            Ok(continued_fraction_eval(&particle, z)? + continued_fraction_eval(&hole, z)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpinGreens { spin, particle, hole, values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosCurve {
    pub omega_grid: Vec<f64>,
    pub dos_values: Vec<f64>,
    pub eta: f64,
}

/// `-(1/pi) Im Tr G` over the supplied spin components.
pub fn dos(greens: &[SpinGreens], omega_grid: &[f64], eta: f64) -> DosCurve {
    let dos_values = (0..omega_grid.len())
        .map(|i| -greens.iter().map(|g| g.values[i].im).sum::<f64>() / std::f64::consts::PI)
        .collect();
    DosCurve { omega_grid: omega_grid.to_vec(), dos_values, eta }
}

/// Uniform grid of `points` energies on `[-(U + 6V), U + 6V]`.
pub fn default_omega_grid(hubbard_u: f64, hybridization: f64, points: usize) -> Vec<f64> {
    let half = hubbard_u.abs() + 6.0 * hybridization.abs();
    linspace(-half, half, points)
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect(),
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1])).sum()
}

impl DosCurve {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.omega_grid, &self.dos_values)
    }

    /// Interior local maxima higher than `rel` times the global maximum,
    /// refined by a parabola through the three neighbouring points.
    pub fn peaks(&self, rel: f64) -> Vec<f64> {
        let y = &self.dos_values;
        let x = &self.omega_grid;
        let top = y.iter().cloned().fold(f64::MIN, f64::max);
        (1..y.len().saturating_sub(1))
            .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] > rel * top)
            .map(|i| {
                let denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
                let shift = if denom.abs() > 0.0 { 0.5 * (y[i - 1] - y[i + 1]) / denom } else { 0.0 };
                x[i] + shift * (x[i + 1] - x[i])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pole_lorentzian() {
        let cf = ContinuedFraction { a: vec![0.3], b_sq: vec![], branch: Branch::Particle, weight: 1.0, e0: 0.0 };
        let eta = 0.05;
        let g = continued_fraction_eval(&cf, Complex64::new(0.3, eta)).unwrap();
        let height = -g.im / std::f64::consts::PI;
        assert!((height - 1.0 / (std::f64::consts::PI * eta)).abs() < 1e-9);
    }

    #[test]
    fn real_axis_rejected() {
        let cf = ContinuedFraction::empty(Branch::Hole, 0.0);
        assert!(continued_fraction_eval(&cf, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn herglotz_sign() {
        let cf = ContinuedFraction { a: vec![0.1, -0.4, 0.7], b_sq: vec![0.8, 0.3], branch: Branch::Hole, weight: 0.6, e0: -1.0 };
        for i in 0..50 {
            let w = -5.0 + 0.2 * i as f64;
            assert!(continued_fraction_eval(&cf, Complex64::new(w, 0.01)).unwrap().im <= 0.0);
        }
    }

    #[test]
    fn trapezoid_of_line() {
        let x = linspace(0.0, 2.0, 5);
        assert!((trapezoid(&x, &x) - 2.0).abs() < 1e-15);
    }
}
