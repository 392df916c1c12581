//! Observable estimates from grouped measurements, Hamiltonian moments and
//! shot budgets.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::hamiltonian::{group_commuting, hamiltonian_power, CommutingGroups, GroupingMode, PauliSum};
use crate::rng;
use crate::statevector::{sample_group, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMode {
    Exact,
    Sampled,
}

/// One observable estimate. `std_error` treats the strings of a group as
/// independent, so it is an approximation when they share shots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub std_error: f64,
    pub shots_per_group: usize,
    pub n_groups: usize,
    pub total_shots: usize,
    pub mode: EstimateMode,
}

/// Exact evaluation (`None`) or a fixed number of shots per group.
pub type Shots = Option<usize>;

/// Estimates `<observable>` on `state`. Group `g` draws from the stream
/// keyed `(seed, g)`.
pub fn estimate_observable(
    state: &StateVector,
    observable: &PauliSum,
    groups: &CommutingGroups,
    shots_per_group: Shots,
    seed: u64,
) -> Result<EstimateReport> {
    let Some(shots) = shots_per_group else {
        return Ok(EstimateReport {
            value: state.expectation(observable)?,
            std_error: 0.0,
            shots_per_group: 0,
            n_groups: groups.len(),
            total_shots: 0,
            mode: EstimateMode::Exact,
        });
    };
    if shots < 1 {
        return domain("shots per group must be at least 1");
    }
    if groups.n_strings() != observable.non_identity().count() {
        return domain("groups do not partition the observable");
    }
    let mut value = observable.identity_coeff();
    let mut var = 0.0;
    for (gi, group) in groups.groups.iter().enumerate() {
        let mut r = rng::stream(&[seed, gi as u64]);
        let sample = sample_group(state, group, shots, &mut r)?;
        for (p, m) in sample.strings.iter().zip(&sample.means) {
            let c = observable.coeff(p);
            if c.norm() == 0.0 {
                return domain(format!("grouped string {p} is not a term of the observable"));
            }
            value += c.re * m;
            var += c.re * c.re * (1.0 - m * m).max(0.0) / shots as f64;
        }
    }
    Ok(EstimateReport {
        value,
        std_error: var.sqrt(),
        shots_per_group: shots,
        n_groups: groups.len(),
        total_shots: shots * groups.len(),
        mode: EstimateMode::Sampled,
    })
}

/// Shots per basis for a target absolute error: `ceil(n_pauli / eps^2)`.
pub fn shot_budget(n_pauli: usize, target_eps: f64) -> Result<usize> {
    if n_pauli == 0 || !(target_eps > 0.0) {
        return domain("shot budget needs n_pauli >= 1 and eps > 0");
    }
    let raw = n_pauli as f64 / (target_eps * target_eps);
    // Absorb rounding in eps^2 so that e.g. (6, 0.1) gives 600, not 601.
    Ok((raw * (1.0 - 1e-12)).ceil() as usize)
}

/// Reference shot settings per group for `<H>` and `<H^4>`, keyed by bath size.
pub fn reference_shots(n_bath: usize) -> Option<(usize, usize)> {
    match n_bath {
        1 => Some((700, 700)),
        3 => Some((2500, 30_000)),
        5 => Some((5000, 250_000)),
        _ => None,
    }
}

/// Shots per group for `H^1..H^4`.
///
/// Uses the reference settings for `H` and `H^4` where available and
/// interpolates the implied error `eps_m = sqrt(N_Pauli(H^m) / shots)`
/// linearly in `m` for the middle powers. Other bath sizes use `eps = 0.1`.
pub fn default_shot_schedule(n_bath: usize, pauli_counts: [usize; 4]) -> Result<[usize; 4]> {
    let Some((s1, s4)) = reference_shots(n_bath) else {
        let mut out = [0; 4];
        for (o, &n) in out.iter_mut().zip(&pauli_counts) {
            *o = shot_budget(n, 0.1)?;
        }
        return Ok(out);
    };
    let e1 = (pauli_counts[0] as f64 / s1 as f64).sqrt();
    let e4 = (pauli_counts[3] as f64 / s4 as f64).sqrt();
    let mut out = [s1, 0, 0, s4];
    for m in [2usize, 3] {
        let eps = e1 + (e4 - e1) * (m as f64 - 1.0) / 3.0;
        out[m - 1] = shot_budget(pauli_counts[m - 1], eps)?;
    }
    Ok(out)
}

/// Powers `H^1..H^m_max` with their measurement groups.
#[derive(Clone, Debug)]
pub struct MomentPlan {
    pub powers: Vec<PauliSum>,
    pub groups: Vec<CommutingGroups>,
}

impl MomentPlan {
    pub fn new(h: &PauliSum, m_max: usize, mode: GroupingMode) -> Result<MomentPlan> {
        if !(1..=4).contains(&m_max) {
            return domain("moments are supported up to m = 4");
        }
        let mut powers = Vec::with_capacity(m_max);
        let mut acc = h.clone();
        for m in 1..=m_max {
            if m > 1 {
                acc = hamiltonian_power(h, m)?;
            }
            powers.push(acc.clone());
        }
        let groups = powers.iter().map(|p| group_commuting(p, mode)).collect();
        Ok(MomentPlan { powers, groups })
    }

    pub fn m_max(&self) -> usize {
        self.powers.len()
    }

    pub fn pauli_counts(&self) -> Vec<usize> {
        self.powers.iter().map(|p| p.len()).collect()
    }

    pub fn group_counts(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }
}

/// `<H^m>` for `m = 1..m_max`. In sampled mode power `m` uses
/// `shots[m-1]` per group and the streams keyed `(seed, m, group)`.
pub fn moments(
    state: &StateVector,
    plan: &MomentPlan,
    shots: Option<&[usize]>,
    seed: u64,
) -> Result<Vec<EstimateReport>> {
    if let Some(s) = shots {
        if s.len() < plan.m_max() {
            return domain("shot schedule shorter than the number of moments");
        }
    }
    plan.powers
        .iter()
        .zip(&plan.groups)
        .enumerate()
        .map(|(i, (p, g))| {
            let key = rng::stream_seed(&[seed, i as u64 + 1]);
            estimate_observable(state, p, g, shots.map(|s| s[i]), key)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_formula() {
        assert_eq!(shot_budget(6, 0.1).unwrap(), 600);
        assert_eq!(shot_budget(18, 0.1).unwrap(), 1800);
        assert_eq!(shot_budget(30, 0.1).unwrap(), 3000);
        assert!(shot_budget(0, 0.1).is_err());
        assert!(shot_budget(3, 0.0).is_err());
    }

    #[test]
    fn schedule_endpoints_follow_reference() {
        let s = default_shot_schedule(3, [18, 122, 502, 1192]).unwrap();
        assert_eq!((s[0], s[3]), (2500, 30_000));
        assert!(s[0] < s[1] && s[1] < s[2] && s[2] < s[3]);
    }
}
