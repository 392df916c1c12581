use rand::Rng;

use super::state::StateVector;
use crate::error::{domain, Error, Result};
use crate::hamiltonian::{PauliGroup, PauliString};

/// Estimates for every string of one group from a shared set of shots.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSample {
    pub strings: Vec<PauliString>,
    pub means: Vec<f64>,
    pub shots: usize,
}

impl GroupSample {
    pub fn get(&self, p: &PauliString) -> Option<f64> {
        self.strings.iter().position(|s| s == p).map(|i| self.means[i])
    }
}

/// Outcome histogram of `shots` computational-basis measurements after
/// rotating into the group's basis. Returns `(outcome, count)` pairs.
pub fn sample_counts<R: Rng + ?Sized>(
    state: &StateVector,
    group: &PauliGroup,
    shots: usize,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    if shots == 0 {
        return domain("shots must be at least 1");
    }
    let mut rotated = state.clone();
    for g in &group.basis.gates {
        rotated.apply_clifford(*g);
    }
    let mut cdf: Vec<f64> = Vec::with_capacity(rotated.amplitudes().len());
    let mut acc = 0.0;
    for a in rotated.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    if (1.0 - acc).abs() >= 1e-9 {
        return Err(Error::Numerical(format!("state norm drifted to {acc:.12}")));
    }
    let mut counts = vec![0usize; cdf.len()];
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        counts[k] += 1;
    }
    Ok(counts.into_iter().enumerate().filter(|(_, c)| *c > 0).collect())
}

/// Empirical mean of every string in `group` from one batch of shots.
pub fn sample_group<R: Rng + ?Sized>(
    state: &StateVector,
    group: &PauliGroup,
    shots: usize,
    rng: &mut R,
) -> Result<GroupSample> {
    let counts = sample_counts(state, group, shots, rng)?;
    let means = group
        .basis
        .z_masks
        .iter()
        .zip(&group.basis.negative)
        .map(|(&z, &neg)| {
            let mut s: i64 = 0;
            for &(k, c) in &counts {
                let even = ((k as u64) & z).count_ones() % 2 == 0;
                s += if even == !neg { c as i64 } else { -(c as i64) };
            }
            s as f64 / shots as f64
        })
        .collect();
    Ok(GroupSample { strings: group.strings.clone(), means, shots })
}
