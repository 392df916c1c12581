//! Cumulants of Hamiltonian moments, the first-order Lanczos-coefficient
//! expansion, and the infimum energy estimate.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerance on `c2` and on the infimum denominator.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub source_moments: [f64; 4],
    /// Expansion size `N` in `a_l` and `b_l^2`.
    pub system_size_n: f64,
    /// Set when the variance came out negative, as sampled moments can.
    pub negative_variance: bool,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cumulants from `<H>..<H^4>` with the expansion size set to 1.
pub fn cumulants(moments: &[f64]) -> Result<CumulantSet> {
    if moments.len() != 4 {
        return domain(format!("expected four moments, got {}", moments.len()));
    }
    // mu[0] = 1, mu[m] = <H^m>.
    let mu = [1.0, moments[0], moments[1], moments[2], moments[3]];
    let mut c = [0.0f64; 5];
    for m in 1..=4 {
        let mut v = mu[m];
        if m >= 2 {
            for p in 0..=m - 2 {
                v -= binomial(m - 1, p) * c[p + 1] * mu[m - 1 - p];
            }
        }
        c[m] = v;
    }
    Ok(CumulantSet {
        c1: c[1],
        c2: c[2],
        c3: c[3],
        c4: c[4],
        source_moments: [moments[0], moments[1], moments[2], moments[3]],
        system_size_n: 1.0,
        negative_variance: c[2] < -1e-9,
    })
}

impl CumulantSet {
    pub fn with_system_size(mut self, n: f64) -> Self {
        self.system_size_n = n;
        self
    }
}

/// `(a_l, b_l^2)` to first order in `1/N`:
/// `a_l = c1 + l c3 / (c2 N)`,
/// `b_l^2 = l c2 + l (l-1) (c2 c4 - c3^2) / (4 c2^2 N)`.
pub fn lanczos_from_cumulants(c: &CumulantSet, ell: usize) -> Result<(f64, f64)> {
    if ell == 0 {
        return Ok((c.c1, 0.0));
    }
    if !(c.system_size_n >= 1.0) {
        return domain("expansion size N must be at least 1");
    }
    if c.c2 <= 0.0 {
        return Err(Error::Degenerate(format!("c2 = {:.3e} leaves no Krylov direction", c.c2)));
    }
    let l = ell as f64;
    let n = c.system_size_n;
    let a = c.c1 + l * (c.c3 / c.c2) / n;
    let b2 = l * c.c2 + 0.5 * l * (l - 1.0) * ((c.c2 * c.c4 - c.c3 * c.c3) / (2.0 * c.c2 * c.c2)) / n;
    Ok((a, b2))
}

/// Infimum energy
/// `E = c1 - c2^2 / (c3^2 - c2 c4) * (sqrt(3 c3^2 - 2 c2 c4) - c3)`.
///
/// Returns `c1` when the variance is below tolerance (the state is already an
/// eigenstate, or a sampled variance went negative).
pub fn e_inf(c: &CumulantSet) -> Result<f64> {
    if c.c2 < DEGENERACY_TOL {
        return Ok(c.c1);
    }
    let disc = 3.0 * c.c3 * c.c3 - 2.0 * c.c2 * c.c4;
    if disc < 0.0 {
        return domain(format!("complex infimum: 3 c3^2 - 2 c2 c4 = {disc:.3e}"));
    }
    let denom = c.c3 * c.c3 - c.c2 * c.c4;
    if denom.abs() < DEGENERACY_TOL {
        return domain("degenerate denominator c3^2 - c2 c4");
    }
    Ok(c.c1 - c.c2 * c.c2 / denom * (disc.sqrt() - c.c3))
}

/// Outcome of a correction attempt, kept alongside the uncorrected energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub e_vqe: f64,
    pub e_inf: Option<f64>,
    pub cumulants: CumulantSet,
    pub flags: Vec<String>,
}

/// Applies [`e_inf`] and records why it fell back, if it did.
pub fn correct(e_vqe: f64, moments: &[f64]) -> Result<Correction> {
    let c = cumulants(moments)?;
    let mut flags = Vec::new();
    if c.negative_variance {
        flags.push("negative_variance_clamped".to_string());
    }
    let e = match e_inf(&c) {
        Ok(v) => Some(v),
        Err(e) => {
            flags.push(e.to_string());
            None
        }
    };
    Ok(Correction { e_vqe, e_inf: e, cumulants: c, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_level() {
        let c = cumulants(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!((c.c1, c.c2, c.c3, c.c4), (0.0, 1.0, 0.0, -2.0));
        assert_eq!(e_inf(&c).unwrap(), -1.0);
        assert_eq!(lanczos_from_cumulants(&c, 1).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn eigenstate_has_no_fluctuation() {
        let e: f64 = -1.7;
        let c = cumulants(&[e, e * e, e.powi(3), e.powi(4)]).unwrap();
        assert!(c.c2.abs() < 1e-12 && c.c3.abs() < 1e-12 && c.c4.abs() < 1e-12);
        assert_eq!(e_inf(&c).unwrap(), c.c1);
        assert_eq!(lanczos_from_cumulants(&c, 0).unwrap(), (c.c1, 0.0));
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(cumulants(&[1.0, 2.0]).is_err());
    }
}
