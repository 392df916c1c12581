//! Anderson impurity model, its Jordan-Wigner qubit image, operator powers
//! and measurement grouping.

mod grouping;
mod pauli;

pub use grouping::{
    group_commuting, CliffordGate, CommutingGroups, GroupingMode, MeasurementBasis, PauliGroup,
};
pub use pauli::{
    hamiltonian_power, i_pow, pauli_multiply, Letter, PauliString, PauliSum, MAX_QUBITS,
    SIMPLIFY_TOL,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];

    pub fn flip(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// Physical parameters of a single-impurity Anderson model with uniform
/// hybridization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AimModel {
    pub n_bath: usize,
    pub hubbard_u: f64,
    pub impurity_energy: f64,
    pub bath_energies: Vec<f64>,
    pub hybridization: f64,
}

/// Symmetric bath levels with unit spacing: `0, -1, +1, -2, +2, ...`.
///
/// Bath site `k` (1-based) gets entry `k-1`. For odd `n_bath` the set is
/// symmetric about zero, which keeps the model particle-hole symmetric.
pub fn symmetric_bath_grid(n_bath: usize, spacing: f64) -> Vec<f64> {
    (1..=n_bath)
        .map(|k| {
            let s = (k / 2) as f64 * spacing;
            if k == 1 {
                0.0
            } else if k % 2 == 0 {
                -s
            } else {
                s
            }
        })
        .collect()
}

impl AimModel {
    /// Particle-hole symmetric model: `eps_0 = -U/2` and the default bath grid.
    pub fn symmetric(n_bath: usize, hubbard_u: f64, hybridization: f64) -> Result<Self> {
        Self::with_bath(n_bath, hubbard_u, hybridization, symmetric_bath_grid(n_bath, 1.0))
    }

    /// Particle-hole symmetric impurity with explicit bath levels.
    pub fn with_bath(
        n_bath: usize,
        hubbard_u: f64,
        hybridization: f64,
        bath_energies: Vec<f64>,
    ) -> Result<Self> {
        let m = Self {
            n_bath,
            hubbard_u,
            impurity_energy: -hubbard_u / 2.0,
            bath_energies,
            hybridization,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bath == 0 || self.n_bath % 2 == 0 {
            return domain(format!("n_bath must be a positive odd integer, got {}", self.n_bath));
        }
        if self.bath_energies.len() != self.n_bath {
            return domain(format!(
                "expected {} bath energies, got {}",
                self.n_bath,
                self.bath_energies.len()
            ));
        }
        if 2 * (self.n_bath + 1) > MAX_QUBITS {
            return domain("model too large for the qubit register");
        }
        let all = [self.hubbard_u, self.impurity_energy, self.hybridization];
        if all.iter().chain(self.bath_energies.iter()).any(|v| !v.is_finite()) {
            return domain("model parameters must be finite");
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_bath + 1
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_sites()
    }

    /// Site energy: the impurity level for site 0, bath levels otherwise.
    pub fn site_energy(&self, site: usize) -> f64 {
        if site == 0 {
            self.impurity_energy
        } else {
            self.bath_energies[site - 1]
        }
    }

    /// True for `eps_0 = -U/2` with a bath spectrum symmetric about zero.
    pub fn is_particle_hole_symmetric(&self) -> bool {
        let mut sorted = self.bath_energies.clone();
        sorted.sort_by(f64::total_cmp);
        let mirrored = sorted
            .iter()
            .zip(sorted.iter().rev())
            .all(|(a, b)| (a + b).abs() < 1e-12);
        (self.impurity_energy + self.hubbard_u / 2.0).abs() < 1e-12 && mirrored
    }
}

/// Qubit carrying spin-orbital `(site, spin)`.
///
/// Up orbitals occupy qubits `0..=n_bath` with the impurity at `n_bath` and
/// bath site `k` at `n_bath - k`; down orbitals mirror them above.
pub fn qubit_index(site: usize, spin: Spin, n_bath: usize) -> Result<usize> {
    if n_bath == 0 {
        return domain("n_bath must be positive");
    }
    if site > n_bath {
        return domain(format!("site {site} outside 0..={n_bath}"));
    }
    Ok(match spin {
        Spin::Up => n_bath - site,
        Spin::Down => n_bath + 1 + site,
    })
}

/// Jordan-Wigner image of a single ladder operator on qubit `q`:
/// `Z_0 ... Z_{q-1} (X_q -/+ i Y_q) / 2`.
pub fn jordan_wigner_qubit(q: usize, n_qubits: usize, dagger: bool) -> Result<PauliSum> {
    if q >= n_qubits {
        return domain(format!("qubit {q} outside {n_qubits}-qubit register"));
    }
    let chain = (1u64 << q) - 1;
    let bit = 1u64 << q;
    let xs = PauliString::from_masks(n_qubits, bit, chain)?;
    let ys = PauliString::from_masks(n_qubits, bit, chain | bit)?;
    let y_sign = if dagger { -0.5 } else { 0.5 };
    PauliSum::from_terms(
        n_qubits,
        [(xs, Complex64::new(0.5, 0.0)), (ys, Complex64::new(0.0, y_sign))],
    )
}

/// Jordan-Wigner image of `c_{site,spin}` or its adjoint.
pub fn jordan_wigner_op(site: usize, spin: Spin, dagger: bool, n_bath: usize) -> Result<PauliSum> {
    let q = qubit_index(site, spin, n_bath)?;
    jordan_wigner_qubit(q, 2 * (n_bath + 1), dagger)
}

/// `(X_a Z...Z X_b + Y_a Z...Z Y_b) / 2` for `a < b`, the image of
/// `c_a^dag c_b + c_b^dag c_a`.
fn hopping_term(n: usize, a: usize, b: usize) -> Result<[PauliString; 2]> {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let between = ((1u64 << hi) - 1) & !((1u64 << (lo + 1)) - 1);
    let ends = (1u64 << lo) | (1u64 << hi);
    Ok([
        PauliString::from_masks(n, ends, between)?,
        PauliString::from_masks(n, ends, between | ends)?,
    ])
}

/// Qubit Hamiltonian of the model, identity term included.
pub fn build_qubit_hamiltonian(model: &AimModel) -> Result<PauliSum> {
    model.validate()?;
    let nb = model.n_bath;
    let n = model.n_qubits();
    let re = |v: f64| Complex64::new(v, 0.0);
    let z_at = |q: usize| PauliString::single(n, q, Letter::Z);
    let u = model.hubbard_u;
    let e0 = model.impurity_energy;

    let mut h = PauliSum::zero(n);
    // n = (1 - Z)/2 on every orbital.
    let constant = e0 + u / 4.0 + model.bath_energies.iter().sum::<f64>();
    h.add_term(PauliString::identity(n), re(constant));
    let imp_up = qubit_index(0, Spin::Up, nb)?;
    let imp_dn = qubit_index(0, Spin::Down, nb)?;
    for q in [imp_up, imp_dn] {
        h.add_term(z_at(q)?, re(-(e0 / 2.0 + u / 4.0)));
    }
    let zz = PauliString::from_masks(n, 0, (1u64 << imp_up) | (1u64 << imp_dn))?;
    h.add_term(zz, re(u / 4.0));

    for k in 1..=nb {
        let ek = model.bath_energies[k - 1];
        for spin in Spin::BOTH {
            let qb = qubit_index(k, spin, nb)?;
            h.add_term(z_at(qb)?, re(-ek / 2.0));
            let qi = qubit_index(0, spin, nb)?;
            for p in hopping_term(n, qi, qb)? {
                h.add_term(p, re(model.hybridization / 2.0));
            }
        }
    }
    h.simplify();
    Ok(h)
}

/// Same operator assembled from products of Jordan-Wigner ladder operators.
/// Slower than [`build_qubit_hamiltonian`]; kept as an independent route.
pub fn build_from_ladder_operators(model: &AimModel) -> Result<PauliSum> {
    model.validate()?;
    let nb = model.n_bath;
    let n = model.n_qubits();
    let number = |site: usize, spin: Spin| -> Result<PauliSum> {
        jordan_wigner_op(site, spin, true, nb)?.multiply(&jordan_wigner_op(site, spin, false, nb)?)
    };
    let mut h = PauliSum::zero(n);
    for site in 0..=nb {
        for spin in Spin::BOTH {
            h = &h + &number(site, spin)?.scale(Complex64::new(model.site_energy(site), 0.0));
        }
    }
    let double = number(0, Spin::Up)?.multiply(&number(0, Spin::Down)?)?;
    h = &h + &double.scale(Complex64::new(model.hubbard_u, 0.0));
    for k in 1..=nb {
        for spin in Spin::BOTH {
            let fwd = jordan_wigner_op(0, spin, true, nb)?.multiply(&jordan_wigner_op(k, spin, false, nb)?)?;
            let hop = &fwd + &fwd.dagger();
            h = &h + &hop.scale(Complex64::new(model.hybridization, 0.0));
        }
    }
    h.simplify();
    Ok(h)
}

/// Dense matrix of a Pauli sum in the computational basis (qubit `q` is bit `q`).
pub fn dense_matrix(h: &PauliSum) -> DMatrix<Complex64> {
    let dim = 1usize << h.n_qubits();
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (p, c) in h.iter() {
        let phase = c * i_pow((p.y_count() % 4) as u8);
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        for i in 0..dim {
            let sign = if (i & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[(i ^ x, i)] += phase * sign;
        }
    }
    m
}

/// Number of strings with nonzero coefficient, the identity included.
pub fn pauli_count(h: &PauliSum) -> usize {
    h.len()
}
