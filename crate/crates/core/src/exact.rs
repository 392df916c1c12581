//! Sector-restricted exact diagonalization, Lanczos ground states, Haydock
//! tridiagonalization and exact impurity Green's functions.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::greens::{dos, evaluate_spin, Branch, ContinuedFraction, DosCurve, SpinGreens};
use crate::hamiltonian::{qubit_index, AimModel, Spin};
use crate::rng;

/// Fixed `(n_up, n_down)` basis. Bit `k` of a mask is site `k`
/// (0 = impurity).
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBasis {
    pub n_sites: usize,
    pub n_up: usize,
    pub n_down: usize,
    pub states: Vec<(u32, u32)>,
    pub index: HashMap<(u32, u32), usize>,
}

fn masks_with(n_sites: usize, count: usize) -> Vec<u32> {
    (0u32..1 << n_sites).filter(|m| m.count_ones() as usize == count).collect()
}

pub fn sector_basis(model: &AimModel, n_up: usize, n_down: usize) -> Result<SectorBasis> {
    let n_sites = model.n_sites();
    if n_sites > 16 {
        return domain("exact solver limited to 16 sites");
    }
    if n_up > n_sites || n_down > n_sites {
        return domain(format!("occupations ({n_up}, {n_down}) exceed {n_sites} sites"));
    }
    let ups = masks_with(n_sites, n_up);
    let dns = masks_with(n_sites, n_down);
    let states: Vec<(u32, u32)> = ups.iter().flat_map(|&u| dns.iter().map(move |&d| (u, d))).collect();
    let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    Ok(SectorBasis { n_sites, n_up, n_down, states, index })
}

/// Half-filled, `S_z = 0` sector.
pub fn half_filled_basis(model: &AimModel) -> Result<SectorBasis> {
    let h = model.n_sites() / 2;
    sector_basis(model, h, h)
}

impl SectorBasis {
    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    /// Computational-basis index of a state in the qubit layout.
    pub fn qubit_pattern(&self, state: (u32, u32)) -> u64 {
        let nb = self.n_sites - 1;
        let mut bits = 0u64;
        for k in 0..self.n_sites {
            if (state.0 >> k) & 1 == 1 {
                bits |= 1 << qubit_index(k, Spin::Up, nb).expect("site in range");
            }
            if (state.1 >> k) & 1 == 1 {
                bits |= 1 << qubit_index(k, Spin::Down, nb).expect("site in range");
            }
        }
        bits
    }
}

/// Ladder operator on a qubit occupation pattern, ordered by qubit index.
/// Returns the new pattern and the sign `(-1)^{occupied qubits below q}`.
fn ladder(bits: u64, q: usize, dagger: bool) -> Option<(u64, f64)> {
    let occupied = (bits >> q) & 1 == 1;
    if occupied == dagger {
        return None;
    }
    let below = (bits & ((1u64 << q) - 1)).count_ones();
    Some((bits ^ (1 << q), if below % 2 == 0 { 1.0 } else { -1.0 }))
}

fn qubit_to_state(bits: u64, n_sites: usize) -> (u32, u32) {
    let nb = n_sites - 1;
    let (mut up, mut dn) = (0u32, 0u32);
    for k in 0..n_sites {
        if (bits >> qubit_index(k, Spin::Up, nb).unwrap()) & 1 == 1 {
            up |= 1 << k;
        }
        if (bits >> qubit_index(k, Spin::Down, nb).unwrap()) & 1 == 1 {
            dn |= 1 << k;
        }
    }
    (up, dn)
}

/// Symmetric sparse matrix stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHamiltonian {
    pub dimension: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseHamiltonian {
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|&(j, x)| x * v[j]).sum();
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.matvec(v, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, x) in row {
                m[(i, j)] += x;
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let d = self.to_dense();
        (&d - d.transpose()).amax() <= tol
    }
}

/// Sector matrix of the model built from fermionic matrix elements.
pub fn sparse_hamiltonian(model: &AimModel, basis: &SectorBasis) -> Result<SparseHamiltonian> {
    model.validate()?;
    if basis.n_sites != model.n_sites() {
        return domain("basis and model site counts differ");
    }
    let nb = model.n_bath;
    let mut rows = Vec::with_capacity(basis.dimension());
    for &(up, dn) in &basis.states {
        let mut entries: HashMap<usize, f64> = HashMap::new();
        let mut diag = 0.0;
        for k in 0..basis.n_sites {
            let occ = ((up >> k) & 1) + ((dn >> k) & 1);
            diag += model.site_energy(k) * occ as f64;
        }
        if up & dn & 1 == 1 {
            diag += model.hubbard_u;
        }
        let me = basis.index[&(up, dn)];
        entries.insert(me, diag);

        let bits = basis.qubit_pattern((up, dn));
        for spin in Spin::BOTH {
            let qi = qubit_index(0, spin, nb)?;
            for k in 1..=nb {
                let qk = qubit_index(k, spin, nb)?;
                for (from, to) in [(qk, qi), (qi, qk)] {
                    let Some((b1, s1)) = ladder(bits, from, false) else { continue };
                    let Some((b2, s2)) = ladder(b1, to, true) else { continue };
                    let target = basis.index[&qubit_to_state(b2, basis.n_sites)];
                    *entries.entry(target).or_insert(0.0) += model.hybridization * s1 * s2;
                }
            }
        }
        // H|me> is column `me`; H is real symmetric, so it is also row `me`.
        let mut row: Vec<(usize, f64)> = entries.into_iter().filter(|(_, v)| *v != 0.0).collect();
        row.sort_by_key(|e| e.0);
        rows.push(row);
    }
    Ok(SparseHamiltonian { dimension: basis.dimension(), rows })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of classical Gram-Schmidt.
    for _ in 0..2 {
        for v in basis {
            let c = dot(v, w);
            w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Lowest eigenpair of a symmetric tridiagonal matrix.
fn tridiagonal_lowest(a: &[f64], b: &[f64]) -> (f64, DVector<f64>) {
    let k = a.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = a[i];
        if i + 1 < k {
            t[(i, i + 1)] = b[i];
            t[(i + 1, i)] = b[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, v)| (i, *v))
        .expect("nonempty");
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Target residual `||H psi - E psi||` for [`lanczos_ground`].
pub const LANCZOS_RESIDUAL: f64 = 1e-10;

/// Lowest eigenpair by Lanczos with full reorthogonalization, restarting
/// from the current Ritz vector when the Krylov space is exhausted.
pub fn lanczos_ground(h: &SparseHamiltonian, seed: u64) -> Result<(f64, Vec<f64>)> {
    let n = h.dimension;
    if n == 0 {
        return domain("empty Hamiltonian");
    }
    let mut r = rng::stream(&[seed, 0x4c41_4e43]);
    let mut start: Vec<f64> = (0..n).map(|_| r.gen::<f64>() - 0.5).collect();
    let max_restarts = 20;
    let max_krylov = n.min(120);
    for _ in 0..max_restarts {
        let s = norm(&start);
        start.iter_mut().for_each(|x| *x /= s);
        let mut vs: Vec<Vec<f64>> = vec![start.clone()];
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let mut best: Option<(f64, Vec<f64>)> = None;
        loop {
            let k = vs.len() - 1;
            let mut w = h.apply(&vs[k]);
            a.push(dot(&w, &vs[k]));
            orthogonalize(&mut w, &vs);
            let beta = norm(&w);
            let exhausted = beta < 1e-13 || vs.len() >= max_krylov;
            if exhausted || vs.len() % 5 == 0 {
                let (e, y) = tridiagonal_lowest(&a, &b);
                let psi = combine(&vs, &y);
                let res = residual(h, &psi, e);
                if res < LANCZOS_RESIDUAL {
                    return Ok((e, psi));
                }
                best = Some((e, psi));
            }
            if exhausted {
                break;
            }
            b.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            vs.push(w);
        }
        start = best.expect("checked on exhaustion").1;
    }
    Err(Error::Numerical("Lanczos did not reach the residual target".into()))
}

fn combine(vs: &[Vec<f64>], y: &DVector<f64>) -> Vec<f64> {
    let mut psi = vec![0.0; vs[0].len()];
    for (v, c) in vs.iter().zip(y.iter()) {
        psi.iter_mut().zip(v).for_each(|(p, x)| *p += c * x);
    }
    let s = norm(&psi);
    psi.iter_mut().for_each(|p| *p /= s);
    psi
}

pub fn residual(h: &SparseHamiltonian, psi: &[f64], e: f64) -> f64 {
    let hp = h.apply(psi);
    hp.iter().zip(psi).map(|(x, p)| (x - e * p).powi(2)).sum::<f64>().sqrt()
}

/// Haydock coefficients `a_0..a_{L-1}` and `b_1..b_{L-1}` (not squared) for
/// the Krylov space of `v0`, stopping early when `b < 1e-12`.
pub fn haydock_tridiagonal(h: &SparseHamiltonian, v0: &[f64], depth: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = norm(v0);
    if !(s > 0.0) {
        return domain("starting vector is zero");
    }
    if depth == 0 {
        return domain("depth must be at least 1");
    }
    let mut vs = vec![v0.iter().map(|x| x / s).collect::<Vec<f64>>()];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    loop {
        let k = vs.len() - 1;
        let mut w = h.apply(&vs[k]);
        a.push(dot(&w, &vs[k]));
        if a.len() == depth {
            break;
        }
        orthogonalize(&mut w, &vs);
        let beta = norm(&w);
        if beta < 1e-12 {
            break;
        }
        b.push(beta);
        w.iter_mut().for_each(|x| *x /= beta);
        vs.push(w);
    }
    Ok((a, b))
}

/// Moves a sector vector through `c_{site,spin}` or its adjoint.
pub fn apply_ladder(
    model: &AimModel,
    basis: &SectorBasis,
    v: &[f64],
    site: usize,
    spin: Spin,
    dagger: bool,
) -> Result<(SectorBasis, Vec<f64>)> {
    let delta = |n: usize, s: Spin| -> Option<usize> {
        if s != spin {
            return Some(n);
        }
        if dagger {
            (n < basis.n_sites).then_some(n + 1)
        } else {
            n.checked_sub(1)
        }
    };
    let (Some(nu), Some(nd)) = (delta(basis.n_up, Spin::Up), delta(basis.n_down, Spin::Down)) else {
        return domain("ladder operator leaves the Fock space");
    };
    let target = sector_basis(model, nu, nd)?;
    let q = qubit_index(site, spin, model.n_bath)?;
    let mut out = vec![0.0; target.dimension()];
    for (i, &st) in basis.states.iter().enumerate() {
        if v[i] == 0.0 {
            continue;
        }
        if let Some((bits, sign)) = ladder(basis.qubit_pattern(st), q, dagger) {
            out[target.index[&qubit_to_state(bits, basis.n_sites)]] += sign * v[i];
        }
    }
    Ok((target, out))
}

/// Exact ground state of the half-filled sector.
#[derive(Clone, Debug)]
pub struct ExactGround {
    pub basis: SectorBasis,
    pub hamiltonian: SparseHamiltonian,
    pub energy: f64,
    pub vector: Vec<f64>,
}

pub fn exact_ground(model: &AimModel, seed: u64) -> Result<ExactGround> {
    let basis = half_filled_basis(model)?;
    let hamiltonian = sparse_hamiltonian(model, &basis)?;
    let (energy, vector) = lanczos_ground(&hamiltonian, seed)?;
    Ok(ExactGround { basis, hamiltonian, energy, vector })
}

/// Exact branch: Haydock ladder of the excited sector vector.
pub fn exact_branch(
    model: &AimModel,
    ground: &ExactGround,
    spin: Spin,
    branch: Branch,
    depth: Option<usize>,
) -> Result<(ContinuedFraction, SparseHamiltonian, Vec<f64>)> {
    let (basis, v) = apply_ladder(model, &ground.basis, &ground.vector, 0, spin, branch == Branch::Particle)?;
    let h = sparse_hamiltonian(model, &basis)?;
    let weight = dot(&v, &v);
    if weight < crate::greens::EMPTY_BRANCH_WEIGHT {
        return Ok((ContinuedFraction::empty(branch, ground.energy), h, v));
    }
    let (a, b) = haydock_tridiagonal(&h, &v, depth.unwrap_or(h.dimension))?;
    let b_sq = b.iter().map(|x| x * x).collect();
    Ok((ContinuedFraction { a, b_sq, branch, weight, e0: ground.energy }, h, v))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExactGreens {
    pub e0: f64,
    pub spins: Vec<SpinGreens>,
    pub dos: DosCurve,
}

/// Exact impurity Green's function and DOS on `omega + i eta`.
pub fn exact_greens(model: &AimModel, omega_grid: &[f64], eta: f64) -> Result<ExactGreens> {
    let ground = exact_ground(model, 0)?;
    let spins = Spin::BOTH
        .iter()
        .map(|&spin| {
            let (p, _, _) = exact_branch(model, &ground, spin, Branch::Particle, None)?;
            let (h, _, _) = exact_branch(model, &ground, spin, Branch::Hole, None)?;
            evaluate_spin(spin, p, h, omega_grid, eta)
        })
        .collect::<Result<Vec<_>>>()?;
    let curve = dos(&spins, omega_grid, eta);
    Ok(ExactGreens { e0: ground.energy, spins, dos: curve })
}

/// Dense `<v|(z - H)^{-1}|v>` by a linear solve; the oracle for continued
/// fractions.
pub fn dense_resolvent(h: &SparseHamiltonian, v: &[f64], z: Complex64, sign: f64) -> Result<Complex64> {
    let n = h.dimension;
    let d = h.to_dense();
    let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(sign * d[(i, j)], 0.0)
    });
    let rhs = DVector::<Complex64>::from_iterator(n, v.iter().map(|x| Complex64::new(*x, 0.0)));
    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular resolvent".into()))?;
    Ok(rhs.iter().zip(sol.iter()).map(|(a, b)| a.conj() * b).sum())
}

/// Lowest eigenvalue by dense diagonalization.
pub fn dense_ground_energy(h: &SparseHamiltonian) -> f64 {
    SymmetricEigen::new(h.to_dense()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_dimensions() {
        let m1 = AimModel::symmetric(1, 2.0, 1.0).unwrap();
        assert_eq!(half_filled_basis(&m1).unwrap().dimension(), 4);
        let m3 = AimModel::symmetric(3, 2.0, 1.0).unwrap();
        assert_eq!(half_filled_basis(&m3).unwrap().dimension(), 36);
        assert_eq!(sector_basis(&m3, 0, 0).unwrap().dimension(), 1);
        assert!(sector_basis(&m3, 5, 0).is_err());
    }

    #[test]
    fn free_two_site_spectrum() {
        let m = AimModel::with_bath(1, 0.0, 1.0, vec![0.0]).unwrap();
        let h = sparse_hamiltonian(&m, &half_filled_basis(&m).unwrap()).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h.to_dense()).eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_lanczos() {
        let h = SparseHamiltonian { dimension: 3, rows: vec![vec![(0, 2.0)], vec![(1, -1.0)], vec![(2, 0.5)]] };
        let (e, psi) = lanczos_ground(&h, 3).unwrap();
        assert!((e + 1.0).abs() < 1e-12);
        assert!((psi[1].abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn haydock_two_level() {
        let h = SparseHamiltonian { dimension: 2, rows: vec![vec![(0, 1.0)], vec![(1, -1.0)]] };
        let (a, b) = haydock_tridiagonal(&h, &[1.0, 1.0], 4).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-15));
        assert_eq!(b.len(), 1);
        assert!((b[0] - 1.0).abs() < 1e-15);
        let (a, b) = haydock_tridiagonal(&h, &[0.0, 2.0], 4).unwrap();
        assert_eq!((a, b), (vec![-1.0], vec![]));
        assert!(haydock_tridiagonal(&h, &[0.0, 0.0], 4).is_err());
    }
}
