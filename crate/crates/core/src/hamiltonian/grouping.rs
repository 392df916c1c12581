//! Greedy partition of Pauli strings into simultaneously measurable groups,
//! and the Clifford circuits that rotate each group onto the Z basis.

use serde::{Deserialize, Serialize};

use super::pauli::{Letter, PauliString, PauliSum};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    /// Letters agree on every qubit where both strings act.
    QubitWise,
    /// Strings commute as operators.
    #[default]
    FullyCommuting,
}

/// Clifford gates used by measurement circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CliffordGate {
    H(usize),
    S(usize),
    /// `exp(-i pi/4 X)`, maps `Y` to `Z`.
    SqrtX(usize),
    Cnot(usize, usize),
}

impl CliffordGate {
    /// Conjugate `sign * P` by the gate: returns the new sign bit and string.
    /// Sign bit `true` means a leading minus.
    pub fn conjugate(self, neg: bool, x: u64, z: u64) -> (bool, u64, u64) {
        let bit = |m: u64, q: usize| (m >> q) & 1 == 1;
        match self {
            CliffordGate::H(q) => {
                let (xq, zq) = (bit(x, q), bit(z, q));
                let m = 1u64 << q;
                let nx = (x & !m) | ((zq as u64) << q);
                let nz = (z & !m) | ((xq as u64) << q);
                (neg ^ (xq && zq), nx, nz)
            }
            CliffordGate::S(q) => {
                let (xq, zq) = (bit(x, q), bit(z, q));
                (neg ^ (xq && zq), x, z ^ ((xq as u64) << q))
            }
            CliffordGate::SqrtX(q) => {
                // X -> X, Y -> Z, Z -> -Y.
                let (xq, zq) = (bit(x, q), bit(z, q));
                let flip = !xq && zq;
                (neg ^ flip, x ^ ((zq as u64) << q), z)
            }
            CliffordGate::Cnot(a, b) => {
                let (xa, za, xb, zb) = (bit(x, a), bit(z, a), bit(x, b), bit(z, b));
                let flip = xa && zb && !(xb ^ za);
                (neg ^ flip, x ^ ((xa as u64) << b), z ^ ((zb as u64) << a))
            }
        }
    }
}

/// How to measure one group: apply `gates` in order, then the string
/// `group[i]` equals `(-1)^sign[i] * Z^{z_masks[i]}` on computational outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementBasis {
    pub gates: Vec<CliffordGate>,
    pub negative: Vec<bool>,
    pub z_masks: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliGroup {
    pub strings: Vec<PauliString>,
    /// Per-qubit measurement letter; present for qubit-wise groups only.
    pub letters: Option<Vec<Letter>>,
    pub basis: MeasurementBasis,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommutingGroups {
    pub mode: GroupingMode,
    pub n_qubits: usize,
    pub groups: Vec<PauliGroup>,
}

impl CommutingGroups {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_strings(&self) -> usize {
        self.groups.iter().map(|g| g.strings.len()).sum()
    }
}

/// Greedy first-fit over non-identity terms sorted by descending magnitude
/// (ties broken by string order). The identity term is left out.
pub fn group_commuting(h: &PauliSum, mode: GroupingMode) -> CommutingGroups {
    let mut terms: Vec<(PauliString, f64)> = h.non_identity().map(|(p, c)| (*p, c.norm())).collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let compatible = |a: &PauliString, b: &PauliString| match mode {
        GroupingMode::QubitWise => a.qubit_wise_commutes_with(b),
        GroupingMode::FullyCommuting => a.commutes_with(b),
    };
    let mut bins: Vec<Vec<PauliString>> = Vec::new();
    for (p, _) in terms {
        match bins.iter_mut().find(|g| g.iter().all(|q| compatible(&p, q))) {
            Some(g) => g.push(p),
            None => bins.push(vec![p]),
        }
    }

    let n = h.n_qubits();
    let groups = bins
        .into_iter()
        .map(|strings| match mode {
            GroupingMode::QubitWise => {
                let letters = qubit_wise_letters(n, &strings);
                let basis = qubit_wise_basis(&letters, &strings);
                PauliGroup { strings, letters: Some(letters), basis }
            }
            GroupingMode::FullyCommuting => {
                let basis = diagonalizing_basis(n, &strings);
                PauliGroup { strings, letters: None, basis }
            }
        })
        .collect();
    CommutingGroups { mode, n_qubits: n, groups }
}

fn qubit_wise_letters(n: usize, strings: &[PauliString]) -> Vec<Letter> {
    (0..n)
        .map(|q| {
            strings
                .iter()
                .map(|s| s.letter(q))
                .find(|l| *l != Letter::I)
                .unwrap_or(Letter::Z)
        })
        .collect()
}

fn qubit_wise_basis(letters: &[Letter], strings: &[PauliString]) -> MeasurementBasis {
    let gates = letters
        .iter()
        .enumerate()
        .filter_map(|(q, l)| match l {
            Letter::X => Some(CliffordGate::H(q)),
            Letter::Y => Some(CliffordGate::SqrtX(q)),
            _ => None,
        })
        .collect();
    finish_basis(gates, strings)
}

fn finish_basis(gates: Vec<CliffordGate>, strings: &[PauliString]) -> MeasurementBasis {
    let mut negative = Vec::with_capacity(strings.len());
    let mut z_masks = Vec::with_capacity(strings.len());
    for s in strings {
        let (mut neg, mut x, mut z) = (false, s.x_mask(), s.z_mask());
        for g in &gates {
            (neg, x, z) = g.conjugate(neg, x, z);
        }
        assert_eq!(x, 0, "measurement circuit failed to diagonalize {s}");
        negative.push(neg);
        z_masks.push(z);
    }
    MeasurementBasis { gates, negative, z_masks }
}

/// Independent subset of `strings` over GF(2) in the symplectic picture.
fn independent_generators(n: usize, strings: &[PauliString]) -> Vec<(u64, u64)> {
    // Row-reduce 2n-bit vectors packed as (x, z); keep originals of pivot rows.
    let mut reduced: Vec<(u128, (u64, u64))> = Vec::new();
    for s in strings {
        let mut v = (s.x_mask() as u128) | ((s.z_mask() as u128) << n);
        for (r, _) in &reduced {
            let lead = 127 - r.leading_zeros();
            if (v >> lead) & 1 == 1 {
                v ^= r;
            }
        }
        if v != 0 {
            reduced.push((v, (s.x_mask(), s.z_mask())));
            reduced.sort_by(|a, b| b.0.cmp(&a.0));
        }
    }
    reduced.into_iter().map(|(_, g)| g).collect()
}

/// Clifford circuit mapping every string of a commuting set onto Z-type strings.
fn diagonalizing_basis(n: usize, strings: &[PauliString]) -> MeasurementBasis {
    if strings.iter().all(PauliString::is_diagonal) {
        return finish_basis(Vec::new(), strings);
    }
    let mut gens = independent_generators(n, strings);
    let mut gates = Vec::new();
    let apply = |gates: &mut Vec<CliffordGate>, gens: &mut Vec<(u64, u64)>, g: CliffordGate| {
        for (x, z) in gens.iter_mut() {
            let (_, nx, nz) = g.conjugate(false, *x, *z);
            *x = nx;
            *z = nz;
        }
        gates.push(g);
    };

    // Bring the X block to full row rank in reduced echelon form, using
    // Hadamards on non-pivot columns to lift Z-only rows.
    let pivots: Vec<usize> = loop {
        let (pivots, zero_rows) = echelon_x(n, &mut gens);
        if zero_rows.is_empty() {
            break pivots;
        }
        let row = gens[zero_rows[0]];
        let q = (0..n)
            .find(|q| (row.1 >> q) & 1 == 1 && !pivots.contains(q))
            .expect("commuting generators always expose a non-pivot Z column");
        apply(&mut gates, &mut gens, CliffordGate::H(q));
    };

    // Clear non-pivot X entries with CNOTs from the pivot.
    for (r, &p) in pivots.iter().enumerate() {
        for q in 0..n {
            if q != p && !pivots.contains(&q) && (gens[r].0 >> q) & 1 == 1 {
                apply(&mut gates, &mut gens, CliffordGate::Cnot(p, q));
            }
        }
    }
    // Z on pivot columns is now symmetric; S clears the diagonal, CZ the rest.
    for (r, &p) in pivots.iter().enumerate() {
        if (gens[r].1 >> p) & 1 == 1 {
            apply(&mut gates, &mut gens, CliffordGate::S(p));
        }
    }
    for (r, &p) in pivots.iter().enumerate() {
        for &p2 in pivots.iter().skip(r + 1) {
            if (gens[r].1 >> p2) & 1 == 1 {
                for g in [CliffordGate::H(p2), CliffordGate::Cnot(p, p2), CliffordGate::H(p2)] {
                    apply(&mut gates, &mut gens, g);
                }
            }
        }
    }
    for &p in &pivots {
        apply(&mut gates, &mut gens, CliffordGate::H(p));
    }
    finish_basis(gates, strings)
}

/// Reduced row echelon form of the X block. Returns pivot columns (one per
/// leading row) and the indices of rows whose X part vanished.
fn echelon_x(n: usize, gens: &mut [(u64, u64)]) -> (Vec<usize>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(sel) = (row..gens.len()).find(|&r| (gens[r].0 >> col) & 1 == 1) else {
            continue;
        };
        gens.swap(row, sel);
        for r in 0..gens.len() {
            if r != row && (gens[r].0 >> col) & 1 == 1 {
                gens[r].0 ^= gens[row].0;
                gens[r].1 ^= gens[row].1;
            }
        }
        pivots.push(col);
        row += 1;
    }
    (pivots, (row..gens.len()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn sum(strings: &[&str]) -> PauliSum {
        let n = strings[0].len();
        PauliSum::from_terms(
            n,
            strings.iter().map(|s| (PauliString::parse(s).unwrap(), Complex64::new(1.0, 0.0))),
        )
        .unwrap()
    }

    #[test]
    fn z_strings_share_one_group() {
        for mode in [GroupingMode::QubitWise, GroupingMode::FullyCommuting] {
            let g = group_commuting(&sum(&["ZZI", "IZZ", "ZIZ", "ZII"]), mode);
            assert_eq!(g.len(), 1);
            assert!(g.groups[0].basis.gates.is_empty());
        }
    }

    #[test]
    fn identity_is_not_grouped() {
        let g = group_commuting(&sum(&["II", "XX"]), GroupingMode::QubitWise);
        assert_eq!(g.n_strings(), 1);
    }

    #[test]
    fn xx_yy_split_only_qubit_wise() {
        let s = sum(&["XX", "YY"]);
        assert_eq!(group_commuting(&s, GroupingMode::QubitWise).len(), 2);
        assert_eq!(group_commuting(&s, GroupingMode::FullyCommuting).len(), 1);
    }

    #[test]
    fn diagonalized_strings_have_no_x_part() {
        let s = sum(&["XXII", "YYII", "IIXX", "IIYY", "XXYY", "ZZZZ"]);
        let g = group_commuting(&s, GroupingMode::FullyCommuting);
        assert_eq!(g.len(), 1);
        assert_eq!(g.groups[0].basis.z_masks.len(), 6);
    }
}
