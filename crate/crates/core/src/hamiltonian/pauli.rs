//! Pauli strings in symplectic form and sparse Pauli sums.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{domain, Error, Result};

/// Coefficients below this magnitude are dropped by [`PauliSum::simplify`].
pub const SIMPLIFY_TOL: f64 = 1e-12;

/// Largest register supported by the bit-mask encoding.
pub const MAX_QUBITS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' => Some(Letter::I),
            'X' => Some(Letter::X),
            'Y' => Some(Letter::Y),
            'Z' => Some(Letter::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }
}

/// A Hermitian Pauli string `i^{|x&z|} X^x Z^z`, so a qubit with both
/// bits set carries a `Y`.
///
/// Qubit `q` is bit `q` of each mask. Ordering is by `(n_qubits, x, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: u8,
    x: u64,
    z: u64,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Self { n_qubits: n_qubits as u8, x: 0, z: 0 }
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return domain(format!("qubit count {n_qubits} out of range 1..={MAX_QUBITS}"));
        }
        if (x | z) & !mask(n_qubits) != 0 {
            return domain("mask has bits beyond the register");
        }
        Ok(Self { n_qubits: n_qubits as u8, x, z })
    }

    /// Single-letter string on qubit `q`.
    pub fn single(n_qubits: usize, q: usize, letter: Letter) -> Result<Self> {
        if q >= n_qubits {
            return domain(format!("qubit {q} outside {n_qubits}-qubit register"));
        }
        let (xb, zb) = letter.bits();
        Self::from_masks(n_qubits, (xb as u64) << q, (zb as u64) << q)
    }

    /// Parse letters written most-significant qubit first, e.g. `"ZIX"`
    /// is `Z_2 X_0`.
    pub fn parse(s: &str) -> Result<Self> {
        let n = s.chars().count();
        let mut x = 0u64;
        let mut z = 0u64;
        for (pos, c) in s.chars().enumerate() {
            let letter =
                Letter::from_char(c).ok_or_else(|| Error::Domain(format!("bad Pauli letter {c:?}")))?;
            let q = n - 1 - pos;
            let (xb, zb) = letter.bits();
            x |= (xb as u64) << q;
            z |= (zb as u64) << q;
        }
        Self::from_masks(n, x, z)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// True when every letter is `I` or `Z`.
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    /// Number of `Y` letters.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn letter(&self, q: usize) -> Letter {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => Letter::I,
            (1, 0) => Letter::X,
            (1, 1) => Letter::Y,
            _ => Letter::Z,
        }
    }

    pub fn letters(&self) -> Vec<Letter> {
        (0..self.n_qubits()).map(|q| self.letter(q)).collect()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Qubit-wise commutation: on every qubit the letters agree or one is `I`.
    pub fn qubit_wise_commutes_with(&self, other: &PauliString) -> bool {
        let sa = self.x | self.z;
        let sb = other.x | other.z;
        let both = sa & sb;
        (self.x ^ other.x) & both == 0 && (self.z ^ other.z) & both == 0
    }

    /// Product `self * other = i^k * result`, returning `(k mod 4, result)`.
    pub fn mul_phase(&self, other: &PauliString) -> Result<(u8, PauliString)> {
        if self.n_qubits != other.n_qubits {
            return domain("Pauli strings act on different register sizes");
        }
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let k = self.y_count() as i64 + other.y_count() as i64 - (x & z).count_ones() as i64
            + 2 * (self.z & other.x).count_ones() as i64;
        Ok((k.rem_euclid(4) as u8, PauliString { n_qubits: self.n_qubits, x, z }))
    }
}

/// `i^k` as a complex number.
pub fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Positionwise product of two strings with its unit phase.
pub fn pauli_multiply(a: &PauliString, b: &PauliString) -> Result<(Complex64, PauliString)> {
    let (k, p) = a.mul_phase(b)?;
    Ok((i_pow(k), p))
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits()).rev() {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

/// Weighted sum of Pauli strings on a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: BTreeMap::new() }
    }

    pub fn identity(n_qubits: usize, coeff: f64) -> Self {
        let mut s = Self::zero(n_qubits);
        s.add_term(PauliString::identity(n_qubits), Complex64::new(coeff, 0.0));
        s
    }

    pub fn from_terms<I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, Complex64)>,
    {
        let mut s = Self::zero(n_qubits);
        for (p, c) in terms {
            if p.n_qubits() != n_qubits {
                return domain("term register size differs from the sum");
            }
            s.add_term(p, c);
        }
        s.simplify();
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Accumulate without simplifying.
    pub fn add_term(&mut self, p: PauliString, c: Complex64) {
        debug_assert_eq!(p.n_qubits(), self.n_qubits);
        *self.terms.entry(p).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    /// Drop coefficients with magnitude below [`SIMPLIFY_TOL`].
    pub fn simplify(&mut self) {
        self.terms.retain(|_, c| c.norm() >= SIMPLIFY_TOL);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn identity_coeff(&self) -> f64 {
        self.coeff(&PauliString::identity(self.n_qubits)).re
    }

    /// Non-identity strings in key order.
    pub fn non_identity(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter().filter(|(p, _)| !p.is_identity())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    pub fn scale(&self, s: Complex64) -> PauliSum {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.simplify();
        out
    }

    pub fn dagger(&self) -> PauliSum {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.conj();
        }
        out
    }

    /// Operator product `self * other`, simplified.
    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        if self.n_qubits != other.n_qubits {
            return domain("Pauli sums act on different register sizes");
        }
        let mut out = PauliSum::zero(self.n_qubits);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (k, p) = a.mul_phase(b)?;
                out.add_term(p, ca * cb * i_pow(k));
            }
        }
        out.simplify();
        Ok(out)
    }

    /// Anticommutator `{self, other}`.
    pub fn anticommutator(&self, other: &PauliSum) -> Result<PauliSum> {
        let ab = self.multiply(other)?;
        let ba = other.multiply(self)?;
        Ok(&ab + &ba)
    }

    /// Parse the line format written by [`PauliSum::to_text`].
    pub fn from_text(text: &str) -> Result<PauliSum> {
        let mut n_qubits = None;
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return domain(format!("line {}: expected `<re> <im> <letters>`", lineno + 1));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Domain(format!("line {}: {e}", lineno + 1)))
            };
            let c = Complex64::new(parse(fields[0])?, parse(fields[1])?);
            let p = PauliString::parse(fields[2])?;
            match n_qubits {
                None => n_qubits = Some(p.n_qubits()),
                Some(n) if n != p.n_qubits() => {
                    return domain(format!("line {}: inconsistent string length", lineno + 1))
                }
                _ => {}
            }
            terms.push((p, c));
        }
        let n = n_qubits.ok_or_else(|| Error::Domain("no terms in Pauli text".into()))?;
        PauliSum::from_terms(n, terms)
    }

    /// One term per line: `<re> <im> <letters>`, most-significant qubit first.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in &self.terms {
            out.push_str(&format!("{:.17e} {:.17e} {}\n", c.re, c.im, p));
        }
        out
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;
    fn add(self, rhs: &PauliSum) -> PauliSum {
        assert_eq!(self.n_qubits, rhs.n_qubits, "register sizes differ");
        let mut out = self.clone();
        for (p, c) in &rhs.terms {
            out.add_term(*p, *c);
        }
        out.simplify();
        out
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;
    fn mul(self, rhs: &PauliSum) -> PauliSum {
        self.multiply(rhs).expect("register sizes differ")
    }
}

/// `h^m` for `m >= 1`, simplified after every multiplication.
pub fn hamiltonian_power(h: &PauliSum, m: usize) -> Result<PauliSum> {
    if m < 1 {
        return domain("power must be at least 1");
    }
    let mut acc = h.clone();
    for _ in 1..m {
        acc = acc.multiply(h)?;
    }
    // Powers of a Hermitian sum are Hermitian; clear the rounding residue.
    for c in acc.terms.values_mut() {
        if c.im.abs() < SIMPLIFY_TOL {
            c.im = 0.0;
        }
    }
    acc.simplify();
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    #[test]
    fn single_qubit_table() {
        let (ph, r) = pauli_multiply(&p("X"), &p("Y")).unwrap();
        assert_eq!((ph, r), (Complex64::new(0.0, 1.0), p("Z")));
        let (ph, r) = pauli_multiply(&p("Y"), &p("X")).unwrap();
        assert_eq!((ph, r), (Complex64::new(0.0, -1.0), p("Z")));
        let (ph, r) = pauli_multiply(&p("Z"), &p("Z")).unwrap();
        assert_eq!((ph, r), (Complex64::new(1.0, 0.0), p("I")));
        let (ph, r) = pauli_multiply(&p("Z"), &p("X")).unwrap();
        assert_eq!((ph, r), (Complex64::new(0.0, 1.0), p("Y")));
        let (ph, r) = pauli_multiply(&p("Y"), &p("Z")).unwrap();
        assert_eq!((ph, r), (Complex64::new(0.0, 1.0), p("X")));
    }

    #[test]
    fn two_qubit_product() {
        // X0 Y1 * Y0 Y1 = i Z0 (letters written MSB first)
        let (ph, r) = pauli_multiply(&p("YX"), &p("YY")).unwrap();
        assert_eq!(ph, Complex64::new(0.0, 1.0));
        assert_eq!(r, p("IZ"));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        assert!(pauli_multiply(&p("X"), &p("XX")).is_err());
    }

    #[test]
    fn parse_roundtrip() {
        for s in ["IXYZ", "ZZZZZZ", "Y", "XIIIIIIIIIIY"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert_eq!(p("ZIX").letter(0), Letter::X);
        assert_eq!(p("ZIX").letter(2), Letter::Z);
    }

    #[test]
    fn text_roundtrip() {
        let s = PauliSum::from_terms(
            3,
            [(p("XYZ"), Complex64::new(0.25, 0.0)), (p("III"), Complex64::new(-1.5, 0.0))],
        )
        .unwrap();
        let back = PauliSum::from_text(&s.to_text()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn qubit_wise_vs_full_commutation() {
        assert!(p("XX").commutes_with(&p("YY")));
        assert!(!p("XX").qubit_wise_commutes_with(&p("YY")));
        assert!(p("XI").qubit_wise_commutes_with(&p("XZ")));
        assert!(!p("ZX").commutes_with(&p("IZ")));
    }

    #[test]
    fn power_one_is_identity_map() {
        let s = PauliSum::from_terms(2, [(p("XY"), Complex64::new(0.3, 0.0))]).unwrap();
        assert_eq!(hamiltonian_power(&s, 1).unwrap(), s);
        assert!(hamiltonian_power(&s, 0).is_err());
    }
}
