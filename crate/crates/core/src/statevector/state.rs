use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::hamiltonian::{i_pow, jordan_wigner_op, CliffordGate, PauliString, PauliSum, Spin};

/// Dense amplitudes over `n_qubits` qubits; qubit `q` is bit `q` of the index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        assert!(n_qubits < 31, "dense simulation limited to 30 qubits");
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn zero_state(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return domain(format!("expected {} amplitudes, got {}", 1usize << n_qubits, amps.len()));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Returns the normalized state, or `None` for a (numerically) zero vector.
    pub fn normalized(&self) -> Option<StateVector> {
        let n = self.norm();
        if n < 1e-300 {
            return None;
        }
        let mut out = self.clone();
        out.amps.iter_mut().for_each(|a| *a /= n);
        Some(out)
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }

    /// `P|psi>` for a single Pauli string.
    pub fn apply_pauli(&self, p: &PauliString, coeff: Complex64) -> StateVector {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        self.accumulate_pauli(p, coeff, &mut out);
        StateVector { n_qubits: self.n_qubits, amps: out }
    }

    fn accumulate_pauli(&self, p: &PauliString, coeff: Complex64, out: &mut [Complex64]) {
        let phase = coeff * i_pow((p.y_count() % 4) as u8);
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        for (i, a) in self.amps.iter().enumerate() {
            let v = if (i & z).count_ones() % 2 == 0 { phase * a } else { -phase * a };
            out[i ^ x] += v;
        }
    }

    /// `O|psi>` for a Pauli sum.
    pub fn apply_sum(&self, op: &PauliSum) -> Result<StateVector> {
        if op.n_qubits() != self.n_qubits {
            return domain("operator and state register sizes differ");
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (p, c) in op.iter() {
            self.accumulate_pauli(p, *c, &mut out);
        }
        Ok(StateVector { n_qubits: self.n_qubits, amps: out })
    }

    /// `<psi|P|psi>` without building `P|psi>`.
    pub fn pauli_expectation(&self, p: &PauliString) -> Complex64 {
        let phase = i_pow((p.y_count() % 4) as u8);
        let (x, z) = (p.x_mask() as usize, p.z_mask() as usize);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            let t = self.amps[i ^ x].conj() * a;
            if (i & z).count_ones() % 2 == 0 {
                acc += t;
            } else {
                acc -= t;
            }
        }
        acc * phase
    }

    /// `<psi|O|psi>` for a Hermitian observable.
    pub fn expectation(&self, observable: &PauliSum) -> Result<f64> {
        if observable.n_qubits() != self.n_qubits {
            return domain("observable and state register sizes differ");
        }
        if !observable.is_hermitian(1e-12) {
            return domain("observable is not Hermitian");
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, c) in observable.iter() {
            acc += c * self.pauli_expectation(p);
        }
        let scale = 1e-10 * (1.0 + acc.re.abs());
        if acc.im.abs() > scale {
            return Err(Error::Numerical(format!(
                "expectation has imaginary residue {:.3e}",
                acc.im
            )));
        }
        Ok(acc.re)
    }

    /// Applies `c_{site,spin}` or its adjoint through its Jordan-Wigner image.
    /// Returns the unnormalized state and its norm.
    pub fn apply_fermion_operator(
        &self,
        site: usize,
        spin: Spin,
        dagger: bool,
        n_bath: usize,
    ) -> Result<(StateVector, f64)> {
        let op = jordan_wigner_op(site, spin, dagger, n_bath)?;
        let out = self.apply_sum(&op)?;
        let n = out.norm();
        Ok((out, n))
    }

    fn popcount_moments(&self, mask: usize) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let k = (i & mask).count_ones() as f64;
            let p = a.norm_sqr();
            m1 += p * k;
            m2 += p * k * k;
        }
        (m1, m2)
    }

    /// Mean and variance of the number of set qubits inside `mask`.
    pub fn occupation_stats(&self, mask: usize) -> (f64, f64) {
        let w = self.norm_sqr();
        let (m1, m2) = self.popcount_moments(mask);
        let mean = m1 / w;
        (mean, m2 / w - mean * mean)
    }

    pub(crate) fn apply_clifford(&mut self, g: CliffordGate) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match g {
            CliffordGate::H(q) => self.pair_map(q, |a, b| ((a + b) * s, (a - b) * s)),
            CliffordGate::S(q) => {
                let bit = 1usize << q;
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a *= Complex64::new(0.0, 1.0);
                    }
                }
            }
            CliffordGate::SqrtX(q) => {
                let mi = Complex64::new(0.0, -s);
                self.pair_map(q, |a, b| (a * s + b * mi, a * mi + b * s))
            }
            CliffordGate::Cnot(c, t) => {
                let (cb, tb) = (1usize << c, 1usize << t);
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
        }
    }

    /// Applies a 2x2 map to every amplitude pair differing in qubit `q`.
    pub(crate) fn pair_map(&mut self, q: usize, f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64)) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = f(self.amps[i], self.amps[i | bit]);
                self.amps[i] = a;
                self.amps[i | bit] = b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_expectations() {
        let z = PauliSum::from_terms(1, [(PauliString::parse("Z").unwrap(), Complex64::new(1.0, 0.0))]).unwrap();
        let x = PauliSum::from_terms(1, [(PauliString::parse("X").unwrap(), Complex64::new(1.0, 0.0))]).unwrap();
        let zero = StateVector::zero_state(1);
        assert_eq!(zero.expectation(&z).unwrap(), 1.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_amplitudes(1, vec![Complex64::new(s, 0.0); 2]).unwrap();
        assert!((plus.expectation(&x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let op = PauliSum::from_terms(1, [(PauliString::parse("X").unwrap(), Complex64::new(0.0, 1.0))]).unwrap();
        assert!(StateVector::zero_state(1).expectation(&op).is_err());
    }

    #[test]
    fn ladder_on_vacuum() {
        let vac = StateVector::zero_state(4);
        let (s, n) = vac.apply_fermion_operator(0, Spin::Up, true, 1).unwrap();
        assert!((n - 1.0).abs() < 1e-15);
        assert!((s.amplitudes()[1 << 1].re - 1.0).abs() < 1e-15);
        let (_, n) = vac.apply_fermion_operator(0, Spin::Up, false, 1).unwrap();
        assert_eq!(n, 0.0);
    }
}
