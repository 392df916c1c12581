use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::error::{domain, Result};

/// Gate kinds. Rotation angles use the half-angle convention
/// `exp(-i theta G / 2)`, so every parameterized gate obeys the two-point
/// shift rule on the states its circuit feeds it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// Bit flip on `targets[0]`.
    PauliX,
    /// `|00> -> cos(t/2)|a> + sin(t/2)|b>` on targets `[a, b]`:
    /// a bit flip on `a` followed by a Givens rotation.
    HalfFilling,
    /// Real rotation `|a> -> cos(t/2)|a> + sin(t/2)|b>` in the one-particle
    /// subspace of `[a, b]`; identity on `|00>` and `|11>`.
    Givens,
    /// Givens rotation times `exp(-i t (Z_a + Z_b) / 4)`.
    PhasedGivens,
    /// Targets `[c, a, b]`: Givens by `+t` when `c` is empty, `-t` when occupied.
    ControlledGivens,
    /// Targets `[c, a, b]`: phased Givens by `+t` or `-t` as above.
    ControlledPhasedGivens,
}

impl GateKind {
    pub fn n_targets(self) -> usize {
        match self {
            GateKind::PauliX => 1,
            GateKind::HalfFilling | GateKind::Givens | GateKind::PhasedGivens => 2,
            GateKind::ControlledGivens | GateKind::ControlledPhasedGivens => 3,
        }
    }

    pub fn is_parameterized(self) -> bool {
        self != GateKind::PauliX
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub parameter_slot: Option<usize>,
}

impl Gate {
    pub fn x(q: usize) -> Gate {
        Gate { kind: GateKind::PauliX, targets: vec![q], parameter_slot: None }
    }

    pub fn param(kind: GateKind, targets: &[usize], slot: usize) -> Gate {
        Gate { kind, targets: targets.to_vec(), parameter_slot: Some(slot) }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.targets.len() != self.kind.n_targets() {
            return domain(format!("{:?} takes {} targets", self.kind, self.kind.n_targets()));
        }
        if self.kind.is_parameterized() != self.parameter_slot.is_some() {
            return domain(format!("{:?} parameter slot mismatch", self.kind));
        }
        for (i, &t) in self.targets.iter().enumerate() {
            if t >= n_qubits {
                return domain(format!("target {t} outside {n_qubits}-qubit register"));
            }
            if self.targets[..i].contains(&t) {
                return domain("gate targets must be distinct");
            }
        }
        Ok(())
    }

    /// Applies the gate in place. `theta` must be present iff the gate is
    /// parameterized.
    pub(crate) fn apply_in_place(&self, state: &mut StateVector, theta: Option<f64>) -> Result<()> {
        self.validate(state.n_qubits())?;
        let t = match (self.kind.is_parameterized(), theta) {
            (true, Some(t)) => t,
            (false, None) => 0.0,
            _ => return domain(format!("{:?} parameter presence mismatch", self.kind)),
        };
        let q = &self.targets;
        let amps = state.amps_mut();
        match self.kind {
            GateKind::PauliX => flip(amps, q[0]),
            GateKind::HalfFilling => {
                flip(amps, q[0]);
                rotate(amps, q[0], q[1], None, t, false);
            }
            GateKind::Givens => rotate(amps, q[0], q[1], None, t, false),
            GateKind::PhasedGivens => rotate(amps, q[0], q[1], None, t, true),
            GateKind::ControlledGivens => rotate(amps, q[1], q[2], Some(q[0]), t, false),
            GateKind::ControlledPhasedGivens => rotate(amps, q[1], q[2], Some(q[0]), t, true),
        }
        Ok(())
    }
}

impl Gate {
    /// Applies the inverse gate in place.
    pub(crate) fn apply_inverse_in_place(&self, state: &mut StateVector, theta: Option<f64>) -> Result<()> {
        match self.kind {
            GateKind::PauliX => self.apply_in_place(state, theta),
            GateKind::HalfFilling => {
                let t = theta.ok_or_else(|| crate::Error::Domain("missing angle".into()))?;
                let q = &self.targets;
                rotate(state.amps_mut(), q[0], q[1], None, -t, false);
                flip(state.amps_mut(), q[0]);
                Ok(())
            }
            _ => self.apply_in_place(state, theta.map(|t| -t)),
        }
    }

    /// `dU/dtheta |phi>`. Every generator has eigenvalues in `{0, +-1/2}`, so
    /// the derivative is `(U(t + pi/2) - U(t - pi/2)) / (2 sqrt 2)` exactly.
    pub(crate) fn derivative(&self, state: &StateVector, theta: f64) -> Result<StateVector> {
        let h = std::f64::consts::FRAC_PI_2;
        let plus = apply_gate(state, self, Some(theta + h))?;
        let minus = apply_gate(state, self, Some(theta - h))?;
        let k = 0.5 * std::f64::consts::FRAC_1_SQRT_2;
        let amps = plus.amplitudes().iter().zip(minus.amplitudes()).map(|(a, b)| (a - b) * k).collect();
        StateVector::from_amplitudes(state.n_qubits(), amps)
    }
}

/// Applies one gate and returns the new state.
pub fn apply_gate(state: &StateVector, gate: &Gate, theta: Option<f64>) -> Result<StateVector> {
    let mut out = state.clone();
    gate.apply_in_place(&mut out, theta)?;
    Ok(out)
}

fn flip(amps: &mut [Complex64], q: usize) {
    let bit = 1usize << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            amps.swap(i, i | bit);
        }
    }
}

fn rotate(amps: &mut [Complex64], a: usize, b: usize, control: Option<usize>, theta: f64, phased: bool) {
    let (ab, bb) = (1usize << a, 1usize << b);
    let cb = control.map(|c| 1usize << c).unwrap_or(0);
    let angle = |i: usize| if i & cb != 0 { -theta } else { theta };
    for i in 0..amps.len() {
        if i & ab != 0 && i & bb == 0 {
            let j = i ^ ab ^ bb;
            let (s, c) = (angle(i) / 2.0).sin_cos();
            let (pa, pb) = (amps[i], amps[j]);
            amps[i] = pa * c - pb * s;
            amps[j] = pa * s + pb * c;
        }
    }
    if phased {
        // Phase exp(-i t (Z_a + Z_b)/4): e^{-i t/2} on |00>, e^{+i t/2} on |11>.
        for (i, amp) in amps.iter_mut().enumerate() {
            let occ = (i & ab != 0) as i32 + (i & bb != 0) as i32;
            if occ != 1 {
                let t = angle(i) / 2.0;
                let ph = if occ == 0 { -t } else { t };
                *amp *= Complex64::from_polar(1.0, ph);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &StateVector, b: &StateVector) -> bool {
        a.amplitudes().iter().zip(b.amplitudes()).all(|(x, y)| (x - y).norm() < 1e-14)
    }

    #[test]
    fn givens_zero_is_identity() {
        let s = StateVector::basis(2, 1);
        let g = Gate::param(GateKind::Givens, &[0, 1], 0);
        assert!(close(&apply_gate(&s, &g, Some(0.0)).unwrap(), &s));
    }

    #[test]
    fn half_filling_symmetric_point() {
        let s = StateVector::zero_state(2);
        let g = Gate::param(GateKind::HalfFilling, &[0, 1], 0);
        let out = apply_gate(&s, &g, Some(std::f64::consts::FRAC_PI_2)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitudes()[1].re - h).abs() < 1e-15);
        assert!((out.amplitudes()[2].re - h).abs() < 1e-15);
    }

    #[test]
    fn givens_half_turn_moves_the_particle() {
        // Under the half-angle convention a full swap of occupation needs t = pi.
        let s = StateVector::basis(2, 1);
        let g = Gate::param(GateKind::Givens, &[0, 1], 0);
        let out = apply_gate(&s, &g, Some(std::f64::consts::PI)).unwrap();
        assert!((out.amplitudes()[2].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_undoes_every_kind() {
        let mut s = StateVector::zero_state(3);
        Gate::param(GateKind::HalfFilling, &[0, 1], 0).apply_in_place(&mut s, Some(0.7)).unwrap();
        Gate::x(2).apply_in_place(&mut s, None).unwrap();
        let gates = [
            (Gate::param(GateKind::HalfFilling, &[2, 1], 0), Some(0.4)),
            (Gate::param(GateKind::Givens, &[0, 1], 0), Some(1.1)),
            (Gate::param(GateKind::PhasedGivens, &[1, 2], 0), Some(-0.8)),
            (Gate::param(GateKind::ControlledGivens, &[2, 0, 1], 0), Some(2.3)),
            (Gate::param(GateKind::ControlledPhasedGivens, &[0, 1, 2], 0), Some(0.9)),
            (Gate::x(1), None),
        ];
        for (g, t) in gates {
            let mut out = apply_gate(&s, &g, t).unwrap();
            g.apply_inverse_in_place(&mut out, t).unwrap();
            assert!(close(&out, &s), "{:?}", g.kind);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut s = StateVector::zero_state(3);
        Gate::param(GateKind::HalfFilling, &[0, 1], 0).apply_in_place(&mut s, Some(0.7)).unwrap();
        Gate::x(2).apply_in_place(&mut s, None).unwrap();
        let h = 1e-6;
        for kind in [GateKind::Givens, GateKind::PhasedGivens, GateKind::ControlledPhasedGivens] {
            let targets: &[usize] = if kind.n_targets() == 3 { &[2, 0, 1] } else { &[1, 2] };
            let g = Gate::param(kind, targets, 0);
            let d = g.derivative(&s, 0.3).unwrap();
            let p = apply_gate(&s, &g, Some(0.3 + h)).unwrap();
            let m = apply_gate(&s, &g, Some(0.3 - h)).unwrap();
            for i in 0..8 {
                let fd = (p.amplitudes()[i] - m.amplitudes()[i]) / (2.0 * h);
                assert!((fd - d.amplitudes()[i]).norm() < 1e-8, "{kind:?}");
            }
        }
    }

    #[test]
    fn parameter_presence_checked() {
        let s = StateVector::zero_state(2);
        assert!(apply_gate(&s, &Gate::x(0), Some(1.0)).is_err());
        assert!(apply_gate(&s, &Gate::param(GateKind::Givens, &[0, 1], 0), None).is_err());
        assert!(apply_gate(&s, &Gate::param(GateKind::Givens, &[1, 1], 0), Some(0.1)).is_err());
    }
}
