use aimsolve::exact::{sector_basis, sparse_hamiltonian};
use aimsolve::hamiltonian::{
    build_from_ladder_operators, build_qubit_hamiltonian, dense_matrix, group_commuting, hamiltonian_power,
    jordan_wigner_qubit, pauli_count, pauli_multiply, AimModel, GroupingMode, PauliString, PauliSum,
};
use aimsolve::statevector::StateVector;
use num_complex::Complex64;
use proptest::prelude::*;

fn model(n_bath: usize, u: f64) -> AimModel {
    AimModel::symmetric(n_bath, u, 1.0).unwrap()
}

#[test]
fn jordan_wigner_anticommutation_on_eight_qubits() {
    let n = 8;
    let ops: Vec<(PauliSum, PauliSum)> =
        (0..n).map(|q| (jordan_wigner_qubit(q, n, false).unwrap(), jordan_wigner_qubit(q, n, true).unwrap())).collect();
    let id = PauliString::identity(n);
    for p in 0..n {
        for q in 0..n {
            let mixed = ops[p].0.anticommutator(&ops[q].1).unwrap();
            let same = ops[p].0.anticommutator(&ops[q].0).unwrap();
            let want = if p == q { 1.0 } else { 0.0 };
            for (s, c) in mixed.iter() {
                let target = if *s == id { want } else { 0.0 };
                assert!((c - Complex64::new(target, 0.0)).norm() < 1e-12, "{{c_{p}, c_{q}^dag}} term {s}");
            }
            if p == q {
                assert!((mixed.coeff(&id).re - 1.0).abs() < 1e-12);
            }
            assert!(same.iter().all(|(_, c)| c.norm() < 1e-12), "{{c_{p}, c_{q}}}");
        }
    }
}

#[test]
fn pauli_builder_matches_ladder_products() {
    for n_bath in [1, 3, 5] {
        for u in [2.0, 5.5] {
            let m = model(n_bath, u);
            let a = build_qubit_hamiltonian(&m).unwrap();
            let b = build_from_ladder_operators(&m).unwrap();
            assert_eq!(a.len(), b.len());
            for (s, c) in a.iter() {
                assert!((b.coeff(s) - c).norm() < 1e-12, "n_bath {n_bath} term {s}");
            }
        }
    }
}

// The dense qubit image, restricted to every (n_up, n_down) sector, equals the
// occupation-number construction, and nothing couples different sectors.
#[test]
fn dense_image_matches_fock_space() {
    for n_bath in [1, 3] {
        let m = model(n_bath, 3.0);
        let dense = dense_matrix(&build_qubit_hamiltonian(&m).unwrap());
        let total: f64 = dense.iter().map(|z| z.norm_sqr()).sum();
        let mut inside = 0.0;
        let ns = m.n_sites();
        for nu in 0..=ns {
            for nd in 0..=ns {
                let basis = sector_basis(&m, nu, nd).unwrap();
                let h = sparse_hamiltonian(&m, &basis).unwrap().to_dense();
                let idx: Vec<usize> = basis.states.iter().map(|&s| basis.qubit_pattern(s) as usize).collect();
                for (i, &qi) in idx.iter().enumerate() {
                    for (j, &qj) in idx.iter().enumerate() {
                        let z = dense[(qi, qj)];
                        assert!(z.im.abs() < 1e-12);
                        assert!((z.re - h[(i, j)]).abs() < 1e-12, "n_bath {n_bath} sector ({nu},{nd}) at ({i},{j})");
                        inside += z.norm_sqr();
                    }
                }
            }
        }
        assert!((total - inside).abs() < 1e-9, "off-sector weight {}", total - inside);
    }
}

// Generic U. At U = 2 a few H^4 coefficients cancel exactly on the unit
// bath grid (1190 strings at three bath sites, 10995 at five).
#[test]
fn pauli_counts_per_power() {
    let want = [(1, [6, 12, 22, 23]), (3, [18, 122, 502, 1192]), (5, [30, 360, 2542, 10997])];
    for (n_bath, counts) in want {
        let h = build_qubit_hamiltonian(&model(n_bath, 4.0)).unwrap();
        for (m, &c) in counts.iter().enumerate() {
            let p = hamiltonian_power(&h, m + 1).unwrap();
            assert_eq!(pauli_count(&p), c, "n_bath {n_bath} power {}", m + 1);
        }
    }
}

#[test]
fn fourth_power_of_smallest_model_needs_two_groups() {
    let h = build_qubit_hamiltonian(&model(1, 2.0)).unwrap();
    let h4 = hamiltonian_power(&h, 4).unwrap();
    assert_eq!(group_commuting(&h4, GroupingMode::FullyCommuting).len(), 2);
    assert!(group_commuting(&h4, GroupingMode::QubitWise).len() > 2);
}

#[test]
fn groups_partition_and_commute() {
    let h = build_qubit_hamiltonian(&model(3, 4.0)).unwrap();
    for mode in [GroupingMode::FullyCommuting, GroupingMode::QubitWise] {
        for m in 1..=2 {
            let p = hamiltonian_power(&h, m).unwrap();
            let g = group_commuting(&p, mode);
            assert_eq!(g.n_strings(), p.non_identity().count());
            for group in &g.groups {
                for a in &group.strings {
                    for b in &group.strings {
                        assert!(a.commutes_with(b));
                        if mode == GroupingMode::QubitWise {
                            assert!(a.qubit_wise_commutes_with(b));
                        }
                    }
                }
            }
        }
    }
}

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    (0u64..1 << n, 0u64..1 << n).prop_map(move |(x, z)| PauliString::from_masks(n, x, z).unwrap())
}

fn random_state(n: usize, seed: u64) -> StateVector {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..1 << n).map(|_| Complex64::new(r.gen::<f64>() - 0.5, r.gen::<f64>() - 0.5)).collect();
    StateVector::from_amplitudes(n, amps).unwrap().normalized().unwrap()
}

proptest! {
    #[test]
    fn multiplication_is_associative(a in pauli_string(5), b in pauli_string(5), c in pauli_string(5)) {
        let (p1, ab) = pauli_multiply(&a, &b).unwrap();
        let (p2, left) = pauli_multiply(&ab, &c).unwrap();
        let (q1, bc) = pauli_multiply(&b, &c).unwrap();
        let (q2, right) = pauli_multiply(&a, &bc).unwrap();
        prop_assert_eq!(left, right);
        prop_assert!((p1 * p2 - q1 * q2).norm() < 1e-12);
    }

    #[test]
    fn symplectic_commutation_matches_matrices(a in pauli_string(3), b in pauli_string(3)) {
        let ma = dense_matrix(&PauliSum::from_terms(3, [(a, Complex64::new(1.0, 0.0))]).unwrap());
        let mb = dense_matrix(&PauliSum::from_terms(3, [(b, Complex64::new(1.0, 0.0))]).unwrap());
        let comm = &ma * &mb - &mb * &ma;
        let zero = comm.iter().all(|z| z.norm() < 1e-12);
        prop_assert_eq!(a.commutes_with(&b), zero);
    }

    #[test]
    fn string_expectation_matches_dense(p in pauli_string(4), seed in any::<u64>()) {
        let psi = random_state(4, seed);
        let mat = dense_matrix(&PauliSum::from_terms(4, [(p, Complex64::new(1.0, 0.0))]).unwrap());
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let want = (v.adjoint() * &mat * &v)[(0, 0)];
        prop_assert!((psi.pauli_expectation(&p) - want).norm() < 1e-12);
    }

    #[test]
    fn text_format_round_trips(terms in prop::collection::vec((pauli_string(4), -3.0f64..3.0), 1..8)) {
        let sum = PauliSum::from_terms(4, terms.into_iter().map(|(p, c)| (p, Complex64::new(c, 0.0)))).unwrap();
        let back = PauliSum::from_text(&sum.to_text()).unwrap();
        for (s, c) in sum.iter() {
            prop_assert!((back.coeff(s) - c).norm() < 1e-12);
        }
        prop_assert_eq!(back.len(), sum.len());
    }
}
