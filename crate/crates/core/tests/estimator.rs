use aimsolve::estimator::{estimate_observable, moments, shot_budget, MomentPlan};
use aimsolve::hamiltonian::{
    build_qubit_hamiltonian, group_commuting, hamiltonian_power, AimModel, GroupingMode, PauliSum,
};
use aimsolve::rng;
use aimsolve::statevector::{build_ground_ansatz, run_circuit, sample_group, StateVector};
use aimsolve::vqe::initial_params;
use proptest::prelude::*;

fn setup(n_bath: usize, seed: u64) -> (PauliSum, StateVector) {
    let model = AimModel::symmetric(n_bath, 2.0, 1.0).unwrap();
    let h = build_qubit_hamiltonian(&model).unwrap();
    let c = build_ground_ansatz(n_bath).unwrap();
    (h, run_circuit(&c, &initial_params(c.n_params, seed)).unwrap())
}

#[test]
fn measurement_circuits_map_strings_to_signed_z() {
    let (h, _) = setup(3, 0);
    for mode in [GroupingMode::FullyCommuting, GroupingMode::QubitWise] {
        for m in 1..=3 {
            let g = group_commuting(&hamiltonian_power(&h, m).unwrap(), mode);
            for group in &g.groups {
                for (i, s) in group.strings.iter().enumerate() {
                    let (mut neg, mut x, mut z) = (false, s.x_mask(), s.z_mask());
                    for gate in &group.basis.gates {
                        (neg, x, z) = gate.conjugate(neg, x, z);
                    }
                    assert_eq!(x, 0, "{s} not diagonalized");
                    assert_eq!((neg, z), (group.basis.negative[i], group.basis.z_masks[i]), "{s}");
                }
            }
        }
    }
}

#[test]
fn sampled_strings_are_unbiased() {
    let (h, psi) = setup(3, 8);
    let h2 = hamiltonian_power(&h, 2).unwrap();
    let g = group_commuting(&h2, GroupingMode::FullyCommuting);
    let shots = 20_000;
    let mut r = rng::stream(&[42]);
    let mut outside = 0;
    let mut total = 0;
    for group in &g.groups {
        let s = sample_group(&psi, group, shots, &mut r).unwrap();
        for (p, m) in s.strings.iter().zip(&s.means) {
            let exact = psi.pauli_expectation(p).re;
            let sigma = ((1.0 - exact * exact).max(0.0) / shots as f64).sqrt().max(1e-12);
            if (m - exact).abs() > 3.0 * sigma {
                outside += 1;
            }
            total += 1;
        }
    }
    // Three-sigma events occur at about 0.3% per string.
    assert!((outside as f64) < 0.01 * total as f64 + 2.0, "{outside} of {total} beyond 3 sigma");
}

#[test]
fn energy_estimate_mean_within_three_sigma() {
    let (h, psi) = setup(1, 3);
    let g = group_commuting(&h, GroupingMode::FullyCommuting);
    let exact = psi.expectation(&h).unwrap();
    let n = 400;
    let vals: Vec<f64> =
        (0..n).map(|s| estimate_observable(&psi, &h, &g, Some(200), s as u64).unwrap().value).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * sd / (n as f64).sqrt(), "mean {mean} exact {exact} sd {sd}");
}

#[test]
fn error_falls_as_inverse_square_root_of_shots() {
    let (h, psi) = setup(3, 1);
    let g = group_commuting(&h, GroupingMode::FullyCommuting);
    let exact = psi.expectation(&h).unwrap();
    let budgets = [100usize, 400, 1600, 6400];
    let rms: Vec<f64> = budgets
        .iter()
        .map(|&s| {
            let sq: f64 = (0..200u64)
                .map(|k| (estimate_observable(&psi, &h, &g, Some(s), k).unwrap().value - exact).powi(2))
                .sum();
            (sq / 200.0).sqrt()
        })
        .collect();
    let xs: Vec<f64> = budgets.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn reported_standard_error_tracks_spread() {
    let (h, psi) = setup(1, 9);
    let g = group_commuting(&h, GroupingMode::QubitWise);
    let exact = psi.expectation(&h).unwrap();
    let reports: Vec<_> = (0..300u64).map(|k| estimate_observable(&psi, &h, &g, Some(500), k).unwrap()).collect();
    let rms = (reports.iter().map(|r| (r.value - exact).powi(2)).sum::<f64>() / 300.0).sqrt();
    let mean_se = reports.iter().map(|r| r.std_error).sum::<f64>() / 300.0;
    assert!(rms < 2.0 * mean_se && rms > 0.25 * mean_se, "rms {rms} reported {mean_se}");
    assert_eq!(reports[0].total_shots, 500 * g.len());
}

#[test]
fn exact_moments_match_powers() {
    let (h, psi) = setup(1, 6);
    let plan = MomentPlan::new(&h, 4, GroupingMode::FullyCommuting).unwrap();
    let m = moments(&psi, &plan, None, 0).unwrap();
    let mut hv = psi.clone();
    for (k, r) in m.iter().enumerate() {
        hv = hv.apply_sum(&h).unwrap();
        let want = psi.inner(&hv).re;
        assert!((r.value - want).abs() < 1e-10, "power {}", k + 1);
    }
    assert_eq!(plan.pauli_counts(), vec![6, 12, 22, 23]);
    assert_eq!(plan.group_counts()[3], 2);
}

#[test]
fn budget_from_target_error() {
    assert_eq!(shot_budget(1192, 0.2).unwrap(), 29_800);
    assert!(shot_budget(10, -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn same_seed_same_estimate(seed in any::<u64>(), shots in 1usize..500) {
        let (h, psi) = setup(1, 0);
        let g = group_commuting(&h, GroupingMode::FullyCommuting);
        let a = estimate_observable(&psi, &h, &g, Some(shots), seed).unwrap();
        let b = estimate_observable(&psi, &h, &g, Some(shots), seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sampled_strings_stay_in_range(seed in any::<u64>(), shots in 1usize..200) {
        let (h, psi) = setup(3, seed);
        let g = group_commuting(&h, GroupingMode::FullyCommuting);
        let mut r = rng::stream(&[seed]);
        for group in &g.groups {
            let s = sample_group(&psi, group, shots, &mut r).unwrap();
            prop_assert!(s.means.iter().all(|m| (-1.0..=1.0).contains(m)));
        }
    }
}
