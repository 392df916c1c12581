use std::path::Path;

use aimsolve::config::{ExperimentConfig, ShotsMode};
use aimsolve::experiment::{load_records, report_costs, run_experiment, RunOptions, Stages};
use aimsolve::hamiltonian::{build_qubit_hamiltonian, group_commuting, AimModel, GroupingMode};
use aimsolve::statevector::build_ground_ansatz;
use aimsolve::vqe::{initial_params, minimize, EnergyObjective, Method, Objective, OptimizerConfig};

fn small(method: Method) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::minimal(1);
    cfg.master_seed = 5;
    cfg.model.u_values = vec![2.0, 4.0];
    cfg.vqe.method = method;
    cfg.vqe.shots = ShotsMode::PerGroup { shots: 100 };
    cfg.vqe.n_seeds = Some(2);
    cfg.vqe.n_repeats = Some(2);
    cfg.greens.points = 201;
    cfg
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = small(Method::Lbfgsb);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let stages = Stages::from_config(&cfg);
    run_experiment(&cfg, stages, &RunOptions { out_dir: Some(a.path().into()), resume: false }).unwrap();
    run_experiment(&cfg, stages, &RunOptions { out_dir: Some(b.path().into()), resume: false }).unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.iter().any(|(n, _)| n.ends_with("_quantum.csv")));
    assert!(fa.iter().any(|(n, _)| n.ends_with("_exact.json")));
    assert_eq!(fa.len(), 8 + 1 + 2 + 8);
    assert_eq!(fa, fb);
}

#[test]
fn resume_reuses_unchanged_runs() {
    let mut cfg = small(Method::Cobyla);
    cfg.greens.enabled = false;
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions { out_dir: Some(dir.path().into()), resume: true };
    let first = run_experiment(&cfg, Stages::from_config(&cfg), &opts).unwrap();
    assert_eq!(first.reused, 0);
    let again = run_experiment(&cfg, Stages::from_config(&cfg), &opts).unwrap();
    assert_eq!(again.reused, 8);
    assert_eq!(first.records, again.records);

    cfg.model.u_values = vec![2.0, 6.0];
    let changed = run_experiment(&cfg, Stages::from_config(&cfg), &opts).unwrap();
    assert_eq!(changed.reused, 4);

    cfg.master_seed += 1;
    let reseeded = run_experiment(&cfg, Stages::from_config(&cfg), &opts).unwrap();
    assert_eq!(reseeded.reused, 0);

    cfg.vqe.n_seeds = Some(1);
    let shrunk = run_experiment(&cfg, Stages::from_config(&cfg), &opts).unwrap();
    assert_eq!(shrunk.reused, 4);
    assert_eq!(load_records(dir.path()).unwrap().len(), 4);
}

#[test]
fn output_directory_does_not_change_results() {
    let mut cfg = small(Method::Adam);
    cfg.qcm.enabled = false;
    cfg.greens.enabled = false;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cfg.output.directory = a.path().into();
    let ra = run_experiment(&cfg, Stages::vqe_only(), &RunOptions::default()).unwrap();
    cfg.output.directory = b.path().into();
    let rb = run_experiment(&cfg, Stages::vqe_only(), &RunOptions::default()).unwrap();
    assert_eq!(ra.records, rb.records);
    assert_eq!(ra.manifest.config_hash, rb.manifest.config_hash);
}

#[test]
fn cost_table_from_records() {
    let dir = tempfile::tempdir().unwrap();
    for method in Method::ALL {
        let mut cfg = small(method);
        cfg.qcm.enabled = false;
        cfg.greens.enabled = false;
        cfg.model.u_values = vec![2.0];
        run_experiment(&cfg, Stages::vqe_only(), &RunOptions { out_dir: Some(dir.path().join(format!("{method:?}"))), resume: false })
            .unwrap();
    }
    let mut records = Vec::new();
    for method in Method::ALL {
        records.extend(load_records(&dir.path().join(format!("{method:?}"))).unwrap());
    }
    let table = report_costs(&records);
    assert_eq!(table.rows.len(), 3);
    let row = |m| table.rows.iter().find(|r| r.method == m).unwrap();
    let (c, l) = (row(Method::Cobyla), row(Method::Lbfgsb));
    assert_eq!(c.executions_per_evaluation, c.n_groups);
    assert_eq!(l.executions_per_evaluation, l.n_groups * (1 + 2 * l.n_params));
    assert_eq!(table.cobyla_cheapest, Some(true));
    assert!(load_records(&dir.path().join("missing")).unwrap().is_empty());
}

#[test]
fn tallies_follow_group_counts() {
    let model = AimModel::symmetric(1, 2.0, 1.0).unwrap();
    let h = build_qubit_hamiltonian(&model).unwrap();
    let groups = group_commuting(&h, GroupingMode::FullyCommuting);
    let c = build_ground_ansatz(1).unwrap();
    let x = initial_params(c.n_params, 0);
    let mut obj = EnergyObjective::new(&c, &h, &groups, Some(100), 1);
    obj.value(&x).unwrap();
    assert_eq!(obj.tallies().circuit_executions, groups.len());
    obj.gradient(&x).unwrap();
    assert_eq!(obj.tallies().circuit_executions, groups.len() * (1 + 2 * c.n_params));
    assert_eq!(obj.tallies().total_shots, 100 * groups.len() * (1 + 2 * c.n_params));

    for method in Method::ALL {
        let mut obj = EnergyObjective::new(&c, &h, &groups, Some(100), 2);
        let r = minimize(&OptimizerConfig::for_method(method), &mut obj, &x).unwrap();
        assert_eq!(r.circuit_executions, r.n_evaluations * groups.len(), "{method:?}");
        assert!(r.n_evaluations <= OptimizerConfig::default().max_evals);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    for text in [
        "[model]\nn_bath = 4\n",
        "[model]\nn_bath = 1\nu_values = []\n",
        "[model]\nn_bath = 3\nbath_energies = [0.0]\n",
        "[model]\nn_bath = 1\n[vqe]\nshots = { mode = \"per_group\", shots = 0 }\n",
        "[model]\nn_bath = 1\n[vqe]\nmethod = \"newton\"\n",
        "[model]\nn_bath = 1\n[greens]\neta = 0.0\n",
        "[model]\nn_bath = 1\n[output]\nformats = []\n",
    ] {
        assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
    }
}
