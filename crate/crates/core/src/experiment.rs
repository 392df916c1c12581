//! Protocol runner: VQE ensembles over a grid of interaction strengths, QCM
//! corrections, Green's-function reconstruction, and on-disk result bundles.
//!
//! Bundle layout under the output directory:
//! `manifest.json`, `runs/*.json` (one record per run), `aggregate.{json,csv}`
//! and `dos/nb{N}_u{U}_{quantum,exact}.{csv,json}`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format, MomentShots, ShotsMode};
use crate::error::{Error, Result};
use crate::estimator::{default_shot_schedule, moments, shot_budget, MomentPlan, Shots};
use crate::exact::{exact_ground, exact_greens};
use crate::greens::{
    branch_coefficients_moments, default_omega_grid, dos, evaluate_spin, excitation_ansatz, excitation_operator,
    linspace, Branch, ContinuedFraction, DosCurve, Excitation, ExcitationMethod,
};
use crate::hamiltonian::{
    build_qubit_hamiltonian, group_commuting, pauli_count, AimModel, CommutingGroups, PauliSum, Spin,
};
use crate::qcm::{correct, Correction};
use crate::rng::stream_seed;
use crate::statevector::{build_ground_ansatz_layers, run_circuit, AnsatzCircuit};
use crate::vqe::{initial_params, minimize, EnergyObjective, Method, VqeResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "AIMSOLVE_THREADS";

const QCM_STREAM: u64 = 0x51C3;
const GREENS_STREAM: u64 = 0x6F2E;

/// Pipeline stages to execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stages {
    pub vqe: bool,
    pub qcm: bool,
    pub greens: bool,
    pub exact: bool,
}

impl Stages {
    /// Everything the config enables.
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self { vqe: true, qcm: cfg.qcm.enabled, greens: cfg.greens.enabled, exact: cfg.greens.enabled }
    }

    pub fn vqe_only() -> Self {
        Self { vqe: true, qcm: false, greens: false, exact: false }
    }

    pub fn exact_only() -> Self {
        Self { vqe: false, qcm: false, greens: false, exact: true }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides `output.directory`.
    pub out_dir: Option<PathBuf>,
    /// Reuse run records whose input hash is unchanged.
    pub resume: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QcmRecord {
    pub correction: Correction,
    pub rel_error: Option<f64>,
    pub shots_per_group: Option<Vec<usize>>,
    pub circuit_executions: usize,
    pub total_shots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub spin: Spin,
    pub fraction: ContinuedFraction,
    pub fidelity: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreensRecord {
    pub excitation: ExcitationMethod,
    pub branches: Vec<BranchRecord>,
    pub circuit_executions: usize,
    pub total_shots: usize,
}

/// Everything produced by one `(U, seed, repeat)` task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub input_hash: String,
    pub n_bath: usize,
    pub hubbard_u: f64,
    pub seed: usize,
    pub repeat: usize,
    pub run_seed: u64,
    pub n_params: usize,
    pub n_groups: usize,
    pub shots_per_group: Option<usize>,
    pub e_exact: f64,
    pub rel_error: f64,
    pub vqe: VqeResult,
    pub qcm: Option<QcmRecord>,
    pub greens: Option<GreensRecord>,
}

/// Per-`U` statistics, all recomputable from the run records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_bath: usize,
    pub hubbard_u: f64,
    pub method: Method,
    pub n_runs: usize,
    pub e_exact: f64,
    pub mean_energy: f64,
    pub mean_rel_error: f64,
    pub std_rel_error: f64,
    pub mean_qcm_rel_error: Option<f64>,
    pub std_qcm_rel_error: Option<f64>,
    pub qcm_fallbacks: usize,
    pub mean_evaluations: f64,
    pub mean_circuit_executions: f64,
    pub mean_total_shots: f64,
    pub mean_qcm_shots: Option<f64>,
    pub mean_greens_shots: Option<f64>,
    /// Lanczos coefficients averaged over runs, ordered (spin, branch).
    pub averaged_fractions: Vec<(Spin, ContinuedFraction)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DosSidecar {
    pub method: String,
    pub n_bath: usize,
    pub hubbard_u: f64,
    pub eta: f64,
    pub integral: f64,
    pub peaks: Vec<f64>,
    pub fractions: Vec<(Spin, ContinuedFraction)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub stages: Stages,
    pub runs: Vec<String>,
    pub exact_energies: Vec<(f64, f64)>,
}

/// Summary returned by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct Bundle {
    pub directory: PathBuf,
    pub manifest: Manifest,
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
    pub reused: usize,
}

/// Shared per-`U` inputs.
struct Context {
    model: AimModel,
    hamiltonian: PauliSum,
    groups: CommutingGroups,
    circuit: AnsatzCircuit,
    plan: Option<MomentPlan>,
    e_exact: f64,
    vqe_shots: Shots,
    qcm_shots: Option<Vec<usize>>,
    greens_shots: Option<Vec<usize>>,
}

fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Serde(e.to_string()))
}

/// Hash of every config field that affects results; the output block is left out.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.output = Default::default();
    Ok(hex_digest(serde_json::to_string(&c).map_err(|e| Error::Serde(e.to_string()))?.as_bytes()))
}

/// Inputs of a single run: the config reduced to its own U and without the
/// ensemble sizes, so growing a grid or an ensemble keeps existing runs.
fn run_hash(cfg: &ExperimentConfig, stages: Stages, u: f64, seed: usize, repeat: usize) -> Result<String> {
    let mut c = cfg.clone();
    c.model.u_values = vec![u];
    c.vqe.n_seeds = None;
    c.vqe.n_repeats = None;
    let id = format!("{}|{}|{}|{VERSION}|{seed}|{repeat}", config_hash(&c)?, stages.qcm, stages.greens);
    Ok(hex_digest(id.as_bytes()))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

/// Write-temp-then-rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn u_tag(u: f64) -> String {
    format!("{u}").replace('.', "p").replace('-', "m")
}

fn run_file(n_bath: usize, u: f64, seed: usize, repeat: usize) -> String {
    format!("nb{n_bath}_u{}_s{seed}_r{repeat}.json", u_tag(u))
}

fn moment_shots(mode: MomentShots, n_bath: usize, plan: &MomentPlan) -> Result<Option<Vec<usize>>> {
    let counts = plan.pauli_counts();
    Ok(match mode {
        MomentShots::Exact => None,
        MomentShots::PerGroup { shots } => Some(shots.to_vec()),
        MomentShots::Schedule => {
            Some(default_shot_schedule(n_bath, [counts[0], counts[1], counts[2], counts[3]])?.to_vec())
        }
    })
}

fn context(cfg: &ExperimentConfig, stages: Stages, u: f64) -> Result<Context> {
    let model = cfg.model_for(u)?;
    let hamiltonian = build_qubit_hamiltonian(&model)?;
    let groups = group_commuting(&hamiltonian, cfg.vqe.grouping);
    let circuit = build_ground_ansatz_layers(model.n_bath, cfg.vqe.layers)?;
    let e_exact = exact_ground(&model, cfg.master_seed)?.energy;
    let vqe_shots = match cfg.vqe.shots {
        ShotsMode::Exact => None,
        ShotsMode::PerGroup { shots } => Some(shots),
        ShotsMode::Target { eps } => Some(shot_budget(pauli_count(&hamiltonian), eps)?),
    };
    let plan = if stages.qcm || stages.greens {
        Some(MomentPlan::new(&hamiltonian, 4, cfg.vqe.grouping)?)
    } else {
        None
    };
    let (qcm_shots, greens_shots) = match &plan {
        Some(p) => (moment_shots(cfg.qcm.shots, model.n_bath, p)?, moment_shots(cfg.greens.shots, model.n_bath, p)?),
        None => (None, None),
    };
    Ok(Context { model, hamiltonian, groups, circuit, plan, e_exact, vqe_shots, qcm_shots, greens_shots })
}

/// Executions and shots of one full moment set on a single state.
fn moment_cost(plan: &MomentPlan, shots: Option<&[usize]>) -> (usize, usize) {
    match shots {
        None => (plan.m_max(), 0),
        Some(s) => {
            let g = plan.group_counts();
            (g.iter().sum(), g.iter().zip(s).map(|(g, s)| g * s).sum())
        }
    }
}

fn run_task(
    cfg: &ExperimentConfig,
    stages: Stages,
    ctx: &Context,
    seed: usize,
    repeat: usize,
    input_hash: String,
) -> Result<RunRecord> {
    let n_bath = ctx.model.n_bath;
    let u = ctx.model.hubbard_u;
    let base = [cfg.master_seed, n_bath as u64, u.to_bits(), seed as u64];
    let run_seed = stream_seed(&[base[0], base[1], base[2], base[3], repeat as u64]);
    let x0 = initial_params(ctx.circuit.n_params, stream_seed(&base));
    let mut obj = EnergyObjective::new(&ctx.circuit, &ctx.hamiltonian, &ctx.groups, ctx.vqe_shots, run_seed);
    let vqe = minimize(&cfg.optimizer(), &mut obj, &x0)?;
    let rel = |e: f64| ((e - ctx.e_exact) / ctx.e_exact).abs();
    let state = run_circuit(&ctx.circuit, &vqe.best_params)?;

    let qcm = match (&ctx.plan, stages.qcm) {
        (Some(plan), true) => {
            let shots = ctx.qcm_shots.as_deref();
            let est = moments(&state, plan, shots, stream_seed(&[run_seed, QCM_STREAM]))?;
            let m: Vec<f64> = est.iter().map(|r| r.value).collect();
            let correction = correct(vqe.best_energy, &m)?;
            let (circuit_executions, total_shots) = moment_cost(plan, shots);
            Some(QcmRecord {
                rel_error: correction.e_inf.map(rel),
                correction,
                shots_per_group: ctx.qcm_shots.clone(),
                circuit_executions,
                total_shots,
            })
        }
        _ => None,
    };

    // Ground energy of the continued fractions: corrected when available.
    let e0 = qcm.as_ref().and_then(|q| q.correction.e_inf).unwrap_or(vqe.best_energy);
    let greens = match (&ctx.plan, stages.greens) {
        (Some(plan), true) => {
            let shots = ctx.greens_shots.as_deref();
            let mut branches = Vec::new();
            let (mut execs, mut total) = (0, 0);
            for (i, &spin) in Spin::BOTH.iter().enumerate() {
                for (j, branch) in [Branch::Particle, Branch::Hole].into_iter().enumerate() {
                    let exc: Excitation = match cfg.greens.excitation {
                        ExcitationMethod::Operator => excitation_operator(&state, n_bath, spin, branch)?,
                        ExcitationMethod::Ansatz => {
                            excitation_ansatz(&state, &vqe.best_params, n_bath, spin, branch)?
                        }
                    };
                    if exc.state.is_some() {
                        let (e, t) = moment_cost(plan, shots);
                        execs += e;
                        total += t;
                    }
                    let key = stream_seed(&[run_seed, GREENS_STREAM, i as u64, j as u64]);
                    let mb = branch_coefficients_moments(
                        &exc,
                        plan,
                        shots,
                        key,
                        cfg.greens.depth,
                        cfg.greens.system_size_n,
                        branch,
                        e0,
                    )?;
                    branches.push(BranchRecord { spin, fraction: mb.fraction, fidelity: exc.fidelity, warnings: mb.warnings });
                }
            }
            Some(GreensRecord { excitation: cfg.greens.excitation, branches, circuit_executions: execs, total_shots: total })
        }
        _ => None,
    };

    Ok(RunRecord {
        input_hash,
        n_bath,
        hubbard_u: u,
        seed,
        repeat,
        run_seed,
        n_params: ctx.circuit.n_params,
        n_groups: ctx.groups.len(),
        shots_per_group: ctx.vqe_shots,
        e_exact: ctx.e_exact,
        rel_error: rel(vqe.best_energy),
        vqe,
        qcm,
        greens,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Elementwise mean of continued fractions over the shortest common depth.
pub fn average_fractions(fractions: &[&ContinuedFraction]) -> Option<ContinuedFraction> {
    let first = fractions.first()?;
    let n = fractions.len() as f64;
    let depth = fractions.iter().map(|f| f.depth()).min()?;
    let avg = |get: &dyn Fn(&ContinuedFraction) -> f64| fractions.iter().map(|f| get(f)).sum::<f64>() / n;
    Some(ContinuedFraction {
        a: (0..depth).map(|l| avg(&|f| f.a[l])).collect(),
        b_sq: (0..depth - 1).map(|l| avg(&|f| f.b_sq[l])).collect(),
        branch: first.branch,
        weight: avg(&|f| f.weight),
        e0: avg(&|f| f.e0),
    })
}

/// Per-`U` aggregates of a set of run records.
pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut by_u: BTreeMap<(usize, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_u.entry((r.n_bath, r.hubbard_u.to_bits())).or_default().push(r);
    }
    let mut out: Vec<Aggregate> = by_u
        .into_values()
        .map(|rs| {
            let first = rs[0];
            let f = |g: &dyn Fn(&RunRecord) -> f64| rs.iter().map(|r| g(r)).collect::<Vec<_>>();
            let (mean_rel_error, std_rel_error) = mean_std(&f(&|r| r.rel_error));
            let qcm_errors: Vec<f64> = rs.iter().filter_map(|r| r.qcm.as_ref()?.rel_error).collect();
            let with_qcm = rs.iter().filter(|r| r.qcm.is_some()).count();
            let (mq, sq) = mean_std(&qcm_errors);
            let optional_mean = |v: Vec<f64>| (!v.is_empty()).then(|| mean_std(&v).0);
            let mut averaged_fractions = Vec::new();
            if rs.iter().all(|r| r.greens.is_some()) {
                let n_branches = first.greens.as_ref().map_or(0, |g| g.branches.len());
                for b in 0..n_branches {
                    let fr: Vec<&ContinuedFraction> =
                        rs.iter().map(|r| &r.greens.as_ref().expect("checked").branches[b].fraction).collect();
                    if let Some(avg) = average_fractions(&fr) {
                        averaged_fractions.push((first.greens.as_ref().expect("checked").branches[b].spin, avg));
                    }
                }
            }
            Aggregate {
                n_bath: first.n_bath,
                hubbard_u: first.hubbard_u,
                method: first.vqe.method,
                n_runs: rs.len(),
                e_exact: first.e_exact,
                mean_energy: mean_std(&f(&|r| r.vqe.best_energy)).0,
                mean_rel_error,
                std_rel_error,
                mean_qcm_rel_error: (!qcm_errors.is_empty()).then_some(mq),
                std_qcm_rel_error: (!qcm_errors.is_empty()).then_some(sq),
                qcm_fallbacks: with_qcm - qcm_errors.len(),
                mean_evaluations: mean_std(&f(&|r| r.vqe.n_evaluations as f64)).0,
                mean_circuit_executions: mean_std(&f(&|r| r.vqe.circuit_executions as f64)).0,
                mean_total_shots: mean_std(&f(&|r| r.vqe.total_shots as f64)).0,
                mean_qcm_shots: optional_mean(rs.iter().filter_map(|r| Some(r.qcm.as_ref()?.total_shots as f64)).collect()),
                mean_greens_shots: optional_mean(
                    rs.iter().filter_map(|r| Some(r.greens.as_ref()?.total_shots as f64)).collect(),
                ),
                averaged_fractions,
            }
        })
        .collect();
    out.sort_by(|a, b| (a.n_bath, a.hubbard_u).partial_cmp(&(b.n_bath, b.hubbard_u)).expect("finite U"));
    out
}

fn aggregate_csv(aggs: &[Aggregate]) -> String {
    let mut s = String::from(
        "n_bath,u,method,n_runs,e_exact,mean_energy,mean_rel_error,std_rel_error,mean_qcm_rel_error,std_qcm_rel_error,qcm_fallbacks,mean_evaluations,mean_circuit_executions,mean_total_shots\n",
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
    for a in aggs {
        s += &format!(
            "{},{},{:?},{},{:.10e},{:.10e},{:.10e},{:.10e},{},{},{},{},{},{}\n",
            a.n_bath,
            a.hubbard_u,
            a.method,
            a.n_runs,
            a.e_exact,
            a.mean_energy,
            a.mean_rel_error,
            a.std_rel_error,
            opt(a.mean_qcm_rel_error),
            opt(a.std_qcm_rel_error),
            a.qcm_fallbacks,
            a.mean_evaluations,
            a.mean_circuit_executions,
            a.mean_total_shots
        );
    }
    s.to_lowercase()
}

pub fn dos_csv(curve: &DosCurve) -> String {
    let mut s = String::from("omega,dos\n");
    for (w, d) in curve.omega_grid.iter().zip(&curve.dos_values) {
        s += &format!("{w:.10e},{d:.10e}\n");
    }
    s
}

/// Energy grid used for a model's DOS.
pub fn omega_grid(cfg: &ExperimentConfig, u: f64) -> Vec<f64> {
    match cfg.greens.omega_max {
        Some(w) => linspace(-w, w, cfg.greens.points),
        None => default_omega_grid(u, cfg.model.hybridization, cfg.greens.points),
    }
}

/// DOS of averaged quantum-pipeline fractions.
pub fn quantum_dos(fractions: &[(Spin, ContinuedFraction)], grid: &[f64], eta: f64) -> Result<DosCurve> {
    let mut spins = Vec::new();
    for spin in Spin::BOTH {
        let get = |b: Branch| fractions.iter().find(|(s, f)| *s == spin && f.branch == b).map(|(_, f)| f.clone());
        if let (Some(p), Some(h)) = (get(Branch::Particle), get(Branch::Hole)) {
            spins.push(evaluate_spin(spin, p, h, grid, eta)?);
        }
    }
    Ok(dos(&spins, grid, eta))
}

fn write_dos(
    cfg: &ExperimentConfig,
    dir: &Path,
    method: &str,
    u: f64,
    curve: &DosCurve,
    fractions: Vec<(Spin, ContinuedFraction)>,
) -> Result<()> {
    let stem = format!("nb{}_u{}_{method}", cfg.model.n_bath, u_tag(u));
    if cfg.output.formats.contains(&Format::Csv) {
        write_atomic(&dir.join(format!("{stem}.csv")), dos_csv(curve).as_bytes())?;
    }
    if cfg.output.formats.contains(&Format::Json) {
        let side = DosSidecar {
            method: method.to_string(),
            n_bath: cfg.model.n_bath,
            hubbard_u: u,
            eta: curve.eta,
            integral: curve.integral(),
            peaks: curve.peaks(0.05),
            fractions,
        };
        write_atomic(&dir.join(format!("{stem}.json")), to_json(&side)?.as_bytes())?;
    }
    Ok(())
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Config(e.to_string()))
}

/// Runs the configured protocol and writes the bundle.
pub fn run_experiment(cfg: &ExperimentConfig, stages: Stages, opts: &RunOptions) -> Result<Bundle> {
    cfg.validate()?;
    let dir = opts.out_dir.clone().unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let hash = config_hash(cfg)?;
    let pool = thread_pool()?;

    let contexts: Vec<Context> =
        pool.install(|| cfg.model.u_values.par_iter().map(|&u| context(cfg, stages, u)).collect::<Result<_>>())?;

    let mut tasks = Vec::new();
    if stages.vqe {
        for (ui, &u) in cfg.model.u_values.iter().enumerate() {
            for seed in 0..cfg.n_seeds() {
                for repeat in 0..cfg.n_repeats() {
                    tasks.push((ui, seed, repeat, run_hash(cfg, stages, u, seed, repeat)?));
                }
            }
        }
    }

    let runs_dir = dir.join("runs");
    let outcomes: Vec<(RunRecord, bool)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|(ui, seed, repeat, input_hash)| {
                let ctx = &contexts[*ui];
                let path = runs_dir.join(run_file(ctx.model.n_bath, ctx.model.hubbard_u, *seed, *repeat));
                if opts.resume {
                    if let Some(r) = std::fs::read_to_string(&path)
                        .ok()
                        .and_then(|t| serde_json::from_str::<RunRecord>(&t).ok())
                        .filter(|r| &r.input_hash == input_hash)
                    {
                        return Ok((r, true));
                    }
                }
                let rec = run_task(cfg, stages, ctx, *seed, *repeat, input_hash.clone())?;
                write_atomic(&path, to_json(&rec)?.as_bytes())?;
                Ok((rec, false))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let reused = outcomes.iter().filter(|(_, r)| *r).count();
    let records: Vec<RunRecord> = outcomes.into_iter().map(|(r, _)| r).collect();

    let aggregates = aggregate(&records);
    if stages.vqe {
        if cfg.output.formats.contains(&Format::Json) {
            write_atomic(&dir.join("aggregate.json"), to_json(&aggregates)?.as_bytes())?;
        }
        if cfg.output.formats.contains(&Format::Csv) {
            write_atomic(&dir.join("aggregate.csv"), aggregate_csv(&aggregates).as_bytes())?;
        }
    }

    let dos_dir = dir.join("dos");
    if stages.greens {
        for a in &aggregates {
            if a.averaged_fractions.is_empty() {
                continue;
            }
            let grid = omega_grid(cfg, a.hubbard_u);
            let curve = quantum_dos(&a.averaged_fractions, &grid, cfg.greens.eta)?;
            write_dos(cfg, &dos_dir, "quantum", a.hubbard_u, &curve, a.averaged_fractions.clone())?;
        }
    }
    if stages.exact {
        for ctx in &contexts {
            let u = ctx.model.hubbard_u;
            let grid = omega_grid(cfg, u);
            let g = exact_greens(&ctx.model, &grid, cfg.greens.eta)?;
            let fr = g.spins.iter().flat_map(|s| [(s.spin, s.particle.clone()), (s.spin, s.hole.clone())]).collect();
            write_dos(cfg, &dos_dir, "exact", u, &g.dos, fr)?;
        }
    }

    let manifest = Manifest {
        library_version: VERSION.to_string(),
        config_hash: hash,
        config: cfg.clone(),
        stages,
        runs: tasks
            .iter()
            .map(|(ui, s, r, _)| run_file(cfg.model.n_bath, cfg.model.u_values[*ui], *s, *r))
            .collect(),
        exact_energies: contexts.iter().map(|c| (c.model.hubbard_u, c.e_exact)).collect(),
    };
    write_atomic(&dir.join("manifest.json"), to_json(&manifest)?.as_bytes())?;
    Ok(Bundle { directory: dir, manifest, records, aggregates, reused })
}

/// Run records of a bundle in file-name order: those listed in its manifest,
/// or every file under `dir/runs` when there is no manifest.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let runs = dir.join("runs");
    if !runs.exists() {
        return Ok(vec![]);
    }
    let manifest = dir.join("manifest.json");
    let mut paths: Vec<PathBuf> = if manifest.exists() {
        let t = std::fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
        let m: Manifest = serde_json::from_str(&t).map_err(|e| Error::Serde(format!("{}: {e}", manifest.display())))?;
        m.runs.iter().map(|r| runs.join(r)).collect()
    } else {
        std::fs::read_dir(&runs)
            .map_err(io_err(&runs))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect()
    };
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let t = std::fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&t).map_err(|e| Error::Serde(format!("{}: {e}", p.display())))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub method: Method,
    pub n_bath: usize,
    pub n_runs: usize,
    pub n_groups: usize,
    pub n_params: usize,
    /// `N_group` for COBYLA and `N_group (1 + 2 N_params)` per step for the
    /// gradient methods.
    pub executions_per_evaluation: usize,
    pub mean_evaluations: f64,
    pub mean_circuit_executions: f64,
    pub mean_total_shots: f64,
    pub mean_qcm_executions: Option<f64>,
    pub mean_qcm_shots: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub rows: Vec<CostRow>,
    /// Whether COBYLA has the lowest per-evaluation cost at every bath size
    /// where it ran alongside another method.
    pub cobyla_cheapest: Option<bool>,
}

/// Per-optimizer and per-bath-size measurement costs of a bundle.
pub fn report_costs(records: &[RunRecord]) -> CostTable {
    let mut groups: BTreeMap<(usize, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n_bath, format!("{:?}", r.vqe.method))).or_default().push(r);
    }
    let rows: Vec<CostRow> = groups
        .into_values()
        .map(|rs| {
            let r0 = rs[0];
            let per_eval = if r0.vqe.method.uses_gradient() { r0.n_groups * (1 + 2 * r0.n_params) } else { r0.n_groups };
            let m = |g: &dyn Fn(&RunRecord) -> f64| rs.iter().map(|r| g(r)).sum::<f64>() / rs.len() as f64;
            let qcm: Vec<&QcmRecord> = rs.iter().filter_map(|r| r.qcm.as_ref()).collect();
            let qm = |g: &dyn Fn(&QcmRecord) -> f64| {
                (!qcm.is_empty()).then(|| qcm.iter().map(|q| g(q)).sum::<f64>() / qcm.len() as f64)
            };
            CostRow {
                method: r0.vqe.method,
                n_bath: r0.n_bath,
                n_runs: rs.len(),
                n_groups: r0.n_groups,
                n_params: r0.n_params,
                executions_per_evaluation: per_eval,
                mean_evaluations: m(&|r| r.vqe.n_evaluations as f64),
                mean_circuit_executions: m(&|r| r.vqe.circuit_executions as f64),
                mean_total_shots: m(&|r| r.vqe.total_shots as f64),
                mean_qcm_executions: qm(&|q| q.circuit_executions as f64),
                mean_qcm_shots: qm(&|q| q.total_shots as f64),
            }
        })
        .collect();
    let mut verdicts = Vec::new();
    for nb in rows.iter().map(|r| r.n_bath).collect::<std::collections::BTreeSet<_>>() {
        let at: Vec<&CostRow> = rows.iter().filter(|r| r.n_bath == nb).collect();
        let cobyla = at.iter().find(|r| r.method == Method::Cobyla);
        if let (Some(c), true) = (cobyla, at.len() > 1) {
            verdicts.push(at.iter().all(|r| r.executions_per_evaluation >= c.executions_per_evaluation));
        }
    }
    let cobyla_cheapest = (!verdicts.is_empty()).then(|| verdicts.iter().all(|v| *v));
    CostTable { rows, cobyla_cheapest }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaging_truncates_to_common_depth() {
        let a = ContinuedFraction { a: vec![1.0, 2.0], b_sq: vec![0.5], branch: Branch::Hole, weight: 0.4, e0: -1.0 };
        let b = ContinuedFraction { a: vec![3.0], b_sq: vec![], branch: Branch::Hole, weight: 0.6, e0: -1.0 };
        let avg = average_fractions(&[&a, &b]).unwrap();
        assert_eq!(avg.a, vec![2.0]);
        assert!(avg.b_sq.is_empty());
        assert!((avg.weight - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_bundle_has_empty_cost_table() {
        let t = report_costs(&[]);
        assert!(t.rows.is_empty());
        assert_eq!(t.cobyla_cheapest, None);
    }

    #[test]
    fn u_tags_are_file_safe() {
        assert_eq!(u_tag(2.0), "2");
        assert_eq!(u_tag(2.5), "2p5");
    }
}
