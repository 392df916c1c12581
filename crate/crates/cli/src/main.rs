use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aimsolve::config::ExperimentConfig;
use aimsolve::experiment::{self, load_records, report_costs, run_experiment, RunOptions, Stages};
use aimsolve::hamiltonian::build_qubit_hamiltonian;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aimsolve", version, about = "Anderson impurity model solver: VQE, moment corrections and Green's functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Reuse run records whose inputs are unchanged.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration file and print the resolved settings.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// VQE ensembles only.
    Vqe(Common),
    /// VQE ensembles with moment corrections.
    Qcm(Common),
    /// VQE ensembles with Green's functions from the quantum pipeline.
    Greens(Common),
    /// Exact-diagonalization Green's functions only.
    Exact(Common),
    /// Full pipeline as enabled in the configuration.
    Run(Common),
    /// Measurement-cost table of an existing bundle.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the qubit Hamiltonian in the Pauli-sum text format.
    Hamiltonian {
        #[arg(long)]
        config: PathBuf,
        /// Interaction strength; the first configured value when absent.
        #[arg(long)]
        u: Option<f64>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn run_stages(c: &Common, pick: impl Fn(&ExperimentConfig) -> Stages) -> Result<(), Failure> {
    let cfg = load(&c.config, c.seed)?;
    let opts = RunOptions { out_dir: c.out.clone(), resume: c.resume };
    let b = run_experiment(&cfg, pick(&cfg), &opts).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("wrote {} ({} runs, {} reused)", b.directory.display(), b.records.len(), b.reused);
    for a in &b.aggregates {
        let qcm = a.mean_qcm_rel_error.map(|e| format!(" qcm {e:.4e}")).unwrap_or_default();
        println!(
            "n_bath {} U {} method {:?}: runs {} rel_error {:.4e} +- {:.2e}{qcm} executions {:.0}",
            a.n_bath, a.hubbard_u, a.method, a.n_runs, a.mean_rel_error, a.std_rel_error, a.mean_circuit_executions
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config, None)?;
            println!("ok: n_bath {} U {:?} seeds {} repeats {}", cfg.model.n_bath, cfg.model.u_values, cfg.n_seeds(), cfg.n_repeats());
            Ok(())
        }
        Command::Vqe(c) => run_stages(&c, |_| Stages::vqe_only()),
        Command::Qcm(c) => run_stages(&c, |_| Stages { qcm: true, ..Stages::vqe_only() }),
        Command::Greens(c) => run_stages(&c, |_| Stages { greens: true, exact: true, ..Stages::vqe_only() }),
        Command::Exact(c) => run_stages(&c, |_| Stages::exact_only()),
        Command::Run(c) => run_stages(&c, Stages::from_config),
        Command::Report { out } => {
            let records = load_records(&out).map_err(|e| Failure::Runtime(e.to_string()))?;
            let table = report_costs(&records);
            for r in &table.rows {
                println!(
                    "{:?} n_bath {}: runs {} per-evaluation executions {} mean executions {:.1} mean shots {:.1}{}",
                    r.method,
                    r.n_bath,
                    r.n_runs,
                    r.executions_per_evaluation,
                    r.mean_circuit_executions,
                    r.mean_total_shots,
                    r.mean_qcm_shots.map(|s| format!(" qcm shots {s:.1}")).unwrap_or_default()
                );
            }
            if let Some(ok) = table.cobyla_cheapest {
                println!("cobyla lowest per-evaluation cost: {ok}");
            }
            if out.exists() {
                let json = serde_json::to_string_pretty(&table).map_err(|e| Failure::Runtime(e.to_string()))?;
                experiment::write_atomic(&out.join("costs.json"), json.as_bytes())
                    .map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            Ok(())
        }
        Command::Hamiltonian { config, u } => {
            let cfg = load(&config, None)?;
            let u = u.unwrap_or(cfg.model.u_values[0]);
            let model = cfg.model_for(u).map_err(|e| Failure::Invalid(e.to_string()))?;
            let h = build_qubit_hamiltonian(&model).map_err(|e| Failure::Runtime(e.to_string()))?;
            print!("{}", h.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("invalid configuration: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
