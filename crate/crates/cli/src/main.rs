use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ra_mec::harness::{
    feasibility_precheck, fmt_float, generate_scenario, render_sweep_csv, run_experiment, run_trial, threads_from_env,
    write_run_json, write_sweep_csv, write_trace_csv, write_trials_csv, ExperimentConfig, RunDocument, SweepRow,
    TraceRow, TrialRecord,
};
use ra_mec::saho::{solve_static, SolveMode};

#[derive(Parser, Debug)]
#[command(
    name = "ra-mec",
    version,
    about = "Rotatable-antenna MEC optimization and Monte Carlo harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario in one or all modes.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::All)]
        mode: ModeArg,
        /// Scenario seed (used directly, not mixed with the master seed).
        #[arg(long)]
        seed: u64,
        /// Directory for trials.csv and run.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every configured mode over the seed set and sweep values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Directory for sweep.csv, trials.csv and run.json. Without it the
        /// table is printed as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-iteration objective of the static branch for one seed.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config file and pre-check feasibility on its first seed.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Dynamic,
    Static,
    Fixed,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<SolveMode> {
        match self {
            ModeArg::Dynamic => vec![SolveMode::Dynamic],
            ModeArg::Static => vec![SolveMode::Static],
            ModeArg::Fixed => vec![SolveMode::Fixed],
            ModeArg::All => SolveMode::ALL.to_vec(),
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::load(path)?)
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn print_records(records: &[TrialRecord]) {
    println!(
        "{:<8} {:>22} {:>6} {:>10} {:>12}",
        "mode", "objective_bits", "iters", "converged", "residual"
    );
    for r in records {
        if r.ok {
            println!(
                "{:<8} {:>22} {:>6} {:>10} {:>12.3e}",
                r.mode,
                fmt_float(r.objective_bits),
                r.outer_iterations,
                r.converged,
                r.max_residual
            );
        } else {
            println!(
                "{:<8} failed: {}",
                r.mode,
                r.error.as_deref().unwrap_or("unknown error")
            );
        }
    }
}

fn cmd_solve(config: &Path, mode: ModeArg, seed: u64, out: Option<&Path>) -> Result<bool> {
    let cfg = load(config)?;
    let (scenario, channels) = generate_scenario(&cfg, seed)?;
    let settings = cfg.ao_settings();
    let records: Vec<TrialRecord> = mode
        .modes()
        .into_iter()
        .map(|m| run_trial(&scenario, &channels, m, &settings))
        .collect();
    print_records(&records);
    if let Some(dir) = out {
        prepare_out(dir)?;
        write_trials_csv(&dir.join("trials.csv"), &records)?;
        let mut doc = RunDocument::new("solve", &cfg, vec![seed]);
        doc.records = records.clone();
        doc.channels = Some(channels.dump());
        write_run_json(&dir.join("run.json"), &doc)?;
    }
    Ok(records.iter().all(|r| r.ok))
}

fn cmd_sweep(config: &Path, out: Option<&Path>) -> Result<bool> {
    let cfg = load(config)?;
    let threads = threads_from_env()?;
    let outcome = run_experiment(&cfg, threads)?;
    match out {
        Some(dir) => {
            prepare_out(dir)?;
            write_sweep_csv(&dir.join("sweep.csv"), &outcome.table)?;
            write_trials_csv(&dir.join("trials.csv"), &outcome.records)?;
            let mut doc = RunDocument::new("sweep", &cfg, outcome.seeds.clone());
            doc.records = outcome.records.clone();
            doc.table = outcome.table.clone();
            write_run_json(&dir.join("run.json"), &doc)?;
            for row in &outcome.table {
                println!(
                    "{:<8} {:>24} mean {} over {} trials{}",
                    row.mode,
                    row.value.map(fmt_float).unwrap_or_default(),
                    fmt_float(row.mean_objective_bits),
                    row.trials,
                    if row.complete() {
                        String::new()
                    } else {
                        format!(" ({} failed)", row.failed)
                    }
                );
            }
        }
        None => print!("{}", render_sweep_csv(&outcome.table)),
    }
    Ok(outcome.table.iter().all(SweepRow::complete))
}

fn cmd_convergence(config: &Path, seed: u64, out: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let (scenario, channels) = generate_scenario(&cfg, seed)?;
    let sol = solve_static(&scenario, &channels, &cfg.ao_settings())?;
    let rows = TraceRow::from_traces(&sol.report.objective_trace, &sol.report.raw_trace);
    prepare_out(out)?;
    write_trace_csv(&out.join("trace.csv"), &rows)?;
    let mut doc = RunDocument::new("convergence", &cfg, vec![seed]);
    let converged = sol.report.converged;
    doc.records = vec![TrialRecord::from_solution(&scenario, sol)];
    doc.trace = rows.clone();
    write_run_json(&out.join("run.json"), &doc)?;
    for r in &rows {
        println!("{:>3} {}", r.iteration, fmt_float(r.objective_bits));
    }
    Ok(converged)
}

fn cmd_validate(config: &Path) -> Result<bool> {
    let cfg = load(config)?;
    let ch = cfg.channel_params()?;
    println!("config ok: {}", config.display());
    println!(
        "  K = {} ({}x{}), M = {}, p = {}, theta_max = {} deg",
        cfg.array.kx * cfg.array.ky,
        cfg.array.kx,
        cfg.array.ky,
        cfg.users.count,
        ch.directivity,
        cfg.array.theta_max_deg
    );
    println!(
        "  wavelength = {} m, G0 = {}, A0 = {:.2} dB, noise = {:.3e} W",
        ch.wavelength,
        ch.g0,
        10.0 * ch.ref_gain.log10(),
        ch.noise_power
    );
    let problems = feasibility_precheck(&cfg)?;
    for p in &problems {
        println!("  infeasible: {p}");
    }
    Ok(problems.is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve {
            config,
            mode,
            seed,
            out,
        } => cmd_solve(&config, mode, seed, out.as_deref()),
        Command::Sweep { config, out } => cmd_sweep(&config, out.as_deref()),
        Command::Convergence { config, seed, out } => cmd_convergence(&config, seed, &out),
        Command::Validate { config } => cmd_validate(&config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
