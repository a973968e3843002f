use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use abem_core::adaptive::{read_trace_csv, verify_assumptions, VerifyTolerances};
use abem_core::oracle::oracle_suite;
use abemlab::{run_experiment, write_artifacts, ExperimentConfig, EXIT_VIOLATION};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "abemlab",
    version,
    about = "Adaptive boundary element experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Re-check the A1/A2 flags of a trace.
    Verify { trace: PathBuf },
    /// Compare closed-form kernel integrals against adaptive quadrature.
    Oracle {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn run(config: PathBuf) -> ExitCode {
    let cfg = match ExperimentConfig::from_path(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("abemlab: {e}");
            return code(1);
        }
    };
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("abemlab: {e}");
            return code(e.exit_code());
        }
    };
    if let Err(e) = write_artifacts(&cfg.outputs, &outcome) {
        eprintln!("abemlab: {e}");
        return code(e.exit_code());
    }
    let last = outcome.adaptive.final_record();
    println!(
        "{} levels, {} dofs, mu {:.4e} (initial {:.4e})",
        outcome.adaptive.records.len(),
        last.dofs,
        last.mu,
        outcome.adaptive.records[0].mu
    );
    if let Some(s) = outcome.adaptive_slope() {
        println!("adaptive slope {s:.3}");
    }
    if let Some(s) = outcome.uniform_slope() {
        println!("uniform slope {s:.3}");
    }
    println!("artifacts in {}", cfg.outputs.display());
    code(0)
}

fn verify(trace: PathBuf) -> ExitCode {
    let rows = match File::open(&trace)
        .map_err(|e| e.to_string())
        .and_then(|f| read_trace_csv(f).map_err(|e| e.to_string()))
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("abemlab: cannot read {}: {e}", trace.display());
            return code(1);
        }
    };
    let report = match verify_assumptions(&rows, &VerifyTolerances::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("abemlab: {e}");
            return code(1);
        }
    };
    println!(
        "A1: level-0 ratio {:.4e}, max after burn-in {:.4e} [{}]",
        report.a1_level0,
        report.a1_max,
        if report.a1_bounded { "ok" } else { "violated" }
    );
    println!(
        "A2: median c {:.4e}, last-steps max {:.4e} [{}]",
        report.a2_median,
        report.a2_tail_max,
        if report.a2_bounded { "ok" } else { "violated" }
    );
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    if report.passed() {
        code(0)
    } else {
        code(EXIT_VIOLATION)
    }
}

fn oracle(pairs: usize, seed: u64, tolerance: f64) -> ExitCode {
    let checks = oracle_suite(pairs, seed);
    let mut failed = 0;
    let mut worst: f64 = 0.0;
    for c in &checks {
        let e = c.relative_error();
        worst = worst.max(e);
        if !(e <= tolerance) {
            failed += 1;
            eprintln!(
                "mismatch: {} computed {:e} oracle {:e} (relative {e:.2e})",
                c.name, c.computed, c.oracle
            );
        }
    }
    println!(
        "{} checks, worst relative error {worst:.2e}, {failed} above {tolerance:e}",
        checks.len()
    );
    if failed == 0 {
        code(0)
    } else {
        code(2)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config } => run(config),
        Command::Verify { trace } => verify(trace),
        Command::Oracle {
            pairs,
            seed,
            tolerance,
        } => oracle(pairs, seed, tolerance),
    }
}
