//! `bqms`: scenario runner for bimodule quantum Markov semigroup analysis.
//!
//! Subcommands:
//!   bqms run <scenario.json> [--out DIR] [--tol KEY=VAL]... [--seed N]
//!   bqms verify-paper [--out DIR] [--write-golden]
//!
//! Exit codes: 0 success, 1 input error, 2 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod report;
mod runner;
mod scenario;

use scenario::Scenario;

#[derive(Parser)]
#[command(name = "bqms", about = "bimodule quantum Markov semigroup scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report (and CSV for flows).
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "bqms-out")]
        out: PathBuf,
        /// Tolerance overrides, e.g. --tol eq=1e-8 --tol scale=10
        #[arg(long = "tol")]
        tol: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in suite of exactly-printed instances against the
    /// golden report.
    VerifyPaper {
        #[arg(long, default_value = "bqms-out")]
        out: PathBuf,
        /// Rewrite the golden report instead of comparing against it.
        #[arg(long, hide = true)]
        write_golden: bool,
    },
}

const GOLDEN: &str = include_str!("../golden/verify_paper.json");

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out, tol, seed } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|e| format!("cannot read {}: {e}", scenario.display()))?;
            let mut sc: Scenario = match serde_json::from_str(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("parse error at line {}, column {}: {e}", e.line(), e.column());
                    return Ok(ExitCode::from(1));
                }
            };
            for t in &tol {
                apply_tol_override(&mut sc, t)?;
            }
            if let Some(s) = seed {
                sc.seed = s;
            }
            let name = scenario
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "scenario".to_string());
            let outcome = match runner::run(&sc, &name) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("input error: {e}");
                    return Ok(ExitCode::from(1));
                }
            };
            std::fs::create_dir_all(&out)?;
            let report_path = out.join(format!("{name}.json"));
            std::fs::write(&report_path, outcome.report.to_json())?;
            println!("report: {}", report_path.display());
            if let Some(csv) = outcome.csv {
                let csv_path = out.join(format!("{name}.csv"));
                std::fs::write(&csv_path, csv)?;
                println!("series: {}", csv_path.display());
            }
            for c in &outcome.report.checks {
                println!(
                    "[{}] {} residual {:.3e} (tol {:.1e})",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.residual,
                    c.tolerance
                );
            }
            Ok(if outcome.report.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::VerifyPaper { out, write_golden } => {
            let report = match runner::verify_paper(7) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("input error: {e}");
                    return Ok(ExitCode::from(1));
                }
            };
            std::fs::create_dir_all(&out)?;
            let path = out.join("verify_paper.json");
            let text = report.to_json();
            std::fs::write(&path, &text)?;
            for c in &report.checks {
                println!(
                    "[{}] {} residual {:.3e} (tol {:.1e}){}",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.residual,
                    c.tolerance,
                    c.detail.as_deref().map(|d| format!(" — {d}")).unwrap_or_default()
                );
            }
            if write_golden {
                let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden/verify_paper.json");
                std::fs::write(&golden_path, &text)?;
                println!("golden rewritten: {}", golden_path.display());
                return Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(2) });
            }
            let golden_ok = report::equal_modulo_timestamp(&text, GOLDEN);
            if !golden_ok {
                eprintln!("report deviates from the golden copy");
            }
            println!("report: {}", path.display());
            Ok(if report.pass && golden_ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn apply_tol_override(sc: &mut Scenario, kv: &str) -> Result<(), Box<dyn std::error::Error>> {
    let (k, v) = kv.split_once('=').ok_or("tolerance override must be KEY=VALUE")?;
    let val: f64 = v.parse()?;
    match k {
        "herm" => sc.tolerances.herm = Some(val),
        "eig_floor" => sc.tolerances.eig_floor = Some(val),
        "eq" => sc.tolerances.eq = Some(val),
        "scale" => sc.tolerances.scale = Some(val),
        other => return Err(format!("unknown tolerance key {other}").into()),
    }
    Ok(())
}
