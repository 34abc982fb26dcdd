use clap::{Parser, Subcommand};
use jetcartan::scenario::Scenario;
use jetcartan::suite::{parse_suite, run_suite, Family, Report, SuiteConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "jetcartan", version, about = "Verify frame-bundle and Palatini identities numerically")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run identity checks and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(clap::Args)]
struct VerifyArgs {
    /// Check family: algebra, frame, basis, palatini, unimodular or all.
    #[arg(long, required = true, value_parser = ["algebra", "frame", "basis", "palatini", "unimodular", "all"])]
    suite: Vec<String>,
    /// Scenario file; may be repeated. Built-in fixtures are used when absent.
    #[arg(long)]
    scenario: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Override the per-check tolerances of ordinary checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn summary(report: &Report) {
    for c in &report.checks {
        let mark = if c.pass { "pass" } else { "FAIL" };
        eprintln!("{mark}  {:<60} {:>10.3e} / {:.0e}", c.name, c.max_residual, c.tolerance);
        if let Some(note) = &c.note {
            eprintln!("      {note}");
        }
    }
    let failed = report.checks.iter().filter(|c| !c.pass).count();
    eprintln!("{} checks, {} failed", report.checks.len(), failed);
}

fn verify(args: VerifyArgs) -> Result<bool, String> {
    let mut families: Vec<Family> = Vec::new();
    for s in &args.suite {
        families.extend(parse_suite(s)?);
    }
    families.sort();
    families.dedup();
    if families.is_empty() {
        return Err("--suite is required".into());
    }
    let scenarios = args
        .scenario
        .iter()
        .map(|p| Scenario::load(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = SuiteConfig {
        families,
        dim: args.dim,
        samples: args.samples,
        seed: args.seed,
        tol: args.tol,
        scenarios,
    };
    let report = run_suite(&cfg)?;
    summary(&report);
    let json = report.to_json();
    match &args.report {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| format!("{}: {e}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify(args) => match verify(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
