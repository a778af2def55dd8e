use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stosszahl::config::{AuditParams, ScenarioConfig};
use stosszahl::{resolve_output_dir, run_scenario, RunError, RunReport, OUTPUT_DIR_ENV, SCENARIOS};

#[derive(Parser)]
#[command(name = "stosszahl", version, about = "Run entropy and master-equation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; beats STOSSZAHL_OUTPUT_DIR and the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Omit the timestamp comment line so reruns are byte-identical.
        #[arg(long)]
        no_header_timestamp: bool,
    },
    /// Audit a transaction ledger CSV.
    Audit {
        #[arg(long)]
        ledger: PathBuf,
        /// Replay from the standard initial layout of this many molecules.
        #[arg(long, requires = "excited")]
        molecules: Option<usize>,
        #[arg(long, requires = "molecules")]
        excited: Option<usize>,
        /// Also write audit_violations.csv and report.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List registered scenarios and their checks.
    ListScenarios,
}

fn print_report(report: &RunReport) {
    for check in &report.checks {
        println!("{}", check.line());
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!("{verdict} {} (seed {})", report.scenario, report.seed);
}

fn execute(cli: Cli) -> Result<bool, RunError> {
    match cli.command {
        Command::Run { config, seed, out, no_header_timestamp } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let env = std::env::var(OUTPUT_DIR_ENV).ok();
            let dir = resolve_output_dir(out.as_deref(), env.as_deref(), cfg.output_dir.as_deref());
            let stamp = (!no_header_timestamp).then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
            let report = run_scenario(&cfg, &dir, stamp.as_deref())?;
            print_report(&report);
            println!("outputs in {}", dir.display());
            Ok(report.passed())
        }
        Command::Audit { ledger, molecules, excited, out } => {
            let mut cfg = ScenarioConfig::for_scenario("ledger-audit", 0);
            cfg.ledger_audit = Some(AuditParams { ledger, molecules, initially_excited: excited });
            let (dir, keep) = match out {
                Some(d) => (d, true),
                None => (std::env::temp_dir().join(format!("stosszahl-audit-{}", std::process::id())), false),
            };
            let result = run_scenario(&cfg, &dir, None);
            if !keep {
                let _ = std::fs::remove_dir_all(&dir);
            }
            let report = result?;
            print_report(&report);
            Ok(report.passed())
        }
        Command::ListScenarios => {
            for s in SCENARIOS {
                println!("{:<22} {}", s.name, s.summary);
                println!("{:<22} checks: {}", "", s.checks.join(", "));
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
