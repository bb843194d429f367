use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use tikhlav_cli::{
    preset_names, run, CliError, Command, RunOptions, RunReport, Source, EXIT_CHECK_FAILED,
};

#[derive(Parser)]
#[command(
    name = "tikhlav",
    version,
    about = "Tikhonov-Lavrentiev regularization with control and state constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one regularized problem
    Solve(Common),
    /// Run the configured experiments and check their bounds
    Verify(Common),
    /// Build a manufactured instance and report its margins
    Manufacture(Common),
    /// List the bundled configurations
    Presets,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// bundled configuration by name
    #[arg(long)]
    preset: Option<String>,
    /// output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// solver tolerance [default: 1e-8]
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn options(self) -> RunOptions {
        let source = match (self.config, self.preset) {
            (Some(p), _) => Source::File(p),
            (None, Some(name)) => Source::Preset(name),
            (None, None) => unreachable!("clap requires one source"),
        };
        RunOptions {
            source,
            out: self.out,
            tol: self.tol,
            seed: self.seed,
        }
    }
}

fn print_report(report: &RunReport) -> anyhow::Result<()> {
    if let Some(d) = &report.details {
        println!(
            "{}",
            serde_json::to_string_pretty(d).context("formatting details")?
        );
    }
    for c in &report.checks {
        println!(
            "[{}] {} {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Manufacture(c) => (Command::Manufacture, c),
        Cmd::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
            return Ok(ExitCode::SUCCESS);
        }
    };
    match run(command, &common.options()) {
        Ok(report) => {
            print_report(&report)?;
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} check(s) failed", report.failed().count());
                Ok(ExitCode::from(EXIT_CHECK_FAILED as u8))
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> ExitCode {
    ExitCode::from(e.exit_code() as u8)
}
