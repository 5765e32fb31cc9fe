use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ricci_lab::replay::replay;
use ricci_lab::{emit_plotdata, LabResult, PlotKind, ReplayOutcome, Scenario};

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Run, replay and plot Ricci flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario into a fresh timestamped directory.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Override the s grid size.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-execute a run and compare output hashes. Exits 1 unless identical.
    Replay { dir: PathBuf },
    /// Emit long-format plot data (series,x,y).
    Plotdata {
        dir: PathBuf,
        #[arg(long)]
        kind: String,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn print_json(v: serde_json::Value) {
    println!("{v}");
}

fn execute(cli: Cli) -> LabResult<ExitCode> {
    match cli.command {
        Command::Run { scenario, out, grid, seed } => {
            let s = Scenario::from_file(&scenario)?.with_overrides(grid, seed)?;
            let run = ricci_lab::run(&s, &out)?;
            print_json(json!({
                "event": "run",
                "dir": run.dir.display().to_string(),
                "all_checks_pass": run.manifest.all_checks_pass,
                "checks": run.manifest.checks,
            }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { dir } => {
            let report = replay(&dir)?;
            let (status, detail) = match &report.outcome {
                ReplayOutcome::Identical => ("identical", json!(null)),
                ReplayOutcome::Mismatch { files } => ("mismatch", json!(files)),
                ReplayOutcome::DifferentScenario { fresh_run } => {
                    ("different scenario", json!(fresh_run.display().to_string()))
                }
            };
            print_json(json!({"event": "replay", "dir": dir.display().to_string(), "result": status, "detail": detail}));
            Ok(if report.identical() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Plotdata { dir, kind, output } => {
            let kind: PlotKind = kind.parse()?;
            match output {
                Some(p) => emit_plotdata(&dir, kind, std::fs::File::create(p)?)?,
                None => emit_plotdata(&dir, kind, std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        // A closed pipe (`plotdata ... | head`) is not an error.
        Err(ricci_lab::LabError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let line = json!({"event": "error", "class": e.class(), "message": e.to_string()});
            let _ = writeln!(std::io::stderr(), "{line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
