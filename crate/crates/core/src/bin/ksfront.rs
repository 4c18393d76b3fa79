//! Command-line front end. Exit status: 0 when every requested assertion passes,
//! 1 when a run completes with a failed assertion, 2 on configuration or runtime errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ksfront::config::{parse_config_as, ScenarioKind};
use ksfront::runner::{run_and_write, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "ksfront", version, about = "Spreading speeds and traveling waves for 1D Keller-Segel with logistic source")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML sections [model] [grid] [solver] [initial] [analysis] [output]).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides output.dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Repeat at h/2 and report the changes.
    #[arg(long, global = true)]
    refine: bool,

    /// Worker threads for sweeps and speed scans.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Time-integrate and record the trajectory with invariant monitors.
    Simulate,
    /// Simulate and estimate front speeds, spreading interval and shape convergence.
    Speed,
    /// Construct a traveling-wave profile or scan wave speeds.
    Wave,
    /// Repeat a scenario over a list of parameter values.
    Sweep,
    /// Compare the fast chemical solver with the direct oracle on random data.
    KernelSelftest,
}

impl Command {
    fn kind(self) -> ScenarioKind {
        match self {
            Command::Simulate => ScenarioKind::Simulate,
            Command::Speed => ScenarioKind::Speed,
            Command::Wave => ScenarioKind::Wave,
            Command::Sweep => ScenarioKind::Sweep,
            Command::KernelSelftest => ScenarioKind::KernelSelftest,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<bool, String> {
    let path = cli.config.as_ref().ok_or("--config <PATH> is required")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg = parse_config_as(&text, Some(cli.command.kind())).map_err(|e| format!("{}: {e}", path.display()))?;
    let opts = RunOptions { out_dir: cli.out.clone(), refine: cli.refine, jobs: cli.jobs };
    let (report, files) = run_and_write(&cfg, &opts).map_err(|e| e.to_string())?;

    let rendered = report.render();
    let summary: String = rendered.split("\n[config]").next().unwrap_or_default().to_string();
    println!("{}", summary.trim_end());
    println!("\nwall-clock: {:.3} s", report.wall_clock.as_secs_f64());
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(report.passed())
}
