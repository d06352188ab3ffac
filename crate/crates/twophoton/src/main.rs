use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twophoton::conf::parse_scan_parameter;
use twophoton::{run, CliError, Command, RunOptions};

#[derive(Parser)]
#[command(name = "twophoton", version, about = "Simulate an SLM-programmed two-photon entanglement source")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; required by every command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Points per calibration scan.
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Acquisition windows in seconds: one value, or scan=S,tomo=T.
    #[arg(long, global = true)]
    windows: Option<String>,
    /// Momentum sector layout NxM.
    #[arg(long, global = true)]
    sectors: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize the purification mask, emit scans and the visibility ladder.
    Purify,
    /// One calibration scan: b1, b2 or a_pair.
    Scan { parameter: Option<String> },
    /// Synthesize a sector-programmed cluster state and its slit tomography.
    Cluster,
    /// Polarization tomography, simulated or from a counts CSV.
    Tomo { counts: Option<PathBuf> },
    /// Regenerate a tomography report from a counts CSV.
    Report { counts: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = match cli.command {
        Cmd::Purify => Command::Purify,
        Cmd::Scan { parameter } => match parameter.as_deref().map(|p| parse_scan_parameter(p).ok_or(p)) {
            None => Command::Scan { parameter: None },
            Some(Ok(p)) => Command::Scan { parameter: Some(p) },
            Some(Err(p)) => return fail(CliError::Config(format!("unknown scan parameter '{p}'"))),
        },
        Cmd::Cluster => Command::Cluster,
        Cmd::Tomo { counts } => Command::Tomo { counts },
        Cmd::Report { counts } => Command::Report { counts },
    };
    let opts = RunOptions {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        steps: cli.steps,
        windows: cli.windows,
        sectors: cli.sectors,
    };
    match run(&command, &opts) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", out.dir.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("twophoton: {e}");
    ExitCode::from(e.exit_code() as u8)
}
