//! `dobscope`: frequency responses, Bode integrals, root loci, stability maps
//! and time-domain simulation of disturbance-observer motion control loops.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{execute, Command};
use config::{load, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "dobscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// INI config, or a CSV/JSON file emitted earlier (its header is replayed).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Override one setting; repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Sensitivity and complementary sensitivity over frequency.
    Freq,
    /// Numerical Bode sensitivity integral against its closed form.
    Bode,
    /// Closed-loop poles over a g_dob grid and the critical bandwidth.
    Rootlocus,
    /// Fixed-step simulation of the digital position loop.
    Simulate,
    /// Stability margin over an (alpha, g_dob, t_s) grid.
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Freq => Command::Freq,
            Cmd::Bode => Command::Bode,
            Cmd::Rootlocus => Command::Rootlocus,
            Cmd::Simulate => Command::Simulate,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

fn resolve(cli: &Cli, command: Command) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::io(path.display().to_string(), e))?;
            let loaded = load(&text)?;
            if let Some(c) = loaded.command.filter(|c| c != command.name()) {
                if !cli.quiet {
                    eprintln!(
                        "note: {} was emitted by '{c}', running '{}'",
                        path.display(),
                        command.name()
                    );
                }
            }
            loaded.config
        }
    };
    for s in &cli.set {
        cfg.apply_override(s)?;
    }
    Ok(cfg)
}

fn write_all(dir: &Path, files: &[commands::OutputFile]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display().to_string(), e))?;
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
    }
    Ok(())
}

fn main_inner(cli: &Cli) -> Result<bool, CliError> {
    let command = Command::from(cli.command);
    let cfg = resolve(cli, command)?;
    let outcome = execute(command, &cfg)?;
    write_all(&cli.out, &outcome.files)?;
    if !cli.quiet {
        for f in &outcome.files {
            println!("wrote {}", cli.out.join(&f.name).display());
        }
        for w in &outcome.warnings {
            eprintln!("warning: {w}");
        }
    }
    for f in &outcome.failures {
        eprintln!("error: {f}");
    }
    Ok(outcome.failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("dobscope: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
