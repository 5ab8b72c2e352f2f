use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ Args, Parser, Subcommand };

use qprobe_cli::commands;
use qprobe_cli::config::RunConfig;
use qprobe_cli::manifest::ResultManifest;

/// Qubit probes of Ohmic baths: correlation functions, QFI maps and series,
/// chain coefficients, TCL2 and TEBD trajectories.
#[derive(Parser)]
#[command(name = "qprobe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a configuration entry, e.g. `--set backend.order=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> { RunConfig::load(&self.config, &self.overrides) }
}

#[derive(Subcommand)]
enum Command {
    /// Bath correlation function C(t) and the moments ζ(0..3).
    Correlation(ConfigArgs),
    /// Q and R over the (θ, α) grid at the final time.
    QfiMap(ConfigArgs),
    /// Q(η, t) and q = Q/t for every (ω_S, θ, α).
    QfiSeries(ConfigArgs),
    /// Chain coefficients of the thermalized bath, through the cache.
    Chain {
        #[command(flatten)]
        args: ConfigArgs,
        /// Also run the Legendre recurrence check.
        #[arg(long)]
        legendre_check: bool,
    },
    /// TCL2 trajectories.
    TclEvolve(ConfigArgs),
    /// TEBD trajectories with convergence sidecars.
    TebdEvolve(ConfigArgs),
    /// Quick oracle checks.
    SelfTest,
}

fn report(manifest: &ResultManifest) -> ExitCode {
    let dir = manifest.config.output.join(&manifest.command);
    println!("{}: {} files in {} (config {})", manifest.command, manifest.files.len(), dir.display(), &manifest.config_hash[..12]);
    if manifest.flags.is_empty() {
        return ExitCode::SUCCESS;
    }
    for flag in &manifest.flags {
        eprintln!("warning: {flag}");
    }
    ExitCode::from(2)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let manifest = match cli.command {
        Command::Correlation(a) => commands::correlation(&a.load()?)?,
        Command::QfiMap(a) => commands::qfi_map(&a.load()?)?,
        Command::QfiSeries(a) => commands::qfi_series(&a.load()?)?,
        Command::Chain { args, legendre_check } => commands::chain(&args.load()?, legendre_check)?,
        Command::TclEvolve(a) => commands::tcl_evolve(&a.load()?)?,
        Command::TebdEvolve(a) => commands::tebd_evolve(&a.load()?)?,
        Command::SelfTest => {
            let mut failed = 0;
            for (name, pass, detail) in commands::self_test()? {
                println!("{}: {name} ({detail})", if pass { "PASS" } else { "FAIL" });
                failed += usize::from(!pass);
            }
            return Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    };
    Ok(report(&manifest))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
