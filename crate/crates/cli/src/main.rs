mod config;
mod error;
mod output;
mod presets;
mod run;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};
use crate::output::{Format, Invocation, Manifest, OutputDir};
use crate::presets::{Preset, DEFAULT_SEED};
use crate::run::RunOutput;

/// Simulate and analyze Bayesian adaptation on networks with strong and weak links.
#[derive(Debug, Parser)]
#[command(name = "weaklink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "WEAKLINK_OUT", default_value = "weaklink-out")]
    out: PathBuf,
    /// Also write the event trace and cascade log (simulate only).
    #[arg(long, global = true)]
    trace: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Result encoding.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// Experiment file (TOML, or JSON by extension).
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo welfare of one network.
    Simulate(ConfigArg),
    /// Exact welfare from the activation chain.
    Exact(ConfigArg),
    /// Closed-form bounds for one network.
    Bounds(ConfigArg),
    /// Rank several networks under the same rates.
    Compare(ConfigArg),
    /// Welfare along a rate axis or the star scaling grid.
    Sweep(ConfigArg),
    /// Run whatever `mode` the file declares.
    Run(ConfigArg),
    /// Run a built-in experiment.
    Preset {
        #[arg(value_enum)]
        name: Preset,
    },
    /// Rerun from a manifest and check the outputs are identical.
    Replay {
        manifest: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: cannot size worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => from_config(cli, &a.config, Some(Mode::Simulate)),
        Command::Exact(a) => from_config(cli, &a.config, Some(Mode::Exact)),
        Command::Bounds(a) => from_config(cli, &a.config, Some(Mode::Bounds)),
        Command::Compare(a) => from_config(cli, &a.config, Some(Mode::Compare)),
        Command::Sweep(a) => from_config(cli, &a.config, Some(Mode::Sweep)),
        Command::Run(a) => from_config(cli, &a.config, None),
        Command::Preset { name } => {
            let seed = cli.seed.unwrap_or(DEFAULT_SEED);
            let format = cli.format.unwrap_or(name.default_format());
            execute(&cli.out, Invocation::Preset { name: *name }, seed, format, false).map(|_| ())
        }
        Command::Replay { manifest } => replay(cli, manifest),
    }
}

fn from_config(cli: &Cli, path: &Path, requested: Option<Mode>) -> CliResult<()> {
    let mut config = ExperimentConfig::load(path)?;
    let mode = config.resolve_mode(requested)?;
    if let Some(seed) = cli.seed {
        config.params.seed = seed;
    }
    config.mode = Some(mode);
    config.validate(mode)?;
    let seed = config.params.seed;
    let invocation = Invocation::Mode { mode, config: Box::new(config) };
    execute(&cli.out, invocation, seed, cli.format.unwrap_or(Format::Csv), cli.trace).map(|_| ())
}

/// Runs an invocation into `out` and writes its manifest.
fn execute(out: &Path, invocation: Invocation, seed: u64, format: Format, trace: bool) -> CliResult<Manifest> {
    let mut dir = OutputDir::create(out)?;
    let RunOutput { tables, summary, failure } = match &invocation {
        Invocation::Mode { mode, config } => run::run_mode(config, *mode, &mut dir, trace)?,
        Invocation::Preset { name } => name.run(seed)?,
    };
    for table in &tables {
        let file = format!("{}.{}", table.name, format.extension());
        let path = dir.write(&file, table.render(format))?;
        println!("wrote {}", path.display());
    }
    let manifest = Manifest::new(invocation, seed, format, trace, dir.records().to_vec());
    let path = manifest.save(&dir)?;
    println!("wrote {}", path.display());
    println!("{summary}");
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn replay(cli: &Cli, path: &Path) -> CliResult<()> {
    let original = Manifest::load(path)?;
    if let Invocation::Mode { mode, config } = &original.invocation {
        config.validate(*mode)?;
    }
    let rerun = execute(&cli.out, original.invocation.clone(), original.seed, original.format, original.trace)?;
    if rerun.outputs != original.outputs {
        let differing: Vec<&str> = original
            .outputs
            .iter()
            .filter(|o| !rerun.outputs.contains(o))
            .map(|o| o.file.as_str())
            .collect();
        return Err(CliError::Mismatch(format!("outputs differ from the manifest: {}", differing.join(", "))));
    }
    println!("replay identical: {} output(s) match", rerun.outputs.len());
    Ok(())
}
