use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikemix_cli::{config, run, CliError, CliResult, Command, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "spikemix", version, about = "Sampling experiments with Boltzmann machines and spiking networks")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit the activation curve of a single neuron
    Calibrate(Common),
    /// Train a machine with CAST
    Train(Common),
    /// Draw samples (sample-target or generate)
    Sample(Common),
    /// Classify held-out images
    Classify(Common),
    /// Grid over short-term plasticity parameters
    Sweep(Common),
    /// Gibbs, AST and spiking sampler side by side
    Compare(Common),
    /// Pattern completion from a partly clamped image
    Complete(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed (repeatable)
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory, overrides `output_dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores)
    #[arg(long, env = "SPIKEMIX_WORKERS", default_value_t = 0)]
    workers: usize,
}

fn execute(cli: Cli) -> CliResult<()> {
    let (cmd, common) = match cli.command {
        Sub::Calibrate(c) => (Command::Calibrate, c),
        Sub::Train(c) => (Command::Train, c),
        Sub::Sample(c) => (Command::Sample, c),
        Sub::Classify(c) => (Command::Classify, c),
        Sub::Sweep(c) => (Command::Sweep, c),
        Sub::Compare(c) => (Command::Compare, c),
        Sub::Complete(c) => (Command::Complete, c),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if !cmd.accepts(cfg.kind) {
        return Err(CliError::Config(format!(
            "{}: kind \"{}\" does not fit this subcommand",
            common.config.display(),
            config::kind_name(cfg.kind)
        )));
    }
    if !common.seed.is_empty() {
        cfg.seeds = common.seed;
    }
    if let Some(out) = common.out {
        cfg.output_dir = out;
    }
    let opts = RunOptions { workers: common.workers, compare: cmd == Command::Compare };
    let manifest = run(&cfg, opts)?;
    let failed = manifest.failed_seeds();
    println!("{}", cfg.output_dir.join("manifest.json").display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Run(format!("{} of {} seeds failed: {failed:?}", failed.len(), manifest.seeds.len())))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
