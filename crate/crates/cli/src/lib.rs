//! Config-driven experiment runner for the `spikemix` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{ExperimentKind, RunConfig};
pub use error::{CliError, CliResult};
pub use manifest::{config_hash, RunManifest, SeedRecord};

/// Subcommands of the binary. Each accepts a subset of experiment kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Calibrate,
    Train,
    Sample,
    Classify,
    Sweep,
    Compare,
    Complete,
}

impl Command {
    pub fn accepts(self, kind: ExperimentKind) -> bool {
        use ExperimentKind as K;
        matches!(
            (self, kind),
            (Command::Calibrate, K::Calibrate)
                | (Command::Train, K::Train)
                | (Command::Sample, K::SampleTarget | K::Generate)
                | (Command::Classify, K::Classify)
                | (Command::Sweep, K::SweepStp)
                | (Command::Compare, K::Generate)
                | (Command::Complete, K::PatternComplete)
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    /// Run Gibbs, AST and the spiking sampler side by side (generate only).
    pub compare: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: 0, compare: false }
    }
}

/// Validate, execute every seed and write `manifest.json`.
///
/// A failing seed does not stop the others; its error is recorded in the
/// manifest. Errors that make every seed pointless (bad config, unreadable
/// data) are returned directly.
pub fn run(config: &RunConfig, opts: RunOptions) -> CliResult<RunManifest> {
    config.validate()?;
    if opts.compare && config.kind != ExperimentKind::Generate {
        return Err(CliError::Config(format!(
            "compare needs kind = \"generate\", got \"{}\"",
            config::kind_name(config.kind)
        )));
    }
    let start = Instant::now();
    let dir = config.output_dir.as_path();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;

    let data = config.dataset.as_ref().map(experiments::load_data).transpose()?;
    let machine = experiments::shared_machine(config)?;
    let shared = experiments::Shared { data, machine };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let records: Vec<(u64, SeedRecord)> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_one(config, &shared, opts.compare, dir, seed)))
            .collect()
    });

    let manifest = RunManifest {
        config_hash: config_hash(config)?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config::kind_name(config.kind).to_string(),
        seeds: records.into_iter().collect(),
        shared_files: vec!["config.toml".to_string()],
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(dir)?;
    Ok(manifest)
}

fn run_one(config: &RunConfig, shared: &experiments::Shared, compare: bool, dir: &Path, seed: u64) -> SeedRecord {
    let t = Instant::now();
    log::info!("seed {seed}: start");
    let result = experiments::run_seed(config, shared, compare, dir, seed);
    let wall_seconds = t.elapsed().as_secs_f64();
    match result {
        Ok(files) => {
            log::info!("seed {seed}: done in {wall_seconds:.1} s");
            SeedRecord { files, wall_seconds, error: None }
        }
        Err(e) => {
            log::error!("seed {seed}: {e}");
            SeedRecord { files: Vec::new(), wall_seconds, error: Some(e.to_string()) }
        }
    }
}
