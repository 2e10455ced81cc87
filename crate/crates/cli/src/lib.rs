//! Harness for rotorlab experiments: configuration, run manifests, sweeps
//! and plot data.

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plot;
pub mod sweep;

pub use config::{Params, RunConfig};
pub use error::{CliError, CliResult};
pub use manifest::{RunManifest, RunOutput};

use std::path::PathBuf;
use std::time::Instant;

pub fn out_dir(config: &RunConfig) -> PathBuf {
    config
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(&config.experiment))
}

/// Resolves a config against its experiment without computing anything.
pub fn validate(config: &RunConfig) -> CliResult<Params> {
    let exp = experiments::find(&config.experiment)?;
    Params::resolve(&(exp.schema)(), &config.params, config.seed)
}

pub fn run_experiment(config: &RunConfig) -> CliResult<RunManifest> {
    let params = validate(config)?;
    let exp = experiments::find(&config.experiment)?;
    let mut resolved = config.clone();
    resolved.params = params.values.clone().into_iter().collect();
    let mut out = RunOutput::new(out_dir(config));
    let start = Instant::now();
    (exp.run)(&params, &mut out)?;
    out.finish(&resolved, start.elapsed().as_secs_f64())
}
