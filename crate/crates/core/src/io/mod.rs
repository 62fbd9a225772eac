//! Experiment driver: JSON configuration, the experiment registry, output
//! files and run manifests.

mod config;
mod experiments;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{load_config, parse_config, ExperimentOptions, ExperimentSpec};
pub use experiments::{Context, Experiment, ExperimentRegistry};
pub use manifest::{file_digest, RunManifest, MANIFEST_FILE};

use crate::error::Result;
use crate::strategy::{Model, StrategyRegistry};

/// Runs `spec` into `spec.output_dir`, writing its artifacts and a manifest.
/// On failure the files written so far are removed.
pub fn run_experiment(spec: &ExperimentSpec, registry: &ExperimentRegistry) -> Result<RunManifest> {
    let experiment = registry.get(&spec.kind)?;
    let model = Model::from_config(spec.params, &spec.model, &StrategyRegistry::with_builtins())?;
    let dir = spec.output_dir.as_path();
    let created = !dir.exists();
    fs::create_dir_all(dir)?;
    let started_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let ctx = Context::new(spec, model, dir);
    let outcome = experiment.run(&ctx).and_then(|summary| {
        let mut outputs = BTreeMap::new();
        for path in ctx.written() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            outputs.insert(name, file_digest(&path)?);
        }
        let p = &spec.params;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
            derived: BTreeMap::from([
                ("A".to_string(), p.a_rate()),
                ("B".to_string(), p.b_rate()),
                ("A_minus_B".to_string(), p.a_rate() - p.b_rate()),
            ]),
            seed: spec.run.seed,
            started_at,
            wall_clock_seconds: clock.elapsed().as_secs_f64(),
            summary,
            outputs,
        };
        manifest.write(dir)?;
        Ok(manifest)
    });
    if outcome.is_err() {
        experiments::remove_files(&ctx.written());
        if created {
            let _ = fs::remove_dir(dir);
        }
    }
    outcome
}

/// Re-runs the spec recorded in a manifest into `out_dir` and returns the
/// new manifest together with the outputs whose digests changed.
pub fn rerun_manifest(manifest: &RunManifest, out_dir: &Path, registry: &ExperimentRegistry) -> Result<(RunManifest, Vec<String>)> {
    let mut spec = manifest.spec.clone();
    spec.output_dir = out_dir.to_path_buf();
    let fresh = run_experiment(&spec, registry)?;
    let mut changed = manifest.mismatches(out_dir);
    changed.extend(fresh.outputs.keys().filter(|k| !manifest.outputs.contains_key(*k)).cloned());
    Ok((fresh, changed))
}
