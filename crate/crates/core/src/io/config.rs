use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{EbmError, Result};
use crate::params::ModelParams;
use crate::simulator::RunConfig;
use crate::strategy::ModelConfig;

/// Experiment-specific knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentOptions {
    /// Solar constants for `drift-curve`.
    pub solar_values: Vec<f64>,
    /// Points of the `η` tabulation grid.
    pub n_grid: usize,
    /// Distance of the tabulation grid from `η ∈ {0, 1}`.
    pub delta: f64,
    pub hermite_order: usize,
    /// Where the stationary log-density is anchored before normalization.
    pub anchor: f64,
    pub epsilons: Vec<f64>,
    /// Sup-distance threshold of the convergence experiment.
    pub threshold: f64,
    /// Frozen ice line of the ergodic experiment.
    pub frozen_eta: f64,
    pub horizons: Vec<f64>,
    pub ergodic_dt: f64,
    /// Monte Carlo paths for the passage-time cross-check; 0 skips it.
    pub mfpt_paths: usize,
    pub mfpt_dt: f64,
    pub mfpt_t_max: f64,
    /// Auxiliary constant of the A7 inequality; `None` means `b / (2R)`.
    pub kappa_prime: Option<f64>,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            solar_values: vec![327.0, 343.0, 350.0],
            n_grid: 20001,
            delta: crate::averaging::DEFAULT_DELTA,
            hermite_order: crate::averaging::DEFAULT_HERMITE_ORDER,
            anchor: 0.5,
            epsilons: vec![0.1, 0.03, 0.01],
            threshold: 0.1,
            frozen_eta: 0.5,
            horizons: vec![25.0, 50.0, 100.0, 200.0],
            ergodic_dt: 0.1,
            mfpt_paths: 0,
            mfpt_dt: 1e-3,
            mfpt_t_max: 20.0,
            kappa_prime: None,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A fully resolved experiment request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: String,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub options: ExperimentOptions,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            params: ModelParams::default(),
            run: RunConfig::default(),
            model: ModelConfig::default(),
            options: ExperimentOptions::default(),
            output_dir: default_output_dir(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

/// Parses a spec from JSON text; `origin` labels error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentSpec> {
    serde_json::from_str(text).map_err(|e| EbmError::Config(format!("{origin}: {e}")))
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text =
        fs::read_to_string(path).map_err(|e| EbmError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_overrides_give_defaults() {
        let spec = parse_config(r#"{"kind": "validate"}"#, "test").unwrap();
        assert_eq!(spec.params, ModelParams::default());
        assert_eq!(spec.params.heat_capacity, 12.6);
        assert_eq!(spec.params.solar, 343.0);
        assert_eq!(spec.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn solar_override() {
        let spec = parse_config(r#"{"kind": "drift-curve", "params": {"Q": 327}}"#, "test").unwrap();
        assert_eq!(spec.params.solar, 327.0);
        assert_eq!(spec.params.a, 202.0);
    }

    #[test]
    fn errors_name_the_problem() {
        let e = parse_config(r#"{"kind": "validate", "params": {"Qx": 1}}"#, "cfg.json").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("Qx") && msg.contains("line"), "{msg}");
        assert_eq!(e.exit_code(), 2);
        let e = parse_config("{\"kind\": ", "cfg.json").unwrap_err();
        assert!(e.to_string().contains("cfg.json"));
        assert!(parse_config(r#"{"kind": "validate", "extra": 1}"#, "t").is_err());
    }

    #[test]
    fn round_trip() {
        let mut spec = ExperimentSpec::new("converge");
        spec.run.seed = 99;
        spec.options.epsilons = vec![0.2, 0.05];
        assert_eq!(parse_config(&spec.to_json(), "t").unwrap(), spec);
    }

    #[test]
    fn missing_file() {
        let e = load_config(Path::new("/nonexistent/x.json")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
