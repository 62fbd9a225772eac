//! Euler–Maruyama integration of the slow-fast system and of the averaged
//! ice-line SDE, plus the Monte Carlo experiments built on them.

mod averaged;
mod experiments;
mod slowfast;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{EbmError, Result};
use crate::field::InitialField;
use crate::params::ModelParams;

pub use averaged::{first_passage_monte_carlo, run_averaged, FirstPassageEstimate};
pub use experiments::{
    convergence_experiment, ergodic_average_experiment, sobolev_diagnostic, ConvergenceReport, ErgodicReport,
    SobolevReport,
};
pub use slowfast::{
    run_ensemble, run_slowfast, step_slowfast, EnsembleSummary, FieldSnapshot, SlowFastState, SlowFastSystem,
    SlowFastTrace,
};

/// Settings shared by every simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Slow-time step; `None` means `0.05 ε / A`.
    pub dt: Option<f64>,
    pub n_lat: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub eta0: f64,
    #[serde(rename = "X0")]
    pub initial_field: InitialField,
    /// Record the trajectory every this many steps (the last step is always recorded).
    pub record_stride: usize,
    /// Keep a field snapshot every this many steps; 0 disables snapshots.
    pub snapshot_stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            horizon: 5.0,
            dt: None,
            n_lat: 101,
            n_paths: 1000,
            seed: 1,
            eta0: 0.9,
            initial_field: InitialField::default(),
            record_stride: 10,
            snapshot_stride: 0,
        }
    }
}

impl RunConfig {
    /// Resolved step.
    pub fn step(&self, params: &ModelParams) -> f64 {
        self.dt.unwrap_or(0.05 * self.epsilon / params.a_rate())
    }

    /// Number of steps and the step that lands exactly on `T`.
    pub fn step_plan(&self, params: &ModelParams) -> (usize, f64) {
        crate::frozen::step_plan(self.horizon, self.step(params))
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(EbmError::Config(format!("epsilon = {} must lie in (0, 1]", self.epsilon)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(EbmError::Config(format!("T = {} must be positive", self.horizon)));
        }
        if !(self.eta0 > 0.0 && self.eta0 < 1.0) {
            return Err(EbmError::Config(format!("eta0 = {} must lie in (0, 1)", self.eta0)));
        }
        if self.n_lat < 2 {
            return Err(EbmError::Config(format!("n_lat = {} must be at least 2", self.n_lat)));
        }
        if self.n_paths == 0 {
            return Err(EbmError::Config("n_paths must be positive".into()));
        }
        self.initial_field.validate()?;
        let dt = self.step(params);
        let bound = 0.1 * self.epsilon / params.a_rate();
        if !(dt > 0.0 && dt <= bound) {
            return Err(EbmError::Stability { dt, bound });
        }
        Ok(())
    }
}

/// Recorded ice-line trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceLinePath {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    /// Mean temperature, present for slow-fast paths.
    pub z: Option<Vec<f64>>,
    pub path_index: u64,
    /// Steps whose pre-truncation ice line left `(0, 1)`.
    pub truncations: usize,
}

impl IceLinePath {
    /// CSV with columns `t,eta` or `t,eta,Z`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        match &self.z {
            Some(z) => {
                writeln!(out, "t,eta,Z")?;
                for ((t, e), z) in self.times.iter().zip(&self.eta).zip(z) {
                    writeln!(out, "{t},{e},{z}")?;
                }
            }
            None => {
                writeln!(out, "t,eta")?;
                for (t, e) in self.times.iter().zip(&self.eta) {
                    writeln!(out, "{t},{e}")?;
                }
            }
        }
        Ok(())
    }
}
