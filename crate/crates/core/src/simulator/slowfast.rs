use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IceLinePath, RunConfig};
use crate::coefficients::{raw, truncate01};
use crate::error::{EbmError, Result};
use crate::grid::LatitudeGrid;
use crate::rng::{self, Channel};
use crate::stats::Summary;
use crate::strategy::Model;

/// Full state of the slow-fast system.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowFastState {
    pub t: f64,
    pub field: Vec<f64>,
    /// Latitude mean of `field`, recomputed by quadrature after every step.
    pub z: f64,
    pub eta: f64,
}

/// Model, grid and resolved step for one slow-fast run configuration.
#[derive(Debug, Clone)]
pub struct SlowFastSystem {
    model: Model,
    grid: LatitudeGrid,
    epsilon: f64,
    dt: f64,
    n_steps: usize,
}

impl SlowFastSystem {
    pub fn new(model: &Model, cfg: &RunConfig) -> Result<Self> {
        model.params.validate()?;
        cfg.validate(&model.params)?;
        let (n_steps, dt) = cfg.step_plan(&model.params);
        Ok(Self {
            model: model.clone(),
            grid: LatitudeGrid::uniform(cfg.n_lat)?,
            epsilon: cfg.epsilon,
            dt,
            n_steps,
        })
    }

    pub fn grid(&self) -> &LatitudeGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn initial_state(&self, cfg: &RunConfig) -> SlowFastState {
        let field = cfg.initial_field.sample(&self.grid).values;
        let z = self.grid.integrate(&field);
        SlowFastState {
            t: 0.0,
            field,
            z,
            eta: cfg.eta0,
        }
    }
}

/// One Euler–Maruyama step with field increment `db` (shared by all
/// latitudes) and ice-line increment `dw`. Returns the ice line before
/// truncation to `[0, 1]`.
pub fn step_slowfast(sys: &SlowFastSystem, state: &mut SlowFastState, db: f64, dw: f64) -> Result<f64> {
    let p = &sys.model.params;
    let dt = sys.dt;
    let eta = state.eta;
    let x_eta = sys.grid.interpolate(&state.field, eta);
    let slow_drift = sys.model.drift.value(p, eta, x_eta, state.z);
    let slow_noise = sys.model.noise.iceline.amplitude(eta, x_eta, state.z);

    let fast_dt = dt / sys.epsilon;
    let fast_db = db / sys.epsilon.sqrt();
    let z = state.z;
    for (v, &x) in state.field.iter_mut().zip(sys.grid.nodes()) {
        let drift = raw::drift_field(p, x, eta, *v, z);
        *v += drift * fast_dt + sys.model.noise.field.amplitude(x, eta) * fast_db;
    }
    state.z = sys.grid.integrate(&state.field);
    let pre = eta + slow_drift * dt + slow_noise * dw;
    state.eta = truncate01(pre);
    state.t += dt;
    if !(state.z.is_finite() && pre.is_finite()) {
        return Err(EbmError::NonFinite {
            t: state.t,
            what: "slow-fast state".into(),
        });
    }
    Ok(pre)
}

/// Field values at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

/// Output of one slow-fast path.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowFastTrace {
    pub path: IceLinePath,
    pub snapshots: Vec<FieldSnapshot>,
    /// Largest distance by which the pre-truncation ice line left `[0, 1]`.
    pub max_excursion: f64,
}

impl SlowFastTrace {
    /// Snapshot CSV, one row per `(t, x_i, X)`.
    pub fn write_snapshots_csv<W: Write>(&self, grid: &LatitudeGrid, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,X")?;
        for s in &self.snapshots {
            for (x, v) in grid.nodes().iter().zip(&s.values) {
                writeln!(out, "{},{x},{v}", s.t)?;
            }
        }
        Ok(())
    }
}

/// Integrates one path. `w` supplies the ice-line increments; otherwise they
/// come from the path's own stream. `observer` sees the state after every step.
pub(crate) fn integrate(
    sys: &SlowFastSystem,
    cfg: &RunConfig,
    path_index: u64,
    w: Option<&[f64]>,
    mut observer: impl FnMut(usize, &SlowFastState),
) -> Result<SlowFastTrace> {
    let n = sys.n_steps;
    if let Some(w) = w {
        if w.len() != n {
            return Err(EbmError::Config(format!("shared W has {} increments, run needs {n}", w.len())));
        }
    }
    let mut field_rng = rng::stream(cfg.seed, path_index, Channel::Field);
    let mut ice_rng = rng::stream(cfg.seed, path_index, Channel::IceLine);
    let sd = sys.dt.sqrt();
    let stride = cfg.record_stride.max(1);
    let mut state = sys.initial_state(cfg);
    let mut path = IceLinePath {
        times: vec![0.0],
        eta: vec![state.eta],
        z: Some(vec![state.z]),
        path_index,
        truncations: 0,
    };
    let mut snapshots = Vec::new();
    if cfg.snapshot_stride > 0 {
        snapshots.push(FieldSnapshot {
            t: 0.0,
            values: state.field.clone(),
        });
    }
    let mut max_excursion: f64 = 0.0;
    for k in 1..=n {
        let db = sd * rng::standard_normal(&mut field_rng);
        let dw = match w {
            Some(w) => w[k - 1],
            None => sd * rng::standard_normal(&mut ice_rng),
        };
        let pre = step_slowfast(sys, &mut state, db, dw)?;
        // exact step multiple avoids accumulated rounding in the clock
        state.t = k as f64 * sys.dt;
        if pre <= 0.0 || pre >= 1.0 {
            path.truncations += 1;
            max_excursion = max_excursion.max(-pre).max(pre - 1.0);
        }
        observer(k, &state);
        if k % stride == 0 || k == n {
            path.times.push(state.t);
            path.eta.push(state.eta);
            if let Some(z) = path.z.as_mut() {
                z.push(state.z);
            }
        }
        if cfg.snapshot_stride > 0 && (k % cfg.snapshot_stride == 0 || k == n) {
            snapshots.push(FieldSnapshot {
                t: state.t,
                values: state.field.clone(),
            });
        }
    }
    Ok(SlowFastTrace {
        path,
        snapshots,
        max_excursion,
    })
}

/// One slow-fast path with its own field and ice-line noise streams.
pub fn run_slowfast(model: &Model, cfg: &RunConfig, path_index: u64) -> Result<SlowFastTrace> {
    let sys = SlowFastSystem::new(model, cfg)?;
    integrate(&sys, cfg, path_index, None, |_, _| {})
}

/// Aggregate statistics of `n_paths` slow-fast paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    /// Paths stopped by a non-finite state; excluded from the statistics.
    pub aborted: usize,
    pub truncation_events: usize,
    pub paths_with_truncation: usize,
    pub max_excursion: f64,
    pub terminal_eta: Summary,
    pub terminal_z: Summary,
    pub min_eta: f64,
    pub max_eta: f64,
    pub dt: f64,
}

pub fn run_ensemble(model: &Model, cfg: &RunConfig) -> Result<EnsembleSummary> {
    let sys = SlowFastSystem::new(model, cfg)?;
    let runs: Vec<Option<(SlowFastTrace, f64, f64)>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let (mut lo, mut hi) = (cfg.eta0, cfg.eta0);
            let trace = integrate(&sys, cfg, p, None, |_, s| {
                lo = lo.min(s.eta);
                hi = hi.max(s.eta);
            });
            trace.ok().map(|t| (t, lo, hi))
        })
        .collect();
    let done: Vec<&(SlowFastTrace, f64, f64)> = runs.iter().flatten().collect();
    let eta_end: Vec<f64> = done.iter().map(|(t, _, _)| *t.path.eta.last().unwrap()).collect();
    let z_end: Vec<f64> = done
        .iter()
        .map(|(t, _, _)| *t.path.z.as_ref().unwrap().last().unwrap())
        .collect();
    Ok(EnsembleSummary {
        n_paths: cfg.n_paths,
        aborted: runs.len() - done.len(),
        truncation_events: done.iter().map(|(t, _, _)| t.path.truncations).sum(),
        paths_with_truncation: done.iter().filter(|(t, _, _)| t.path.truncations > 0).count(),
        max_excursion: done.iter().map(|(t, _, _)| t.max_excursion).fold(0.0, f64::max),
        terminal_eta: Summary::of(&eta_end),
        terminal_z: Summary::of(&z_end),
        min_eta: done.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        max_eta: done.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max),
        dt: sys.dt,
    })
}
