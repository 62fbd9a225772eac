use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::averaged::averaged_trajectory;
use super::slowfast::{integrate, FieldSnapshot, SlowFastSystem};
use super::RunConfig;
use crate::averaging::{averaged_drift, AveragedCoefficients, DEFAULT_HERMITE_ORDER};
use crate::error::{EbmError, Result};
use crate::field::{sobolev_constant, w12_norm_sq, InitialField};
use crate::frozen::FrozenSystem;
use crate::grid::LatitudeGrid;
use crate::rng::{self, Channel};
use crate::stats::{linear_fit, Summary};
use crate::strategy::Model;

/// Coupled slow-fast vs averaged errors along an `ε` ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub epsilons: Vec<f64>,
    /// Estimated `E sup_t |η^ε − η̂|` per `ε`.
    pub sup_errors: Vec<f64>,
    pub sup_error_se: Vec<f64>,
    /// Estimated `P(sup_t |η^ε − η̂| > δ)` per `ε`.
    pub exceed_probs: Vec<f64>,
    pub exceed_prob_se: Vec<f64>,
    pub threshold: f64,
    pub n_paths: usize,
    pub aborted: Vec<usize>,
    pub seed: u64,
    pub run: RunConfig,
}

impl ConvergenceReport {
    /// Each error is below its predecessor by more than `k` combined standard errors.
    pub fn strictly_decreasing(&self, k: f64) -> bool {
        (1..self.epsilons.len()).all(|i| {
            let se = self.sup_error_se[i].hypot(self.sup_error_se[i - 1]);
            self.sup_errors[i - 1] - self.sup_errors[i] > k * se
        })
    }

    /// Exceedance probabilities never increase by more than `k` combined standard errors.
    pub fn exceedance_nonincreasing(&self, k: f64) -> bool {
        (1..self.epsilons.len()).all(|i| {
            let se = self.exceed_prob_se[i].hypot(self.exceed_prob_se[i - 1]);
            self.exceed_probs[i] <= self.exceed_probs[i - 1] + k * se
        })
    }
}

/// For each `ε`, runs `base.n_paths` slow-fast paths and averaged paths
/// driven by the same ice-line increments and records the sup distance.
pub fn convergence_experiment(
    model: &Model,
    averaged: &dyn AveragedCoefficients,
    base: &RunConfig,
    epsilons: &[f64],
    threshold: f64,
) -> Result<ConvergenceReport> {
    if epsilons.is_empty() || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(EbmError::Config("epsilon ladder must be non-empty and strictly decreasing".into()));
    }
    let mut report = ConvergenceReport {
        epsilons: epsilons.to_vec(),
        sup_errors: Vec::new(),
        sup_error_se: Vec::new(),
        exceed_probs: Vec::new(),
        exceed_prob_se: Vec::new(),
        threshold,
        n_paths: base.n_paths,
        aborted: Vec::new(),
        seed: base.seed,
        run: base.clone(),
    };
    for &eps in epsilons {
        let cfg = RunConfig {
            epsilon: eps,
            ..base.clone()
        };
        let sys = SlowFastSystem::new(model, &cfg)?;
        let (n, dt) = (sys.n_steps(), sys.dt());
        let sups: Vec<Option<f64>> = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|p| {
                let w = rng::brownian_increments(&mut rng::stream(cfg.seed, p, Channel::IceLine), n, dt);
                let (hat, _) = averaged_trajectory(averaged, cfg.eta0, dt, &w);
                let mut sup: f64 = 0.0;
                integrate(&sys, &cfg, p, Some(&w), |k, s| sup = sup.max((s.eta - hat[k]).abs()))
                    .ok()
                    .map(|_| sup)
            })
            .collect();
        let done: Vec<f64> = sups.iter().flatten().copied().collect();
        let exceed: Vec<f64> = done.iter().map(|&s| f64::from(u8::from(s > threshold))).collect();
        let s = Summary::of(&done);
        let e = Summary::of(&exceed);
        report.sup_errors.push(s.mean);
        report.sup_error_se.push(s.se_mean);
        report.exceed_probs.push(e.mean);
        report.exceed_prob_se.push(e.se_mean);
        report.aborted.push(sups.len() - done.len());
    }
    Ok(report)
}

/// Time-average errors of the ice-line drift along frozen paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub eta: f64,
    pub f_hat: f64,
    pub horizons: Vec<f64>,
    /// Ensemble mean of `|T⁻¹ ∫₀^T f(η, ξ(s, η)) ds − f̂(η)|` per horizon.
    pub errors: Vec<f64>,
    pub error_se: Vec<f64>,
    /// Slope of `log error` against `log T`; absent when an error is at rounding level.
    pub exponent: Option<f64>,
    pub exponent_se: Option<f64>,
    /// Ensemble average of `f(η, ξ(T, η))` at the longest horizon.
    pub ensemble_average: f64,
    pub ensemble_average_se: f64,
    /// Time average along the first path at the longest horizon.
    pub single_path_time_average: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

#[allow(clippy::too_many_arguments)]
pub fn ergodic_average_experiment(
    model: &Model,
    eta: f64,
    horizons: &[f64],
    dt: f64,
    n_lat: usize,
    n_paths: usize,
    initial_field: &InitialField,
    seed: u64,
) -> Result<ErgodicReport> {
    if horizons.is_empty() || horizons.iter().any(|&t| !(t >= dt)) {
        return Err(EbmError::Config("horizons must be non-empty and at least dt".into()));
    }
    if n_paths < 2 {
        return Err(EbmError::Config("ergodic experiment needs at least two paths".into()));
    }
    let f_hat = averaged_drift(model, eta, DEFAULT_HERMITE_ORDER)?;
    let grid = LatitudeGrid::uniform(n_lat)?;
    let sys = FrozenSystem::new(&model.params, &model.noise, &grid, eta)?;
    sys.check_step(dt)?;
    let steps: Vec<usize> = horizons.iter().map(|t| (t / dt).round() as usize).collect();
    let n_max = *steps.iter().max().unwrap();
    let p = &model.params;
    let x0 = initial_field.sample(&grid).values;
    let sd = dt.sqrt();
    let runs: Vec<(Vec<f64>, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = rng::stream(seed, path, Channel::Field);
            let mut xi = x0.clone();
            let mut zeta = grid.integrate(&xi);
            let mut integral = 0.0;
            let mut averages = vec![0.0; steps.len()];
            for k in 1..=n_max {
                integral += model.drift.value(p, eta, sys.xi_at_eta(&xi), zeta) * dt;
                zeta = sys.step(&mut xi, zeta, dt, sd * rng::standard_normal(&mut rng));
                for (j, &s) in steps.iter().enumerate() {
                    if s == k {
                        averages[j] = integral / (k as f64 * dt);
                    }
                }
            }
            (averages, model.drift.value(p, eta, sys.xi_at_eta(&xi), zeta))
        })
        .collect();
    let mut errors = Vec::new();
    let mut error_se = Vec::new();
    for j in 0..steps.len() {
        let e: Vec<f64> = runs.iter().map(|r| (r.0[j] - f_hat).abs()).collect();
        let s = Summary::of(&e);
        errors.push(s.mean);
        error_se.push(s.se_mean);
    }
    let (exponent, exponent_se) = if errors.iter().all(|&e| e > 1e-12 * (1.0 + f_hat.abs())) && horizons.len() >= 2 {
        let lx: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let fit = linear_fit(&lx, &ly);
        (Some(fit.slope), Some(fit.slope_se))
    } else {
        (None, None)
    };
    let terminal: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let ens = Summary::of(&terminal);
    let longest = steps.iter().enumerate().max_by_key(|(_, &s)| s).unwrap().0;
    Ok(ErgodicReport {
        eta,
        f_hat,
        horizons: horizons.to_vec(),
        errors,
        error_se,
        exponent,
        exponent_se,
        ensemble_average: ens.mean,
        ensemble_average_se: ens.se_mean,
        single_path_time_average: runs[0].0[longest],
        n_paths,
        dt,
        seed,
    })
}

/// `W^{1,2}` norms of recorded field snapshots across an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    /// Embedding constant `tanh(1)^{-1/2}`.
    pub constant: f64,
    pub n_lat: usize,
    pub coarse_grid_warning: bool,
    pub times: Vec<f64>,
    /// Ensemble mean of `‖X(t)‖²_{W^{1,2}}` per snapshot time.
    pub mean_norm_sq: Vec<f64>,
    pub mean_norm_sq_se: Vec<f64>,
    pub running_max: Vec<f64>,
    pub max_mean_norm_sq: f64,
    pub snapshots_checked: usize,
    /// Snapshots with `‖X‖_∞ > C ‖X‖_{W^{1,2}}`.
    pub bound_violations: usize,
    /// Mean over paths of the least-squares slope of the norm over the final half.
    pub tail_slope: f64,
    pub tail_slope_se: f64,
    /// `tail_slope − 2 · se ≤ 0`.
    pub plateau: bool,
}

/// `snapshots[p]` is the snapshot list of path `p`, all taken at the same times.
pub fn sobolev_diagnostic(snapshots: &[Vec<FieldSnapshot>], grid: &LatitudeGrid) -> Result<SobolevReport> {
    let first = snapshots
        .first()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| EbmError::Config("sobolev diagnostic needs field snapshots".into()))?;
    if snapshots.iter().any(|s| s.len() != first.len()) {
        return Err(EbmError::Config("snapshot lists differ in length".into()));
    }
    let c = sobolev_constant();
    let times: Vec<f64> = first.iter().map(|s| s.t).collect();
    let mut violations = 0;
    let norms: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|path| {
            path.iter()
                .map(|s| {
                    let n2 = w12_norm_sq(grid.nodes(), &s.values);
                    let sup = s.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if sup > c * n2.sqrt() * (1.0 + 1e-12) {
                        violations += 1;
                    }
                    n2
                })
                .collect()
        })
        .collect();
    let mut mean = Vec::new();
    let mut se = Vec::new();
    for j in 0..times.len() {
        let col: Vec<f64> = norms.iter().map(|r| r[j]).collect();
        let s = Summary::of(&col);
        mean.push(s.mean);
        se.push(if s.se_mean.is_finite() { s.se_mean } else { 0.0 });
    }
    let mut running_max = Vec::with_capacity(mean.len());
    let mut m = f64::NEG_INFINITY;
    for v in &mean {
        m = m.max(*v);
        running_max.push(m);
    }
    let t_end = *times.last().unwrap();
    let tail: Vec<usize> = (0..times.len()).filter(|&j| times[j] >= 0.5 * t_end).collect();
    let (tail_slope, tail_slope_se) = if tail.len() >= 3 {
        let tx: Vec<f64> = tail.iter().map(|&j| times[j]).collect();
        let slopes: Vec<f64> = norms
            .iter()
            .map(|r| linear_fit(&tx, &tail.iter().map(|&j| r[j]).collect::<Vec<_>>()).slope)
            .collect();
        let s = Summary::of(&slopes);
        (s.mean, if s.se_mean.is_finite() { s.se_mean } else { 0.0 })
    } else {
        (0.0, 0.0)
    };
    Ok(SobolevReport {
        constant: c,
        n_lat: grid.len(),
        coarse_grid_warning: grid.len() < 11,
        times,
        max_mean_norm_sq: m,
        mean_norm_sq: mean,
        mean_norm_sq_se: se,
        running_max,
        snapshots_checked: snapshots.iter().map(Vec::len).sum(),
        bound_violations: violations,
        tail_slope,
        tail_slope_se,
        plateau: tail_slope - 2.0 * tail_slope_se <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{tabulate, FnCoefficients};
    use crate::strategy::{NoiseSpec, StandardFieldNoise, StandardIceLineNoise, RelaxationIceLineDrift};
    use std::sync::Arc;

    #[test]
    fn no_fast_coupling_gives_zero_error() {
        // f ignores the field, so both systems see the same drift and noise
        let model = Model::standard()
            .with_drift(Arc::new(RelaxationIceLineDrift))
            .with_noise(NoiseSpec {
                field: Arc::new(StandardFieldNoise { scale: 0.0 }),
                iceline: Arc::new(StandardIceLineNoise { scale: 1.0 }),
            });
        let kappa = model.params.kappa;
        let averaged = FnCoefficients {
            drift: move |e: f64| -kappa * (e - 0.5),
            diffusion: |e: f64| e * (1.0 - e),
        };
        let base = RunConfig {
            horizon: 1.0,
            n_paths: 8,
            n_lat: 11,
            eta0: 0.3,
            ..RunConfig::default()
        };
        let r = convergence_experiment(&model, &averaged, &base, &[0.1, 0.03], 0.1).unwrap();
        for e in &r.sup_errors {
            assert!(*e < 1e-12, "{r:?}");
        }
        assert!(convergence_experiment(&model, &averaged, &base, &[0.03, 0.1], 0.1).is_err());
    }

    #[test]
    fn ergodic_error_vanishes_at_ice_free_edge() {
        let r = ergodic_average_experiment(&Model::standard(), 0.0, &[5.0, 10.0], 0.1, 21, 16, &InitialField::default(), 2)
            .unwrap();
        assert!(r.errors.iter().all(|&e| e < 1e-14));
        assert!(r.exponent.is_none());
    }

    #[test]
    fn sobolev_on_synthetic_snapshots() {
        let grid = LatitudeGrid::uniform(101).unwrap();
        let snaps = |c: f64| -> Vec<FieldSnapshot> {
            (0..10)
                .map(|k| FieldSnapshot {
                    t: k as f64,
                    values: grid.nodes().iter().map(|&x| c + x).collect(),
                })
                .collect()
        };
        let r = sobolev_diagnostic(&[snaps(0.0), snaps(0.0)], &grid).unwrap();
        assert!((r.constant - 1.1459).abs() < 1e-4);
        assert!((r.mean_norm_sq[0] - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.bound_violations, 0);
        assert!(r.plateau);
        assert!(r.tail_slope.abs() < 1e-12);
        assert!(!r.coarse_grid_warning);
        assert!(sobolev_diagnostic(&[], &grid).is_err());
    }

    #[test]
    fn standard_model_coupled_run_is_finite() {
        let model = Model::standard();
        let averaged = tabulate(&model, 201, 1e-4, 32).unwrap();
        let base = RunConfig {
            horizon: 0.2,
            n_paths: 4,
            n_lat: 21,
            ..RunConfig::default()
        };
        let r = convergence_experiment(&model, &averaged, &base, &[0.1], 0.1).unwrap();
        assert_eq!(r.aborted, vec![0]);
        assert!(r.sup_errors[0].is_finite() && (0.0..=1.0).contains(&r.exceed_probs[0]));
    }
}
