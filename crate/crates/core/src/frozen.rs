//! The frozen fast subsystem: the temperature field evolved with the ice
//! line held fixed. With a single driving Brownian motion it is a linear
//! Gaussian system, so its marginal and stationary moments are explicit;
//! an Euler–Maruyama sampler on the latitude grid serves as the check.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{mean_forcing, raw};
use crate::error::{check_unit, EbmError, Result};
use crate::field::{InitialField, TemperatureField};
use crate::grid::LatitudeGrid;
use crate::params::ModelParams;
use crate::rng::{self, Channel};
use crate::stats::{covariance, Summary};
use crate::strategy::NoiseSpec;

/// Moments of the stationary bivariate Gaussian law of
/// `(ξ^η(t, η), ζ^η(t))` as `t → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStationary {
    pub mean_xi: f64,
    pub mean_zeta: f64,
    pub var_xi: f64,
    pub var_zeta: f64,
    pub cov_xi_zeta: f64,
}

impl GaussianStationary {
    /// Covariance matrix is positive semidefinite (up to rounding).
    pub fn is_valid_covariance(&self) -> bool {
        let tol = 1e-12 * (self.var_xi.abs() + self.var_zeta.abs());
        self.var_xi >= -tol
            && self.var_zeta >= -tol
            && self.cov_xi_zeta * self.cov_xi_zeta <= self.var_xi * self.var_zeta + tol * tol.max(1.0)
    }
}

/// Closed-form stationary law of the frozen system at ice line `eta`.
pub fn stationary_law(params: &ModelParams, noise: &NoiseSpec, eta: f64) -> Result<GaussianStationary> {
    check_unit("eta", eta)?;
    let gap = params.require_nondegenerate()?;
    let a = params.a_rate();
    let b = params.b_rate();
    let h_local = raw::forcing(params, eta, eta);
    let h_bar = mean_forcing(params, eta)?;
    let sig = noise.field.amplitude(eta, eta);
    let sig_bar = noise.field.latitude_mean(eta);
    let d = sig - sig_bar;
    Ok(GaussianStationary {
        mean_xi: h_local / a + b / gap * h_bar / a,
        mean_zeta: h_bar / gap,
        var_xi: d * d / (2.0 * a) + 2.0 * d * sig_bar / (2.0 * a - b) + sig_bar * sig_bar / (2.0 * gap),
        var_zeta: sig_bar * sig_bar / (2.0 * gap),
        cov_xi_zeta: d * sig_bar / (2.0 * a - b) + sig_bar * sig_bar / (2.0 * gap),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVariance {
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance of the Ornstein–Uhlenbeck mean temperature `ζ^η(t)`
/// started from the deterministic value `x0_mean`.
pub fn zeta_exact(params: &ModelParams, noise: &NoiseSpec, eta: f64, x0_mean: f64, t: f64) -> Result<MeanVariance> {
    check_unit("eta", eta)?;
    if !(t >= 0.0) {
        return Err(EbmError::Domain {
            name: "t",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let gap = params.require_nondegenerate()?;
    let h_bar = mean_forcing(params, eta)?;
    let sig_bar = noise.field.latitude_mean(eta);
    let decay = (-gap * t).exp();
    Ok(MeanVariance {
        mean: x0_mean * decay + h_bar * (1.0 - decay) / gap,
        variance: sig_bar * sig_bar * (1.0 - decay * decay) / (2.0 * gap),
    })
}

/// Deterministic part of the explicit solution `ξ^η(t, x)`. `X̄₀` is the
/// grid quadrature of the initial field.
pub fn xi_exact_mean(
    params: &ModelParams,
    eta: f64,
    x: f64,
    x0: &InitialField,
    grid: &LatitudeGrid,
    t: f64,
) -> Result<f64> {
    check_unit("eta", eta)?;
    check_unit("x", x)?;
    if !(t >= 0.0) {
        return Err(EbmError::Domain {
            name: "t",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let gap = params.require_nondegenerate()?;
    let a = params.a_rate();
    let b = params.b_rate();
    let h = raw::forcing(params, x, eta);
    let h_bar = mean_forcing(params, eta)?;
    let x0_mean = x0.sample(grid).mean(grid);
    let ea = (-a * t).exp();
    // e^{-At}(1 - e^{Bt}) written to stay finite for large t
    let cross = ea - (-(a - b) * t).exp();
    Ok(x0.value(x) * ea + h * (1.0 - ea) / a - (x0_mean - h_bar / gap) * cross
        + b / gap * h_bar * (1.0 - ea) / a)
}

/// Euler–Maruyama integrator of the frozen system on a latitude grid.
#[derive(Debug, Clone)]
pub struct FrozenSystem<'g> {
    grid: &'g LatitudeGrid,
    forcing: Vec<f64>,
    amplitude: Vec<f64>,
    a: f64,
    b: f64,
    eta: f64,
}

impl<'g> FrozenSystem<'g> {
    pub fn new(params: &ModelParams, noise: &NoiseSpec, grid: &'g LatitudeGrid, eta: f64) -> Result<Self> {
        check_unit("eta", eta)?;
        Ok(Self {
            grid,
            forcing: grid.nodes().iter().map(|&x| raw::forcing(params, x, eta)).collect(),
            amplitude: grid.nodes().iter().map(|&x| noise.field.amplitude(x, eta)).collect(),
            a: params.a_rate(),
            b: params.b_rate(),
            eta,
        })
    }

    /// Rejects steps with `dt · A ≥ 0.1`.
    pub fn check_step(&self, dt: f64) -> Result<()> {
        if dt > 0.0 && dt * self.a < 0.1 {
            Ok(())
        } else {
            Err(EbmError::Stability {
                dt,
                bound: 0.1 / self.a,
            })
        }
    }

    /// Default step `0.05 / A`.
    pub fn default_step(&self) -> f64 {
        0.05 / self.a
    }

    /// Advances `xi` by one step with field increment `db`; returns the new `ζ`.
    #[inline]
    pub fn step(&self, xi: &mut [f64], zeta: f64, dt: f64, db: f64) -> f64 {
        for ((v, h), s) in xi.iter_mut().zip(&self.forcing).zip(&self.amplitude) {
            *v += (-self.a * *v + self.b * zeta + h) * dt + s * db;
        }
        self.grid.integrate(xi)
    }

    pub fn xi_at_eta(&self, xi: &[f64]) -> f64 {
        self.grid.interpolate(xi, self.eta)
    }

    pub fn grid(&self) -> &LatitudeGrid {
        self.grid
    }
}

/// Number of steps and the (possibly shortened) step that lands exactly on `t_end`.
pub(crate) fn step_plan(t_end: f64, dt: f64) -> (usize, f64) {
    let n = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    (n, t_end / n as f64)
}

/// One sampled path of the frozen system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenPath {
    pub times: Vec<f64>,
    pub xi_at_eta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: f64,
    pub seed: u64,
    pub path_index: u64,
}

impl FrozenPath {
    /// CSV with columns `t,xi_at_eta,zeta`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,xi_at_eta,zeta")?;
        for ((t, x), z) in self.times.iter().zip(&self.xi_at_eta).zip(&self.zeta) {
            writeln!(out, "{t},{x},{z}")?;
        }
        Ok(())
    }
}

/// Samples one Euler–Maruyama path of the frozen system up to `t_end`,
/// recording every `record_stride` steps.
#[allow(clippy::too_many_arguments)]
pub fn sample_frozen_path(
    params: &ModelParams,
    noise: &NoiseSpec,
    grid: &LatitudeGrid,
    eta: f64,
    x0: &TemperatureField,
    t_end: f64,
    dt: f64,
    record_stride: usize,
    seed: u64,
    path_index: u64,
) -> Result<FrozenPath> {
    let sys = FrozenSystem::new(params, noise, grid, eta)?;
    sys.check_step(dt)?;
    if !(t_end >= dt) {
        return Err(EbmError::Config(format!("horizon T = {t_end} must be at least dt = {dt}")));
    }
    let stride = record_stride.max(1);
    let (n, dt) = step_plan(t_end, dt);
    let mut rng = rng::stream(seed, path_index, Channel::Field);
    let sd = dt.sqrt();
    let mut xi = x0.values.clone();
    let mut zeta = grid.integrate(&xi);
    let mut path = FrozenPath {
        times: vec![0.0],
        xi_at_eta: vec![sys.xi_at_eta(&xi)],
        zeta: vec![zeta],
        eta,
        seed,
        path_index,
    };
    for k in 1..=n {
        zeta = sys.step(&mut xi, zeta, dt, sd * rng::standard_normal(&mut rng));
        if k % stride == 0 || k == n {
            path.times.push(k as f64 * dt);
            path.xi_at_eta.push(sys.xi_at_eta(&xi));
            path.zeta.push(zeta);
        }
    }
    if !zeta.is_finite() {
        return Err(EbmError::NonFinite {
            t: t_end,
            what: "frozen field".into(),
        });
    }
    Ok(path)
}

/// Ensemble moments of `(ξ^η(t, η), ζ^η(t))` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenMoments {
    pub t: f64,
    pub xi: Summary,
    pub zeta: Summary,
    pub cov_xi_zeta: f64,
    pub se_cov: f64,
}

/// Runs `n_paths` independent frozen paths and returns ensemble moments at
/// each requested time (rounded to the nearest step).
#[allow(clippy::too_many_arguments)]
pub fn frozen_ensemble_moments(
    params: &ModelParams,
    noise: &NoiseSpec,
    grid: &LatitudeGrid,
    eta: f64,
    x0: &TemperatureField,
    dt: f64,
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<FrozenMoments>> {
    let sys = FrozenSystem::new(params, noise, grid, eta)?;
    sys.check_step(dt)?;
    let steps: Vec<usize> = times.iter().map(|t| (t / dt).round() as usize).collect();
    let n_max = steps.iter().copied().max().unwrap_or(0);
    let sd = dt.sqrt();
    let samples: Vec<Vec<(f64, f64)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng::stream(seed, p, Channel::Field);
            let mut xi = x0.values.clone();
            let mut zeta = grid.integrate(&xi);
            let mut rec = vec![(0.0, 0.0); steps.len()];
            for (j, &s) in steps.iter().enumerate() {
                if s == 0 {
                    rec[j] = (sys.xi_at_eta(&xi), zeta);
                }
            }
            for k in 1..=n_max {
                zeta = sys.step(&mut xi, zeta, dt, sd * rng::standard_normal(&mut rng));
                for (j, &s) in steps.iter().enumerate() {
                    if s == k {
                        rec[j] = (sys.xi_at_eta(&xi), zeta);
                    }
                }
            }
            rec
        })
        .collect();
    Ok(steps
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let xs: Vec<f64> = samples.iter().map(|r| r[j].0).collect();
            let zs: Vec<f64> = samples.iter().map(|r| r[j].1).collect();
            let (cov, se_cov) = covariance(&xs, &zs);
            FrozenMoments {
                t: s as f64 * dt,
                xi: Summary::of(&xs),
                zeta: Summary::of(&zs),
                cov_xi_zeta: cov,
                se_cov,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{ConstantFieldNoise, ConstantIceLineNoise, StandardFieldNoise};
    use std::sync::Arc;

    fn grid() -> LatitudeGrid {
        LatitudeGrid::uniform(101).unwrap()
    }

    #[test]
    fn stationary_var_zeta_at_equator() {
        let law = stationary_law(&ModelParams::default(), &NoiseSpec::standard(), 0.0).unwrap();
        let expected = (std::f64::consts::FRAC_PI_2).powi(2) / (2.0 * 1.9 / 12.6);
        assert!((law.var_zeta - expected).abs() < 1e-12);
        assert!((law.var_zeta - 8.181).abs() < 1e-3);
    }

    #[test]
    fn silent_noise_gives_zero_variances() {
        let law = stationary_law(&ModelParams::default(), &NoiseSpec::silent(), 0.4).unwrap();
        assert_eq!((law.var_xi, law.var_zeta, law.cov_xi_zeta), (0.0, 0.0, 0.0));
    }

    #[test]
    fn degenerate_model_rejected() {
        let p = ModelParams {
            b: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            stationary_law(&p, &NoiseSpec::standard(), 0.5),
            Err(EbmError::DegenerateModel { .. })
        ));
        assert!(zeta_exact(&p, &NoiseSpec::standard(), 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn covariance_psd_on_eta_grid() {
        let p = ModelParams::default();
        for i in 0..=100 {
            let law = stationary_law(&p, &NoiseSpec::standard(), i as f64 / 100.0).unwrap();
            assert!(law.var_xi > 0.0 && law.var_zeta > 0.0);
            assert!(law.is_valid_covariance(), "eta={} {law:?}", i as f64 / 100.0);
        }
    }

    #[test]
    fn decoupled_variance() {
        // c = 0 gives B = 0: Var ξ collapses to Σ(η,η)²/(2A)
        let p = ModelParams {
            c: 1e-300,
            ..Default::default()
        };
        let noise = NoiseSpec::standard();
        for eta in [0.1, 0.5, 0.9] {
            let law = stationary_law(&p, &noise, eta).unwrap();
            let s = noise.field.amplitude(eta, eta);
            assert!((law.var_xi - s * s / (2.0 * p.a_rate())).abs() < 1e-12 * law.var_xi);
        }
    }

    #[test]
    fn zeta_exact_limits() {
        let p = ModelParams::default();
        let n = NoiseSpec::standard();
        let at0 = zeta_exact(&p, &n, 0.5, 3.0, 0.0).unwrap();
        assert_eq!(at0, MeanVariance { mean: 3.0, variance: 0.0 });
        let law = stationary_law(&p, &n, 0.5).unwrap();
        let late = zeta_exact(&p, &n, 0.5, 3.0, 1e4).unwrap();
        assert!((late.mean - law.mean_zeta).abs() < 1e-12);
        assert!((late.variance - law.var_zeta).abs() < 1e-12);
        let mut prev = 0.0;
        for k in 0..50 {
            let v = zeta_exact(&p, &n, 0.5, 0.0, k as f64).unwrap().variance;
            assert!(v >= prev);
            // gap to the limit decays like e^{-2(A-B)t}
            let expected_gap = law.var_zeta * (-2.0 * p.mean_relaxation_rate() * k as f64).exp();
            assert!((law.var_zeta - v - expected_gap).abs() < 1e-12);
            prev = v;
        }
        assert!(zeta_exact(&p, &n, 0.5, 0.0, -1.0).is_err());
    }

    #[test]
    fn xi_exact_mean_limits() {
        let p = ModelParams::default();
        let g = grid();
        let x0 = InitialField::Affine {
            intercept: 5.0,
            slope: -10.0,
        };
        for x in [0.0, 0.3, 0.77] {
            assert!((xi_exact_mean(&p, 0.4, x, &x0, &g, 0.0).unwrap() - x0.value(x)).abs() < 1e-12);
        }
        let law = stationary_law(&p, &NoiseSpec::standard(), 0.4).unwrap();
        let late = xi_exact_mean(&p, 0.4, 0.4, &x0, &g, 500.0).unwrap();
        assert!((late - law.mean_xi).abs() < 1e-10);
    }

    #[test]
    fn noiseless_path_relaxes_to_fixed_point() {
        let p = ModelParams::default();
        let g = grid();
        let x0 = InitialField::Constant { value: 4.0 };
        let noise = NoiseSpec {
            field: Arc::new(ConstantFieldNoise { value: 0.0 }),
            iceline: Arc::new(ConstantIceLineNoise { value: 0.0 }),
        };
        let dt = 0.01;
        let path = sample_frozen_path(&p, &noise, &g, 0.3, &x0.sample(&g), 10.0, dt, 100, 1, 0).unwrap();
        for (t, z) in path.times.iter().zip(&path.zeta) {
            let exact = zeta_exact(&p, &noise, 0.3, 4.0, *t).unwrap().mean;
            assert!((z - exact).abs() < 0.02, "t={t} {z} vs {exact}");
        }
        for (t, xi) in path.times.iter().zip(&path.xi_at_eta) {
            let exact = xi_exact_mean(&p, 0.3, 0.3, &x0, &g, *t).unwrap();
            assert!((xi - exact).abs() < 0.02, "t={t} {xi} vs {exact}");
        }
    }

    #[test]
    fn stability_and_csv() {
        let p = ModelParams::default();
        let g = grid();
        let x0 = InitialField::default().sample(&g);
        let err = sample_frozen_path(&p, &NoiseSpec::standard(), &g, 0.5, &x0, 1.0, 0.3, 1, 0, 0);
        assert!(matches!(err, Err(EbmError::Stability { .. })));
        let path = sample_frozen_path(&p, &NoiseSpec::standard(), &g, 0.5, &x0, 0.5, 0.1, 1, 9, 0).unwrap();
        assert_eq!(path.times.len(), 6);
        assert_eq!(path.xi_at_eta[0], 0.0);
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,xi_at_eta,zeta\n0,0,0\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn ensemble_zeta_matches_exact_at_unit_time() {
        let p = ModelParams::default();
        let g = grid();
        let noise = NoiseSpec {
            field: Arc::new(StandardFieldNoise { scale: 1.0 }),
            iceline: Arc::new(ConstantIceLineNoise { value: 0.0 }),
        };
        let x0 = InitialField::Constant { value: 0.0 }.sample(&g);
        let m = frozen_ensemble_moments(&p, &noise, &g, 0.5, &x0, 0.01, &[1.0], 4000, 11).unwrap();
        let exact = zeta_exact(&p, &noise, 0.5, 0.0, 1.0).unwrap();
        assert!((m[0].zeta.mean - exact.mean).abs() < 3.0 * m[0].zeta.se_mean);
        assert!((m[0].zeta.variance - exact.variance).abs() < 3.0 * m[0].zeta.se_variance);
    }
}
