use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IceLinePath, RunConfig};
use crate::averaging::AveragedCoefficients;
use crate::coefficients::truncate01;
use crate::error::{EbmError, Result};
use crate::params::ModelParams;
use crate::rng::{self, Channel};
use crate::stats::Summary;

/// Every-step trajectory `η̂_0..=η̂_n` driven by the increments `w`.
pub(crate) fn averaged_trajectory(coeffs: &dyn AveragedCoefficients, eta0: f64, dt: f64, w: &[f64]) -> (Vec<f64>, usize) {
    let mut eta = eta0;
    let mut out = Vec::with_capacity(w.len() + 1);
    out.push(eta);
    let mut truncations = 0;
    for dw in w {
        let pre = eta + coeffs.drift(eta) * dt + coeffs.diffusion(eta) * dw;
        if pre <= 0.0 || pre >= 1.0 {
            truncations += 1;
        }
        eta = truncate01(pre);
        out.push(eta);
    }
    (out, truncations)
}

/// Euler–Maruyama path of the averaged ice-line SDE. With `shared_w` the
/// given increments are used verbatim; otherwise they are drawn from the
/// path's ice-line stream, the same one the slow-fast integrator uses.
pub fn run_averaged(
    coeffs: &dyn AveragedCoefficients,
    params: &ModelParams,
    cfg: &RunConfig,
    shared_w: Option<&[f64]>,
    path_index: u64,
) -> Result<IceLinePath> {
    cfg.validate(params)?;
    let (n, dt) = cfg.step_plan(params);
    let drawn;
    let w = match shared_w {
        Some(w) if w.len() != n => {
            return Err(EbmError::Config(format!("shared W has {} increments, run needs {n}", w.len())));
        }
        Some(w) => w,
        None => {
            drawn = rng::brownian_increments(&mut rng::stream(cfg.seed, path_index, Channel::IceLine), n, dt);
            &drawn
        }
    };
    let (eta, truncations) = averaged_trajectory(coeffs, cfg.eta0, dt, w);
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(EbmError::NonFinite {
            t: cfg.horizon,
            what: "averaged ice line".into(),
        });
    }
    let stride = cfg.record_stride.max(1);
    let keep = |k: usize| k.is_multiple_of(stride) || k == n;
    Ok(IceLinePath {
        times: (0..=n).filter(|&k| keep(k)).map(|k| k as f64 * dt).collect(),
        eta: (0..=n).filter(|&k| keep(k)).map(|k| eta[k]).collect(),
        z: None,
        path_index,
        truncations,
    })
}

/// Monte Carlo first-hitting times of `to` from `from` for the scalar SDE,
/// reflecting at `reflect_at` behind the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageEstimate {
    pub from: f64,
    pub to: f64,
    pub reflect_at: f64,
    pub n_paths: usize,
    /// Paths that reached the target before `t_max`.
    pub n_hit: usize,
    /// Paths still running at `t_max`.
    pub n_censored: usize,
    /// Mean hitting time over all paths with censored times set to `t_max`:
    /// unbiased when nothing is censored, a lower bound otherwise.
    pub mean: f64,
    pub se: f64,
    pub t_max: f64,
    pub dt: f64,
}

impl FirstPassageEstimate {
    pub fn is_censored(&self) -> bool {
        self.n_censored > 0
    }
}

#[allow(clippy::too_many_arguments)]
pub fn first_passage_monte_carlo(
    coeffs: &dyn AveragedCoefficients,
    from: f64,
    to: f64,
    reflect_at: f64,
    dt: f64,
    n_paths: usize,
    t_max: f64,
    seed: u64,
) -> Result<FirstPassageEstimate> {
    let rightward = to > from;
    let ordered = if rightward {
        reflect_at < from && from < to
    } else {
        to < from && from < reflect_at
    };
    if !ordered {
        return Err(EbmError::Config(format!(
            "first passage needs the reflecting boundary {reflect_at} behind {from} away from {to}"
        )));
    }
    if !(dt > 0.0 && t_max > dt && n_paths > 0) {
        return Err(EbmError::Config("first passage needs dt > 0, t_max > dt, n_paths > 0".into()));
    }
    let max_steps = (t_max / dt).ceil() as u64;
    let sd = dt.sqrt();
    let times: Vec<Option<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng::stream(seed, p, Channel::IceLine);
            let mut eta = from;
            for k in 1..=max_steps {
                eta += coeffs.drift(eta) * dt + coeffs.diffusion(eta) * sd * rng::standard_normal(&mut rng);
                if rightward {
                    if eta >= to {
                        return Some(k as f64 * dt);
                    }
                    if eta < reflect_at {
                        eta = 2.0 * reflect_at - eta;
                    }
                } else {
                    if eta <= to {
                        return Some(k as f64 * dt);
                    }
                    if eta > reflect_at {
                        eta = 2.0 * reflect_at - eta;
                    }
                }
            }
            None
        })
        .collect();
    let t_cap = max_steps as f64 * dt;
    let values: Vec<f64> = times.iter().map(|t| t.unwrap_or(t_cap)).collect();
    let s = Summary::of(&values);
    let n_hit = times.iter().flatten().count();
    Ok(FirstPassageEstimate {
        from,
        to,
        reflect_at,
        n_paths,
        n_hit,
        n_censored: n_paths - n_hit,
        mean: s.mean,
        se: s.se_mean,
        t_max: t_cap,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{mean_first_passage, AveragedModel, FnCoefficients};

    fn cfg(horizon: f64, dt: f64) -> RunConfig {
        RunConfig {
            epsilon: 1.0,
            horizon,
            dt: Some(dt),
            eta0: 0.9,
            record_stride: 1,
            ..RunConfig::default()
        }
    }

    #[test]
    fn linear_relaxation_without_noise() {
        let c = FnCoefficients {
            drift: |e: f64| -(e - 0.5),
            diffusion: |_| 0.0,
        };
        let p = ModelParams::default();
        let path = run_averaged(&c, &p, &cfg(5.0, 1e-3), None, 0).unwrap();
        let end = *path.eta.last().unwrap();
        let exact = 0.5 + 0.4 * (-5.0f64).exp();
        assert!((end - exact).abs() < 1e-4, "{end} vs {exact}");
    }

    #[test]
    fn shared_increments_reproduce_reference_scheme() {
        let c = FnCoefficients {
            drift: |e: f64| 0.3 - e,
            diffusion: |e: f64| e * (1.0 - e),
        };
        let p = ModelParams::default();
        let run = cfg(1.0, 0.01);
        let (n, dt) = run.step_plan(&p);
        let w = rng::brownian_increments(&mut rng::stream(9, 0, Channel::Sampling), n, dt);
        let path = run_averaged(&c, &p, &run, Some(&w), 0).unwrap();
        let mut eta: f64 = 0.9;
        for (k, dw) in w.iter().enumerate() {
            eta = (eta + (0.3 - eta) * dt + eta * (1.0 - eta) * dw).clamp(0.0, 1.0);
            assert_eq!(path.eta[k + 1], eta);
        }
        assert!(run_averaged(&c, &p, &run, Some(&w[1..]), 0).is_err());
        assert_eq!(run_averaged(&c, &p, &run, None, 4).unwrap(), run_averaged(&c, &p, &run, None, 4).unwrap());
    }

    #[test]
    fn reflected_brownian_first_passage() {
        let c = FnCoefficients {
            drift: |_| 0.0,
            diffusion: |_| 1.0,
        };
        let est = first_passage_monte_carlo(&c, 0.25, 0.75, 0.001, 1e-4, 2000, 50.0, 5).unwrap();
        assert_eq!(est.n_censored, 0);
        let exact = 0.749f64.powi(2) - 0.249f64.powi(2);
        // discrete monitoring overshoots by O(√dt)
        assert!((est.mean - exact).abs() < 3.0 * est.se + 0.02, "{est:?}");
        assert!(first_passage_monte_carlo(&c, 0.25, 0.75, 0.5, 1e-3, 10, 1.0, 0).is_err());
    }

    #[test]
    fn synthetic_double_well_passage_matches_quadrature() {
        let f = |e: f64| -4.0 * (e - 0.3) * (e - 0.5) * (e - 0.7);
        let s = |_: f64| 0.15;
        let m = AveragedModel::from_fns(0.01, 0.99, 2001, f, s).unwrap();
        let q = mean_first_passage(&m, 0.3, 0.7).unwrap();
        let mc = first_passage_monte_carlo(&m, 0.3, 0.7, 0.01, 2e-3, 2000, 200.0, 11).unwrap();
        let t = q.time.unwrap();
        assert_eq!(mc.n_censored, 0);
        assert!((mc.mean - t).abs() < 0.1 * t, "quadrature {t}, monte carlo {mc:?}");
    }
}
