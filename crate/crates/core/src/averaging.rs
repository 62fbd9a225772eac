//! The averaged ice-line equation: coefficients `f̂`, `σ̂²` as expectations
//! under the frozen stationary law, their tabulation on an `η` grid, the
//! equilibria of `f̂`, the stationary density and mean first-passage times.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, EbmError, Result};
use crate::frozen::{stationary_law, GaussianStationary};
use crate::quadrature::{cumulative_log_trapezoid, cumulative_trapezoid, log_add_exp, trapezoid, GaussHermite};
use crate::strategy::Model;

pub const DEFAULT_HERMITE_ORDER: usize = 64;
pub const MIN_HERMITE_ORDER: usize = 8;
/// Distance kept from the degenerate boundaries `η ∈ {0, 1}`.
pub const DEFAULT_DELTA: f64 = 1e-4;
pub const MIN_GRID: usize = 51;
/// Residual target for refined equilibria.
pub const ROOT_TOLERANCE: f64 = 1e-10;

fn check_order(order: usize) -> Result<()> {
    if order < MIN_HERMITE_ORDER {
        Err(EbmError::QuadratureOrder(order))
    } else {
        Ok(())
    }
}

/// `E g(ξ, ζ)` for `(ξ, ζ)` distributed by the stationary law, via tensor
/// Gauss–Hermite on the Cholesky factor.
pub fn bivariate_expectation(law: &GaussianStationary, order: usize, g: impl Fn(f64, f64) -> f64) -> f64 {
    let gh = GaussHermite::cached(order);
    let sx = law.var_xi.max(0.0).sqrt();
    let (l21, l22) = if sx > 0.0 {
        let l21 = law.cov_xi_zeta / sx;
        (l21, (law.var_zeta - l21 * l21).max(0.0).sqrt())
    } else {
        (0.0, law.var_zeta.max(0.0).sqrt())
    };
    let mut acc = 0.0;
    for (z1, w1) in gh.nodes().iter().zip(gh.weights()) {
        let xi = law.mean_xi + sx * z1;
        let zeta_base = law.mean_zeta + l21 * z1;
        let inner: f64 = gh
            .nodes()
            .iter()
            .zip(gh.weights())
            .map(|(z2, w2)| w2 * g(xi, zeta_base + l22 * z2))
            .sum();
        acc += w1 * inner;
    }
    acc
}

/// `f̂(η) = E f(η, ξ_∞, ζ_∞)` under the frozen stationary law.
pub fn averaged_drift(model: &Model, eta: f64, order: usize) -> Result<f64> {
    check_order(order)?;
    check_unit("eta", eta)?;
    let law = stationary_law(&model.params, &model.noise, eta)?;
    Ok(averaged_drift_with_law(model, eta, &law, order))
}

fn averaged_drift_with_law(model: &Model, eta: f64, law: &GaussianStationary, order: usize) -> f64 {
    let p = &model.params;
    let f = &model.drift;
    if f.depends_on_mean_temperature() {
        return bivariate_expectation(law, order, |xi, zeta| f.value(p, eta, xi, zeta));
    }
    if !f.depends_on_temperature() || law.var_xi <= 0.0 {
        return f.value(p, eta, law.mean_xi, law.mean_zeta);
    }
    GaussHermite::cached(order).expectation(law.mean_xi, law.var_xi, |xi| f.value(p, eta, xi, law.mean_zeta))
}

/// `σ̂²(η) = E σ²(η, ξ_∞, ζ_∞)`; exact `σ(η)²` when `σ` ignores the fast variables.
pub fn averaged_diffusion_sq(model: &Model, eta: f64) -> Result<f64> {
    check_unit("eta", eta)?;
    let s = &model.noise.iceline;
    if !s.depends_on_fast() {
        let v = s.amplitude(eta, 0.0, 0.0);
        return Ok(v * v);
    }
    let law = stationary_law(&model.params, &model.noise, eta)?;
    Ok(bivariate_expectation(&law, DEFAULT_HERMITE_ORDER, |xi, zeta| {
        let v = s.amplitude(eta, xi, zeta);
        v * v
    }))
}

/// Drift and diffusion of a scalar ice-line SDE `dη = a(η) dt + b(η) dW`.
pub trait AveragedCoefficients: Send + Sync {
    fn drift(&self, eta: f64) -> f64;
    fn diffusion(&self, eta: f64) -> f64;
}

/// Coefficients given by two closures.
pub struct FnCoefficients<F, G> {
    pub drift: F,
    pub diffusion: G,
}

impl<F, G> AveragedCoefficients for FnCoefficients<F, G>
where
    F: Fn(f64) -> f64 + Send + Sync,
    G: Fn(f64) -> f64 + Send + Sync,
{
    fn drift(&self, eta: f64) -> f64 {
        (self.drift)(eta)
    }

    fn diffusion(&self, eta: f64) -> f64 {
        (self.diffusion)(eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub location: f64,
    pub stable: bool,
    /// Centered difference slope of the tabulated `f̂` at the root.
    pub slope: f64,
    /// `|f̂|` at the refined location.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageTime {
    pub from: f64,
    pub to: f64,
    /// Natural log of the mean first-passage time (finite even when the time overflows).
    pub log_time: f64,
    /// `None` when the time exceeds the `f64` range.
    pub time: Option<f64>,
    /// Location of the reflecting boundary behind `from`.
    pub reflecting_at: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
struct ExactDrift {
    model: Model,
    order: usize,
}

/// Tabulated averaged coefficients plus everything derived from them.
#[derive(Debug, Clone)]
pub struct AveragedModel {
    pub eta_grid: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub equilibria: Vec<Equilibrium>,
    /// Normalized density (may underflow to 0 far from the dominant mode).
    pub density: Option<Vec<f64>>,
    /// Natural log of the normalized density.
    pub log_density: Option<Vec<f64>>,
    pub mfpt: Option<Vec<PassageTime>>,
    pub delta: f64,
    uniform: Option<(f64, f64)>,
    exact: Option<Arc<ExactDrift>>,
}

/// Fills `f̂` and `σ̂` on a uniform grid of `n_grid` points over `[δ, 1 − δ]`.
pub fn tabulate(model: &Model, n_grid: usize, delta: f64, order: usize) -> Result<AveragedModel> {
    check_order(order)?;
    if n_grid < MIN_GRID {
        return Err(EbmError::Config(format!("n_grid = {n_grid} must be at least {MIN_GRID}")));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(EbmError::Config(format!("delta = {delta} must lie in (0, 0.25)")));
    }
    let h = (1.0 - 2.0 * delta) / (n_grid - 1) as f64;
    let eta_grid: Vec<f64> = (0..n_grid).map(|i| delta + i as f64 * h).collect();
    let rows: Vec<(f64, f64)> = eta_grid
        .par_iter()
        .map(|&eta| {
            let f = averaged_drift(model, eta, order)?;
            let s2 = averaged_diffusion_sq(model, eta)?;
            Ok((f, s2.max(0.0).sqrt()))
        })
        .collect::<Result<_>>()?;
    let (f_hat, sigma_hat) = rows.into_iter().unzip();
    let mut out = AveragedModel::from_table(eta_grid, f_hat, sigma_hat)?;
    out.delta = delta;
    out.uniform = Some((delta, h));
    out.exact = Some(Arc::new(ExactDrift {
        model: model.clone(),
        order,
    }));
    Ok(out)
}

impl AveragedModel {
    /// Model from an arbitrary tabulation (strictly increasing `eta_grid`).
    pub fn from_table(eta_grid: Vec<f64>, f_hat: Vec<f64>, sigma_hat: Vec<f64>) -> Result<Self> {
        if eta_grid.len() < 2 || eta_grid.len() != f_hat.len() || eta_grid.len() != sigma_hat.len() {
            return Err(EbmError::Config("tabulation arrays must have equal length >= 2".into()));
        }
        if eta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EbmError::Config("eta grid must be strictly increasing".into()));
        }
        if f_hat.iter().chain(&sigma_hat).any(|v| !v.is_finite()) {
            return Err(EbmError::NonFinite {
                t: 0.0,
                what: "averaged coefficient table".into(),
            });
        }
        let delta = eta_grid[0];
        Ok(Self {
            eta_grid,
            f_hat,
            sigma_hat,
            equilibria: Vec::new(),
            density: None,
            log_density: None,
            mfpt: None,
            delta,
            uniform: None,
            exact: None,
        })
    }

    /// Synthetic model from closures sampled on a uniform grid over `[lo, hi]`.
    pub fn from_fns(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64, s: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        let mut m = Self::from_table(
            grid.clone(),
            grid.iter().map(|&e| f(e)).collect(),
            grid.iter().map(|&e| s(e)).collect(),
        )?;
        m.uniform = Some((lo, h));
        Ok(m)
    }

    pub fn spacing(&self) -> f64 {
        match self.uniform {
            Some((_, h)) => h,
            None => (self.eta_grid[self.eta_grid.len() - 1] - self.eta_grid[0]) / (self.eta_grid.len() - 1) as f64,
        }
    }

    pub fn lower(&self) -> f64 {
        self.eta_grid[0]
    }

    pub fn upper(&self) -> f64 {
        self.eta_grid[self.eta_grid.len() - 1]
    }

    fn cell(&self, eta: f64) -> (usize, f64) {
        let n = self.eta_grid.len();
        let eta = eta.clamp(self.eta_grid[0], self.eta_grid[n - 1]);
        let i = match self.uniform {
            Some((lo, h)) => (((eta - lo) / h).floor().max(0.0) as usize).min(n - 2),
            None => self.eta_grid.partition_point(|&g| g <= eta).clamp(1, n - 1) - 1,
        };
        let t = (eta - self.eta_grid[i]) / (self.eta_grid[i + 1] - self.eta_grid[i]);
        (i, t)
    }

    fn interp(&self, values: &[f64], eta: f64) -> f64 {
        let (i, t) = self.cell(eta);
        values[i] + t * (values[i + 1] - values[i])
    }

    /// Linear interpolation of `f̂`, constant beyond the grid ends.
    pub fn f_hat_at(&self, eta: f64) -> f64 {
        self.interp(&self.f_hat, eta)
    }

    pub fn sigma_hat_at(&self, eta: f64) -> f64 {
        self.interp(&self.sigma_hat, eta)
    }

    /// `f̂` from the underlying model when available, else the interpolant.
    pub fn f_hat_exact(&self, eta: f64) -> f64 {
        match &self.exact {
            Some(e) => averaged_drift(&e.model, eta, e.order).unwrap_or_else(|_| self.f_hat_at(eta)),
            None => self.f_hat_at(eta),
        }
    }

    /// Largest adjacent difference quotient `|Δf̂| / Δη` of the tabulation.
    pub fn max_difference_quotient(&self) -> f64 {
        self.eta_grid
            .windows(2)
            .zip(self.f_hat.windows(2))
            .map(|(e, f)| ((f[1] - f[0]) / (e[1] - e[0])).abs())
            .fold(0.0, f64::max)
    }

    /// Computes equilibria, density and passage times between stable equilibria.
    pub fn analyze(mut self) -> Result<Self> {
        self.equilibria = find_equilibria(&self);
        let sd = stationary_density(&self, 0.5)?;
        self.density = Some(sd.density);
        self.log_density = Some(sd.log_density);
        let stable: Vec<f64> = self.equilibria.iter().filter(|e| e.stable).map(|e| e.location).collect();
        let mut times = Vec::new();
        for &a in &stable {
            for &b in &stable {
                if a != b {
                    times.push(mean_first_passage(&self, a, b)?);
                }
            }
        }
        self.mfpt = Some(times);
        Ok(self)
    }

    /// Interior local maxima of the stationary log-density.
    pub fn density_modes(&self) -> Vec<f64> {
        let Some(ld) = &self.log_density else {
            return Vec::new();
        };
        (1..ld.len() - 1)
            .filter(|&i| ld[i] > ld[i - 1] && ld[i] >= ld[i + 1])
            .map(|i| self.eta_grid[i])
            .collect()
    }

    /// CSV with columns `eta,f_hat,sigma_hat,density,log_density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let (density, log_density) = match (&self.density, &self.log_density) {
            (Some(d), Some(l)) => (d.clone(), l.clone()),
            _ => {
                let sd = stationary_density(self, 0.5)?;
                (sd.density, sd.log_density)
            }
        };
        writeln!(out, "eta,f_hat,sigma_hat,density,log_density")?;
        for i in 0..self.eta_grid.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.eta_grid[i], self.f_hat[i], self.sigma_hat[i], density[i], log_density[i]
            )?;
        }
        Ok(())
    }
}

impl AveragedCoefficients for AveragedModel {
    fn drift(&self, eta: f64) -> f64 {
        self.f_hat_at(eta)
    }

    fn diffusion(&self, eta: f64) -> f64 {
        self.sigma_hat_at(eta)
    }
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut f_lo = f(lo);
    if f_lo == 0.0 {
        return lo;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < ROOT_TOLERANCE * 1e-3 || mid <= lo || mid >= hi {
            break;
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    mid
}

/// Sign changes of the tabulated `f̂`, refined by bisection (on the exact
/// `f̂` when the model is known) and classified by the centered-difference
/// slope with step equal to the grid spacing.
pub fn find_equilibria(model: &AveragedModel) -> Vec<Equilibrium> {
    let g = &model.eta_grid;
    let f = &model.f_hat;
    let h = model.spacing();
    let mut roots = Vec::new();
    for i in 0..g.len() {
        if f[i] == 0.0 {
            roots.push(g[i]);
        } else if i + 1 < g.len() && f[i + 1] != 0.0 && (f[i] > 0.0) != (f[i + 1] > 0.0) {
            let exact_brackets = model.exact.is_some() && {
                let (a, b) = (model.f_hat_exact(g[i]), model.f_hat_exact(g[i + 1]));
                (a > 0.0) != (b > 0.0)
            };
            let r = if exact_brackets {
                bisect(g[i], g[i + 1], |e| model.f_hat_exact(e))
            } else {
                bisect(g[i], g[i + 1], |e| model.f_hat_at(e))
            };
            roots.push(r);
        }
    }
    roots
        .into_iter()
        .map(|r| {
            let lo = (r - h).max(model.lower());
            let hi = (r + h).min(model.upper());
            let slope = (model.f_hat_at(hi) - model.f_hat_at(lo)) / (hi - lo);
            Equilibrium {
                location: r,
                stable: slope < 0.0,
                slope,
                residual: model.f_hat_exact(r).abs(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDensity {
    pub density: Vec<f64>,
    pub log_density: Vec<f64>,
}

fn potential(model: &AveragedModel) -> Result<Vec<f64>> {
    if let Some(i) = model.sigma_hat.iter().position(|s| !(*s > 0.0)) {
        return Err(EbmError::Divergence(format!(
            "sigma_hat vanishes at eta = {} inside the truncated domain",
            model.eta_grid[i]
        )));
    }
    let integrand: Vec<f64> = model
        .f_hat
        .iter()
        .zip(&model.sigma_hat)
        .map(|(f, s)| 2.0 * f / (s * s))
        .collect();
    Ok(cumulative_trapezoid(&model.eta_grid, &integrand))
}

/// Stationary density `∝ σ̂⁻² exp(2 ∫_anchor^η f̂/σ̂²)` on the tabulation
/// grid, computed in the log domain and normalized by trapezoid.
pub fn stationary_density(model: &AveragedModel, anchor: f64) -> Result<StationaryDensity> {
    let phi = potential(model)?;
    let phi_anchor = model.interp(&phi, anchor);
    let log_p: Vec<f64> = phi
        .iter()
        .zip(&model.sigma_hat)
        .map(|(p, s)| p - phi_anchor - (s * s).ln())
        .collect();
    let max = log_p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(EbmError::Divergence("log-density is not finite".into()));
    }
    let unnorm: Vec<f64> = log_p.iter().map(|l| (l - max).exp()).collect();
    let z = trapezoid(&model.eta_grid, &unnorm);
    if !(z.is_finite() && z > 0.0) {
        return Err(EbmError::Divergence(format!("normalization integral = {z}")));
    }
    let log_z = z.ln();
    Ok(StationaryDensity {
        density: unnorm.iter().map(|u| u / z).collect(),
        log_density: log_p.iter().map(|l| l - max - log_z).collect(),
    })
}

/// Tabulation grid with the extra points inserted, coefficients at the new
/// points taken from the interpolant.
fn augmented(model: &AveragedModel, extra: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut xs = model.eta_grid.clone();
    for &e in extra {
        if let Err(i) = xs.binary_search_by(|g| g.total_cmp(&e)) {
            xs.insert(i, e);
        }
    }
    let f = xs.iter().map(|&e| model.f_hat_at(e)).collect();
    let s = xs.iter().map(|&e| model.sigma_hat_at(e)).collect();
    (xs, f, s)
}

/// Mean time for `dη = f̂ dt + σ̂ dW` started at `from` to reach `to`, with a
/// reflecting boundary at the far grid end behind `from`:
/// `T = ∫ s(y) ∫ 2 / (σ̂² s) dz dy`, `s = exp(−∫ 2f̂/σ̂²)`, by nested trapezoid
/// in the log domain on the grid with `from` and `to` inserted.
pub fn mean_first_passage(model: &AveragedModel, from: f64, to: f64) -> Result<PassageTime> {
    let (lo, hi) = (model.lower(), model.upper());
    for (name, v) in [("from", from), ("to", to)] {
        if !(v >= lo && v <= hi) {
            return Err(EbmError::Domain { name, value: v, lo, hi });
        }
    }
    if from == to {
        return Err(EbmError::Config("mean_first_passage needs from != to".into()));
    }
    let (xs, f, sig) = augmented(model, &[from, to]);
    if let Some(i) = sig.iter().position(|s| !(*s > 0.0)) {
        return Err(EbmError::Divergence(format!("sigma_hat vanishes at eta = {}", xs[i])));
    }
    let integrand: Vec<f64> = f.iter().zip(&sig).map(|(f, s)| 2.0 * f / (s * s)).collect();
    let phi = cumulative_trapezoid(&xs, &integrand);
    let log_speed: Vec<f64> = phi
        .iter()
        .zip(&sig)
        .map(|(p, s)| std::f64::consts::LN_2 + p - (s * s).ln())
        .collect();
    let n = xs.len();
    let rightward = to > from;
    // log of the inner integral from the reflecting end to each node
    let log_inner: Vec<f64> = if rightward {
        cumulative_log_trapezoid(&xs, &log_speed)
    } else {
        let rx: Vec<f64> = xs.iter().rev().map(|x| -x).collect();
        let ry: Vec<f64> = log_speed.iter().rev().copied().collect();
        let mut v = cumulative_log_trapezoid(&rx, &ry);
        v.reverse();
        v
    };
    let log_outer: Vec<f64> = phi.iter().zip(&log_inner).map(|(p, i)| -p + i).collect();
    let locate = |e: f64| xs.binary_search_by(|g| g.total_cmp(&e)).expect("inserted point");
    let (ia, ib) = if rightward { (locate(from), locate(to)) } else { (locate(to), locate(from)) };
    let mut log_t = f64::NEG_INFINITY;
    for k in ia + 1..=ib {
        let cell = (0.5 * (xs[k] - xs[k - 1])).ln() + log_add_exp(log_outer[k - 1], log_outer[k]);
        log_t = log_add_exp(log_t, cell);
    }

    let reflecting_at = if rightward { lo } else { hi };
    let (edge, next) = if rightward { (0, 1) } else { (n - 1, n - 2) };
    let first_cell = (0.5 * (xs[next] - xs[edge]).abs()).ln() + log_add_exp(log_speed[edge], log_speed[next]);
    let edge_share = (first_cell - log_inner[locate(to)]).exp();
    let warning = if !log_t.is_finite() || edge_share > 0.01 {
        Some(format!(
            "inner integral concentrated at the reflecting boundary {reflecting_at} (first-cell share {edge_share:.3e})"
        ))
    } else {
        None
    };
    let time = log_t.exp();
    Ok(PassageTime {
        from,
        to,
        log_time: log_t,
        time: time.is_finite().then_some(time),
        reflecting_at,
        warning,
    })
}
