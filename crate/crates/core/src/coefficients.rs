//! Coefficient functions of the energy-balance model.
//!
//! Latitude comes first in every two-argument function: `h(x, η)`,
//! `Σ(x, η)`. The checked functions validate their domain; the `raw`
//! versions skip the checks for inner loops.

use crate::error::{check_unit, Result};
use crate::params::ModelParams;
use crate::quadrature::integrate_unit;

pub(crate) mod raw {
    use crate::params::ModelParams;

    #[inline]
    pub fn insolation(p: &ModelParams, x: f64) -> f64 {
        1.0 + 0.5 * p.s2 * (3.0 * x * x - 1.0)
    }

    #[inline]
    pub fn albedo(p: &ModelParams, x: f64, eta: f64) -> f64 {
        0.5 * (p.alpha_s + p.alpha_w) + 0.5 * (p.alpha_s - p.alpha_w) * (p.k_albedo * (x - eta)).tanh()
    }

    #[inline]
    pub fn forcing(p: &ModelParams, x: f64, eta: f64) -> f64 {
        (p.solar * insolation(p, x) * (1.0 - albedo(p, x, eta)) - p.a) / p.heat_capacity
    }

    #[inline]
    pub fn drift_field(p: &ModelParams, x: f64, eta: f64, temp: f64, mean_temp: f64) -> f64 {
        -p.a_rate() * temp + p.b_rate() * mean_temp + forcing(p, x, eta)
    }

    #[inline]
    pub fn drift_iceline(p: &ModelParams, eta: f64, temp: f64) -> f64 {
        let k = p.k_drift;
        -p.kappa * (eta - 0.5)
            + k * (1.0 - (-k * eta * (1.0 - eta)).exp()) * ((temp - p.x_critical) / k).atan()
    }
}

/// Insolation distribution `s(x) = 1 + (s₂/2)(3x² − 1)`.
pub fn insolation(p: &ModelParams, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(raw::insolation(p, x))
}

/// Albedo with a smooth `tanh` transition at the ice line.
pub fn albedo(p: &ModelParams, x: f64, eta: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("eta", eta)?;
    Ok(raw::albedo(p, x, eta))
}

/// Net forcing `h(x, η) = (Q s(x)(1 − α(x, η)) − a) / R`.
pub fn forcing_h(p: &ModelParams, x: f64, eta: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("eta", eta)?;
    Ok(raw::forcing(p, x, eta))
}

/// Temperature drift `F(x, η, X, Z) = −A X + B Z + h(x, η)`.
pub fn drift_field(p: &ModelParams, x: f64, eta: f64, temp: f64, mean_temp: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("eta", eta)?;
    Ok(raw::drift_field(p, x, eta, temp, mean_temp))
}

/// Ice-line drift `f(η, X)`; equals `κ/2` at `η = 0` and `−κ/2` at `η = 1`
/// for every temperature.
pub fn drift_iceline(p: &ModelParams, eta: f64, temp: f64) -> Result<f64> {
    check_unit("eta", eta)?;
    Ok(raw::drift_iceline(p, eta, temp))
}

/// `σ(η) = η(1 − η)`.
pub fn sigma_iceline(eta: f64) -> Result<f64> {
    check_unit("eta", eta)?;
    Ok(eta * (1.0 - eta))
}

/// `Σ(x, η) = (2 + η) / (1 + x²)`.
pub fn sigma_field(x: f64, eta: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("eta", eta)?;
    Ok((2.0 + eta) / (1.0 + x * x))
}

/// Clamp to `[0, 1]`.
#[inline]
pub fn truncate01(eta: f64) -> f64 {
    eta.clamp(0.0, 1.0)
}

/// Latitude mean `h̄(η) = ∫₀¹ h(x, η) dx`.
pub fn mean_forcing(p: &ModelParams, eta: f64) -> Result<f64> {
    check_unit("eta", eta)?;
    Ok(integrate_unit(|x| raw::forcing(p, x, eta)))
}
