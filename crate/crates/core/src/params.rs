//! Physical and model constants of the energy-balance model.

use serde::{Deserialize, Serialize};

use crate::error::{EbmError, Result};

/// All constants of the model. JSON field names follow the conventional
/// symbols (`R`, `Q`, `s2`, ...); missing fields take the present-climate
/// defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Heat capacity.
    #[serde(rename = "R")]
    pub heat_capacity: f64,
    /// Mean insolation, W/m².
    #[serde(rename = "Q")]
    pub solar: f64,
    /// Second Legendre coefficient of the insolation distribution.
    pub s2: f64,
    pub alpha_w: f64,
    pub alpha_s: f64,
    /// Steepness of the albedo transition at the ice line.
    #[serde(rename = "K_albedo")]
    pub k_albedo: f64,
    /// Outgoing longwave radiation `a + b X`.
    pub a: f64,
    pub b: f64,
    /// Meridional transport coefficient.
    pub c: f64,
    /// Restoring coefficient of the ice-line drift towards 1/2.
    pub kappa: f64,
    /// Saturation constant of the ice-line drift.
    #[serde(rename = "K_drift")]
    pub k_drift: f64,
    /// Critical temperature (°C) at which the ice line is stationary.
    #[serde(rename = "X_critical")]
    pub x_critical: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            heat_capacity: 12.6,
            solar: 343.0,
            s2: -0.482,
            alpha_w: 0.32,
            alpha_s: 0.62,
            k_albedo: 25.0,
            a: 202.0,
            b: 1.9,
            c: 3.04,
            kappa: 0.1,
            k_drift: 25.0,
            x_critical: -10.0,
        }
    }
}

impl ModelParams {
    /// Relaxation rate of the local temperature, `(b + c) / R`.
    pub fn a_rate(&self) -> f64 {
        (self.b + self.c) / self.heat_capacity
    }

    /// Coupling rate to the mean temperature, `c / R`.
    pub fn b_rate(&self) -> f64 {
        self.c / self.heat_capacity
    }

    /// `A - B = b / R`, the relaxation rate of the mean temperature.
    pub fn mean_relaxation_rate(&self) -> f64 {
        self.a_rate() - self.b_rate()
    }

    pub fn with_solar(mut self, q: f64) -> Self {
        self.solar = q;
        self
    }

    /// Checks the sign and ordering constraints on the constants. `b = 0`
    /// (so `A = B`) is allowed here; closed forms reject it later.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("R", self.heat_capacity),
            ("K_albedo", self.k_albedo),
            ("c", self.c),
            ("kappa", self.kappa),
            ("K_drift", self.k_drift),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EbmError::InvalidParams(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.solar >= 0.0 && self.solar.is_finite()) {
            return Err(EbmError::InvalidParams(format!(
                "Q = {} must be non-negative",
                self.solar
            )));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(EbmError::InvalidParams(format!("b = {} must be non-negative", self.b)));
        }
        if !(0.0 < self.alpha_w && self.alpha_w < self.alpha_s && self.alpha_s < 1.0) {
            return Err(EbmError::InvalidParams(format!(
                "albedos must satisfy 0 < alpha_w ({}) < alpha_s ({}) < 1",
                self.alpha_w, self.alpha_s
            )));
        }
        for (name, v) in [("s2", self.s2), ("a", self.a), ("X_critical", self.x_critical)] {
            if !v.is_finite() {
                return Err(EbmError::InvalidParams(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Fails with [`EbmError::DegenerateModel`] unless `A > B`.
    pub fn require_nondegenerate(&self) -> Result<f64> {
        let margin = self.mean_relaxation_rate();
        if margin > 0.0 {
            Ok(margin)
        } else {
            Err(EbmError::DegenerateModel { margin })
        }
    }
}
