//! Temperature fields on the latitude grid, initial-condition profiles and
//! the `W^{1,2}` norm used by the moment diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{EbmError, Result};
use crate::grid::LatitudeGrid;

/// Initial temperature profile `X₀(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialField {
    Constant { value: f64 },
    Affine { intercept: f64, slope: f64 },
    /// Piecewise-linear through `(x, values)`; `x` must span `[0, 1]`.
    Tabulated { x: Vec<f64>, values: Vec<f64> },
}

impl Default for InitialField {
    fn default() -> Self {
        InitialField::Constant { value: 0.0 }
    }
}

impl InitialField {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialField::Constant { value } if !value.is_finite() => {
                Err(EbmError::Config("X0 constant must be finite".into()))
            }
            InitialField::Affine { intercept, slope } if !(intercept.is_finite() && slope.is_finite()) => {
                Err(EbmError::Config("X0 affine coefficients must be finite".into()))
            }
            InitialField::Tabulated { x, values } => {
                if x.len() != values.len() {
                    return Err(EbmError::Config("X0 table: x and values differ in length".into()));
                }
                LatitudeGrid::from_nodes(x.clone())?;
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(EbmError::Config("X0 table values must be finite".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            InitialField::Constant { value } => *value,
            InitialField::Affine { intercept, slope } => intercept + slope * x,
            InitialField::Tabulated { x: xs, values } => {
                let x = x.clamp(0.0, 1.0);
                let k = xs.partition_point(|&n| n <= x).clamp(1, xs.len() - 1) - 1;
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
        }
    }

    pub fn sample(&self, grid: &LatitudeGrid) -> TemperatureField {
        TemperatureField {
            values: grid.nodes().iter().map(|&x| self.value(x)).collect(),
        }
    }
}

/// Nodal temperatures on a latitude grid at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureField {
    pub values: Vec<f64>,
}

impl TemperatureField {
    pub fn mean(&self, grid: &LatitudeGrid) -> f64 {
        grid.integrate(&self.values)
    }

    pub fn at(&self, grid: &LatitudeGrid, x: f64) -> f64 {
        grid.interpolate(&self.values, x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `‖X‖²_{W^{1,2}} = ∫ X² + ∫ (X')²` of the piecewise-linear interpolant,
    /// integrated exactly cell by cell.
    pub fn w12_norm_sq(&self, grid: &LatitudeGrid) -> f64 {
        w12_norm_sq(grid.nodes(), &self.values)
    }
}

pub fn w12_norm_sq(nodes: &[f64], values: &[f64]) -> f64 {
    nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| {
            let h = x[1] - x[0];
            let (a, b) = (v[0], v[1]);
            let l2 = h * (a * a + a * b + b * b) / 3.0;
            let grad = (b - a) / h;
            l2 + h * grad * grad
        })
        .sum()
}

/// Optimal embedding constant `C` in `‖f‖_∞ ≤ C ‖f‖_{W^{1,2}}` on `[0, 1]`,
/// equal to `tanh(1)^{-1/2}`.
pub fn sobolev_constant() -> f64 {
    1.0f64.tanh().powf(-0.5)
}
