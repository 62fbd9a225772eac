//! Interchangeable model ingredients: the field noise amplitude `Σ(x, η)`,
//! the ice-line noise amplitude `σ`, and the ice-line drift `f`. Each family
//! is a trait; concrete variants are registered by name in a
//! [`StrategyRegistry`] and selected from configuration.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::coefficients::raw;
use crate::error::{EbmError, Result};
use crate::params::ModelParams;
use crate::quadrature::integrate_unit;

/// Named strategy plus its options, e.g. `{"name": "standard", "scale": 2.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub name: String,
    #[serde(flatten)]
    pub options: Map<String, Value>,
}

impl StrategyConfig {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            options: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.options.insert(key.to_string(), value.into());
        self
    }

    fn allow_only(&self, keys: &[&str]) -> Result<()> {
        for k in self.options.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(EbmError::Config(format!(
                    "strategy '{}' has no option '{k}' (allowed: {})",
                    self.name,
                    keys.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn number(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.options.get(key) {
            Some(v) => v.as_f64().ok_or_else(|| {
                EbmError::Config(format!("option '{key}' of '{}' must be a number", self.name))
            }),
            None => default.ok_or_else(|| {
                EbmError::Config(format!("strategy '{}' requires option '{key}'", self.name))
            }),
        }
    }

    fn numbers(&self, key: &str) -> Result<Vec<f64>> {
        serde_json::from_value(self.options.get(key).cloned().unwrap_or(Value::Null))
            .map_err(|e| EbmError::Config(format!("option '{key}' of '{}': {e}", self.name)))
    }
}

/// Field noise amplitude `Σ(x, η)` for the single Brownian motion driving
/// the temperature field.
pub trait FieldNoise: Send + Sync + Debug {
    fn amplitude(&self, x: f64, eta: f64) -> f64;

    /// `Σ̄(η) = ∫₀¹ Σ(x, η) dx`.
    fn latitude_mean(&self, eta: f64) -> f64 {
        integrate_unit(|x| self.amplitude(x, eta))
    }

    fn config(&self) -> StrategyConfig;
}

/// Ice-line noise amplitude `σ(η, X, Z)`.
pub trait IceLineNoise: Send + Sync + Debug {
    fn amplitude(&self, eta: f64, temp: f64, mean_temp: f64) -> f64;

    /// Whether the amplitude depends on the fast variables `(X, Z)`.
    fn depends_on_fast(&self) -> bool {
        false
    }

    fn config(&self) -> StrategyConfig;
}

/// Ice-line drift `f(η, X, Z)`.
pub trait IceLineDrift: Send + Sync + Debug {
    fn value(&self, params: &ModelParams, eta: f64, temp: f64, mean_temp: f64) -> f64;

    fn depends_on_temperature(&self) -> bool {
        true
    }

    fn depends_on_mean_temperature(&self) -> bool {
        false
    }

    fn config(&self) -> StrategyConfig;
}

/// `Σ(x, η) = scale · (2 + η) / (1 + x²)`.
#[derive(Debug, Clone, Copy)]
pub struct StandardFieldNoise {
    pub scale: f64,
}

impl FieldNoise for StandardFieldNoise {
    fn amplitude(&self, x: f64, eta: f64) -> f64 {
        self.scale * (2.0 + eta) / (1.0 + x * x)
    }

    fn latitude_mean(&self, eta: f64) -> f64 {
        self.scale * (2.0 + eta) * FRAC_PI_4
    }

    fn config(&self) -> StrategyConfig {
        StrategyConfig::named("standard").with("scale", self.scale)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantFieldNoise {
    pub value: f64,
}

impl FieldNoise for ConstantFieldNoise {
    fn amplitude(&self, _x: f64, _eta: f64) -> f64 {
        self.value
    }

    fn latitude_mean(&self, _eta: f64) -> f64 {
        self.value
    }

    fn config(&self) -> StrategyConfig {
        if self.value == 0.0 {
            StrategyConfig::named("zero")
        } else {
            StrategyConfig::named("constant").with("value", self.value)
        }
    }
}

/// Bilinear interpolation of a user table `values[j][i] = Σ(x_i, η_j)`.
#[derive(Debug, Clone)]
pub struct TabulatedFieldNoise {
    x: Vec<f64>,
    eta: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TabulatedFieldNoise {
    pub fn new(x: Vec<f64>, eta: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let increasing = |v: &[f64]| v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&x) || !increasing(&eta) {
            return Err(EbmError::Config(
                "tabulated noise axes need >= 2 strictly increasing nodes".into(),
            ));
        }
        if values.len() != eta.len() || values.iter().any(|row| row.len() != x.len()) {
            return Err(EbmError::Config("tabulated noise values must be eta.len() x x.len()".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EbmError::Config("tabulated noise values must be finite".into()));
        }
        Ok(Self { x, eta, values })
    }

    fn locate(nodes: &[f64], v: f64) -> (usize, f64) {
        let v = v.clamp(nodes[0], nodes[nodes.len() - 1]);
        let k = nodes.partition_point(|&n| n <= v).clamp(1, nodes.len() - 1) - 1;
        (k, (v - nodes[k]) / (nodes[k + 1] - nodes[k]))
    }
}

impl FieldNoise for TabulatedFieldNoise {
    fn amplitude(&self, x: f64, eta: f64) -> f64 {
        let (i, tx) = Self::locate(&self.x, x);
        let (j, te) = Self::locate(&self.eta, eta);
        let v = &self.values;
        let lo = v[j][i] + tx * (v[j][i + 1] - v[j][i]);
        let hi = v[j + 1][i] + tx * (v[j + 1][i + 1] - v[j + 1][i]);
        lo + te * (hi - lo)
    }

    fn config(&self) -> StrategyConfig {
        StrategyConfig::named("tabulated")
            .with("x", self.x.clone())
            .with("eta", self.eta.clone())
            .with("values", serde_json::to_value(&self.values).unwrap_or(Value::Null))
    }
}

/// `σ(η) = scale · η(1 − η)`.
#[derive(Debug, Clone, Copy)]
pub struct StandardIceLineNoise {
    pub scale: f64,
}

impl IceLineNoise for StandardIceLineNoise {
    fn amplitude(&self, eta: f64, _temp: f64, _mean_temp: f64) -> f64 {
        self.scale * eta * (1.0 - eta)
    }

    fn config(&self) -> StrategyConfig {
        StrategyConfig::named("standard").with("scale", self.scale)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantIceLineNoise {
    pub value: f64,
}

impl IceLineNoise for ConstantIceLineNoise {
    fn amplitude(&self, _eta: f64, _temp: f64, _mean_temp: f64) -> f64 {
        self.value
    }

    fn config(&self) -> StrategyConfig {
        if self.value == 0.0 {
            StrategyConfig::named("zero")
        } else {
            StrategyConfig::named("constant").with("value", self.value)
        }
    }
}

/// `σ(η, X) = scale · X`; exercises the fast-variable averaging path.
#[derive(Debug, Clone, Copy)]
pub struct TemperatureIceLineNoise {
    pub scale: f64,
}

impl IceLineNoise for TemperatureIceLineNoise {
    fn amplitude(&self, _eta: f64, temp: f64, _mean_temp: f64) -> f64 {
        self.scale * temp
    }

    fn depends_on_fast(&self) -> bool {
        true
    }

    fn config(&self) -> StrategyConfig {
        StrategyConfig::named("temperature").with("scale", self.scale)
    }
}

/// `f(η, X) = −κ(η − ½) + K(1 − e^{−Kη(1−η)}) arctan((X − X_c)/K)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct StandardIceLineDrift;

impl IceLineDrift for StandardIceLineDrift {
    fn value(&self, params: &ModelParams, eta: f64, temp: f64, _mean_temp: f64) -> f64 {
        raw::drift_iceline(params, eta, temp)
    }

    fn config(&self) -> StrategyConfig {
        StrategyConfig::named("standard")
    }
}

/// `f(η) = −κ(η − ½)`, independent of temperature.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelaxationIceLineDrift;

impl IceLineDrift for RelaxationIceLineDrift {
    fn value(&self, params: &ModelParams, eta: f64, _temp: f64, _mean_temp: f64) -> f64 {
        -params.kappa * (eta - 0.5)
    }

    fn depends_on_temperature(&self) -> bool {
        false
    }

    fn config(&self) -> StrategyConfig {
        StrategyConfig::named("relaxation")
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroIceLineDrift;

impl IceLineDrift for ZeroIceLineDrift {
    fn value(&self, _params: &ModelParams, _eta: f64, _temp: f64, _mean_temp: f64) -> f64 {
        0.0
    }

    fn depends_on_temperature(&self) -> bool {
        false
    }

    fn config(&self) -> StrategyConfig {
        StrategyConfig::named("zero")
    }
}

type FieldFactory = fn(&StrategyConfig) -> Result<Arc<dyn FieldNoise>>;
type IceLineNoiseFactory = fn(&StrategyConfig) -> Result<Arc<dyn IceLineNoise>>;
type DriftFactory = fn(&StrategyConfig) -> Result<Arc<dyn IceLineDrift>>;

/// Name → factory tables for the three strategy families.
pub struct StrategyRegistry {
    field: BTreeMap<&'static str, FieldFactory>,
    iceline: BTreeMap<&'static str, IceLineNoiseFactory>,
    drift: BTreeMap<&'static str, DriftFactory>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            field: BTreeMap::new(),
            iceline: BTreeMap::new(),
            drift: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register_field("standard", |c| {
            c.allow_only(&["scale"])?;
            Ok(Arc::new(StandardFieldNoise {
                scale: c.number("scale", Some(1.0))?,
            }))
        });
        r.register_field("zero", |c| {
            c.allow_only(&[])?;
            Ok(Arc::new(ConstantFieldNoise { value: 0.0 }))
        });
        r.register_field("constant", |c| {
            c.allow_only(&["value"])?;
            Ok(Arc::new(ConstantFieldNoise {
                value: c.number("value", None)?,
            }))
        });
        r.register_field("tabulated", |c| {
            c.allow_only(&["x", "eta", "values"])?;
            let values: Vec<Vec<f64>> =
                serde_json::from_value(c.options.get("values").cloned().unwrap_or(Value::Null))
                    .map_err(|e| EbmError::Config(format!("option 'values' of 'tabulated': {e}")))?;
            Ok(Arc::new(TabulatedFieldNoise::new(
                c.numbers("x")?,
                c.numbers("eta")?,
                values,
            )?))
        });

        r.register_iceline("standard", |c| {
            c.allow_only(&["scale"])?;
            Ok(Arc::new(StandardIceLineNoise {
                scale: c.number("scale", Some(1.0))?,
            }))
        });
        r.register_iceline("zero", |c| {
            c.allow_only(&[])?;
            Ok(Arc::new(ConstantIceLineNoise { value: 0.0 }))
        });
        r.register_iceline("constant", |c| {
            c.allow_only(&["value"])?;
            Ok(Arc::new(ConstantIceLineNoise {
                value: c.number("value", None)?,
            }))
        });
        r.register_iceline("temperature", |c| {
            c.allow_only(&["scale"])?;
            Ok(Arc::new(TemperatureIceLineNoise {
                scale: c.number("scale", Some(1.0))?,
            }))
        });

        r.register_drift("standard", |c| {
            c.allow_only(&[])?;
            Ok(Arc::new(StandardIceLineDrift))
        });
        r.register_drift("relaxation", |c| {
            c.allow_only(&[])?;
            Ok(Arc::new(RelaxationIceLineDrift))
        });
        r.register_drift("zero", |c| {
            c.allow_only(&[])?;
            Ok(Arc::new(ZeroIceLineDrift))
        });
        r
    }

    pub fn register_field(&mut self, name: &'static str, factory: FieldFactory) {
        self.field.insert(name, factory);
    }

    pub fn register_iceline(&mut self, name: &'static str, factory: IceLineNoiseFactory) {
        self.iceline.insert(name, factory);
    }

    pub fn register_drift(&mut self, name: &'static str, factory: DriftFactory) {
        self.drift.insert(name, factory);
    }

    pub fn field_names(&self) -> Vec<&'static str> {
        self.field.keys().copied().collect()
    }

    pub fn iceline_names(&self) -> Vec<&'static str> {
        self.iceline.keys().copied().collect()
    }

    pub fn drift_names(&self) -> Vec<&'static str> {
        self.drift.keys().copied().collect()
    }

    pub fn build_field(&self, c: &StrategyConfig) -> Result<Arc<dyn FieldNoise>> {
        lookup(&self.field, "field-noise", &c.name)?(c)
    }

    pub fn build_iceline(&self, c: &StrategyConfig) -> Result<Arc<dyn IceLineNoise>> {
        lookup(&self.iceline, "ice-line-noise", &c.name)?(c)
    }

    pub fn build_drift(&self, c: &StrategyConfig) -> Result<Arc<dyn IceLineDrift>> {
        lookup(&self.drift, "ice-line-drift", &c.name)?(c)
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn lookup<F: Copy>(table: &BTreeMap<&'static str, F>, registry: &'static str, name: &str) -> Result<F> {
    table.get(name).copied().ok_or_else(|| EbmError::UnknownStrategy {
        registry,
        name: name.to_string(),
        known: table.keys().copied().collect::<Vec<_>>().join(", "),
    })
}

/// Noise amplitudes of the slow-fast system.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub field: Arc<dyn FieldNoise>,
    pub iceline: Arc<dyn IceLineNoise>,
}

impl NoiseSpec {
    pub fn standard() -> Self {
        Self {
            field: Arc::new(StandardFieldNoise { scale: 1.0 }),
            iceline: Arc::new(StandardIceLineNoise { scale: 1.0 }),
        }
    }

    pub fn silent() -> Self {
        Self {
            field: Arc::new(ConstantFieldNoise { value: 0.0 }),
            iceline: Arc::new(ConstantIceLineNoise { value: 0.0 }),
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::standard()
    }
}

/// Serializable selection of the three strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub field_noise: StrategyConfig,
    pub iceline_noise: StrategyConfig,
    pub drift: StrategyConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            field_noise: StrategyConfig::named("standard"),
            iceline_noise: StrategyConfig::named("standard"),
            drift: StrategyConfig::named("standard"),
        }
    }
}

/// Constants plus the selected strategies: everything the simulators and
/// the averaging routines need.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub noise: NoiseSpec,
    pub drift: Arc<dyn IceLineDrift>,
}

impl Model {
    pub fn standard() -> Self {
        Self::new(ModelParams::default())
    }

    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            noise: NoiseSpec::standard(),
            drift: Arc::new(StandardIceLineDrift),
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_drift(mut self, drift: Arc<dyn IceLineDrift>) -> Self {
        self.drift = drift;
        self
    }

    pub fn from_config(params: ModelParams, cfg: &ModelConfig, registry: &StrategyRegistry) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            noise: NoiseSpec {
                field: registry.build_field(&cfg.field_noise)?,
                iceline: registry.build_iceline(&cfg.iceline_noise)?,
            },
            drift: registry.build_drift(&cfg.drift)?,
        })
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            field_noise: self.noise.field.config(),
            iceline_noise: self.noise.iceline.config(),
            drift: self.drift.config(),
        }
    }
}
