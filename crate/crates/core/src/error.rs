use thiserror::Error;

pub type Result<T, E = EbmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EbmError {
    #[error("{name} = {value} is outside the domain [{lo}, {hi}]")]
    Domain {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate model: A - B = {margin} must be positive")]
    DegenerateModel { margin: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("unstable step: dt = {dt} exceeds the explicit-Euler bound {bound}")]
    Stability { dt: f64, bound: f64 },

    #[error("Gauss-Hermite order {0} is below the minimum of 8")]
    QuadratureOrder(usize),

    #[error("normalization diverged: {0}")]
    Divergence(String),

    #[error("non-finite state at t = {t}: {what}")]
    NonFinite { t: f64, what: String },

    #[error("unknown {registry} strategy '{name}' (known: {known})")]
    UnknownStrategy {
        registry: &'static str,
        name: String,
        known: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assumption validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EbmError {
    /// Process exit code for the CLI: 2 config, 3 assumption failure, 4 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            EbmError::Config(_)
            | EbmError::Json(_)
            | EbmError::UnknownStrategy { .. }
            | EbmError::InvalidParams(_)
            | EbmError::Domain { .. }
            | EbmError::QuadratureOrder(_) => 2,
            EbmError::Validation(_) | EbmError::DegenerateModel { .. } => 3,
            EbmError::Stability { .. } | EbmError::Divergence(_) | EbmError::NonFinite { .. } => 4,
            EbmError::Io(_) => 4,
        }
    }
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(EbmError::Domain {
            name,
            value,
            lo: 0.0,
            hi: 1.0,
        })
    }
}
