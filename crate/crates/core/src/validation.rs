//! Numerical check of the structural assumptions behind the confinement,
//! moment and averaging results. Failures are report entries, not errors.

use serde::{Deserialize, Serialize};

use crate::coefficients::raw;
use crate::strategy::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub id: String,
    pub passed: bool,
    /// Positive when satisfied with room to spare; the meaning is given in `detail`.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
    /// `f(0, ·)` and `f(1, ·)` at `X = X_critical`.
    pub drift_at_equator: f64,
    pub drift_at_pole: f64,
    /// `A − B`, the A7 margin for Lebesgue `μ`.
    pub a_minus_b: f64,
    /// Auxiliary `κ'` used for the A7 inequality check.
    pub kappa_prime: f64,
    /// Grid estimate of `‖h‖_∞`.
    pub forcing_sup: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id.as_str())
            .collect()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

const FORCING_GRID: usize = 201;

/// Validate with the default `κ' = b / (2R)`.
pub fn validate_assumptions(model: &Model) -> ValidationReport {
    let p = &model.params;
    validate_assumptions_with(model, p.b / (2.0 * p.heat_capacity))
}

pub fn validate_assumptions_with(model: &Model, kappa_prime: f64) -> ValidationReport {
    let p = &model.params;
    let drift = &model.drift;
    let sigma = &model.noise.iceline;
    let field = &model.noise.field;
    let a = p.a_rate();
    let b = p.b_rate();
    let mut checks = Vec::new();

    checks.push(AssumptionCheck {
        id: "A3".into(),
        passed: true,
        margin: 1.0,
        detail: "mu is Lebesgue measure on [0,1]: total variation M = 1, density bound C_mu = 1".into(),
    });

    // A4 on an (X, Z) grid
    let temps: Vec<f64> = linspace(-200.0, 200.0, 401).collect();
    let means: Vec<f64> = if drift.depends_on_mean_temperature() || sigma.depends_on_fast() {
        linspace(-200.0, 200.0, 41).collect()
    } else {
        vec![0.0]
    };
    let mut min_f0 = f64::INFINITY;
    let mut max_f1 = f64::NEG_INFINITY;
    let mut max_sigma_boundary = 0.0f64;
    for &t in &temps {
        for &z in &means {
            min_f0 = min_f0.min(drift.value(p, 0.0, t, z));
            max_f1 = max_f1.max(drift.value(p, 1.0, t, z));
            max_sigma_boundary = max_sigma_boundary
                .max(sigma.amplitude(0.0, t, z).abs())
                .max(sigma.amplitude(1.0, t, z).abs());
        }
    }
    let a4_drift = min_f0 >= 0.0 && max_f1 <= 0.0;
    let a4_sigma = max_sigma_boundary == 0.0;
    checks.push(AssumptionCheck {
        id: "A4".into(),
        passed: a4_drift && a4_sigma,
        margin: if a4_sigma { min_f0.min(-max_f1) } else { -max_sigma_boundary },
        detail: format!(
            "min f(0,X,Z) = {min_f0:.6}, max f(1,X,Z) = {max_f1:.6}, max |sigma| at boundaries = {max_sigma_boundary:.3e}"
        ),
    });

    // A5 and the forcing sup-norm on the same (x, eta) grid
    let mut sup_sigma = 0.0f64;
    let mut sup_h = 0.0f64;
    for x in linspace(0.0, 1.0, FORCING_GRID) {
        for eta in linspace(0.0, 1.0, FORCING_GRID) {
            sup_sigma = sup_sigma.max(field.amplitude(x, eta).abs());
            sup_h = sup_h.max(raw::forcing(p, x, eta).abs());
        }
    }
    checks.push(AssumptionCheck {
        id: "A5".into(),
        passed: sup_sigma.is_finite(),
        margin: if sup_sigma.is_finite() { 1.0 } else { -1.0 },
        detail: format!("sup |Sigma| on a {FORCING_GRID}x{FORCING_GRID} grid = {sup_sigma:.6}"),
    });

    // A6: F_X = -A and the field noise does not depend on X
    checks.push(AssumptionCheck {
        id: "A6".into(),
        passed: a > 0.0,
        margin: a,
        detail: format!("F_X + 3/2 |Sigma_X|^2 = -A = {:.6}", -a),
    });

    // A7: A > B for Lebesgue mu, plus the pointwise inequality with A - kappa'
    let a_minus_b = a - b;
    let mut a7_ok = a_minus_b > 0.0 && kappa_prime > 0.0 && a - kappa_prime > b;
    let mut worst = f64::INFINITY;
    if kappa_prime > 0.0 {
        let c_const = sup_h * sup_h / (4.0 * kappa_prime);
        for x in linspace(0.0, 1.0, 21) {
            for eta in linspace(0.0, 1.0, 21) {
                for t in linspace(-500.0, 500.0, 201) {
                    for z in [-100.0, 0.0, 100.0] {
                        let lhs = t * raw::drift_field(p, x, eta, t, z);
                        let rhs = -(a - kappa_prime) * t * t + b * t * z + c_const;
                        worst = worst.min(rhs - lhs);
                    }
                }
            }
        }
        a7_ok &= worst >= -1e-9 * c_const.max(1.0);
    }
    checks.push(AssumptionCheck {
        id: "A7".into(),
        passed: a7_ok,
        margin: a_minus_b,
        detail: format!(
            "A - B = {a_minus_b:.6}; with kappa' = {kappa_prime:.6}: A - kappa' - B = {:.6}, min slack of XF <= -(A-kappa')X^2 + BXZ + C on grid = {worst:.3e}",
            a - kappa_prime - b
        ),
    });

    ValidationReport {
        checks,
        drift_at_equator: drift.value(p, 0.0, p.x_critical, 0.0),
        drift_at_pole: drift.value(p, 1.0, p.x_critical, 0.0),
        a_minus_b,
        kappa_prime,
        forcing_sup: sup_h,
    }
}
