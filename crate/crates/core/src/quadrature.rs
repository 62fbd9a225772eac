//! Quadrature rules: Gauss–Hermite for Gaussian expectations, composite
//! Gauss–Legendre for latitude means, and log-domain trapezoid helpers.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights for `E[g(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the `n`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence, then rescales from weight `e^{-x²}` to the
    /// standard normal density.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt_pi = PI.sqrt();
        let mut nodes: Vec<f64> = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let mut weights: Vec<f64> = w.iter().map(|v| v / sqrt_pi).collect();
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    /// Shared, lazily built rule of order `n`.
    pub fn cached(n: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussHermite::new(n)))
            .clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[g(X)]` for `X ~ N(mean, var)`.
    pub fn expectation(&self, mean: f64, var: f64, g: impl Fn(f64) -> f64) -> f64 {
        let sd = var.max(0.0).sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * g(mean + sd * z))
            .sum()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 1.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(mid + half * z))
            .sum::<f64>()
    }
}

const UNIT_PANELS: usize = 40;

/// `∫₀¹ f(x) dx` by 8-point Gauss–Legendre on 40 equal panels. Accurate to
/// near machine precision for integrands analytic within ~0.05 of the real
/// segment, which covers the steepest albedo transition in use.
pub fn integrate_unit(f: impl Fn(f64) -> f64) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let rule = RULE.get_or_init(|| GaussLegendre::new(8));
    let h = 1.0 / UNIT_PANELS as f64;
    (0..UNIT_PANELS)
        .map(|k| rule.integrate(k as f64 * h, (k + 1) as f64 * h, &f))
        .sum()
}

/// Cumulative trapezoid integral `∫_{x₀}^{x_i} y` at every node.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Cumulative trapezoid of `e^{log_y}` returned as logarithms (first entry −∞).
pub fn cumulative_log_trapezoid(x: &[f64], log_y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = f64::NEG_INFINITY;
    out.push(acc);
    for i in 1..x.len() {
        let cell = (0.5 * (x[i] - x[i - 1])).ln() + log_add_exp(log_y[i - 1], log_y[i]);
        acc = log_add_exp(acc, cell);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for n in [8, 16, 32, 64, 100] {
            let gh = GaussHermite::new(n);
            let m0: f64 = gh.weights().iter().sum();
            assert!((m0 - 1.0).abs() < 1e-13, "n={n} m0={m0}");
            let m2 = gh.expectation(0.0, 1.0, |x| x * x);
            let m4 = gh.expectation(0.0, 1.0, |x| x.powi(4));
            assert!((m2 - 1.0).abs() < 1e-12);
            assert!((m4 - 3.0).abs() < 1e-11);
            assert!(gh.nodes().windows(2).all(|w| w[0] < w[1]));
        }
        let gh = GaussHermite::cached(64);
        // E cos(X) = e^{-1/2} for standard normal
        assert!((gh.expectation(0.0, 1.0, f64::cos) - (-0.5f64).exp()).abs() < 1e-14);
        // shifted and scaled: E[X²] = m² + v
        assert!((gh.expectation(2.0, 3.0, |x| x * x) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_and_unit_integrals() {
        let gl = GaussLegendre::new(10);
        assert!((gl.integrate(0.0, 2.0, |x| x.powi(19)) - 2f64.powi(20) / 20.0).abs() < 1e-8);
        assert!((integrate_unit(|x| 1.0 / (1.0 + x * x)) - PI / 4.0).abs() < 1e-15);
        let tanh_int = integrate_unit(|x| (25.0 * (x - 0.3)).tanh());
        let exact = ((25.0f64 * 0.7).cosh().ln() - (25.0f64 * 0.3).cosh().ln()) / 25.0;
        assert!((tanh_int - exact).abs() < 1e-13, "{tanh_int} vs {exact}");
    }

    #[test]
    fn log_trapezoid_matches_linear() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| (2.0 * v).exp()).collect();
        let lin = cumulative_trapezoid(&x, &y);
        let lg = cumulative_log_trapezoid(&x, &y.iter().map(|v| v.ln()).collect::<Vec<_>>());
        for (a, b) in lin.iter().zip(&lg).skip(1) {
            assert!((a.ln() - b).abs() < 1e-13);
        }
        assert!((trapezoid(&x, &y) - lin[10]).abs() < 1e-13);
    }
}
