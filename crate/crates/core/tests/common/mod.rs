use icebm::coefficients::drift_iceline;
use icebm::frozen::stationary_law;
use icebm::{ModelParams, NoiseSpec};

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// E f(η, ξ) under the stationary law by adaptive Simpson on mean ± 8 sd.
pub fn drift_by_adaptive_quadrature(p: &ModelParams, eta: f64) -> f64 {
    let law = stationary_law(p, &NoiseSpec::standard(), eta).unwrap();
    let sd = law.var_xi.sqrt();
    let dens = |x: f64| {
        (-(x - law.mean_xi).powi(2) / (2.0 * law.var_xi)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let g = |x: f64| drift_iceline(p, eta, x).unwrap() * dens(x);
    adaptive_simpson(&g, law.mean_xi - 8.0 * sd, law.mean_xi + 8.0 * sd, 1e-13)
}
