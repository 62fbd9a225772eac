mod common;

use icebm::averaging::*;
use icebm::coefficients::drift_iceline;
use icebm::frozen::stationary_law;
use icebm::rng::{self, Channel};
use icebm::simulator::first_passage_monte_carlo;
use icebm::stats::Summary;
use icebm::{Model, ModelParams};

#[test]
fn hermite_matches_adaptive_quadrature_on_a_grid() {
    let model = Model::standard();
    for i in 0..=20 {
        let eta = i as f64 / 20.0;
        let gh = averaged_drift(&model, eta, DEFAULT_HERMITE_ORDER).unwrap();
        let aq = common::drift_by_adaptive_quadrature(&model.params, eta);
        assert!((gh - aq).abs() < 1e-8, "eta={eta}: {gh} vs {aq}");
    }
}

#[test]
fn hermite_matches_monte_carlo_at_midpoint() {
    let model = Model::standard();
    let law = stationary_law(&model.params, &model.noise, 0.5).unwrap();
    let mut r = rng::stream(17, 0, Channel::Sampling);
    let draws: Vec<f64> = (0..200_000)
        .map(|_| {
            let xi = law.mean_xi + law.var_xi.sqrt() * rng::standard_normal(&mut r);
            drift_iceline(&model.params, 0.5, xi).unwrap()
        })
        .collect();
    let s = Summary::of(&draws);
    let gh = averaged_drift(&model, 0.5, 64).unwrap();
    assert!((s.mean - gh).abs() < 3.0 * s.se_mean, "{} ± {} vs {gh}", s.mean, s.se_mean);
}

#[test]
fn boundary_values_for_every_solar_constant() {
    for q in [300.0, 327.0, 343.0, 350.0, 380.0] {
        let model = Model::new(ModelParams::default().with_solar(q));
        assert!((averaged_drift(&model, 0.0, 64).unwrap() - 0.05).abs() < 1e-14);
        assert!((averaged_drift(&model, 1.0, 64).unwrap() + 0.05).abs() < 1e-14);
    }
}

#[test]
fn bistability_at_present_climate_only() {
    let count = |q: f64| {
        let m = tabulate(&Model::new(ModelParams::default().with_solar(q)), 4001, DEFAULT_DELTA, 64).unwrap();
        find_equilibria(&m).iter().filter(|e| e.stable).count()
    };
    assert_eq!(count(343.0), 2);
    let m = tabulate(&Model::standard(), 4001, DEFAULT_DELTA, 64).unwrap();
    let eq = find_equilibria(&m);
    let stab: Vec<bool> = eq.iter().map(|e| e.stable).collect();
    assert_eq!(stab, [true, false, true]);
    assert!(eq.iter().all(|e| e.residual < ROOT_TOLERANCE));
}

#[test]
fn ornstein_uhlenbeck_density() {
    let (theta, s) = (2.0, 0.2);
    let m = AveragedModel::from_fns(0.001, 0.999, 20001, |e| -theta * (e - 0.5), |_| s).unwrap();
    let d = stationary_density(&m, 0.5).unwrap();
    let var = s * s / (2.0 * theta);
    let gauss: Vec<f64> = m.eta_grid.iter().map(|e| (-(e - 0.5).powi(2) / (2.0 * var)).exp()).collect();
    let z = icebm::quadrature::trapezoid(&m.eta_grid, &gauss);
    let worst = d
        .density
        .iter()
        .zip(&gauss)
        .map(|(a, g)| (a - g / z).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    let total = icebm::quadrature::trapezoid(&m.eta_grid, &d.density);
    assert!((total - 1.0).abs() < 1e-6);
}

#[test]
fn standard_density_is_normalized_and_bimodal() {
    let m = tabulate(&Model::standard(), 20001, DEFAULT_DELTA, 64).unwrap().analyze().unwrap();
    let d = m.density.as_ref().unwrap();
    assert!(d.iter().all(|v| *v >= 0.0 && v.is_finite()));
    assert!((icebm::quadrature::trapezoid(&m.eta_grid, d) - 1.0).abs() < 1e-6);
    assert_eq!(m.density_modes().len(), 2);
}

/// Drift, noise level, start, target and reflecting boundary.
type PassageCase = (Box<dyn Fn(f64) -> f64>, f64, f64, f64, f64);

#[test]
fn passage_times_agree_with_monte_carlo_for_synthetic_pairs() {
    let cases: Vec<PassageCase> = vec![
        (Box::new(|_| 0.0), 0.5, 0.3, 0.7, 0.01),
        (Box::new(|e| -(e - 0.5)), 0.3, 0.4, 0.6, 0.01),
        (Box::new(|e| -4.0 * (e - 0.3) * (e - 0.5) * (e - 0.7)), 0.15, 0.7, 0.3, 0.99),
    ];
    for (k, (f, s, from, to, reflect)) in cases.into_iter().enumerate() {
        let m = AveragedModel::from_fns(0.01, 0.99, 4001, &f, |_| s).unwrap();
        let q = mean_first_passage(&m, from, to).unwrap();
        assert_eq!(q.reflecting_at, reflect);
        let t = q.time.unwrap();
        let mc = first_passage_monte_carlo(&m, from, to, reflect, 1e-4, 4000, 100.0 * t, 23 + k as u64).unwrap();
        assert_eq!(mc.n_censored, 0);
        assert!((mc.mean - t).abs() < 3.0 * mc.se, "case {k}: quadrature {t}, monte carlo {} ± {}", mc.mean, mc.se);
    }
}

#[test]
fn tabulation_is_lipschitz_sane_across_grids() {
    let coarse = tabulate(&Model::standard(), 1001, DEFAULT_DELTA, 64).unwrap().max_difference_quotient();
    let fine = tabulate(&Model::standard(), 8001, DEFAULT_DELTA, 64).unwrap().max_difference_quotient();
    assert!(coarse.is_finite() && fine.is_finite());
    assert!(fine < 2.0 * coarse.max(1.0));
}
