use catmap_core::monte_carlo::*;
use catmap_core::torus::{CatSystem, HarmonicForce};
use proptest::prelude::*;

fn config(eps: f64, force: HarmonicForce) -> SimConfig {
    SimConfig {
        system: CatSystem::new(eps, force),
        t: 200_000,
        tau: 100,
        runs: 8,
        bin_width: 0.05,
        seed: 3,
        workers: 0,
        normalization: Normalization::PerRun,
    }
}

#[test]
fn mean_contraction_follows_the_second_order_mean() {
    // ⟨σ⟩₊ = ε² + 1.5ε⁴ + … for the single harmonic
    let eps = 0.1;
    let stats = simulate(&config(eps, HarmonicForce::single())).unwrap();
    let bars: Vec<f64> = stats.iter().map(|s| s.sigma_bar).collect();
    let mean = bars.iter().sum::<f64>() / bars.len() as f64;
    let sd =
        (bars.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (bars.len() as f64 - 1.0)).sqrt();
    let expected = eps * eps + 1.5 * eps.powi(4);
    assert!(
        (mean - expected).abs() < 4.0 * sd / (bars.len() as f64).sqrt() + 1e-4,
        "{mean} vs {expected}"
    );
    assert!(stats.iter().all(|s| s.fold_steps == 0));
}

#[test]
fn pooled_and_per_run_normalizations_agree_closely() {
    let mut a = config(0.1, HarmonicForce::single());
    a.t = 50_000;
    let mut b = a.clone();
    b.normalization = Normalization::Pooled;
    let sa = simulate(&a).unwrap();
    let sb = simulate(&b).unwrap();
    let pooled = sb[0].normalizer;
    assert!(sb.iter().all(|s| s.normalizer == pooled));
    for (x, y) in sa.iter().zip(&sb) {
        assert_eq!(x.sigma_bar, y.sigma_bar);
        assert!((x.normalizer - pooled).abs() < 0.2 * pooled);
    }
}

#[test]
fn folds_are_counted_for_the_strong_two_harmonic_force() {
    let mut c = config(0.3, HarmonicForce::double());
    c.t = 20_000;
    let stats = simulate(&c).unwrap();
    assert!(stats.iter().any(|s| s.fold_steps > 0));
}

#[test]
fn ratio_curve_is_consistent_with_one_at_small_scale() {
    let stats = simulate(&config(0.05, HarmonicForce::single())).unwrap();
    let curve = ratio_curve(&stats, 100.0, 0.05, ErrorModel::RunToRun).unwrap();
    let fit = slope_and_a(&curve, 2.0).unwrap();
    assert!((fit.slope - 1.0).abs() < 4.0 * fit.stderr + 0.05, "{fit:?}");
    let binomial = ratio_curve(&stats, 100.0, 0.05, ErrorModel::Binomial).unwrap();
    assert_eq!(binomial.points.len(), curve.points.len());
}

#[test]
fn insufficient_bins_are_reported() {
    let mut c = config(0.05, HarmonicForce::single());
    c.t = 1_000;
    c.runs = 2;
    let stats = simulate(&c).unwrap();
    match ratio_curve(&stats, 100.0, 0.05, ErrorModel::RunToRun) {
        Ok(curve) => assert!(slope_and_a(&curve, 0.1).is_err()),
        Err(e) => assert!(matches!(e, catmap_core::CatError::InsufficientData(_))),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn window_models_recover_exact_parameters(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -5.0f64..5.0) {
        let tau = 20.0;
        let eps = [0.1, 0.15, 0.2, 0.25, 0.3];
        let data: Vec<(f64, f64, f64)> = eps
            .iter()
            .map(|&e| (e, a * e + b * e * e + c / (tau * e), 0.01))
            .collect();
        let (_, f2) = fit_models(&data, tau).unwrap();
        prop_assert!((f2.params[0] - a).abs() < 1e-6);
        prop_assert!((f2.params[1] - b).abs() < 1e-6);
        prop_assert!((f2.params[2] - c).abs() < 1e-6);
        for &e in &eps {
            prop_assert!((f2.evaluate(e) - (a * e + b * e * e + c / (tau * e))).abs() < 1e-9);
        }
    }
}
