use rql::analytics::quad::integrate_semi_infinite;
use rql::analytics::AnalyticLaw;
use rql::model::Parameters;
use rql::stats::ks_distance;
use rql::tau::busy_period_samples;

fn law(lambda: f64, mu: f64) -> AnalyticLaw {
    AnalyticLaw::new(Parameters::new(lambda, mu, f64::INFINITY).unwrap()).unwrap()
}

#[test]
fn supercritical_busy_period_is_finite_with_probability_one_over_rho() {
    let p = Parameters::new(2.0, 1.0, f64::INFINITY).unwrap();
    let n = 100_000u64;
    // the walk S^Y - S^X drifts up by 1/2 per step: after 2000 steps it sits
    // about 20 standard deviations above zero
    let samples = busy_period_samples(&p, 31, n, 2_000).unwrap();
    let finite = samples.iter().filter(|b| b.is_finite()).count() as f64 / n as f64;
    let se = (0.25 / n as f64).sqrt();
    assert!((finite - 0.5).abs() < 4.0 * se, "finite fraction {finite}");
    let series = law(2.0, 1.0).busy_cdf_series(f64::INFINITY).unwrap();
    assert!((series - 0.5).abs() < 1e-12);
}

#[test]
fn subcritical_busy_period_matches_series_law() {
    let p = Parameters::new(1.0, 2.0, f64::INFINITY).unwrap();
    let samples = busy_period_samples(&p, 32, 100_000, 10_000_000).unwrap();
    assert!(samples.iter().all(|b| b.is_finite()));
    let durations: Vec<f64> = samples.iter().map(|b| b.duration).collect();
    let l = law(1.0, 2.0);
    let ks = ks_distance(&durations, &|x: f64| l.busy_cdf_series(x).unwrap());
    assert!(ks < 0.01, "ks {ks}");
    // E[D] = 1 / (mu - lambda)
    let mean = durations.iter().sum::<f64>() / durations.len() as f64;
    assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
}

#[test]
fn density_moments() {
    // int t f_rho = 1 / (mu - lambda) below criticality (and 1/(lambda-mu)
    // for the conditioned law above it, by swapping roles)
    for (lambda, mu) in [(1.0, 2.0), (2.0, 1.0), (0.3, 1.7)] {
        let l = law(lambda, mu);
        let m1 = integrate_semi_infinite(|t| t * l.busy_density(t), 1e-11).unwrap().value;
        let expected = 1.0 / (mu - lambda).abs();
        assert!((m1 - expected).abs() < 1e-8, "({lambda}, {mu}): {m1}");
    }
}

#[test]
fn density_at_origin() {
    for (lambda, mu) in [(1.0, 2.0), (2.0, 1.0), (1.0, 1.0)] {
        let l = law(lambda, mu);
        let f0 = l.busy_density(0.0);
        assert!((f0 - f64::max(lambda, mu)).abs() < 1e-15);
        assert!((l.busy_density(1e-9) - f0).abs() < 1e-7);
    }
}
