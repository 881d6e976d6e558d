//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use rql::analytics::bessel::{bessel_i1, bessel_i1_with, DEFAULT_SWITCH_POINT};
use rql::analytics::quad::integrate;
use rql::analytics::{chain_first_return, renewal_iterate, AnalyticLaw, ChainSpec, LimitingLaw};
use rql::model::{Parameters, Streams};
use rql::sim::{first_zero_wait_index, served_waits, simulate, zero_wait_estimate};
use rql::stats::{classify_tail, default_tail_window, fit_tail, EcdfView, TailKind, DEFAULT_FIT_POINTS};
use rql::tau::{
    block_event, estimate_m, p0_closed_form, tau_by_index_sets, EstimateOptions, ReturnLawEstimate, TauOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn params(lambda: f64, mu: f64, deadline: f64) -> Parameters {
    Parameters::new(lambda, mu, deadline).unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances: Vec<(Parameters, u64)> = (0..10_000)
        .map(|_| {
            let p = params(
                uniform(&mut rng, 0.2, 3.0),
                uniform(&mut rng, 0.2, 3.0),
                uniform(&mut rng, 0.1, 3.0),
            );
            (p, rng.next_u64())
        })
        .collect();
    let mismatches: Vec<String> = instances
        .par_iter()
        .filter_map(|&(p, seed)| {
            let mut a = Streams::for_replication(&p, seed, 0, 64, 64).unwrap();
            let mut b = a.clone();
            let sim = first_zero_wait_index(p, &mut a, u64::MAX).ok();
            let idx = tau_by_index_sets(&mut b, p.deadline, &TauOptions::default())
                .ok()
                .and_then(|r| r.tau);
            (sim.map(|n| n as usize) != idx).then(|| format!("{p:?} seed {seed}: {sim:?} vs {idx:?}"))
        })
        .collect();
    let agree = instances.len() - mismatches.len();
    let mut detail = format!("{agree}/{} instances agree", instances.len());
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; first mismatch {first}"));
    }
    outcome(mismatches.is_empty(), detail)
}

fn p0_frequency() -> Outcome {
    let trials = 100_000u64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, p) in [params(1.0, 1.0, 1.0), params(2.0, 1.0, 0.5), params(0.5, 2.0, 0.3)]
        .iter()
        .enumerate()
    {
        let hits = (0..trials)
            .into_par_iter()
            .filter(|&r| {
                let mut s = Streams::for_replication(p, 500 + i as u64, r, 8, 8).unwrap();
                block_event(&mut s, p.deadline, 1).unwrap()
            })
            .count();
        let freq = hits as f64 / trials as f64;
        let p0 = p0_closed_form(p).unwrap();
        let se = (p0 * (1.0 - p0) / trials as f64).sqrt();
        let z = (freq - p0) / se;
        pass &= z.abs() <= 4.0;
        parts.push(format!(
            "({},{},{}) freq {freq:.5} p0 {p0:.5} z {z:+.2}",
            p.lambda, p.mu, p.deadline
        ));
    }
    outcome(pass, parts.join("; "))
}

fn estimate(p: &Parameters, seed: u64) -> ReturnLawEstimate {
    estimate_m(p, 100_000, seed, &EstimateOptions::default()).unwrap()
}

fn increasing(ests: &[ReturnLawEstimate]) -> bool {
    ests.windows(2)
        .all(|w| w[0].m_hat + w[0].ci_half_width < w[1].m_hat - w[1].ci_half_width)
}

fn m_bound_and_monotonicity() -> Outcome {
    let in_t: Vec<ReturnLawEstimate> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&t| estimate(&params(1.0, 1.0, t), 31))
        .collect();
    let in_lambda: Vec<ReturnLawEstimate> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&l| estimate(&params(l, 1.0, 1.0), 32))
        .collect();
    let m111 = in_t[1].m_hat;
    let bound = 2f64.exp();
    let fmt = |es: &[ReturnLawEstimate]| {
        es.iter()
            .map(|e| format!("{:.4}±{:.4}", e.m_hat, e.ci_half_width))
            .collect::<Vec<_>>()
            .join(" < ")
    };
    let pass = m111 <= bound && increasing(&in_t) && increasing(&in_lambda);
    outcome(
        pass,
        format!(
            "m_hat(1,1,1) = {m111:.4} <= e^2 = {bound:.4}; T: {}; lambda: {}",
            fmt(&in_t),
            fmt(&in_lambda)
        ),
    )
}

fn regimes() -> [(f64, f64); 3] {
    [(1.0, 2.0), (1.0, 1.0), (2.0, 1.0)]
}

fn law(lambda: f64, mu: f64, deadline: f64) -> AnalyticLaw {
    AnalyticLaw::new(params(lambda, mu, deadline)).unwrap()
}

fn normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (l, m) in regimes() {
        let mass = law(l, m, 1.0).density_mass().unwrap();
        worst = worst.max((mass - 1.0).abs());
        parts.push(format!("rho {}: {mass:.12}", l / m));
    }
    outcome(worst < 1e-6, format!("{}; max error {worst:.2e}", parts.join(", ")))
}

fn laplace_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (l, m) in regimes() {
        let a = law(l, m, 1.0);
        let scale = (l / m).max(1.0);
        for s in [0.1, 1.0, 10.0] {
            let numeric = a.laplace_numeric(s).unwrap();
            worst = worst.max((numeric - scale * a.laplace_gamma(s)).abs());
        }
    }
    outcome(
        worst < 1e-6,
        format!("9 (rho, s) pairs; max |numeric - closed form| {worst:.2e}"),
    )
}

fn series_vs_quadrature() -> Outcome {
    let mut worst: f64 = 0.0;
    for (l, m) in regimes() {
        let a = law(l, m, 1.0);
        let scale = (l / m).max(1.0);
        for i in 1..=50 {
            let x = 0.4 * i as f64;
            let series = a.busy_cdf_series(x).unwrap();
            let quad = integrate(|t| a.busy_density(t), 0.0, x, 1e-12).unwrap().value / scale;
            worst = worst.max((series - quad).abs());
        }
    }
    let defective = law(2.0, 1.0, 1.0).busy_cdf_series(f64::INFINITY).unwrap();
    let mass_err = (defective - 0.5).abs();
    outcome(
        worst < 1e-8 && mass_err < 1e-6,
        format!("50-point grid x in (0, 20], 3 regimes: max gap {worst:.2e}; total mass at rho = 2: {defective:.15}"),
    )
}

struct DeskRun {
    label: String,
    ks: f64,
    samples: usize,
    zero_fraction: f64,
    zero_se: f64,
    m_hat: f64,
}

/// Simulates enough customers for `10^5` served waits after `10^4` burn-in.
fn desk_run(p: Parameters, seed: u64) -> DeskRun {
    const BURN_IN: usize = 10_000;
    const SAMPLES: usize = 100_000;
    let mut n = 110_000usize;
    let path = loop {
        let path = simulate(p, n, seed, false).unwrap();
        if path.served_count() >= BURN_IN + SAMPLES {
            break path;
        }
        let fraction = path.served_count().max(1) as f64 / n as f64;
        n = ((BURN_IN + SAMPLES) as f64 / fraction * 1.05) as usize + 1_000;
    };
    let mut waits = served_waits(&path, BURN_IN);
    waits.truncate(SAMPLES);
    let est = estimate_m(&p, 100_000, seed + 1_000, &EstimateOptions::default()).unwrap();
    let limit = LimitingLaw::new(AnalyticLaw::new(p).unwrap(), est.m_hat).unwrap();
    let ks = EcdfView::new(waits.clone()).ks_distance(&limit);
    let zero = zero_wait_estimate(&path, BURN_IN);
    let se_inv = est.std_error() / (est.m_hat * est.m_hat);
    DeskRun {
        label: format!("({},{},{})", p.lambda, p.mu, p.deadline),
        ks,
        samples: waits.len(),
        zero_fraction: zero.fraction,
        zero_se: zero.std_error.hypot(se_inv),
        m_hat: est.m_hat,
    }
}

fn desk_points() -> Vec<DeskRun> {
    [(1.0, 2.0, 2.0), (1.0, 1.0, 2.0), (2.0, 1.0, 1.0)]
        .iter()
        .enumerate()
        .map(|(i, &(l, m, t))| desk_run(params(l, m, t), 70 + i as u64))
        .collect()
}

fn limiting_law_ks(runs: &[DeskRun]) -> Outcome {
    let pass = runs.iter().all(|r| r.ks < 0.02 && r.samples == 100_000);
    let detail = runs
        .iter()
        .map(|r| format!("{} ks {:.4} (n {}, m_hat {:.4})", r.label, r.ks, r.samples, r.m_hat))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn zero_wait_fraction(runs: &[DeskRun]) -> Outcome {
    let mut pass = true;
    let detail = runs
        .iter()
        .map(|r| {
            let z = (r.zero_fraction - 1.0 / r.m_hat) / r.zero_se;
            pass &= z.abs() <= 4.0;
            format!(
                "{} fraction {:.5} vs 1/m_hat {:.5} (z {z:+.2})",
                r.label,
                r.zero_fraction,
                1.0 / r.m_hat
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn critical_tail() -> Outcome {
    let window = default_tail_window(true);
    let critical = law(1.0, 1.0, 1.0);
    let fit = fit_tail(
        |t| critical.log_busy_density(t),
        window,
        TailKind::Power,
        DEFAULT_FIT_POINTS,
    )
    .unwrap();
    let classified = classify_tail(|t| critical.log_busy_density(t), window, DEFAULT_FIT_POINTS).unwrap();
    let mut pass = (1.45..=1.55).contains(&fit.exponent) && classified.kind == TailKind::Power;
    let mut parts = vec![format!("critical exponent {:.4} ({:?})", fit.exponent, classified.kind)];
    for (l, m) in [(1.0, 2.0), (2.0, 1.0), (1.0, 1.5)] {
        let a = law(l, m, 1.0);
        let c = classify_tail(|t| a.log_busy_density(t), default_tail_window(false), DEFAULT_FIT_POINTS).unwrap();
        pass &= c.kind == TailKind::Exponential && c.rate > 0.0;
        parts.push(format!("({l},{m}) {:?} rate {:.5}", c.kind, c.rate));
    }
    outcome(pass, parts.join("; "))
}

fn renewal_and_chain() -> Outcome {
    let r = renewal_iterate(&[0.5, 0.5], 60).unwrap();
    let renewal_err = (r.last() - 2.0 / 3.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let len = 1 + (rng.next_u64() % 25) as usize;
        // some interior zeros; the last entry is kept positive
        let mut raw: Vec<f64> = (0..len)
            .map(|_| {
                if rng.next_u64() % 4 == 0 {
                    0.0
                } else {
                    uniform(&mut rng, 0.0, 1.0)
                }
            })
            .collect();
        raw[len - 1] += 0.1;
        let total: f64 = raw.iter().sum();
        let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let chain = ChainSpec::from_return_law(&q).unwrap();
        for k in 1..=len + 3 {
            let target = q.get(k - 1).copied().unwrap_or(0.0);
            worst = worst.max((chain_first_return(&chain, k) - target).abs());
        }
    }
    outcome(
        renewal_err < 1e-6 && worst < 1e-12,
        format!("p00(60) - 2/3 = {renewal_err:.2e}; 20 chains, max first-return error {worst:.2e}"),
    )
}

fn bessel_kernel() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in [1u64, 10, 50, 150, 199, 201, 500, 3000] {
        let t = p as f64 / 10.0;
        let exact = common::bessel_i1_exact(p, 10);
        worst = worst.max((bessel_i1(t) / exact - 1.0).abs());
    }
    let at = DEFAULT_SWITCH_POINT;
    let series = bessel_i1_with(at, at + 1.0);
    let asymptotic = bessel_i1_with(at, at - 1.0);
    let jump = (series / asymptotic - 1.0).abs();
    let step = (bessel_i1(at.next_down()) / bessel_i1(at) - 1.0).abs();
    outcome(
        worst < 1e-12 && jump < 1e-10,
        format!("max relative error {worst:.2e}; branch gap at t = {at}: {jump:.2e} (adjacent floats {step:.2e})"),
    )
}

trait Report {
    fn report(self, id: usize, name: &str, failures: &mut usize);
}

impl<F: FnOnce() -> Outcome> Report for F {
    fn report(self, id: usize, name: &str, failures: &mut usize) {
        let start = Instant::now();
        let o = self();
        if !o.pass {
            *failures += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
}

fn main() {
    let mut failures = 0;
    oracle_equivalence.report(1, "simulator vs index sets", &mut failures);
    p0_frequency.report(2, "p0 closed form", &mut failures);
    m_bound_and_monotonicity.report(3, "bound and monotonicity of M", &mut failures);
    normalization.report(4, "density normalization", &mut failures);
    laplace_identity.report(5, "Laplace identity", &mut failures);
    series_vs_quadrature.report(6, "series vs quadrature", &mut failures);
    let start = Instant::now();
    let runs = desk_points();
    println!("  desk-scale simulations took {:.1}s", start.elapsed().as_secs_f64());
    (|| limiting_law_ks(&runs)).report(7, "limiting waiting-time law", &mut failures);
    (|| zero_wait_fraction(&runs)).report(8, "zero-wait fraction", &mut failures);
    critical_tail.report(9, "tail classification", &mut failures);
    renewal_and_chain.report(10, "renewal and chain", &mut failures);
    bessel_kernel.report(11, "Bessel kernel", &mut failures);
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
