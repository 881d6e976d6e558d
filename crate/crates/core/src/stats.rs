//! Empirical CDFs, Kolmogorov-Smirnov distance against laws with atoms,
//! tail fits on log-densities, and normal-approximation intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::util::CompensatedSum;

/// Minimum number of grid points in a tail fit.
pub const MIN_FIT_POINTS: usize = 20;
pub const DEFAULT_FIT_POINTS: usize = 64;
/// Fit window for the `t^{-3/2}` tail at `lambda = mu`.
pub const CRITICAL_TAIL_WINDOW: (f64, f64) = (50.0, 500.0);
/// Fit window away from criticality, where the density decays exponentially
/// and a wider window would only add underflow-prone points.
pub const OFF_CRITICAL_TAIL_WINDOW: (f64, f64) = (10.0, 50.0);

pub fn default_tail_window(critical: bool) -> (f64, f64) {
    if critical {
        CRITICAL_TAIL_WINDOW
    } else {
        OFF_CRITICAL_TAIL_WINDOW
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("tail window must satisfy 0 < t_lo < t_hi (got [{0}, {1}])")]
    DegenerateWindow(f64, f64),
    #[error("a fit needs at least {MIN_FIT_POINTS} grid points (got {0})")]
    TooFewPoints(usize),
    #[error("log-density is not finite at t = {0}")]
    NonFiniteLogDensity(f64),
}

/// Two-sided standard normal quantile for a central interval of the given
/// coverage: `Phi^{-1}((1 + confidence) / 2)`. Zero coverage gives zero.
pub fn normal_quantile(confidence: f64) -> f64 {
    if confidence <= 0.0 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(0.5 * (1.0 + confidence))
}

/// A distribution function. `cdf_left(x)` is the left limit `F(x-)`; the
/// default steps one ulp down, which is exact for atoms and indistinguishable
/// from `F(x)` at continuity points.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x.next_down())
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Sorted samples with step-function evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfView {
    sorted: Vec<f64>,
}

impl EcdfView {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{samples <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// `#{samples < x} / n`.
    pub fn eval_left(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&s| s < x) as f64 / self.sorted.len() as f64
    }

    /// Supremum distance to `cdf`, checking both one-sided limits at every
    /// jump so that atoms in `cdf` are compared jump-to-jump.
    pub fn ks_distance<C: Cdf + ?Sized>(&self, cdf: &C) -> f64 {
        let n = self.sorted.len() as f64;
        let mut worst = 0.0f64;
        let mut i = 0;
        while i < self.sorted.len() {
            let v = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == v {
                j += 1;
            }
            let below = i as f64 / n;
            let at = j as f64 / n;
            worst = worst.max((at - cdf.cdf(v)).abs()).max((below - cdf.cdf_left(v)).abs());
            i = j;
        }
        worst
    }
}

/// KS distance between the empirical law of `samples` and `cdf`.
///
/// Panics on an empty sample.
pub fn ks_distance<C: Cdf + ?Sized>(samples: &[f64], cdf: &C) -> f64 {
    assert!(!samples.is_empty(), "ks_distance needs at least one sample");
    EcdfView::new(samples.to_vec()).ks_distance(cdf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// `f(t) ∝ t^{-exponent}`.
    Power,
    /// `f(t) ∝ t^{-exponent} e^{-rate t}`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub kind: TailKind,
    /// Power-law exponent alpha.
    pub exponent: f64,
    /// Exponential rate; zero for power fits.
    pub rate: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual of the log-density.
    pub residual: f64,
    pub points: usize,
}

/// Geometric grid of `points` values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => lo * (ratio * i as f64).exp(),
        })
        .collect()
}

/// Least-squares tail fit of `log_density` on a geometric grid over `window`.
///
/// The power kind regresses `ln f` on `ln t`. The exponential kind regresses
/// `ln f` on both `ln t` and `t`: regressing on `t` alone would fold the
/// prefactor's slope into the rate.
pub fn fit_tail<F: Fn(f64) -> f64>(
    log_density: F,
    window: (f64, f64),
    kind: TailKind,
    points: usize,
) -> Result<TailFit, StatsError> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(StatsError::DegenerateWindow(lo, hi));
    }
    if points < MIN_FIT_POINTS {
        return Err(StatsError::TooFewPoints(points));
    }
    let grid = geometric_grid(lo, hi, points);
    let mut ys = Vec::with_capacity(points);
    for &t in &grid {
        let y = log_density(t);
        if !y.is_finite() {
            return Err(StatsError::NonFiniteLogDensity(t));
        }
        ys.push(y);
    }
    let log_t: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let (exponent, rate, fitted): (f64, f64, Vec<f64>) = match kind {
        TailKind::Power => {
            let (intercept, slope) = simple_regression(&log_t, &ys);
            let fitted = log_t.iter().map(|&x| intercept + slope * x).collect();
            (-slope, 0.0, fitted)
        }
        TailKind::Exponential => {
            let (intercept, b_log, b_lin) = two_regressor_fit(&log_t, &grid, &ys);
            let fitted = log_t
                .iter()
                .zip(&grid)
                .map(|(&u, &t)| intercept + b_log * u + b_lin * t)
                .collect();
            (-b_log, -b_lin, fitted)
        }
    };
    let sq: CompensatedSum = ys.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).collect();
    Ok(TailFit {
        kind,
        exponent,
        rate,
        window,
        residual: (sq.value() / points as f64).sqrt(),
        points,
    })
}

/// Fits the exponential kind and reports it as a power law when the fitted
/// rate moves the density by less than a factor e across the window.
pub fn classify_tail<F: Fn(f64) -> f64>(
    log_density: F,
    window: (f64, f64),
    points: usize,
) -> Result<TailFit, StatsError> {
    let exp_fit = fit_tail(&log_density, window, TailKind::Exponential, points)?;
    if exp_fit.rate * (window.1 - window.0) > 1.0 {
        Ok(exp_fit)
    } else {
        fit_tail(&log_density, window, TailKind::Power, points)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value() / xs.len() as f64
}

fn simple_regression(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = CompensatedSum::new();
    let mut sxx = CompensatedSum::new();
    for (&a, &b) in x.iter().zip(y) {
        sxy.add((a - mx) * (b - my));
        sxx.add((a - mx) * (a - mx));
    }
    let slope = sxy.value() / sxx.value();
    (my - slope * mx, slope)
}

fn two_regressor_fit(x1: &[f64], x2: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (m1, m2, my) = (mean(x1), mean(x2), mean(y));
    let (mut s11, mut s22, mut s12, mut s1y, mut s2y) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    for i in 0..y.len() {
        let (a, b, c) = (x1[i] - m1, x2[i] - m2, y[i] - my);
        s11.add(a * a);
        s22.add(b * b);
        s12.add(a * b);
        s1y.add(a * c);
        s2y.add(b * c);
    }
    let (s11, s22, s12, s1y, s2y) = (s11.value(), s22.value(), s12.value(), s1y.value(), s2y.value());
    let det = s11 * s22 - s12 * s12;
    let b1 = (s1y * s22 - s2y * s12) / det;
    let b2 = (s2y * s11 - s1y * s12) / det;
    (my - b1 * m1 - b2 * m2, b1, b2)
}

/// Sample mean and normal-approximation half width at `confidence`.
///
/// Panics with fewer than two samples.
pub fn mean_ci(samples: &[f64], confidence: f64) -> (f64, f64) {
    assert!(samples.len() >= 2, "mean_ci needs at least two samples");
    let n = samples.len() as f64;
    let m = mean(samples);
    let ss: CompensatedSum = samples.iter().map(|x| (x - m).powi(2)).collect();
    let sd = (ss.value() / (n - 1.0)).sqrt();
    (m, normal_quantile(confidence) * sd / n.sqrt())
}
