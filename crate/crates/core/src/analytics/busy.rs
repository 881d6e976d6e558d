//! Busy period of the classical single-server queue started by one customer:
//! its density `f_rho`, its distribution function as a series, and its
//! Laplace transform.
//!
//! `f_rho(t) = sqrt(max(rho, 1/rho)) / t * e^{-(lambda+mu) t} I1(2 t sqrt(lambda mu))`
//! integrates to one in every regime. For `rho > 1` it is the density of the
//! busy period conditioned on being finite; the busy period itself is finite
//! with probability `1 / rho`.
//!
//! Writing `(1/t) I1(2t sqrt(lambda mu)) = 2 sqrt(lambda mu) * I1(z)/z` keeps the
//! density regular at the origin, where it equals `max(lambda, mu)`.

use statrs::function::gamma::ln_gamma;

use super::bessel::{bessel_i1_over_x_series, ln_bessel_i1_scaled_with};
use super::quad::{integrate, integrate_semi_infinite};
use super::{AnalyticError, AnalyticLaw};
use crate::model::Parameters;
use crate::util::CompensatedSum;

fn prefactor(params: &Parameters) -> f64 {
    let rho = params.rho();
    rho.max(1.0 / rho).sqrt()
}

/// `(sqrt(lambda) - sqrt(mu))^2`, the exponential decay rate of `f_rho`.
pub fn decay_rate(params: &Parameters) -> f64 {
    let d = params.lambda.sqrt() - params.mu.sqrt();
    d * d
}

impl AnalyticLaw {
    /// `f_rho(t)`; `max(lambda, mu)` at `t = 0` and zero for `t < 0`.
    pub fn busy_density(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let p = &self.params;
        let root = (p.lambda * p.mu).sqrt();
        let z = 2.0 * t * root;
        if z < self.switch_point {
            prefactor(p) * 2.0 * root * (-(p.lambda + p.mu) * t).exp() * bessel_i1_over_x_series(z)
        } else {
            self.log_busy_density(t).exp()
        }
    }

    /// `ln f_rho(t)` for `t > 0`, computed without forming `f_rho` so it stays
    /// finite far into the tail.
    pub fn log_busy_density(&self, t: f64) -> f64 {
        let p = &self.params;
        let z = 2.0 * t * (p.lambda * p.mu).sqrt();
        prefactor(p).ln() - t.ln() - decay_rate(p) * t + ln_bessel_i1_scaled_with(z, self.switch_point)
    }

    /// `P(D <= x)` for the (defective when `rho > 1`) busy period `D`, from
    ///
    /// `F_D(x) = sum_m int_0^x mu (lambda mu)^m t^{2m} e^{-(lambda+mu) t} / (m! (m+1)!) dt`.
    ///
    /// With `a = lambda + mu` and `z = lambda mu / a^2` the m-th term is
    /// `c_m P(2m+1, a x)`, where `c_m = (mu / a) Cat_m z^m` (`Cat_m` the Catalan
    /// numbers) and `P` the regularised lower incomplete gamma function,
    /// obtained as a Poisson upper tail.
    ///
    /// Truncation: successive terms shrink by at least
    /// `r_m = (a x)^2 / ((2m+4)(2m+5))` from term `m+1` on, so summing stops
    /// once `t_{m+1} / (1 - r_m) < series_tol`. At `x = inf` the ratio bound is
    /// `4z = 1 - ((lambda - mu)/a)^2`, which fails at `lambda = mu`; the series
    /// then runs into the term budget.
    pub fn busy_cdf_series(&self, x: f64) -> Result<f64, AnalyticError> {
        if x.is_nan() {
            return Err(AnalyticError::NotANumber);
        }
        if x <= 0.0 {
            return Ok(0.0);
        }
        let p = &self.params;
        let a = p.lambda + p.mu;
        let z = p.lambda * p.mu / (a * a);
        let mut c = p.mu / a;
        let mut sum = CompensatedSum::new();

        if x.is_infinite() {
            let ratio = 4.0 * z;
            for m in 0..self.max_series_terms {
                sum.add(c);
                c *= z * 2.0 * (2 * m + 1) as f64 / (m + 2) as f64;
                if ratio < 1.0 && c / (1.0 - ratio) < self.series_tol {
                    return Ok(sum.value());
                }
            }
            let achieved = if ratio < 1.0 { c / (1.0 - ratio) } else { f64::INFINITY };
            return Err(AnalyticError::SeriesBudget {
                terms: self.max_series_terms,
                achieved,
            });
        }

        let y = a * x;
        let tail = poisson_upper_tails(y);
        for m in 0..self.max_series_terms {
            let k = 2 * m + 1;
            if k >= tail.len() {
                return Ok(sum.value());
            }
            sum.add(c * tail[k]);
            c *= z * 2.0 * (2 * m + 1) as f64 / (m + 2) as f64;
            let next = c * tail.get(k + 2).copied().unwrap_or(0.0);
            let r = y * y / (((2 * m + 4) * (2 * m + 5)) as f64);
            if r < 1.0 && next / (1.0 - r) < self.series_tol {
                return Ok(sum.value());
            }
        }
        Err(AnalyticError::SeriesBudget {
            terms: self.max_series_terms,
            achieved: c,
        })
    }

    /// `int_0^x f_rho(t) dt / max(rho, 1)` by adaptive quadrature; equal to
    /// [`AnalyticLaw::busy_cdf_series`] in every regime.
    pub fn busy_cdf_quadrature(&self, x: f64) -> Result<f64, AnalyticError> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        let value = integrate(|t| self.busy_density(t), 0.0, x, self.quad_tol)?.value;
        Ok(value / self.params.rho().max(1.0))
    }

    /// `int_0^inf f_rho(t) dt`.
    pub fn density_mass(&self) -> Result<f64, AnalyticError> {
        Ok(integrate_semi_infinite(|t| self.busy_density(t), self.quad_tol)?.value)
    }

    /// `int_0^inf e^{-s t} f_rho(t) dt` by quadrature.
    pub fn laplace_numeric(&self, s: f64) -> Result<f64, AnalyticError> {
        Ok(integrate_semi_infinite(|t| (-s * t).exp() * self.busy_density(t), self.quad_tol)?.value)
    }

    pub fn laplace_gamma(&self, s: f64) -> f64 {
        laplace_gamma(&self.params, s)
    }
}

/// `Gamma(s) = (lambda + mu + s - sqrt((lambda + mu + s)^2 - 4 lambda mu)) / (2 lambda)`,
/// the Laplace-Stieltjes transform of the (defective) busy-period law,
/// evaluated in the rationalised form `2 mu / (b + sqrt(b^2 - 4 lambda mu))`
/// with the discriminant expanded as `(lambda - mu)^2 + s^2 + 2 s (lambda + mu)`.
pub fn laplace_gamma(params: &Parameters, s: f64) -> f64 {
    let (l, m) = (params.lambda, params.mu);
    let b = l + m + s;
    let disc = (l - m) * (l - m) + s * s + 2.0 * s * (l + m);
    2.0 * m / (b + disc.sqrt())
}

/// `P(Poisson(y) >= k)` for `k = 0..=J`, with `J` far enough past the mean
/// that the remaining mass is below `1e-30`.
fn poisson_upper_tails(y: f64) -> Vec<f64> {
    let last = (y + 12.0 * y.sqrt() + 40.0).ceil() as usize;
    let mut pmf = Vec::with_capacity(last + 1);
    if y < 700.0 {
        let mut p = (-y).exp();
        pmf.push(p);
        for j in 1..=last {
            p *= y / j as f64;
            pmf.push(p);
        }
    } else {
        let ln_y = y.ln();
        for j in 0..=last {
            pmf.push((-y + j as f64 * ln_y - ln_gamma(j as f64 + 1.0)).exp());
        }
    }
    let mut tails = vec![0.0; last + 1];
    let mut acc = 0.0;
    for j in (0..=last).rev() {
        acc += pmf[j];
        tails[j] = acc;
    }
    tails
}

pub fn busy_density(params: &Parameters, t: f64) -> Result<f64, AnalyticError> {
    Ok(AnalyticLaw::new(*params)?.busy_density(t))
}

pub fn busy_cdf_series(params: &Parameters, x: f64) -> Result<f64, AnalyticError> {
    AnalyticLaw::new(*params)?.busy_cdf_series(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(l: f64, m: f64) -> AnalyticLaw {
        AnalyticLaw::new(Parameters::new(l, m, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn density_limit_at_origin() {
        assert!((law(1.0, 2.0).busy_density(0.0) - 2.0).abs() < 1e-15);
        assert!((law(3.0, 2.0).busy_density(0.0) - 3.0).abs() < 1e-15);
        let l = law(1.0, 2.0);
        assert!((l.busy_density(1e-9) - l.busy_density(0.0)).abs() < 1e-7);
    }

    #[test]
    fn algebraic_identity() {
        // t e^{3t} f(t) / I1(2 sqrt(2) t) = sqrt(2) at lambda = 1, mu = 2
        let l = law(1.0, 2.0);
        let t = 1.0f64;
        let i1 = super::super::bessel::bessel_i1(2.0 * 2f64.sqrt() * t);
        let v = t * (3.0 * t).exp() * l.busy_density(t) / i1;
        assert!((v - 2f64.sqrt()).abs() < 1e-14, "{v}");
    }

    #[test]
    fn density_symmetric_in_rates() {
        let (a, b) = (law(0.7, 1.9), law(1.9, 0.7));
        for &t in &[0.0, 0.01, 0.5, 3.0, 12.0, 80.0] {
            let (x, y) = (a.busy_density(t), b.busy_density(t));
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1e-300), "{t}");
        }
    }

    #[test]
    fn branches_agree_near_switch() {
        let l = law(1.0, 1.0);
        // z = 2t crosses 20 at t = 10
        let below = l.busy_density(10.0 - 1e-12);
        let above = l.busy_density(10.0);
        assert!(((below - above) / above).abs() < 1e-10);
    }

    #[test]
    fn laplace_values() {
        let crit = Parameters::new(1.0, 1.0, 1.0).unwrap();
        assert!((laplace_gamma(&crit, 0.0) - 1.0).abs() < 1e-15);
        assert!((laplace_gamma(&crit, 1e-12) - 1.0).abs() < 1e-5);
        assert!((laplace_gamma(&crit, 1.0) - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((laplace_gamma(&crit, 1.0) - 0.381966).abs() < 1e-6);
        let sup = Parameters::new(2.0, 1.0, 1.0).unwrap();
        assert!((laplace_gamma(&sup, 0.0) - 0.5).abs() < 1e-15);
        // the textbook form agrees away from cancellation
        let (l, m, s) = (2.0f64, 1.0f64, 0.7f64);
        let b = l + m + s;
        let textbook = (b - (b * b - 4.0 * l * m).sqrt()) / (2.0 * l);
        assert!((laplace_gamma(&sup, s) - textbook).abs() < 1e-14);
    }

    #[test]
    fn series_zero_and_masses() {
        let l = law(2.0, 1.0);
        assert_eq!(l.busy_cdf_series(0.0).unwrap(), 0.0);
        assert!((l.busy_cdf_series(f64::INFINITY).unwrap() - 0.5).abs() < 1e-12);
        assert!((law(1.0, 2.0).busy_cdf_series(f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            law(1.0, 1.0).busy_cdf_series(f64::INFINITY),
            Err(AnalyticError::SeriesBudget { .. })
        ));
    }

    #[test]
    fn series_monotone_and_bounded() {
        let l = law(1.0, 1.0);
        let mut prev = 0.0;
        for i in 1..200 {
            let v = l.busy_cdf_series(i as f64 * 0.5).unwrap();
            assert!(v >= prev && v <= 1.0);
            prev = v;
        }
        // slow power-law approach to 1 at criticality: 1 - F(x) ~ 1/sqrt(pi x)
        let x = 5000.0;
        let gap = 1.0 - l.busy_cdf_series(x).unwrap();
        assert!((gap * (std::f64::consts::PI * x).sqrt() - 1.0).abs() < 1e-3, "{gap}");
    }

    #[test]
    fn poisson_tails() {
        let t = poisson_upper_tails(3.0);
        assert!((t[0] - 1.0).abs() < 1e-15);
        assert!((t[1] - (1.0 - (-3.0f64).exp())).abs() < 1e-15);
        let big = poisson_upper_tails(900.0);
        assert!((big[0] - 1.0).abs() < 1e-12);
        assert!((big[900] - 0.5).abs() < 0.02);
    }
}
