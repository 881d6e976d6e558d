//! Limiting law of the waiting time of served customers.
//!
//! For `0 <= x <= T`
//!
//! ```text
//! F_T(x) = [ 1/M + (1 - 1/M) / max(rho, 1) * int_0^x f_rho ] / C(T)
//! ```
//!
//! with `C(T)` the bracket at `x = T`, so `F_T(T) = 1`. The inner term
//! `int_0^x f_rho / max(rho, 1)` is the busy-period distribution function
//! `F_D(x)`, evaluated with the series. `F_T` has an atom `1 / (M C(T))` at 0.
//! Without a deadline the law exists only for `lambda < mu`, where `C = 1`.

use super::{AnalyticError, AnalyticLaw};
use crate::model::Parameters;
use crate::stats::Cdf;

#[derive(Debug, Clone, PartialEq)]
pub struct LimitingLaw {
    law: AnalyticLaw,
    m: f64,
    normaliser: f64,
}

impl LimitingLaw {
    /// `m` is (an estimate of) the mean regeneration time `M >= 1`.
    pub fn new(law: AnalyticLaw, m: f64) -> Result<Self, AnalyticError> {
        if !law.params.has_finite_deadline() && law.params.lambda >= law.params.mu {
            return Err(AnalyticError::InfiniteDeadline);
        }
        if m.is_nan() || m < 1.0 || m.is_infinite() {
            return Err(AnalyticError::MeanBelowOne(m));
        }
        let mut this = Self {
            law,
            m,
            normaliser: 1.0,
        };
        if law.params.has_finite_deadline() {
            this.normaliser = this.bracket(law.params.deadline)?;
        }
        Ok(this)
    }

    fn bracket(&self, x: f64) -> Result<f64, AnalyticError> {
        let inv = 1.0 / self.m;
        Ok(inv + (1.0 - inv) * self.law.busy_cdf_series(x)?)
    }

    pub fn params(&self) -> &Parameters {
        &self.law.params
    }

    pub fn mean_regeneration(&self) -> f64 {
        self.m
    }

    /// `C(T)`.
    pub fn normaliser(&self) -> f64 {
        self.normaliser
    }

    /// Mass at zero wait, `1 / (M C(T))`.
    pub fn atom(&self) -> f64 {
        1.0 / (self.m * self.normaliser)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let deadline = self.law.params.deadline;
        if x < 0.0 {
            0.0
        } else if x >= deadline {
            1.0
        } else {
            // x < T, and the series work for x is bounded by that for T
            self.bracket(x).expect("series converged at the deadline") / self.normaliser
        }
    }

    /// Density of the continuous part on `(0, T)`.
    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= self.law.params.deadline {
            return 0.0;
        }
        let rho = self.law.params.rho();
        (1.0 - 1.0 / self.m) * self.law.busy_density(x) / rho.max(1.0) / self.normaliser
    }
}

impl Cdf for LimitingLaw {
    fn cdf(&self, x: f64) -> f64 {
        LimitingLaw::cdf(self, x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            LimitingLaw::cdf(self, x)
        }
    }
}

/// `F_T(x)` for a one-off evaluation.
pub fn limiting_cdf(params: &Parameters, m: f64, x: f64) -> Result<f64, AnalyticError> {
    Ok(LimitingLaw::new(AnalyticLaw::new(*params)?, m)?.cdf(x))
}
