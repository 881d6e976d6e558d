//! Closed-form side: Bessel kernel, busy-period law, limiting waiting-time
//! law, and the renewal/chain identities for the zero-wait probability.

pub mod bessel;
pub mod busy;
pub mod limiting;
pub mod quad;
pub mod renewal;

use thiserror::Error;

use crate::model::{ParamError, Parameters};

pub use bessel::{bessel_i1, bessel_i1_scaled, DEFAULT_SWITCH_POINT};
pub use busy::{busy_cdf_series, busy_density, laplace_gamma};
pub use limiting::{limiting_cdf, LimitingLaw};
pub use quad::QuadError;
pub use renewal::{chain_first_return, renewal_iterate, ChainSpec, RenewalState};

pub const DEFAULT_SERIES_TOL: f64 = 1e-15;
pub const DEFAULT_QUAD_TOL: f64 = 1e-11;
pub const DEFAULT_MAX_SERIES_TERMS: usize = 1_000_000;
const MAX_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("{name} must lie in (0, 1e-6] (got {value})")]
    BadTolerance { name: &'static str, value: f64 },
    #[error("switch point must be positive (got {0})")]
    BadSwitchPoint(f64),
    #[error("series budget of {terms} terms exhausted; tail bound {achieved:e}")]
    SeriesBudget { terms: usize, achieved: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("requires a finite deadline unless lambda < mu")]
    InfiniteDeadline,
    #[error("mean regeneration time must be a finite value >= 1 (got {0})")]
    MeanBelowOne(f64),
    #[error("invalid return-time law: {0}")]
    BadReturnLaw(String),
    #[error("argument is NaN")]
    NotANumber,
}

/// Parameters plus the numerical knobs used by every evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticLaw {
    pub params: Parameters,
    pub series_tol: f64,
    pub quad_tol: f64,
    pub switch_point: f64,
    pub max_series_terms: usize,
}

impl AnalyticLaw {
    pub fn new(params: Parameters) -> Result<Self, AnalyticError> {
        Self::with_tolerances(params, DEFAULT_SERIES_TOL, DEFAULT_QUAD_TOL, DEFAULT_SWITCH_POINT)
    }

    pub fn with_tolerances(
        params: Parameters,
        series_tol: f64,
        quad_tol: f64,
        switch_point: f64,
    ) -> Result<Self, AnalyticError> {
        let params = params.validate()?;
        for (name, value) in [("series_tol", series_tol), ("quad_tol", quad_tol)] {
            if !(value > 0.0 && value <= MAX_TOLERANCE) {
                return Err(AnalyticError::BadTolerance { name, value });
            }
        }
        if !(switch_point > 0.0 && switch_point.is_finite()) {
            return Err(AnalyticError::BadSwitchPoint(switch_point));
        }
        Ok(Self {
            params,
            series_tol,
            quad_tol,
            switch_point,
            max_series_terms: DEFAULT_MAX_SERIES_TERMS,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_bounds() {
        let p = Parameters::new(1.0, 1.0, 1.0).unwrap();
        assert!(AnalyticLaw::with_tolerances(p, 1e-5, 1e-8, 20.0).is_err());
        assert!(AnalyticLaw::with_tolerances(p, 1e-8, 0.0, 20.0).is_err());
        assert!(AnalyticLaw::with_tolerances(p, 1e-8, 1e-8, -1.0).is_err());
        let law = AnalyticLaw::new(p).unwrap();
        assert!(law.series_tol <= 1e-6 && law.quad_tol <= 1e-6);
    }
}
