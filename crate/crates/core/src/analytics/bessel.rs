//! Modified Bessel function of the first kind, order one, for real `t >= 0`.
//!
//! Below the switch point the power series
//! `I1(t) = sum_m (t/2)^{2m+1} / (m! (m+1)!)` is summed directly; all terms are
//! positive, so there is no cancellation. Above it the exponentially scaled
//! asymptotic expansion
//! `e^{-t} I1(t) ~ (2 pi t)^{-1/2} sum_k (-1)^k a_k / t^k`,
//! `a_k = prod_{j=1..k} (4 - (2j-1)^2) / (k! 8^k)`, is truncated at its
//! smallest term. At `t = 20` that term is about `e^{-2t} ≈ 4e-18` relative.

/// Default argument where evaluation moves from series to asymptotics.
pub const DEFAULT_SWITCH_POINT: f64 = 20.0;

const SERIES_REL_TOL: f64 = 1e-17;

/// `I1(x) / x` from the series; finite at 0 where it equals 1/2.
fn series_over_x(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5;
    let mut sum = term;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * (m + 1.0));
        sum += term;
        if term <= SERIES_REL_TOL * sum {
            return sum;
        }
    }
}

/// `e^{-t} I1(t)` from the asymptotic expansion.
fn asymptotic_scaled(t: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = term * (odd * odd - 4.0) / (8.0 * k * t);
        if next.abs() >= term.abs() || next.abs() <= SERIES_REL_TOL * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
    }
    sum / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// `I1(t)`, using `switch` as the series/asymptotic boundary.
pub fn bessel_i1_with(t: f64, switch: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < switch {
        t * series_over_x(t)
    } else {
        t.exp() * asymptotic_scaled(t)
    }
}

/// `I1(t)`. Overflows to infinity beyond `t ≈ 713`; use
/// [`bessel_i1_scaled`] there.
pub fn bessel_i1(t: f64) -> f64 {
    bessel_i1_with(t, DEFAULT_SWITCH_POINT)
}

/// `e^{-t} I1(t)`, finite for every `t >= 0`.
pub fn bessel_i1_scaled_with(t: f64, switch: f64) -> f64 {
    if t < switch {
        (-t).exp() * t * series_over_x(t)
    } else {
        asymptotic_scaled(t)
    }
}

pub fn bessel_i1_scaled(t: f64) -> f64 {
    bessel_i1_scaled_with(t, DEFAULT_SWITCH_POINT)
}

/// `I1(x) / x` below the switch point; regular at `x = 0`.
pub(crate) fn bessel_i1_over_x_series(x: f64) -> f64 {
    series_over_x(x)
}

/// `ln(e^{-t} I1(t))` for `t > 0`.
pub(crate) fn ln_bessel_i1_scaled_with(t: f64, switch: f64) -> f64 {
    if t < switch {
        -t + t.ln() + series_over_x(t).ln()
    } else {
        asymptotic_scaled(t).ln()
    }
}
