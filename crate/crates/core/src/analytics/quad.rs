//! Globally adaptive 15-point Gauss-Kronrod quadrature.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

// Kronrod abscissae on [0, 1]; odd positions (1, 3, 5) and the centre are the
// 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

pub const DEFAULT_MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("quadrature did not reach {requested:e} within {intervals} intervals (estimate {value}, error {achieved:e})")]
pub struct QuadError {
    pub value: f64,
    pub achieved: f64,
    pub requested: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = f(centre - dx) + f(centre + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs().max(50.0 * f64::EPSILON * value.abs());
    Segment { a, b, value, error }
}

/// Integrates `f` over the finite interval `[a, b]` to absolute error `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult, QuadError> {
    integrate_with_limit(f, a, b, tol, DEFAULT_MAX_INTERVALS)
}

pub fn integrate_with_limit<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<QuadResult, QuadError> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod15(&f, a, b);
    let mut error = first.error;
    heap.push(first);
    loop {
        if error <= tol || heap.len() >= max_intervals {
            let (value, exact_error) = totals(&heap);
            if exact_error <= tol {
                return Ok(QuadResult {
                    value,
                    abs_error: exact_error,
                    intervals: heap.len(),
                });
            }
            if heap.len() >= max_intervals {
                return Err(QuadError {
                    value,
                    achieved: exact_error,
                    requested: tol,
                    intervals: heap.len(),
                });
            }
            error = exact_error;
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split any further
            heap.push(worst);
            let (value, achieved) = totals(&heap);
            return Err(QuadError {
                value,
                achieved,
                requested: tol,
                intervals: heap.len(),
            });
        }
        let left = kronrod15(&f, worst.a, mid);
        let right = kronrod15(&f, mid, worst.b);
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// Integrates `f` over `[0, inf)`: `[0, 1]` directly, then `t = e^v` in
/// blocks of width 10 in `v` until a block contributes less than `tol / 100`
/// (and at least up to `t = e^20`). Suitable for integrands decaying at least
/// like `t^{-1-eps}`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<QuadResult, QuadError> {
    const BLOCK: f64 = 10.0;
    const MAX_V: f64 = 700.0;
    let head = integrate(&f, 0.0, 1.0, 0.25 * tol)?;
    let mut value = head.value;
    let mut abs_error = head.abs_error;
    let mut intervals = head.intervals;
    let mut v = 0.0;
    let block_tol = 0.25 * tol;
    while v < MAX_V {
        let g = |s: f64| {
            let t = s.exp();
            f(t) * t
        };
        let part = integrate(g, v, v + BLOCK, block_tol)?;
        value += part.value;
        abs_error += part.abs_error;
        intervals += part.intervals;
        v += BLOCK;
        if v >= 20.0 && part.value.abs() < 0.01 * tol {
            break;
        }
    }
    Ok(QuadResult {
        value,
        abs_error,
        intervals,
    })
}
