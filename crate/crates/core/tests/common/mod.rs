//! Independent reference implementations shared by the integration tests and
//! the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

/// `I1(p / q)` from its power series in fixed-point integer arithmetic with
/// `FRAC_BITS` fractional bits. Every term is truncated, so the result is low
/// by at most one unit in 2^-FRAC_BITS per term.
pub fn bessel_i1_exact(p: u64, q: u64) -> f64 {
    const FRAC_BITS: u64 = 800;
    // term_m = (t/2)^{2m+1} / (m! (m+1)!), t/2 = p / (2q)
    let half_den = BigUint::from(2 * q);
    let p2 = BigUint::from(p) * BigUint::from(p);
    let d2 = &half_den * &half_den;
    let mut term = (BigUint::from(p) << FRAC_BITS) / &half_den;
    let mut sum = BigUint::zero();
    let peak = p / (2 * q) + 1;
    let mut m: u64 = 0;
    while !term.is_zero() || m <= peak {
        sum += &term;
        term = term * &p2 / (&d2 * BigUint::from((m + 1) * (m + 2)));
        m += 1;
    }
    // keep 64 fractional bits before leaving integer arithmetic
    let scaled = sum >> (FRAC_BITS - 64);
    scaled.to_f64().expect("finite") / 2f64.powi(64)
}

/// Stationary probability of an empty M/M/1 system from the generator of the
/// birth-death chain truncated at `states` levels.
pub fn mm1_empty_probability(lambda: f64, mu: f64, states: usize) -> f64 {
    let mut q = DMatrix::<f64>::zeros(states, states);
    for i in 0..states {
        if i + 1 < states {
            q[(i, i + 1)] = lambda;
        }
        if i > 0 {
            q[(i, i - 1)] = mu;
        }
        let out: f64 = (0..states).filter(|&j| j != i).map(|j| q[(i, j)]).sum();
        q[(i, i)] = -out;
    }
    // pi Q = 0 with sum(pi) = 1: replace one balance equation by normalisation
    let mut a = q.transpose();
    for j in 0..states {
        a[(states - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(states);
    b[states - 1] = 1.0;
    let pi = a.lu().solve(&b).expect("non-singular balance equations");
    pi[0]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveOutcome {
    pub wait: f64,
    pub service_start: Option<f64>,
}

/// Straightforward LIFO queue with deadline over fixed increments: at every
/// completion scan the waiting list, drop the expired, serve the newest.
/// Returns outcomes for every customer it resolved, in index order.
pub fn naive_lifo(interarrivals: &[f64], services: &[f64], deadline: f64) -> Vec<NaiveOutcome> {
    let mut arrivals = vec![0.0];
    for &a in interarrivals {
        let last = *arrivals.last().unwrap();
        arrivals.push(last + a);
    }
    let mut outcome: Vec<Option<NaiveOutcome>> = vec![None; arrivals.len()];
    let mut waiting: Vec<usize> = Vec::new();
    let mut next_service = 0usize;
    // customer 0 starts service at time 0
    outcome[0] = Some(NaiveOutcome {
        wait: 0.0,
        service_start: Some(0.0),
    });
    let mut completion = services[0];
    next_service += 1;
    let mut busy = true;
    let mut next = 1usize;
    loop {
        let arrival = arrivals.get(next).copied().unwrap_or(f64::INFINITY);
        if busy && completion <= arrival {
            let now = completion;
            let mut keep = Vec::new();
            for &c in &waiting {
                if arrivals[c] + deadline > now {
                    keep.push(c);
                } else {
                    outcome[c] = Some(NaiveOutcome {
                        wait: f64::INFINITY,
                        service_start: None,
                    });
                }
            }
            waiting = keep;
            let newest = waiting
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| arrivals[a.1].total_cmp(&arrivals[b.1]));
            match newest {
                Some((pos, c)) if next_service < services.len() => {
                    waiting.remove(pos);
                    outcome[c] = Some(NaiveOutcome {
                        wait: now - arrivals[c],
                        service_start: Some(now),
                    });
                    completion = now + services[next_service];
                    next_service += 1;
                }
                Some(_) => break,
                None => busy = false,
            }
        } else if arrival.is_finite() {
            if busy {
                waiting.push(next);
            } else if next_service < services.len() {
                outcome[next] = Some(NaiveOutcome {
                    wait: 0.0,
                    service_start: Some(arrival),
                });
                completion = arrival + services[next_service];
                next_service += 1;
                busy = true;
            } else {
                break;
            }
            next += 1;
        } else {
            // no more arrivals: resolve the rest by expiry
            break;
        }
    }
    outcome.into_iter().map_while(|o| o).collect()
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let cov: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    cov / var
}
