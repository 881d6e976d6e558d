//! The regeneration time `tau` (index of the first customer after customer 0
//! to find the server idle) computed from the raw streams by index sets, plus
//! the quantities used to bound it and a Monte-Carlo estimator of `E[tau]`.
//!
//! Within the first busy period the k-th service completes at `S^Y_k`. With
//! `N_k = {n : S^Y_{k-1} <= S^X_n < S^Y_k}` the arrivals during service k,
//! `J_k` is the set of customers still eligible at `S^Y_k`:
//!
//! ```text
//! J_1     = { n in N_1 : S^X_n + T > S^Y_1 }
//! J_{k+1} = { n in (J_k \ {max J_k}) ∪ N_{k+1} : S^X_n + T > S^Y_{k+1} }
//! ```
//!
//! The procedure stops at the first empty `J_k` (`tau1`), and
//! `tau = max(N_1 ∪ .. ∪ N_tau1) + 1`, with the maximum of the empty set taken
//! as 0.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ExpStream, ParamError, Parameters, Streams};
use crate::stats::normal_quantile;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TauError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("tau undetermined after {services} services (raise the ceiling)")]
    Undetermined { services: usize, partial: Box<TauResult> },
    #[error("fixed streams exhausted after {services} services")]
    StreamsExhausted { services: usize },
    #[error("requires a finite deadline")]
    InfiniteDeadline,
    #[error("with an infinite deadline E[tau] is finite only for lambda < mu (got rho = {rho})")]
    NotPositiveRecurrent { rho: f64 },
    #[error("replication {replication} undetermined after {services} services (raise the ceiling)")]
    ReplicationUndetermined { replication: u64, services: usize },
    #[error("at least {needed} replications are required (got {got})")]
    TooFewReplications { needed: u64, got: u64 },
    #[error("confidence must lie in [0, 1) (got {0})")]
    BadConfidence(f64),
}

/// One iteration of the index-set procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauStep {
    pub k: usize,
    pub arrivals: Vec<usize>,
    pub eligible: Vec<usize>,
    /// The customer taken into service at `S^Y_k`, if any.
    pub served: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauResult {
    /// First k with `J_k` empty; `None` while undetermined.
    pub tau1: Option<usize>,
    /// Largest arrival index seen in services `1..=tau1` (0 if none).
    pub n_tau1: usize,
    pub tau: Option<usize>,
    pub services_used: usize,
    pub trace: Option<Vec<TauStep>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauOptions {
    /// Give up after this many services.
    pub max_services: usize,
    pub record_trace: bool,
}

impl Default for TauOptions {
    fn default() -> Self {
        Self {
            max_services: 100_000_000,
            record_trace: false,
        }
    }
}

/// Runs the index-set procedure over `streams`, extending them as needed.
pub fn tau_by_index_sets(streams: &mut Streams, deadline: f64, options: &TauOptions) -> Result<TauResult, TauError> {
    let mut eligible: BTreeSet<usize> = BTreeSet::new();
    let mut next_arrival = 1usize;
    let mut trace = options.record_trace.then(Vec::new);

    for k in 1..=options.max_services {
        let service_end = streams
            .service_partial(k)
            .ok_or(TauError::StreamsExhausted { services: k - 1 })?;
        let mut arrivals = Vec::new();
        loop {
            let t = streams
                .arrival_time(next_arrival)
                .ok_or(TauError::StreamsExhausted { services: k })?;
            if t >= service_end {
                break;
            }
            arrivals.push(next_arrival);
            next_arrival += 1;
        }
        eligible.extend(arrivals.iter().copied());
        eligible.retain(|&n| streams.arrival_times()[n - 1] + deadline > service_end);
        let served = eligible.pop_last();
        if let Some(trace) = trace.as_mut() {
            let mut snapshot: Vec<usize> = eligible.iter().copied().collect();
            snapshot.extend(served);
            trace.push(TauStep {
                k,
                arrivals,
                eligible: snapshot,
                served,
            });
        }
        if served.is_none() {
            let n_tau1 = next_arrival - 1;
            return Ok(TauResult {
                tau1: Some(k),
                n_tau1,
                tau: Some(n_tau1 + 1),
                services_used: k,
                trace,
            });
        }
    }
    Err(TauError::Undetermined {
        services: options.max_services,
        partial: Box::new(TauResult {
            tau1: None,
            n_tau1: next_arrival - 1,
            tau: None,
            services_used: options.max_services,
            trace,
        }),
    })
}

/// `P(A_k)` where `A_k` is "service k lasts at least T and nobody arrives
/// during it": `mu / (lambda + mu) * exp(-(lambda + mu) T)`.
pub fn p0_closed_form(params: &Parameters) -> Result<f64, TauError> {
    let params = params.validate()?;
    if !params.has_finite_deadline() {
        return Err(TauError::InfiniteDeadline);
    }
    let total = params.lambda + params.mu;
    Ok(params.mu / total * (-total * params.deadline).exp())
}

/// Mean of the first k with `A_k`, i.e. `1 / p0`.
pub fn tau2_expectation(params: &Parameters) -> Result<f64, TauError> {
    let params = params.validate()?;
    if !params.has_finite_deadline() {
        return Err(TauError::InfiniteDeadline);
    }
    let total = params.lambda + params.mu;
    Ok(total / params.mu * (total * params.deadline).exp())
}

/// Whether `A_k` occurs on these streams. `None` for exhausted fixed streams.
pub fn block_event(streams: &mut Streams, deadline: f64, k: usize) -> Option<bool> {
    let start = streams.service_partial(k - 1)?;
    let end = streams.service_partial(k)?;
    let duration = streams.service_duration(k)?;
    if duration < deadline {
        return Some(false);
    }
    let n = first_arrival_at_or_after(streams, start)?;
    Some(streams.arrival_time(n)? >= end)
}

fn first_arrival_at_or_after(streams: &mut Streams, time: f64) -> Option<usize> {
    let materialised = streams.arrival_times();
    let idx = materialised.partition_point(|&t| t < time);
    if idx < materialised.len() {
        return Some(idx + 1);
    }
    let mut n = materialised.len().max(1);
    while streams.arrival_time(n)? < time {
        n += 1;
    }
    Some(n)
}

/// `tau2`: the first k at which `A_k` occurs, or `None` past `max_services`.
pub fn tau2(streams: &mut Streams, deadline: f64, max_services: usize) -> Option<usize> {
    (1..=max_services).find(|&k| block_event(streams, deadline, k).unwrap_or(false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiMethod {
    /// Sample mean, normal-approximation half width.
    #[default]
    Normal,
    /// Median of `groups` group means; half width from the median's
    /// asymptotic standard error `sqrt(pi/2) * sd(group means) / sqrt(groups)`.
    MedianOfMeans { groups: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub confidence: f64,
    pub method: CiMethod,
    /// Per-replication service ceiling; `None` picks
    /// [`default_service_ceiling`].
    pub max_services: Option<usize>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            confidence: DEFAULT_CONFIDENCE,
            method: CiMethod::Normal,
            max_services: None,
        }
    }
}

/// `1000 * e^{(lambda + mu) T}` services for a finite deadline (clamped to
/// `[10^4, 10^9]`); `10^7` without one.
pub fn default_service_ceiling(params: &Parameters) -> usize {
    if params.has_finite_deadline() {
        let bound = 1e3 * ((params.lambda + params.mu) * params.deadline).exp();
        bound.clamp(1e4, 1e9) as usize
    } else {
        10_000_000
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnLawEstimate {
    pub m_hat: f64,
    pub ci_half_width: f64,
    pub confidence: f64,
    pub replications: u64,
    /// Sample standard deviation of tau.
    pub std_dev: f64,
    /// Empirical `P(tau = k)`.
    pub q_hat: BTreeMap<u64, f64>,
}

impl ReturnLawEstimate {
    /// `q_hat` as a dense vector with entry `k - 1` holding `P(tau = k)`.
    pub fn q_vector(&self) -> Vec<f64> {
        let len = self.q_hat.keys().next_back().copied().unwrap_or(0) as usize;
        let mut q = vec![0.0; len];
        for (&k, &mass) in &self.q_hat {
            q[k as usize - 1] = mass;
        }
        q
    }

    /// Standard error of `m_hat`.
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.replications as f64).sqrt()
    }
}

/// Draws `tau` for one replication of `seed`.
pub fn tau_replication(
    params: &Parameters,
    seed: u64,
    replication: u64,
    max_services: usize,
) -> Result<usize, TauError> {
    let mut streams = Streams::for_replication(params, seed, replication, 64, 64)?;
    let options = TauOptions {
        max_services,
        record_trace: false,
    };
    match tau_by_index_sets(&mut streams, params.deadline, &options) {
        Ok(r) => Ok(r.tau.expect("determined tau")),
        Err(TauError::Undetermined { services, .. }) => {
            Err(TauError::ReplicationUndetermined { replication, services })
        }
        Err(e) => Err(e),
    }
}

/// Monte-Carlo estimate of `M = E[tau]` from independent replications
/// `0..replications` of `seed`.
///
/// Sums are taken over integers, so the result does not depend on how the
/// replications are spread across threads.
pub fn estimate_m(
    params: &Parameters,
    replications: u64,
    seed: u64,
    options: &EstimateOptions,
) -> Result<ReturnLawEstimate, TauError> {
    let params = params.validate()?;
    if !params.has_finite_deadline() && params.lambda >= params.mu {
        return Err(TauError::NotPositiveRecurrent { rho: params.rho() });
    }
    if !(0.0..1.0).contains(&options.confidence) {
        return Err(TauError::BadConfidence(options.confidence));
    }
    let needed = match options.method {
        CiMethod::Normal => 2,
        CiMethod::MedianOfMeans { groups } => 2 * groups.max(2) as u64,
    };
    if replications < needed {
        return Err(TauError::TooFewReplications {
            needed,
            got: replications,
        });
    }
    let ceiling = options.max_services.unwrap_or_else(|| default_service_ceiling(&params));
    let taus: Vec<usize> = (0..replications)
        .into_par_iter()
        .map(|r| tau_replication(&params, seed, r, ceiling))
        .collect::<Result<_, _>>()?;
    Ok(aggregate(&taus, options))
}

fn aggregate(taus: &[usize], options: &EstimateOptions) -> ReturnLawEstimate {
    let n = taus.len() as u64;
    let sum: u128 = taus.iter().map(|&t| t as u128).sum();
    let sum_sq: u128 = taus.iter().map(|&t| (t as u128) * (t as u128)).sum();
    let mean = sum as f64 / n as f64;
    // n * sum_sq - sum^2 is exact in integers
    let spread = (n as u128 * sum_sq - sum * sum) as f64;
    let variance = spread / (n as f64 * (n - 1) as f64);
    let std_dev = variance.sqrt();

    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &t in taus {
        *counts.entry(t as u64).or_default() += 1;
    }
    let q_hat = counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect();

    let z = normal_quantile(options.confidence);
    let (m_hat, ci_half_width) = match options.method {
        CiMethod::Normal => (mean, z * std_dev / (n as f64).sqrt()),
        CiMethod::MedianOfMeans { groups } => median_of_means(taus, groups.max(2), z),
    };
    ReturnLawEstimate {
        m_hat,
        ci_half_width,
        confidence: options.confidence,
        replications: n,
        std_dev,
        q_hat,
    }
}

fn median_of_means(taus: &[usize], groups: usize, z: f64) -> (f64, f64) {
    let size = taus.len() / groups;
    let mut means: Vec<f64> = taus
        .chunks_exact(size)
        .take(groups)
        .map(|c| c.iter().map(|&t| t as u128).sum::<u128>() as f64 / size as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let g = means.len();
    let median = if g % 2 == 1 {
        means[g / 2]
    } else {
        0.5 * (means[g / 2 - 1] + means[g / 2])
    };
    let avg = means.iter().sum::<f64>() / g as f64;
    let sd = (means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (g - 1) as f64).sqrt();
    (
        median,
        z * (std::f64::consts::FRAC_PI_2).sqrt() * sd / (g as f64).sqrt(),
    )
}

/// A busy period of the classical queue started by one customer at time 0:
/// `D = S^Y_{tau3}` with `tau3 = min{n : S^Y_n < S^X_n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BusyPeriodSample {
    /// `f64::INFINITY` when the ceiling was reached first.
    #[serde(serialize_with = "crate::util::serialize_extended_f64")]
    pub duration: f64,
    /// `None` when the ceiling was reached first.
    pub tau3: Option<u64>,
}

impl BusyPeriodSample {
    pub fn is_finite(&self) -> bool {
        self.tau3.is_some()
    }
}

/// One busy period from replication `replication` of `seed`, giving up after
/// `ceiling` services.
pub fn sample_busy_period_replication(
    params: &Parameters,
    seed: u64,
    replication: u64,
    ceiling: u64,
) -> BusyPeriodSample {
    let mut arrivals = ExpStream::arrivals(seed, replication, params.lambda);
    let mut services = ExpStream::services(seed, replication, params.mu);
    let (mut sx, mut sy) = (0.0, 0.0);
    for n in 1..=ceiling {
        sx += arrivals.next_draw();
        sy += services.next_draw();
        if sy < sx {
            return BusyPeriodSample {
                duration: sy,
                tau3: Some(n),
            };
        }
    }
    BusyPeriodSample {
        duration: f64::INFINITY,
        tau3: None,
    }
}

pub fn sample_busy_period(params: &Parameters, seed: u64, ceiling: u64) -> Result<BusyPeriodSample, ParamError> {
    let params = params.validate()?;
    Ok(sample_busy_period_replication(&params, seed, 0, ceiling))
}

/// `count` independent busy periods, replications `0..count` of `seed`.
pub fn busy_period_samples(
    params: &Parameters,
    seed: u64,
    count: u64,
    ceiling: u64,
) -> Result<Vec<BusyPeriodSample>, ParamError> {
    let params = params.validate()?;
    Ok((0..count)
        .into_par_iter()
        .map(|r| sample_busy_period_replication(&params, seed, r, ceiling))
        .collect())
}
