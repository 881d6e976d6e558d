//! Experiment parameters, random streams and the per-customer data model.
//!
//! Random draws come from ChaCha20 (RFC 8439 block function) with a 256-bit
//! key built from `(seed, replication)` as little-endian words
//! `key[0..8] = seed`, `key[8..16] = replication`, the rest zero. Arrivals use
//! ChaCha stream id 0 and services stream id 1, so the two sequences are
//! independent and extending one never shifts the other. A uniform on the open
//! interval (0, 1) is `((w >> 11) + 0.5) * 2^-53` for each 64-bit output word
//! `w`, and an exponential draw is `-ln(u) / rate`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

/// Draws are appended in blocks of this many values when a consumer outruns
/// the materialised prefix.
pub const EXTENSION_BLOCK: usize = 1024;

const ARRIVAL_STREAM_ID: u64 = 0;
const SERVICE_STREAM_ID: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} must be positive (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error("{field} must be a number (got NaN)")]
    NotANumber { field: &'static str },
    #[error("{field} must be finite (got {value})")]
    NotFinite { field: &'static str, value: f64 },
    #[error("invalid increment at position {index}: {value} (must be positive and finite)")]
    BadIncrement { index: usize, value: f64 },
}

/// The triple (lambda, mu, T) that defines one experiment.
///
/// `deadline` is the patience bound T; `f64::INFINITY` selects the classical
/// M/M/1 queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Parameters {
    pub lambda: f64,
    pub mu: f64,
    #[serde(serialize_with = "crate::util::serialize_extended_f64")]
    pub deadline: f64,
}

impl Parameters {
    pub fn new(lambda: f64, mu: f64, deadline: f64) -> Result<Self, ParamError> {
        Self { lambda, mu, deadline }.validate()
    }

    /// Returns the parameters unchanged when every field is admissible.
    pub fn validate(self) -> Result<Self, ParamError> {
        check_rate("lambda", self.lambda)?;
        check_rate("mu", self.mu)?;
        if self.deadline.is_nan() {
            return Err(ParamError::NotANumber { field: "deadline" });
        }
        if self.deadline <= 0.0 {
            return Err(ParamError::NotPositive {
                field: "deadline",
                value: self.deadline,
            });
        }
        Ok(self)
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn has_finite_deadline(&self) -> bool {
        self.deadline.is_finite()
    }

    /// No deadline and arrivals outpace service: a positive fraction of
    /// customers is never served.
    pub fn is_transient(&self) -> bool {
        !self.has_finite_deadline() && self.lambda > self.mu
    }
}

fn check_rate(field: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_nan() {
        return Err(ParamError::NotANumber { field });
    }
    if value <= 0.0 {
        return Err(ParamError::NotPositive { field, value });
    }
    if !value.is_finite() {
        return Err(ParamError::NotFinite { field, value });
    }
    Ok(())
}

/// Free-function form of [`Parameters::validate`].
pub fn validate(params: Parameters) -> Result<Parameters, ParamError> {
    params.validate()
}

/// An endless sequence of i.i.d. exponential draws.
#[derive(Debug, Clone)]
pub struct ExpStream {
    rng: ChaCha20Rng,
    rate: f64,
}

impl ExpStream {
    pub fn new(seed: u64, replication: u64, stream_id: u64, rate: f64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&replication.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream_id);
        Self { rng, rate }
    }

    pub fn arrivals(seed: u64, replication: u64, lambda: f64) -> Self {
        Self::new(seed, replication, ARRIVAL_STREAM_ID, lambda)
    }

    pub fn services(seed: u64, replication: u64, mu: f64) -> Self {
        Self::new(seed, replication, SERVICE_STREAM_ID, mu)
    }

    /// Uniform on the open interval (0, 1).
    pub fn next_open_unit(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * SCALE
    }

    pub fn next_draw(&mut self) -> f64 {
        -self.next_open_unit().ln() / self.rate
    }
}

/// One materialised prefix of the X and Y sequences with their partial sums.
///
/// Indexing follows the queue: customer `n >= 1` arrives at `S^X_n`, and the
/// k-th service to start lasts `Y_k`. Index 0 of both partial-sum accessors is
/// time zero. Streams built from a seed grow on demand in blocks of
/// [`EXTENSION_BLOCK`]; streams built from explicit increments are fixed.
#[derive(Debug, Clone)]
pub struct Streams {
    interarrivals: Vec<f64>,
    service_durations: Vec<f64>,
    arrival_times: Vec<f64>,
    service_partials: Vec<f64>,
    seed: u64,
    replication: u64,
    arrival_source: Option<ExpStream>,
    service_source: Option<ExpStream>,
}

impl Streams {
    /// Generates `n_arrivals` interarrival times and `n_services` service
    /// durations for replication 0 of `seed`.
    pub fn generate(params: &Parameters, n_arrivals: usize, n_services: usize, seed: u64) -> Result<Self, ParamError> {
        Self::for_replication(params, seed, 0, n_arrivals, n_services)
    }

    pub fn for_replication(
        params: &Parameters,
        seed: u64,
        replication: u64,
        n_arrivals: usize,
        n_services: usize,
    ) -> Result<Self, ParamError> {
        let params = params.validate()?;
        let mut streams = Self {
            interarrivals: Vec::with_capacity(n_arrivals),
            service_durations: Vec::with_capacity(n_services),
            arrival_times: Vec::with_capacity(n_arrivals),
            service_partials: Vec::with_capacity(n_services),
            seed,
            replication,
            arrival_source: Some(ExpStream::arrivals(seed, replication, params.lambda)),
            service_source: Some(ExpStream::services(seed, replication, params.mu)),
        };
        streams.extend_arrivals(n_arrivals);
        streams.extend_services(n_services);
        Ok(streams)
    }

    /// Fixed streams from explicit increments; they never extend.
    pub fn from_increments(interarrivals: Vec<f64>, service_durations: Vec<f64>) -> Result<Self, ParamError> {
        for (index, &value) in interarrivals.iter().chain(service_durations.iter()).enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamError::BadIncrement { index, value });
            }
        }
        let arrival_times = prefix_sums(&interarrivals);
        let service_partials = prefix_sums(&service_durations);
        Ok(Self {
            interarrivals,
            service_durations,
            arrival_times,
            service_partials,
            seed: 0,
            replication: 0,
            arrival_source: None,
            service_source: None,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    pub fn is_extensible(&self) -> bool {
        self.arrival_source.is_some() && self.service_source.is_some()
    }

    pub fn interarrivals(&self) -> &[f64] {
        &self.interarrivals
    }

    pub fn service_durations(&self) -> &[f64] {
        &self.service_durations
    }

    /// `arrival_times()[i]` is `S^X_{i+1}`.
    pub fn arrival_times(&self) -> &[f64] {
        &self.arrival_times
    }

    /// `service_partials()[i]` is `S^Y_{i+1}`.
    pub fn service_partials(&self) -> &[f64] {
        &self.service_partials
    }

    /// `S^X_n`, extending the stream if needed. `None` only for fixed streams
    /// that have run out.
    pub fn arrival_time(&mut self, n: usize) -> Option<f64> {
        if n == 0 {
            return Some(0.0);
        }
        while self.arrival_times.len() < n {
            self.arrival_source.as_ref()?;
            self.extend_arrivals(EXTENSION_BLOCK);
        }
        Some(self.arrival_times[n - 1])
    }

    /// `S^Y_k`, extending the stream if needed.
    pub fn service_partial(&mut self, k: usize) -> Option<f64> {
        if k == 0 {
            return Some(0.0);
        }
        self.ensure_services(k).then(|| self.service_partials[k - 1])
    }

    /// `Y_k`, extending the stream if needed.
    pub fn service_duration(&mut self, k: usize) -> Option<f64> {
        if k == 0 {
            return None;
        }
        self.ensure_services(k).then(|| self.service_durations[k - 1])
    }

    fn ensure_services(&mut self, k: usize) -> bool {
        while self.service_partials.len() < k {
            if self.service_source.is_none() {
                return false;
            }
            self.extend_services(EXTENSION_BLOCK);
        }
        true
    }

    fn extend_arrivals(&mut self, count: usize) {
        let Some(source) = self.arrival_source.as_mut() else {
            return;
        };
        let mut total = self.arrival_times.last().copied().unwrap_or(0.0);
        for _ in 0..count {
            let x = source.next_draw();
            total += x;
            self.interarrivals.push(x);
            self.arrival_times.push(total);
        }
    }

    fn extend_services(&mut self, count: usize) {
        let Some(source) = self.service_source.as_mut() else {
            return;
        };
        let mut total = self.service_partials.last().copied().unwrap_or(0.0);
        for _ in 0..count {
            let y = source.next_draw();
            total += y;
            self.service_durations.push(y);
            self.service_partials.push(total);
        }
    }
}

fn prefix_sums(increments: &[f64]) -> Vec<f64> {
    increments
        .iter()
        .scan(0.0, |total, &x| {
            *total += x;
            Some(*total)
        })
        .collect()
}

/// Free-function form of [`Streams::generate`].
pub fn gen_streams(
    params: &Parameters,
    n_arrivals: usize,
    n_services: usize,
    seed: u64,
) -> Result<Streams, ParamError> {
    Streams::generate(params, n_arrivals, n_services, seed)
}

/// What happened to one customer.
///
/// `wait` is `D_n`: the time between arrival and service start, or
/// `f64::INFINITY` when the customer left unserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CustomerOutcome {
    pub index: u64,
    pub arrival_time: f64,
    #[serde(serialize_with = "crate::util::serialize_extended_f64")]
    pub wait: f64,
    pub service_start: Option<f64>,
    pub served_rank: Option<u64>,
}

impl CustomerOutcome {
    pub fn is_served(&self) -> bool {
        self.served_rank.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SimWarning {
    /// No deadline and lambda > mu: customers still waiting when the run
    /// stopped are reported unserved.
    TransientRegime { unresolved: u64 },
}

impl std::fmt::Display for SimWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimWarning::TransientRegime { unresolved } => write!(
                f,
                "transient regime (deadline = inf, lambda > mu): no stationary waiting-time law; \
                 {unresolved} customers were still waiting when the run stopped"
            ),
        }
    }
}

/// One simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    pub params: Parameters,
    pub outcomes: Vec<CustomerOutcome>,
    /// `(time, N_t)` after every change of the number in system, starting at
    /// `(0, 1)`. Present only when the run was asked to record it.
    pub queue_length_trace: Option<Vec<(f64, u64)>>,
    /// `W_m`: finite waits ordered by served rank.
    pub served_waits: Vec<f64>,
    pub warnings: Vec<SimWarning>,
}

impl SamplePath {
    pub fn served_count(&self) -> usize {
        self.served_waits.len()
    }

    pub fn abandoned_count(&self) -> usize {
        self.outcomes.len() - self.served_waits.len()
    }
}
