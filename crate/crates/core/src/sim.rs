//! Event-driven simulation of the single-server queue with deadline
//! impatience and last-in-first-out service.
//!
//! Customer 0 arrives at time 0 and starts service at once. Customer `n >= 1`
//! arrives at `S^X_n`; the k-th service to start lasts `Y_k`. A customer still
//! waiting when its wait reaches the deadline leaves unserved. Once a service
//! starts it runs to completion.
//!
//! The waiting room is a deque ordered by arrival. The newest customer sits at
//! the back and is the one a freed server takes; the oldest sits at the front
//! and is always the next to expire. Expired customers therefore form a prefix
//! of the deque, which is what makes the two abandonment modes equivalent:
//!
//! * [`AbandonmentMode::Lazy`] drops the expired prefix only when the server is
//!   about to choose. Nobody can be chosen between their expiry and that
//!   moment, so every customer's fate and wait come out the same.
//! * [`AbandonmentMode::Eager`] schedules each abandonment at
//!   `arrival + deadline`, which keeps the `N_t` trace exact.
//!
//! Equal timestamps are processed as service completion, then abandonment,
//! then arrival. A customer is eligible for service only while
//! `arrival + deadline > now`.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::model::{CustomerOutcome, ParamError, Parameters, SamplePath, SimWarning, Streams};

/// Default number of served customers skipped before collecting waits.
pub const DEFAULT_BURN_IN: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("n_customers must be at least 1")]
    NoCustomers,
    #[error("run truncated after {events} events with {unresolved} customers unresolved (raise max_events)")]
    Truncated {
        events: u64,
        unresolved: u64,
        partial: Box<SamplePath>,
    },
    #[error("event ceiling of {events} reached before a customer found the server idle")]
    NoRegeneration { events: u64 },
    #[error("fixed streams exhausted after {arrivals} arrivals and {services} services")]
    StreamsExhausted { arrivals: usize, services: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ServiceCompletion,
    Abandonment,
    Arrival,
}

impl EventKind {
    /// Position in the tie-break order at equal timestamps.
    fn priority(self) -> u8 {
        match self {
            EventKind::ServiceCompletion => 0,
            EventKind::Abandonment => 1,
            EventKind::Arrival => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub customer: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbandonmentMode {
    #[default]
    Lazy,
    Eager,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub abandonment: AbandonmentMode,
    /// Record `(time, N_t)` pairs. Forces eager abandonment.
    pub record_trace: bool,
    /// Keep every processed event. Forces eager abandonment.
    pub record_events: bool,
    /// Event ceiling; `None` means `1000 * n_customers + 10^6`.
    pub max_events: Option<u64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            abandonment: AbandonmentMode::Lazy,
            record_trace: false,
            record_events: false,
            max_events: None,
        }
    }
}

impl SimOptions {
    fn effective_mode(&self) -> AbandonmentMode {
        if self.record_trace || self.record_events {
            AbandonmentMode::Eager
        } else {
            self.abandonment
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Waiter {
    customer: u64,
    arrival: f64,
}

#[derive(Debug, Clone, Copy)]
struct InService {
    customer: u64,
    completion: f64,
}

/// Snapshot of the queue between events.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub now: f64,
    pub in_service: Option<u64>,
    /// `(customer, arrival_time)`, oldest first; the last entry is served next.
    pub waiting: Vec<(u64, f64)>,
    pub served_count: u64,
    pub abandoned_count: u64,
    pub current_length: u64,
}

/// What one processed event did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub record: EventRecord,
    /// Set on arrivals that found the server idle (`D_n = 0`).
    pub zero_wait: bool,
}

/// The simulation kernel. Drives itself off a [`Streams`] and records outcomes
/// for customers `0..record_limit`.
pub struct Engine<'s> {
    params: Parameters,
    streams: &'s mut Streams,
    mode: AbandonmentMode,
    now: f64,
    in_service: Option<InService>,
    waiting: VecDeque<Waiter>,
    next_customer: u64,
    next_arrival: f64,
    services_started: usize,
    served_count: u64,
    abandoned_count: u64,
    events: u64,
    record_limit: u64,
    outcomes: Vec<CustomerOutcome>,
    next_rank: u64,
    unresolved: u64,
    trace: Option<Vec<(f64, u64)>>,
    event_log: Option<Vec<EventRecord>>,
}

impl<'s> Engine<'s> {
    pub fn new(params: Parameters, streams: &'s mut Streams, record_limit: u64, options: &SimOptions) -> Self {
        Self {
            params,
            streams,
            mode: options.effective_mode(),
            now: 0.0,
            in_service: None,
            waiting: VecDeque::new(),
            next_customer: 0,
            next_arrival: 0.0,
            services_started: 0,
            served_count: 0,
            abandoned_count: 0,
            events: 0,
            record_limit,
            outcomes: Vec::with_capacity(record_limit.min(1 << 24) as usize),
            next_rank: 0,
            unresolved: 0,
            trace: options.record_trace.then(Vec::new),
            event_log: options.record_events.then(Vec::new),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn services_started(&self) -> usize {
        self.services_started
    }

    /// Customers among the recorded ones that are neither served nor gone.
    pub fn unresolved(&self) -> u64 {
        self.unresolved
    }

    /// Index of the next customer to arrive.
    pub fn next_customer(&self) -> u64 {
        self.next_customer
    }

    pub fn state(&self) -> QueueState {
        QueueState {
            now: self.now,
            in_service: self.in_service.map(|s| s.customer),
            waiting: self.waiting.iter().map(|w| (w.customer, w.arrival)).collect(),
            served_count: self.served_count,
            abandoned_count: self.abandoned_count,
            current_length: self.current_length(),
        }
    }

    fn current_length(&self) -> u64 {
        self.waiting.len() as u64 + u64::from(self.in_service.is_some())
    }

    fn push_trace(&mut self) {
        let len = self.current_length();
        let now = self.now;
        if let Some(trace) = self.trace.as_mut() {
            trace.push((now, len));
        }
    }

    fn expiry(&self, waiter: &Waiter) -> f64 {
        waiter.arrival + self.params.deadline
    }

    fn is_eligible(&self, waiter: &Waiter) -> bool {
        waiter.arrival + self.params.deadline > self.now
    }

    fn next_event(&self) -> (f64, EventKind) {
        let mut best = (self.next_arrival, EventKind::Arrival);
        let mut consider = |time: f64, kind: EventKind| {
            if time < best.0 || (time == best.0 && kind.priority() < best.1.priority()) {
                best = (time, kind);
            }
        };
        if let Some(s) = self.in_service {
            consider(s.completion, EventKind::ServiceCompletion);
        }
        if self.mode == AbandonmentMode::Eager {
            if let Some(front) = self.waiting.front() {
                consider(self.expiry(front), EventKind::Abandonment);
            }
        }
        best
    }

    /// Processes the next event.
    pub fn step(&mut self) -> Result<Step, SimError> {
        let (time, kind) = self.next_event();
        if time == f64::INFINITY {
            return Err(self.exhausted());
        }
        self.now = time;
        self.events += 1;
        let step = match kind {
            EventKind::ServiceCompletion => {
                let done = self.in_service.take().expect("completion without service");
                self.push_trace();
                self.select_next()?;
                Step {
                    record: EventRecord {
                        time,
                        kind,
                        customer: done.customer,
                    },
                    zero_wait: false,
                }
            }
            EventKind::Abandonment => {
                let gone = self.waiting.pop_front().expect("abandonment without waiter");
                self.abandon(gone);
                Step {
                    record: EventRecord {
                        time,
                        kind,
                        customer: gone.customer,
                    },
                    zero_wait: false,
                }
            }
            EventKind::Arrival => self.arrive()?,
        };
        if let Some(log) = self.event_log.as_mut() {
            log.push(step.record);
        }
        Ok(step)
    }

    fn arrive(&mut self) -> Result<Step, SimError> {
        let customer = self.next_customer;
        let arrival = self.next_arrival;
        if customer < self.record_limit {
            self.outcomes.push(CustomerOutcome {
                index: customer,
                arrival_time: arrival,
                wait: f64::INFINITY,
                service_start: None,
                served_rank: None,
            });
            self.unresolved += 1;
        }
        let zero_wait = self.in_service.is_none();
        if zero_wait {
            self.start_service(Waiter { customer, arrival })?;
        } else {
            self.waiting.push_back(Waiter { customer, arrival });
        }
        self.push_trace();
        self.next_customer += 1;
        // fixed streams that run out leave no further arrival; reaching it is
        // an error only if the run actually needs it
        self.next_arrival = self
            .streams
            .arrival_time(self.next_customer as usize)
            .unwrap_or(f64::INFINITY);
        Ok(Step {
            record: EventRecord {
                time: arrival,
                kind: EventKind::Arrival,
                customer,
            },
            zero_wait,
        })
    }

    fn select_next(&mut self) -> Result<(), SimError> {
        while let Some(front) = self.waiting.front().copied() {
            if self.is_eligible(&front) {
                break;
            }
            self.waiting.pop_front();
            self.abandon(front);
        }
        if let Some(next) = self.waiting.pop_back() {
            debug_assert!(self.is_eligible(&next));
            self.start_service(next)?;
        }
        Ok(())
    }

    fn abandon(&mut self, waiter: Waiter) {
        self.abandoned_count += 1;
        if waiter.customer < self.record_limit {
            self.unresolved -= 1;
        }
        self.push_trace();
    }

    fn start_service(&mut self, waiter: Waiter) -> Result<(), SimError> {
        self.services_started += 1;
        let duration = self
            .streams
            .service_duration(self.services_started)
            .ok_or_else(|| self.exhausted())?;
        self.in_service = Some(InService {
            customer: waiter.customer,
            completion: self.now + duration,
        });
        self.served_count += 1;
        if waiter.customer < self.record_limit {
            let outcome = &mut self.outcomes[waiter.customer as usize];
            outcome.wait = self.now - waiter.arrival;
            outcome.service_start = Some(self.now);
            outcome.served_rank = Some(self.next_rank);
            self.next_rank += 1;
            self.unresolved -= 1;
        }
        Ok(())
    }

    fn exhausted(&self) -> SimError {
        SimError::StreamsExhausted {
            arrivals: self.streams.arrival_times().len(),
            services: self.streams.service_durations().len(),
        }
    }

    /// Event log, when recording was requested.
    pub fn event_log(&self) -> Option<&[EventRecord]> {
        self.event_log.as_deref()
    }

    pub fn into_path(self) -> SamplePath {
        let mut served: Vec<(u64, f64)> = self
            .outcomes
            .iter()
            .filter_map(|o| o.served_rank.map(|r| (r, o.wait)))
            .collect();
        served.sort_unstable_by_key(|&(rank, _)| rank);
        SamplePath {
            params: self.params,
            outcomes: self.outcomes,
            queue_length_trace: self.trace,
            served_waits: served.into_iter().map(|(_, w)| w).collect(),
            warnings: Vec::new(),
        }
    }
}

fn default_max_events(n_customers: u64) -> u64 {
    n_customers.saturating_mul(1000).saturating_add(1_000_000)
}

/// Simulates until each of customers `0..n_customers` has been served or has
/// left. Later customers keep arriving (and pre-empting the queue order) until
/// then, but are not recorded.
///
/// With no deadline and `lambda > mu` most early customers would wait
/// forever; that run stops when customer `n_customers` is due, reports the
/// still-waiting ones as unserved, and attaches a
/// [`SimWarning::TransientRegime`].
pub fn simulate(params: Parameters, n_customers: usize, seed: u64, record_trace: bool) -> Result<SamplePath, SimError> {
    let options = SimOptions {
        record_trace,
        ..SimOptions::default()
    };
    simulate_with(params, n_customers, seed, &options)
}

pub fn simulate_with(
    params: Parameters,
    n_customers: usize,
    seed: u64,
    options: &SimOptions,
) -> Result<SamplePath, SimError> {
    let params = params.validate()?;
    let mut streams = Streams::generate(&params, n_customers.max(1), n_customers.max(1), seed)?;
    simulate_streams(params, n_customers, &mut streams, options)
}

/// [`simulate`] over caller-supplied streams.
pub fn simulate_streams(
    params: Parameters,
    n_customers: usize,
    streams: &mut Streams,
    options: &SimOptions,
) -> Result<SamplePath, SimError> {
    let params = params.validate()?;
    if n_customers == 0 {
        return Err(SimError::NoCustomers);
    }
    let n = n_customers as u64;
    let max_events = options.max_events.unwrap_or_else(|| default_max_events(n));
    let transient = params.is_transient();
    let mut engine = Engine::new(params, streams, n, options);

    while engine.next_customer() < n || engine.unresolved() > 0 {
        if transient && engine.next_customer() >= n {
            // stop before customer n would arrive
            let (_, kind) = engine.next_event();
            if kind == EventKind::Arrival {
                break;
            }
        }
        if engine.events_processed() >= max_events {
            let unresolved = engine.unresolved() + (n - engine.next_customer().min(n));
            let events = engine.events_processed();
            return Err(SimError::Truncated {
                events,
                unresolved,
                partial: Box::new(engine.into_path()),
            });
        }
        engine.step()?;
    }
    let unresolved = engine.unresolved();
    let mut path = engine.into_path();
    if transient {
        path.warnings.push(SimWarning::TransientRegime { unresolved });
    }
    Ok(path)
}

/// Runs the queue from time 0 until the first customer `n >= 1` that finds the
/// server idle, and returns that `n`.
pub fn first_zero_wait_index(params: Parameters, streams: &mut Streams, max_events: u64) -> Result<u64, SimError> {
    let params = params.validate()?;
    let mut engine = Engine::new(params, streams, 0, &SimOptions::default());
    while engine.events_processed() < max_events {
        let step = engine.step()?;
        if step.zero_wait && step.record.customer >= 1 {
            return Ok(step.record.customer);
        }
    }
    Err(SimError::NoRegeneration { events: max_events })
}

/// `W_m` for served ranks `m >= burn_in`. Empty when fewer customers were
/// served.
pub fn served_waits(path: &SamplePath, burn_in: usize) -> Vec<f64> {
    path.served_waits
        .get(burn_in..)
        .map(<[f64]>::to_vec)
        .unwrap_or_default()
}

/// Fraction of customers `n >= burn_in`, served or not, with `D_n = 0`.
pub fn zero_wait_fraction(path: &SamplePath, burn_in: usize) -> f64 {
    let tail = path.outcomes.get(burn_in..).unwrap_or_default();
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().filter(|o| o.wait == 0.0).count() as f64 / tail.len() as f64
}

/// Lengths of the complete regeneration cycles that start at or after
/// customer `burn_in`: gaps between successive zero-wait indices.
pub fn regeneration_cycles(path: &SamplePath, burn_in: usize) -> Vec<u64> {
    let zeros: Vec<u64> = path
        .outcomes
        .iter()
        .filter(|o| o.index as usize >= burn_in && o.wait == 0.0)
        .map(|o| o.index)
        .collect();
    zeros.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Long-run fraction of customers with `D_n = 0` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroWaitEstimate {
    pub fraction: f64,
    /// Regenerative standard error, `sd(L) / (sqrt(K) mean(L)^2)` over the
    /// `K` complete cycles of length `L`.
    pub std_error: f64,
    pub cycles: usize,
}

pub fn zero_wait_estimate(path: &SamplePath, burn_in: usize) -> ZeroWaitEstimate {
    let fraction = zero_wait_fraction(path, burn_in);
    let cycles = regeneration_cycles(path, burn_in);
    let k = cycles.len();
    let std_error = if k < 2 {
        f64::INFINITY
    } else {
        let mean = cycles.iter().map(|&c| c as f64).sum::<f64>() / k as f64;
        let var = cycles.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        var.sqrt() / ((k as f64).sqrt() * mean * mean)
    };
    ZeroWaitEstimate {
        fraction,
        std_error,
        cycles: k,
    }
}
