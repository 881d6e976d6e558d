//! M/M/1 queue with deadline impatience and LIFO service.
//!
//! The crate covers discrete-event simulation of the queue, exact computation
//! of the regeneration time from the input streams, Monte-Carlo estimation of
//! its mean, the closed-form busy-period and limiting waiting-time laws, and
//! the statistics used to compare the two sides.

pub mod analytics;
pub mod cli;
pub mod model;
pub mod sim;
pub mod stats;
pub mod tau;
pub mod util;

pub use analytics::{AnalyticError, AnalyticLaw, LimitingLaw};
pub use model::{ParamError, Parameters, SamplePath, Streams};
pub use sim::{simulate, simulate_with, AbandonmentMode, SimError, SimOptions};
pub use tau::{estimate_m, tau_by_index_sets, EstimateOptions, ReturnLawEstimate, TauError, TauResult};
