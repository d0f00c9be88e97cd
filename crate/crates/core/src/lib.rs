//! Simulation engine for online caching under adversarial and stochastic
//! request arrivals.
//!
//! A cache of `C` files serves one request per slot from a library of `L`
//! files, earning a unit reward per hit and paying `D` per file fetched.
//! The crate provides:
//!
//! - the LFU, FTPL, and Wait-then-FTPL policies plus a static comparator,
//!   behind one slot-by-slot contract ([`policies`]);
//! - request sources: i.i.d. popularity draws (dyadic, Zipf, explicit),
//!   round-robin and phase-based adversaries, and trace replay
//!   ([`generators`], [`trace`]);
//! - regret and switch-cost accounting for both the unrestricted and the
//!   restricted-switching settings ([`metrics`], [`model`]);
//! - closed-form evaluators of the known regret bounds ([`bounds`]);
//! - a seeded, reproducible multi-trial harness with CSV output
//!   ([`harness`]).

pub mod bounds;
pub mod error;
pub mod generators;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod trace;

pub use error::{Error, Result};
pub use generators::{PopularityDistribution, RequestGenerator};
pub use harness::{run_episode, run_trials, sweep, AggregateSeries, ExperimentConfig, MetricKind};
pub use metrics::{EpisodeRecord, RegretSeries};
pub use model::{CacheSet, CountState, ProblemConfig, UpdateSchedule};
pub use policies::{LearningRateSchedule, Policy, PolicySpec, RateKind};
