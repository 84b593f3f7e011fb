//! Agent-based bathtub model (AB²M) in relative space.
//!
//! Each trip is described only by its departure time and distance. All active
//! trips progress at a common speed given by a network fundamental diagram,
//! and a trip completes once the characteristic network traveled distance
//! `z(t)` reaches its characteristic trip distance `theta = X + z(T)`.
//!
//! The crate provides:
//!
//! * [`demand`]: trip tables, departure processes and distance distributions.
//! * [`nfd`]: speed-density relations and smoothness bounds.
//! * [`engine`]: the fixed-step naive engine and the priority-queue engine,
//!   which produce bit-identical outputs.
//! * [`continuum`]: Vickrey, generalized (integral form) and M-model reference
//!   solvers.
//! * [`scaling`]: flow-based and distance-based scaling.
//! * [`analysis`]: completion times, travel-time statistics and Monte Carlo
//!   batches.
//! * [`io`]: CSV readers and writers.

pub mod analysis;
pub mod continuum;
pub mod demand;
pub mod engine;
mod error;
pub mod io;
pub mod nfd;
pub mod scaling;
pub mod units;

pub use analysis::{
    completion_time, run_batch, travel_times, tttd, BatchStats, TravelRecord, TttdStats,
};
pub use continuum::{solve_gbm, solve_mm, solve_vbm, ContinuumDemand, ContinuumOutput};
pub use demand::{
    average_inflow, sample_trips, sort_by_departure, suggested_timestep, DemandSpec,
    DepartureProcess, DistanceDistribution, RateProfile, Trip, TripTable,
};
pub use engine::{run_naive, run_pq, EngineKind, Scenario, SimOutput, StepRecord, TripOutcome};
pub use error::{Error, Result, TripGroup};
pub use nfd::Nfd;
pub use scaling::{min_scaling_ratio, scale_distance, scale_flow, ScalingKind, ScalingSpec};
