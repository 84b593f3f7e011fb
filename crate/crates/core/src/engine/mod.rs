//! Fixed time-step AB²M engines.
//!
//! Both engines execute, at every step time `t_k = k * dt` for `k = 0..=K`:
//! admit the trips with `T(i) <= t_k`, complete the trips whose remaining
//! distance is `<= 0`, set `v_k = V(delta / L_N)` and advance
//! `z_{k+1} = z_k + v_k dt`. New trips are back-dated to their actual
//! departure using the previous step's speed, so a trip's characteristic
//! distance equals `X(i) + z(T(i))` for the piecewise-linear `z`.
//!
//! The two engines share every floating-point expression that decides a
//! completion, which makes their `E`, `G`, `v` and `z` series bit-identical.

mod naive;
mod pq;

pub use naive::run_naive;
pub use pq::{run_pq, run_pq_audited, PqAudit, ThetaQueue};

use std::fmt;
use std::str::FromStr;

use crate::demand::{Trip, TripTable};
use crate::error::{ensure_positive, invalid, Result};
use crate::nfd::Nfd;
use crate::units;

/// Supply and simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    network_length_km: f64,
    horizon_s: f64,
    dt_s: f64,
    nfd: Nfd,
}

impl Scenario {
    /// The network starts empty. `horizon_s` is rounded up to a whole number
    /// of steps.
    pub fn new(network_length_km: f64, horizon_s: f64, dt_s: f64, nfd: Nfd) -> Result<Self> {
        ensure_positive("L_N_km", network_length_km)?;
        ensure_positive("t_f_s", horizon_s)?;
        ensure_positive("dt_s", dt_s)?;
        if dt_s > horizon_s {
            return Err(invalid("dt_s", format!("must not exceed t_f_s = {horizon_s}")));
        }
        nfd.validate()?;
        Ok(Scenario {
            network_length_km,
            horizon_s,
            dt_s,
            nfd,
        })
    }

    pub fn network_length_km(&self) -> f64 {
        self.network_length_km
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    pub fn nfd(&self) -> &Nfd {
        &self.nfd
    }

    /// Number of steps `K`; the simulation records steps `0..=K`.
    pub fn steps(&self) -> usize {
        let ratio = self.horizon_s / self.dt_s;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    #[inline]
    pub fn time_at(&self, step: usize) -> f64 {
        step as f64 * self.dt_s
    }

    pub fn with_network_length(&self, network_length_km: f64) -> Result<Self> {
        Scenario::new(network_length_km, self.horizon_s, self.dt_s, self.nfd.clone())
    }

    pub fn with_dt(&self, dt_s: f64) -> Result<Self> {
        Scenario::new(self.network_length_km, self.horizon_s, dt_s, self.nfd.clone())
    }

    pub(crate) fn check_trips(&self, trips: &TripTable) -> Result<()> {
        trips.check_sorted()?;
        if let Some(last) = trips.last_departure_s() {
            if last > self.horizon_s {
                return Err(invalid(
                    "trips",
                    format!("departure {last} s is after t_f = {} s", self.horizon_s),
                ));
            }
        }
        Ok(())
    }
}

/// State of the system after step `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub time_s: f64,
    /// Cumulative started trips `E(t)`.
    pub started: usize,
    /// Cumulative finished trips `G(t)`.
    pub finished: usize,
    /// Active trips `delta(t) = E - G`.
    pub active: usize,
    pub density: f64,
    pub speed_kmh: f64,
    /// Characteristic network traveled distance `z(t)`.
    pub z_km: f64,
    /// Total remaining distance of active trips `m(t)`.
    pub remaining_km: f64,
}

/// Per-trip result of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripOutcome {
    pub id: usize,
    pub depart_time_s: f64,
    pub distance_km: f64,
    /// Characteristic trip distance `theta = X + z(T)`.
    pub theta_km: f64,
    /// Step at which the trip was marked complete.
    pub completion_step: Option<usize>,
}

/// Time series and per-trip outcomes of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub dt_s: f64,
    pub network_length_km: f64,
    pub free_speed: f64,
    pub steps: Vec<StepRecord>,
    pub trips: Vec<TripOutcome>,
}

impl SimOutput {
    pub fn z_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.z_km).collect()
    }

    pub fn speed_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.speed_kmh).collect()
    }

    /// `z(t)` by linear interpolation between steps (exact under the
    /// per-step constant speed). Beyond the last step `z` is extrapolated
    /// with the last speed.
    pub fn z_at(&self, t: f64) -> f64 {
        let k = ((t / self.dt_s).floor().max(0.0) as usize).min(self.steps.len() - 1);
        let step = &self.steps[k];
        step.z_km + units::distance_km(step.speed_kmh, t - step.time_s)
    }

    pub fn completed(&self) -> usize {
        self.steps.last().map_or(0, |s| s.finished)
    }
}

/// Engine selector; both engines are interchangeable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineKind {
    Naive,
    #[default]
    Pq,
}

impl EngineKind {
    pub fn run(self, scenario: &Scenario, trips: &TripTable) -> Result<SimOutput> {
        match self {
            EngineKind::Naive => run_naive(scenario, trips),
            EngineKind::Pq => run_pq(scenario, trips),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Naive => "naive",
            EngineKind::Pq => "pq",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(EngineKind::Naive),
            "pq" => Ok(EngineKind::Pq),
            other => Err(invalid("engine", format!("expected naive or pq, got {other}"))),
        }
    }
}

/// Characteristic trip distance `theta = X + z_at_entry`.
#[inline]
pub fn characteristic_distance(trip: &Trip, z_at_entry: f64) -> f64 {
    trip.distance_km + z_at_entry
}

/// `z` at a departure inside the last step: `z_now - (t - T) v_prev`, never
/// below the previous step's `z`.
#[inline]
pub(crate) fn back_dated_z(z_now: f64, z_prev: f64, elapsed_s: f64, prev_speed: f64) -> f64 {
    (z_now - units::distance_km(prev_speed, elapsed_s)).max(z_prev)
}

/// State shared by both engines: everything except how active trips are
/// stored and scanned.
pub(crate) struct Clock<'a> {
    scenario: &'a Scenario,
    pub step: usize,
    pub z: f64,
    pub z_prev: f64,
    pub prev_speed: f64,
}

impl<'a> Clock<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        let free = scenario.nfd.free_speed();
        Clock {
            scenario,
            step: 0,
            z: 0.0,
            z_prev: 0.0,
            prev_speed: free,
        }
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.scenario.time_at(self.step)
    }

    #[inline]
    pub fn theta(&self, trip: &Trip) -> f64 {
        let elapsed = self.time() - trip.depart_time_s;
        characteristic_distance(trip, back_dated_z(self.z, self.z_prev, elapsed, self.prev_speed))
    }

    #[inline]
    pub fn density(&self, active: usize) -> f64 {
        active as f64 / self.scenario.network_length_km
    }

    /// Records step `k` and advances `z` to step `k + 1`.
    #[inline]
    pub fn finish_step(
        &mut self,
        started: usize,
        finished: usize,
        remaining_km: f64,
        out: &mut Vec<StepRecord>,
    ) {
        let active = started - finished;
        let density = self.density(active);
        let speed = self.scenario.nfd.speed_at(density);
        out.push(StepRecord {
            time_s: self.time(),
            started,
            finished,
            active,
            density,
            speed_kmh: speed,
            z_km: self.z,
            remaining_km,
        });
        self.z_prev = self.z;
        self.z += units::distance_km(speed, self.scenario.dt_s);
        self.prev_speed = speed;
        self.step += 1;
    }
}

pub(crate) fn outcomes(trips: &TripTable) -> Vec<TripOutcome> {
    trips
        .iter()
        .map(|t| TripOutcome {
            id: t.id,
            depart_time_s: t.depart_time_s,
            distance_km: t.distance_km,
            theta_km: f64::NAN,
            completion_step: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_steps() {
        let nfd = Nfd::exponential(50.0, 10.0).unwrap();
        let s = Scenario::new(1.0, 200.0, 25.0, nfd.clone()).unwrap();
        assert_eq!(s.steps(), 8);
        let s = Scenario::new(1.0, 210.0, 25.0, nfd.clone()).unwrap();
        assert_eq!(s.steps(), 9);
        let s = Scenario::new(1.0, 0.3, 0.1, nfd.clone()).unwrap();
        assert_eq!(s.steps(), 3);
        assert!(Scenario::new(1.0, 200.0, -1.0, nfd.clone()).is_err());
        assert!(Scenario::new(0.0, 200.0, 1.0, nfd.clone()).is_err());
        assert!(Scenario::new(1.0, 10.0, 20.0, nfd).is_err());
    }

    #[test]
    fn characteristic_distance_examples() {
        let trip = Trip::new(0.0, 2.0);
        assert_eq!(characteristic_distance(&trip, 0.0), 2.0);
        assert_eq!(characteristic_distance(&trip, 1.5), 3.5);
        let trip = Trip::new(65.0, 1.0);
        let z = 0.6667;
        let theta = characteristic_distance(&trip, back_dated_z(z, 0.4444, 10.0, 32.0));
        assert!((theta - (0.6667 + 1.0 - 32.0 * 10.0 / 3600.0)).abs() < 1e-12);
        assert!((theta - 1.5778).abs() < 1e-4);
    }

    #[test]
    fn engine_kind_parses() {
        assert_eq!("pq".parse::<EngineKind>().unwrap(), EngineKind::Pq);
        assert_eq!("naive".parse::<EngineKind>().unwrap(), EngineKind::Naive);
        assert!("heap".parse::<EngineKind>().is_err());
    }
}
