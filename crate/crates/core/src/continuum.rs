//! Continuum bathtub reference solvers, integrated with the engine's time
//! step so that differences against the agent engines reflect the model and
//! not the integrator.

use crate::demand::{DemandSpec, DepartureProcess, DistanceDistribution, RateProfile};
use crate::engine::Scenario;
use crate::error::{ensure_non_negative, ensure_positive, invalid, Result};
use crate::units;

/// Aggregate demand: inflow rate `e(t)` in veh/s and the trip distance
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumDemand {
    pub inflow: RateProfile,
    pub distance: DistanceDistribution,
}

impl ContinuumDemand {
    pub fn new(inflow: RateProfile, distance: DistanceDistribution) -> Result<Self> {
        inflow.validate()?;
        distance.validate()?;
        Ok(ContinuumDemand { inflow, distance })
    }

    /// The expected inflow of a sampled demand: its rate shape rescaled so
    /// that the total equals the population.
    pub fn from_spec(spec: &DemandSpec) -> Result<Self> {
        spec.validate()?;
        match spec {
            DemandSpec::Sampled {
                departure:
                    DepartureProcess::PiecewiseConstantRate(profile) | DepartureProcess::Poisson(profile),
                distance,
                population,
            } => {
                let total = profile.total();
                let factor = if total > 0.0 {
                    *population as f64 / total
                } else {
                    0.0
                };
                ContinuumDemand::new(profile.scaled(factor), distance.clone())
            }
            _ => Err(invalid(
                "demand",
                "continuum solvers need a rate-based departure process",
            )),
        }
    }

    /// Mean inflow over each step `[t_k, t_k + dt)`, `k = 0..=K`.
    pub fn step_inflows(&self, scenario: &Scenario) -> Vec<f64> {
        let dt = scenario.dt_s();
        let mut prev = self.inflow.cumulative(0.0);
        (0..=scenario.steps())
            .map(|k| {
                let next = self.inflow.cumulative(scenario.time_at(k + 1));
                let e = (next - prev) / dt;
                prev = next;
                e
            })
            .collect()
    }

    fn stationary_mean(&self) -> Result<f64> {
        if self.distance.is_time_dependent() {
            return Err(invalid(
                "distance",
                "this solver requires a time-independent distance distribution",
            ));
        }
        Ok(self.distance.mean_at(0.0))
    }
}

/// One step of a continuum solution. `delta` is real-valued.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumStep {
    pub time_s: f64,
    pub delta: f64,
    pub density: f64,
    pub speed_kmh: f64,
    pub z_km: f64,
    /// Total remaining distance; only the M-model tracks it.
    pub remaining_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumOutput {
    pub dt_s: f64,
    pub network_length_km: f64,
    pub steps: Vec<ContinuumStep>,
}

impl ContinuumOutput {
    pub fn density_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.density).collect()
    }

    pub fn delta_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.delta).collect()
    }
}

/// Completion rate `delta / D * v` in veh/s.
#[inline]
fn vbm_outflow(delta: f64, mean_km: f64, speed_kmh: f64) -> f64 {
    delta / mean_km * units::km_per_s(speed_kmh)
}

struct Recorder<'a> {
    scenario: &'a Scenario,
    steps: Vec<ContinuumStep>,
}

impl<'a> Recorder<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        Recorder {
            scenario,
            steps: Vec::with_capacity(scenario.steps() + 1),
        }
    }

    /// Records step `k` and returns its speed.
    fn push(&mut self, k: usize, delta: f64, z: f64, remaining: Option<f64>) -> f64 {
        let density = delta / self.scenario.network_length_km();
        let speed = self.scenario.nfd().speed_at(density);
        self.steps.push(ContinuumStep {
            time_s: self.scenario.time_at(k),
            delta,
            density,
            speed_kmh: speed,
            z_km: z,
            remaining_km: remaining,
        });
        speed
    }

    fn finish(self) -> ContinuumOutput {
        ContinuumOutput {
            dt_s: self.scenario.dt_s(),
            network_length_km: self.scenario.network_length_km(),
            steps: self.steps,
        }
    }
}

/// Vickrey's bathtub model `d(delta)/dt = e - delta / D * V(delta / L_N)`,
/// explicit Euler from an empty network.
pub fn solve_vbm(scenario: &Scenario, demand: &ContinuumDemand) -> Result<ContinuumOutput> {
    let mean = demand.stationary_mean()?;
    let inflow = demand.step_inflows(scenario);
    let dt = scenario.dt_s();
    let mut rec = Recorder::new(scenario);
    let (mut delta, mut z) = (0.0, 0.0);
    for (k, e) in inflow.into_iter().enumerate() {
        let v = rec.push(k, delta, z, None);
        delta = (delta + dt * (e - vbm_outflow(delta, mean, v))).max(0.0);
        z += units::distance_km(v, dt);
    }
    Ok(rec.finish())
}

/// Generalized bathtub model in integral form, from an empty network:
/// `delta(t) = sum over past steps of e(s) dt P(X > z(t) - z(s))`.
///
/// Inflow during step `j` enters at the mean of `z` over the step, which is
/// exact for a uniform inflow under the step's constant speed. O(K²).
pub fn solve_gbm(scenario: &Scenario, demand: &ContinuumDemand) -> Result<ContinuumOutput> {
    let inflow = demand.step_inflows(scenario);
    let dt = scenario.dt_s();
    let mut rec = Recorder::new(scenario);
    // (entry z, departure time, vehicles) per past step with inflow
    let mut cohorts: Vec<(f64, f64, f64)> = Vec::new();
    let mut z = 0.0;
    for (k, e) in inflow.into_iter().enumerate() {
        let delta: f64 = cohorts
            .iter()
            .map(|&(z_entry, t, n)| n * demand.distance.survival_at(t, z - z_entry))
            .sum();
        let v = rec.push(k, delta, z, None);
        let z_next = z + units::distance_km(v, dt);
        if e > 0.0 {
            let t_mid = scenario.time_at(k) + 0.5 * dt;
            cohorts.push((0.5 * (z + z_next), t_mid, e * dt));
        }
        z = z_next;
    }
    Ok(rec.finish())
}

/// M-model from an empty network.
pub fn solve_mm(
    scenario: &Scenario,
    demand: &ContinuumDemand,
    alpha: f64,
    d_star_km: f64,
) -> Result<ContinuumOutput> {
    solve_mm_from(scenario, demand, alpha, d_star_km, 0.0, 0.0)
}

/// M-model from an initial state `(delta0, m0)`:
///
/// `dm/dt = e D - delta V`,
/// `d(delta)/dt = e - delta / D * V * (1 - alpha (m / (delta D*) - 1))`.
///
/// With `alpha = 0` the `delta` trajectory is identical to [`solve_vbm`].
pub fn solve_mm_from(
    scenario: &Scenario,
    demand: &ContinuumDemand,
    alpha: f64,
    d_star_km: f64,
    delta0: f64,
    m0: f64,
) -> Result<ContinuumOutput> {
    ensure_non_negative("alpha", alpha)?;
    ensure_positive("d_star_km", d_star_km)?;
    ensure_non_negative("initial delta", delta0)?;
    ensure_non_negative("initial m", m0)?;
    let mean = demand.stationary_mean()?;
    let inflow = demand.step_inflows(scenario);
    let dt = scenario.dt_s();
    let mut rec = Recorder::new(scenario);
    let (mut delta, mut m, mut z) = (delta0, m0, 0.0);
    for (k, e) in inflow.into_iter().enumerate() {
        let v = rec.push(k, delta, z, Some(m));
        let correction = if delta > 0.0 {
            1.0 - alpha * (m / (delta * d_star_km) - 1.0)
        } else {
            1.0
        };
        let outflow = vbm_outflow(delta, mean, v) * correction;
        let production = delta * units::km_per_s(v);
        delta = (delta + dt * (e - outflow)).max(0.0);
        m = (m + dt * (e * mean - production)).max(0.0);
        z += units::distance_km(v, dt);
    }
    Ok(rec.finish())
}

/// Largest absolute difference between two equally long series.
pub fn sup_norm_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
