//! Post-processing: completion and travel times, travel-time statistics and
//! Monte Carlo batches.

use rayon::prelude::*;

use crate::demand::{sample_trips, DemandSpec, TripTable};
use crate::engine::{run_pq, Scenario, SimOutput};
use crate::error::{ensure_positive, invalid, Result};
use crate::units;

/// Histogram bin width used when none is given.
pub const DEFAULT_BIN_WIDTH_S: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelRecord {
    pub trip_id: usize,
    pub depart_time_s: f64,
    pub distance_km: f64,
    pub theta_km: f64,
    pub completion_time_s: Option<f64>,
    pub travel_time_s: Option<f64>,
}

/// Completion time of a trip with characteristic distance `theta`: the first
/// instant at which the piecewise-linear `z` reaches `theta`, or `None` if it
/// does not within the recorded steps.
pub fn completion_time(
    theta_km: f64,
    z_series: &[f64],
    dt_s: f64,
    v_series: &[f64],
) -> Result<Option<f64>> {
    ensure_positive("dt_s", dt_s)?;
    check_series(z_series, v_series)?;
    Ok(completion_time_unchecked(theta_km, z_series, dt_s, v_series))
}

fn check_series(z_series: &[f64], v_series: &[f64]) -> Result<()> {
    if z_series.len() != v_series.len() {
        return Err(invalid("v_series", "must have one value per z value"));
    }
    if let Some(k) = z_series.windows(2).position(|w| w[1] < w[0]) {
        return Err(invalid("z_series", format!("decreases after step {k}")));
    }
    Ok(())
}

fn completion_time_unchecked(theta: f64, z: &[f64], dt: f64, v: &[f64]) -> Option<f64> {
    let k = z.partition_point(|&zk| zk < theta);
    if k == z.len() {
        return None;
    }
    if k == 0 || z[k] == theta {
        return Some(k as f64 * dt);
    }
    let start = (k - 1) as f64 * dt;
    Some(start + units::duration_s(theta - z[k - 1], v[k - 1]))
}

/// Travel time `T_hat - T` of every trip of a run. Completion times are
/// clamped to the departure time against rounding.
pub fn travel_times(output: &SimOutput, trips: &TripTable) -> Result<Vec<TravelRecord>> {
    if output.trips.len() != trips.len() {
        return Err(invalid(
            "trips",
            format!(
                "table has {} trips but the run has {}",
                trips.len(),
                output.trips.len()
            ),
        ));
    }
    let z = output.z_series();
    let v = output.speed_series();
    check_series(&z, &v)?;
    output
        .trips
        .iter()
        .zip(trips)
        .map(|(outcome, trip)| {
            if outcome.id != trip.id
                || outcome.depart_time_s != trip.depart_time_s
                || outcome.distance_km != trip.distance_km
            {
                return Err(invalid(
                    "trips",
                    format!("trip {} does not match the run", trip.id),
                ));
            }
            let completion = if outcome.theta_km.is_nan() {
                None
            } else {
                completion_time_unchecked(outcome.theta_km, &z, output.dt_s, &v)
                    .map(|t| t.max(trip.depart_time_s))
            };
            Ok(TravelRecord {
                trip_id: trip.id,
                depart_time_s: trip.depart_time_s,
                distance_km: trip.distance_km,
                theta_km: outcome.theta_km,
                completion_time_s: completion,
                travel_time_s: completion.map(|t| t - trip.depart_time_s),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Percentiles {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

/// Trip travel-time distribution summary.
#[derive(Debug, Clone, PartialEq)]
pub struct TttdStats {
    pub count: usize,
    pub uncompleted_count: usize,
    pub mean_s: f64,
    /// Sample standard deviation; zero for fewer than two trips.
    pub std_s: f64,
    pub percentiles: Percentiles,
    pub bin_width_s: f64,
    /// Counts of travel times in `[k w, (k + 1) w)`.
    pub histogram: Vec<usize>,
}

/// Travel-time statistics over the completed trips.
pub fn tttd(records: &[TravelRecord], bin_width_s: f64) -> Result<TttdStats> {
    ensure_positive("bin_width_s", bin_width_s)?;
    let mut times: Vec<f64> = records.iter().filter_map(|r| r.travel_time_s).collect();
    let uncompleted_count = records.len() - times.len();
    let count = times.len();
    if count == 0 {
        return Ok(TttdStats {
            count,
            uncompleted_count,
            mean_s: 0.0,
            std_s: 0.0,
            percentiles: Percentiles::default(),
            bin_width_s,
            histogram: Vec::new(),
        });
    }
    let (mean_s, std_s) = mean_std(&times);
    times.sort_by(f64::total_cmp);
    let q = |p: f64| quantile_sorted(&times, p);
    let percentiles = Percentiles {
        p5: q(0.05),
        p25: q(0.25),
        p50: q(0.5),
        p75: q(0.75),
        p95: q(0.95),
    };
    let bins = (times[count - 1] / bin_width_s).floor() as usize + 1;
    let mut histogram = vec![0; bins];
    for t in &times {
        histogram[((t / bin_width_s).floor() as usize).min(bins - 1)] += 1;
    }
    Ok(TttdStats {
        count,
        uncompleted_count,
        mean_s,
        std_s,
        percentiles,
        bin_width_s,
        histogram,
    })
}

/// Linear interpolation between closest ranks.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and sample standard deviation (zero for fewer than two values).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Monte Carlo aggregate over independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub n_runs: usize,
    pub seeds: Vec<u64>,
    pub time_s: Vec<f64>,
    pub mean_delta: Vec<f64>,
    pub std_delta: Vec<f64>,
    pub mean_speed: Vec<f64>,
    pub std_speed: Vec<f64>,
    /// Mean travel time of each run's completed trips.
    pub run_mean_travel_time_s: Vec<f64>,
    /// Statistics over the trips of all runs.
    pub tttd: TttdStats,
}

/// Seed of run `run` of a batch.
pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    base_seed ^ run as u64
}

/// Runs `n_runs` independent realizations of `spec` with the priority-queue
/// engine; run `i` samples with seed `base_seed ^ i`. Runs may execute in
/// parallel; the reduction is in run order.
pub fn run_batch(
    scenario: &Scenario,
    spec: &DemandSpec,
    n_runs: usize,
    base_seed: u64,
) -> Result<BatchStats> {
    run_batch_with_bins(scenario, spec, n_runs, base_seed, DEFAULT_BIN_WIDTH_S)
}

pub fn run_batch_with_bins(
    scenario: &Scenario,
    spec: &DemandSpec,
    n_runs: usize,
    base_seed: u64,
    bin_width_s: f64,
) -> Result<BatchStats> {
    if n_runs == 0 {
        return Err(invalid("runs", "at least one run is required"));
    }
    if spec.is_explicit() && n_runs > 1 {
        return Err(invalid(
            "runs",
            "explicit demand is deterministic and needs a single run",
        ));
    }
    ensure_positive("bin_width_s", bin_width_s)?;
    spec.validate()?;
    let seeds: Vec<u64> = (0..n_runs).map(|i| run_seed(base_seed, i)).collect();
    let runs: Vec<(SimOutput, Vec<TravelRecord>)> = seeds
        .par_iter()
        .map(|&seed| {
            let trips = sample_trips(spec, seed)?;
            let out = run_pq(scenario, &trips)?;
            let records = travel_times(&out, &trips)?;
            Ok((out, records))
        })
        .collect::<Result<_>>()?;

    let steps = runs[0].0.steps.len();
    let time_s: Vec<f64> = runs[0].0.steps.iter().map(|s| s.time_s).collect();
    let column = |k: usize, f: fn(&crate::engine::StepRecord) -> f64| -> (f64, f64) {
        let values: Vec<f64> = runs.iter().map(|(out, _)| f(&out.steps[k])).collect();
        mean_std(&values)
    };
    let mut mean_delta = Vec::with_capacity(steps);
    let mut std_delta = Vec::with_capacity(steps);
    let mut mean_speed = Vec::with_capacity(steps);
    let mut std_speed = Vec::with_capacity(steps);
    for k in 0..steps {
        let (m, s) = column(k, |r| r.active as f64);
        mean_delta.push(m);
        std_delta.push(s);
        let (m, s) = column(k, |r| r.speed_kmh);
        mean_speed.push(m);
        std_speed.push(s);
    }
    let run_mean_travel_time_s = runs
        .iter()
        .map(|(_, records)| {
            let times: Vec<f64> = records.iter().filter_map(|r| r.travel_time_s).collect();
            if times.is_empty() {
                0.0
            } else {
                mean_std(&times).0
            }
        })
        .collect();
    let pooled: Vec<TravelRecord> = runs.into_iter().flat_map(|(_, r)| r).collect();
    Ok(BatchStats {
        n_runs,
        seeds,
        time_s,
        mean_delta,
        std_delta,
        mean_speed,
        std_speed,
        run_mean_travel_time_s,
        tttd: tttd(&pooled, bin_width_s)?,
    })
}
