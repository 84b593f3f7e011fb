//! Runtime sweeps of the naive and priority-queue engines.
//!
//! A sweep samples a demand of each requested size, flow-scales the network
//! length with it so that densities stay comparable, and times the setup
//! (sampling), simulate and post-process phases separately. Each phase time
//! is the median of several repetitions after one discarded warm-up run.

use std::io::Write;
use std::time::Instant;

use bathtub_core::demand::DEFAULT_TIMESTEP_FLOOR_S;
use bathtub_core::io::format_g;
use bathtub_core::{
    average_inflow, sample_trips, suggested_timestep, travel_times, DemandSpec, DepartureProcess,
    DistanceDistribution, EngineKind, Error, Nfd, RateProfile, Result, Scenario,
};

/// Minimum number of timed repetitions per point.
pub const MIN_REPETITIONS: usize = 5;

/// How the time step follows the demand size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimestepPolicy {
    Fixed(f64),
    /// `dt = 1 / (e_bar L_N) = t_f / I`, one departure per step on average,
    /// optionally clamped from below.
    PerInflow { floor_s: Option<f64> },
}

impl TimestepPolicy {
    pub fn timestep(&self, population: usize, network_length_km: f64, horizon_s: f64) -> Result<f64> {
        match *self {
            TimestepPolicy::Fixed(dt) => Ok(dt),
            TimestepPolicy::PerInflow { floor_s } => {
                let e_bar = average_inflow(population, network_length_km, horizon_s)?;
                let dt = suggested_timestep(e_bar, network_length_km)?;
                Ok(dt.max(floor_s.unwrap_or(0.0)).min(horizon_s))
            }
        }
    }
}

/// Scenario and demand shape shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTemplate {
    pub nfd: Nfd,
    pub horizon_s: f64,
    /// Trips per km of network; `L_N = I / trips_per_km`.
    pub trips_per_km: f64,
    pub distance: DistanceDistribution,
    pub timestep: TimestepPolicy,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SweepTemplate {
    /// 30 minutes of Poisson departures with exponential distances of mean
    /// 2 km on an exponential NFD, at about 40% of capacity.
    fn default() -> Self {
        SweepTemplate {
            nfd: Nfd::exponential(50.0, 150.0).expect("valid NFD"),
            horizon_s: 1800.0,
            trips_per_km: 150.0,
            distance: DistanceDistribution::NegExp { mean_km: 2.0 },
            timestep: TimestepPolicy::PerInflow { floor_s: None },
            repetitions: MIN_REPETITIONS,
            seed: 1,
        }
    }
}

impl SweepTemplate {
    pub fn network_length_km(&self, population: usize) -> f64 {
        population as f64 / self.trips_per_km
    }

    pub fn demand(&self, population: usize) -> Result<DemandSpec> {
        Ok(DemandSpec::Sampled {
            departure: DepartureProcess::Poisson(RateProfile::constant(1.0, self.horizon_s)?),
            distance: self.distance.clone(),
            population,
        })
    }

    pub fn scenario(&self, population: usize) -> Result<Scenario> {
        let l = self.network_length_km(population);
        let dt = self.timestep.timestep(population, l, self.horizon_s)?;
        Scenario::new(l, self.horizon_s, dt, self.nfd.clone())
    }

    /// The same template with the auto time step floored at the usual
    /// default.
    pub fn with_default_floor(mut self) -> Self {
        if let TimestepPolicy::PerInflow { .. } = self.timestep {
            self.timestep = TimestepPolicy::PerInflow {
                floor_s: Some(DEFAULT_TIMESTEP_FLOOR_S),
            };
        }
        self
    }
}

/// Median phase timings of one engine at one demand size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub engine: EngineKind,
    pub population: usize,
    pub network_length_km: f64,
    pub dt_s: f64,
    pub horizon_s: f64,
    pub repetitions: usize,
    pub setup_s: f64,
    pub simulate_s: f64,
    pub post_s: f64,
}

impl BenchPoint {
    pub fn wall_time_s(&self) -> f64 {
        self.setup_s + self.simulate_s + self.post_s
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times one engine at one demand size.
pub fn measure(engine: EngineKind, population: usize, template: &SweepTemplate) -> Result<BenchPoint> {
    let repetitions = template.repetitions.max(MIN_REPETITIONS);
    let scenario = template.scenario(population)?;
    let spec = template.demand(population)?;
    let mut setup = Vec::with_capacity(repetitions);
    let mut simulate = Vec::with_capacity(repetitions);
    let mut post = Vec::with_capacity(repetitions);
    for rep in 0..=repetitions {
        let t0 = Instant::now();
        let trips = sample_trips(&spec, template.seed)?;
        let t1 = Instant::now();
        let out = engine.run(&scenario, &trips)?;
        let t2 = Instant::now();
        let records = travel_times(&out, &trips)?;
        let t3 = Instant::now();
        std::hint::black_box(&records);
        if rep > 0 {
            setup.push((t1 - t0).as_secs_f64());
            simulate.push((t2 - t1).as_secs_f64());
            post.push((t3 - t2).as_secs_f64());
        }
    }
    Ok(BenchPoint {
        engine,
        population,
        network_length_km: scenario.network_length_km(),
        dt_s: scenario.dt_s(),
        horizon_s: scenario.horizon_s(),
        repetitions,
        setup_s: median(setup),
        simulate_s: median(simulate),
        post_s: median(post),
    })
}

/// Times `engine` at every demand size, sequentially.
pub fn sweep(
    engine: EngineKind,
    populations: &[usize],
    template: &SweepTemplate,
) -> Result<Vec<BenchPoint>> {
    if populations.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Validation {
            field: "populations".into(),
            reason: "must be sorted ascending".into(),
        });
    }
    populations
        .iter()
        .map(|&n| measure(engine, n, template))
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_log_log(xy: &[(f64, f64)]) -> Result<f64> {
    let insufficient = |reason: &str| Error::Validation {
        field: "points".into(),
        reason: reason.into(),
    };
    if xy.len() < 3 {
        return Err(insufficient("at least three points are required"));
    }
    if xy.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(insufficient("sizes and times must be positive"));
    }
    let (lo, hi) = xy
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(x, _)| (lo.min(x), hi.max(x)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(insufficient("sizes must span at least two decades"));
    }
    let n = xy.len() as f64;
    let logs: Vec<(f64, f64)> = xy.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Log-log slope of simulate-phase time against demand size.
pub fn fit_slope(points: &[BenchPoint]) -> Result<f64> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.population as f64, p.simulate_s))
        .collect();
    fit_log_log(&xy)
}

/// `engine,I,L_N_km,dt_s,t_setup_s,t_sim_s,t_post_s`
pub fn write_csv<W: Write>(points: &[BenchPoint], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["engine", "I", "L_N_km", "dt_s", "t_setup_s", "t_sim_s", "t_post_s"])?;
    for p in points {
        w.write_record([
            p.engine.name().to_string(),
            p.population.to_string(),
            format_g(p.network_length_km),
            format_g(p.dt_s),
            format_g(p.setup_s),
            format_g(p.simulate_s),
            format_g(p.post_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}
