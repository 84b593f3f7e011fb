//! Demand: the joint distribution of departure times and trip distances, and
//! its realization as a table of trips sorted by departure time.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Exp1, LogNormal};
use statrs::function::erf::erfc;

use crate::error::{ensure_non_negative, ensure_positive, invalid, Result};

/// Lower clamp applied to automatically chosen time steps, in seconds.
pub const DEFAULT_TIMESTEP_FLOOR_S: f64 = 1.0;

/// A single trip: departure time `T(i)` and distance `X(i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    /// 1-based index in departure order.
    pub id: usize,
    pub depart_time_s: f64,
    pub distance_km: f64,
}

impl Trip {
    pub fn new(depart_time_s: f64, distance_km: f64) -> Self {
        Trip {
            id: 0,
            depart_time_s,
            distance_km,
        }
    }

    fn validate(&self) -> Result<()> {
        ensure_non_negative("trip depart_time_s", self.depart_time_s)?;
        ensure_positive("trip distance_km", self.distance_km)
    }
}

/// Trips sorted by departure time with ids `1..=I` in that order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripTable {
    trips: Vec<Trip>,
}

impl TripTable {
    /// Validates the trips, stable-sorts them by departure time and assigns
    /// ids in sorted order. Incoming ids are ignored.
    pub fn from_trips(trips: Vec<Trip>) -> Result<Self> {
        for trip in &trips {
            trip.validate()?;
        }
        Ok(sort_by_departure(TripTable { trips }))
    }

    /// Builds a table from `(depart_time_s, distance_km)` pairs.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        Self::from_trips(pairs.into_iter().map(|(t, x)| Trip::new(t, x)).collect())
    }

    pub fn empty() -> Self {
        TripTable::default()
    }

    pub fn trips(&self) -> &[Trip] {
        &self.trips
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trip> {
        self.trips.iter()
    }

    pub fn last_departure_s(&self) -> Option<f64> {
        self.trips.last().map(|t| t.depart_time_s)
    }

    /// Checks the ordering invariant: ids are `1..=I` and departures are
    /// non-decreasing.
    pub fn check_sorted(&self) -> Result<()> {
        for (k, trip) in self.trips.iter().enumerate() {
            if trip.id != k + 1 {
                return Err(invalid(
                    "trips",
                    format!("trip at position {} has id {}", k + 1, trip.id),
                ));
            }
            if k > 0 && self.trips[k - 1].depart_time_s > trip.depart_time_s {
                return Err(invalid(
                    "trips",
                    format!("trip {} departs before trip {}", trip.id, k),
                ));
            }
        }
        Ok(())
    }

    pub fn into_trips(self) -> Vec<Trip> {
        self.trips
    }
}

impl<'a> IntoIterator for &'a TripTable {
    type Item = &'a Trip;
    type IntoIter = std::slice::Iter<'a, Trip>;

    fn into_iter(self) -> Self::IntoIter {
        self.trips.iter()
    }
}

/// Stable sort on departure time; ids are reassigned `1..=I` in sorted order.
pub fn sort_by_departure(table: TripTable) -> TripTable {
    let mut trips = table.trips;
    trips.sort_by(|a, b| a.depart_time_s.total_cmp(&b.depart_time_s));
    for (k, trip) in trips.iter_mut().enumerate() {
        trip.id = k + 1;
    }
    TripTable { trips }
}

/// Piecewise-constant rate on `[pieces[0].0, horizon_s)`. Each piece starts at
/// its `t_start_s` and lasts until the next piece (or the horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    /// `(t_start_s, rate_per_s)`, strictly increasing in `t_start_s`.
    pub pieces: Vec<(f64, f64)>,
    pub horizon_s: f64,
}

impl RateProfile {
    pub fn new(pieces: Vec<(f64, f64)>, horizon_s: f64) -> Result<Self> {
        let profile = RateProfile { pieces, horizon_s };
        profile.validate()?;
        Ok(profile)
    }

    /// Constant rate over `[0, horizon_s)`.
    pub fn constant(rate_per_s: f64, horizon_s: f64) -> Result<Self> {
        Self::new(vec![(0.0, rate_per_s)], horizon_s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(invalid("rate pieces", "at least one piece is required"));
        }
        for (k, &(start, rate)) in self.pieces.iter().enumerate() {
            ensure_non_negative("rate piece t_start_s", start)?;
            ensure_non_negative("rate", rate)?;
            if k > 0 && start <= self.pieces[k - 1].0 {
                return Err(invalid(
                    "rate pieces",
                    "breakpoints must be strictly increasing",
                ));
            }
        }
        ensure_positive("horizon_s", self.horizon_s)?;
        let last = self.pieces[self.pieces.len() - 1].0;
        if self.horizon_s <= last {
            return Err(invalid(
                "horizon_s",
                format!("must exceed the last breakpoint {last}"),
            ));
        }
        Ok(())
    }

    /// `(start, end, rate)` for each piece.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.pieces.iter().enumerate().map(move |(k, &(start, rate))| {
            let end = self
                .pieces
                .get(k + 1)
                .map_or(self.horizon_s, |&(next, _)| next);
            (start, end, rate)
        })
    }

    /// Rate at time `t`; zero outside the profile.
    pub fn rate_at(&self, t: f64) -> f64 {
        self.segments()
            .find(|&(start, end, _)| t >= start && t < end)
            .map_or(0.0, |(_, _, rate)| rate)
    }

    /// Integral of the rate over `[0, t]`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (start, end, rate) in self.segments() {
            if t <= start {
                break;
            }
            total += rate * (t.min(end) - start);
        }
        total
    }

    /// Integral of the rate over the whole profile.
    pub fn total(&self) -> f64 {
        self.segments()
            .map(|(start, end, rate)| rate * (end - start))
            .sum()
    }

    /// Smallest `t` with `cumulative(t) >= mass`, for `0 <= mass <= total()`.
    fn inverse_cumulative(&self, mass: f64) -> f64 {
        let mut acc = 0.0;
        let mut last_end = self.pieces[0].0;
        for (start, end, rate) in self.segments() {
            last_end = end;
            if rate <= 0.0 {
                continue;
            }
            let piece = rate * (end - start);
            if acc + piece >= mass {
                return (start + (mass - acc) / rate).min(end);
            }
            acc += piece;
        }
        last_end
    }

    /// Same shape, every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RateProfile {
        RateProfile {
            pieces: self.pieces.iter().map(|&(t, r)| (t, r * factor)).collect(),
            horizon_s: self.horizon_s,
        }
    }
}

/// How departure times are generated.
#[derive(Debug, Clone, PartialEq)]
pub enum DepartureProcess {
    /// Given departure instants; the population must equal their count.
    ExplicitTimes(Vec<f64>),
    /// Deterministic: trips are apportioned to pieces in proportion to
    /// `rate * length` and placed at the midpoints of equal sub-intervals.
    PiecewiseConstantRate(RateProfile),
    /// Stochastic: a Poisson process with the given intensity shape,
    /// conditioned on producing exactly `population` departures.
    Poisson(RateProfile),
}

impl DepartureProcess {
    pub fn validate(&self, population: usize) -> Result<()> {
        match self {
            DepartureProcess::ExplicitTimes(times) => {
                for (k, &t) in times.iter().enumerate() {
                    ensure_non_negative("departure time", t)?;
                    if k > 0 && t < times[k - 1] {
                        return Err(invalid("departure times", "must be sorted"));
                    }
                }
                if times.len() != population {
                    return Err(invalid(
                        "population",
                        format!(
                            "{population} does not match {} explicit departure times",
                            times.len()
                        ),
                    ));
                }
                Ok(())
            }
            DepartureProcess::PiecewiseConstantRate(profile)
            | DepartureProcess::Poisson(profile) => {
                profile.validate()?;
                if population > 0 && profile.total() <= 0.0 {
                    return Err(invalid("rate", "all rates are zero"));
                }
                Ok(())
            }
        }
    }

    pub fn rate_profile(&self) -> Option<&RateProfile> {
        match self {
            DepartureProcess::ExplicitTimes(_) => None,
            DepartureProcess::PiecewiseConstantRate(p) | DepartureProcess::Poisson(p) => Some(p),
        }
    }

    /// Expected number of departures implied by the rates, rounded; `None`
    /// for explicit times.
    pub fn implied_population(&self) -> Option<usize> {
        self.rate_profile()
            .map(|p| p.total().round().max(0.0) as usize)
    }

    fn sample_times(&self, population: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            DepartureProcess::ExplicitTimes(times) => times.clone(),
            DepartureProcess::PiecewiseConstantRate(profile) => {
                let counts = apportion(profile, population);
                let mut times = Vec::with_capacity(population);
                for ((start, end, _), n) in profile.segments().zip(counts) {
                    let width = (end - start) / n as f64;
                    times.extend((0..n).map(|k| start + (k as f64 + 0.5) * width));
                }
                times
            }
            DepartureProcess::Poisson(profile) => {
                // Uniform order statistics from normalized partial sums of
                // exponential spacings, mapped through the inverse intensity.
                let spacings: Vec<f64> = (0..=population).map(|_| Exp1.sample(rng)).collect();
                let total_spacing: f64 = spacings.iter().sum();
                let mass = profile.total();
                let mut acc = 0.0;
                spacings[..population]
                    .iter()
                    .map(|s| {
                        acc += s;
                        profile.inverse_cumulative(acc / total_spacing * mass)
                    })
                    .collect()
            }
        }
    }
}

/// Largest-remainder apportionment of `population` trips over the pieces of
/// `profile`, proportional to `rate * length`.
fn apportion(profile: &RateProfile, population: usize) -> Vec<usize> {
    let weights: Vec<f64> = profile
        .segments()
        .map(|(start, end, rate)| rate * (end - start))
        .collect();
    let total: f64 = weights.iter().sum();
    if population == 0 || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights
        .iter()
        .map(|w| population as f64 * w / total)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if assigned <= population {
        for &k in order.iter().cycle().take(population - assigned) {
            counts[k] += 1;
        }
    } else {
        // only reachable through the floor tolerance
        let mut excess = assigned - population;
        for &k in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if counts[k] > 0 {
                counts[k] -= 1;
                excess -= 1;
            }
        }
    }
    counts
}

/// Trip distance distribution, possibly time-dependent.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceDistribution {
    /// Negative exponential with the given mean.
    NegExp { mean_km: f64 },
    Constant { d_km: f64 },
    /// `ln X ~ N(mu_log, sigma_log^2)`.
    LogNormal { mu_log: f64, sigma_log: f64 },
    /// `(distance_km, weight)` pairs.
    DiscreteTable(Vec<(f64, f64)>),
    /// `(t_start_s, distribution)` pairs; the piece with the largest start not
    /// after `t` applies, and the first piece applies before its start.
    PiecewiseInTime(Vec<(f64, DistanceDistribution)>),
}

impl DistanceDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistanceDistribution::NegExp { mean_km } => ensure_positive("mean_km", *mean_km),
            DistanceDistribution::Constant { d_km } => ensure_positive("d_km", *d_km),
            DistanceDistribution::LogNormal {
                mu_log,
                sigma_log,
            } => {
                if !mu_log.is_finite() {
                    return Err(invalid("mu_log", "must be finite"));
                }
                ensure_positive("sigma_log", *sigma_log)
            }
            DistanceDistribution::DiscreteTable(entries) => {
                if entries.is_empty() {
                    return Err(invalid("distance table", "must not be empty"));
                }
                for &(x, w) in entries {
                    ensure_positive("distance table distance_km", x)?;
                    ensure_positive("distance table weight", w)?;
                }
                Ok(())
            }
            DistanceDistribution::PiecewiseInTime(pieces) => {
                if pieces.is_empty() {
                    return Err(invalid("distance pieces", "at least one piece is required"));
                }
                for (k, (start, dist)) in pieces.iter().enumerate() {
                    ensure_non_negative("distance piece t_start_s", *start)?;
                    if k > 0 && *start <= pieces[k - 1].0 {
                        return Err(invalid(
                            "distance pieces",
                            "breakpoints must be strictly increasing",
                        ));
                    }
                    if matches!(dist, DistanceDistribution::PiecewiseInTime(_)) {
                        return Err(invalid("distance pieces", "pieces cannot be nested"));
                    }
                    dist.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, DistanceDistribution::PiecewiseInTime(p) if p.len() > 1)
    }

    /// The time-independent distribution active at time `t`.
    pub fn at(&self, t: f64) -> &DistanceDistribution {
        match self {
            DistanceDistribution::PiecewiseInTime(pieces) => {
                let idx = pieces.partition_point(|(start, _)| *start <= t);
                &pieces[idx.saturating_sub(1)].1
            }
            other => other,
        }
    }

    /// Mean distance `D(t)` of trips departing at `t`.
    pub fn mean_at(&self, t: f64) -> f64 {
        match self.at(t) {
            DistanceDistribution::NegExp { mean_km } => *mean_km,
            DistanceDistribution::Constant { d_km } => *d_km,
            DistanceDistribution::LogNormal {
                mu_log,
                sigma_log,
            } => (mu_log + 0.5 * sigma_log * sigma_log).exp(),
            DistanceDistribution::DiscreteTable(entries) => {
                let total: f64 = entries.iter().map(|e| e.1).sum();
                entries.iter().map(|(x, w)| x * w).sum::<f64>() / total
            }
            DistanceDistribution::PiecewiseInTime(_) => unreachable!("pieces are not nested"),
        }
    }

    /// Survival function `P(X > x)` for trips departing at `t`: the share of
    /// trips still active after traveling `x` km.
    pub fn survival_at(&self, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self.at(t) {
            DistanceDistribution::NegExp { mean_km } => (-x / mean_km).exp(),
            DistanceDistribution::Constant { d_km } => {
                if x < *d_km {
                    1.0
                } else {
                    0.0
                }
            }
            DistanceDistribution::LogNormal {
                mu_log,
                sigma_log,
            } => 0.5 * erfc((x.ln() - mu_log) / (sigma_log * std::f64::consts::SQRT_2)),
            DistanceDistribution::DiscreteTable(entries) => {
                let total: f64 = entries.iter().map(|e| e.1).sum();
                entries
                    .iter()
                    .filter(|(d, _)| *d > x)
                    .map(|e| e.1)
                    .sum::<f64>()
                    / total
            }
            DistanceDistribution::PiecewiseInTime(_) => unreachable!("pieces are not nested"),
        }
    }

    /// Every distance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DistanceDistribution {
        match self {
            DistanceDistribution::NegExp { mean_km } => DistanceDistribution::NegExp {
                mean_km: mean_km * factor,
            },
            DistanceDistribution::Constant { d_km } => DistanceDistribution::Constant {
                d_km: d_km * factor,
            },
            DistanceDistribution::LogNormal {
                mu_log,
                sigma_log,
            } => DistanceDistribution::LogNormal {
                mu_log: mu_log + factor.ln(),
                sigma_log: *sigma_log,
            },
            DistanceDistribution::DiscreteTable(entries) => DistanceDistribution::DiscreteTable(
                entries.iter().map(|&(x, w)| (x * factor, w)).collect(),
            ),
            DistanceDistribution::PiecewiseInTime(pieces) => DistanceDistribution::PiecewiseInTime(
                pieces
                    .iter()
                    .map(|(t, d)| (*t, d.scaled(factor)))
                    .collect(),
            ),
        }
    }

    fn sampler(&self) -> Result<DistanceSampler> {
        Ok(match self {
            DistanceDistribution::PiecewiseInTime(pieces) => DistanceSampler::Piecewise(
                pieces
                    .iter()
                    .map(|(t, d)| Ok((*t, d.sampler()?)))
                    .collect::<Result<_>>()?,
            ),
            DistanceDistribution::NegExp { mean_km } => DistanceSampler::NegExp(
                Exp::new(1.0 / mean_km).map_err(|e| invalid("mean_km", e.to_string()))?,
            ),
            DistanceDistribution::Constant { d_km } => DistanceSampler::Constant(*d_km),
            DistanceDistribution::LogNormal {
                mu_log,
                sigma_log,
            } => DistanceSampler::LogNormal(
                LogNormal::new(*mu_log, *sigma_log)
                    .map_err(|e| invalid("sigma_log", e.to_string()))?,
            ),
            DistanceDistribution::DiscreteTable(entries) => DistanceSampler::Table(
                entries.iter().map(|e| e.0).collect(),
                WeightedIndex::new(entries.iter().map(|e| e.1))
                    .map_err(|e| invalid("distance table weight", e.to_string()))?,
            ),
        })
    }
}

enum DistanceSampler {
    NegExp(Exp<f64>),
    Constant(f64),
    LogNormal(LogNormal<f64>),
    Table(Vec<f64>, WeightedIndex<f64>),
    Piecewise(Vec<(f64, DistanceSampler)>),
}

impl DistanceSampler {
    fn sample(&self, t: f64, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            DistanceSampler::NegExp(d) => d.sample(rng),
            DistanceSampler::Constant(x) => *x,
            DistanceSampler::LogNormal(d) => d.sample(rng),
            DistanceSampler::Table(values, index) => values[index.sample(rng)],
            DistanceSampler::Piecewise(pieces) => {
                let idx = pieces.partition_point(|(start, _)| *start <= t);
                pieces[idx.saturating_sub(1)].1.sample(t, rng)
            }
        }
    }
}

/// Either a fixed trip table or a recipe for sampling one.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandSpec {
    Explicit(TripTable),
    Sampled {
        departure: DepartureProcess,
        distance: DistanceDistribution,
        population: usize,
    },
}

impl DemandSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DemandSpec::Explicit(table) => table.check_sorted(),
            DemandSpec::Sampled {
                departure,
                distance,
                population,
            } => {
                departure.validate(*population)?;
                distance.validate()
            }
        }
    }

    pub fn population(&self) -> usize {
        match self {
            DemandSpec::Explicit(table) => table.len(),
            DemandSpec::Sampled { population, .. } => *population,
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self, DemandSpec::Explicit(_))
    }
}

/// Realizes a demand specification as a sorted trip table. A pure function of
/// `(spec, seed)`: departures are generated first, then one distance per trip
/// in departure order from the distribution active at its departure time.
pub fn sample_trips(spec: &DemandSpec, seed: u64) -> Result<TripTable> {
    spec.validate()?;
    match spec {
        DemandSpec::Explicit(table) => Ok(table.clone()),
        DemandSpec::Sampled {
            departure,
            distance,
            population,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let times = departure.sample_times(*population, &mut rng);
            let sampler = distance.sampler()?;
            let trips = times
                .into_iter()
                .map(|t| Trip::new(t, sampler.sample(t, &mut rng)))
                .collect();
            TripTable::from_trips(trips)
        }
    }
}

/// Average inflow per unit network length, `I / (L_N * t_f)`, in veh/(km s).
pub fn average_inflow(trips: usize, network_length_km: f64, horizon_s: f64) -> Result<f64> {
    ensure_positive("L_N_km", network_length_km)?;
    ensure_positive("t_f_s", horizon_s)?;
    Ok(trips as f64 / (network_length_km * horizon_s))
}

/// Largest time step that captures on average one trip start per step,
/// `1 / (e_bar * L_N)`.
pub fn suggested_timestep(avg_inflow: f64, network_length_km: f64) -> Result<f64> {
    ensure_positive("average inflow", avg_inflow)?;
    ensure_positive("L_N_km", network_length_km)?;
    Ok(1.0 / (avg_inflow * network_length_km))
}

/// Clamps a suggested time step to `[floor_s, horizon_s]`.
pub fn clamp_timestep(dt_s: f64, floor_s: f64, horizon_s: f64) -> f64 {
    dt_s.max(floor_s).min(horizon_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rate_demand(rate: f64, horizon: f64, population: usize) -> DemandSpec {
        DemandSpec::Sampled {
            departure: DepartureProcess::PiecewiseConstantRate(
                RateProfile::constant(rate, horizon).unwrap(),
            ),
            distance: DistanceDistribution::Constant { d_km: 1.0 },
            population,
        }
    }

    #[test]
    fn explicit_demand_is_reindexed_by_departure() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|k| ((9 - k) as f64 * 3.0, 1.0 + k as f64)).collect();
        let table = TripTable::from_pairs(pairs).unwrap();
        let spec = DemandSpec::Explicit(table.clone());
        let sampled = sample_trips(&spec, 7).unwrap();
        assert_eq!(sampled, table);
        assert_eq!(sampled.len(), 10);
        for (k, trip) in sampled.iter().enumerate() {
            assert_eq!(trip.id, k + 1);
            assert_eq!(trip.depart_time_s, k as f64 * 3.0);
            assert_eq!(trip.distance_km, 10.0 - k as f64);
        }
    }

    #[test]
    fn deterministic_rate_places_midpoints() {
        let table = sample_trips(&rate_demand(0.1, 200.0, 20), 0).unwrap();
        let times: Vec<f64> = table.iter().map(|t| t.depart_time_s).collect();
        let expected: Vec<f64> = (0..20).map(|k| 5.0 + 10.0 * k as f64).collect();
        assert_eq!(times, expected);
        assert!(table.iter().all(|t| t.distance_km == 1.0));
    }

    #[test]
    fn piecewise_rate_counts_per_piece() {
        let profile = RateProfile::new(vec![(0.0, 0.1), (100.0, 0.0), (150.0, 0.4)], 200.0).unwrap();
        let spec = DemandSpec::Sampled {
            departure: DepartureProcess::PiecewiseConstantRate(profile.clone()),
            distance: DistanceDistribution::Constant { d_km: 2.0 },
            population: 30,
        };
        let table = sample_trips(&spec, 1).unwrap();
        let first = table.iter().filter(|t| t.depart_time_s < 100.0).count();
        let gap = table
            .iter()
            .filter(|t| (100.0..150.0).contains(&t.depart_time_s))
            .count();
        let last = table.iter().filter(|t| t.depart_time_s >= 150.0).count();
        assert_eq!((first, gap, last), (10, 0, 20));
        assert_eq!(DepartureProcess::PiecewiseConstantRate(profile).implied_population(), Some(30));
    }

    #[test]
    fn negexp_sample_mean() {
        let spec = DemandSpec::Sampled {
            departure: DepartureProcess::PiecewiseConstantRate(
                RateProfile::constant(1000.0, 1000.0).unwrap(),
            ),
            distance: DistanceDistribution::NegExp { mean_km: 2.0 },
            population: 1_000_000,
        };
        let table = sample_trips(&spec, 2024).unwrap();
        let mean = table.iter().map(|t| t.distance_km).sum::<f64>() / table.len() as f64;
        assert!((1.99..=2.01).contains(&mean), "sample mean {mean}");
    }

    #[test]
    fn sampling_is_pure_in_seed() {
        let spec = DemandSpec::Sampled {
            departure: DepartureProcess::Poisson(RateProfile::constant(0.5, 600.0).unwrap()),
            distance: DistanceDistribution::LogNormal {
                mu_log: 0.5,
                sigma_log: 0.8,
            },
            population: 300,
        };
        let a = sample_trips(&spec, 11).unwrap();
        let b = sample_trips(&spec, 11).unwrap();
        let c = sample_trips(&spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 300);
        a.check_sorted().unwrap();
        assert!(a.iter().all(|t| (0.0..600.0).contains(&t.depart_time_s)));
    }

    #[test]
    fn poisson_inter_arrivals_look_exponential() {
        let spec = DemandSpec::Sampled {
            departure: DepartureProcess::Poisson(RateProfile::constant(2.0, 50_000.0).unwrap()),
            distance: DistanceDistribution::Constant { d_km: 1.0 },
            population: 100_000,
        };
        let table = sample_trips(&spec, 3).unwrap();
        let gaps: Vec<f64> = table
            .trips()
            .windows(2)
            .map(|w| w[1].depart_time_s - w[0].depart_time_s)
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (gaps.len() - 1) as f64;
        // exponential: mean 0.5 s and coefficient of variation 1
        assert!((mean - 0.5).abs() < 0.01, "mean gap {mean}");
        assert!((var.sqrt() / mean - 1.0).abs() < 0.02);
    }

    #[test]
    fn time_dependent_distances_use_active_piece() {
        let spec = DemandSpec::Sampled {
            departure: DepartureProcess::Poisson(RateProfile::constant(1.0, 400.0).unwrap()),
            distance: DistanceDistribution::PiecewiseInTime(vec![
                (0.0, DistanceDistribution::DiscreteTable(vec![(1.0, 1.0), (2.0, 3.0)])),
                (200.0, DistanceDistribution::LogNormal { mu_log: 3.0, sigma_log: 0.1 }),
            ]),
            population: 400,
        };
        let table = sample_trips(&spec, 5).unwrap();
        for trip in &table {
            if trip.depart_time_s < 200.0 {
                assert!(trip.distance_km == 1.0 || trip.distance_km == 2.0);
            } else {
                assert!(trip.distance_km > 10.0);
            }
        }
    }

    #[test]
    fn sort_examples() {
        let table = TripTable::from_pairs([(5.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(
            table.trips(),
            &[
                Trip { id: 1, depart_time_s: 2.0, distance_km: 3.0 },
                Trip { id: 2, depart_time_s: 5.0, distance_km: 1.0 },
            ]
        );
        assert_eq!(sort_by_departure(table.clone()), table);

        let ties = TripTable::from_pairs([(1.0, 3.0), (0.0, 9.0), (1.0, 1.0), (1.0, 2.0)]).unwrap();
        let xs: Vec<f64> = ties.iter().map(|t| t.distance_km).collect();
        assert_eq!(xs, vec![9.0, 3.0, 1.0, 2.0]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(TripTable::from_pairs([(0.0, 0.0)]).is_err());
        assert!(TripTable::from_pairs([(-1.0, 1.0)]).is_err());
        let bad = DemandSpec::Sampled {
            departure: DepartureProcess::PiecewiseConstantRate(
                RateProfile::constant(1.0, 10.0).unwrap(),
            ),
            distance: DistanceDistribution::NegExp { mean_km: -2.0 },
            population: 10,
        };
        assert!(sample_trips(&bad, 0).is_err());
        assert!(RateProfile::new(vec![(0.0, 1.0), (0.0, 2.0)], 10.0).is_err());
        assert!(RateProfile::new(vec![(0.0, -1.0)], 10.0).is_err());
        let mismatch = DemandSpec::Sampled {
            departure: DepartureProcess::ExplicitTimes(vec![0.0, 1.0]),
            distance: DistanceDistribution::Constant { d_km: 1.0 },
            population: 3,
        };
        assert!(mismatch.validate().is_err());
    }

    #[test]
    fn inflow_and_timestep() {
        assert_relative_eq!(average_inflow(3600, 10.0, 3600.0).unwrap(), 0.1);
        assert_eq!(average_inflow(0, 10.0, 3600.0).unwrap(), 0.0);
        assert_eq!(average_inflow(1, 1.0, 1.0).unwrap(), 1.0);
        assert!(average_inflow(1, 0.0, 1.0).is_err());
        assert!(average_inflow(1, 1.0, -1.0).is_err());

        assert_relative_eq!(suggested_timestep(0.1, 10.0).unwrap(), 1.0);
        assert_eq!(suggested_timestep(1.0, 1.0).unwrap(), 1.0);
        let e_bar = average_inflow(3600, 10.0, 3600.0).unwrap();
        assert_relative_eq!(suggested_timestep(e_bar, 10.0).unwrap(), 1.0);
        assert!(suggested_timestep(0.0, 1.0).is_err());
        assert!(suggested_timestep(1.0, 0.0).is_err());

        assert_eq!(clamp_timestep(0.01, DEFAULT_TIMESTEP_FLOOR_S, 100.0), 1.0);
        assert_eq!(clamp_timestep(500.0, DEFAULT_TIMESTEP_FLOOR_S, 100.0), 100.0);
    }

    #[test]
    fn survival_and_mean() {
        let ne = DistanceDistribution::NegExp { mean_km: 2.0 };
        assert_eq!(ne.survival_at(0.0, 0.0), 1.0);
        assert_relative_eq!(ne.survival_at(0.0, 2.0), (-1.0f64).exp());
        let c = DistanceDistribution::Constant { d_km: 3.0 };
        assert_eq!(c.survival_at(0.0, 2.999), 1.0);
        assert_eq!(c.survival_at(0.0, 3.0), 0.0);
        let ln = DistanceDistribution::LogNormal { mu_log: 1.0, sigma_log: 0.5 };
        assert_relative_eq!(ln.survival_at(0.0, 1.0f64.exp()), 0.5, epsilon = 1e-12);
        assert_relative_eq!(ln.mean_at(0.0), (1.125f64).exp());
        let table = DistanceDistribution::DiscreteTable(vec![(1.0, 1.0), (3.0, 3.0)]);
        assert_relative_eq!(table.mean_at(0.0), 2.5);
        assert_relative_eq!(table.survival_at(0.0, 1.0), 0.75);
        assert_relative_eq!(ln.scaled(2.0).mean_at(0.0), 2.0 * ln.mean_at(0.0), max_relative = 1e-12);
    }
}
