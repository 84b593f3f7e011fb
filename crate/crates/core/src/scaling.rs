//! Flow-based and distance-based scaling of a scenario and its demand.
//!
//! Flow scaling multiplies the network length and the number of trips by `r`
//! and leaves speeds and distances alone. Distance scaling multiplies the
//! network length and every trip distance by `r` and keeps the trips.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;

use crate::demand::{DemandSpec, DepartureProcess, Trip, TripTable};
use crate::engine::Scenario;
use crate::error::{ensure_positive, invalid, Error, Result, TripGroup};

/// Relative tolerance on `r * n` being an integer.
const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingKind {
    FlowBased,
    DistanceBased,
}

impl FromStr for ScalingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(ScalingKind::FlowBased),
            "distance" => Ok(ScalingKind::DistanceBased),
            other => Err(invalid("mode", format!("expected flow or distance, got {other}"))),
        }
    }
}

impl fmt::Display for ScalingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalingKind::FlowBased => "flow",
            ScalingKind::DistanceBased => "distance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingSpec {
    pub kind: ScalingKind,
    pub ratio: f64,
}

impl ScalingSpec {
    pub fn new(kind: ScalingKind, ratio: f64) -> Result<Self> {
        ensure_positive("ratio", ratio)?;
        Ok(ScalingSpec { kind, ratio })
    }

    pub fn apply(&self, scenario: &Scenario, demand: &DemandSpec) -> Result<(Scenario, DemandSpec)> {
        match self.kind {
            ScalingKind::FlowBased => scale_flow(scenario, demand, self.ratio),
            ScalingKind::DistanceBased => scale_distance(scenario, demand, self.ratio),
        }
    }
}

/// Trips of `table` grouped by identical `(T, X)` bit patterns, in order of
/// first appearance.
pub fn group_trips(table: &TripTable) -> Vec<(TripGroup, u64)> {
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut groups: Vec<(TripGroup, u64)> = Vec::new();
    for trip in table {
        let key = (trip.depart_time_s.to_bits(), trip.distance_km.to_bits());
        match index.get(&key) {
            Some(&k) => groups[k].1 += 1,
            None => {
                index.insert(key, groups.len());
                groups.push((
                    TripGroup {
                        depart_time_s: trip.depart_time_s,
                        distance_km: Some(trip.distance_km),
                    },
                    1,
                ));
            }
        }
    }
    groups
}

fn group_times(times: &[f64]) -> Vec<(TripGroup, u64)> {
    let mut groups: Vec<(TripGroup, u64)> = Vec::new();
    for &t in times {
        // times are sorted, so equal values are adjacent
        match groups.last_mut() {
            Some((g, n)) if g.depart_time_s.to_bits() == t.to_bits() => *n += 1,
            _ => groups.push((
                TripGroup {
                    depart_time_s: t,
                    distance_km: None,
                },
                1,
            )),
        }
    }
    groups
}

fn scaled_count(group: TripGroup, count: u64, ratio: f64) -> Result<u64> {
    let scaled = count as f64 * ratio;
    let nearest = scaled.round();
    if (scaled - nearest).abs() > INTEGRALITY_TOL * nearest.max(1.0) {
        return Err(Error::Integrality {
            group,
            count,
            ratio,
            scaled,
        });
    }
    Ok(nearest as u64)
}

/// Flow-based scaling by `ratio`. Explicit trips are replicated or decimated
/// per group of identical trips, which must scale to whole numbers.
pub fn scale_flow(
    scenario: &Scenario,
    demand: &DemandSpec,
    ratio: f64,
) -> Result<(Scenario, DemandSpec)> {
    ensure_positive("ratio", ratio)?;
    demand.validate()?;
    let scaled_scenario = scenario.with_network_length(scenario.network_length_km() * ratio)?;
    let scaled_demand = match demand {
        DemandSpec::Explicit(table) => {
            let mut trips = Vec::new();
            for (group, count) in group_trips(table) {
                let n = scaled_count(group, count, ratio)?;
                let x = group.distance_km.expect("explicit groups carry distances");
                trips.extend((0..n).map(|_| Trip::new(group.depart_time_s, x)));
            }
            DemandSpec::Explicit(TripTable::from_trips(trips)?)
        }
        DemandSpec::Sampled {
            departure: DepartureProcess::ExplicitTimes(times),
            distance,
            ..
        } => {
            let mut scaled = Vec::new();
            for (group, count) in group_times(times) {
                let n = scaled_count(group, count, ratio)?;
                scaled.extend((0..n).map(|_| group.depart_time_s));
            }
            DemandSpec::Sampled {
                population: scaled.len(),
                departure: DepartureProcess::ExplicitTimes(scaled),
                distance: distance.clone(),
            }
        }
        DemandSpec::Sampled {
            departure,
            distance,
            population,
        } => {
            let exact = *population as f64 * ratio;
            let rounded = exact.round();
            if (exact - rounded).abs() > INTEGRALITY_TOL * rounded.max(1.0) {
                log::warn!("scaled population {exact} rounded to {rounded}");
            }
            DemandSpec::Sampled {
                departure: departure.clone(),
                distance: distance.clone(),
                population: rounded as usize,
            }
        }
    };
    Ok((scaled_scenario, scaled_demand))
}

/// Distance-based scaling by `ratio`: network length and every trip distance
/// are multiplied by `ratio`, the number of trips is kept.
pub fn scale_distance(
    scenario: &Scenario,
    demand: &DemandSpec,
    ratio: f64,
) -> Result<(Scenario, DemandSpec)> {
    ensure_positive("ratio", ratio)?;
    demand.validate()?;
    let scaled_scenario = scenario.with_network_length(scenario.network_length_km() * ratio)?;
    let scaled_demand = match demand {
        DemandSpec::Explicit(table) => DemandSpec::Explicit(TripTable::from_trips(
            table
                .iter()
                .map(|t| Trip::new(t.depart_time_s, t.distance_km * ratio))
                .collect(),
        )?),
        DemandSpec::Sampled {
            departure,
            distance,
            population,
        } => DemandSpec::Sampled {
            departure: departure.clone(),
            distance: distance.scaled(ratio),
            population: *population,
        },
    };
    Ok((scaled_scenario, scaled_demand))
}

/// Smallest admissible flow-scaling ratio `1 / gcd(counts)` for a demand made
/// of groups of identical trips.
pub fn min_scaling_ratio(counts: &[u64]) -> Result<Ratio<u64>> {
    if counts.is_empty() {
        return Err(invalid("counts", "at least one group is required"));
    }
    if counts.contains(&0) {
        return Err(invalid("counts", "group counts must be positive"));
    }
    let gcd = counts.iter().fold(0u64, |acc, &n| acc.gcd(&n));
    Ok(Ratio::new(1, gcd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DistanceDistribution, RateProfile};
    use crate::nfd::Nfd;

    fn scenario() -> Scenario {
        Scenario::new(100.0, 3600.0, 10.0, Nfd::exponential(50.0, 150.0).unwrap()).unwrap()
    }

    /// Two departure times and two distances with counts 250, 300, 180, 50.
    fn grouped_demand() -> DemandSpec {
        let mut pairs = Vec::new();
        for (t, x, n) in [
            (0.0, 1.0, 250),
            (0.0, 3.0, 300),
            (600.0, 1.0, 180),
            (600.0, 3.0, 50),
        ] {
            pairs.extend(std::iter::repeat((t, x)).take(n));
        }
        DemandSpec::Explicit(TripTable::from_pairs(pairs).unwrap())
    }

    fn counts(demand: &DemandSpec) -> Vec<u64> {
        match demand {
            DemandSpec::Explicit(table) => group_trips(table).into_iter().map(|g| g.1).collect(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(min_scaling_ratio(&[250, 300, 180, 50]).unwrap(), Ratio::new(1, 10));
        assert_eq!(min_scaling_ratio(&[7]).unwrap(), Ratio::new(1, 7));
        assert_eq!(min_scaling_ratio(&[12, 18, 30]).unwrap(), Ratio::new(1, 6));
        assert!(min_scaling_ratio(&[]).is_err());
        assert!(min_scaling_ratio(&[3, 0]).is_err());
    }

    #[test]
    fn flow_scaling_grouped_counts() {
        let demand = grouped_demand();
        assert_eq!(counts(&demand), vec![250, 300, 180, 50]);
        let (s, scaled) = scale_flow(&scenario(), &demand, 0.1).unwrap();
        assert_eq!(counts(&scaled), vec![25, 30, 18, 5]);
        assert!((s.network_length_km() - 10.0).abs() < 1e-12);

        match scale_flow(&scenario(), &demand, 1.0 / 50.0) {
            Err(Error::Integrality { group, count, .. }) => {
                assert_eq!(count, 180);
                assert_eq!(group.depart_time_s, 600.0);
                assert_eq!(group.distance_km, Some(1.0));
            }
            other => panic!("expected an integrality error, got {other:?}"),
        }
    }

    #[test]
    fn flow_scaling_identity_and_upscaling() {
        let demand = grouped_demand();
        let (s, same) = scale_flow(&scenario(), &demand, 1.0).unwrap();
        assert_eq!(same, demand);
        assert_eq!(s, scenario());
        let (_, up) = scale_flow(&scenario(), &demand, 2.0).unwrap();
        assert_eq!(counts(&up), vec![500, 600, 360, 100]);
    }

    #[test]
    fn multiples_of_min_ratio_are_admissible() {
        let demand = grouped_demand();
        let r_min = min_scaling_ratio(&counts(&demand)).unwrap();
        for j in 1..=10u64 {
            let r = r_min * j;
            let r = *r.numer() as f64 / *r.denom() as f64;
            assert!(scale_flow(&scenario(), &demand, r).is_ok(), "j = {j}");
        }
    }

    #[test]
    fn flow_scaling_sampled_population() {
        let demand = DemandSpec::Sampled {
            departure: DepartureProcess::Poisson(RateProfile::constant(1.0, 3600.0).unwrap()),
            distance: DistanceDistribution::NegExp { mean_km: 2.0 },
            population: 1234,
        };
        let (_, scaled) = scale_flow(&scenario(), &demand, 0.1).unwrap();
        assert_eq!(scaled.population(), 123);
        let times = DemandSpec::Sampled {
            departure: DepartureProcess::ExplicitTimes(vec![0.0, 0.0, 5.0, 5.0]),
            distance: DistanceDistribution::Constant { d_km: 1.0 },
            population: 4,
        };
        let (_, half) = scale_flow(&scenario(), &times, 0.5).unwrap();
        assert_eq!(
            half,
            DemandSpec::Sampled {
                departure: DepartureProcess::ExplicitTimes(vec![0.0, 5.0]),
                distance: DistanceDistribution::Constant { d_km: 1.0 },
                population: 2,
            }
        );
        assert!(matches!(
            scale_flow(&scenario(), &times, 0.25),
            Err(Error::Integrality { group: TripGroup { distance_km: None, .. }, .. })
        ));
    }

    #[test]
    fn distance_scaling() {
        let demand =
            DemandSpec::Explicit(TripTable::from_pairs([(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).unwrap());
        let (s, scaled) = scale_distance(&scenario(), &demand, 0.5).unwrap();
        assert_eq!(s.network_length_km(), 50.0);
        let DemandSpec::Explicit(table) = scaled else {
            unreachable!()
        };
        let xs: Vec<f64> = table.iter().map(|t| t.distance_km).collect();
        assert_eq!(xs, vec![0.5, 1.0, 1.5]);
        let (s, same) = scale_distance(&scenario(), &demand, 1.0).unwrap();
        assert_eq!((s, same), (scenario(), demand));
        assert!(scale_distance(&scenario(), &grouped_demand(), 0.0).is_err());
    }

    #[test]
    fn kind_parses() {
        assert_eq!("flow".parse::<ScalingKind>().unwrap(), ScalingKind::FlowBased);
        assert_eq!("distance".parse::<ScalingKind>().unwrap(), ScalingKind::DistanceBased);
        assert!("both".parse::<ScalingKind>().is_err());
        assert!(ScalingSpec::new(ScalingKind::FlowBased, -1.0).is_err());
    }
}
