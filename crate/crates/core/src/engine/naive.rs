use super::{outcomes, Clock, Scenario, SimOutput};
use crate::demand::TripTable;
use crate::error::Result;

struct Agent {
    id: usize,
    theta: f64,
    remaining: f64,
}

/// Naive engine: every active trip's remaining distance
/// `x(t, i) = X(i) + z(T(i)) - z(t)` is updated each step and all active
/// trips are scanned for completion. `m(t)` is the sum of the updated
/// remaining distances.
pub fn run_naive(scenario: &Scenario, trips: &TripTable) -> Result<SimOutput> {
    scenario.check_trips(trips)?;
    let steps = scenario.steps();
    let table = trips.trips();
    let mut records = Vec::with_capacity(steps + 1);
    let mut results = outcomes(trips);
    let mut active: Vec<Agent> = Vec::new();
    let mut clock = Clock::new(scenario);
    let mut started = 0;
    let mut finished = 0;

    for _ in 0..=steps {
        let t = clock.time();
        while started < table.len() && table[started].depart_time_s <= t {
            let trip = &table[started];
            let theta = clock.theta(trip);
            results[started].theta_km = theta;
            active.push(Agent {
                id: trip.id,
                theta,
                remaining: trip.distance_km,
            });
            started += 1;
        }

        let z = clock.z;
        let step = clock.step;
        let mut remaining_km = 0.0;
        active.retain_mut(|agent| {
            agent.remaining = agent.theta - z;
            if agent.remaining <= 0.0 {
                results[agent.id - 1].completion_step = Some(step);
                finished += 1;
                false
            } else {
                remaining_km += agent.remaining;
                true
            }
        });

        clock.finish_step(started, finished, remaining_km, &mut records);
    }

    Ok(SimOutput {
        dt_s: scenario.dt_s(),
        network_length_km: scenario.network_length_km(),
        free_speed: scenario.nfd().free_speed(),
        steps: records,
        trips: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nfd::Nfd;

    fn scenario(horizon: f64) -> Scenario {
        Scenario::new(1.0, horizon, 25.0, Nfd::exponential(50.0, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn empty_network() {
        let s = scenario(200.0);
        let out = run_naive(&s, &TripTable::empty()).unwrap();
        assert_eq!(out.steps.len(), 9);
        for step in &out.steps {
            assert_eq!((step.started, step.finished, step.active), (0, 0, 0));
            assert_eq!(step.speed_kmh, 50.0);
            assert_eq!(step.remaining_km, 0.0);
        }
        let last = out.steps.last().unwrap();
        let z_tf = last.z_km + last.speed_kmh * 25.0 / 3600.0;
        assert!((out.z_at(200.0) - 50.0 * 200.0 / 3600.0).abs() < 1e-12);
        assert!((z_tf - 50.0 * 225.0 / 3600.0).abs() < 1e-12);
    }

    #[test]
    fn single_trip() {
        let trips = TripTable::from_pairs([(0.0, 1.0)]).unwrap();
        let out = run_naive(&scenario(200.0), &trips).unwrap();
        for step in out.steps.iter().filter(|s| s.active == 1) {
            assert!((step.speed_kmh - 40.5).abs() < 1e-12);
        }
        // 88.9 s lies in the step ending at t = 100 s
        assert_eq!(out.trips[0].completion_step, Some(4));
        assert_eq!(out.steps[3].active, 1);
        assert_eq!(out.steps[4].active, 0);
    }

    #[test]
    fn two_trips_hand_stepped() {
        let trips = TripTable::from_pairs([(0.0, 0.5), (0.0, 1.0)]).unwrap();
        let out = run_naive(&scenario(200.0), &trips).unwrap();
        let speeds: Vec<f64> = out.steps.iter().map(|s| s.speed_kmh).collect();
        let z: Vec<f64> = out.z_series();
        for v in &speeds[..3] {
            assert!((v - 32.0).abs() < 1e-12);
        }
        assert!((speeds[3] - 40.5).abs() < 1e-12);
        assert!((speeds[4] - 40.5).abs() < 1e-12);
        assert!((z[3] - 0.6667).abs() < 1e-4);
        assert!((z[5] - 1.2292).abs() < 1e-4);
        assert_eq!(out.trips[0].completion_step, Some(3));
        assert_eq!(out.trips[1].completion_step, Some(5));
        assert_eq!(out.steps[5].finished, 2);
        assert_eq!(out.steps[5].speed_kmh, 50.0);
    }

    #[test]
    fn late_trips_are_rejected() {
        let trips = TripTable::from_pairs([(0.0, 1.0), (250.0, 1.0)]).unwrap();
        assert!(run_naive(&scenario(200.0), &trips).is_err());
    }

    #[test]
    fn unfinished_trips_have_no_completion() {
        let trips = TripTable::from_pairs([(0.0, 1.0), (200.0, 100.0)]).unwrap();
        let out = run_naive(&scenario(200.0), &trips).unwrap();
        assert_eq!(out.trips[1].completion_step, None);
        assert_eq!(out.steps.last().unwrap().active, 1);
        assert!(out.steps.last().unwrap().remaining_km > 99.0);
    }
}
