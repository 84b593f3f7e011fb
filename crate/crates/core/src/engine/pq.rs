use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{outcomes, Clock, Scenario, SimOutput};
use crate::demand::TripTable;
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
struct Entry {
    theta: f64,
    id: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.theta
            .total_cmp(&other.theta)
            .then(self.id.cmp(&other.id))
    }
}

/// Active trips ordered by characteristic distance `theta` (ties by trip id):
/// a binary min-heap whose root is `Theta(t, 1)`.
///
/// The queue also tracks the sum of the stored `theta`s so that the total
/// remaining distance `sum(theta) - delta * z` is available in O(1).
#[derive(Debug, Default)]
pub struct ThetaQueue {
    heap: BinaryHeap<Reverse<Entry>>,
    theta_sum: f64,
}

impl ThetaQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, theta: f64, id: usize) {
        self.heap.push(Reverse(Entry { theta, id }));
        self.theta_sum += theta;
    }

    /// Smallest `(theta, id)`.
    pub fn peek(&self) -> Option<(f64, usize)> {
        self.heap.peek().map(|Reverse(e)| (e.theta, e.id))
    }

    /// Removes and returns the root if its `theta <= z`.
    pub fn pop_reached(&mut self, z: f64) -> Option<(f64, usize)> {
        match self.heap.peek() {
            Some(Reverse(e)) if e.theta <= z => {
                let Reverse(e) = self.heap.pop().expect("peeked");
                if self.heap.is_empty() {
                    self.theta_sum = 0.0;
                } else {
                    self.theta_sum -= e.theta;
                }
                Some((e.theta, e.id))
            }
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Total remaining distance of the stored trips at characteristic
    /// distance `z`.
    pub fn remaining_km(&self, z: f64) -> f64 {
        if self.heap.is_empty() {
            0.0
        } else {
            (self.theta_sum - self.heap.len() as f64 * z).max(0.0)
        }
    }

    /// `remaining_km` by a full scan.
    pub fn remaining_km_scan(&self, z: f64) -> f64 {
        self.heap.iter().map(|Reverse(e)| e.theta - z).sum()
    }

    /// Checks the min-heap property on the underlying array.
    pub fn is_heap(&self) -> bool {
        let items = self.heap.as_slice();
        // std stores a max-heap of Reverse entries
        (1..items.len()).all(|k| items[(k - 1) / 2] >= items[k])
    }
}

/// Diagnostics collected by [`run_pq_audited`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PqAudit {
    /// `(theta, id)` in pop order over the whole run.
    pub pops: Vec<(f64, usize)>,
    /// Heap size after each step.
    pub queue_sizes: Vec<usize>,
    /// `m(t)` recomputed by scanning the heap after each step.
    pub scanned_remaining_km: Vec<f64>,
    /// Whether the heap property held after every step.
    pub heap_ok: bool,
}

/// Priority-queue engine: each trip's `theta` is computed once on admission
/// and pushed into a min-heap; completions pop the heap while its root is
/// reached by `z(t)`.
pub fn run_pq(scenario: &Scenario, trips: &TripTable) -> Result<SimOutput> {
    run(scenario, trips, None)
}

/// [`run_pq`] with per-step auditing of the queue.
pub fn run_pq_audited(scenario: &Scenario, trips: &TripTable) -> Result<(SimOutput, PqAudit)> {
    let mut audit = PqAudit {
        heap_ok: true,
        ..PqAudit::default()
    };
    let out = run(scenario, trips, Some(&mut audit))?;
    Ok((out, audit))
}

fn run(scenario: &Scenario, trips: &TripTable, mut audit: Option<&mut PqAudit>) -> Result<SimOutput> {
    scenario.check_trips(trips)?;
    let steps = scenario.steps();
    let table = trips.trips();
    let mut records = Vec::with_capacity(steps + 1);
    let mut results = outcomes(trips);
    let mut queue = ThetaQueue::new();
    let mut clock = Clock::new(scenario);
    let mut started = 0;
    let mut finished = 0;

    for _ in 0..=steps {
        let t = clock.time();
        while started < table.len() && table[started].depart_time_s <= t {
            let trip = &table[started];
            let theta = clock.theta(trip);
            results[started].theta_km = theta;
            queue.push(theta, trip.id);
            started += 1;
        }

        let z = clock.z;
        while let Some((theta, id)) = queue.pop_reached(z) {
            results[id - 1].completion_step = Some(clock.step);
            finished += 1;
            if let Some(a) = audit.as_deref_mut() {
                a.pops.push((theta, id));
            }
        }

        let remaining_km = queue.remaining_km(z);
        if let Some(a) = audit.as_deref_mut() {
            a.queue_sizes.push(queue.len());
            a.scanned_remaining_km.push(queue.remaining_km_scan(z));
            a.heap_ok &= queue.is_heap();
        }
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
    use super::super::run_naive;
    use super::*;
    use crate::nfd::Nfd;

    fn scenario() -> Scenario {
        Scenario::new(1.0, 200.0, 25.0, Nfd::exponential(50.0, 10.0).unwrap()).unwrap()
    }

    #[test]
    fn queue_pops_in_theta_order() {
        let mut q = ThetaQueue::new();
        for (theta, id) in [(3.0, 1), (1.0, 2), (2.0, 3), (1.0, 4)] {
            q.push(theta, id);
        }
        assert!(q.is_heap());
        assert_eq!(q.peek(), Some((1.0, 2)));
        assert_eq!(q.pop_reached(0.5), None);
        assert_eq!(q.pop_reached(2.0), Some((1.0, 2)));
        assert_eq!(q.pop_reached(2.0), Some((1.0, 4)));
        assert_eq!(q.pop_reached(2.0), Some((2.0, 3)));
        assert_eq!(q.pop_reached(2.0), None);
        assert_eq!(q.len(), 1);
        assert_eq!(q.remaining_km(2.5), 0.5);
        assert_eq!(q.remaining_km_scan(2.5), 0.5);
        assert_eq!(q.pop_reached(3.0), Some((3.0, 1)));
        assert_eq!(q.remaining_km(3.0), 0.0);
    }

    #[test]
    fn two_trips_match_naive() {
        let trips = TripTable::from_pairs([(0.0, 0.5), (0.0, 1.0)]).unwrap();
        let (out, audit) = run_pq_audited(&scenario(), &trips).unwrap();
        let naive = run_naive(&scenario(), &trips).unwrap();
        assert_eq!(out.steps.len(), naive.steps.len());
        for (a, b) in out.steps.iter().zip(&naive.steps) {
            assert_eq!((a.started, a.finished), (b.started, b.finished));
            assert_eq!(a.speed_kmh.to_bits(), b.speed_kmh.to_bits());
            assert_eq!(a.z_km.to_bits(), b.z_km.to_bits());
        }
        assert_eq!(audit.pops, vec![(0.5, 1), (1.0, 2)]);
        assert_eq!(out.trips[0].completion_step, Some(3));
        assert_eq!(out.trips[1].completion_step, Some(5));
        assert!(audit.heap_ok);
    }

    #[test]
    fn empty_run_matches_naive() {
        let empty = TripTable::empty();
        let (out, audit) = run_pq_audited(&scenario(), &empty).unwrap();
        assert_eq!(out, run_naive(&scenario(), &empty).unwrap());
        assert!(audit.pops.is_empty());
        assert!(audit.queue_sizes.iter().all(|&n| n == 0));
    }

    #[test]
    fn overlapping_trajectories_complete_together() {
        // trip 2 departs 36 s later, when z = 0.5 km, with 0.5 km less to go:
        // both have theta = 1.0
        let trips = TripTable::from_pairs([(0.0, 1.0), (36.0, 0.5)]).unwrap();
        let nfd = Nfd::trapezoidal(50.0, 1000.0, 20.0, 200.0).unwrap();
        let s = Scenario::new(1000.0, 360.0, 36.0, nfd).unwrap();
        let (out, audit) = run_pq_audited(&s, &trips).unwrap();
        assert_eq!(out.trips[1].theta_km, 1.0);
        assert_eq!(out.trips[0].completion_step, out.trips[1].completion_step);
        assert_eq!(audit.pops.iter().map(|p| p.1).collect::<Vec<_>>(), vec![1, 2]);
    }
}
