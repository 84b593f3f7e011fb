use bathtub_core::continuum::ContinuumDemand;
use bathtub_core::{
    run_pq, sample_trips, scale_distance, scale_flow, solve_vbm, DemandSpec, DepartureProcess,
    DistanceDistribution, Error, Nfd, RateProfile, Scenario, ScalingKind, ScalingSpec,
};

const HORIZON: f64 = 7200.0;

fn scenario() -> Scenario {
    Scenario::new(100.0, HORIZON, 2.0, Nfd::exponential(50.0, 150.0).unwrap()).unwrap()
}

fn demand(population: usize) -> DemandSpec {
    DemandSpec::Sampled {
        departure: DepartureProcess::PiecewiseConstantRate(
            RateProfile::constant(1.0, HORIZON).unwrap(),
        ),
        distance: DistanceDistribution::NegExp { mean_km: 2.0 },
        population,
    }
}

fn tail_mean_density(scenario: &Scenario, spec: &DemandSpec) -> f64 {
    let trips = sample_trips(spec, 5).unwrap();
    let out = run_pq(scenario, &trips).unwrap();
    let tail: Vec<f64> = out
        .steps
        .iter()
        .filter(|s| s.time_s >= 0.5 * HORIZON)
        .map(|s| s.density)
        .collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[test]
fn distance_scaling_keeps_steady_state() {
    let spec = demand(60_000);
    let base = tail_mean_density(&scenario(), &spec);
    for r in [0.5, 2.0] {
        let (s, d) = scale_distance(&scenario(), &spec, r).unwrap();
        let scaled = tail_mean_density(&s, &d);
        assert!(
            (scaled - base).abs() <= 0.01 * base,
            "r = {r}: {scaled} vs {base}"
        );
    }
}

#[test]
fn distance_scaling_keeps_continuum_equilibrium() {
    let spec = demand(60_000);
    let cd = ContinuumDemand::from_spec(&spec).unwrap();
    let base = solve_vbm(&scenario(), &cd).unwrap();
    let (s, d) = scale_distance(&scenario(), &spec, 0.25).unwrap();
    let scaled = solve_vbm(&s, &ContinuumDemand::from_spec(&d).unwrap()).unwrap();
    let (a, b) = (base.steps.last().unwrap(), scaled.steps.last().unwrap());
    assert!((a.density - b.density).abs() <= 1e-6 * a.density);
    assert!((a.speed_kmh - b.speed_kmh).abs() <= 1e-6 * a.speed_kmh);
}

#[test]
fn flow_scaling_keeps_continuum_trajectory() {
    let spec = demand(60_000);
    let (s, d) = scale_flow(&scenario(), &spec, 0.01).unwrap();
    assert_eq!(d.population(), 600);
    let a = solve_vbm(&scenario(), &ContinuumDemand::from_spec(&spec).unwrap()).unwrap();
    let b = solve_vbm(&s, &ContinuumDemand::from_spec(&d).unwrap()).unwrap();
    for (x, y) in a.steps.iter().zip(&b.steps) {
        assert!((x.density - y.density).abs() <= 1e-9 * x.density.max(1.0));
    }
}

#[test]
fn spec_dispatch() {
    let spec = demand(1000);
    let flow = ScalingSpec::new(ScalingKind::FlowBased, 0.5).unwrap();
    let (s, d) = flow.apply(&scenario(), &spec).unwrap();
    assert_eq!((s.network_length_km(), d.population()), (50.0, 500));
    let dist = ScalingSpec::new(ScalingKind::DistanceBased, 0.5).unwrap();
    let (s, d) = dist.apply(&scenario(), &spec).unwrap();
    assert_eq!((s.network_length_km(), d.population()), (50.0, 1000));
    let explicit = DemandSpec::Explicit(sample_trips(&spec, 1).unwrap());
    assert!(matches!(
        flow.apply(&scenario(), &explicit),
        Err(Error::Integrality { .. })
    ));
}
