//! Network fundamental diagrams: speed as a function of per-lane density.
//!
//! Densities are veh/km, speeds km/h, slopes km/h per veh/km.

use crate::error::{ensure_non_negative, ensure_positive, invalid, Result};

/// Grid resolution of the maximum-slope search.
const SLOPE_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Nfd {
    /// `V(rho) = u_f (1 - rho/rho_j)^2`.
    Exponential { free_speed: f64, jam_density: f64 },
    /// `V(rho) = min{u_f, C/rho, w (rho_j/rho - 1)}`, with `V(0) = u_f`.
    Trapezoidal {
        free_speed: f64,
        capacity: f64,
        wave_speed: f64,
        jam_density: f64,
    },
    /// Piecewise-linear interpolation of `(rho, v)` samples.
    Tabulated(TabulatedNfd),
}

/// Samples of a speed-density curve. The first density is 0, densities are
/// strictly increasing, speeds are non-increasing and the last speed is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedNfd {
    density: Vec<f64>,
    speed: Vec<f64>,
}

impl TabulatedNfd {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("tabulated NFD", "needs at least two samples"));
        }
        if points[0].0 != 0.0 {
            return Err(invalid("tabulated NFD", "first density must be 0"));
        }
        for (k, &(rho, v)) in points.iter().enumerate() {
            ensure_non_negative("tabulated NFD density", rho)?;
            ensure_non_negative("tabulated NFD speed", v)?;
            if k > 0 {
                let (prev_rho, prev_v) = points[k - 1];
                if rho <= prev_rho {
                    return Err(invalid(
                        "tabulated NFD",
                        "densities must be strictly increasing",
                    ));
                }
                if v > prev_v {
                    return Err(invalid("tabulated NFD", "speeds must be non-increasing"));
                }
            }
        }
        if points[0].1 <= 0.0 {
            return Err(invalid("tabulated NFD", "free-flow speed must be > 0"));
        }
        if points[points.len() - 1].1 != 0.0 {
            return Err(invalid("tabulated NFD", "speed at jam density must be 0"));
        }
        let (density, speed) = points.into_iter().unzip();
        Ok(TabulatedNfd { density, speed })
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.density.iter().copied().zip(self.speed.iter().copied())
    }

    /// Index of the segment `[rho_k, rho_{k+1}]` used at `rho`; interior
    /// sample points belong to the segment on their left.
    fn segment(&self, rho: f64) -> usize {
        let idx = self.density.partition_point(|&d| d < rho);
        idx.saturating_sub(1).min(self.density.len() - 2)
    }

    fn segment_slope(&self, k: usize) -> f64 {
        (self.speed[k + 1] - self.speed[k]) / (self.density[k + 1] - self.density[k])
    }
}

impl Nfd {
    pub fn exponential(free_speed: f64, jam_density: f64) -> Result<Self> {
        let nfd = Nfd::Exponential {
            free_speed,
            jam_density,
        };
        nfd.validate()?;
        Ok(nfd)
    }

    pub fn trapezoidal(
        free_speed: f64,
        capacity: f64,
        wave_speed: f64,
        jam_density: f64,
    ) -> Result<Self> {
        let nfd = Nfd::Trapezoidal {
            free_speed,
            capacity,
            wave_speed,
            jam_density,
        };
        nfd.validate()?;
        Ok(nfd)
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Nfd::Tabulated(TabulatedNfd::new(points)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Nfd::Exponential {
                free_speed,
                jam_density,
            } => {
                ensure_positive("u_f", *free_speed)?;
                ensure_positive("rho_j", *jam_density)
            }
            Nfd::Trapezoidal {
                free_speed,
                capacity,
                wave_speed,
                jam_density,
            } => {
                ensure_positive("u_f", *free_speed)?;
                ensure_positive("rho_j", *jam_density)?;
                ensure_positive("w", *wave_speed)?;
                ensure_positive("C", *capacity)?;
                if *capacity > free_speed * jam_density {
                    return Err(invalid("C", "must not exceed u_f * rho_j"));
                }
                Ok(())
            }
            Nfd::Tabulated(_) => Ok(()),
        }
    }

    pub fn free_speed(&self) -> f64 {
        match self {
            Nfd::Exponential { free_speed, .. } | Nfd::Trapezoidal { free_speed, .. } => {
                *free_speed
            }
            Nfd::Tabulated(t) => t.speed[0],
        }
    }

    pub fn jam_density(&self) -> f64 {
        match self {
            Nfd::Exponential { jam_density, .. } | Nfd::Trapezoidal { jam_density, .. } => {
                *jam_density
            }
            Nfd::Tabulated(t) => t.density[t.density.len() - 1],
        }
    }

    /// `V(rho)`; zero at and beyond jam density.
    pub fn speed(&self, rho: f64) -> Result<f64> {
        if rho.is_nan() || rho < 0.0 {
            return Err(invalid("rho", format!("must be >= 0, got {rho}")));
        }
        Ok(self.speed_at(rho))
    }

    /// `V(rho)` for a density already known to be non-negative.
    #[inline]
    pub fn speed_at(&self, rho: f64) -> f64 {
        match self {
            Nfd::Exponential {
                free_speed,
                jam_density,
            } => {
                if rho >= *jam_density {
                    0.0
                } else {
                    let s = 1.0 - rho / jam_density;
                    free_speed * s * s
                }
            }
            Nfd::Trapezoidal {
                free_speed,
                capacity,
                wave_speed,
                jam_density,
            } => {
                if rho <= 0.0 {
                    *free_speed
                } else if rho >= *jam_density {
                    0.0
                } else {
                    free_speed
                        .min(capacity / rho)
                        .min(wave_speed * (jam_density / rho - 1.0))
                }
            }
            Nfd::Tabulated(t) => {
                if rho >= t.density[t.density.len() - 1] {
                    return 0.0;
                }
                let k = t.segment(rho);
                t.speed[k] + t.segment_slope(k) * (rho - t.density[k])
            }
        }
    }

    /// `dV/drho` on `[0, rho_j]`. At kinks the branch on the left applies.
    pub fn slope(&self, rho: f64) -> Result<f64> {
        let jam = self.jam_density();
        if !(0.0..=jam).contains(&rho) {
            return Err(invalid(
                "rho",
                format!("must lie in [0, {jam}] for the slope, got {rho}"),
            ));
        }
        Ok(self.slope_left(rho))
    }

    fn slope_left(&self, rho: f64) -> f64 {
        match self {
            Nfd::Exponential {
                free_speed,
                jam_density,
            } => -2.0 * free_speed / jam_density * (1.0 - rho / jam_density),
            Nfd::Trapezoidal {
                capacity,
                wave_speed,
                jam_density,
                ..
            } => {
                let (to_capacity, to_congested) = self.trapezoid_kinks();
                if rho <= to_capacity {
                    0.0
                } else if rho <= to_congested {
                    -capacity / (rho * rho)
                } else {
                    -wave_speed * jam_density / (rho * rho)
                }
            }
            Nfd::Tabulated(t) => t.segment_slope(t.segment(rho)),
        }
    }

    /// Slope of the branch starting at `rho`, used at kinks.
    fn slope_right(&self, rho: f64) -> f64 {
        match self {
            Nfd::Exponential { .. } => self.slope_left(rho),
            Nfd::Trapezoidal {
                capacity,
                wave_speed,
                jam_density,
                ..
            } => {
                let (to_capacity, to_congested) = self.trapezoid_kinks();
                if rho < to_capacity {
                    0.0
                } else if rho < to_congested {
                    -capacity / (rho * rho)
                } else {
                    -wave_speed * jam_density / (rho * rho)
                }
            }
            Nfd::Tabulated(t) => {
                let k = t.density.partition_point(|&d| d <= rho).saturating_sub(1);
                t.segment_slope(k.min(t.density.len() - 2))
            }
        }
    }

    /// Breakpoints `(free -> capacity, capacity -> congested)` of the
    /// trapezoid. When capacity never binds both coincide at the crossing of
    /// the free-flow and congested branches.
    fn trapezoid_kinks(&self) -> (f64, f64) {
        match self {
            Nfd::Trapezoidal {
                free_speed,
                capacity,
                wave_speed,
                jam_density,
            } => {
                let to_capacity = capacity / free_speed;
                let to_congested = jam_density - capacity / wave_speed;
                if to_capacity <= to_congested {
                    (to_capacity, to_congested)
                } else {
                    let crossing = wave_speed * jam_density / (free_speed + wave_speed);
                    (crossing, crossing)
                }
            }
            _ => unreachable!(),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            Nfd::Exponential { .. } => Vec::new(),
            Nfd::Trapezoidal { .. } => {
                let (a, b) = self.trapezoid_kinks();
                vec![a, b]
            }
            Nfd::Tabulated(t) => t.density[..t.density.len() - 1].to_vec(),
        }
    }

    /// `max |dV/drho|` over `[0, rho_j]`: a uniform grid scan plus both
    /// one-sided slopes at every kink.
    pub fn max_abs_slope(&self) -> f64 {
        let jam = self.jam_density();
        let grid = (0..=SLOPE_GRID_POINTS)
            .map(|k| self.slope_left(jam * k as f64 / SLOPE_GRID_POINTS as f64).abs());
        let kinks = self
            .kinks()
            .into_iter()
            .flat_map(|rho| [self.slope_left(rho).abs(), self.slope_right(rho).abs()]);
        grid.chain(kinks).fold(0.0, f64::max)
    }

    /// Largest speed change caused by `delta_agents` trips entering or leaving
    /// a network of length `network_length_km`.
    pub fn max_speed_variation(&self, network_length_km: f64, delta_agents: f64) -> Result<f64> {
        ensure_positive("L_N_km", network_length_km)?;
        Ok(self.max_abs_slope() * delta_agents / network_length_km)
    }

    /// Smallest (scaled) network length for which one trip changes the speed
    /// by at most `delta_v` km/h.
    pub fn min_length_for_smoothness(&self, delta_v: f64) -> Result<f64> {
        ensure_positive("delta_v", delta_v)?;
        Ok(self.max_abs_slope() / delta_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp() -> Nfd {
        Nfd::exponential(50.0, 140.0).unwrap()
    }

    fn trap() -> Nfd {
        Nfd::trapezoidal(50.0, 1050.0, 15.0, 140.0).unwrap()
    }

    fn table() -> Nfd {
        Nfd::tabulated(vec![(0.0, 50.0), (20.0, 45.0), (60.0, 20.0), (100.0, 0.0)]).unwrap()
    }

    #[test]
    fn speed_examples() {
        assert_eq!(exp().speed(0.0).unwrap(), 50.0);
        assert_eq!(exp().speed(140.0).unwrap(), 0.0);
        assert_eq!(trap().speed(140.0).unwrap(), 0.0);
        assert_eq!(table().speed(100.0).unwrap(), 0.0);
        assert_relative_eq!(trap().speed(70.0).unwrap(), 15.0, max_relative = 1e-12);
        assert_eq!(trap().speed(0.0).unwrap(), 50.0);
        assert_eq!(exp().speed(500.0).unwrap(), 0.0);
        assert_relative_eq!(table().speed(40.0).unwrap(), 32.5);
        assert!(exp().speed(-1.0).is_err());
        assert!(exp().speed(f64::NAN).is_err());
    }

    #[test]
    fn slope_examples() {
        assert_relative_eq!(exp().slope(0.0).unwrap(), -100.0 / 140.0);
        assert_eq!(exp().slope(140.0).unwrap(), 0.0);
        assert_relative_eq!(trap().slope(30.0).unwrap(), -1050.0 / 900.0);
        assert_eq!(trap().slope(0.0).unwrap(), 0.0);
        // kink at critical density takes the free-flow branch
        assert_eq!(trap().slope(21.0).unwrap(), 0.0);
        assert_relative_eq!(table().slope(20.0).unwrap(), -0.25);
        assert_relative_eq!(table().slope(20.5).unwrap(), -25.0 / 40.0);
        assert!(exp().slope(141.0).is_err());
        assert!(exp().slope(-0.1).is_err());
    }

    #[test]
    fn max_slope_and_speed_variation() {
        assert_relative_eq!(
            exp().max_speed_variation(1.0, 1.0).unwrap(),
            100.0 / 140.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            trap().max_speed_variation(1.0, 1.0).unwrap(),
            1050.0 / 441.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(table().max_abs_slope(), 0.625);
        assert!(exp().max_speed_variation(1e12, 1.0).unwrap() < 1e-12);
        assert!(exp().max_speed_variation(0.0, 1.0).is_err());
    }

    #[test]
    fn capacity_not_binding() {
        // u_f and w branches cross at rho = 15*140/65 before C/rho binds
        let nfd = Nfd::trapezoidal(50.0, 7000.0, 15.0, 140.0).unwrap();
        let crossing = 15.0 * 140.0 / 65.0;
        assert_relative_eq!(nfd.speed(crossing).unwrap(), 50.0, max_relative = 1e-12);
        assert_relative_eq!(
            nfd.max_abs_slope(),
            15.0 * 140.0 / (crossing * crossing),
            max_relative = 1e-12
        );
    }

    #[test]
    fn smoothness_length() {
        assert_relative_eq!(
            trap().min_length_for_smoothness(0.1).unwrap(),
            1050.0 / 441.0 / 0.1,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            exp().min_length_for_smoothness(0.1).unwrap(),
            100.0 / 140.0 / 0.1,
            max_relative = 1e-12
        );
        let m = trap().max_abs_slope();
        assert_eq!(trap().min_length_for_smoothness(m).unwrap(), 1.0);
        assert!(trap().min_length_for_smoothness(0.0).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Nfd::exponential(0.0, 10.0).is_err());
        assert!(Nfd::exponential(50.0, -1.0).is_err());
        assert!(Nfd::trapezoidal(50.0, 8000.0, 15.0, 140.0).is_err());
        assert!(Nfd::trapezoidal(50.0, 1000.0, 0.0, 140.0).is_err());
        assert!(Nfd::tabulated(vec![(0.0, 50.0)]).is_err());
        assert!(Nfd::tabulated(vec![(1.0, 50.0), (2.0, 0.0)]).is_err());
        assert!(Nfd::tabulated(vec![(0.0, 50.0), (2.0, 60.0), (3.0, 0.0)]).is_err());
        assert!(Nfd::tabulated(vec![(0.0, 50.0), (2.0, 10.0)]).is_err());
    }

    fn all_nfds() -> Vec<Nfd> {
        vec![exp(), trap(), table(), Nfd::exponential(50.0, 10.0).unwrap()]
    }

    proptest! {
        #[test]
        fn speed_is_bounded_and_monotone(a in 0.0f64..200.0, b in 0.0f64..200.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for nfd in all_nfds() {
                let v_lo = nfd.speed(lo).unwrap();
                let v_hi = nfd.speed(hi).unwrap();
                prop_assert!(v_lo >= v_hi);
                prop_assert!((0.0..=nfd.free_speed()).contains(&v_lo));
                prop_assert!((0.0..=nfd.free_speed()).contains(&v_hi));
            }
        }

        #[test]
        fn slope_matches_finite_differences(frac in 0.001f64..0.999) {
            for nfd in all_nfds() {
                let jam = nfd.jam_density();
                let rho = frac * jam;
                let h = 1e-4 * jam;
                let near_kink = nfd.kinks().iter().any(|k| (k - rho).abs() <= 2.0 * h);
                if near_kink || rho + h >= jam {
                    continue;
                }
                let fd = (nfd.speed(rho + h).unwrap() - nfd.speed(rho - h).unwrap()) / (2.0 * h);
                let analytic = nfd.slope(rho).unwrap();
                // central differences are exact for piecewise-linear and quadratic
                // curves and O(h^2) accurate elsewhere
                let scale = analytic.abs().max(1e-3);
                prop_assert!((fd - analytic).abs() <= 1e-6 * scale + 1e-7 * (nfd.max_abs_slope()),
                    "{nfd:?} rho={rho} fd={fd} analytic={analytic}");
            }
        }

        #[test]
        fn speed_variation_scales_inversely(len in 0.1f64..100.0, k in 1u32..64) {
            for nfd in all_nfds() {
                let base = nfd.max_speed_variation(len, 1.0).unwrap();
                let scaled = nfd.max_speed_variation(len * k as f64, 1.0).unwrap();
                prop_assert!((scaled - base / k as f64).abs() <= 4.0 * f64::EPSILON * base);
            }
        }
    }
}
