//! Unit conversions. Distances are kilometers, times seconds and speeds km/h;
//! every conversion between them goes through this module.

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Distance in km covered at `speed_kmh` during `duration_s`.
#[inline]
pub fn distance_km(speed_kmh: f64, duration_s: f64) -> f64 {
    speed_kmh * duration_s / SECONDS_PER_HOUR
}

/// Time in seconds needed to cover `distance_km` at `speed_kmh`.
#[inline]
pub fn duration_s(distance_km: f64, speed_kmh: f64) -> f64 {
    distance_km * SECONDS_PER_HOUR / speed_kmh
}

/// Speed in km/s.
#[inline]
pub fn km_per_s(speed_kmh: f64) -> f64 {
    speed_kmh / SECONDS_PER_HOUR
}

/// Converts a per-second rate to a per-hour rate.
#[inline]
pub fn per_hour(rate_per_s: f64) -> f64 {
    rate_per_s * SECONDS_PER_HOUR
}
