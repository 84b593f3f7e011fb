//! Run configuration: a TOML file with `[scenario]`, `[nfd]`, `[demand]`
//! and optional `[output]` / `[compare]` sections.
//!
//! ```toml
//! engine = "pq"
//!
//! [scenario]
//! L_N_km = 1.0
//! t_f_s = 200.0
//! dt_s = 25.0          # or "auto"
//!
//! [nfd]
//! type = "exponential" # trapezoidal: u_f, capacity, w, rho_j; tabulated: file
//! u_f = 50.0
//! rho_j = 10.0
//!
//! [demand]
//! type = "explicit"    # or "sampled"
//! file = "trips.csv"
//! ```
//!
//! A sampled demand reads
//!
//! ```toml
//! [demand]
//! type = "sampled"
//! departure = "poisson"   # deterministic | poisson | explicit
//! rates = [[0.0, 1.0], [900.0, 0.5]]  # (start_s, relative rate); default constant
//! population = 1000
//! seed = 7
//!
//! [demand.distance]
//! type = "ne"             # ne | constant | lognormal | discrete | piecewise
//! mean_km = 2.0
//! ```
//!
//! File paths are relative to the directory of the config file.

use std::path::{Path, PathBuf};

use bathtub_core::demand::{clamp_timestep, DEFAULT_TIMESTEP_FLOOR_S};
use bathtub_core::io::{read_nfd_table_file, read_trip_table_file};
use bathtub_core::{
    average_inflow, suggested_timestep, DemandSpec, DepartureProcess,
    DistanceDistribution, EngineKind, Error, Nfd, RateProfile, Result, Scenario,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    pub scenario: ScenarioConfig,
    pub nfd: NfdConfig,
    pub demand: DemandConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "L_N_km")]
    pub network_length_km: f64,
    pub t_f_s: f64,
    pub dt_s: Timestep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Timestep {
    Seconds(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum NfdConfig {
    Exponential { u_f: f64, rho_j: f64 },
    Trapezoidal { u_f: f64, capacity: f64, w: f64, rho_j: f64 },
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DemandConfig {
    Explicit {
        file: PathBuf,
    },
    Sampled {
        departure: DepartureKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rates: Option<Vec<(f64, f64)>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        times: Option<Vec<f64>>,
        population: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        distance: DistanceConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepartureKind {
    Deterministic,
    Poisson,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistanceConfig {
    Ne { mean_km: f64 },
    Constant { d_km: f64 },
    Lognormal { mu_log: f64, sigma_log: f64 },
    /// `(distance_km, weight)` pairs.
    Discrete { table: Vec<(f64, f64)> },
    Piecewise { pieces: Vec<DistancePiece> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistancePiece {
    pub start_s: f64,
    pub distance: DistanceConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Largest acceptable sup-norm density gap, relative to the peak.
    pub tolerance: Option<f64>,
    pub alpha: Option<f64>,
    pub d_star_km: Option<f64>,
}

/// Everything a run needs, with files loaded and `dt = "auto"` resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub demand: DemandSpec,
    pub engine: EngineKind,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 1;

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid("config", e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.output.as_ref().and_then(|o| o.dir.as_deref())
    }

    pub fn compare_settings(&self) -> CompareConfig {
        self.compare.clone().unwrap_or_default()
    }

    pub fn engine(&self) -> Result<EngineKind> {
        match &self.engine {
            None => Ok(EngineKind::default()),
            Some(name) => name.parse().map_err(|_| invalid("engine", format!("unknown engine {name}"))),
        }
    }

    pub fn nfd(&self, base: &Path) -> Result<Nfd> {
        match &self.nfd {
            NfdConfig::Exponential { u_f, rho_j } => Nfd::exponential(*u_f, *rho_j),
            NfdConfig::Trapezoidal { u_f, capacity, w, rho_j } => {
                Nfd::trapezoidal(*u_f, *capacity, *w, *rho_j)
            }
            NfdConfig::Tabulated { file } => read_nfd_table_file(&base.join(file)),
        }
    }

    pub fn demand(&self, base: &Path) -> Result<DemandSpec> {
        let horizon = self.scenario.t_f_s;
        match &self.demand {
            DemandConfig::Explicit { file } => {
                Ok(DemandSpec::Explicit(read_trip_table_file(&base.join(file))?))
            }
            DemandConfig::Sampled {
                departure,
                rates,
                times,
                population,
                distance,
                ..
            } => {
                let profile = || -> Result<RateProfile> {
                    if !(horizon.is_finite() && horizon > 0.0) {
                        return Err(invalid("t_f_s", format!("must be finite and > 0, got {horizon}")));
                    }
                    match rates {
                        Some(pieces) => RateProfile::new(pieces.clone(), horizon),
                        None => RateProfile::constant(1.0, horizon),
                    }
                };
                let departure = match departure {
                    DepartureKind::Deterministic => DepartureProcess::PiecewiseConstantRate(profile()?),
                    DepartureKind::Poisson => DepartureProcess::Poisson(profile()?),
                    DepartureKind::Explicit => DepartureProcess::ExplicitTimes(
                        times
                            .clone()
                            .ok_or_else(|| invalid("times", "required for explicit departures"))?,
                    ),
                };
                let spec = DemandSpec::Sampled {
                    departure,
                    distance: distance.to_distribution(),
                    population: *population,
                };
                spec.validate()?;
                Ok(spec)
            }
        }
    }

    /// Seed as written in the config, if any.
    pub fn seed_setting(&self) -> Option<u64> {
        match &self.demand {
            DemandConfig::Sampled { seed, .. } => *seed,
            DemandConfig::Explicit { .. } => None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed_setting().unwrap_or(DEFAULT_SEED)
    }

    /// Validates the whole config and loads the files it refers to.
    pub fn resolve(&self, base: &Path) -> Result<Resolved> {
        let nfd = self.nfd(base)?;
        let demand = self.demand(base)?;
        let l = self.scenario.network_length_km;
        let horizon = self.scenario.t_f_s;
        let dt = match self.scenario.dt_s {
            Timestep::Seconds(dt) => dt,
            Timestep::Auto(_) => {
                let e_bar = average_inflow(demand.population(), l, horizon)?;
                match suggested_timestep(e_bar, l) {
                    Ok(dt) => clamp_timestep(dt, DEFAULT_TIMESTEP_FLOOR_S, horizon),
                    // no demand: one step per horizon is as good as any
                    Err(_) if demand.population() == 0 => horizon,
                    Err(e) => return Err(e),
                }
            }
        };
        Ok(Resolved {
            scenario: Scenario::new(l, horizon, dt, nfd)?,
            demand,
            engine: self.engine()?,
            seed: self.seed(),
        })
    }
}

impl DistanceConfig {
    pub fn to_distribution(&self) -> DistanceDistribution {
        match self {
            DistanceConfig::Ne { mean_km } => DistanceDistribution::NegExp { mean_km: *mean_km },
            DistanceConfig::Constant { d_km } => DistanceDistribution::Constant { d_km: *d_km },
            DistanceConfig::Lognormal { mu_log, sigma_log } => DistanceDistribution::LogNormal {
                mu_log: *mu_log,
                sigma_log: *sigma_log,
            },
            DistanceConfig::Discrete { table } => DistanceDistribution::DiscreteTable(table.clone()),
            DistanceConfig::Piecewise { pieces } => DistanceDistribution::PiecewiseInTime(
                pieces
                    .iter()
                    .map(|p| (p.start_s, p.distance.to_distribution()))
                    .collect(),
            ),
        }
    }

    pub fn from_distribution(d: &DistanceDistribution) -> Self {
        match d {
            DistanceDistribution::NegExp { mean_km } => DistanceConfig::Ne { mean_km: *mean_km },
            DistanceDistribution::Constant { d_km } => DistanceConfig::Constant { d_km: *d_km },
            DistanceDistribution::LogNormal { mu_log, sigma_log } => DistanceConfig::Lognormal {
                mu_log: *mu_log,
                sigma_log: *sigma_log,
            },
            DistanceDistribution::DiscreteTable(table) => DistanceConfig::Discrete { table: table.clone() },
            DistanceDistribution::PiecewiseInTime(pieces) => DistanceConfig::Piecewise {
                pieces: pieces
                    .iter()
                    .map(|(start_s, d)| DistancePiece {
                        start_s: *start_s,
                        distance: DistanceConfig::from_distribution(d),
                    })
                    .collect(),
            },
        }
    }
}

/// Demand section describing `spec`; explicit tables are referenced as
/// `trips_file`, which the caller writes.
pub fn demand_config(spec: &DemandSpec, seed: Option<u64>, trips_file: &Path) -> DemandConfig {
    match spec {
        DemandSpec::Explicit(_) => DemandConfig::Explicit {
            file: trips_file.to_path_buf(),
        },
        DemandSpec::Sampled {
            departure,
            distance,
            population,
        } => {
            let pieces = |p: &RateProfile| Some(p.segments().map(|(start, _, rate)| (start, rate)).collect());
            let (kind, rates, times) = match departure {
                DepartureProcess::PiecewiseConstantRate(p) => (DepartureKind::Deterministic, pieces(p), None),
                DepartureProcess::Poisson(p) => (DepartureKind::Poisson, pieces(p), None),
                DepartureProcess::ExplicitTimes(t) => (DepartureKind::Explicit, None, Some(t.clone())),
            };
            DemandConfig::Sampled {
                departure: kind,
                rates,
                times,
                population: *population,
                seed,
                distance: DistanceConfig::from_distribution(distance),
            }
        }
    }
}
