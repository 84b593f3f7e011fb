mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bathtub_bench::{fit_slope, sweep, SweepTemplate};
use bathtub_core::continuum::{solve_mm, sup_norm_gap};
use bathtub_core::io::{
    format_g, write_batch, write_continuum, write_file, write_timeseries, write_travel_times,
    write_trip_outcomes, write_trip_table,
};
use bathtub_core::{
    run_batch, run_pq, sample_trips, solve_gbm, solve_vbm, travel_times, tttd, ContinuumDemand,
    DemandSpec, EngineKind, Error, ScalingKind, ScalingSpec,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{demand_config, RunConfig};

const DEFAULT_OUT: &str = "out";
const BIN_WIDTH_S: f64 = 60.0;
const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Parser)]
#[command(name = "bathtub", version, about = "Agent-based bathtub model simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its time series and trip outcomes.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        engine: Option<EngineKind>,
    },
    /// Repeat a sampled scenario with independent seeds and aggregate.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        runs: usize,
    },
    /// Time the engines over a range of demand sizes and fit log-log slopes.
    Bench {
        /// Scenario to take the NFD, horizon, density and distances from.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Only this engine; both by default.
        #[arg(long)]
        engine: Option<EngineKind>,
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = bathtub_bench::MIN_REPETITIONS)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a flow- or distance-scaled copy of a scenario config.
    Scale {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value = "flow")]
        mode: ScalingKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the priority-queue engine and a continuum model on the same demand.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Oracle::Vbm)]
        oracle: Oracle,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Vbm,
    Gbm,
    Mm,
}

impl Oracle {
    fn name(self) -> &'static str {
        match self {
            Oracle::Vbm => "vbm",
            Oracle::Gbm => "gbm",
            Oracle::Mm => "mm",
        }
    }
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Io(_)) | CliError::Io { .. } => 3,
            CliError::Core(Error::Csv(e)) if e.is_io_error() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_context<T>(path: &Path, r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// A config and the directory its relative paths are resolved against.
struct Loaded {
    config: RunConfig,
    base: PathBuf,
}

fn load(path: &Path) -> CliResult<Loaded> {
    let text = io_context(path, fs::read_to_string(path))?;
    let config = RunConfig::parse(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

impl Loaded {
    fn out_dir(&self, flag: Option<&Path>) -> CliResult<PathBuf> {
        let dir = match (flag, self.config.output_dir()) {
            (Some(dir), _) => dir.to_path_buf(),
            (None, Some(dir)) => self.base.join(dir),
            (None, None) => PathBuf::from(DEFAULT_OUT),
        };
        io_context(&dir, fs::create_dir_all(&dir))?;
        Ok(dir)
    }
}

/// `key = value` lines.
struct Summary(Vec<(String, String)>);

impl Summary {
    fn new() -> Self {
        Summary(Vec::new())
    }

    fn add(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.add(key, format_g(value))
    }

    fn text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    fn emit(&self, dir: &Path) -> CliResult<()> {
        let text = self.text();
        let path = dir.join("summary.txt");
        io_context(&path, fs::write(&path, &text))?;
        print!("{text}");
        Ok(())
    }
}

fn cmd_run(common: &Common, engine: Option<EngineKind>) -> CliResult<()> {
    let loaded = load(&common.config)?;
    let r = loaded.config.resolve(&loaded.base)?;
    let out = loaded.out_dir(common.out.as_deref())?;
    let engine = engine.unwrap_or(r.engine);
    let seed = common.seed.unwrap_or(r.seed);
    let trips = sample_trips(&r.demand, seed)?;
    let output = engine.run(&r.scenario, &trips)?;
    let records = travel_times(&output, &trips)?;
    write_file(&out.join("timeseries.csv"), |w| write_timeseries(&output, w))?;
    write_file(&out.join("trips.csv"), |w| write_trip_outcomes(&records, w))?;
    write_file(&out.join("travel_times.csv"), |w| write_travel_times(&records, w))?;
    let stats = tttd(&records, BIN_WIDTH_S)?;
    let last = output.steps.last().expect("at least one step");
    let max_density = output.steps.iter().map(|s| s.density).fold(0.0, f64::max);
    let min_speed = output.speed_series().into_iter().fold(f64::INFINITY, f64::min);
    Summary::new()
        .add("engine", engine)
        .add("seed", seed)
        .num("L_N_km", r.scenario.network_length_km())
        .num("t_f_s", r.scenario.horizon_s())
        .num("dt_s", r.scenario.dt_s())
        .add("I", trips.len())
        .add("completed", stats.count)
        .num("mean_travel_time_s", stats.mean_s)
        .num("std_travel_time_s", stats.std_s)
        .num("max_density_veh_km", max_density)
        .num("min_speed_km_h", min_speed)
        .num("final_z_km", last.z_km)
        .emit(&out)
}

fn cmd_montecarlo(common: &Common, runs: usize) -> CliResult<()> {
    let loaded = load(&common.config)?;
    let r = loaded.config.resolve(&loaded.base)?;
    if r.demand.is_explicit() {
        return Err(Error::Validation {
            field: "demand".into(),
            reason: "montecarlo needs a sampled demand".into(),
        }
        .into());
    }
    let out = loaded.out_dir(common.out.as_deref())?;
    let seed = common.seed.unwrap_or(r.seed);
    let stats = run_batch(&r.scenario, &r.demand, runs, seed)?;
    write_file(&out.join("batch.csv"), |w| write_batch(&stats, w))?;
    let path = out.join("tttd_histogram.csv");
    let mut hist = String::from("bin_start_s,count\n");
    for (k, n) in stats.tttd.histogram.iter().enumerate() {
        hist.push_str(&format!("{},{n}\n", format_g(k as f64 * stats.tttd.bin_width_s)));
    }
    io_context(&path, fs::write(&path, hist))?;
    let p = &stats.tttd.percentiles;
    Summary::new()
        .add("runs", stats.n_runs)
        .add("base_seed", seed)
        .add("trips", stats.tttd.count + stats.tttd.uncompleted_count)
        .add("completed", stats.tttd.count)
        .num("mean_travel_time_s", stats.tttd.mean_s)
        .num("std_travel_time_s", stats.tttd.std_s)
        .num("p5_s", p.p5)
        .num("p25_s", p.p25)
        .num("p50_s", p.p50)
        .num("p75_s", p.p75)
        .num("p95_s", p.p95)
        .emit(&out)
}

fn cmd_bench(
    config: Option<&Path>,
    engine: Option<EngineKind>,
    sizes: &[usize],
    reps: usize,
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult<()> {
    let mut template = SweepTemplate {
        repetitions: reps,
        ..SweepTemplate::default()
    };
    let out = match config {
        Some(path) => {
            let loaded = load(path)?;
            let r = loaded.config.resolve(&loaded.base)?;
            template.nfd = r.scenario.nfd().clone();
            template.horizon_s = r.scenario.horizon_s();
            template.seed = r.seed;
            if let DemandSpec::Sampled { distance, population, .. } = &r.demand {
                template.distance = distance.clone();
                if *population > 0 {
                    template.trips_per_km = *population as f64 / r.scenario.network_length_km();
                }
            }
            loaded.out_dir(out)?
        }
        None => {
            let dir = out.map_or_else(|| PathBuf::from(DEFAULT_OUT), Path::to_path_buf);
            io_context(&dir, fs::create_dir_all(&dir))?;
            dir
        }
    };
    if let Some(seed) = seed {
        template.seed = seed;
    }
    let engines = match engine {
        Some(e) => vec![e],
        None => vec![EngineKind::Naive, EngineKind::Pq],
    };
    let mut points = Vec::new();
    let mut summary = Summary::new();
    for engine in engines {
        let pts = sweep(engine, sizes, &template)?;
        match fit_slope(&pts) {
            Ok(slope) => summary.num(&format!("{engine}_slope"), slope),
            Err(e) => summary.add(&format!("{engine}_slope"), format!("n/a ({e})")),
        };
        points.extend(pts);
    }
    write_file(&out.join("bench.csv"), |w| bathtub_bench::write_csv(&points, w))?;
    summary.emit(&out)
}

fn cmd_scale(config: &Path, ratio: f64, mode: ScalingKind, out: Option<&Path>) -> CliResult<()> {
    let loaded = load(config)?;
    let r = loaded.config.resolve(&loaded.base)?;
    let (scenario, demand) = ScalingSpec::new(mode, ratio)?.apply(&r.scenario, &r.demand)?;
    let out = loaded.out_dir(out)?;
    let trips_file = Path::new("scaled_trips.csv");
    let mut scaled = loaded.config.clone();
    scaled.scenario.network_length_km = scenario.network_length_km();
    scaled.demand = demand_config(&demand, loaded.config.seed_setting(), trips_file);
    scaled.output = None;
    if let config::NfdConfig::Tabulated { file } = &mut scaled.nfd {
        *file = io_context(&loaded.base, fs::canonicalize(loaded.base.join(&*file)))?;
    }
    if let DemandSpec::Explicit(table) = &demand {
        write_file(&out.join(trips_file), |w| write_trip_table(table, w))?;
    }
    let path = out.join("scaled.toml");
    io_context(&path, fs::write(&path, scaled.to_toml()))?;
    Summary::new()
        .add("mode", mode)
        .num("ratio", ratio)
        .num("L_N_km", scenario.network_length_km())
        .add("I", demand.population())
        .add("config", path.display())
        .emit(&out)
}

fn cmd_compare(common: &Common, oracle: Oracle) -> CliResult<()> {
    let loaded = load(&common.config)?;
    let r = loaded.config.resolve(&loaded.base)?;
    let settings = loaded.config.compare_settings();
    let out = loaded.out_dir(common.out.as_deref())?;
    let seed = common.seed.unwrap_or(r.seed);
    let trips = sample_trips(&r.demand, seed)?;
    let agents = run_pq(&r.scenario, &trips)?;
    let cd = ContinuumDemand::from_spec(&r.demand)?;
    let continuum = match oracle {
        Oracle::Vbm => solve_vbm(&r.scenario, &cd)?,
        Oracle::Gbm => solve_gbm(&r.scenario, &cd)?,
        Oracle::Mm => {
            let d_star = settings.d_star_km.unwrap_or_else(|| cd.distance.mean_at(0.0));
            solve_mm(&r.scenario, &cd, settings.alpha.unwrap_or(0.0), d_star)?
        }
    };
    write_file(&out.join("agents.csv"), |w| write_timeseries(&agents, w))?;
    write_file(&out.join("continuum.csv"), |w| write_continuum(&continuum, w))?;
    let a: Vec<f64> = agents.steps.iter().map(|s| s.density).collect();
    let b = continuum.density_series();
    let gap = sup_norm_gap(&a, &b);
    let peak = b.iter().cloned().fold(0.0, f64::max);
    let relative = if peak > 0.0 { gap / peak } else { gap };
    let tolerance = settings.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    Summary::new()
        .add("oracle", oracle.name())
        .add("seed", seed)
        .add("I", trips.len())
        .num("sup_gap_veh_km", gap)
        .num("peak_density_veh_km", peak)
        .num("relative_gap", relative)
        .num("tolerance", tolerance)
        .add("within_tolerance", relative <= tolerance)
        .emit(&out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, engine } => cmd_run(common, *engine),
        Command::Montecarlo { common, runs } => cmd_montecarlo(common, *runs),
        Command::Bench {
            config,
            engine,
            sizes,
            reps,
            seed,
            out,
        } => cmd_bench(config.as_deref(), *engine, sizes, *reps, *seed, out.as_deref()),
        Command::Scale {
            config,
            ratio,
            mode,
            out,
        } => cmd_scale(config, *ratio, *mode, out.as_deref()),
        Command::Compare { common, oracle } => cmd_compare(common, *oracle),
    };
    match result {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
