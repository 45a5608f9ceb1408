//! Declarative run configuration: a versioned TOML document covering data
//! sources (CSV paths or synthetic rates), the grid, the train/test split,
//! predictor and optimizer settings, and the benchmark sweep.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use patrol_core::domain::BBox;
use patrol_core::ingest::SyntheticParams;
use patrol_core::optimize::{OptimizerParams, Planner};
use patrol_core::sim::SimConfig;
use serde::Deserialize;

pub const SUPPORTED_CONFIG_VERSION: u32 = 1;

/// Raw TOML shape; validated into [`RunConfig`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    config_version: u32,
    seed: u64,
    grid: RawGrid,
    #[serde(default)]
    data: Option<RawData>,
    #[serde(default)]
    synthetic: Option<RawSynthetic>,
    time: RawTime,
    #[serde(default)]
    predict: RawPredict,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    optimize: RawOptimize,
    benchmark: RawBenchmark,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    rows: u32,
    cols: u32,
    /// `[min_lat, min_lon, max_lat, max_lon]`.
    bbox: [f64; 4],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    crimes: PathBuf,
    checkins: PathBuf,
    pois: PathBuf,
    calls: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSynthetic {
    crime_rate_per_node_slot: f64,
    call_rate_per_day: f64,
    n_users: u32,
    n_venues: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    #[serde(default = "default_slot_minutes")]
    slot_minutes: i64,
    train_start: String,
    /// Exclusive.
    train_end: String,
    test_start: String,
    /// Exclusive.
    test_end: String,
}

fn default_slot_minutes() -> i64 {
    120
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPredict {
    #[serde(default)]
    predictor: Option<String>,
    #[serde(default)]
    n_trees: Option<usize>,
    #[serde(default)]
    max_depth: Option<usize>,
    #[serde(default)]
    min_leaf: Option<usize>,
    #[serde(default)]
    feature_subset_size: Option<usize>,
    #[serde(default)]
    vote_threshold: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(default)]
    speed_mps: Option<f64>,
    #[serde(default)]
    stay_minutes: Option<f64>,
    #[serde(default)]
    salary_rho: Option<f64>,
    #[serde(default)]
    shift_start: Option<String>,
    #[serde(default)]
    shift_end: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOptimize {
    #[serde(default)]
    population_size: Option<usize>,
    #[serde(default)]
    max_iterations: Option<usize>,
    #[serde(default)]
    elitist_rate: Option<f64>,
    #[serde(default)]
    cross_rate: Option<f64>,
    #[serde(default)]
    mutate_rate: Option<f64>,
    #[serde(default)]
    p_a: Option<f64>,
    #[serde(default)]
    p_c: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    lambda_levy: Option<f64>,
    #[serde(default)]
    pre_fly: Option<f64>,
    #[serde(default)]
    local_opt_probability: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBenchmark {
    planners: Vec<String>,
    officer_counts: Vec<u32>,
    #[serde(default = "default_runs")]
    runs: u32,
}

fn default_runs() -> u32 {
    5
}

/// Which hotspot predictor feeds the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    Forest,
    Density,
}

/// CSV paths, present when the config uses on-disk data.
#[derive(Debug, Clone)]
pub struct DataPaths {
    pub crimes: PathBuf,
    pub checkins: PathBuf,
    pub pois: PathBuf,
    pub calls: PathBuf,
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub bbox: BBox,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub data: Option<DataPaths>,
    pub synthetic: Option<SyntheticRates>,
    pub start_date: NaiveDate,
    /// Scenario length: covers train and test.
    pub n_days: u32,
    pub train_days: std::ops::Range<u32>,
    pub test_days: std::ops::Range<u32>,
    pub predictor: PredictorKind,
    pub forest: patrol_core::predict::ForestParams,
    pub vote_threshold: f64,
    pub sim: SimConfig,
    pub planners: Vec<Planner>,
    pub officer_counts: Vec<u32>,
    pub runs: u32,
}

#[derive(Debug, Clone)]
pub struct SyntheticRates {
    pub crime_rate_per_node_slot: f64,
    pub call_rate_per_day: f64,
    pub n_users: u32,
    pub n_venues: u32,
}

impl RunConfig {
    pub fn synthetic_params(&self) -> Option<SyntheticParams> {
        let rates = self.synthetic.as_ref()?;
        Some(SyntheticParams {
            bbox: self.bbox,
            grid_rows: self.grid_rows,
            grid_cols: self.grid_cols,
            start_date: self.start_date,
            n_days: self.n_days,
            crime_rate_per_node_slot: rates.crime_rate_per_node_slot,
            call_rate_per_day: rates.call_rate_per_day,
            n_users: rates.n_users,
            n_venues: rates.n_venues,
        })
    }
}

fn parse_date(field: &str, value: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d")
        .map_err(|e| format!("{field}: cannot parse date `{value}`: {e}"))
}

fn parse_shift(field: &str, value: &str) -> Result<i64, String> {
    let parts: Vec<&str> = value.trim().split(':').collect();
    let bad = || format!("{field}: expected HH:MM, got `{value}`");
    if parts.len() != 2 {
        return Err(bad());
    }
    let hours: i64 = parts[0].parse().map_err(|_| bad())?;
    let minutes: i64 = parts[1].parse().map_err(|_| bad())?;
    if !(0..=24).contains(&hours) || !(0..60).contains(&minutes) {
        return Err(bad());
    }
    Ok(hours * 60 + minutes)
}

/// Loads and validates a config file; error strings describe the violation.
pub fn load(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    validate(raw, path.parent().unwrap_or(Path::new(".")))
}

fn validate(raw: RawConfig, base_dir: &Path) -> Result<RunConfig, String> {
    if raw.config_version != SUPPORTED_CONFIG_VERSION {
        return Err(format!(
            "config_version {} is not supported (expected {SUPPORTED_CONFIG_VERSION})",
            raw.config_version
        ));
    }
    if raw.time.slot_minutes != 120 {
        return Err(format!("time.slot_minutes = {} is not supported (only 120)", raw.time.slot_minutes));
    }
    let [min_lat, min_lon, max_lat, max_lon] = raw.grid.bbox;
    let bbox = BBox::new(min_lat, min_lon, max_lat, max_lon).map_err(|e| format!("grid.bbox: {e}"))?;
    if raw.grid.rows == 0 || raw.grid.cols == 0 {
        return Err("grid.rows and grid.cols must be positive".into());
    }

    let train_start = parse_date("time.train_start", &raw.time.train_start)?;
    let train_end = parse_date("time.train_end", &raw.time.train_end)?;
    let test_start = parse_date("time.test_start", &raw.time.test_start)?;
    let test_end = parse_date("time.test_end", &raw.time.test_end)?;
    if train_start >= train_end {
        return Err("time: train range is empty".into());
    }
    if test_start >= test_end {
        return Err("time: test range is empty".into());
    }
    if train_end > test_start {
        return Err("time: train and test ranges must be disjoint, train first".into());
    }
    let n_days = (test_end - train_start).num_days() as u32;
    let day_of = |d: NaiveDate| (d - train_start).num_days() as u32;
    let train_days = day_of(train_start)..day_of(train_end);
    let test_days = day_of(test_start)..day_of(test_end);

    let data = match raw.data {
        None => None,
        Some(d) => {
            let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
            let paths = DataPaths {
                crimes: resolve(d.crimes),
                checkins: resolve(d.checkins),
                pois: resolve(d.pois),
                calls: resolve(d.calls),
            };
            for (name, p) in [
                ("data.crimes", &paths.crimes),
                ("data.checkins", &paths.checkins),
                ("data.pois", &paths.pois),
                ("data.calls", &paths.calls),
            ] {
                if !p.exists() {
                    return Err(format!("{name}: file {} does not exist", p.display()));
                }
            }
            Some(paths)
        }
    };
    let synthetic = raw.synthetic.map(|s| SyntheticRates {
        crime_rate_per_node_slot: s.crime_rate_per_node_slot,
        call_rate_per_day: s.call_rate_per_day,
        n_users: s.n_users,
        n_venues: s.n_venues,
    });
    if data.is_none() && synthetic.is_none() {
        return Err("either [data] paths or a [synthetic] section is required".into());
    }
    if let Some(s) = &synthetic {
        if s.crime_rate_per_node_slot < 0.0 || s.call_rate_per_day < 0.0 {
            return Err("synthetic rates must be non-negative".into());
        }
    }

    let predictor = match raw.predict.predictor.as_deref() {
        None | Some("forest") => PredictorKind::Forest,
        Some("density") => PredictorKind::Density,
        Some(other) => return Err(format!("predict.predictor: unknown predictor `{other}`")),
    };
    let forest_defaults = patrol_core::predict::ForestParams::default();
    let forest = patrol_core::predict::ForestParams {
        n_trees: raw.predict.n_trees.unwrap_or(forest_defaults.n_trees),
        max_depth: raw.predict.max_depth.unwrap_or(forest_defaults.max_depth),
        min_leaf: raw.predict.min_leaf.unwrap_or(forest_defaults.min_leaf),
        feature_subset_size: raw.predict.feature_subset_size.or(forest_defaults.feature_subset_size),
        bootstrap: true,
    };
    if forest.n_trees == 0 || forest.max_depth == 0 || forest.min_leaf == 0 {
        return Err("predict: n_trees, max_depth and min_leaf must be positive".into());
    }
    let vote_threshold = raw.predict.vote_threshold.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&vote_threshold) {
        return Err(format!("predict.vote_threshold = {vote_threshold} outside [0, 1]"));
    }

    let optimizer_defaults = OptimizerParams::default();
    let optimizer = OptimizerParams {
        population_size: raw.optimize.population_size.unwrap_or(optimizer_defaults.population_size),
        max_iterations: raw.optimize.max_iterations.unwrap_or(optimizer_defaults.max_iterations),
        elitist_rate: raw.optimize.elitist_rate.unwrap_or(optimizer_defaults.elitist_rate),
        cross_rate: raw.optimize.cross_rate.unwrap_or(optimizer_defaults.cross_rate),
        mutate_rate: raw.optimize.mutate_rate.unwrap_or(optimizer_defaults.mutate_rate),
        p_a: raw.optimize.p_a.unwrap_or(optimizer_defaults.p_a),
        p_c: raw.optimize.p_c.unwrap_or(optimizer_defaults.p_c),
        alpha: raw.optimize.alpha.unwrap_or(optimizer_defaults.alpha),
        lambda_levy: raw.optimize.lambda_levy.unwrap_or(optimizer_defaults.lambda_levy),
        pre_fly: raw.optimize.pre_fly.unwrap_or(optimizer_defaults.pre_fly),
        local_opt_probability: raw
            .optimize
            .local_opt_probability
            .unwrap_or(optimizer_defaults.local_opt_probability),
    };
    optimizer.validate().map_err(|e| format!("optimize: {e}"))?;

    let sim_defaults = SimConfig::default();
    let stay = raw.sim.stay_minutes.unwrap_or(10.0);
    if stay < 0.0 {
        return Err("sim.stay_minutes must be non-negative".into());
    }
    let speed_mps = raw.sim.speed_mps.unwrap_or(sim_defaults.speed_mps);
    if speed_mps <= 0.0 {
        return Err(format!("sim.speed_mps = {speed_mps} must be positive"));
    }
    let shift_start = match &raw.sim.shift_start {
        Some(s) => parse_shift("sim.shift_start", s)?,
        None => sim_defaults.shift_start_min,
    };
    let shift_end = match &raw.sim.shift_end {
        Some(s) => parse_shift("sim.shift_end", s)?,
        None => sim_defaults.shift_end_min,
    };
    if shift_start >= shift_end {
        return Err("sim: shift_start must precede shift_end".into());
    }
    let sim = SimConfig {
        speed_mps,
        stay_coldspot_min: stay,
        stay_hotspot_min: stay,
        stay_emergency_min: stay,
        shift_start_min: shift_start,
        shift_end_min: shift_end,
        salary_rho: raw.sim.salary_rho.unwrap_or(0.0),
        optimizer,
    };

    if raw.benchmark.planners.is_empty() {
        return Err("benchmark.planners must not be empty".into());
    }
    let planners = raw
        .benchmark
        .planners
        .iter()
        .map(|name| name.parse::<Planner>().map_err(|e| format!("benchmark.planners: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if raw.benchmark.officer_counts.is_empty() || raw.benchmark.officer_counts.contains(&0) {
        return Err("benchmark.officer_counts must be non-empty and positive".into());
    }
    if raw.benchmark.runs == 0 {
        return Err("benchmark.runs must be positive".into());
    }

    Ok(RunConfig {
        seed: raw.seed,
        bbox,
        grid_rows: raw.grid.rows,
        grid_cols: raw.grid.cols,
        data,
        synthetic,
        start_date: train_start,
        n_days,
        train_days,
        test_days,
        predictor,
        forest,
        vote_threshold,
        sim,
        planners,
        officer_counts: raw.benchmark.officer_counts,
        runs: raw.benchmark.runs,
    })
}
