//! Benchmark sweeps: every (planner, officer count, run) cell simulates the
//! same scenario under its own derived sub-seed, so any single cell can be
//! reproduced in isolation. Cells execute in parallel through [`exec`];
//! metrics are computed in-worker and event logs stream to a caller-supplied
//! sink instead of accumulating in memory.

use crate::eval::{self, MetricReport, RunMetrics};
use crate::exec;
use crate::ingest::Scenario;
use crate::optimize::Planner;
use crate::predict::HotspotMap;
use crate::sim::{self, EventLog, SimConfig, SimError};

/// Coordinates of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSpec {
    pub planner: Planner,
    pub n_officers: u32,
    pub run: u32,
    pub sub_seed: u64,
}

/// Outcome of one sweep cell: its per-period metrics.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub spec: CellSpec,
    pub metrics: Vec<RunMetrics>,
}

/// Sweep grid definition.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub planners: Vec<Planner>,
    pub officer_counts: Vec<u32>,
    pub runs: u32,
    pub seed: u64,
    pub sim: SimConfig,
    pub from_day: u32,
    pub to_day: u32,
}

impl SweepConfig {
    /// Weekly, monthly and whole-range reporting periods.
    pub fn periods(&self, scenario: &Scenario) -> Vec<(String, u32, u32)> {
        let mut periods = eval::weekly_periods(self.from_day, self.to_day);
        periods.extend(eval::monthly_periods(scenario, self.from_day, self.to_day));
        periods.push(("total".to_string(), self.from_day, self.to_day));
        periods
    }

    /// All cell coordinates in deterministic order (planner-major, then
    /// officer count, then run).
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut specs = Vec::new();
        for &planner in &self.planners {
            for &n_officers in &self.officer_counts {
                for run in 0..self.runs {
                    specs.push(CellSpec {
                        planner,
                        n_officers,
                        run,
                        sub_seed: sub_seed(self.seed, planner, n_officers, run),
                    });
                }
            }
        }
        specs
    }
}

/// Derives the seed of one sweep cell from the top-level seed and the cell
/// coordinates (FNV-1a over the rendered key, stable across platforms).
pub fn sub_seed(top_seed: u64, planner: Planner, n_officers: u32, run: u32) -> u64 {
    let key = format!("{top_seed}:{}:{n_officers}:{run}", planner.name());
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = FNV_OFFSET;
    for byte in key.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Simulates one cell.
pub fn run_cell(
    scenario: &Scenario,
    hotspots: &HotspotMap,
    cfg: &SweepConfig,
    spec: &CellSpec,
) -> Result<EventLog, SimError> {
    sim::run(
        scenario,
        hotspots,
        spec.planner,
        spec.n_officers,
        spec.sub_seed,
        cfg.sim.clone(),
        cfg.from_day,
        cfg.to_day,
    )
}

/// Runs every cell of the sweep; `jobs` bounds the worker threads
/// (0 = default pool). `on_log` receives each cell's event log as it
/// completes (concurrently under `parallel`) and may persist it; the logs
/// themselves are dropped afterwards.
pub fn run_sweep<F>(
    scenario: &Scenario,
    hotspots: &HotspotMap,
    cfg: &SweepConfig,
    jobs: usize,
    on_log: F,
) -> Result<Vec<SweepCell>, SimError>
where
    F: Fn(&CellSpec, &EventLog) -> Result<(), String> + Sync,
{
    let specs = cfg.cells();
    let periods = cfg.periods(scenario);
    let outcomes: Vec<Result<SweepCell, SimError>> = exec::with_jobs(jobs, || {
        exec::map_slice(&specs, |spec| {
            let log = run_cell(scenario, hotspots, cfg, spec)?;
            on_log(spec, &log).map_err(SimError::Sink)?;
            let metrics = eval::run_metrics(
                &log,
                scenario,
                spec.planner,
                spec.n_officers,
                spec.run,
                &periods,
            );
            Ok(SweepCell { spec: *spec, metrics })
        })
    });
    outcomes.into_iter().collect()
}

/// Convenience wrapper: run and aggregate in one call.
pub fn run_and_aggregate<F>(
    scenario: &Scenario,
    hotspots: &HotspotMap,
    cfg: &SweepConfig,
    jobs: usize,
    on_log: F,
) -> Result<(Vec<SweepCell>, Vec<MetricReport>), SimError>
where
    F: Fn(&CellSpec, &EventLog) -> Result<(), String> + Sync,
{
    let cells = run_sweep(scenario, hotspots, cfg, jobs, on_log)?;
    let rows: Vec<RunMetrics> = cells.iter().flat_map(|c| c.metrics.iter().cloned()).collect();
    Ok((cells, eval::aggregate(&rows)))
}

/// Sink that discards logs.
pub fn drop_logs(_: &CellSpec, _: &EventLog) -> Result<(), String> {
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BBox;
    use crate::ingest::{generate_synthetic, SyntheticParams};
    use crate::optimize::OptimizerParams;
    use chrono::NaiveDate;
    use std::sync::Mutex;

    fn tiny_setup() -> (Scenario, HotspotMap, SweepConfig) {
        let params = SyntheticParams {
            bbox: BBox::new(47.5, -122.4, 47.56, -122.32).unwrap(),
            grid_rows: 2,
            grid_cols: 3,
            start_date: NaiveDate::from_ymd_opt(2013, 1, 7).unwrap(),
            n_days: 2,
            crime_rate_per_node_slot: 0.05,
            call_rate_per_day: 5.0,
            n_users: 8,
            n_venues: 6,
        };
        let scenario = generate_synthetic(&params, 21).unwrap();
        let cfg = SweepConfig {
            planners: vec![Planner::ImpGreedy, Planner::DisGreedy],
            officer_counts: vec![1, 2],
            runs: 2,
            seed: 77,
            sim: SimConfig {
                optimizer: OptimizerParams {
                    population_size: 8,
                    max_iterations: 4,
                    ..OptimizerParams::default()
                },
                ..SimConfig::default()
            },
            from_day: 0,
            to_day: 2,
        };
        (scenario, HotspotMap::default(), cfg)
    }

    #[test]
    fn sub_seed_is_stable_and_distinct() {
        let a = sub_seed(42, Planner::GlerkGa, 5, 0);
        assert_eq!(a, sub_seed(42, Planner::GlerkGa, 5, 0));
        assert_ne!(a, sub_seed(42, Planner::GlerkGa, 5, 1));
        assert_ne!(a, sub_seed(42, Planner::GlerkCs, 5, 0));
        assert_ne!(a, sub_seed(43, Planner::GlerkGa, 5, 0));
    }

    #[test]
    fn sweep_produces_all_cells_in_order() {
        let (scenario, hotspots, cfg) = tiny_setup();
        let cells = run_sweep(&scenario, &hotspots, &cfg, 2, drop_logs).unwrap();
        assert_eq!(cells.len(), 2 * 2 * 2);
        assert_eq!(cells[0].spec.planner, Planner::ImpGreedy);
        assert_eq!(cells[0].spec.n_officers, 1);
        assert_eq!(cells[0].spec.run, 0);
        assert_eq!(cells.last().unwrap().spec.planner, Planner::DisGreedy);
    }

    #[test]
    fn cell_rerun_is_byte_identical() {
        let (scenario, hotspots, cfg) = tiny_setup();
        let captured: Mutex<Option<(CellSpec, String)>> = Mutex::new(None);
        run_sweep(&scenario, &hotspots, &cfg, 0, |spec, log| {
            if spec.run == 1 && spec.planner == Planner::DisGreedy && spec.n_officers == 2 {
                *captured.lock().unwrap() = Some((*spec, log.to_csv_string()));
            }
            Ok(())
        })
        .unwrap();
        let (spec, csv) = captured.into_inner().unwrap().expect("cell captured");
        let rerun = run_cell(&scenario, &hotspots, &cfg, &spec).unwrap();
        assert_eq!(rerun.to_csv_string(), csv);
    }

    #[test]
    fn aggregate_covers_every_group() {
        let (scenario, hotspots, cfg) = tiny_setup();
        let (_cells, reports) = run_and_aggregate(&scenario, &hotspots, &cfg, 2, drop_logs).unwrap();
        // 2 planners x 2 counts x periods {week1, 2013-01, total} x metrics.
        let robustness_rows: Vec<_> = reports.iter().filter(|r| r.metric == "robustness").collect();
        assert_eq!(robustness_rows.len(), 2 * 2 * 3);
        assert!(robustness_rows.iter().all(|r| r.runs == 2));
    }

    #[test]
    fn sink_errors_propagate() {
        let (scenario, hotspots, cfg) = tiny_setup();
        let result = run_sweep(&scenario, &hotspots, &cfg, 0, |_, _| Err("disk full".into()));
        assert!(matches!(result, Err(SimError::Sink(_))));
    }
}
