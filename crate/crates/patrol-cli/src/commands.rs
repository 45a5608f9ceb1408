//! The four subcommands: scenario generation, hotspot prediction, a single
//! simulation, and the full benchmark sweep.

use std::path::Path;

use anyhow::{Context, Result};
use patrol_core::features::{self, FeatureRow};
use patrol_core::ingest::{self, Scenario};
use patrol_core::optimize::Planner;
use patrol_core::predict::{self, HotspotMap, PredictionMetrics, TreeEnsemble};
use patrol_core::sweep::{self, SweepConfig};
use patrol_core::{eval, sim};
use serde::Serialize;

use crate::config::{PredictorKind, RunConfig};

/// Writes via a temp file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Loads the scenario from CSVs or generates it; skipped and dropped rows
/// are reported on stderr.
pub fn load_scenario(cfg: &RunConfig) -> Result<Scenario> {
    let scenario = match (&cfg.data, cfg.synthetic_params()) {
        (Some(paths), _) => {
            let grid = ingest::build_grid(cfg.bbox, cfg.grid_rows, cfg.grid_cols)?;
            let crimes = ingest::load_crimes(&paths.crimes)?;
            let checkins = ingest::load_checkins(&paths.checkins)?;
            let pois = ingest::load_pois(&paths.pois)?;
            let calls = ingest::load_calls(&paths.calls)?;
            for (name, skipped) in [
                ("crimes", crimes.skipped),
                ("checkins", checkins.skipped),
                ("pois", pois.skipped),
                ("calls", calls.skipped),
            ] {
                if skipped > 0 {
                    eprintln!("{name}: skipped {skipped} malformed rows");
                }
            }
            Scenario::new(
                grid,
                crimes.records,
                checkins.records,
                pois.records,
                calls.records,
                cfg.start_date,
                cfg.n_days,
            )?
        }
        (None, Some(params)) => ingest::generate_synthetic(&params, cfg.seed)?,
        (None, None) => anyhow::bail!("config has neither [data] nor [synthetic]"),
    };
    if scenario.dropped.total() > 0 {
        let d = scenario.dropped;
        eprintln!(
            "dropped records outside the grid or date range: {} crimes, {} checkins, {} pois, {} calls",
            d.crimes, d.checkins, d.pois, d.calls
        );
    }
    Ok(scenario)
}

/// `generate`: writes the four scenario CSVs.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let params = cfg
        .synthetic_params()
        .context("generate requires a [synthetic] section in the config")?;
    let scenario = ingest::generate_synthetic(&params, cfg.seed)?;
    std::fs::create_dir_all(out)?;
    ingest::write_crimes(&out.join("crimes.csv"), &scenario.crimes)?;
    ingest::write_checkins(&out.join("checkins.csv"), &scenario.checkins)?;
    ingest::write_pois(&out.join("pois.csv"), &scenario.pois)?;
    ingest::write_calls(&out.join("calls.csv"), &scenario.calls)?;
    println!(
        "wrote {} crimes, {} checkins, {} pois, {} calls to {}",
        scenario.crimes.len(),
        scenario.checkins.len(),
        scenario.pois.len(),
        scenario.calls.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct PredictReport {
    predictor: &'static str,
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    hotspot_entries: usize,
    test_rows: usize,
}

fn confusion_metrics(pairs: impl Iterator<Item = (bool, bool)>) -> PredictionMetrics {
    let (mut tp, mut tn, mut fp, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    let mut total = 0usize;
    for (predicted, label) in pairs {
        total += 1;
        match (predicted, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    PredictionMetrics { accuracy: ratio(tp + tn, total), precision, recall, f1 }
}

/// Trains (or thresholds) the predictor and labels the test period.
/// Returns the map, held-out metrics, and the trained model when one exists.
pub fn build_hotspots(
    cfg: &RunConfig,
    scenario: &Scenario,
) -> Result<(HotspotMap, PredictionMetrics, Option<TreeEnsemble>, usize)> {
    let rows = features::compute_rows(scenario, 0, cfg.n_days);
    let train_rows: Vec<FeatureRow> =
        rows.iter().filter(|r| cfg.train_days.contains(&r.interval.day)).cloned().collect();
    let test_rows: Vec<FeatureRow> =
        rows.iter().filter(|r| cfg.test_days.contains(&r.interval.day)).cloned().collect();
    anyhow::ensure!(!test_rows.is_empty(), "test period produced no feature rows");

    match cfg.predictor {
        PredictorKind::Forest => {
            let balanced = features::undersample(&train_rows, cfg.seed)
                .context("balancing the training rows")?;
            let model = predict::train(&balanced, &cfg.forest, cfg.seed)?;
            let metrics = predict::evaluate(&model, &test_rows, cfg.vote_threshold)?;
            let map = predict::predict_hotspots(&model, &test_rows, cfg.vote_threshold)?;
            Ok((map, metrics, Some(model), test_rows.len()))
        }
        PredictorKind::Density => {
            let index = features::CrimeIndex::build(scenario);
            let map = predict::density_baseline(
                &index,
                scenario.grid.n_nodes(),
                cfg.test_days.start,
                cfg.test_days.end,
            );
            let metrics = confusion_metrics(test_rows.iter().map(|r| {
                let predicted = map.state_of(r.node, r.interval) == patrol_core::NodeState::Hotspot;
                (predicted, r.label_crime)
            }));
            Ok((map, metrics, None, test_rows.len()))
        }
    }
}

/// `predict`: writes `hotspots.csv`, `predict_metrics.json` and (for the
/// forest predictor) `model.json`.
pub fn cmd_predict(cfg: &RunConfig, out: &Path) -> Result<()> {
    let scenario = load_scenario(cfg)?;
    let (map, metrics, model, test_rows) = build_hotspots(cfg, &scenario)?;
    std::fs::create_dir_all(out)?;
    map.write_csv(&out.join("hotspots.csv"))?;
    let report = PredictReport {
        predictor: match cfg.predictor {
            PredictorKind::Forest => "forest",
            PredictorKind::Density => "density",
        },
        accuracy: metrics.accuracy,
        precision: metrics.precision,
        recall: metrics.recall,
        f1: metrics.f1,
        hotspot_entries: map.hot_count(),
        test_rows,
    };
    write_atomic(&out.join("predict_metrics.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    if let Some(model) = model {
        model.save(&out.join("model.json"))?;
    }
    println!(
        "predicted {} hotspot entries over {} test rows (accuracy {:.3})",
        map.hot_count(),
        test_rows,
        metrics.accuracy
    );
    Ok(())
}

fn events_filename(planner: Planner, n_officers: u32, run: u32) -> String {
    format!("events_{}_{n_officers}_run{run}.csv", planner.name())
}

/// `simulate`: one cell (planner, officer count, run index) of the sweep.
pub fn cmd_simulate(
    cfg: &RunConfig,
    out: &Path,
    planner: Planner,
    n_officers: u32,
    run: u32,
) -> Result<()> {
    let scenario = load_scenario(cfg)?;
    let (map, _, _, _) = build_hotspots(cfg, &scenario)?;
    let sub_seed = sweep::sub_seed(cfg.seed, planner, n_officers, run);
    let log = sim::run(
        &scenario,
        &map,
        planner,
        n_officers,
        sub_seed,
        cfg.sim.clone(),
        cfg.test_days.start,
        cfg.test_days.end,
    )?;
    std::fs::create_dir_all(out)?;
    let path = out.join("events.csv");
    write_atomic(&path, log.to_csv_string().as_bytes())?;
    let robustness = eval::robustness(
        &log,
        i64::from(cfg.test_days.start) * 24 * 60,
        i64::from(cfg.test_days.end) * 24 * 60,
    );
    let efficiency = eval::efficiency(&log, &scenario, cfg.test_days.start, cfg.test_days.end);
    println!(
        "{} with {n_officers} officers (run {run}, seed {sub_seed}): robustness {robustness:.3}, efficiency {}",
        planner.name(),
        efficiency.map_or("undefined".to_string(), |e| format!("{e:.3}")),
    );
    println!("wrote {}", path.display());
    Ok(())
}

/// `benchmark`: the full planner x officer-count x runs sweep; writes
/// `report.csv` plus one events file per cell.
pub fn cmd_benchmark(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<()> {
    let scenario = load_scenario(cfg)?;
    let (map, _, _, _) = build_hotspots(cfg, &scenario)?;
    let sweep_cfg = SweepConfig {
        planners: cfg.planners.clone(),
        officer_counts: cfg.officer_counts.clone(),
        runs: cfg.runs,
        seed: cfg.seed,
        sim: cfg.sim.clone(),
        from_day: cfg.test_days.start,
        to_day: cfg.test_days.end,
    };
    std::fs::create_dir_all(out)?;
    let (cells, reports) = sweep::run_and_aggregate(&scenario, &map, &sweep_cfg, jobs, |spec, log| {
        let path = out.join(events_filename(spec.planner, spec.n_officers, spec.run));
        write_atomic(&path, log.to_csv_string().as_bytes()).map_err(|e| e.to_string())
    })?;
    write_atomic(&out.join("report.csv"), eval::report_csv(&reports).as_bytes())?;
    println!(
        "simulated {} cells ({} planners x {} officer counts x {} runs); wrote report.csv and per-run event logs to {}",
        cells.len(),
        cfg.planners.len(),
        cfg.officer_counts.len(),
        cfg.runs,
        out.display()
    );
    Ok(())
}
