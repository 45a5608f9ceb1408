//! Post-run metrics: efficiency (fraction of crimes whose node was visited
//! within +-60 minutes of the occurrence) and robustness (total
//! arrival-time-weighted credit over attended calls), with weekly/monthly
//! aggregation across runs.

use std::collections::HashMap;

use crate::domain::arrival_multiplier;
use crate::ingest::{bin, Scenario};
use crate::optimize::Planner;
use crate::sim::EventLog;

/// Window around a crime within which a visit counts as prevention.
pub const EFFICIENCY_WINDOW_MIN: f64 = 60.0;

/// Aggregated mean/std of one metric for one (planner, officers, period) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub planner: String,
    pub n_officers: u32,
    pub period: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// One run's metric values for one reporting period.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub planner: Planner,
    pub n_officers: u32,
    pub run: u32,
    pub period: String,
    /// `None` when the period contains no crimes.
    pub efficiency: Option<f64>,
    pub robustness: f64,
}

/// Fraction of crimes in `[from_day, to_day)` whose node was visited within
/// +-60 minutes of the occurrence; `None` when the period has no crimes.
pub fn efficiency(log: &EventLog, scenario: &Scenario, from_day: u32, to_day: u32) -> Option<f64> {
    let visits = log.visit_intervals();
    let mut per_node: HashMap<crate::domain::NodeId, Vec<(i64, i64)>> = HashMap::new();
    for (node, start, end) in visits {
        per_node.entry(node).or_default().push((start, end));
    }

    let mut crimes = 0usize;
    let mut prevented = 0usize;
    for crime in &scenario.crimes {
        let Some(day) = scenario.day_of(crime.timestamp) else { continue };
        if day < from_day || day >= to_day {
            continue;
        }
        let Some(node) = bin(crime.pos, &scenario.grid) else { continue };
        crimes += 1;
        let t = scenario.minute_of(crime.timestamp);
        let lo = t - EFFICIENCY_WINDOW_MIN;
        let hi = t + EFFICIENCY_WINDOW_MIN;
        let visited = per_node
            .get(&node)
            .is_some_and(|iv| iv.iter().any(|&(s, e)| (s as f64) <= hi && (e as f64) >= lo));
        prevented += usize::from(visited);
    }
    (crimes > 0).then(|| prevented as f64 / crimes as f64)
}

/// Total robustness over `[from_min, to_min)`: the sum of arrival-time
/// multipliers of attended calls; unattended calls contribute nothing.
pub fn robustness(log: &EventLog, from_min: i64, to_min: i64) -> f64 {
    log.attended_calls()
        .iter()
        .filter(|(t, _, _, _)| (from_min..to_min).contains(t))
        .map(|&(_, _, priority, delay)| arrival_multiplier(delay, priority))
        .sum()
}

/// Consecutive 7-day reporting periods over `[from_day, to_day)`, labeled
/// `week1`, `week2`, ...
pub fn weekly_periods(from_day: u32, to_day: u32) -> Vec<(String, u32, u32)> {
    let mut periods = Vec::new();
    let mut start = from_day;
    let mut index = 1u32;
    while start < to_day {
        let end = (start + 7).min(to_day);
        periods.push((format!("week{index}"), start, end));
        start = end;
        index += 1;
    }
    periods
}

/// Calendar-month reporting periods over `[from_day, to_day)`, labeled
/// `YYYY-MM`.
pub fn monthly_periods(scenario: &Scenario, from_day: u32, to_day: u32) -> Vec<(String, u32, u32)> {
    let mut periods: Vec<(String, u32, u32)> = Vec::new();
    for day in from_day..to_day {
        let date = scenario.start_date + chrono::Duration::days(i64::from(day));
        let label = date.format("%Y-%m").to_string();
        match periods.last_mut() {
            Some((last, _, end)) if *last == label => *end = day + 1,
            _ => periods.push((label, day, day + 1)),
        }
    }
    periods
}

/// Computes per-period metrics of one run.
pub fn run_metrics(
    log: &EventLog,
    scenario: &Scenario,
    planner: Planner,
    n_officers: u32,
    run: u32,
    periods: &[(String, u32, u32)],
) -> Vec<RunMetrics> {
    periods
        .iter()
        .map(|(label, from_day, to_day)| RunMetrics {
            planner,
            n_officers,
            run,
            period: label.clone(),
            efficiency: efficiency(log, scenario, *from_day, *to_day),
            robustness: robustness(
                log,
                i64::from(*from_day) * 24 * 60,
                i64::from(*to_day) * 24 * 60,
            ),
        })
        .collect()
}

/// Mean and sample standard deviation; a single value has zero deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Groups per-run metrics by (planner, officers, period, metric) and reports
/// mean/std over runs. Undefined efficiencies are excluded from their group;
/// a group with no defined values is dropped.
pub fn aggregate(rows: &[RunMetrics]) -> Vec<MetricReport> {
    let mut groups: HashMap<(String, u32, String, &'static str), Vec<f64>> = HashMap::new();
    for row in rows {
        groups
            .entry((row.planner.name().to_string(), row.n_officers, row.period.clone(), "robustness"))
            .or_default()
            .push(row.robustness);
        if let Some(eff) = row.efficiency {
            groups
                .entry((row.planner.name().to_string(), row.n_officers, row.period.clone(), "efficiency"))
                .or_default()
                .push(eff);
        }
    }
    let mut reports: Vec<MetricReport> = groups
        .into_iter()
        .map(|((planner, n_officers, period, metric), values)| {
            let (mean, std) = mean_std(&values);
            MetricReport { planner, n_officers, period, metric: metric.to_string(), mean, std, runs: values.len() }
        })
        .collect();
    reports.sort_by(|a, b| {
        (&a.planner, a.n_officers, &a.period, &a.metric).cmp(&(&b.planner, b.n_officers, &b.period, &b.metric))
    });
    reports
}

/// Renders `planner,n_officers,period,metric,mean,std,runs` rows.
pub fn report_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("planner,n_officers,period,metric,mean,std,runs\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{}\n",
            r.planner, r.n_officers, r.period, r.metric, r.mean, r.std, r.runs
        ));
    }
    out
}
