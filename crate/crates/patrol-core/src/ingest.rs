//! Record loading and scenario assembly: CSV readers/writers for crime,
//! check-in, POI and 911-call data, grid construction, point binning, and a
//! seeded synthetic scenario generator.
//!
//! All four CSV schemas are UTF-8 with a mandatory header row and RFC-4180
//! quoting:
//!
//! - `crimes.csv`:   `timestamp,lat,lon,offense_type`
//! - `checkins.csv`: `timestamp,lat,lon,user_id,venue_id`
//! - `pois.csv`:     `venue_id,lat,lon,category`
//! - `calls.csv`:    `timestamp,lat,lon,call_type`
//!
//! Timestamps are ISO-8601 local time (`2013-01-07T08:15:00`).

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::domain::{BBox, DomainError, GridMap, LatLon, NodeId, NodeState, PatrolNode, CALL_TYPE_TABLE, SLOT_MINUTES};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// POI categories used by the synthetic generator.
pub const POI_CATEGORIES: &[&str] = &[
    "food", "nightlife", "shop", "park", "college", "residence", "office", "transport",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { path: PathBuf, expected: String, found: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("grid must have at least one cell, got {rows}x{cols}")]
    EmptyGrid { rows: u32, cols: u32 },
    #[error("scenario date range is empty")]
    EmptyDateRange,
}

/// One police-report incident.
#[derive(Debug, Clone, PartialEq)]
pub struct CrimeRecord {
    pub timestamp: NaiveDateTime,
    pub pos: LatLon,
    pub offense_type: String,
}

/// One location-based social network check-in.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckinRecord {
    pub timestamp: NaiveDateTime,
    pub pos: LatLon,
    pub user_id: String,
    pub venue_id: String,
}

/// One venue (point of interest).
#[derive(Debug, Clone, PartialEq)]
pub struct PoiRecord {
    pub venue_id: String,
    pub pos: LatLon,
    pub category: String,
}

/// One 911 incident-response call.
#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub timestamp: NaiveDateTime,
    pub pos: LatLon,
    pub call_type: String,
}

/// A record collection together with the number of malformed rows skipped.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

/// Counters for records dropped while assembling a [`Scenario`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DropStats {
    pub crimes: usize,
    pub checkins: usize,
    pub pois: usize,
    pub calls: usize,
}

impl DropStats {
    pub fn total(&self) -> usize {
        self.crimes + self.checkins + self.pois + self.calls
    }
}

/// Everything one experiment needs: the grid plus the four record
/// collections, restricted to the bbox and the date range
/// `[start_date, start_date + n_days)`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: GridMap,
    pub crimes: Vec<CrimeRecord>,
    pub checkins: Vec<CheckinRecord>,
    pub pois: Vec<PoiRecord>,
    pub calls: Vec<CallRecord>,
    pub start_date: NaiveDate,
    pub n_days: u32,
    pub slot_minutes: i64,
    pub dropped: DropStats,
}

impl Scenario {
    /// Assembles a scenario, dropping (and counting) records outside the
    /// grid bbox or date range and sorting each collection chronologically.
    pub fn new(
        grid: GridMap,
        crimes: Vec<CrimeRecord>,
        checkins: Vec<CheckinRecord>,
        pois: Vec<PoiRecord>,
        calls: Vec<CallRecord>,
        start_date: NaiveDate,
        n_days: u32,
    ) -> Result<Self, IngestError> {
        if n_days == 0 {
            return Err(IngestError::EmptyDateRange);
        }
        let mut dropped = DropStats::default();
        let in_range = |ts: &NaiveDateTime| {
            let d = (ts.date() - start_date).num_days();
            d >= 0 && d < i64::from(n_days)
        };
        let bbox = grid.bbox;

        let mut crimes: Vec<_> = crimes
            .into_iter()
            .filter(|r| {
                let keep = bbox.contains(r.pos) && in_range(&r.timestamp);
                dropped.crimes += usize::from(!keep);
                keep
            })
            .collect();
        let mut checkins: Vec<_> = checkins
            .into_iter()
            .filter(|r| {
                let keep = bbox.contains(r.pos) && in_range(&r.timestamp);
                dropped.checkins += usize::from(!keep);
                keep
            })
            .collect();
        let pois: Vec<_> = pois
            .into_iter()
            .filter(|r| {
                let keep = bbox.contains(r.pos);
                dropped.pois += usize::from(!keep);
                keep
            })
            .collect();
        let mut calls: Vec<_> = calls
            .into_iter()
            .filter(|r| {
                let keep = bbox.contains(r.pos) && in_range(&r.timestamp);
                dropped.calls += usize::from(!keep);
                keep
            })
            .collect();

        crimes.sort_by_key(|r| r.timestamp);
        checkins.sort_by_key(|r| r.timestamp);
        calls.sort_by_key(|r| r.timestamp);

        Ok(Self {
            grid,
            crimes,
            checkins,
            pois,
            calls,
            start_date,
            n_days,
            slot_minutes: SLOT_MINUTES,
            dropped,
        })
    }

    /// Minutes elapsed since 00:00 of the scenario start date.
    pub fn minute_of(&self, ts: NaiveDateTime) -> f64 {
        let epoch = self.start_date.and_hms_opt(0, 0, 0).expect("midnight exists");
        (ts - epoch).num_seconds() as f64 / 60.0
    }

    /// Day index of a timestamp, if inside the scenario range.
    pub fn day_of(&self, ts: NaiveDateTime) -> Option<u32> {
        let d = (ts.date() - self.start_date).num_days();
        (d >= 0 && d < i64::from(self.n_days)).then_some(d as u32)
    }

    /// Slot index 0-11 of a timestamp within its day.
    pub fn slot_of(&self, ts: NaiveDateTime) -> u8 {
        let midnight = ts.date().and_hms_opt(0, 0, 0).expect("midnight exists");
        ((ts - midnight).num_minutes() / self.slot_minutes) as u8
    }
}

/// Builds an `rows x cols` grid of equal cells covering `bbox`.
/// Cell `(r, c)` gets id `r * cols + c`; ids count from the south-west corner.
pub fn build_grid(bbox: BBox, rows: u32, cols: u32) -> Result<GridMap, IngestError> {
    if rows == 0 || cols == 0 {
        return Err(IngestError::EmptyGrid { rows, cols });
    }
    let d_lat = (bbox.max_lat - bbox.min_lat) / f64::from(rows);
    let d_lon = (bbox.max_lon - bbox.min_lon) / f64::from(cols);
    let mut cells = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let centroid = LatLon::new(
                bbox.min_lat + (f64::from(r) + 0.5) * d_lat,
                bbox.min_lon + (f64::from(c) + 0.5) * d_lon,
            );
            cells.push(PatrolNode {
                id: NodeId(r * cols + c),
                centroid,
                state: NodeState::Coldspot,
                importance_w: 0.0,
                priority_p: 1,
                stay_time_min: 10.0,
            });
        }
    }
    // Nominal cell area at the bbox mid-latitude.
    let mid_lat = 0.5 * (bbox.min_lat + bbox.max_lat);
    let height_m = crate::domain::EARTH_RADIUS_M * d_lat.to_radians();
    let width_m = crate::domain::EARTH_RADIUS_M * mid_lat.to_radians().cos() * d_lon.to_radians();
    Ok(GridMap { bbox, rows, cols, cells, cell_area_m2: height_m * width_m })
}

/// Maps a point to the grid cell containing it, or `None` outside the bbox.
/// Points exactly on a cell boundary belong to the cell with the lower index.
pub fn bin(point: LatLon, grid: &GridMap) -> Option<NodeId> {
    if !grid.bbox.contains(point) {
        return None;
    }
    let row = axis_index(
        (point.lat - grid.bbox.min_lat) / (grid.bbox.max_lat - grid.bbox.min_lat) * f64::from(grid.rows),
        grid.rows,
    );
    let col = axis_index(
        (point.lon - grid.bbox.min_lon) / (grid.bbox.max_lon - grid.bbox.min_lon) * f64::from(grid.cols),
        grid.cols,
    );
    Some(NodeId(row * grid.cols + col))
}

/// Converts a fractional cell coordinate in `[0, n]` to a cell index,
/// assigning exact boundaries to the lower cell.
fn axis_index(x: f64, n: u32) -> u32 {
    let mut i = x.floor();
    if x == i && x > 0.0 {
        i -= 1.0;
    }
    (i as u32).min(n - 1)
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file))
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<(), IngestError> {
    let headers = reader.headers().map_err(|source| IngestError::Csv { path: path.into(), source })?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(IngestError::HeaderMismatch {
            path: path.into(),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

/// Reads a CSV with the given header, parsing each row with `parse`.
/// Rows that fail to parse are skipped and counted.
fn load_csv<T>(
    path: &Path,
    expected_header: &[&str],
    parse: impl Fn(&csv::StringRecord) -> Option<T>,
) -> Result<Loaded<T>, IngestError> {
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, expected_header)?;
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for row in reader.records() {
        match row {
            Ok(rec) if rec.len() == expected_header.len() => match parse(&rec) {
                Some(r) => records.push(r),
                None => skipped += 1,
            },
            _ => skipped += 1,
        }
    }
    Ok(Loaded { records, skipped })
}

fn parse_ts(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).ok()
}

fn parse_f64(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Loads `crimes.csv`, chronologically sorted.
pub fn load_crimes(path: &Path) -> Result<Loaded<CrimeRecord>, IngestError> {
    let mut loaded = load_csv(path, &["timestamp", "lat", "lon", "offense_type"], |rec| {
        Some(CrimeRecord {
            timestamp: parse_ts(rec.get(0)?)?,
            pos: LatLon::new(parse_f64(rec.get(1)?)?, parse_f64(rec.get(2)?)?),
            offense_type: rec.get(3)?.trim().to_string(),
        })
    })?;
    loaded.records.sort_by_key(|r| r.timestamp);
    Ok(loaded)
}

/// Loads `checkins.csv`, chronologically sorted.
pub fn load_checkins(path: &Path) -> Result<Loaded<CheckinRecord>, IngestError> {
    let mut loaded = load_csv(path, &["timestamp", "lat", "lon", "user_id", "venue_id"], |rec| {
        Some(CheckinRecord {
            timestamp: parse_ts(rec.get(0)?)?,
            pos: LatLon::new(parse_f64(rec.get(1)?)?, parse_f64(rec.get(2)?)?),
            user_id: rec.get(3)?.trim().to_string(),
            venue_id: rec.get(4)?.trim().to_string(),
        })
    })?;
    loaded.records.sort_by_key(|r| r.timestamp);
    Ok(loaded)
}

/// Loads `pois.csv` (no timestamp, kept in file order).
pub fn load_pois(path: &Path) -> Result<Loaded<PoiRecord>, IngestError> {
    load_csv(path, &["venue_id", "lat", "lon", "category"], |rec| {
        Some(PoiRecord {
            venue_id: rec.get(0)?.trim().to_string(),
            pos: LatLon::new(parse_f64(rec.get(1)?)?, parse_f64(rec.get(2)?)?),
            category: rec.get(3)?.trim().to_string(),
        })
    })
}

/// Loads `calls.csv`, chronologically sorted.
pub fn load_calls(path: &Path) -> Result<Loaded<CallRecord>, IngestError> {
    let mut loaded = load_csv(path, &["timestamp", "lat", "lon", "call_type"], |rec| {
        Some(CallRecord {
            timestamp: parse_ts(rec.get(0)?)?,
            pos: LatLon::new(parse_f64(rec.get(1)?)?, parse_f64(rec.get(2)?)?),
            call_type: rec.get(3)?.trim().to_string(),
        })
    })?;
    loaded.records.sort_by_key(|r| r.timestamp);
    Ok(loaded)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, IngestError> {
    let file = std::fs::File::create(path).map_err(|source| IngestError::Io { path: path.into(), source })?;
    Ok(csv::Writer::from_writer(file))
}

fn write_err(path: &Path, source: csv::Error) -> IngestError {
    IngestError::Csv { path: path.into(), source }
}

pub fn write_crimes(path: &Path, records: &[CrimeRecord]) -> Result<(), IngestError> {
    let mut w = csv_writer(path)?;
    w.write_record(["timestamp", "lat", "lon", "offense_type"]).map_err(|e| write_err(path, e))?;
    for r in records {
        w.write_record(&[
            r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            r.pos.lat.to_string(),
            r.pos.lon.to_string(),
            r.offense_type.clone(),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|source| IngestError::Io { path: path.into(), source })?;
    Ok(())
}

pub fn write_checkins(path: &Path, records: &[CheckinRecord]) -> Result<(), IngestError> {
    let mut w = csv_writer(path)?;
    w.write_record(["timestamp", "lat", "lon", "user_id", "venue_id"]).map_err(|e| write_err(path, e))?;
    for r in records {
        w.write_record(&[
            r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            r.pos.lat.to_string(),
            r.pos.lon.to_string(),
            r.user_id.clone(),
            r.venue_id.clone(),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|source| IngestError::Io { path: path.into(), source })?;
    Ok(())
}

pub fn write_pois(path: &Path, records: &[PoiRecord]) -> Result<(), IngestError> {
    let mut w = csv_writer(path)?;
    w.write_record(["venue_id", "lat", "lon", "category"]).map_err(|e| write_err(path, e))?;
    for r in records {
        w.write_record(&[r.venue_id.clone(), r.pos.lat.to_string(), r.pos.lon.to_string(), r.category.clone()])
            .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|source| IngestError::Io { path: path.into(), source })?;
    Ok(())
}

pub fn write_calls(path: &Path, records: &[CallRecord]) -> Result<(), IngestError> {
    let mut w = csv_writer(path)?;
    w.write_record(["timestamp", "lat", "lon", "call_type"]).map_err(|e| write_err(path, e))?;
    for r in records {
        w.write_record(&[
            r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            r.pos.lat.to_string(),
            r.pos.lon.to_string(),
            r.call_type.clone(),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|source| IngestError::Io { path: path.into(), source })?;
    Ok(())
}

/// Knobs of the synthetic scenario generator.
#[derive(Debug, Clone)]
pub struct SyntheticParams {
    pub bbox: BBox,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub start_date: NaiveDate,
    pub n_days: u32,
    /// Mean crimes per (node, slot) averaged over the grid.
    pub crime_rate_per_node_slot: f64,
    /// Mean 911 calls per day over the whole grid.
    pub call_rate_per_day: f64,
    pub n_users: u32,
    pub n_venues: u32,
}

/// Fraction of nodes that act as persistent hotspots in synthetic data.
const HOT_NODE_FRACTION: f64 = 0.2;
/// Share of the total crime intensity carried by hotspot nodes.
const HOT_INTENSITY_SHARE: f64 = 0.8;
/// Synthetic check-ins per user over the whole period.
const CHECKINS_PER_USER: u32 = 5;

/// Generates a reproducible scenario: crimes follow a Poisson process whose
/// intensity is concentrated on a fixed 20% subset of nodes, calls carry
/// priorities sampled uniformly over 1-5 with times inside the 8am-8pm
/// shift, and check-ins follow a popularity-skewed venue choice.
pub fn generate_synthetic(params: &SyntheticParams, seed: u64) -> Result<Scenario, IngestError> {
    if params.n_days == 0 {
        return Err(IngestError::EmptyDateRange);
    }
    let grid = build_grid(params.bbox, params.grid_rows, params.grid_cols)?;
    let n_nodes = grid.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Per-node crime intensity: hot nodes share HOT_INTENSITY_SHARE of the total.
    let n_hot = ((n_nodes as f64 * HOT_NODE_FRACTION).round() as usize).clamp(1, n_nodes);
    let hot_ids = rand::seq::index::sample(&mut rng, n_nodes, n_hot).into_vec();
    let total_per_slot = params.crime_rate_per_node_slot * n_nodes as f64;
    let mut intensity = vec![0.0f64; n_nodes];
    if n_hot < n_nodes {
        for v in intensity.iter_mut() {
            *v = total_per_slot * (1.0 - HOT_INTENSITY_SHARE) / (n_nodes - n_hot) as f64;
        }
    }
    for &h in &hot_ids {
        intensity[h] = total_per_slot * HOT_INTENSITY_SHARE / n_hot as f64;
    }

    let epoch = params.start_date.and_hms_opt(0, 0, 0).expect("midnight exists");
    let cell_pos = |rng: &mut ChaCha8Rng, node: usize, grid: &GridMap| {
        let r = node as u32 / grid.cols;
        let c = node as u32 % grid.cols;
        let d_lat = (grid.bbox.max_lat - grid.bbox.min_lat) / f64::from(grid.rows);
        let d_lon = (grid.bbox.max_lon - grid.bbox.min_lon) / f64::from(grid.cols);
        LatLon::new(
            grid.bbox.min_lat + (f64::from(r) + rng.random::<f64>().min(0.999_999)) * d_lat,
            grid.bbox.min_lon + (f64::from(c) + rng.random::<f64>().min(0.999_999)) * d_lon,
        )
    };

    let all_types: Vec<&str> = CALL_TYPE_TABLE.iter().flat_map(|t| t.iter().copied()).collect();
    let mut crimes = Vec::new();
    for day in 0..params.n_days {
        for slot in 0..12u32 {
            for node in 0..n_nodes {
                let lambda = intensity[node];
                if lambda <= 0.0 {
                    continue;
                }
                let count = Poisson::new(lambda).expect("positive rate").sample(&mut rng) as u64;
                for _ in 0..count {
                    let offset_s = rng.random_range(0..(SLOT_MINUTES * 60)) as i64;
                    let ts = epoch
                        + chrono::Duration::days(i64::from(day))
                        + chrono::Duration::minutes(i64::from(slot) * SLOT_MINUTES)
                        + chrono::Duration::seconds(offset_s);
                    crimes.push(CrimeRecord {
                        timestamp: ts,
                        pos: cell_pos(&mut rng, node, &grid),
                        offense_type: all_types[rng.random_range(0..all_types.len())].to_string(),
                    });
                }
            }
        }
    }

    let mut pois = Vec::with_capacity(params.n_venues as usize);
    for v in 0..params.n_venues {
        let node = rng.random_range(0..n_nodes);
        pois.push(PoiRecord {
            venue_id: format!("v{v:05}"),
            pos: cell_pos(&mut rng, node, &grid),
            category: POI_CATEGORIES[rng.random_range(0..POI_CATEGORIES.len())].to_string(),
        });
    }

    let mut checkins = Vec::new();
    if params.n_venues > 0 {
        let total_checkins = params.n_users * CHECKINS_PER_USER;
        for _ in 0..total_checkins {
            let user = rng.random_range(0..params.n_users.max(1));
            // Popularity-skewed venue choice: lower venue ids are more popular.
            let u: f64 = rng.random();
            let venue = ((u * u) * f64::from(params.n_venues)) as u32;
            let venue = venue.min(params.n_venues - 1);
            let day = rng.random_range(0..params.n_days);
            let second = rng.random_range(0..24 * 3600);
            let ts = epoch + chrono::Duration::days(i64::from(day)) + chrono::Duration::seconds(i64::from(second));
            checkins.push(CheckinRecord {
                timestamp: ts,
                pos: pois[venue as usize].pos,
                user_id: format!("u{user:05}"),
                venue_id: format!("v{venue:05}"),
            });
        }
    }

    let mut calls = Vec::new();
    if params.call_rate_per_day > 0.0 {
        for day in 0..params.n_days {
            let count = Poisson::new(params.call_rate_per_day).expect("positive rate").sample(&mut rng) as u64;
            for _ in 0..count {
                let priority = rng.random_range(1..=5u8);
                let types = CALL_TYPE_TABLE[usize::from(priority) - 1];
                let node = rng.random_range(0..n_nodes);
                // Call times land inside the 8am-8pm shift.
                let second = rng.random_range(8 * 3600..20 * 3600);
                let ts = epoch + chrono::Duration::days(i64::from(day)) + chrono::Duration::seconds(i64::from(second));
                calls.push(CallRecord {
                    timestamp: ts,
                    pos: cell_pos(&mut rng, node, &grid),
                    call_type: types[rng.random_range(0..types.len())].to_string(),
                });
            }
        }
    }

    Scenario::new(grid, crimes, checkins, pois, calls, params.start_date, params.n_days)
}

/// Nodes that carry the concentrated crime intensity for a given seed;
/// the ground truth behind [`generate_synthetic`].
pub fn synthetic_hot_nodes(params: &SyntheticParams, seed: u64) -> Vec<NodeId> {
    let n_nodes = (params.grid_rows * params.grid_cols) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_hot = ((n_nodes as f64 * HOT_NODE_FRACTION).round() as usize).clamp(1, n_nodes);
    let mut ids: Vec<NodeId> = rand::seq::index::sample(&mut rng, n_nodes, n_hot)
        .into_iter()
        .map(|i| NodeId(i as u32))
        .collect();
    ids.sort();
    ids
}
