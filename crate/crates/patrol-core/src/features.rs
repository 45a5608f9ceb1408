//! Per-(node, 2-hour slot) predictor features: historical crime densities,
//! POI composition, and check-in mobility statistics, plus the 50/50
//! undersampling used to balance training labels.
//!
//! The flattened feature vector is ordered as: `h1`, `h2`, one POI
//! distribution share per category (categories sorted alphabetically),
//! `poi_density`, `location_diversity`, `visitor_entropy`,
//! `visitor_homogeneity`, `region_popularity`, `visitor_ratio`,
//! `user_count`, `observation_frequency`.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{NodeId, TimeInterval, SLOTS_PER_DAY};
use crate::ingest::{bin, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot balance: no rows with a crime label")]
    NoCrimeRows,
    #[error("cannot balance: no rows with a no-crime label")]
    NoNoCrimeRows,
}

/// Feature vector and label of one (node, interval) instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub node: NodeId,
    pub interval: TimeInterval,
    /// Crimes per day in this node and slot over the previous 30 days.
    pub h1: f64,
    /// Crimes per day in this node and slot over the previous 7 days.
    pub h2: f64,
    /// Share of venues per category; all zero when the node has no venues.
    pub poi_distribution: Vec<f64>,
    /// Venues per square kilometer.
    pub poi_density: f64,
    /// Entropy (base 2) of the category distribution.
    pub location_diversity: f64,
    /// Entropy (base 2) of per-user check-in shares in this node and slot.
    pub visitor_entropy: f64,
    /// Mean pairwise cosine similarity of user venue-count vectors.
    pub visitor_homogeneity: f64,
    /// This node's share of all check-ins in the slot.
    pub region_popularity: f64,
    /// First-time visitors over check-ins.
    pub visitor_ratio: f64,
    pub user_count: f64,
    pub observation_frequency: f64,
    /// True when at least one crime occurred in this node and interval.
    pub label_crime: bool,
}

impl FeatureRow {
    /// Flattens the row into the documented feature order.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(10 + self.poi_distribution.len());
        v.push(self.h1);
        v.push(self.h2);
        v.extend_from_slice(&self.poi_distribution);
        v.push(self.poi_density);
        v.push(self.location_diversity);
        v.push(self.visitor_entropy);
        v.push(self.visitor_homogeneity);
        v.push(self.region_popularity);
        v.push(self.visitor_ratio);
        v.push(self.user_count);
        v.push(self.observation_frequency);
        v
    }

    /// Column names matching [`FeatureRow::to_vector`].
    pub fn column_names(categories: &[String]) -> Vec<String> {
        let mut names = vec!["h1".to_string(), "h2".to_string()];
        names.extend(categories.iter().map(|c| format!("poi_{c}")));
        names.extend(
            [
                "poi_density",
                "location_diversity",
                "visitor_entropy",
                "visitor_homogeneity",
                "region_popularity",
                "visitor_ratio",
                "user_count",
                "observation_frequency",
            ]
            .map(String::from),
        );
        names
    }
}

/// Crime counts indexed by (node, day, slot), the shared substrate for the
/// historical densities and the importance weights of the reward function.
#[derive(Debug, Clone)]
pub struct CrimeIndex {
    n_nodes: usize,
    n_days: usize,
    counts: Vec<u32>,
}

impl CrimeIndex {
    pub fn build(scenario: &Scenario) -> Self {
        let n_nodes = scenario.grid.n_nodes();
        let n_days = scenario.n_days as usize;
        let mut counts = vec![0u32; n_nodes * n_days * usize::from(SLOTS_PER_DAY)];
        for crime in &scenario.crimes {
            let Some(day) = scenario.day_of(crime.timestamp) else { continue };
            let Some(node) = bin(crime.pos, &scenario.grid) else { continue };
            let slot = scenario.slot_of(crime.timestamp);
            counts[Self::offset(n_nodes, node.0 as usize, day as usize, slot)] += 1;
        }
        Self { n_nodes, n_days, counts }
    }

    fn offset(n_nodes: usize, node: usize, day: usize, slot: u8) -> usize {
        (day * usize::from(SLOTS_PER_DAY) + usize::from(slot)) * n_nodes + node
    }

    /// Crimes in `node` during `slot` on `day`; days outside the scenario
    /// count as zero.
    pub fn count(&self, node: NodeId, day: i64, slot: u8) -> u32 {
        if day < 0 || day >= self.n_days as i64 {
            return 0;
        }
        self.counts[Self::offset(self.n_nodes, node.0 as usize, day as usize, slot)]
    }

    /// Mean crimes per day in `node` during `slot` over the `window_days`
    /// days before `day` (the prediction day itself is excluded).
    pub fn density(&self, node: NodeId, day: u32, slot: u8, window_days: u32) -> f64 {
        let day = i64::from(day);
        let window = i64::from(window_days);
        let total: u32 = (day - window..day).map(|d| self.count(node, d, slot)).sum();
        f64::from(total) / window_days as f64
    }
}

/// Mean crimes/day in the same slot over the `window_days` prior days.
pub fn historical_density(index: &CrimeIndex, node: NodeId, day: u32, slot: u8, window_days: u32) -> f64 {
    index.density(node, day, slot, window_days)
}

/// Static POI features of every node: distribution over the category
/// universe, density per km^2, and category entropy.
#[derive(Debug, Clone)]
pub struct PoiFeatures {
    /// Category universe, sorted alphabetically; fixed scenario-wide.
    pub categories: Vec<String>,
    /// Per node: (distribution vector, density, diversity).
    pub per_node: Vec<(Vec<f64>, f64, f64)>,
}

pub fn poi_features(scenario: &Scenario) -> PoiFeatures {
    let mut categories: Vec<String> = scenario.pois.iter().map(|p| p.category.clone()).collect();
    categories.sort();
    categories.dedup();
    let cat_idx: HashMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let n_nodes = scenario.grid.n_nodes();
    let mut venue_counts = vec![vec![0usize; categories.len()]; n_nodes];
    for poi in &scenario.pois {
        if let Some(node) = bin(poi.pos, &scenario.grid) {
            venue_counts[node.0 as usize][cat_idx[poi.category.as_str()]] += 1;
        }
    }

    let area_km2 = scenario.grid.cell_area_m2 / 1e6;
    let per_node = venue_counts
        .into_iter()
        .map(|counts| {
            let total: usize = counts.iter().sum();
            if total == 0 {
                return (vec![0.0; categories.len()], 0.0, 0.0);
            }
            let distribution: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
            let density = total as f64 / area_km2;
            let diversity = -distribution.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>();
            (distribution, density, diversity)
        })
        .collect();

    PoiFeatures { categories, per_node }
}

/// Mobility statistics of one (node, interval): `(visitor_entropy,
/// visitor_homogeneity, region_popularity, visitor_ratio, user_count,
/// observation_frequency)`.
pub type MobilityTuple = (f64, f64, f64, f64, f64, f64);

/// Check-ins indexed for per-(node, interval) mobility features.
#[derive(Debug, Clone)]
pub struct CheckinIndex {
    /// (node, interval) -> user -> venue -> check-in count.
    per_cell: HashMap<(NodeId, TimeInterval), HashMap<String, HashMap<String, u32>>>,
    /// Total check-ins per interval over all nodes.
    per_interval: HashMap<TimeInterval, u32>,
    /// (node, user) -> minute of that user's first check-in in the node.
    first_visit: HashMap<(NodeId, String), f64>,
}

impl CheckinIndex {
    pub fn build(scenario: &Scenario) -> Self {
        let mut per_cell: HashMap<(NodeId, TimeInterval), HashMap<String, HashMap<String, u32>>> = HashMap::new();
        let mut per_interval: HashMap<TimeInterval, u32> = HashMap::new();
        let mut first_visit: HashMap<(NodeId, String), f64> = HashMap::new();
        for checkin in &scenario.checkins {
            let Some(day) = scenario.day_of(checkin.timestamp) else { continue };
            let Some(node) = bin(checkin.pos, &scenario.grid) else { continue };
            let interval = TimeInterval::new(day, scenario.slot_of(checkin.timestamp));
            let minute = scenario.minute_of(checkin.timestamp);
            *per_cell
                .entry((node, interval))
                .or_default()
                .entry(checkin.user_id.clone())
                .or_default()
                .entry(checkin.venue_id.clone())
                .or_insert(0) += 1;
            *per_interval.entry(interval).or_insert(0) += 1;
            first_visit
                .entry((node, checkin.user_id.clone()))
                .and_modify(|m| *m = m.min(minute))
                .or_insert(minute);
        }
        Self { per_cell, per_interval, first_visit }
    }

    pub fn mobility(&self, node: NodeId, interval: TimeInterval) -> MobilityTuple {
        let Some(users) = self.per_cell.get(&(node, interval)) else {
            return (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        };
        let checkin_count: u32 = users.values().map(|v| v.values().sum::<u32>()).sum();
        let user_count = users.len();
        let total = f64::from(checkin_count);

        // Visitor entropy over per-user shares of the node-slot check-ins.
        let entropy = -users
            .values()
            .map(|venues| f64::from(venues.values().sum::<u32>()) / total)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.log2())
            .sum::<f64>();

        // Homogeneity: mean cosine similarity over unordered user pairs,
        // each user as a venue-count vector; 1.0 by convention for a single user.
        let homogeneity = if user_count <= 1 {
            1.0
        } else {
            let vectors: Vec<&HashMap<String, u32>> = {
                let mut sorted: Vec<_> = users.iter().collect();
                sorted.sort_by(|a, b| a.0.cmp(b.0));
                sorted.into_iter().map(|(_, v)| v).collect()
            };
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..vectors.len() {
                for j in i + 1..vectors.len() {
                    sum += cosine_similarity(vectors[i], vectors[j]);
                    pairs += 1;
                }
            }
            sum / pairs as f64
        };

        let slot_total = f64::from(*self.per_interval.get(&interval).unwrap_or(&0));
        let popularity = if slot_total > 0.0 { total / slot_total } else { 0.0 };

        let slot_start = interval.start_minute() as f64;
        let new_users = users
            .keys()
            .filter(|u| self.first_visit.get(&(node, (*u).clone())).is_some_and(|&m| m >= slot_start))
            .count();
        let visitor_ratio = new_users as f64 / total;

        (entropy, homogeneity, popularity, visitor_ratio, user_count as f64, total)
    }
}

fn cosine_similarity(a: &HashMap<String, u32>, b: &HashMap<String, u32>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(venue, &ca)| b.get(venue).map(|&cb| f64::from(ca) * f64::from(cb)))
        .sum();
    let norm = |m: &HashMap<String, u32>| m.values().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>().sqrt();
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// Computes feature rows for every (node, day, slot) with `day` in
/// `[from_day, to_day)`.
pub fn compute_rows(scenario: &Scenario, from_day: u32, to_day: u32) -> Vec<FeatureRow> {
    let crime_index = CrimeIndex::build(scenario);
    let poi = poi_features(scenario);
    let checkins = CheckinIndex::build(scenario);
    let n_nodes = scenario.grid.n_nodes();

    let mut rows = Vec::new();
    for day in from_day..to_day {
        for slot in 0..SLOTS_PER_DAY {
            for node_idx in 0..n_nodes {
                let node = NodeId(node_idx as u32);
                let interval = TimeInterval::new(day, slot);
                let (distribution, density, diversity) = poi.per_node[node_idx].clone();
                let (entropy, homogeneity, popularity, visitor_ratio, user_count, freq) =
                    checkins.mobility(node, interval);
                rows.push(FeatureRow {
                    node,
                    interval,
                    h1: crime_index.density(node, day, slot, 30),
                    h2: crime_index.density(node, day, slot, 7),
                    poi_distribution: distribution,
                    poi_density: density,
                    location_diversity: diversity,
                    visitor_entropy: entropy,
                    visitor_homogeneity: homogeneity,
                    region_popularity: popularity,
                    visitor_ratio,
                    user_count,
                    observation_frequency: freq,
                    label_crime: crime_index.count(node, i64::from(day), slot) > 0,
                });
            }
        }
    }
    rows
}

/// Balances rows to an exact 50/50 label split by uniformly subsampling the
/// majority class without replacement; deterministic per seed. Original row
/// order is preserved.
pub fn undersample(rows: &[FeatureRow], seed: u64) -> Result<Vec<FeatureRow>, FeatureError> {
    let crime: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| r.label_crime).map(|(i, _)| i).collect();
    let no_crime: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| !r.label_crime).map(|(i, _)| i).collect();
    if crime.is_empty() {
        return Err(FeatureError::NoCrimeRows);
    }
    if no_crime.is_empty() {
        return Err(FeatureError::NoNoCrimeRows);
    }
    let (minority, majority) = if crime.len() <= no_crime.len() { (crime, no_crime) } else { (no_crime, crime) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, majority.len(), minority.len()).into_vec();
    chosen.sort_unstable();
    let mut keep: Vec<usize> = minority;
    keep.extend(chosen.into_iter().map(|i| majority[i]));
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| rows[i].clone()).collect())
}
