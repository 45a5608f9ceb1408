//! Hotspot prediction: a seeded random forest over [`FeatureRow`]s
//! (bootstrap sampling, per-split random feature subsets, Gini splits) and
//! the resulting per-(node, slot) hotspot map. A density-threshold baseline
//! predictor is provided so route optimization can be tested without any
//! learning in the loop.

use std::collections::HashMap;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{NodeId, NodeState, TimeInterval};
use crate::exec;
use crate::features::{CrimeIndex, FeatureRow};

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature vector arity mismatch: model expects {expected}, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("cannot read or write model: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
}

/// Forest hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means `ceil(sqrt(d))`.
    pub feature_subset_size: Option<usize>,
    /// Train each tree on a bootstrap resample; disable to fit on the full set.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 12, min_leaf: 2, feature_subset_size: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
enum TreeNode {
    Leaf { crime: bool },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// One axis-aligned binary decision tree.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> bool {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { crime } => return *crime,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// (feature, threshold) of the root split, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first() {
            Some(TreeNode::Split { feature, threshold, .. }) => Some((*feature, *threshold)),
            _ => None,
        }
    }
}

/// A trained random forest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeEnsemble {
    format_version: u32,
    pub n_features: usize,
    pub params: ForestParams,
    pub seed: u64,
    trees: Vec<DecisionTree>,
}

/// Confusion-matrix metrics with "crime" as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Hotspot/coldspot labels per (node, interval). Intervals absent from the
/// map are coldspots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HotspotMap {
    hot: std::collections::HashSet<(NodeId, TimeInterval)>,
}

impl HotspotMap {
    pub fn mark_hot(&mut self, node: NodeId, interval: TimeInterval) {
        self.hot.insert((node, interval));
    }

    pub fn state_of(&self, node: NodeId, interval: TimeInterval) -> NodeState {
        if self.hot.contains(&(node, interval)) {
            NodeState::Hotspot
        } else {
            NodeState::Coldspot
        }
    }

    pub fn hot_count(&self) -> usize {
        self.hot.len()
    }

    /// Writes `day,slot,node_id,state` rows for hotspot entries.
    pub fn write_csv(&self, path: &Path) -> Result<(), std::io::Error> {
        use std::io::Write;
        let mut entries: Vec<_> = self.hot.iter().collect();
        entries.sort_by_key(|(n, i)| (i.day, i.slot, n.0));
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "day,slot,node_id,state")?;
        for (node, interval) in entries {
            writeln!(out, "{},{},{},hotspot", interval.day, interval.slot, node.0)?;
        }
        out.flush()
    }

    /// Reads a map written by [`HotspotMap::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(path)?;
        let mut map = Self::default();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad hotspot row: {line}"));
            if parts.len() != 4 {
                return Err(bad());
            }
            let day: u32 = parts[0].parse().map_err(|_| bad())?;
            let slot: u8 = parts[1].parse().map_err(|_| bad())?;
            let node: u32 = parts[2].parse().map_err(|_| bad())?;
            if parts[3] == "hotspot" {
                map.mark_hot(NodeId(node), TimeInterval::new(day, slot));
            }
        }
        Ok(map)
    }
}

/// Baseline predictor: a node-slot is a hotspot iff its 7-day crime density
/// is positive.
pub fn density_baseline(index: &CrimeIndex, n_nodes: usize, from_day: u32, to_day: u32) -> HotspotMap {
    let mut map = HotspotMap::default();
    for day in from_day..to_day {
        for slot in 0..crate::domain::SLOTS_PER_DAY {
            for node in 0..n_nodes {
                let id = NodeId(node as u32);
                if index.density(id, day, slot, 7) > 0.0 {
                    map.mark_hot(id, TimeInterval::new(day, slot));
                }
            }
        }
    }
    map
}

struct TrainingSet {
    vectors: Vec<Vec<f64>>,
    labels: Vec<bool>,
    n_features: usize,
}

fn training_set(rows: &[FeatureRow]) -> Result<TrainingSet, PredictError> {
    if rows.is_empty() {
        return Err(PredictError::EmptyTrainingSet);
    }
    // Canonical row order keyed by (interval, node) so training does not
    // depend on the order rows arrive in.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].interval, rows[i].node));
    let vectors: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].to_vector()).collect();
    let labels: Vec<bool> = order.iter().map(|&i| rows[i].label_crime).collect();
    let n_features = vectors[0].len();
    Ok(TrainingSet { vectors, labels, n_features })
}

/// Trains a forest on balanced rows; deterministic per seed and invariant
/// to input row order.
pub fn train(rows: &[FeatureRow], params: &ForestParams, seed: u64) -> Result<TreeEnsemble, PredictError> {
    let set = training_set(rows)?;
    let subset = params.feature_subset_size.unwrap_or((set.n_features as f64).sqrt().ceil() as usize);
    let subset = subset.clamp(1, set.n_features);
    let trees = exec::map_indices(params.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        grow_tree(&set, params, subset, &mut rng)
    });
    Ok(TreeEnsemble { format_version: MODEL_FORMAT_VERSION, n_features: set.n_features, params: params.clone(), seed, trees })
}

fn grow_tree(set: &TrainingSet, params: &ForestParams, subset: usize, rng: &mut ChaCha8Rng) -> DecisionTree {
    let n = set.vectors.len();
    let indices: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut nodes = Vec::new();
    split_node(set, params, subset, indices, 0, &mut nodes, rng);
    DecisionTree { nodes }
}

fn majority(set: &TrainingSet, indices: &[usize]) -> bool {
    let crimes = indices.iter().filter(|&&i| set.labels[i]).count();
    // Ties resolve to the no-crime class.
    crimes * 2 > indices.len()
}

fn split_node(
    set: &TrainingSet,
    params: &ForestParams,
    subset: usize,
    indices: Vec<usize>,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
    rng: &mut ChaCha8Rng,
) -> usize {
    let slot = nodes.len();
    nodes.push(TreeNode::Leaf { crime: false });

    let crimes = indices.iter().filter(|&&i| set.labels[i]).count();
    let pure = crimes == 0 || crimes == indices.len();
    if depth >= params.max_depth || indices.len() < 2 * params.min_leaf || pure {
        nodes[slot] = TreeNode::Leaf { crime: majority(set, &indices) };
        return slot;
    }

    let mut features = rand::seq::index::sample(rng, set.n_features, subset).into_vec();
    features.sort_unstable();
    let best = features
        .iter()
        .filter_map(|&f| best_threshold(set, &indices, f, params.min_leaf).map(|(g, t)| (g, f, t)))
        .min_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.partial_cmp(&b.2).unwrap())
        });

    let Some((_, feature, threshold)) = best else {
        nodes[slot] = TreeNode::Leaf { crime: majority(set, &indices) };
        return slot;
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        indices.into_iter().partition(|&i| set.vectors[i][feature] <= threshold);
    let left = split_node(set, params, subset, left_idx, depth + 1, nodes, rng);
    let right = split_node(set, params, subset, right_idx, depth + 1, nodes, rng);
    nodes[slot] = TreeNode::Split { feature, threshold, left, right };
    slot
}

/// Best threshold for one feature by weighted Gini impurity; `None` when no
/// split leaves `min_leaf` rows on both sides.
fn best_threshold(set: &TrainingSet, indices: &[usize], feature: usize, min_leaf: usize) -> Option<(f64, f64)> {
    let mut pairs: Vec<(f64, bool)> = indices.iter().map(|&i| (set.vectors[i][feature], set.labels[i])).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = pairs.len();
    let total_crimes = pairs.iter().filter(|p| p.1).count();

    let gini = |crimes: usize, count: usize| -> f64 {
        if count == 0 {
            return 0.0;
        }
        let p = crimes as f64 / count as f64;
        2.0 * p * (1.0 - p)
    };

    let mut best: Option<(f64, f64)> = None;
    let mut left_crimes = 0usize;
    for i in 0..n - 1 {
        left_crimes += usize::from(pairs[i].1);
        let left_n = i + 1;
        if pairs[i].0 == pairs[i + 1].0 {
            continue;
        }
        if left_n < min_leaf || n - left_n < min_leaf {
            continue;
        }
        let threshold = 0.5 * (pairs[i].0 + pairs[i + 1].0);
        let weighted = (left_n as f64 * gini(left_crimes, left_n)
            + (n - left_n) as f64 * gini(total_crimes - left_crimes, n - left_n))
            / n as f64;
        if best.is_none_or(|(g, t)| weighted < g || (weighted == g && threshold < t)) {
            best = Some((weighted, threshold));
        }
    }
    best
}

impl TreeEnsemble {
    /// Fraction of trees voting "crime" for the feature vector.
    pub fn vote_fraction(&self, x: &[f64]) -> Result<f64, PredictError> {
        if x.len() != self.n_features {
            return Err(PredictError::ArityMismatch { expected: self.n_features, found: x.len() });
        }
        let crimes = self.trees.iter().filter(|t| t.predict(x)).count();
        Ok(crimes as f64 / self.trees.len() as f64)
    }

    pub fn predict(&self, x: &[f64], vote_threshold: f64) -> Result<bool, PredictError> {
        Ok(self.vote_fraction(x)? >= vote_threshold)
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn save(&self, path: &Path) -> Result<(), PredictError> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PredictError> {
        let text = std::fs::read_to_string(path)?;
        let model: Self = serde_json::from_str(&text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(PredictError::UnsupportedVersion(model.format_version));
        }
        Ok(model)
    }
}

/// Labels every row's (node, interval) Hotspot iff the forest vote fraction
/// reaches `vote_threshold`.
pub fn predict_hotspots(
    model: &TreeEnsemble,
    rows: &[FeatureRow],
    vote_threshold: f64,
) -> Result<HotspotMap, PredictError> {
    let fractions: Vec<Result<f64, PredictError>> =
        exec::map_slice(rows, |row| model.vote_fraction(&row.to_vector()));
    let mut map = HotspotMap::default();
    for (row, fraction) in rows.iter().zip(fractions) {
        if fraction? >= vote_threshold {
            map.mark_hot(row.node, row.interval);
        }
    }
    Ok(map)
}

/// Confusion-matrix metrics of the model on held-out rows.
pub fn evaluate(model: &TreeEnsemble, rows: &[FeatureRow], vote_threshold: f64) -> Result<PredictionMetrics, PredictError> {
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for row in rows {
        let predicted = model.predict(&row.to_vector(), vote_threshold)?;
        match (predicted, row.label_crime) {
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
    Ok(PredictionMetrics { accuracy: ratio(tp + tn, rows.len()), precision, recall, f1 })
}

/// Groups feature rows by interval for convenience in reporting.
pub fn rows_by_interval(rows: &[FeatureRow]) -> HashMap<TimeInterval, Vec<&FeatureRow>> {
    let mut map: HashMap<TimeInterval, Vec<&FeatureRow>> = HashMap::new();
    for row in rows {
        map.entry(row.interval).or_default().push(row);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(node: u32, day: u32, x: f64, label: bool) -> FeatureRow {
        FeatureRow {
            node: NodeId(node),
            interval: TimeInterval::new(day, 0),
            h1: x,
            h2: 0.0,
            poi_distribution: vec![],
            poi_density: 0.0,
            location_diversity: 0.0,
            visitor_entropy: 0.0,
            visitor_homogeneity: 0.0,
            region_popularity: 0.0,
            visitor_ratio: 0.0,
            user_count: 0.0,
            observation_frequency: 0.0,
            label_crime: label,
        }
    }

    fn separable_rows() -> Vec<FeatureRow> {
        let mut rows = Vec::new();
        for i in 0..40 {
            rows.push(row(i, 0, 0.1 * f64::from(i % 5), false));
            rows.push(row(i, 1, 5.0 + 0.1 * f64::from(i % 5), true));
        }
        rows
    }

    #[test]
    fn separable_data_trains_to_perfect_accuracy() {
        let rows = separable_rows();
        let model = train(&rows, &ForestParams::default(), 9).unwrap();
        let metrics = evaluate(&model, &rows, 0.5).unwrap();
        assert_eq!(metrics.accuracy, 1.0);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let rows = separable_rows();
        let a = train(&rows, &ForestParams::default(), 4).unwrap();
        let b = train(&rows, &ForestParams::default(), 4).unwrap();
        for x in [0.0, 1.0, 2.5, 4.9, 6.0] {
            let probe = row(0, 0, x, false).to_vector();
            assert_eq!(a.vote_fraction(&probe).unwrap(), b.vote_fraction(&probe).unwrap());
        }
    }

    #[test]
    fn training_is_invariant_to_row_order() {
        let rows = separable_rows();
        let mut reversed = rows.clone();
        reversed.reverse();
        let a = train(&rows, &ForestParams::default(), 4).unwrap();
        let b = train(&reversed, &ForestParams::default(), 4).unwrap();
        for x in [0.0, 1.0, 2.5, 4.9, 6.0] {
            let probe = row(0, 0, x, false).to_vector();
            assert_eq!(a.vote_fraction(&probe).unwrap(), b.vote_fraction(&probe).unwrap());
        }
    }

    #[test]
    fn stump_matches_hand_computed_gini_split() {
        // Four points on feature 0 (h1): 1, 2 -> no-crime; 3, 4 -> crime.
        // Candidate thresholds 1.5, 2.5, 3.5; 2.5 is the only pure split.
        let rows = vec![
            row(0, 0, 1.0, false),
            row(1, 0, 2.0, false),
            row(2, 0, 3.0, true),
            row(3, 0, 4.0, true),
        ];
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            min_leaf: 1,
            feature_subset_size: Some(10),
            bootstrap: false,
        };
        let model = train(&rows, &params, 0).unwrap();
        assert_eq!(model.trees()[0].root_split(), Some((0, 2.5)));
        assert!(!model.trees()[0].predict(&row(0, 0, 2.4, false).to_vector()));
        assert!(model.trees()[0].predict(&row(0, 0, 2.6, false).to_vector()));
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(matches!(train(&[], &ForestParams::default(), 0), Err(PredictError::EmptyTrainingSet)));
    }

    #[test]
    fn vote_threshold_extremes() {
        let rows = separable_rows();
        let model = train(&rows, &ForestParams::default(), 3).unwrap();
        let map_all = predict_hotspots(&model, &rows, 0.0).unwrap();
        assert_eq!(map_all.hot_count(), rows.len());
        let map_none = predict_hotspots(&model, &rows, 1.0 + f64::EPSILON).unwrap();
        assert_eq!(map_none.hot_count(), 0);
    }

    #[test]
    fn single_tree_majority_equals_tree() {
        let rows = separable_rows();
        let params = ForestParams { n_trees: 1, ..ForestParams::default() };
        let model = train(&rows, &params, 5).unwrap();
        for r in &rows {
            let x = r.to_vector();
            assert_eq!(model.predict(&x, 0.5).unwrap(), model.trees()[0].predict(&x));
        }
    }

    #[test]
    fn duplicated_trees_keep_vote_fractions() {
        let rows = separable_rows();
        let params = ForestParams { n_trees: 7, ..ForestParams::default() };
        let model = train(&rows, &params, 5).unwrap();
        let mut doubled = model.clone();
        doubled.trees = model.trees.iter().cloned().chain(model.trees.iter().cloned()).collect();
        for r in rows.iter().take(10) {
            let x = r.to_vector();
            assert_eq!(model.vote_fraction(&x).unwrap(), doubled.vote_fraction(&x).unwrap());
        }
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let rows = separable_rows();
        let model = train(&rows, &ForestParams::default(), 1).unwrap();
        assert!(matches!(
            model.vote_fraction(&[1.0, 2.0]),
            Err(PredictError::ArityMismatch { expected: 10, found: 2 })
        ));
    }

    #[test]
    fn evaluate_hand_computed_confusion() {
        // Model that always votes crime: train on all-crime-like separable set
        // then evaluate against a fixture with known confusion counts.
        let rows = separable_rows();
        let model = train(&rows, &ForestParams::default(), 2).unwrap();
        // 10-row fixture: 6 high-feature rows (predicted crime), 4 low
        // (predicted no-crime). Labels chosen so tp=4, fp=2, fn=1, tn=3.
        let fixture = vec![
            row(0, 0, 6.0, true),
            row(1, 0, 6.0, true),
            row(2, 0, 6.0, true),
            row(3, 0, 6.0, true),
            row(4, 0, 6.0, false),
            row(5, 0, 6.0, false),
            row(6, 0, 0.0, true),
            row(7, 0, 0.0, false),
            row(8, 0, 0.0, false),
            row(9, 0, 0.0, false),
        ];
        let m = evaluate(&model, &fixture, 0.5).unwrap();
        assert_eq!(m.accuracy, 0.7);
        assert_eq!(m.precision, 4.0 / 6.0);
        assert_eq!(m.recall, 4.0 / 5.0);
        let expected_f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert_eq!(m.f1, expected_f1);
    }

    #[test]
    fn all_no_crime_predictions_have_zero_recall() {
        let rows = separable_rows();
        let model = train(&rows, &ForestParams::default(), 2).unwrap();
        let all_crime: Vec<FeatureRow> = (0..10).map(|i| row(i, 0, 0.0, true)).collect();
        let m = evaluate(&model, &all_crime, 0.5).unwrap();
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.accuracy, 0.0);
    }

    #[test]
    fn model_round_trips_through_json() {
        let rows = separable_rows();
        let model = train(&rows, &ForestParams { n_trees: 5, ..ForestParams::default() }, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = TreeEnsemble::load(&path).unwrap();
        assert_eq!(model.trees, loaded.trees);
        assert_eq!(model.n_features, loaded.n_features);
    }

    #[test]
    fn hotspot_map_round_trips_through_csv() {
        let mut map = HotspotMap::default();
        map.mark_hot(NodeId(3), TimeInterval::new(2, 5));
        map.mark_hot(NodeId(0), TimeInterval::new(0, 0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hotspots.csv");
        map.write_csv(&path).unwrap();
        let loaded = HotspotMap::read_csv(&path).unwrap();
        assert_eq!(map, loaded);
        assert_eq!(loaded.state_of(NodeId(3), TimeInterval::new(2, 5)), NodeState::Hotspot);
        assert_eq!(loaded.state_of(NodeId(3), TimeInterval::new(2, 6)), NodeState::Coldspot);
    }
}
