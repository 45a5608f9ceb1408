//! Keyed link-list encoding of multi-officer plans.
//!
//! Every officer and every assignable node carries a random key; sorting all
//! entries by key descending and reading officer entries as sub-tour heads
//! turns one key vector into one multi-officer plan. Plain LERK draws every
//! key uniformly from (0, 1]. The guided variant G-LERK confines hotspot and
//! emergency nodes to (0.5, 1] and coldspot nodes to (0, 0.5], and re-draws
//! each officer's key above its allotted hotspot segment, so every officer
//! whose tour gets any hotspot starts with one.
//!
//! Chromosomes are immutable; every operation returns a new value.

use std::collections::HashMap;

use rand::Rng;
use thiserror::Error;

use crate::domain::{travel_time_min, GridMap, LatLon, NodeId, NodeState, OfficerId, Speed};

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("a plan needs at least one officer")]
    NoOfficers,
    #[error("crossover parents cover different officer or node sets")]
    MismatchedEntities,
    #[error("chromosome refers to node {0} absent from the plan context")]
    UnknownNode(NodeId),
    #[error("chromosome refers to officer {0} absent from the plan context")]
    UnknownOfficer(OfficerId),
}

/// How keys are drawn and constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyDiscipline {
    /// LERK: every key lives in (0, 1] regardless of node state.
    Uniform,
    /// G-LERK: hotspot/emergency keys in (0.5, 1], coldspot keys in (0, 0.5].
    Banded,
}

/// Entity referenced by one chromosome entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gene {
    Officer(OfficerId),
    Node { id: NodeId, state: NodeState },
}

impl Gene {
    fn tie_rank(&self) -> (u8, u32) {
        match self {
            Gene::Officer(id) => (0, id.0),
            Gene::Node { id, .. } => (1, id.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: f64,
    pub gene: Gene,
}

/// Key interval `(lo, hi]` admissible for a gene under a discipline.
pub fn key_band(discipline: KeyDiscipline, gene: &Gene) -> (f64, f64) {
    match (discipline, gene) {
        (KeyDiscipline::Uniform, _) => (0.0, 1.0),
        (KeyDiscipline::Banded, Gene::Officer(_)) => (0.0, 1.0),
        (KeyDiscipline::Banded, Gene::Node { state: NodeState::Coldspot, .. }) => (0.0, 0.5),
        (KeyDiscipline::Banded, Gene::Node { .. }) => (0.5, 1.0),
    }
}

fn sort_entries(entries: &mut [Entry]) {
    entries.sort_by(|a, b| {
        b.key
            .partial_cmp(&a.key)
            .expect("keys are finite")
            .then_with(|| a.gene.tie_rank().cmp(&b.gene.tie_rank()))
    });
}

/// Key uniform in the half-open interval `(lo, hi]`.
fn draw_key(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (1.0 - rng.random::<f64>())
}

/// One candidate multi-officer plan (a GA chromosome / CS nest).
#[derive(Debug, Clone, PartialEq)]
pub struct Chromosome {
    entries: Vec<Entry>,
    discipline: KeyDiscipline,
}

impl Chromosome {
    /// Builds a chromosome from raw entries, sorting them into key order.
    pub fn from_entries(mut entries: Vec<Entry>, discipline: KeyDiscipline) -> Result<Self, EncodeError> {
        if !entries.iter().any(|e| matches!(e.gene, Gene::Officer(_))) {
            return Err(EncodeError::NoOfficers);
        }
        sort_entries(&mut entries);
        Ok(Self { entries, discipline })
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn discipline(&self) -> KeyDiscipline {
        self.discipline
    }

    pub fn officer_ids(&self) -> Vec<OfficerId> {
        self.entries
            .iter()
            .filter_map(|e| match e.gene {
                Gene::Officer(id) => Some(id),
                _ => None,
            })
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.entries.iter().filter(|e| matches!(e.gene, Gene::Node { .. })).count()
    }

    /// Checks the structural invariants: sorted keys, unique entities, at
    /// least one officer, and every key inside its band.
    pub fn validate(&self) -> Result<(), String> {
        let mut officers = std::collections::HashSet::new();
        let mut nodes = std::collections::HashSet::new();
        let mut n_officers = 0usize;
        for w in self.entries.windows(2) {
            let ord = w[1]
                .key
                .partial_cmp(&w[0].key)
                .ok_or("non-finite key")?
                .then_with(|| w[0].gene.tie_rank().cmp(&w[1].gene.tie_rank()));
            if ord == std::cmp::Ordering::Greater {
                return Err(format!("entries out of order near key {}", w[0].key));
            }
        }
        for e in &self.entries {
            let (lo, hi) = key_band(self.discipline, &e.gene);
            if !(e.key > lo && e.key <= hi) {
                return Err(format!("key {} outside band ({lo}, {hi}] for {:?}", e.key, e.gene));
            }
            match e.gene {
                Gene::Officer(id) => {
                    n_officers += 1;
                    if !officers.insert(id) {
                        return Err(format!("duplicate officer {id}"));
                    }
                }
                Gene::Node { id, .. } => {
                    if !nodes.insert(id) {
                        return Err(format!("duplicate node {id}"));
                    }
                }
            }
        }
        if n_officers == 0 {
            return Err("no officers".into());
        }
        Ok(())
    }

    /// Walks entries in key order and splits nodes into per-officer
    /// sub-tours. Nodes keyed above every officer attach to the highest-key
    /// officer, ahead of its other nodes.
    pub fn decode_assignments(&self) -> Result<Vec<(OfficerId, Vec<(NodeId, NodeState)>)>, EncodeError> {
        let mut routes: Vec<(OfficerId, Vec<(NodeId, NodeState)>)> = Vec::new();
        let mut orphans: Vec<(NodeId, NodeState)> = Vec::new();
        for entry in &self.entries {
            match entry.gene {
                Gene::Officer(id) => routes.push((id, Vec::new())),
                Gene::Node { id, state } => match routes.last_mut() {
                    Some((_, tour)) => tour.push((id, state)),
                    None => orphans.push((id, state)),
                },
            }
        }
        if routes.is_empty() {
            return Err(EncodeError::NoOfficers);
        }
        if !orphans.is_empty() {
            let head = std::mem::take(&mut routes[0].1);
            orphans.extend(head);
            routes[0].1 = orphans;
        }
        Ok(routes)
    }

    /// Decodes into a route plan with projected arrival times.
    pub fn decode(&self, ctx: &PlanContext<'_>) -> Result<RoutePlan, EncodeError> {
        let assignments = self.decode_assignments()?;
        let ids: Vec<(OfficerId, Vec<NodeId>)> = assignments
            .into_iter()
            .map(|(officer, tour)| (officer, tour.into_iter().map(|(id, _)| id).collect()))
            .collect();
        RoutePlan::schedule(&ids, ctx)
    }

    /// Returns a copy with each node key remapped by `f` (officer keys are
    /// untouched) and entries re-sorted. `f` must respect the key bands.
    pub fn map_node_keys(&self, mut f: impl FnMut(&Entry) -> f64) -> Self {
        let mut entries = self.entries.clone();
        for e in entries.iter_mut() {
            if matches!(e.gene, Gene::Node { .. }) {
                e.key = f(e);
            }
        }
        sort_entries(&mut entries);
        Self { entries, discipline: self.discipline }
    }
}

/// LERK: independent keys uniform in (0, 1] for every officer and node.
pub fn encode_lerk(
    nodes: &[(NodeId, NodeState)],
    officers: &[OfficerId],
    rng: &mut impl Rng,
) -> Result<Chromosome, EncodeError> {
    if officers.is_empty() {
        return Err(EncodeError::NoOfficers);
    }
    let mut entries: Vec<Entry> = Vec::with_capacity(nodes.len() + officers.len());
    for &id in officers {
        entries.push(Entry { key: draw_key(rng, 0.0, 1.0), gene: Gene::Officer(id) });
    }
    for &(id, state) in nodes {
        entries.push(Entry { key: draw_key(rng, 0.0, 1.0), gene: Gene::Node { id, state } });
    }
    Chromosome::from_entries(entries, KeyDiscipline::Uniform)
}

/// G-LERK: banded keys with a uniform random node-to-officer allotment and
/// officer keys re-drawn above their allotted hotspot segment.
///
/// Draw order (mirrored by tests): one owner index per hotspot node, one key
/// per hotspot node, one owner index per coldspot node (only when no hotspot
/// exists), one key per coldspot node, then one key per officer, all in
/// input order.
pub fn encode_glerk(
    nodes: &[(NodeId, NodeState)],
    officers: &[OfficerId],
    rng: &mut impl Rng,
) -> Result<Chromosome, EncodeError> {
    if officers.is_empty() {
        return Err(EncodeError::NoOfficers);
    }
    let hot: Vec<(NodeId, NodeState)> =
        nodes.iter().copied().filter(|(_, s)| *s != NodeState::Coldspot).collect();
    let cold: Vec<(NodeId, NodeState)> =
        nodes.iter().copied().filter(|(_, s)| *s == NodeState::Coldspot).collect();
    let officers_in_hot_band = !hot.is_empty() || nodes.is_empty();

    let mut entries: Vec<Entry> = Vec::with_capacity(nodes.len() + officers.len());
    let mut segment_max: Vec<f64> = vec![f64::NEG_INFINITY; officers.len()];

    let mut hot_owners = Vec::with_capacity(hot.len());
    for _ in &hot {
        hot_owners.push(rng.random_range(0..officers.len()));
    }
    for (&(id, state), &owner) in hot.iter().zip(&hot_owners) {
        let key = draw_key(rng, 0.5, 1.0);
        segment_max[owner] = segment_max[owner].max(key);
        entries.push(Entry { key, gene: Gene::Node { id, state } });
    }

    let mut cold_owners = Vec::new();
    if !officers_in_hot_band {
        for _ in &cold {
            cold_owners.push(rng.random_range(0..officers.len()));
        }
    }
    for (i, &(id, state)) in cold.iter().enumerate() {
        let key = draw_key(rng, 0.0, 0.5);
        if let Some(&owner) = cold_owners.get(i) {
            segment_max[owner] = segment_max[owner].max(key);
        }
        entries.push(Entry { key, gene: Gene::Node { id, state } });
    }

    let (band_lo, band_hi) = if officers_in_hot_band { (0.5, 1.0) } else { (0.0, 0.5) };
    for (i, &id) in officers.iter().enumerate() {
        let lo = segment_max[i].max(band_lo);
        entries.push(Entry { key: draw_key(rng, lo, band_hi), gene: Gene::Officer(id) });
    }

    Chromosome::from_entries(entries, KeyDiscipline::Banded)
}

/// Uniform crossover: the child inherits every entity's key from either
/// parent with probability 1/2 (entities visited officers-first in id
/// order). Random-keys encodings are closed under this exchange, so the
/// child always decodes to a valid partition within the same key bands.
pub fn crossover(mom: &Chromosome, dad: &Chromosome, rng: &mut impl Rng) -> Result<Chromosome, EncodeError> {
    if mom.discipline != dad.discipline {
        return Err(EncodeError::MismatchedEntities);
    }
    let index = |c: &Chromosome| -> HashMap<(u8, u32), (f64, Gene)> {
        c.entries.iter().map(|e| (e.gene.tie_rank(), (e.key, e.gene))).collect()
    };
    let mom_keys = index(mom);
    let dad_keys = index(dad);
    if mom_keys.len() != dad_keys.len() || mom.entries.len() != dad.entries.len() {
        return Err(EncodeError::MismatchedEntities);
    }
    let mut ranks: Vec<(u8, u32)> = mom_keys.keys().copied().collect();
    ranks.sort_unstable();
    let mut entries = Vec::with_capacity(ranks.len());
    for rank in ranks {
        let &(mom_key, gene) = mom_keys.get(&rank).expect("rank from mom");
        let Some(&(dad_key, dad_gene)) = dad_keys.get(&rank) else {
            return Err(EncodeError::MismatchedEntities);
        };
        if gene != dad_gene {
            return Err(EncodeError::MismatchedEntities);
        }
        let key = if rng.random::<bool>() { mom_key } else { dad_key };
        entries.push(Entry { key, gene });
    }
    Chromosome::from_entries(entries, mom.discipline)
}

/// Benefit-greedy local optimization. With probability `probability`, the
/// highest-benefit node of each sub-tour moves to the tour front; keys of
/// the affected segment are re-spaced inside the gap they already occupy,
/// so every other entry keeps its position and band.
///
/// Under banded keys a coldspot can never outrank a hotspot, so a coldspot
/// maximum moves to the front of the coldspot segment instead.
pub fn local_optimize(
    chromosome: &Chromosome,
    benefit_of: impl Fn(NodeId) -> f64,
    probability: f64,
    rng: &mut impl Rng,
) -> Chromosome {
    if !(rng.random::<f64>() < probability) {
        return chromosome.clone();
    }
    let mut entries = chromosome.entries.clone();
    normalize_orphans(&mut entries, chromosome.discipline);

    let officer_positions: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| matches!(e.gene, Gene::Officer(_)).then_some(i))
        .collect();

    for (w, &pos) in officer_positions.iter().enumerate() {
        let start = pos + 1;
        let end = officer_positions.get(w + 1).copied().unwrap_or(entries.len());
        if start >= end {
            continue;
        }
        // Highest-benefit node of this sub-tour; first occurrence wins ties.
        let best = (start..end)
            .max_by(|&a, &b| {
                let ba = node_benefit(&entries[a], &benefit_of);
                let bb = node_benefit(&entries[b], &benefit_of);
                ba.partial_cmp(&bb).expect("finite benefit").then(b.cmp(&a))
            })
            .expect("non-empty tour");
        let (lo_band, hi_band) = key_band(chromosome.discipline, &entries[best].gene);
        // Contiguous run of same-band entries containing `best`.
        let run_start = (start..=best)
            .rev()
            .take_while(|&i| key_band(chromosome.discipline, &entries[i].gene) == (lo_band, hi_band))
            .last()
            .expect("run contains best");
        let run_end = (best..end)
            .take_while(|&i| key_band(chromosome.discipline, &entries[i].gene) == (lo_band, hi_band))
            .last()
            .expect("run contains best")
            + 1;
        if best == run_start {
            continue;
        }
        entries[run_start..=best].rotate_right(1);
        respace_segment(&mut entries, run_start, run_end, lo_band, hi_band);
    }

    sort_entries(&mut entries);
    Chromosome { entries, discipline: chromosome.discipline }
}

fn node_benefit(entry: &Entry, benefit_of: &impl Fn(NodeId) -> f64) -> f64 {
    match entry.gene {
        Gene::Node { id, .. } => benefit_of(id),
        Gene::Officer(_) => f64::NEG_INFINITY,
    }
}

/// Re-keys nodes preceding the first officer into the gap just below it,
/// which decodes identically (they stay that officer's leading nodes).
fn normalize_orphans(entries: &mut [Entry], discipline: KeyDiscipline) {
    let first_officer = entries
        .iter()
        .position(|e| matches!(e.gene, Gene::Officer(_)))
        .expect("chromosome has an officer");
    if first_officer == 0 {
        return;
    }
    let officer_key = entries[first_officer].key;
    let below = entries.get(first_officer + 1).map_or(0.0, |e| e.key);
    let orphan_band_lo = entries[..first_officer]
        .iter()
        .map(|e| key_band(discipline, &e.gene).0)
        .fold(0.0f64, f64::max);
    let lo = below.max(orphan_band_lo);
    let count = first_officer;
    for (i, e) in entries[..first_officer].iter_mut().enumerate() {
        e.key = lo + (officer_key - lo) * (count - i) as f64 / (count + 1) as f64;
    }
    sort_entries(entries);
}

/// Evenly re-spaces keys of `entries[start..end]` (descending, preserving
/// current order) strictly inside the gap between their neighbours,
/// intersected with the band `(lo_band, hi_band]`.
fn respace_segment(entries: &mut [Entry], start: usize, end: usize, lo_band: f64, hi_band: f64) {
    let hi = if start == 0 { hi_band } else { entries[start - 1].key.min(hi_band) };
    let lo = if end == entries.len() { lo_band } else { entries[end].key.max(lo_band) };
    let count = end - start;
    for (i, e) in entries[start..end].iter_mut().enumerate() {
        e.key = lo + (hi - lo) * (count - i) as f64 / (count + 1) as f64;
    }
}

/// One scheduled node visit.
#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub node: NodeId,
    pub arrival_min: f64,
    pub departure_min: f64,
}

/// Ordered visits of one officer.
#[derive(Debug, Clone, PartialEq)]
pub struct OfficerRoute {
    pub officer: OfficerId,
    pub visits: Vec<Visit>,
}

/// Per-officer sub-tours with projected arrival and departure times.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub routes: Vec<OfficerRoute>,
}

impl RoutePlan {
    /// Projects arrival times along each sub-tour: consecutive arrivals are
    /// the previous departure plus travel time, and each departure adds the
    /// node's stay time.
    pub fn schedule(assignments: &[(OfficerId, Vec<NodeId>)], ctx: &PlanContext<'_>) -> Result<Self, EncodeError> {
        let mut routes = Vec::with_capacity(assignments.len());
        for (officer_id, tour) in assignments {
            let officer = ctx.officer(*officer_id)?;
            let mut clock = ctx.clock_min;
            let mut from: Option<NodeId> = officer.at_node;
            let mut pos = officer.pos;
            let mut visits = Vec::with_capacity(tour.len());
            for &node_id in tour {
                let node = ctx.node(node_id)?;
                let travel = match from {
                    Some(a) => ctx.travel_between(a, node_id),
                    None => travel_time_min(pos, node.pos, ctx.speed),
                };
                let arrival = clock + travel;
                let departure = arrival + node.stay_min;
                visits.push(Visit { node: node_id, arrival_min: arrival, departure_min: departure });
                clock = departure;
                from = Some(node_id);
                pos = node.pos;
            }
            routes.push(OfficerRoute { officer: *officer_id, visits });
        }
        Ok(Self { routes })
    }
}

/// Node attributes the scheduler and fitness function need.
#[derive(Debug, Clone)]
pub struct PlanNode {
    pub id: NodeId,
    pub pos: LatLon,
    pub state: NodeState,
    pub importance_w: f64,
    pub priority: u8,
    pub stay_min: f64,
    /// Placement time of the pending call, for emergency nodes.
    pub call_time_min: Option<f64>,
}

/// Officer attributes at planning time.
#[derive(Debug, Clone)]
pub struct PlanOfficer {
    pub id: OfficerId,
    pub pos: LatLon,
    /// Node whose centroid the officer currently occupies, if any; lets the
    /// scheduler use the travel cache.
    pub at_node: Option<NodeId>,
    pub shift_end_min: f64,
}

/// Pre-computed centroid-to-centroid travel times for one grid and speed.
#[derive(Debug, Clone)]
pub struct TravelCache {
    n: usize,
    minutes: Vec<f64>,
}

impl TravelCache {
    pub fn build(grid: &GridMap, speed: Speed) -> Self {
        let n = grid.n_nodes();
        let mut minutes = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let t = travel_time_min(grid.cells[i].centroid, grid.cells[j].centroid, speed);
                minutes[i * n + j] = t;
                minutes[j * n + i] = t;
            }
        }
        Self { n, minutes }
    }

    pub fn minutes(&self, a: NodeId, b: NodeId) -> f64 {
        self.minutes[a.0 as usize * self.n + b.0 as usize]
    }
}

/// Immutable world snapshot a planner works against: candidate nodes, idle
/// officers, the clock, and (optionally) cached travel times.
pub struct PlanContext<'a> {
    pub clock_min: f64,
    pub speed: Speed,
    pub nodes: Vec<PlanNode>,
    pub officers: Vec<PlanOfficer>,
    node_idx: HashMap<NodeId, usize>,
    officer_idx: HashMap<OfficerId, usize>,
    benefits: Vec<f64>,
    cache: Option<&'a TravelCache>,
}

impl<'a> PlanContext<'a> {
    pub fn new(
        clock_min: f64,
        speed: Speed,
        nodes: Vec<PlanNode>,
        officers: Vec<PlanOfficer>,
        cache: Option<&'a TravelCache>,
    ) -> Self {
        let node_idx = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let officer_idx = officers.iter().enumerate().map(|(i, o)| (o.id, i)).collect();
        let benefits = nodes
            .iter()
            .map(|n| crate::domain::benefit(n.importance_w, n.priority, n.state.risk_lambda()))
            .collect();
        Self { clock_min, speed, nodes, officers, node_idx, officer_idx, benefits, cache }
    }

    pub fn node(&self, id: NodeId) -> Result<&PlanNode, EncodeError> {
        self.node_idx.get(&id).map(|&i| &self.nodes[i]).ok_or(EncodeError::UnknownNode(id))
    }

    pub fn officer(&self, id: OfficerId) -> Result<&PlanOfficer, EncodeError> {
        self.officer_idx.get(&id).map(|&i| &self.officers[i]).ok_or(EncodeError::UnknownOfficer(id))
    }

    /// Reward of a candidate node; zero for ids outside the context.
    pub fn benefit_of(&self, id: NodeId) -> f64 {
        self.node_idx.get(&id).map_or(0.0, |&i| self.benefits[i])
    }

    pub fn travel_between(&self, a: NodeId, b: NodeId) -> f64 {
        match self.cache {
            Some(cache) => cache.minutes(a, b),
            None => {
                let (Ok(na), Ok(nb)) = (self.node(a), self.node(b)) else {
                    return f64::INFINITY;
                };
                travel_time_min(na.pos, nb.pos, self.speed)
            }
        }
    }

    /// Travel minutes from an officer's current position to a node.
    pub fn travel_from_officer(&self, officer: &PlanOfficer, node_id: NodeId) -> f64 {
        match (officer.at_node, self.cache) {
            (Some(at), Some(cache)) => cache.minutes(at, node_id),
            _ => match self.node(node_id) {
                Ok(node) => travel_time_min(officer.pos, node.pos, self.speed),
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// (id, state) pairs for the encoding operations.
    pub fn encoding_nodes(&self) -> Vec<(NodeId, NodeState)> {
        self.nodes.iter().map(|n| (n.id, n.state)).collect()
    }

    pub fn officer_ids(&self) -> Vec<OfficerId> {
        self.officers.iter().map(|o| o.id).collect()
    }
}
