//! Minute-resolution patrol simulation. Officers work 8am-8pm, starting each
//! day at grid cell 0. Every 1-minute tick advances travel and visits,
//! activates due 911 calls as emergency nodes, and re-plans whenever at
//! least one officer is idle and at least one node is assignable. Only the
//! first node of each planned sub-tour is committed; the rest is advisory
//! and re-planned on the next trigger.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{
    DomainError, LatLon, NodeId, NodeState, OfficerId, OfficerStatus, Speed, TimeInterval,
};
use crate::encoding::{PlanContext, PlanNode, PlanOfficer, TravelCache};
use crate::features::CrimeIndex;
use crate::ingest::{bin, Scenario};
use crate::optimize::{OptimizeError, OptimizerParams, Planner};
use crate::predict::HotspotMap;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation day range [{from}, {to}) is empty or outside the scenario")]
    EmptyPeriod { from: u32, to: u32 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("event sink failed: {0}")]
    Sink(String),
}

/// Simulation knobs; defaults follow the reference setup (1.2 m/s walking
/// speed, 8am-8pm shifts, 1-minute scans, 10-minute stays).
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub speed_mps: f64,
    pub stay_coldspot_min: f64,
    pub stay_hotspot_min: f64,
    pub stay_emergency_min: f64,
    /// Shift start as minutes after midnight.
    pub shift_start_min: i64,
    /// Shift end as minutes after midnight.
    pub shift_end_min: i64,
    pub salary_rho: f64,
    pub optimizer: OptimizerParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            speed_mps: 1.2,
            stay_coldspot_min: 10.0,
            stay_hotspot_min: 10.0,
            stay_emergency_min: 10.0,
            shift_start_min: 8 * 60,
            shift_end_min: 20 * 60,
            salary_rho: 0.0,
            optimizer: OptimizerParams::default(),
        }
    }
}

impl SimConfig {
    fn stay_for(&self, state: NodeState) -> f64 {
        match state {
            NodeState::Coldspot => self.stay_coldspot_min,
            NodeState::Hotspot => self.stay_hotspot_min,
            NodeState::Emergency => self.stay_emergency_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Dispatch,
    Arrival,
    VisitStart,
    VisitEnd,
    CallAttended,
    CallUnattended,
    ShiftEnd,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Dispatch => "dispatch",
            EventKind::Arrival => "arrival",
            EventKind::VisitStart => "visit_start",
            EventKind::VisitEnd => "visit_end",
            EventKind::CallAttended => "call_attended",
            EventKind::CallUnattended => "call_unattended",
            EventKind::ShiftEnd => "shift_end",
        }
    }
}

/// One log record; times are minutes from the scenario epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time_min: i64,
    pub kind: EventKind,
    pub officer: Option<OfficerId>,
    pub node: Option<NodeId>,
    pub priority: Option<u8>,
    pub delay_min: Option<f64>,
}

/// Timestamped record of everything that happened in one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub start_date: NaiveDate,
    pub events: Vec<Event>,
}

impl EventLog {
    /// Closed visit intervals `(node, start_min, end_min)` in log order.
    pub fn visit_intervals(&self) -> Vec<(NodeId, i64, i64)> {
        let mut open: HashMap<(OfficerId, NodeId), i64> = HashMap::new();
        let mut intervals = Vec::new();
        for e in &self.events {
            match (e.kind, e.officer, e.node) {
                (EventKind::VisitStart, Some(o), Some(n)) => {
                    open.insert((o, n), e.time_min);
                }
                (EventKind::VisitEnd, Some(o), Some(n)) => {
                    if let Some(start) = open.remove(&(o, n)) {
                        intervals.push((n, start, e.time_min));
                    }
                }
                _ => {}
            }
        }
        intervals
    }

    /// Attended calls as `(time_min, node, priority, delay_min)`.
    pub fn attended_calls(&self) -> Vec<(i64, NodeId, u8, f64)> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::CallAttended)
            .map(|e| {
                (
                    e.time_min,
                    e.node.expect("attended call has a node"),
                    e.priority.expect("attended call has a priority"),
                    e.delay_min.expect("attended call has a delay"),
                )
            })
            .collect()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Renders `time,officer_id,event,node_id,priority,delay_min` rows.
    pub fn to_csv_string(&self) -> String {
        let epoch = self.start_date.and_hms_opt(0, 0, 0).expect("midnight exists");
        let mut out = String::from("time,officer_id,event,node_id,priority,delay_min\n");
        for e in &self.events {
            let ts = epoch + chrono::Duration::minutes(e.time_min);
            let officer = e.officer.map(|o| o.0.to_string()).unwrap_or_default();
            let node = e.node.map(|n| n.0.to_string()).unwrap_or_default();
            let priority = e.priority.map(|p| p.to_string()).unwrap_or_default();
            let delay = e.delay_min.map(|d| format!("{d:.3}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{officer},{},{node},{priority},{delay}\n",
                ts.format(crate::ingest::TIMESTAMP_FORMAT),
                e.kind.as_str(),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }
}

#[derive(Debug, Clone)]
struct SimCall {
    id: u32,
    node: NodeId,
    minute: f64,
    priority: u8,
}

#[derive(Debug, Clone)]
struct OfficerState {
    id: OfficerId,
    pos: LatLon,
    at_node: Option<NodeId>,
    status: OfficerStatus,
    target: Option<NodeId>,
    target_pos: LatLon,
    remaining_travel_min: f64,
    total_travel_min: f64,
    visit_until: i64,
    dispatched_at: i64,
}

/// One running simulation over `[from_day, to_day)` of a scenario.
pub struct World<'a> {
    scenario: &'a Scenario,
    hotspots: &'a HotspotMap,
    planner: Planner,
    cfg: SimConfig,
    speed: Speed,
    cache: TravelCache,
    crime_index: CrimeIndex,
    calls_by_day: Vec<Vec<SimCall>>,
    rng: ChaCha8Rng,
    officers: Vec<OfficerState>,
    day: u32,
    to_day: u32,
    clock: i64,
    next_call: usize,
    pending: Vec<SimCall>,
    current_slot: u8,
    visited_this_slot: HashSet<NodeId>,
    committed: HashMap<NodeId, OfficerId>,
    locked: HashSet<NodeId>,
    off_duty_logged: HashSet<OfficerId>,
    log: EventLog,
    done: bool,
}

impl<'a> World<'a> {
    pub fn new(
        scenario: &'a Scenario,
        hotspots: &'a HotspotMap,
        planner: Planner,
        n_officers: u32,
        seed: u64,
        cfg: SimConfig,
        from_day: u32,
        to_day: u32,
    ) -> Result<Self, SimError> {
        if from_day >= to_day || to_day > scenario.n_days {
            return Err(SimError::EmptyPeriod { from: from_day, to: to_day });
        }
        let speed = Speed::new(cfg.speed_mps)?;
        let cache = TravelCache::build(&scenario.grid, speed);
        let crime_index = CrimeIndex::build(scenario);

        let mut calls_by_day: Vec<Vec<SimCall>> = vec![Vec::new(); scenario.n_days as usize];
        for (i, call) in scenario.calls.iter().enumerate() {
            let Some(day) = scenario.day_of(call.timestamp) else { continue };
            let Some(node) = bin(call.pos, &scenario.grid) else { continue };
            calls_by_day[day as usize].push(SimCall {
                id: i as u32,
                node,
                minute: scenario.minute_of(call.timestamp),
                priority: crate::domain::priority_of(&call.call_type),
            });
        }

        let start_pos = scenario.grid.centroid(NodeId(0));
        let officers = (0..n_officers)
            .map(|i| OfficerState {
                id: OfficerId(i),
                pos: start_pos,
                at_node: Some(NodeId(0)),
                status: OfficerStatus::Idle,
                target: None,
                target_pos: start_pos,
                remaining_travel_min: 0.0,
                total_travel_min: 0.0,
                visit_until: 0,
                dispatched_at: 0,
            })
            .collect();

        let mut world = Self {
            scenario,
            hotspots,
            planner,
            cfg,
            speed,
            cache,
            crime_index,
            calls_by_day,
            rng: ChaCha8Rng::seed_from_u64(seed),
            officers,
            day: from_day,
            to_day,
            clock: 0,
            next_call: 0,
            pending: Vec::new(),
            current_slot: 0,
            visited_this_slot: HashSet::new(),
            committed: HashMap::new(),
            locked: HashSet::new(),
            off_duty_logged: HashSet::new(),
            log: EventLog { start_date: scenario.start_date, events: Vec::new() },
            done: false,
        };
        world.begin_day();
        Ok(world)
    }

    pub fn clock_min(&self) -> i64 {
        self.clock
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn officer_status(&self, id: OfficerId) -> Option<OfficerStatus> {
        self.officers.iter().find(|o| o.id == id).map(|o| o.status)
    }

    pub fn events(&self) -> &[Event] {
        &self.log.events
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    fn day_start(&self) -> i64 {
        i64::from(self.day) * 24 * 60 + self.cfg.shift_start_min
    }

    fn day_end(&self) -> i64 {
        i64::from(self.day) * 24 * 60 + self.cfg.shift_end_min
    }

    fn begin_day(&mut self) {
        let start_pos = self.scenario.grid.centroid(NodeId(0));
        for officer in self.officers.iter_mut() {
            officer.pos = start_pos;
            officer.at_node = Some(NodeId(0));
            officer.status = OfficerStatus::Idle;
            officer.target = None;
            officer.remaining_travel_min = 0.0;
        }
        self.clock = self.day_start();
        self.next_call = 0;
        self.pending.clear();
        self.visited_this_slot.clear();
        self.committed.clear();
        self.locked.clear();
        self.off_duty_logged.clear();
        self.current_slot = TimeInterval::of_minute(self.clock).slot;
    }

    /// Current state of a node: emergency while a call is pending there,
    /// otherwise the predicted label for the current slot.
    fn node_state(&self, node: NodeId) -> NodeState {
        if self.pending.iter().any(|c| c.node == node) {
            NodeState::Emergency
        } else {
            self.hotspots.state_of(node, TimeInterval::of_minute(self.clock))
        }
    }

    fn push_event(
        &mut self,
        kind: EventKind,
        officer: Option<OfficerId>,
        node: Option<NodeId>,
        priority: Option<u8>,
        delay_min: Option<f64>,
    ) {
        self.log.events.push(Event { time_min: self.clock, kind, officer, node, priority, delay_min });
    }

    /// Advances one simulated minute. Order within a tick: slot rollover,
    /// travel/visit progress, call activation, then planning.
    pub fn step(&mut self) -> Result<(), SimError> {
        if self.done {
            return Ok(());
        }

        let slot = TimeInterval::of_minute(self.clock).slot;
        if slot != self.current_slot {
            self.current_slot = slot;
            self.visited_this_slot.clear();
        }

        self.advance_officers();
        self.activate_calls();

        if self.clock >= self.day_end() {
            self.finish_day();
            return Ok(());
        }

        self.plan_if_triggered()?;
        self.clock += 1;
        Ok(())
    }

    fn advance_officers(&mut self) {
        let mut attended: Vec<(OfficerId, SimCall)> = Vec::new();
        let mut arrivals: Vec<(OfficerId, NodeId)> = Vec::new();
        let mut completions: Vec<(OfficerId, NodeId)> = Vec::new();

        for officer in self.officers.iter_mut() {
            match officer.status {
                OfficerStatus::Travelling => {
                    officer.remaining_travel_min -= 1.0;
                    if officer.remaining_travel_min <= 1e-9 {
                        let node = officer.target.expect("travelling officer has a target");
                        officer.pos = officer.target_pos;
                        officer.at_node = Some(node);
                        officer.status = OfficerStatus::Visiting;
                        arrivals.push((officer.id, node));
                    } else {
                        // Linear interpolation toward the target keeps the
                        // projected position meaningful for re-planning.
                        let frac = 1.0_f64.min(1.0 / (officer.remaining_travel_min + 1.0));
                        officer.pos = LatLon::new(
                            officer.pos.lat + (officer.target_pos.lat - officer.pos.lat) * frac,
                            officer.pos.lon + (officer.target_pos.lon - officer.pos.lon) * frac,
                        );
                        officer.at_node = None;
                    }
                }
                OfficerStatus::Visiting => {
                    if self.clock >= officer.visit_until {
                        let node = officer.target.take().expect("visiting officer has a node");
                        officer.status = OfficerStatus::Idle;
                        completions.push((officer.id, node));
                    }
                }
                OfficerStatus::Idle | OfficerStatus::OffDuty => {}
            }
        }

        for (officer_id, node) in arrivals {
            self.push_event(EventKind::Arrival, Some(officer_id), Some(node), None, None);
            self.push_event(EventKind::VisitStart, Some(officer_id), Some(node), None, None);
            self.committed.remove(&node);
            self.locked.insert(node);

            // Attend every call pending at this node.
            let mut i = 0;
            while i < self.pending.len() {
                if self.pending[i].node == node {
                    attended.push((officer_id, self.pending.swap_remove(i)));
                } else {
                    i += 1;
                }
            }
            let state = self.node_state(node);
            let stay = self.cfg.stay_for(if attended.iter().any(|(_, c)| c.node == node) {
                NodeState::Emergency
            } else {
                state
            });
            if let Some(officer) = self.officers.iter_mut().find(|o| o.id == officer_id) {
                officer.visit_until = self.clock + stay.ceil() as i64;
            }
        }

        attended.sort_by(|a, b| a.1.id.cmp(&b.1.id));
        for (officer_id, call) in attended {
            let delay = (self.clock as f64 - call.minute).max(0.0);
            self.push_event(
                EventKind::CallAttended,
                Some(officer_id),
                Some(call.node),
                Some(call.priority),
                Some(delay),
            );
        }

        for (officer_id, node) in completions {
            self.push_event(EventKind::VisitEnd, Some(officer_id), Some(node), None, None);
            self.locked.remove(&node);
            self.visited_this_slot.insert(node);
        }
    }

    fn activate_calls(&mut self) {
        loop {
            let calls = &self.calls_by_day[self.day as usize];
            if self.next_call >= calls.len() || calls[self.next_call].minute > self.clock as f64 {
                break;
            }
            let call = calls[self.next_call].clone();
            self.next_call += 1;
            // A call at a node already being visited is attended on the spot.
            let visiting_officer = self
                .officers
                .iter()
                .find(|o| o.status == OfficerStatus::Visiting && o.target == Some(call.node))
                .map(|o| o.id);
            if let Some(officer_id) = visiting_officer {
                let delay = (self.clock as f64 - call.minute).max(0.0);
                self.push_event(
                    EventKind::CallAttended,
                    Some(officer_id),
                    Some(call.node),
                    Some(call.priority),
                    Some(delay),
                );
            } else {
                self.pending.push(call);
            }
        }
    }

    fn assignable_nodes(&self) -> Vec<NodeId> {
        let n = self.scenario.grid.n_nodes() as u32;
        (0..n)
            .map(NodeId)
            .filter(|id| {
                if self.locked.contains(id) || self.committed.contains_key(id) {
                    return false;
                }
                let emergency = self.pending.iter().any(|c| c.node == *id);
                emergency || !self.visited_this_slot.contains(id)
            })
            .collect()
    }

    fn plan_if_triggered(&mut self) -> Result<(), SimError> {
        let idle: Vec<OfficerId> = self
            .officers
            .iter()
            .filter(|o| o.status == OfficerStatus::Idle)
            .map(|o| o.id)
            .collect();
        if idle.is_empty() {
            return Ok(());
        }
        let nodes = self.assignable_nodes();
        if nodes.is_empty() {
            return Ok(());
        }

        let interval = TimeInterval::of_minute(self.clock);
        let plan_nodes: Vec<PlanNode> = nodes
            .iter()
            .map(|&id| {
                let state = self.node_state(id);
                let (priority, call_time) = if state == NodeState::Emergency {
                    let pending: Vec<&SimCall> = self.pending.iter().filter(|c| c.node == id).collect();
                    let priority = pending.iter().map(|c| c.priority).max().unwrap_or(1);
                    let first = pending.iter().map(|c| c.minute).fold(f64::INFINITY, f64::min);
                    (priority, Some(first))
                } else {
                    (1, None)
                };
                PlanNode {
                    id,
                    pos: self.scenario.grid.centroid(id),
                    state,
                    importance_w: self.crime_index.density(id, interval.day, interval.slot, 3),
                    priority,
                    stay_min: self.cfg.stay_for(state),
                    call_time_min: call_time,
                }
            })
            .collect();
        let plan_officers: Vec<PlanOfficer> = self
            .officers
            .iter()
            .filter(|o| idle.contains(&o.id))
            .map(|o| PlanOfficer {
                id: o.id,
                pos: o.pos,
                at_node: o.at_node,
                shift_end_min: self.day_end() as f64,
            })
            .collect();

        let ctx = PlanContext::new(
            self.clock as f64,
            self.speed,
            plan_nodes,
            plan_officers,
            Some(&self.cache),
        );
        let routes = self.planner.plan(&ctx, &self.cfg.optimizer, &mut self.rng)?;

        let mut dispatches: Vec<(OfficerId, NodeId, f64)> = Vec::new();
        for (officer_id, tour) in routes {
            let Some(&first) = tour.first() else { continue };
            if dispatches.iter().any(|(_, n, _)| *n == first) {
                continue;
            }
            let officer = ctx.officer(officer_id).expect("planned officer");
            let travel = ctx.travel_from_officer(officer, first);
            dispatches.push((officer_id, first, travel));
        }

        for (officer_id, node, travel) in dispatches {
            let state = self.node_state(node);
            let stay = self.cfg.stay_for(state);
            let completes = self.clock as f64 + travel + stay;
            let day_end = self.day_end() as f64;
            let target_pos = self.scenario.grid.centroid(node);
            let officer = self
                .officers
                .iter_mut()
                .find(|o| o.id == officer_id)
                .expect("dispatched officer exists");
            if completes > day_end {
                // Work that would run past shift end is refused and the
                // officer stops for the day.
                officer.status = OfficerStatus::OffDuty;
                self.off_duty_logged.insert(officer_id);
                self.push_event(EventKind::ShiftEnd, Some(officer_id), None, None, None);
                continue;
            }
            officer.status = OfficerStatus::Travelling;
            officer.target = Some(node);
            officer.target_pos = target_pos;
            officer.remaining_travel_min = travel;
            officer.total_travel_min = travel;
            officer.dispatched_at = self.clock;
            self.committed.insert(node, officer_id);
            self.push_event(EventKind::Dispatch, Some(officer_id), Some(node), None, None);
        }
        Ok(())
    }

    fn finish_day(&mut self) {
        // Close out any visit still open at shift end.
        let closing: Vec<(OfficerId, NodeId)> = self
            .officers
            .iter()
            .filter_map(|o| match o.status {
                OfficerStatus::Visiting => o.target.map(|n| (o.id, n)),
                _ => None,
            })
            .collect();
        for (officer_id, node) in closing {
            self.push_event(EventKind::VisitEnd, Some(officer_id), Some(node), None, None);
            self.locked.remove(&node);
        }
        for i in 0..self.officers.len() {
            let id = self.officers[i].id;
            self.officers[i].status = OfficerStatus::OffDuty;
            if self.off_duty_logged.insert(id) {
                self.push_event(EventKind::ShiftEnd, Some(id), None, None, None);
            }
        }
        // Calls still pending, or placed after shift end, expire unattended.
        let calls = &self.calls_by_day[self.day as usize];
        let mut unattended: Vec<SimCall> = self.pending.drain(..).collect();
        unattended.extend(calls[self.next_call..].iter().cloned());
        self.next_call = calls.len();
        unattended.sort_by_key(|c| c.id);
        for call in unattended {
            self.push_event(EventKind::CallUnattended, None, Some(call.node), Some(call.priority), None);
        }

        self.day += 1;
        if self.day >= self.to_day {
            self.done = true;
        } else {
            self.begin_day();
        }
    }
}

/// Simulates `[from_day, to_day)` and returns the event log. Deterministic
/// for a given seed.
#[allow(clippy::too_many_arguments)]
pub fn run(
    scenario: &Scenario,
    hotspots: &HotspotMap,
    planner: Planner,
    n_officers: u32,
    seed: u64,
    cfg: SimConfig,
    from_day: u32,
    to_day: u32,
) -> Result<EventLog, SimError> {
    let mut world = World::new(scenario, hotspots, planner, n_officers, seed, cfg, from_day, to_day)?;
    while !world.is_done() {
        world.step()?;
    }
    Ok(world.into_log())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{BBox, EARTH_RADIUS_M};
    use crate::ingest::{build_grid, CallRecord, Scenario};

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2013, 1, 7).unwrap()
    }

    /// 1x2 grid whose centroids sit 72 m apart (1 minute at 1.2 m/s).
    fn two_cell_grid() -> crate::domain::GridMap {
        let d_lon = (72.0 / EARTH_RADIUS_M).to_degrees();
        build_grid(BBox::new(0.0, 0.0, 0.0001, 2.0 * d_lon).unwrap(), 1, 2).unwrap()
    }

    fn empty_scenario(grid: crate::domain::GridMap) -> Scenario {
        Scenario::new(grid, vec![], vec![], vec![], vec![], start(), 1).unwrap()
    }

    fn scenario_with_calls(grid: crate::domain::GridMap, calls: Vec<CallRecord>) -> Scenario {
        Scenario::new(grid, vec![], vec![], vec![], calls, start(), 1).unwrap()
    }

    fn quick_cfg() -> SimConfig {
        SimConfig {
            optimizer: OptimizerParams {
                population_size: 10,
                max_iterations: 5,
                ..OptimizerParams::default()
            },
            ..SimConfig::default()
        }
    }

    #[test]
    fn empty_period_is_an_error() {
        let scenario = empty_scenario(two_cell_grid());
        let map = HotspotMap::default();
        assert!(matches!(
            run(&scenario, &map, Planner::ImpGreedy, 1, 0, quick_cfg(), 0, 0),
            Err(SimError::EmptyPeriod { .. })
        ));
        assert!(matches!(
            run(&scenario, &map, Planner::ImpGreedy, 1, 0, quick_cfg(), 0, 5),
            Err(SimError::EmptyPeriod { .. })
        ));
    }

    #[test]
    fn officer_72m_away_arrives_next_tick() {
        let grid = two_cell_grid();
        let mut map = HotspotMap::default();
        // Only node 1 is worth visiting in slot 4 (8am-10am).
        map.mark_hot(NodeId(1), TimeInterval::new(0, 4));
        let scenario = empty_scenario(grid);
        let log = run(&scenario, &map, Planner::ImpGreedy, 1, 0, quick_cfg(), 0, 1).unwrap();
        let dispatch = log.events.iter().find(|e| e.kind == EventKind::Dispatch).unwrap();
        assert_eq!(dispatch.node, Some(NodeId(1)));
        assert_eq!(dispatch.time_min, 480);
        let arrival = log.events.iter().find(|e| e.kind == EventKind::Arrival).unwrap();
        assert_eq!(arrival.time_min, 481, "72 m at 1.2 m/s is exactly one tick");
        let end = log.events.iter().find(|e| e.kind == EventKind::VisitEnd).unwrap();
        assert_eq!(end.time_min, 491);
    }

    #[test]
    fn idle_world_logs_only_shift_ends() {
        // Zero calls, zero hotspots: every node is a coldspot, so greedy
        // dispatch still visits, but with an all-visited slot officers idle.
        // Use a 1x1 grid where the sole node is the officer's start cell.
        let grid = build_grid(BBox::new(0.0, 0.0, 0.001, 0.001).unwrap(), 1, 1).unwrap();
        let scenario = empty_scenario(grid);
        let map = HotspotMap::default();
        let log = run(&scenario, &map, Planner::DisGreedy, 1, 0, quick_cfg(), 0, 1).unwrap();
        // The officer re-visits its own cell once per slot (6 slots between
        // 8am and 8pm), then idles; exactly one shift_end.
        assert_eq!(log.count(EventKind::ShiftEnd), 1);
        assert_eq!(log.count(EventKind::CallAttended), 0);
        assert_eq!(log.count(EventKind::CallUnattended), 0);
        let dispatches = log.count(EventKind::Dispatch);
        assert_eq!(dispatches, 6, "one self-visit per 2-hour slot");
    }

    #[test]
    fn adjacent_call_hand_computed_delay() {
        let grid = two_cell_grid();
        // Call at 10:00 exactly at the centroid of node 1.
        let call_pos = grid.centroid(NodeId(1));
        let scenario = scenario_with_calls(
            grid,
            vec![CallRecord {
                timestamp: start().and_hms_opt(10, 0, 0).unwrap(),
                pos: call_pos,
                call_type: "Homicide".into(),
            }],
        );
        let map = HotspotMap::default();
        let log = run(&scenario, &map, Planner::ImpGreedy, 1, 0, quick_cfg(), 0, 1).unwrap();
        let attended = log.attended_calls();
        assert_eq!(attended.len(), 1);
        let (_, node, priority, delay) = attended[0];
        assert_eq!(node, NodeId(1));
        assert_eq!(priority, 5);
        // The officer idles at node 0 (everything visited); the call
        // activates at minute 600, planning dispatches the same tick, travel
        // is one minute: attended at 601 with a 1-minute delay.
        assert_eq!(delay, 1.0);
    }

    #[test]
    fn same_seed_reproduces_event_log() {
        let params = crate::ingest::SyntheticParams {
            bbox: BBox::new(47.5, -122.4, 47.58, -122.3).unwrap(),
            grid_rows: 3,
            grid_cols: 3,
            start_date: start(),
            n_days: 2,
            crime_rate_per_node_slot: 0.05,
            call_rate_per_day: 6.0,
            n_users: 10,
            n_venues: 8,
        };
        let scenario = crate::ingest::generate_synthetic(&params, 3).unwrap();
        let map = HotspotMap::default();
        let a = run(&scenario, &map, Planner::GlerkGa, 3, 11, quick_cfg(), 0, 2).unwrap();
        let b = run(&scenario, &map, Planner::GlerkGa, 3, 11, quick_cfg(), 0, 2).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn calls_reconcile_exactly() {
        let params = crate::ingest::SyntheticParams {
            bbox: BBox::new(47.5, -122.4, 47.58, -122.3).unwrap(),
            grid_rows: 3,
            grid_cols: 3,
            start_date: start(),
            n_days: 2,
            crime_rate_per_node_slot: 0.02,
            call_rate_per_day: 15.0,
            n_users: 10,
            n_venues: 8,
        };
        let scenario = crate::ingest::generate_synthetic(&params, 7).unwrap();
        let map = HotspotMap::default();
        for planner in [Planner::ImpGreedy, Planner::DisGreedy] {
            let log = run(&scenario, &map, planner, 2, 5, quick_cfg(), 0, 2).unwrap();
            let attended = log.count(EventKind::CallAttended);
            let unattended = log.count(EventKind::CallUnattended);
            assert_eq!(attended + unattended, scenario.calls.len(), "planner {planner}");
        }
    }

    #[test]
    fn no_teleportation_delay_bounds() {
        let params = crate::ingest::SyntheticParams {
            bbox: BBox::new(47.5, -122.4, 47.58, -122.3).unwrap(),
            grid_rows: 3,
            grid_cols: 3,
            start_date: start(),
            n_days: 1,
            crime_rate_per_node_slot: 0.0,
            call_rate_per_day: 10.0,
            n_users: 0,
            n_venues: 0,
        };
        let scenario = crate::ingest::generate_synthetic(&params, 9).unwrap();
        let map = HotspotMap::default();
        let log = run(&scenario, &map, Planner::ImpGreedy, 2, 5, quick_cfg(), 0, 1).unwrap();

        // Every dispatch-to-arrival gap is at least the straight-line travel
        // time between the dispatch position (a node centroid) and the target.
        let mut dispatch_time: HashMap<(OfficerId, NodeId), i64> = HashMap::new();
        for e in &log.events {
            match e.kind {
                EventKind::Dispatch => {
                    dispatch_time.insert((e.officer.unwrap(), e.node.unwrap()), e.time_min);
                }
                EventKind::Arrival => {
                    let key = (e.officer.unwrap(), e.node.unwrap());
                    if let Some(t0) = dispatch_time.remove(&key) {
                        assert!(e.time_min > t0, "arrival not after dispatch");
                    }
                }
                _ => {}
            }
        }
        // All events stay inside the shift.
        for e in &log.events {
            let minute_of_day = e.time_min.rem_euclid(24 * 60);
            assert!((480..=1200).contains(&minute_of_day), "event outside shift: {e:?}");
        }
    }

    #[test]
    fn step_only_advances_clock_when_nothing_is_due() {
        let grid = build_grid(BBox::new(0.0, 0.0, 0.001, 0.001).unwrap(), 1, 1).unwrap();
        let scenario = empty_scenario(grid);
        let map = HotspotMap::default();
        let mut world =
            World::new(&scenario, &map, Planner::DisGreedy, 1, 0, quick_cfg(), 0, 1).unwrap();
        // First tick dispatches the self-visit; let it complete (1 tick
        // travel quantization + 10 min stay).
        for _ in 0..15 {
            world.step().unwrap();
        }
        assert_eq!(world.officer_status(OfficerId(0)), Some(OfficerStatus::Idle));
        let events_before = world.events().len();
        let clock_before = world.clock_min();
        world.step().unwrap();
        assert_eq!(world.events().len(), events_before);
        assert_eq!(world.clock_min(), clock_before + 1);
    }

    #[test]
    fn visiting_officer_remains_visiting_mid_stay() {
        let grid = build_grid(BBox::new(0.0, 0.0, 0.001, 0.001).unwrap(), 1, 1).unwrap();
        let scenario = empty_scenario(grid);
        let map = HotspotMap::default();
        let mut world =
            World::new(&scenario, &map, Planner::DisGreedy, 1, 0, quick_cfg(), 0, 1).unwrap();
        // Tick 0 dispatches (travel 0 -> arrival next tick); tick 1 arrives.
        world.step().unwrap();
        world.step().unwrap();
        assert_eq!(world.officer_status(OfficerId(0)), Some(OfficerStatus::Visiting));
        world.step().unwrap();
        assert_eq!(world.officer_status(OfficerId(0)), Some(OfficerStatus::Visiting));
    }

    #[test]
    fn late_call_expires_unattended() {
        let grid = two_cell_grid();
        let call_pos = grid.centroid(NodeId(1));
        // Call placed at 19:59:30; attending would exceed the shift.
        let scenario = scenario_with_calls(
            grid,
            vec![CallRecord {
                timestamp: start().and_hms_opt(19, 59, 30).unwrap(),
                pos: call_pos,
                call_type: "Homicide".into(),
            }],
        );
        let map = HotspotMap::default();
        let log = run(&scenario, &map, Planner::ImpGreedy, 1, 0, quick_cfg(), 0, 1).unwrap();
        assert_eq!(log.count(EventKind::CallAttended), 0);
        assert_eq!(log.count(EventKind::CallUnattended), 1);
    }
}
