//! Scenario families: the task set, density bands, SV speed modes and road
//! maps for multi-lane overtaking, on-ramp merging and unsignalized
//! intersections.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::{FRAC_PI_2, PI};
use serde::{Deserialize, Serialize};

use super::episode::EpisodeState;
use super::world::{Lane, RoadWorld, ScenarioKind, SpawnRole, SpawnZone, WaypointGraph};
use super::SimError;
use crate::curriculum::{TaskId, TaskSet};
use crate::geom::{Polygon, Polyline, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub dt: f64,
    pub max_steps: u32,
    pub wheelbase: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Ego centre farther than this from every lane centreline counts as a collision.
    pub offroad_distance: f64,
    pub spawn_attempts: usize,
    /// Footprint inflation used when placing vehicles at reset.
    pub spawn_clearance: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_steps: 400,
            wheelbase: 2.7,
            vehicle_length: 4.6,
            vehicle_width: 1.9,
            offroad_distance: 2.75,
            spawn_attempts: 100,
            spawn_clearance: 1.0,
        }
    }
}

/// Desired-speed band for surrounding vehicles, as fractions of the speed limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedMode {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
}

/// A scenario family with its task set. Either one world shared by every
/// level-2 index, or one world per level-2 index (intersection variants).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub task_set: TaskSet,
    /// Surrounding-vehicle count per level-1 index.
    pub density_counts: Vec<usize>,
    /// Speed band per level-2 index; the last entry is reused past the end.
    pub speed_modes: Vec<SpeedMode>,
    pub worlds: Vec<Arc<RoadWorld>>,
    #[serde(default)]
    pub sim: SimParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let ts = &self.task_set;
        if self.density_counts.len() != ts.n_l1_max + 1 {
            return Err(SimError::InvalidWorld("density_counts must have one entry per level-1 index"));
        }
        if self.speed_modes.is_empty() || self.worlds.is_empty() {
            return Err(SimError::InvalidWorld("scenario needs at least one speed mode and one world"));
        }
        if self.worlds.len() != 1 && self.worlds.len() != ts.n_l2_max + 1 {
            return Err(SimError::InvalidWorld("worlds must be shared or one per level-2 index"));
        }
        if self.density_counts.iter().any(|&c| c > super::N_SV_MAX) {
            return Err(SimError::InvalidWorld("density band exceeds state capacity"));
        }
        for m in &self.speed_modes {
            if !(m.lo >= 0.0 && m.lo <= m.hi) {
                return Err(SimError::InvalidWorld("bad speed mode"));
            }
        }
        for w in &self.worlds {
            w.validate()?;
        }
        Ok(())
    }

    pub fn world_for(&self, task: TaskId) -> &Arc<RoadWorld> {
        &self.worlds[task.mode.min(self.worlds.len() - 1)]
    }

    pub fn v_limit(&self, task: TaskId) -> f64 {
        self.world_for(task).v_limit
    }

    /// Starts an episode for `task`. Identical `(task, seed)` gives an identical state.
    pub fn reset(&self, task: TaskId, seed: u64) -> Result<EpisodeState, SimError> {
        if !self.task_set.contains(task) {
            return Err(SimError::TaskOutOfRange(task.density, task.mode));
        }
        let speed = &self.speed_modes[task.mode.min(self.speed_modes.len() - 1)];
        EpisodeState::spawn(self.world_for(task).clone(), self.sim, task, self.density_counts[task.density], speed, seed)
    }

    pub fn by_name(name: &str) -> Option<Scenario> {
        match name {
            "overtaking" => Some(overtaking()),
            "merging" => Some(merging()),
            "intersection" => Some(intersection()),
            _ => None,
        }
    }
}

const LANE_WIDTH: f64 = 3.5;
const WP_SPACING: f64 = 5.0;
const LANE_CHANGE_COST: f64 = 1.5;

fn straight(x0: f64, x1: f64, y: f64) -> Polyline {
    Polyline::new(vec![Vec2::new(x0, y), Vec2::new(x1, y)])
}

fn density_labels() -> Vec<String> {
    ["empty", "low", "medium", "high"].iter().map(|s| s.to_string()).collect()
}

fn speed_modes() -> Vec<SpeedMode> {
    vec![
        SpeedMode { label: "steady".into(), lo: 0.55, hi: 0.7 },
        SpeedMode { label: "slow".into(), lo: 0.3, hi: 0.45 },
        SpeedMode { label: "mixed".into(), lo: 0.15, hi: 0.8 },
    ]
}

/// Adds one waypoint chain per lane plus diagonal lane-change edges between
/// neighbouring lanes.
fn parallel_lane_graph(lanes: &[&Polyline]) -> WaypointGraph {
    let mut g = WaypointGraph::default();
    let chains: Vec<Vec<usize>> = lanes.iter().map(|l| g.add_chain(l, WP_SPACING)).collect();
    for pair in chains.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for k in 0..a.len().min(b.len()).saturating_sub(1) {
            g.connect(a[k], b[k + 1], LANE_CHANGE_COST);
            g.connect(b[k], a[k + 1], LANE_CHANGE_COST);
        }
    }
    g
}

/// Three-lane straight road; the ego starts in the middle lane and must reach
/// the far end past slower traffic.
pub fn overtaking() -> Scenario {
    let length = 200.0;
    let lanes: Vec<Lane> =
        (0..3).map(|i| Lane { name: format!("lane{i}"), centerline: straight(-10.0, length + 10.0, i as f64 * LANE_WIDTH) }).collect();
    let graph = parallel_lane_graph(&lanes.iter().map(|l| &l.centerline).collect::<Vec<_>>());
    let mut zones = vec![SpawnZone { role: SpawnRole::Ego, lane: 1, s_min: 10.0, s_max: 15.0 }];
    for lane in 0..3 {
        zones.push(SpawnZone { role: SpawnRole::Sv, lane, s_min: 32.0, s_max: 110.0 });
    }
    let world = RoadWorld {
        kind: ScenarioKind::Overtaking,
        lane_width: LANE_WIDTH,
        v_limit: 15.0,
        lanes,
        goal: Polygon::rect(length - 20.0, -LANE_WIDTH / 2.0, length + 10.0, 2.5 * LANE_WIDTH),
        spawn_zones: zones,
        graph,
    };
    Scenario {
        name: "overtaking".into(),
        task_set: TaskSet::new(density_labels(), speed_modes().iter().map(|m| m.label.clone()).collect()),
        density_counts: vec![0, 2, 4, 6],
        speed_modes: speed_modes(),
        worlds: vec![Arc::new(world)],
        sim: SimParams::default(),
    }
}

/// Two-lane main road with an on-ramp joining the right lane; the ego starts on
/// the ramp.
pub fn merging() -> Scenario {
    let main0 = straight(-60.0, 160.0, 0.0);
    let main1 = straight(-60.0, 160.0, LANE_WIDTH);
    let mut ramp_pts = Vec::new();
    // straight approach, then a smooth S-curve into the right lane at x = 40
    for k in 0..=8 {
        let x = -40.0 + 5.0 * k as f64;
        ramp_pts.push(Vec2::new(x, -12.0));
    }
    for k in 1..=12 {
        let t = k as f64 / 12.0;
        let x = 0.0 + 40.0 * t;
        let y = -12.0 + 12.0 * (1.0 - libm::cos(PI * t)) / 2.0;
        ramp_pts.push(Vec2::new(x, y));
    }
    for k in 1..=24 {
        ramp_pts.push(Vec2::new(40.0 + 5.0 * k as f64, 0.0));
    }
    let ramp = Polyline::new(ramp_pts);
    let mut graph = parallel_lane_graph(&[&main0, &main1]);
    graph.add_chain(&ramp, WP_SPACING);
    let lanes = vec![
        Lane { name: "main0".into(), centerline: main0 },
        Lane { name: "main1".into(), centerline: main1 },
        Lane { name: "ramp".into(), centerline: ramp },
    ];
    let world = RoadWorld {
        kind: ScenarioKind::Merging,
        lane_width: LANE_WIDTH,
        v_limit: 14.0,
        lanes,
        goal: Polygon::rect(110.0, -LANE_WIDTH / 2.0, 160.0, 1.5 * LANE_WIDTH),
        spawn_zones: vec![
            SpawnZone { role: SpawnRole::Ego, lane: 2, s_min: 0.0, s_max: 5.0 },
            SpawnZone { role: SpawnRole::Sv, lane: 0, s_min: 0.0, s_max: 120.0 },
            SpawnZone { role: SpawnRole::Sv, lane: 1, s_min: 0.0, s_max: 120.0 },
        ],
        graph,
    };
    Scenario {
        name: "merging".into(),
        task_set: TaskSet::new(density_labels(), speed_modes().iter().map(|m| m.label.clone()).collect()),
        density_counts: vec![0, 2, 4, 6],
        speed_modes: speed_modes(),
        worlds: vec![Arc::new(world)],
        sim: SimParams::default(),
    }
}

fn arc(center: Vec2, radius: f64, a0: f64, a1: f64, n: usize) -> Vec<Vec2> {
    (0..=n)
        .map(|k| {
            let a = a0 + (a1 - a0) * k as f64 / n as f64;
            Vec2::new(center.x + radius * libm::cos(a), center.y + radius * libm::sin(a))
        })
        .collect()
}

/// Route through the four-way intersection centred at the origin. `from` and
/// `to` are approach headings: 0 = from the south heading north, rotating
/// counter-clockwise in quarter turns. `turn` is -1 right, 0 straight, +1 left.
fn intersection_path(from: usize, turn: i32, arm: f64) -> Polyline {
    let h = LANE_WIDTH / 2.0;
    let stop = LANE_WIDTH * 2.0;
    // path for an approach from the south (heading +y), rotated afterwards
    let mut pts = vec![Vec2::new(h, -arm), Vec2::new(h, -stop)];
    match turn {
        0 => pts.push(Vec2::new(h, arm)),
        1 => {
            let c = Vec2::new(-stop, -stop);
            pts.extend(arc(c, stop + h, 0.0, FRAC_PI_2, 12).into_iter().skip(1));
            pts.push(Vec2::new(-arm, h));
        }
        _ => {
            let c = Vec2::new(stop, -stop);
            pts.extend(arc(c, stop - h, PI, FRAC_PI_2, 8).into_iter().skip(1));
            pts.push(Vec2::new(arm, -h));
        }
    }
    let rot = from as f64 * FRAC_PI_2;
    let (s, c) = (libm::sin(rot), libm::cos(rot));
    Polyline::new(pts.into_iter().map(|p| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y)).collect())
}

/// Unsignalized four-way intersection; the level-2 index selects the ego's
/// manoeuvre (0 right turn, 1 straight, 2 left turn).
pub fn intersection() -> Scenario {
    let arm = 60.0;
    let mut lanes = Vec::new();
    for from in 0..4 {
        for (turn, tag) in [(-1, "right"), (0, "straight"), (1, "left")] {
            lanes.push(Lane { name: format!("arm{from}_{tag}"), centerline: intersection_path(from, turn, arm) });
        }
    }
    let h = LANE_WIDTH / 2.0;
    let variants = [
        (ScenarioKind::IntersectionRight, 0usize, Polygon::rect(25.0, -h - 1.75, 45.0, -h + 1.75)),
        (ScenarioKind::IntersectionStraight, 1usize, Polygon::rect(h - 1.75, 25.0, h + 1.75, 45.0)),
        (ScenarioKind::IntersectionLeft, 2usize, Polygon::rect(-45.0, h - 1.75, -25.0, h + 1.75)),
    ];
    let worlds = variants
        .into_iter()
        .map(|(kind, ego_lane, goal)| {
            let mut graph = WaypointGraph::default();
            for l in 0..3 {
                graph.add_chain(&lanes[l].centerline, WP_SPACING);
            }
            let mut zones = vec![SpawnZone { role: SpawnRole::Ego, lane: ego_lane, s_min: 18.0, s_max: 24.0 }];
            for lane in 3..lanes.len() {
                zones.push(SpawnZone { role: SpawnRole::Sv, lane, s_min: 5.0, s_max: 40.0 });
            }
            Arc::new(RoadWorld { kind, lane_width: LANE_WIDTH, v_limit: 10.0, lanes: lanes.clone(), goal, spawn_zones: zones, graph })
        })
        .collect();
    Scenario {
        name: "intersection".into(),
        task_set: TaskSet::new(density_labels(), ["right", "straight", "left"].iter().map(|s| s.to_string()).collect()),
        density_counts: vec![0, 2, 4, 6],
        speed_modes: vec![SpeedMode { label: "mixed".into(), lo: 0.4, hi: 0.9 }],
        worlds,
        sim: SimParams::default(),
    }
}
