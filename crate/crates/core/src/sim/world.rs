use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geom::{Polygon, Polyline, Pose, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Overtaking,
    Merging,
    IntersectionLeft,
    IntersectionStraight,
    IntersectionRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpawnRole {
    Ego,
    Sv,
}

/// Arc-length interval on one lane where vehicles of `role` may be placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnZone {
    pub role: SpawnRole,
    pub lane: usize,
    pub s_min: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub name: String,
    pub centerline: Polyline,
}

/// A reference pose on the road map.
pub type Waypoint = Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaypointGraph {
    pub nodes: Vec<Waypoint>,
    pub edges: Vec<Edge>,
}

impl WaypointGraph {
    pub fn add_node(&mut self, w: Waypoint) -> usize {
        self.nodes.push(w);
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cost: f64) {
        self.edges.push(Edge { from, to, cost });
    }

    /// Adds `from -> to` weighted by Euclidean length times `factor`.
    pub fn connect(&mut self, from: usize, to: usize, factor: f64) {
        let c = self.nodes[from].pos().dist(self.nodes[to].pos()) * factor;
        self.add_edge(from, to, c);
    }

    /// Adds a chain of nodes sampled every `spacing` metres along `line`,
    /// reusing any existing node within 0.5 m. Returns the chain's node ids.
    pub fn add_chain(&mut self, line: &Polyline, spacing: f64) -> Vec<usize> {
        let len = line.length();
        let n = libm::ceil(len / spacing - 1e-9) as usize;
        let mut ids = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s = (k as f64 * spacing).min(len);
            let p = line.pose_at(s);
            let id = match self.nodes.iter().position(|q| q.pos().dist(p.pos()) < 0.5) {
                Some(id) => id,
                None => self.add_node(p),
            };
            if ids.last() != Some(&id) {
                if let Some(&prev) = ids.last() {
                    if !self.edges.iter().any(|e| e.from == prev && e.to == id) {
                        self.connect(prev, id, 1.0);
                    }
                }
                ids.push(id);
            }
        }
        ids
    }

    pub fn nearest_node(&self, p: Vec2) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.pos().dist(p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = alloc::vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push((e.to, e.cost));
        }
        adj
    }

    fn well_formed(&self) -> Result<(), SimError> {
        for e in &self.edges {
            if e.from >= self.nodes.len() || e.to >= self.nodes.len() {
                return Err(SimError::MalformedGraph("edge endpoint out of range"));
            }
            if !(e.cost >= 0.0) || !e.cost.is_finite() {
                return Err(SimError::MalformedGraph("edge cost must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// Minimal-cost path from `start` to any node satisfying `is_goal`.
    ///
    /// The heuristic is the straight-line distance to the nearest goal node,
    /// scaled by the smallest cost-per-metre ratio found on any edge so that it
    /// never overestimates, whatever costs the graph carries.
    pub fn shortest_path(&self, start: usize, is_goal: impl Fn(usize) -> bool) -> Result<(Vec<usize>, f64), SimError> {
        self.well_formed()?;
        if start >= self.nodes.len() {
            return Err(SimError::NoRoute);
        }
        let goals: Vec<usize> = (0..self.nodes.len()).filter(|&i| is_goal(i)).collect();
        if goals.is_empty() {
            return Err(SimError::NoRoute);
        }
        let mut ratio: f64 = 1.0;
        for e in &self.edges {
            let len = self.nodes[e.from].pos().dist(self.nodes[e.to].pos());
            if len > 1e-12 {
                ratio = ratio.min(e.cost / len);
            } else {
                ratio = ratio.min(0.0);
            }
        }
        let ratio = ratio.max(0.0);
        let h = |i: usize| -> f64 {
            let p = self.nodes[i].pos();
            goals.iter().map(|&g| self.nodes[g].pos().dist(p)).fold(f64::INFINITY, f64::min) * ratio
        };

        let adj = self.adjacency();
        let n = self.nodes.len();
        let mut g = alloc::vec![f64::INFINITY; n];
        let mut parent = alloc::vec![usize::MAX; n];
        let mut closed = alloc::vec![false; n];
        let mut open = BinaryHeap::new();
        g[start] = 0.0;
        open.push(Open { f: h(start), g: 0.0, node: start });
        while let Some(Open { node, g: gn, .. }) = open.pop() {
            if closed[node] || gn > g[node] {
                continue;
            }
            if is_goal(node) {
                let mut path = alloc::vec![node];
                let mut cur = node;
                while parent[cur] != usize::MAX {
                    cur = parent[cur];
                    path.push(cur);
                }
                path.reverse();
                return Ok((path, gn));
            }
            closed[node] = true;
            for &(next, c) in &adj[node] {
                let cand = gn + c;
                if cand < g[next] {
                    g[next] = cand;
                    parent[next] = node;
                    open.push(Open { f: cand + h(next), g: cand, node: next });
                }
            }
        }
        Err(SimError::NoRoute)
    }
}

struct Open {
    f: f64,
    g: f64,
    node: usize,
}

impl PartialEq for Open {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Open {
    // min-heap on f, then prefer deeper g, then lower node id
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| self.g.total_cmp(&o.g)).then_with(|| o.node.cmp(&self.node))
    }
}

/// Static road map of one scenario variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadWorld {
    pub kind: ScenarioKind,
    pub lane_width: f64,
    pub v_limit: f64,
    pub lanes: Vec<Lane>,
    pub goal: Polygon,
    pub spawn_zones: Vec<SpawnZone>,
    pub graph: WaypointGraph,
}

impl RoadWorld {
    pub fn zones(&self, role: SpawnRole) -> impl Iterator<Item = &SpawnZone> {
        self.spawn_zones.iter().filter(move |z| z.role == role)
    }

    pub fn zone_start(&self, z: &SpawnZone) -> Pose {
        self.lanes[z.lane].centerline.pose_at(z.s_min)
    }

    /// Checks the structural invariants: positive speed limit, valid lane
    /// references, and a route from every ego spawn zone to the goal region.
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.v_limit > 0.0) {
            return Err(SimError::InvalidWorld("v_limit must be positive"));
        }
        if self.lanes.iter().any(|l| l.centerline.points.len() < 2) {
            return Err(SimError::InvalidWorld("lane centerline needs at least two points"));
        }
        for z in &self.spawn_zones {
            if z.lane >= self.lanes.len() || !(z.s_min <= z.s_max) {
                return Err(SimError::InvalidWorld("bad spawn zone"));
            }
        }
        if self.zones(SpawnRole::Ego).next().is_none() {
            return Err(SimError::InvalidWorld("no ego spawn zone"));
        }
        for z in self.zones(SpawnRole::Ego) {
            let r = self.plan_from(z)?;
            if r.len() < 5 {
                return Err(SimError::RouteTooShort(r.len()));
            }
        }
        Ok(())
    }

    /// Reference route from the start of spawn zone `z` into the goal region.
    pub fn plan_from(&self, z: &SpawnZone) -> Result<Vec<Waypoint>, SimError> {
        let start = self.graph.nearest_node(self.zone_start(z).pos()).ok_or(SimError::NoRoute)?;
        let (path, _) = self.graph.shortest_path(start, |i| self.goal.contains(self.graph.nodes[i].pos()))?;
        Ok(path.into_iter().map(|i| self.graph.nodes[i]).collect())
    }

    /// Distance from `p` to the nearest lane centerline.
    pub fn distance_to_road(&self, p: Vec2) -> f64 {
        self.lanes.iter().map(|l| l.centerline.distance(p)).fold(f64::INFINITY, f64::min)
    }
}

/// Reference route from the first ego spawn zone to the goal region.
pub fn plan_reference(world: &RoadWorld) -> Result<Vec<Waypoint>, SimError> {
    let z = world.zones(SpawnRole::Ego).next().ok_or(SimError::NoRoute)?;
    world.plan_from(z)
}
