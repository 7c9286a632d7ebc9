use alloc::sync::Arc;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::scenarios::{SimParams, SpeedMode};
use super::traffic::{idm_accel, Style};
use super::vars::{var, N_VARS};
use super::world::{RoadWorld, SpawnRole, Waypoint};
use super::{SimError, N_OBS_MAX, N_SV_MAX, SENTINEL_ROW};
use crate::curriculum::TaskId;
use crate::executor::{ControlCommand, TrackingTarget};
use crate::geom::{wrap_angle, OrientedRect, Polyline, Pose, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub psi: f64,
}

impl VehicleState {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
    pub fn pose(&self) -> Pose {
        Pose { x: self.x, y: self.y, psi: self.psi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SvSlot {
    pub state: VehicleState,
    pub valid: bool,
}

/// Ground-truth kinematic state. Valid surrounding-vehicle slots form a prefix;
/// the rest hold the zero state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateMatrix {
    pub ego: VehicleState,
    pub svs: [SvSlot; N_SV_MAX],
}

impl StateMatrix {
    pub fn valid_svs(&self) -> impl Iterator<Item = &VehicleState> {
        self.svs.iter().filter(|s| s.valid).map(|s| &s.state)
    }
    pub fn n_valid(&self) -> usize {
        self.svs.iter().filter(|s| s.valid).count()
    }
}

/// Policy input: row 0 is the ego relative to its target pose, rows 1.. the
/// nearest surrounding vehicles relative to the ego, all in the ego body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationMatrix {
    pub rows: [[f64; 4]; N_OBS_MAX + 1],
}

impl ObservationMatrix {
    pub const LEN: usize = 4 * (N_OBS_MAX + 1);

    pub fn flatten(&self) -> [f64; Self::LEN] {
        let mut out = [0.0; Self::LEN];
        for (i, r) in self.rows.iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(r);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Success,
    Collision,
    Timeout,
}

/// Scripted surrounding vehicle following a lane centreline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvAgent {
    pub lane: usize,
    pub s: f64,
    pub v_desired: f64,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub status: Status,
    /// Values of every catalogued variable, indexed per `vars::var`.
    pub vars: [f64; N_VARS],
}

/// One serialisable line of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub status: Status,
    pub ego: VehicleState,
    pub svs: Vec<VehicleState>,
    pub command: ControlCommand,
}

#[derive(Debug, Clone)]
pub struct EpisodeState {
    world: Arc<RoadWorld>,
    params: SimParams,
    task: TaskId,
    state: StateMatrix,
    agents: Vec<SvAgent>,
    step: u32,
    route: Vec<Waypoint>,
    route_line: Polyline,
    route_s: f64,
    target: Pose,
    lane_shift: i8,
    last_command: ControlCommand,
    status: Status,
}

fn footprint(v: &VehicleState, p: &SimParams, margin: f64) -> OrientedRect {
    OrientedRect {
        center: v.pos(),
        heading: v.psi,
        half_length: p.vehicle_length / 2.0 + margin,
        half_width: p.vehicle_width / 2.0 + margin,
    }
}

impl EpisodeState {
    /// Random episode for `task` on `world`. SV count and speeds come from the
    /// caller (the scenario resolves them from the task indices).
    pub(crate) fn spawn(
        world: Arc<RoadWorld>,
        params: SimParams,
        task: TaskId,
        n_svs: usize,
        speed: &SpeedMode,
        seed: u64,
    ) -> Result<Self, SimError> {
        if n_svs > N_SV_MAX {
            return Err(SimError::InvalidWorld("density band exceeds state capacity"));
        }
        let mut rng = crate::rng::rng(seed);
        let ego_zones: Vec<_> = world.zones(SpawnRole::Ego).collect();
        if ego_zones.is_empty() {
            return Err(SimError::InvalidWorld("no ego spawn zone"));
        }
        let zone = ego_zones[rng.gen_range(0..ego_zones.len())];
        let s = rng.gen_range(zone.s_min..=zone.s_max);
        let pose = world.lanes[zone.lane].centerline.pose_at(s);
        let v0 = world.v_limit * rng.gen_range(0.3..=0.6);
        let ego = VehicleState { x: pose.x, y: pose.y, v: v0, psi: pose.psi };
        let route = world.plan_from(zone)?;

        let sv_zones: Vec<_> = world.zones(SpawnRole::Sv).collect();
        if n_svs > 0 && sv_zones.is_empty() {
            return Err(SimError::InvalidWorld("no surrounding-vehicle spawn zone"));
        }
        let mut placed: Vec<VehicleState> = Vec::with_capacity(n_svs);
        let mut agents = Vec::with_capacity(n_svs);
        for k in 0..n_svs {
            let mut ok = None;
            for _ in 0..params.spawn_attempts {
                let z = sv_zones[rng.gen_range(0..sv_zones.len())];
                let s = rng.gen_range(z.s_min..=z.s_max);
                let p = world.lanes[z.lane].centerline.pose_at(s);
                let cand = VehicleState { x: p.x, y: p.y, v: 0.0, psi: p.psi };
                let fp = footprint(&cand, &params, params.spawn_clearance);
                let clear = !fp.overlaps(&footprint(&ego, &params, params.spawn_clearance))
                    && placed.iter().all(|o| !fp.overlaps(&footprint(o, &params, params.spawn_clearance)));
                if clear {
                    ok = Some((z.lane, s, cand));
                    break;
                }
            }
            let (lane, s, mut st) = ok.ok_or(SimError::SpawnFailure { vehicle: k, attempts: params.spawn_attempts })?;
            let style = Style::ALL[rng.gen_range(0..3)];
            let v_desired = (world.v_limit * rng.gen_range(speed.lo..=speed.hi) * style.params().speed_factor).min(1.1 * world.v_limit);
            st.v = v_desired * rng.gen_range(0.8..=1.0);
            placed.push(st);
            agents.push(SvAgent { lane, s, v_desired, style });
        }
        let mut state = StateMatrix { ego, ..Default::default() };
        for (slot, st) in state.svs.iter_mut().zip(&placed) {
            *slot = SvSlot { state: *st, valid: true };
        }
        Ok(Self::assemble(world, params, task, state, agents, route))
    }

    /// Episode with explicitly placed vehicles; the route is planned from the
    /// first ego spawn zone. Each SV is given as (agent, initial speed).
    pub fn custom(world: Arc<RoadWorld>, params: SimParams, ego: VehicleState, svs: &[(SvAgent, f64)]) -> Result<Self, SimError> {
        if svs.len() > N_SV_MAX {
            return Err(SimError::InvalidWorld("too many surrounding vehicles"));
        }
        let route = super::world::plan_reference(&world)?;
        let mut state = StateMatrix { ego, ..Default::default() };
        for (slot, (a, v)) in state.svs.iter_mut().zip(svs) {
            let p = world.lanes[a.lane].centerline.pose_at(a.s);
            *slot = SvSlot { state: VehicleState { x: p.x, y: p.y, v: *v, psi: p.psi }, valid: true };
        }
        let agents = svs.iter().map(|(a, _)| *a).collect();
        Ok(Self::assemble(world, params, TaskId::new(0, 0), state, agents, route))
    }

    fn assemble(
        world: Arc<RoadWorld>,
        params: SimParams,
        task: TaskId,
        state: StateMatrix,
        agents: Vec<SvAgent>,
        route: Vec<Waypoint>,
    ) -> Self {
        let route_line = Polyline::new(route.iter().map(|w| w.pos()).collect());
        let (route_s, _) = route_line.project(state.ego.pos());
        let mut ep = EpisodeState {
            world,
            params,
            task,
            state,
            agents,
            step: 0,
            route,
            route_line,
            route_s,
            target: Pose::default(),
            lane_shift: 0,
            last_command: ControlCommand::default(),
            status: Status::Running,
        };
        if let Ok(w) = ep.nearest_waypoints() {
            ep.target = w[0];
        }
        ep
    }

    pub fn world(&self) -> &Arc<RoadWorld> {
        &self.world
    }
    pub fn params(&self) -> &SimParams {
        &self.params
    }
    pub fn task(&self) -> TaskId {
        self.task
    }
    pub fn state(&self) -> &StateMatrix {
        &self.state
    }
    pub fn agents(&self) -> &[SvAgent] {
        &self.agents
    }
    pub fn step_count(&self) -> u32 {
        self.step
    }
    pub fn max_steps(&self) -> u32 {
        self.params.max_steps
    }
    pub fn status(&self) -> Status {
        self.status
    }
    pub fn route(&self) -> &[Waypoint] {
        &self.route
    }
    pub fn target(&self) -> Pose {
        self.target
    }

    /// Sets the pose the ego is currently tracking; row 0 of the observation is
    /// measured against it.
    pub fn set_target(&mut self, t: &TrackingTarget) {
        self.target = t.waypoint;
        self.lane_shift = t.lane_shift;
    }

    pub fn record(&self) -> StepRecord {
        StepRecord {
            step: self.step,
            status: self.status,
            ego: self.state.ego,
            svs: self.state.valid_svs().copied().collect(),
            command: self.last_command,
        }
    }

    /// Five route waypoints nearest the ego, nearest first, ties to the lower
    /// route index. Waypoints already passed along the route are skipped, except
    /// that the last five always remain candidates.
    pub fn nearest_waypoints(&self) -> Result<[Waypoint; 5], SimError> {
        let n = self.route.len();
        if n < 5 {
            return Err(SimError::RouteTooShort(n));
        }
        let (s_ego, _) = self.route_line.project(self.state.ego.pos());
        let mut acc = 0.0;
        let mut passed = 0;
        for i in 0..n {
            if i > 0 {
                acc += self.route[i].pos().dist(self.route[i - 1].pos());
            }
            if acc < s_ego {
                passed = i + 1;
            } else {
                break;
            }
        }
        let start = passed.min(n - 5);
        let ego = self.state.ego.pos();
        let mut idx: Vec<usize> = (start..n).collect();
        idx.sort_by(|&a, &b| self.route[a].pos().dist(ego).total_cmp(&self.route[b].pos().dist(ego)).then(a.cmp(&b)));
        Ok(core::array::from_fn(|k| self.route[idx[k]]))
    }

    pub fn observe(&self) -> ObservationMatrix {
        let ego = &self.state.ego;
        let mut rows = [SENTINEL_ROW; N_OBS_MAX + 1];
        let rel = self.target.pos().sub(ego.pos()).rotate_into(ego.psi);
        rows[0] = [rel.x, rel.y, ego.v, wrap_angle(self.target.psi - ego.psi)];
        let mut svs: Vec<(f64, usize)> =
            self.state.svs.iter().enumerate().filter(|(_, s)| s.valid).map(|(i, s)| (s.state.pos().dist(ego.pos()), i)).collect();
        svs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (row, (_, i)) in rows[1..].iter_mut().zip(svs) {
            let sv = &self.state.svs[i].state;
            let d = sv.pos().sub(ego.pos()).rotate_into(ego.psi);
            *row = [d.x, d.y, sv.v - ego.v, wrap_angle(sv.psi - ego.psi)];
        }
        ObservationMatrix { rows }
    }

    fn leader_of(&self, i: usize) -> Option<(f64, f64)> {
        let a = &self.agents[i];
        let me = &self.state.svs[i].state;
        let lane = &self.world.lanes[a.lane].centerline;
        let aware = a.style.params().lateral_awareness;
        let mut best: Option<(f64, f64)> = None;
        let others = core::iter::once(&self.state.ego)
            .chain(self.state.svs.iter().enumerate().filter(|(j, s)| *j != i && s.valid).map(|(_, s)| &s.state));
        for o in others {
            let (s, lat) = lane.project(o.pos());
            let ds = s - a.s;
            if ds <= 0.0 || ds > 80.0 || libm::fabs(lat) > aware {
                continue;
            }
            let gap = ds - self.params.vehicle_length;
            let closing = me.v - o.v * libm::cos(o.psi - me.psi);
            if best.map_or(true, |(g, _)| gap < g) {
                best = Some((gap, closing));
            }
        }
        best
    }

    fn front_vehicle(&self) -> (f64, f64) {
        let ego = &self.state.ego;
        let mut gap_min: f64 = 100.0;
        let mut ttc_min: f64 = 10.0;
        for sv in self.state.valid_svs() {
            let d = sv.pos().sub(ego.pos()).rotate_into(ego.psi);
            if d.x <= 0.0 || libm::fabs(d.y) > 2.0 {
                continue;
            }
            let gap = (d.x - self.params.vehicle_length).max(0.0);
            gap_min = gap_min.min(gap);
            let closing = ego.v - sv.v * libm::cos(sv.psi - ego.psi);
            if closing > 1e-6 {
                ttc_min = ttc_min.min(gap / closing);
            }
        }
        (gap_min, ttc_min)
    }

    /// Advances one time step under `cmd`.
    pub fn step(&mut self, cmd: &ControlCommand, dt: f64) -> Result<StepInfo, SimError> {
        if self.status != Status::Running {
            return Err(SimError::SteppedTerminalEpisode);
        }
        if !(dt > 0.0) {
            return Err(SimError::BadTimeStep);
        }
        let accels: Vec<f64> = (0..self.agents.len())
            .map(|i| {
                let a = &self.agents[i];
                let p = a.style.params();
                idm_accel(&p, self.state.svs[i].state.v, a.v_desired, self.leader_of(i))
            })
            .collect();
        for (i, acc) in accels.into_iter().enumerate() {
            let a = &mut self.agents[i];
            let slot = &mut self.state.svs[i];
            a.s += slot.state.v * dt;
            slot.state.v = (slot.state.v + acc * dt).max(0.0);
            let p = self.world.lanes[a.lane].centerline.pose_at(a.s);
            slot.state.x = p.x;
            slot.state.y = p.y;
            slot.state.psi = p.psi;
        }

        let e = &mut self.state.ego;
        let (c, s) = (libm::cos(e.psi), libm::sin(e.psi));
        e.x += e.v * c * dt;
        e.y += e.v * s * dt;
        e.psi = wrap_angle(e.psi + e.v / self.params.wheelbase * libm::tan(cmd.steering) * dt);
        e.v = (e.v + cmd.acceleration * dt).max(0.0);
        self.step += 1;
        self.last_command = *cmd;

        let ego = self.state.ego;
        let ego_fp = footprint(&ego, &self.params, 0.0);
        let hit = self.state.valid_svs().any(|sv| ego_fp.overlaps(&footprint(sv, &self.params, 0.0)));
        let offroad = self.world.distance_to_road(ego.pos()) > self.params.offroad_distance;
        self.status = if hit || offroad {
            Status::Collision
        } else if self.world.goal.contains(ego.pos()) {
            Status::Success
        } else if self.step >= self.params.max_steps {
            Status::Timeout
        } else {
            Status::Running
        };

        let (s_new, lat) = self.route_line.project(ego.pos());
        let delta_s = s_new - self.route_s;
        self.route_s = s_new;
        let tangent = self.route_line.pose_at(s_new.clamp(0.0, self.route_line.length())).psi;
        let (gap, ttc) = self.front_vehicle();
        let nearest = self.state.valid_svs().map(|sv| sv.pos().dist(ego.pos())).fold(100.0, f64::min);
        let flag = |b: bool| if b { 1.0 } else { 0.0 };

        let mut vars = [0.0; N_VARS];
        vars[var::SPEED] = ego.v;
        vars[var::DELTA_S] = delta_s;
        vars[var::DY] = lat;
        vars[var::DPSI] = wrap_angle(ego.psi - tangent);
        vars[var::DIST_NEAREST_SV] = nearest;
        vars[var::COLLISION_FLAG] = flag(self.status == Status::Collision);
        vars[var::SUCCESS_FLAG] = flag(self.status == Status::Success);
        vars[var::TIMEOUT_FLAG] = flag(self.status == Status::Timeout);
        vars[var::STEP_FRACTION] = self.step as f64 / self.params.max_steps as f64;
        vars[var::TTC_FRONT] = ttc;
        vars[var::GAP_FRONT] = gap;
        vars[var::ACCEL] = cmd.acceleration;
        vars[var::STEERING] = cmd.steering;
        vars[var::SPEED_EXCESS] = (ego.v - self.world.v_limit).max(0.0);
        vars[var::DIST_TO_GOAL] = (self.route_line.length() - s_new).max(0.0);
        vars[var::LANE_SHIFT] = libm::fabs(self.lane_shift as f64);
        debug_assert!(vars.iter().all(|v| v.is_finite()));
        Ok(StepInfo { status: self.status, vars })
    }
}
