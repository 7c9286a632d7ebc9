//! Turns a multi-discrete policy action into a tracking target and then into
//! steering and acceleration with pure pursuit and a proportional speed law.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Pose, Vec2};
use crate::sim::{VehicleState, Waypoint};

pub const N_WAYPOINT_CHOICES: usize = 5;
pub const N_SPEED_CHOICES: usize = 5;
pub const N_LANE_CHOICES: usize = 3;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ExecError {
    #[error("action index out of range: {0:?}")]
    OutOfRange([usize; 3]),
    #[error("tracking target coincides with the ego position")]
    DegenerateTarget { fallback: ControlCommand },
}

/// Policy action: waypoint index, reference-speed index, lane decision index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionTriple {
    pub waypoint: u8,
    pub speed: u8,
    pub lane: u8,
}

impl ActionTriple {
    pub fn new(waypoint: usize, speed: usize, lane: usize) -> Result<Self, ExecError> {
        if waypoint >= N_WAYPOINT_CHOICES || speed >= N_SPEED_CHOICES || lane >= N_LANE_CHOICES {
            return Err(ExecError::OutOfRange([waypoint, speed, lane]));
        }
        Ok(Self { waypoint: waypoint as u8, speed: speed as u8, lane: lane as u8 })
    }

    pub fn indices(&self) -> [usize; 3] {
        [self.waypoint as usize, self.speed as usize, self.lane as usize]
    }

    /// -1 left, 0 keep, +1 right.
    pub fn lane_shift(&self) -> i8 {
        self.lane as i8 - 1
    }

    /// All 75 valid actions in lexicographic order.
    pub fn all() -> impl Iterator<Item = ActionTriple> {
        (0..N_WAYPOINT_CHOICES)
            .flat_map(|w| (0..N_SPEED_CHOICES).flat_map(move |s| (0..N_LANE_CHOICES).map(move |l| ActionTriple::new(w, s, l).unwrap())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingTarget {
    pub waypoint: Waypoint,
    pub v_ref: f64,
    pub lane_shift: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub steering: f64,
    pub acceleration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerParams {
    pub wheelbase: f64,
    pub min_lookahead: f64,
    pub lookahead_gain: f64,
    pub speed_gain: f64,
    pub steer_max: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    pub lane_width: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            min_lookahead: 2.0,
            lookahead_gain: 0.5,
            speed_gain: 1.0,
            steer_max: 0.6,
            accel_min: -6.0,
            accel_max: 3.0,
            lane_width: 3.5,
        }
    }
}

/// Decodes an action against the five nearest route waypoints.
///
/// A lane decision shifts the selected waypoint sideways by one lane width,
/// left for -1 and right for +1 relative to the waypoint heading.
pub fn decode(a: ActionTriple, wps: &[Waypoint; 5], v_limit: f64, lane_width: f64) -> TrackingTarget {
    let wp = wps[a.waypoint as usize];
    let shift = a.lane_shift();
    let left = Vec2::new(-libm::sin(wp.psi), libm::cos(wp.psi));
    let off = left.scale(-(shift as f64) * lane_width);
    TrackingTarget {
        waypoint: Pose { x: wp.x + off.x, y: wp.y + off.y, psi: wp.psi },
        v_ref: a.speed as f64 * v_limit / 4.0,
        lane_shift: shift,
    }
}

fn speed_law(v: f64, v_ref: f64, p: &ControllerParams) -> f64 {
    (p.speed_gain * (v_ref - v)).clamp(p.accel_min, p.accel_max)
}

/// Pure pursuit toward the target's reference line plus proportional speed control.
///
/// The aim point is where the line through the target waypoint along its
/// heading meets the lookahead circle, `max(min_lookahead, gain * v)` around
/// the ego; when the line lies outside the circle the aim point is the foot of
/// the perpendicular advanced by one lookahead along the line.
pub fn pure_pursuit(state: &VehicleState, target: &TrackingTarget, p: &ControllerParams) -> Result<ControlCommand, ExecError> {
    let accel = speed_law(state.v, target.v_ref, p);
    let ego = Vec2::new(state.x, state.y);
    let tp = target.waypoint.pos();
    if tp.dist(ego) < 1e-6 {
        return Err(ExecError::DegenerateTarget { fallback: ControlCommand { steering: 0.0, acceleration: accel } });
    }
    let lookahead = p.min_lookahead.max(p.lookahead_gain * state.v);
    let dir = Vec2::from_heading(target.waypoint.psi);
    let foot = tp.add(dir.scale(ego.sub(tp).dot(dir)));
    let d = foot.dist(ego);
    let aim = if d < lookahead { foot.add(dir.scale(libm::sqrt(lookahead * lookahead - d * d))) } else { foot.add(dir.scale(lookahead)) };
    let local = aim.sub(ego).rotate_into(state.psi);
    let dist = local.norm().max(1e-9);
    let sin_alpha = local.y / dist;
    let steering = libm::atan(2.0 * p.wheelbase * sin_alpha / dist).clamp(-p.steer_max, p.steer_max);
    Ok(ControlCommand { steering, acceleration: accel })
}

/// `pure_pursuit`, falling back to the speed-law-only command on a degenerate target.
pub fn control(state: &VehicleState, target: &TrackingTarget, p: &ControllerParams) -> ControlCommand {
    match pure_pursuit(state, target, p) {
        Ok(c) => c,
        Err(ExecError::DegenerateTarget { fallback }) => fallback,
        Err(ExecError::OutOfRange(_)) => unreachable!(),
    }
}
