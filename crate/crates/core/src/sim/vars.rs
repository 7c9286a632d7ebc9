//! Scalar observation variables a reward program may reference.
//!
//! The simulator computes every catalogued variable each step; the reward
//! registry decides which of them a program is allowed to see.

/// (name, unit, description)
pub struct VarSpec {
    pub name: &'static str,
    pub unit: &'static str,
    pub description: &'static str,
}

macro_rules! catalog {
    ($($idx:ident = $name:literal, $unit:literal, $desc:literal;)*) => {
        pub mod var {
            catalog!(@idx 0usize, $($idx,)*);
        }
        pub const CATALOG: &[VarSpec] = &[$(VarSpec { name: $name, unit: $unit, description: $desc }),*];
    };
    (@idx $n:expr, $head:ident, $($rest:ident,)*) => {
        pub const $head: usize = $n;
        catalog!(@idx $n + 1usize, $($rest,)*);
    };
    (@idx $n:expr,) => {};
}

catalog! {
    SPEED = "speed", "m/s", "ego speed";
    DELTA_S = "delta_s", "m", "progress along the reference route during this step";
    DY = "dy", "m", "signed lateral deviation from the reference route (left positive)";
    DPSI = "dpsi", "rad", "heading deviation from the route tangent";
    DIST_NEAREST_SV = "dist_nearest_sv", "m", "centre distance to the nearest surrounding vehicle, capped at 100";
    COLLISION_FLAG = "collision_flag", "1", "1 on the step the ego collides or leaves the road, else 0";
    SUCCESS_FLAG = "success_flag", "1", "1 on the step the ego enters the goal region, else 0";
    TIMEOUT_FLAG = "timeout_flag", "1", "1 on the step the episode times out, else 0";
    STEP_FRACTION = "step_fraction", "1", "elapsed steps divided by the step limit";
    TTC_FRONT = "ttc_front", "s", "time to collision with the nearest vehicle ahead in the ego corridor, capped at 10";
    GAP_FRONT = "gap_front", "m", "bumper gap to the nearest vehicle ahead in the ego corridor, capped at 100";
    ACCEL = "accel", "m/s^2", "commanded ego acceleration";
    STEERING = "steering", "rad", "commanded ego steering angle";
    SPEED_EXCESS = "speed_excess", "m/s", "amount by which ego speed exceeds the speed limit";
    DIST_TO_GOAL = "dist_to_goal", "m", "remaining length of the reference route";
    LANE_SHIFT = "lane_shift", "1", "absolute lane-change decision of the last action";
}

pub const N_VARS: usize = CATALOG.len();

/// Index of `name` in the catalog.
pub fn lookup(name: &str) -> Option<usize> {
    CATALOG.iter().position(|v| v.name == name)
}

/// Variables present in the initial, expert-seeded registry.
pub const INITIAL: &[&str] =
    &["speed", "delta_s", "dy", "dpsi", "dist_nearest_sv", "collision_flag", "success_flag", "timeout_flag", "step_fraction"];
