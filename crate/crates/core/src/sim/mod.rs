//! Deterministic 2D kinematic traffic simulator.

mod episode;
pub mod scenarios;
pub mod traffic;
pub mod vars;
mod world;

pub use episode::{EpisodeState, ObservationMatrix, StateMatrix, Status, StepInfo, StepRecord, SvAgent, SvSlot, VehicleState};
pub use scenarios::{Scenario, SimParams, SpeedMode};
pub use world::{plan_reference, Edge, Lane, RoadWorld, ScenarioKind, SpawnRole, SpawnZone, Waypoint, WaypointGraph};

use thiserror::Error;

/// Capacity of the state matrix; at least the largest density band.
pub const N_SV_MAX: usize = 8;
/// Number of surrounding vehicles visible to the policy.
pub const N_OBS_MAX: usize = 4;
/// Row used for absent vehicles in the observation matrix.
pub const SENTINEL_ROW: [f64; 4] = [1e3, 1e3, 0.0, 0.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no route from the ego spawn zone to the goal region")]
    NoRoute,
    #[error("malformed waypoint graph: {0}")]
    MalformedGraph(&'static str),
    #[error("invalid world: {0}")]
    InvalidWorld(&'static str),
    #[error("route has {0} waypoints, need at least 5")]
    RouteTooShort(usize),
    #[error("could not place vehicle {vehicle} without overlap after {attempts} attempts")]
    SpawnFailure { vehicle: usize, attempts: usize },
    #[error("task ({0}, {1}) outside the scenario task set")]
    TaskOutOfRange(usize, usize),
    #[error("episode already terminated")]
    SteppedTerminalEpisode,
    #[error("time step must be positive")]
    BadTimeStep,
}
