//! Allocation-only core of the orchestrate-generate-reflect trainer.
//!
//! Everything in this crate is pure computation: the traffic simulator, the
//! action executor, the reward-program language, curricula, the PPO learner,
//! prompt assembly and response parsing for the generative agents, and the
//! training driver that ties a reward program and a curriculum to a policy.
//! File formats, persistence, backends that talk to the network and the
//! stage loop live in the `ogr` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod agents;
pub mod blocks;
pub mod curriculum;
pub mod executor;
pub mod geom;
pub mod rewardlang;
pub mod rl;
pub mod rng;
pub mod sim;
pub mod train;

pub use curriculum::{CurriculumSpec, TaskId, TaskSet};
pub use executor::{ActionTriple, ControlCommand, ControllerParams, TrackingTarget};
pub use rewardlang::{ObservationRegistry, RewardProgram};
pub use sim::{EpisodeState, ObservationMatrix, RoadWorld, Scenario, StateMatrix, VehicleState};
