//! Run driver for the staged reward and curriculum design loop: the
//! persistent memory log, run configuration, agent backends, checkpoints,
//! the human review queue and the stage machine.

pub mod backends;
pub mod checkpoint;
pub mod config;
pub mod memory;
pub mod records;
pub mod review;
pub mod stages;
