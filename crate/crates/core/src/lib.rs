//! Online POMDP trajectory planning for on-ramp highway merging.

pub mod abt;
pub mod config;
pub mod geometry;
pub mod lane_map;
pub mod merge_model;
pub mod sim;
pub mod validation;

pub use config::{ConfigError, RunConfig};
pub use abt::{AbtSolver, GenerativeModel, Particle, SolverConfig, SolverError};
pub use geometry::{OrientedRect, Vec2};
pub use lane_map::{Lane, LaneId, LaneMap, MapError, Side};
pub use merge_model::{
    ActionPair, EgoState, JointState, MergeModel, ModelConfig, ModelError, NonEgoState,
    Observation, Terminal,
};
