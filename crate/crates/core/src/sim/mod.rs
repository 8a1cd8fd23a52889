//! Closed-loop simulation: scenarios, the plan/act/observe loop and batch statistics.

mod batch;
mod run;
mod scenario;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::abt::SolverError;
use crate::lane_map::MapError;
use crate::merge_model::ModelError;

pub use batch::{batch_run, quantile, BatchSummary, RunSummary, Spread, StepQuantiles, Traces, REPLAY_NOTE};
pub use run::{run, summarize_belief, Outcome, SimResult, StepLog, VehicleBelief};
pub use scenario::{
    roll_traffic, EgoDocument, Scenario, ScenarioDocument, SyntheticInit, Trajectory, VehicleDocument,
};
pub use synth::{
    ramp_map, synth_scenario, window_start, SynthOutput, Template, APPROACH, HIGHWAY_LEAD,
    HIGHWAY_LENGTH, LANE_WIDTH, TEMPLATE_DURATION, TRAFFIC_DIMS,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("trajectory of vehicle {vehicle} has no state for step {step}")]
    TrajectoryGap { vehicle: usize, step: u32 },
    #[error("initial states overlap: {0}")]
    InitialCollision(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}
