use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::lane_map::LaneId;

/// Ego state in lane coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub p: f64,
    pub d: f64,
    pub v: f64,
    pub lane: LaneId,
}

/// A surrounding vehicle, bound to its lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonEgoState {
    pub p: f64,
    pub v: f64,
    pub lane: LaneId,
    pub width: f64,
    pub length: f64,
    /// Persistent offset of the driver's desired velocity.
    pub idm_trait: f64,
    /// Set once the vehicle has driven past the end of its lane.
    #[serde(default)]
    pub departed: bool,
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Merged,
    Collision,
    Bounds,
    Overrun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub ego: EgoState,
    pub others: Vec<NonEgoState>,
    pub step: u32,
    pub terminal: Option<Terminal>,
}

impl JointState {
    pub fn new(ego: EgoState, others: Vec<NonEgoState>) -> Self {
        Self {
            ego,
            others,
            step: 0,
            terminal: None,
        }
    }
}

/// Longitudinal acceleration and heading deviation from the lane (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPair {
    pub accel: f64,
    pub dtheta: f64,
}

/// Measurement of one surrounding vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleObservation {
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: Vec2,
    /// Lane membership probabilities in map lane order.
    pub lane_probs: Vec<f64>,
}

impl VehicleObservation {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Index into the map's lanes of the most probable lane; ties to the lowest.
    pub fn likeliest_lane(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.lane_probs.iter().enumerate() {
            if p > self.lane_probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Everything measured at one step. The ego is known exactly; departed
/// vehicles are no longer seen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub ego: EgoState,
    pub vehicles: Vec<Option<VehicleObservation>>,
    pub terminal: Option<Terminal>,
}

/// Quantized measurement of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VehicleKey {
    pub x: i64,
    pub y: i64,
    pub speed: i64,
    pub lane: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationKey {
    pub terminal: Option<Terminal>,
    pub vehicles: Vec<Option<VehicleKey>>,
}
