use rand::Rng;
use rand_distr::StandardNormal;

use super::config::ModelConfig;
use super::state::{
    JointState, NonEgoState, Observation, ObservationKey, VehicleKey, VehicleObservation,
};
use crate::geometry::Vec2;
use crate::lane_map::LaneMap;

/// Grid size of the position part of an observation key.
pub const POSITION_CELL: f64 = 2.0;
/// Grid size of the speed part of an observation key.
pub const SPEED_CELL: f64 = 1.0;

/// Lane membership likelihood from the distance to the centerline.
pub fn distance_likelihood(distance: f64, width: f64) -> f64 {
    (-(distance / width).powi(4)).exp()
}

/// Lane membership likelihood from the alignment of headings.
pub fn alignment_likelihood(alpha: f64) -> f64 {
    (3.0 * (alpha - 1.0)).exp()
}

/// Probability of a measured vehicle being in each lane, in map lane order.
/// Falls back to uniform when every lane is numerically impossible.
pub fn lane_posterior(position: Vec2, heading: Vec2, map: &LaneMap) -> Vec<f64> {
    let mut probs: Vec<f64> = map
        .lanes()
        .iter()
        .map(|lane| {
            let p = lane.project(position);
            let (center, tangent, _) = lane.centerline().eval(p);
            let f1 = distance_likelihood(position.distance(center), lane.width(p));
            let f2 = alignment_likelihood(heading.dot(tangent.normalized()));
            f1 * f2
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if total > 0.0 && total.is_finite() {
        probs.iter_mut().for_each(|p| *p /= total);
    } else {
        let n = probs.len() as f64;
        probs.iter_mut().for_each(|p| *p = 1.0 / n);
    }
    probs
}

impl VehicleObservation {
    /// Build a measurement and its lane probabilities.
    pub fn new(position: Vec2, velocity: Vec2, heading: Vec2, map: &LaneMap) -> Self {
        let lane_probs = lane_posterior(position, heading, map);
        Self {
            position,
            velocity,
            heading,
            lane_probs,
        }
    }
}

fn noise<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Vec2 {
    if variance == 0.0 {
        return Vec2::new(0.0, 0.0);
    }
    let s = variance.sqrt();
    Vec2::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
}

/// Noise-free position, velocity and heading of a vehicle.
pub fn expected_measurement(s: &NonEgoState, map: &LaneMap) -> (Vec2, Vec2, Vec2) {
    let lane = map.lane_unchecked(s.lane);
    let (pos, tangent, _) = lane.centerline().eval(lane.clamp(s.p));
    let heading = tangent.normalized();
    (pos, heading * s.v, heading)
}

/// Sample a measurement of every vehicle still on the road.
pub fn observe<R: Rng + ?Sized>(
    state: &JointState,
    map: &LaneMap,
    cfg: &ModelConfig,
    rng: &mut R,
) -> Observation {
    let [var_pos, var_vel, var_heading] = cfg.obs_variance;
    let vehicles = state
        .others
        .iter()
        .map(|s| {
            if s.departed {
                return None;
            }
            let (pos, vel, heading) = expected_measurement(s, map);
            let position = pos + noise(var_pos, rng);
            let velocity = vel + noise(var_vel, rng);
            let heading = heading + noise(var_heading, rng);
            Some(VehicleObservation::new(position, velocity, heading, map))
        })
        .collect();
    Observation {
        ego: state.ego,
        vehicles,
        terminal: state.terminal,
    }
}

/// Discretize an observation for tree branching.
pub fn obs_key(z: &Observation) -> ObservationKey {
    ObservationKey {
        terminal: z.terminal,
        vehicles: z
            .vehicles
            .iter()
            .map(|v| {
                v.as_ref().map(|v| VehicleKey {
                    x: (v.position.x / POSITION_CELL).round() as i64,
                    y: (v.position.y / POSITION_CELL).round() as i64,
                    speed: (v.speed() / SPEED_CELL).round() as i64,
                    lane: v.likeliest_lane(),
                })
            })
            .collect(),
    }
}

fn gaussian_log_density(residual: Vec2, variance: f64) -> f64 {
    if variance == 0.0 {
        return 0.0;
    }
    -residual.norm_squared() / (2.0 * variance) - (2.0 * std::f64::consts::PI * variance).ln()
}

/// Log-likelihood of `z` given `state`: Gaussian position and velocity
/// residuals times the lane membership probability of each vehicle's lane.
/// The heading block is left out. A terminal flag that disagrees with the
/// state makes the state impossible.
pub fn log_likelihood(state: &JointState, z: &Observation, map: &LaneMap, cfg: &ModelConfig) -> f64 {
    if state.terminal != z.terminal || state.others.len() != z.vehicles.len() {
        return f64::NEG_INFINITY;
    }
    let [var_pos, var_vel, _] = cfg.obs_variance;
    let mut total = 0.0;
    for (s, v) in state.others.iter().zip(&z.vehicles) {
        let Some(v) = v else { continue };
        let (pos, vel, _) = expected_measurement(s, map);
        total += gaussian_log_density(v.position - pos, var_pos);
        total += gaussian_log_density(v.velocity - vel, var_vel);
        total += v.lane_probs[s.lane.0 as usize - 1].ln();
    }
    total
}
