use super::config::ModelConfig;
use super::state::{ActionPair, EgoState, JointState, NonEgoState};
use super::ModelError;
use crate::geometry::OrientedRect;
use crate::lane_map::{LaneMap, Side};

/// Velocity tracking term, linear for a large speed deficit and quadratic otherwise.
pub fn reward_velocity(v: f64, cfg: &ModelConfig) -> f64 {
    let dv = cfg.v_des - v;
    if dv >= 1.0 {
        -cfg.rewards.vel * dv
    } else {
        -cfg.rewards.vel * dv * dv
    }
}

pub fn reward_input(a: &ActionPair, cfg: &ModelConfig) -> f64 {
    -cfg.rewards.acc * a.accel * a.accel - cfg.rewards.steer * a.dtheta * a.dtheta
}

/// Signed distance of the ego's global position from the desired lane.
pub fn desired_lane_offset(ego: &EgoState, map: &LaneMap) -> Result<f64, ModelError> {
    let desired = map.desired_lane();
    if ego.lane == desired {
        return Ok(ego.d);
    }
    let pos = map.lane_unchecked(ego.lane).offset_position(ego.p, ego.d)?;
    Ok(map.lane_unchecked(desired).signed_distance(pos))
}

/// Penalty for being outside the desired lane, growing toward the end of the current lane.
pub fn reward_change(ego: &EgoState, map: &LaneMap, cfg: &ModelConfig) -> Result<f64, ModelError> {
    if ego.lane == map.desired_lane() {
        return Ok(0.0);
    }
    let r = &cfg.rewards;
    let length = map.lane_unchecked(ego.lane).length();
    let t_left = ((length - ego.p).max(0.0) / ego.v.max(cfg.velocity_floor)).max(cfg.min_time_left);
    let d_des = desired_lane_offset(ego, map)?;
    Ok(-r.cst - r.end * (1.0 / t_left + ego.p / length) - r.dist * d_des * d_des)
}

/// True when the ego sticks out of its lane on a side without a neighbor.
pub fn bounds_check(ego: &EgoState, dtheta: f64, map: &LaneMap, cfg: &ModelConfig) -> bool {
    let lane = map.lane_unchecked(ego.lane);
    let w = lane.width(ego.p);
    let scale = if cfg.bounds_half_extents { 0.5 } else { 1.0 };
    let across = scale * cfg.ego_width * dtheta.cos();
    let along = scale * cfg.ego_length * dtheta.sin();
    let (left, right) = if cfg.bounds_half_extents {
        (ego.d + across + along.abs(), -ego.d + across + along.abs())
    } else {
        (ego.d + across + along, -ego.d + across - along)
    };
    (left > w && lane.neighbor_at(ego.p, Side::Left).is_none())
        || (right > w && lane.neighbor_at(ego.p, Side::Right).is_none())
}

/// Ego footprint, heading rotated by the steering deviation.
pub fn ego_rect(ego: &EgoState, dtheta: f64, map: &LaneMap, cfg: &ModelConfig) -> Result<OrientedRect, ModelError> {
    let lane = map.lane_unchecked(ego.lane);
    let center = lane.offset_position(ego.p, ego.d)?;
    let heading = lane.heading(ego.p)?.rotated(dtheta);
    Ok(OrientedRect::new(center, heading, cfg.ego_width, cfg.ego_length))
}

pub fn vehicle_rect(s: &NonEgoState, map: &LaneMap) -> OrientedRect {
    let lane = map.lane_unchecked(s.lane);
    let (center, tangent, _) = lane.centerline().eval(lane.clamp(s.p));
    OrientedRect::new(center, tangent.normalized(), s.width, s.length)
}

/// Whether the ego's rectangle touches or overlaps any vehicle still on the road.
pub fn collision_check(state: &JointState, dtheta: f64, map: &LaneMap, cfg: &ModelConfig) -> Result<bool, ModelError> {
    let ego = ego_rect(&state.ego, dtheta, map, cfg)?;
    Ok(state
        .others
        .iter()
        .filter(|s| !s.departed)
        .any(|s| ego.overlaps(&vehicle_rect(s, map))))
}

fn blend(a: &OrientedRect, b: &OrientedRect) -> OrientedRect {
    let heading = a.heading + b.heading;
    let heading = if heading.norm() > 1e-9 { heading.normalized() } else { a.heading };
    OrientedRect::new(a.center.lerp(b.center, 0.5), heading, a.width, a.length)
}

/// Collision test at the midpoint of a step, interpolating every pose linearly.
pub fn midpoint_collision(
    before: &JointState,
    after: &JointState,
    dtheta: f64,
    map: &LaneMap,
    cfg: &ModelConfig,
) -> Result<bool, ModelError> {
    let ego = blend(&ego_rect(&before.ego, dtheta, map, cfg)?, &ego_rect(&after.ego, dtheta, map, cfg)?);
    Ok(before
        .others
        .iter()
        .zip(&after.others)
        .filter(|(a, b)| !a.departed && !b.departed)
        .any(|(a, b)| ego.overlaps(&blend(&vehicle_rect(a, map), &vehicle_rect(b, map)))))
}

pub fn reward_crash(crashed: bool, cfg: &ModelConfig) -> f64 {
    if crashed {
        -cfg.rewards.crash
    } else {
        0.0
    }
}

/// Total step reward of the post-step state. `crashed` covers both a
/// collision and leaving the road.
pub fn reward(
    state: &JointState,
    a: &ActionPair,
    crashed: bool,
    map: &LaneMap,
    cfg: &ModelConfig,
) -> Result<f64, ModelError> {
    let ego = &state.ego;
    Ok(reward_velocity(ego.v, cfg)
        + reward_input(a, cfg)
        + reward_crash(crashed, cfg)
        + reward_change(ego, map, cfg)?
        - cfg.rewards.center * ego.d * ego.d)
}

/// Optimistic cost of steering into the desired lane plus the crash penalty.
pub fn heuristic(state: &JointState, map: &LaneMap, cfg: &ModelConfig) -> Result<f64, ModelError> {
    let d_des = desired_lane_offset(&state.ego, map)?;
    let rate = state.ego.v.max(cfg.velocity_floor) * cfg.max_steering.sin();
    let crashed = collision_check(state, 0.0, map, cfg)? || bounds_check(&state.ego, 0.0, map, cfg);
    Ok(-cfg.rewards.heuristic * (d_des / rate).abs() + reward_crash(crashed, cfg))
}

/// Smallest bumper gap between the ego and any vehicle on the road.
pub fn min_gap(state: &JointState, dtheta: f64, map: &LaneMap, cfg: &ModelConfig) -> Result<Option<f64>, ModelError> {
    let ego = ego_rect(&state.ego, dtheta, map, cfg)?;
    Ok(state
        .others
        .iter()
        .filter(|s| !s.departed)
        .map(|s| ego.distance_to(&vehicle_rect(s, map)))
        .reduce(f64::min))
}

