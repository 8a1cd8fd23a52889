use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{IdmParams, ModelConfig};
use super::state::{ActionPair, EgoState, JointState, NonEgoState};
use super::ModelError;
use crate::lane_map::{LaneMap, Side};

/// Minimum bumper-to-bumper gap reported to the IDM.
pub const MIN_LEAD_GAP: f64 = 0.1;
/// Smallest admissible `1 - d * kappa` in the ego dynamics.
pub const SINGULARITY_MARGIN: f64 = 0.05;

/// Draw `(nu_1, nu_2)` from a zero-mean Gaussian with covariance `q`.
pub fn sample_process_noise<R: Rng + ?Sized>(q: &[[f64; 2]; 2], rng: &mut R) -> (f64, f64) {
    if q[0][0] == 0.0 && q[1][1] == 0.0 {
        return (0.0, 0.0);
    }
    let l00 = q[0][0].sqrt();
    let l10 = if l00 > 0.0 { q[1][0] / l00 } else { 0.0 };
    let l11 = (q[1][1] - l10 * l10).max(0.0).sqrt();
    let z0: f64 = rng.sample(StandardNormal);
    let z1: f64 = rng.sample(StandardNormal);
    (l00 * z0, l10 * z0 + l11 * z1)
}

/// Single-mass longitudinal update of a surrounding vehicle with
/// acceleration `a` and process noise `noise`. A vehicle that would come to
/// a stop within the step stops instead of reversing.
pub fn step_nonego(s: &NonEgoState, a: f64, dt: f64, noise: (f64, f64), lane_length: f64) -> NonEgoState {
    let v_end = s.v + a * dt;
    let travel = if v_end < 0.0 && a < 0.0 {
        s.v * s.v / (2.0 * -a)
    } else {
        s.v * dt + 0.5 * a * dt * dt
    };
    let p = s.p + travel + noise.0;
    NonEgoState {
        p,
        v: (v_end + noise.1).max(0.0),
        departed: s.departed || p > lane_length,
        ..*s
    }
}

/// IDM acceleration of a vehicle at speed `v` with desired-velocity offset
/// `trait_offset` and additive noise `noise`, clamped to `[brake_limit, a_max]`.
pub fn idm_accel(
    v: f64,
    leader: Option<(f64, f64)>,
    idm: &IdmParams,
    v_des: f64,
    trait_offset: f64,
    noise: f64,
) -> Result<f64, ModelError> {
    let desired = (v_des + trait_offset).max(super::MIN_DESIRED_SPEED);
    let mut a = 1.0 - (v / desired).powf(idm.delta);
    if let Some((gap, v_lead)) = leader {
        if !(gap > 0.0) {
            return Err(ModelError::NonPositiveGap(gap));
        }
        let d_star = idm.d_min + v * idm.tau + v * (v - v_lead) / (2.0 * (idm.a_max * idm.a_min.abs()).sqrt());
        a -= (d_star / gap).powi(2);
    }
    Ok((idm.a_max * a + noise).clamp(idm.brake_limit, idm.a_max))
}

/// Ego position projected onto every lane, shared by the leader queries of one step.
pub(crate) struct EgoFootprint {
    /// Per lane: arc length and signed distance of the ego.
    pub frenet: Vec<(f64, f64)>,
}

impl EgoFootprint {
    pub fn new(ego: &EgoState, map: &LaneMap) -> Result<Self, ModelError> {
        let position = map.lane_unchecked(ego.lane).offset_position(ego.p, ego.d)?;
        let frenet = map
            .lanes()
            .iter()
            .map(|lane| {
                if lane.id() == ego.lane {
                    (ego.p, ego.d)
                } else {
                    lane.frenet(position)
                }
            })
            .collect();
        Ok(Self { frenet })
    }
}

/// Gap to and speed of the nearest vehicle ahead of vehicle `i` in its lane.
/// The ego counts when its center lies laterally inside that lane.
pub fn leader_query(
    state: &JointState,
    i: usize,
    map: &LaneMap,
    cfg: &ModelConfig,
) -> Result<Option<(f64, f64)>, ModelError> {
    let ego = EgoFootprint::new(&state.ego, map)?;
    Ok(leader_with(state, i, map, cfg, &ego))
}

pub(crate) fn leader_with(
    state: &JointState,
    i: usize,
    map: &LaneMap,
    cfg: &ModelConfig,
    ego: &EgoFootprint,
) -> Option<(f64, f64)> {
    let me = &state.others[i];
    let (ep, ed) = ego.frenet[me.lane.0 as usize - 1];
    let ego_ahead = (ed.abs() < map.lane_unchecked(me.lane).width(ep)).then_some((ep, state.ego.v, cfg.ego_length));
    traffic_leader(&state.others, i, ego_ahead)
}

/// Gap to and speed of the nearest vehicle ahead of `others[i]` in its
/// lane, optionally also considering an extra `(p, v, length)` occupant of
/// that lane.
pub fn traffic_leader(others: &[NonEgoState], i: usize, extra: Option<(f64, f64, f64)>) -> Option<(f64, f64)> {
    let me = &others[i];
    let candidates = others
        .iter()
        .enumerate()
        .filter(|&(j, o)| j != i && !o.departed && o.lane == me.lane)
        .map(|(_, o)| (o.p, o.v, o.length))
        .chain(extra);
    let mut best: Option<(f64, f64, f64)> = None;
    for (p, v, length) in candidates {
        if p > me.p && best.is_none_or(|(bp, _, _)| p < bp) {
            best = Some((p, v, length));
        }
    }
    best.map(|(p, v, length)| ((p - me.p - 0.5 * (length + me.length)).max(MIN_LEAD_GAP), v))
}

/// Outcome of one ego update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoStep {
    pub state: EgoState,
    /// The ego ran past the end of a lane without a successor.
    pub overrun: bool,
}

/// Frenet point-mass update of the ego, switching lanes once the lateral
/// offset crosses the lane edge toward an existing neighbor.
pub fn step_ego(s: &EgoState, a: &ActionPair, map: &LaneMap, dt: f64) -> Result<EgoStep, ModelError> {
    let lane = map.lane(s.lane).ok_or(ModelError::UnknownLane(s.lane))?;
    let kappa = lane.curvature(s.p)?;
    let scale = 1.0 - s.d * kappa;
    if scale <= SINGULARITY_MARGIN {
        return Err(ModelError::Singular { p: s.p, d: s.d, kappa });
    }
    let v = (s.v + a.accel * dt).max(0.0);
    let mut p_hat = s.p + s.v * a.dtheta.cos() * dt / scale;
    let d_hat = s.d + s.v * a.dtheta.sin() * dt;
    let mut lane = lane;
    let mut overrun = false;
    if p_hat > lane.length() {
        match lane.desired_successor().and_then(|id| map.lane(id)) {
            Some(next) => {
                p_hat = (p_hat - lane.length()).min(next.length());
                lane = next;
            }
            None => {
                p_hat = lane.length();
                overrun = true;
            }
        }
    }
    let w = lane.width(p_hat);
    let side = if d_hat > w {
        Some(Side::Left)
    } else if -d_hat > w {
        Some(Side::Right)
    } else {
        None
    };
    let target = side.and_then(|side| lane.neighbor_at(p_hat, side));
    let state = match target {
        Some(id) => {
            let global = lane.offset_position(p_hat, d_hat)?;
            let (p, d) = map.lane_unchecked(id).frenet(global);
            EgoState { p, d, v, lane: id }
        }
        None => EgoState {
            p: p_hat,
            d: d_hat,
            v,
            lane: lane.id(),
        },
    };
    Ok(EgoStep { state, overrun })
}
