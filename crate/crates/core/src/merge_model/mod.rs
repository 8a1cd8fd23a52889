//! The on-ramp merging POMDP: Frenet ego dynamics, IDM traffic prediction,
//! noisy observations with lane inference and the merging reward.

mod config;
mod dynamics;
mod observation;
mod reward;
mod state;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::abt::{GenerativeModel, Particle, Transition};
use crate::lane_map::{LaneId, LaneMap, MapError};
use crate::validation::CheckResult;

pub use config::{IdmParams, ModelConfig, RewardWeights};
pub use dynamics::{
    idm_accel, leader_query, sample_process_noise, traffic_leader, step_ego, step_nonego, EgoStep, MIN_LEAD_GAP,
    SINGULARITY_MARGIN,
};
pub use observation::{
    alignment_likelihood, distance_likelihood, expected_measurement, lane_posterior,
    log_likelihood, obs_key, observe, POSITION_CELL, SPEED_CELL,
};
pub use reward::{
    bounds_check, collision_check, desired_lane_offset, ego_rect, heuristic, midpoint_collision,
    min_gap, reward, reward_change, reward_crash, reward_input, reward_velocity, vehicle_rect,
};
pub use state::{
    ActionPair, EgoState, JointState, NonEgoState, Observation, ObservationKey, Terminal,
    VehicleKey, VehicleObservation,
};

/// Lower bound on a driver's desired speed.
pub const MIN_DESIRED_SPEED: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("lane {0} is not in the map")]
    UnknownLane(LaneId),
    #[error("ego dynamics singular at p = {p}, d = {d}, curvature {kappa}")]
    Singular { p: f64, d: f64, kappa: f64 },
    #[error("leader gap {0} must be positive")]
    NonPositiveGap(f64),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

/// Generative model of the merge seen from the ego.
#[derive(Debug, Clone)]
pub struct MergeModel {
    map: Arc<LaneMap>,
    cfg: ModelConfig,
    actions: Vec<ActionPair>,
    prior: Observation,
}

impl MergeModel {
    /// `prior` is the measurement the initial belief is drawn around.
    pub fn new(map: Arc<LaneMap>, cfg: ModelConfig, prior: Observation) -> Result<Self, ModelError> {
        cfg.validate().map_err(ModelError::InvalidConfig)?;
        if map.lane(prior.ego.lane).is_none() {
            return Err(ModelError::UnknownLane(prior.ego.lane));
        }
        let actions = cfg
            .accelerations
            .iter()
            .flat_map(|&accel| cfg.steering.iter().map(move |&dtheta| ActionPair { accel, dtheta }))
            .collect();
        Ok(Self {
            map,
            cfg,
            actions,
            prior,
        })
    }

    pub fn map(&self) -> &LaneMap {
        &self.map
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn prior(&self) -> &Observation {
        &self.prior
    }

    /// Whether the ego counts as merged.
    pub fn is_merged(&self, ego: &EgoState) -> bool {
        ego.lane == self.map.desired_lane() && ego.d.abs() <= self.cfg.terminal_band
    }

    /// Advance every vehicle by one step and score the result.
    pub fn generative_step<R: Rng + ?Sized>(
        &self,
        state: &JointState,
        action: &ActionPair,
        rng: &mut R,
    ) -> Result<Transition<JointState, Observation>, ModelError> {
        let (map, cfg) = (&*self.map, &self.cfg);
        if state.terminal.is_some() {
            return Ok(Transition {
                state: state.clone(),
                observation: observe(state, map, cfg, rng),
                reward: 0.0,
                terminal: true,
            });
        }
        let footprint = dynamics::EgoFootprint::new(&state.ego, map)?;
        let accel_sd = cfg.idm.accel_variance.sqrt();
        let mut others = Vec::with_capacity(state.others.len());
        for (i, s) in state.others.iter().enumerate() {
            if s.departed {
                others.push(*s);
                continue;
            }
            let leader = dynamics::leader_with(state, i, map, cfg, &footprint);
            let omega2 = if accel_sd > 0.0 {
                accel_sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let a = idm_accel(s.v, leader, &cfg.idm, cfg.v_des, s.idm_trait, omega2)?;
            let noise = sample_process_noise(&cfg.process_noise, rng);
            let length = map.lane_unchecked(s.lane).length();
            others.push(step_nonego(s, a, cfg.dt, noise, length));
        }
        let ego_step = step_ego(&state.ego, action, map, cfg.dt)?;
        let mut next = JointState {
            ego: ego_step.state,
            others,
            step: state.step + 1,
            terminal: None,
        };
        let collided = collision_check(&next, action.dtheta, map, cfg)?
            || (cfg.midpoint_check && midpoint_collision(state, &next, action.dtheta, map, cfg)?);
        let out = bounds_check(&next.ego, action.dtheta, map, cfg);
        let r = reward(&next, action, collided || out, map, cfg)?;
        next.terminal = if collided {
            Some(Terminal::Collision)
        } else if out {
            Some(Terminal::Bounds)
        } else if ego_step.overrun {
            Some(Terminal::Overrun)
        } else if self.is_merged(&next.ego) {
            Some(Terminal::Merged)
        } else {
            None
        };
        let observation = observe(&next, map, cfg, rng);
        Ok(Transition {
            terminal: next.terminal.is_some(),
            state: next,
            observation,
            reward: r,
        })
    }

    /// Draw one joint state consistent with `z`: per vehicle a lane from its
    /// lane probabilities, position and speed jittered by the observation
    /// noise, and a driver trait from the IDM prior.
    pub fn sample_state_from<R: Rng + ?Sized>(&self, z: &Observation, rng: &mut R) -> JointState {
        self.sample_state_with(z, &[], rng)
    }

    fn sample_state_with<R: Rng + ?Sized>(&self, z: &Observation, dims: &[(f64, f64)], rng: &mut R) -> JointState {
        let [var_pos, var_vel, _] = self.cfg.obs_variance;
        let (sd_pos, sd_vel) = (var_pos.sqrt(), var_vel.sqrt());
        let trait_sd = self.cfg.idm.trait_variance.sqrt();
        let mut jitter = |sd: f64| if sd > 0.0 { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        let mut draws = Vec::with_capacity(z.vehicles.len());
        for (i, v) in z.vehicles.iter().enumerate() {
            let (width, length) = dims.get(i).copied().unwrap_or((self.cfg.ego_width, self.cfg.ego_length));
            let Some(v) = v else {
                let lane = LaneId(1);
                draws.push((None, NonEgoState {
                    p: self.map.lane_unchecked(lane).length(),
                    v: 0.0,
                    lane,
                    width,
                    length,
                    idm_trait: 0.0,
                    departed: true,
                }));
                continue;
            };
            let pos = v.position + crate::geometry::Vec2::new(jitter(sd_pos), jitter(sd_pos));
            let vel = v.velocity + crate::geometry::Vec2::new(jitter(sd_vel), jitter(sd_vel));
            let trait_offset = jitter(trait_sd);
            draws.push((Some((pos, vel.norm(), trait_offset)), NonEgoState {
                p: 0.0,
                v: 0.0,
                lane: LaneId(1),
                width,
                length,
                idm_trait: 0.0,
                departed: false,
            }));
        }
        let others = draws
            .into_iter()
            .zip(&z.vehicles)
            .map(|((draw, mut s), v)| {
                if let (Some((pos, speed, trait_offset)), Some(v)) = (draw, v) {
                    let idx = sample_index(&v.lane_probs, rng);
                    let lane = &self.map.lanes()[idx];
                    s.lane = lane.id();
                    s.p = lane.project(pos);
                    s.v = speed;
                    s.idm_trait = trait_offset;
                }
                s
            })
            .collect();
        JointState {
            ego: z.ego,
            others,
            step: 0,
            terminal: None,
        }
    }

    /// Equally weighted initial belief drawn around `z`; `dims` gives each
    /// vehicle's (width, length).
    pub fn initial_belief<R: Rng + ?Sized>(
        &self,
        z: &Observation,
        dims: &[(f64, f64)],
        n: usize,
        rng: &mut R,
    ) -> Vec<Particle<JointState>> {
        (0..n)
            .map(|_| Particle {
                state: self.sample_state_with(z, dims, rng),
                weight: 1.0 / n as f64,
            })
            .collect()
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl GenerativeModel for MergeModel {
    type State = JointState;
    type Action = ActionPair;
    type Observation = Observation;
    type ObsKey = ObservationKey;
    type Error = ModelError;

    fn actions(&self) -> &[ActionPair] {
        &self.actions
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &JointState,
        action: usize,
        rng: &mut R,
    ) -> Result<Transition<JointState, Observation>, ModelError> {
        self.generative_step(state, &self.actions[action], rng)
    }

    fn is_terminal(&self, state: &JointState) -> bool {
        state.terminal.is_some()
    }

    fn heuristic(&self, state: &JointState) -> f64 {
        heuristic(state, &self.map, &self.cfg).unwrap_or(-self.cfg.rewards.crash)
    }

    fn obs_key(&self, z: &Observation) -> ObservationKey {
        obs_key(z)
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> JointState {
        self.sample_state_from(&self.prior, rng)
    }

    fn reweight(&self, state: &JointState, z: &Observation) -> f64 {
        self.log_reweight(state, z).exp()
    }

    fn log_reweight(&self, state: &JointState, z: &Observation) -> f64 {
        log_likelihood(state, z, &self.map, &self.cfg)
    }
}

/// Two straight lanes 3.5 m apart: the desired lane 1 and a 200 m merge
/// lane 2 to its right, neighbors over their whole length.
pub fn reference_map() -> LaneMap {
    let doc = crate::lane_map::MapDocument {
        desired_lane: 1,
        width_is_full: false,
        lanes: vec![
            crate::lane_map::LaneDocument {
                id: 1,
                control_points: vec![[0.0, 3.5], [200.0, 3.5]],
                width: crate::lane_map::WidthSpec::Constant(4.0),
                left: vec![],
                right: vec![[0.0, 200.0, 2.0]],
                is_merge_lane: false,
                desired_successor: None,
            },
            crate::lane_map::LaneDocument {
                id: 2,
                control_points: vec![[0.0, 0.0], [200.0, 0.0]],
                width: crate::lane_map::WidthSpec::Constant(4.0),
                left: vec![[0.0, 200.0, 1.0]],
                right: vec![],
                is_merge_lane: true,
                desired_successor: None,
            },
        ],
    };
    LaneMap::from_document(&doc).expect("reference map is valid")
}

/// Closed-form reward values checked by the solver validation command.
pub fn reward_self_checks() -> Vec<CheckResult> {
    let cfg = ModelConfig::default();
    let map = reference_map();
    let ramp = EgoState {
        p: 0.0,
        d: 0.0,
        v: 20.0,
        lane: LaneId(2),
    };
    let mut out = Vec::new();
    let mut check = |name: &str, got: Result<f64, ModelError>, want: f64| {
        let (passed, detail) = match got {
            Ok(g) => (
                (g - want).abs() <= 1e-9 * want.abs().max(1.0),
                format!("got {g}, expected {want}"),
            ),
            Err(e) => (false, e.to_string()),
        };
        out.push(CheckResult {
            name: name.into(),
            passed,
            detail,
        });
    };
    check("velocity reward, linear branch", Ok(reward_velocity(cfg.v_des - 2.0, &cfg)), -200.0);
    check("velocity reward, quadratic branch", Ok(reward_velocity(cfg.v_des - 0.5, &cfg)), -25.0);
    let steer = ActionPair {
        accel: 1.0,
        dtheta: 2f64.to_radians(),
    };
    check("input reward", Ok(reward_input(&steer, &cfg)), -140.0);
    check("lane change reward", reward_change(&ramp, &map, &cfg), -8125.0);
    let state = JointState::new(ramp, vec![]);
    check("heuristic", heuristic(&state, &map, &cfg), -501.4398960872669);
    let on_target = JointState::new(
        EgoState {
            p: 50.0,
            d: 0.0,
            v: cfg.v_des,
            lane: LaneId(1),
        },
        vec![],
    );
    let idle = ActionPair {
        accel: 0.0,
        dtheta: 0.0,
    };
    check("reward at target", reward(&on_target, &idle, false, &map, &cfg), 0.0);
    out
}
