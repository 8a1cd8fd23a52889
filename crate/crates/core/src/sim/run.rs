use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::scenario::Scenario;
use super::SimError;
use crate::abt::{AbtSolver, GenerativeModel, Particle, SolverConfig, SolverError};
use crate::merge_model::{
    bounds_check, collision_check, midpoint_collision, min_gap, observe, reward, step_ego,
    ActionPair, EgoState, JointState, MergeModel, ModelConfig, NonEgoState, Observation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Merged,
    Collision,
    Bounds,
    Overrun,
    Timeout,
    /// The planner could not continue, e.g. because the belief degenerated.
    Failure,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Merged,
        Outcome::Collision,
        Outcome::Bounds,
        Outcome::Overrun,
        Outcome::Timeout,
        Outcome::Failure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Merged => "merged",
            Outcome::Collision => "collision",
            Outcome::Bounds => "bounds",
            Outcome::Overrun => "overrun",
            Outcome::Timeout => "timeout",
            Outcome::Failure => "failure",
        }
    }
}

/// Planner belief about one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleBelief {
    /// Lane membership probabilities in map lane order.
    pub lane_probs: Vec<f64>,
    pub p_mean: f64,
    pub p_var: f64,
    pub v_mean: f64,
    pub v_var: f64,
}

/// Weighted per-vehicle summary of a particle belief.
pub fn summarize_belief(particles: &[Particle<JointState>], n_lanes: usize) -> Vec<VehicleBelief> {
    let Some(first) = particles.first() else {
        return Vec::new();
    };
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    (0..first.state.others.len())
        .map(|i| {
            let mut lane_probs = vec![0.0; n_lanes];
            let (mut p1, mut p2, mut v1, mut v2) = (0.0, 0.0, 0.0, 0.0);
            for part in particles {
                let w = part.weight / total;
                let s = &part.state.others[i];
                lane_probs[s.lane.0 as usize - 1] += w;
                p1 += w * s.p;
                p2 += w * s.p * s.p;
                v1 += w * s.v;
                v2 += w * s.v * s.v;
            }
            VehicleBelief {
                lane_probs,
                p_mean: p1,
                p_var: (p2 - p1 * p1).max(0.0),
                v_mean: v1,
                v_var: (v2 - v1 * v1).max(0.0),
            }
        })
        .collect()
}

/// One closed-loop step: the state before acting, what was measured and
/// believed, the action taken and what followed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLog {
    pub k: u32,
    pub ego: EgoState,
    pub others: Vec<NonEgoState>,
    pub observation: Observation,
    pub belief: Vec<VehicleBelief>,
    pub action_index: usize,
    pub action: ActionPair,
    pub reward: f64,
    pub collision: bool,
    pub bounds: bool,
    pub overrun: bool,
    pub merged: bool,
    /// Smallest bumper gap to any vehicle after the step.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub label: String,
    pub seed: u64,
    pub outcome: Outcome,
    /// Steps until the ego merged.
    pub merge_time: Option<u32>,
    pub min_gap: Option<f64>,
    pub final_ego: EgoState,
    pub steps: Vec<StepLog>,
    pub failure: Option<String>,
}

impl SimResult {
    pub fn mean_accel(&self) -> Option<f64> {
        (!self.steps.is_empty())
            .then(|| self.steps.iter().map(|s| s.action.accel).sum::<f64>() / self.steps.len() as f64)
    }

    /// Per-step trajectory table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        #[derive(Serialize)]
        struct Row {
            k: u32,
            p: f64,
            d: f64,
            v: f64,
            lane: u32,
            accel: f64,
            dtheta_deg: f64,
            reward: f64,
            merged: bool,
            collision: bool,
            bounds: bool,
            overrun: bool,
            timeout: bool,
            failure: bool,
        }
        let mut w = csv::Writer::from_writer(out);
        let last = self.steps.len().saturating_sub(1);
        for (i, s) in self.steps.iter().enumerate() {
            let end = i == last;
            w.serialize(Row {
                k: s.k,
                p: s.ego.p,
                d: s.ego.d,
                v: s.ego.v,
                lane: s.ego.lane.0,
                accel: s.action.accel,
                dtheta_deg: s.action.dtheta.to_degrees(),
                reward: s.reward,
                merged: s.merged,
                collision: s.collision,
                bounds: s.bounds,
                overrun: s.overrun,
                timeout: end && self.outcome == Outcome::Timeout,
                failure: end && self.outcome == Outcome::Failure,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn failed(mut result: SimResult, message: String) -> SimResult {
    result.outcome = Outcome::Failure;
    result.failure = Some(message);
    result
}

/// Drive the ego with the planner through `scenario` while the surrounding
/// vehicles replay their trajectories.
pub fn run(scenario: &Scenario, solver_cfg: &SolverConfig, model_cfg: &ModelConfig, seed: u64) -> Result<SimResult, SimError> {
    solver_cfg.validate()?;
    model_cfg.validate().map_err(SimError::Invalid)?;
    let map = Arc::clone(&scenario.map);
    let mut cfg = model_cfg.clone();
    (cfg.ego_width, cfg.ego_length) = scenario.ego_dims;
    let dims: Vec<(f64, f64)> = scenario.traffic.iter().map(|t| (t.width, t.length)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solver_cfg = SolverConfig {
        seed: rng.random(),
        ..*solver_cfg
    };

    let mut truth = JointState::new(scenario.ego, scenario.traffic_at(0));
    let mut result = SimResult {
        label: scenario.label.clone(),
        seed,
        outcome: Outcome::Timeout,
        merge_time: None,
        min_gap: min_gap(&truth, 0.0, &map, &cfg)?,
        final_ego: truth.ego,
        steps: Vec::new(),
        failure: None,
    };
    let first = observe(&truth, &map, &cfg, &mut rng);
    let model = MergeModel::new(Arc::clone(&map), cfg.clone(), first.clone())?;
    if model.is_merged(&truth.ego) {
        result.outcome = Outcome::Merged;
        result.merge_time = Some(0);
        return Ok(result);
    }
    let particles = model.initial_belief(&first, &dims, solver_cfg.particles, &mut rng);
    let mut solver = AbtSolver::with_particles(&model, solver_cfg, particles)?;
    let mut observation = first;
    let mut last_action: Option<usize> = None;

    for k in 0..scenario.duration {
        if let Some(a) = last_action {
            match solver.update_belief(&model, a, &observation) {
                Ok(()) => {}
                Err(e @ (SolverError::DegenerateBelief | SolverError::Model(_))) => {
                    return Ok(failed(result, format!("belief update at step {k}: {e}")));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let belief = summarize_belief(solver.root().particles(), map.len());
        let index = match solver.plan(&model) {
            Ok(i) => i,
            Err(e @ SolverError::Model(_)) => return Ok(failed(result, format!("planning at step {k}: {e}"))),
            Err(e) => return Err(e.into()),
        };
        let action = model.actions()[index];
        let ego_step = match step_ego(&truth.ego, &action, &map, cfg.dt) {
            Ok(s) => s,
            Err(e) => return Ok(failed(result, format!("ego dynamics at step {k}: {e}"))),
        };
        let next = JointState {
            ego: ego_step.state,
            others: scenario.traffic_at(k + 1),
            step: k + 1,
            terminal: None,
        };
        let collision = collision_check(&next, action.dtheta, &map, &cfg)?
            || (cfg.midpoint_check && midpoint_collision(&truth, &next, action.dtheta, &map, &cfg)?);
        let bounds = bounds_check(&next.ego, action.dtheta, &map, &cfg);
        let merged = !collision && !bounds && !ego_step.overrun && model.is_merged(&next.ego);
        let gap = min_gap(&next, action.dtheta, &map, &cfg)?;
        if let Some(g) = gap {
            result.min_gap = Some(result.min_gap.map_or(g, |m| m.min(g)));
        }
        result.steps.push(StepLog {
            k,
            ego: truth.ego,
            others: truth.others.clone(),
            observation: observation.clone(),
            belief,
            action_index: index,
            action,
            reward: reward(&next, &action, collision || bounds, &map, &cfg)?,
            collision,
            bounds,
            overrun: ego_step.overrun,
            merged,
            gap,
        });
        result.final_ego = next.ego;
        let outcome = if collision {
            Some(Outcome::Collision)
        } else if bounds {
            Some(Outcome::Bounds)
        } else if ego_step.overrun {
            Some(Outcome::Overrun)
        } else if merged {
            result.merge_time = Some(k + 1);
            Some(Outcome::Merged)
        } else {
            None
        };
        truth = next;
        if let Some(o) = outcome {
            result.outcome = o;
            return Ok(result);
        }
        observation = observe(&truth, &map, &cfg, &mut rng);
        last_action = Some(index);
    }
    Ok(result)
}
