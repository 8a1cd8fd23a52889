use serde::{Deserialize, Serialize};

/// Intelligent driver model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    pub a_max: f64,
    pub a_min: f64,
    /// Time headway in seconds.
    pub tau: f64,
    pub delta: f64,
    pub d_min: f64,
    /// Variance of the persistent desired-velocity offset.
    pub trait_variance: f64,
    /// Variance of the per-step acceleration noise.
    pub accel_variance: f64,
    /// Lower clamp on the predicted acceleration.
    pub brake_limit: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            a_max: 1.0,
            a_min: -1.0,
            tau: 1.5,
            delta: 4.0,
            d_min: 1.0,
            trait_variance: 9.0,
            accel_variance: 0.04,
            brake_limit: -8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub center: f64,
    pub vel: f64,
    pub acc: f64,
    /// Per squared radian.
    pub steer: f64,
    pub crash: f64,
    pub cst: f64,
    pub end: f64,
    pub dist: f64,
    pub heuristic: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            center: 500.0,
            vel: 100.0,
            acc: 100.0,
            steer: 10.0 * (180.0 / std::f64::consts::PI).powi(2),
            crash: 1e6,
            cst: 1e3,
            end: 1e4,
            dist: 500.0,
            heuristic: 100.0,
        }
    }
}

/// Parameters of the merging model. Angles are in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dt: f64,
    pub v_des: f64,
    pub idm: IdmParams,
    /// Covariance of the (position, velocity) process noise of other vehicles.
    pub process_noise: [[f64; 2]; 2],
    /// Observation noise variances of the position, velocity and heading blocks.
    pub obs_variance: [f64; 3],
    pub rewards: RewardWeights,
    pub ego_width: f64,
    pub ego_length: f64,
    pub accelerations: Vec<f64>,
    pub steering: Vec<f64>,
    pub max_steering: f64,
    /// Lateral band around the desired lane's centerline that counts as merged.
    pub terminal_band: f64,
    /// Floor on speeds used as divisors.
    pub velocity_floor: f64,
    /// Floor on the remaining time to the end of the merge lane.
    pub min_time_left: f64,
    /// Also test for collisions half-way through each step.
    pub midpoint_check: bool,
    /// Use half the ego dimensions in the bounds test.
    pub bounds_half_extents: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            v_des: 27.8,
            idm: IdmParams::default(),
            process_noise: [[0.0; 2]; 2],
            obs_variance: [0.01, 0.01, 0.0],
            rewards: RewardWeights::default(),
            ego_width: 1.8,
            ego_length: 4.5,
            accelerations: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            steering: [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0]
                .iter()
                .map(|d: &f64| d.to_radians())
                .collect(),
            max_steering: 2f64.to_radians(),
            terminal_band: 0.3,
            velocity_floor: 0.1,
            min_time_left: 0.01,
            midpoint_check: true,
            bounds_half_extents: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        let r = &self.rewards;
        let weights = [
            r.center, r.vel, r.acc, r.steer, r.crash, r.cst, r.end, r.dist, r.heuristic,
        ];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err("reward weights must be non-negative".into());
        }
        if !(self.dt > 0.0) {
            return Err(format!("time step {} must be positive", self.dt));
        }
        if !(self.idm.a_min < 0.0 && 0.0 < self.idm.a_max) {
            return Err("IDM requires a_min < 0 < a_max".into());
        }
        if self.idm.trait_variance < 0.0 || self.idm.accel_variance < 0.0 {
            return Err("IDM variances must be non-negative".into());
        }
        let q = self.process_noise;
        if q[0][0] < 0.0 || q[1][1] < 0.0 || q[0][1] != q[1][0] || q[0][1].powi(2) > q[0][0] * q[1][1]
        {
            return Err("process noise must be a symmetric positive semi-definite matrix".into());
        }
        if self.obs_variance.iter().any(|v| !(*v >= 0.0)) {
            return Err("observation variances must be non-negative".into());
        }
        if self.accelerations.is_empty() || self.steering.is_empty() {
            return Err("action set must not be empty".into());
        }
        if !(self.ego_width > 0.0 && self.ego_length > 0.0) {
            return Err("ego dimensions must be positive".into());
        }
        if !(self.max_steering > 0.0 && self.max_steering < std::f64::consts::FRAC_PI_2) {
            return Err("maximum steering must lie in (0, 90) degrees".into());
        }
        if !(self.velocity_floor > 0.0 && self.min_time_left > 0.0) {
            return Err("velocity and time floors must be positive".into());
        }
        Ok(())
    }
}
