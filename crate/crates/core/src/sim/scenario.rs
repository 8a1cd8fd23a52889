use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::lane_map::{LaneId, LaneMap};
use crate::merge_model::{
    idm_accel, step_nonego, traffic_leader, vehicle_rect, EgoState, ModelConfig, NonEgoState,
};
use crate::OrientedRect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoDocument {
    pub lane: u32,
    pub p: f64,
    pub d: f64,
    pub v: f64,
    #[serde(rename = "W")]
    pub width: f64,
    #[serde(rename = "L")]
    pub length: f64,
}

/// Initial condition of a vehicle driven by the IDM when the scenario is loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticInit {
    pub p: f64,
    pub v: f64,
    pub lane: u32,
    /// Offset of the driver's desired speed from the model's.
    #[serde(default, rename = "trait")]
    pub idm_trait: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum VehicleDocument {
    /// `[k, p, v, lane]` for every step.
    Recorded { dims: [f64; 2], states: Vec<[f64; 4]> },
    Synthetic { dims: [f64; 2], init: SyntheticInit },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    /// Lane map file, relative to the scenario file.
    pub map: PathBuf,
    pub ego: EgoDocument,
    pub vehicles: Vec<VehicleDocument>,
    pub duration: u32,
    pub label: String,
    /// Seed of the roll-out of synthetic vehicles.
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioDocument {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| SimError::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario documents serialize")
    }
}

/// A surrounding vehicle's state at every step of the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub width: f64,
    pub length: f64,
    pub states: Vec<NonEgoState>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub map: Arc<LaneMap>,
    pub ego: EgoState,
    pub ego_dims: (f64, f64),
    pub traffic: Vec<Trajectory>,
    pub duration: u32,
    pub label: String,
}

impl Scenario {
    /// Load a scenario and its map; `map_override` replaces the map path in the file.
    pub fn load(path: impl AsRef<Path>, map_override: Option<&Path>, cfg: &ModelConfig) -> Result<Self, SimError> {
        let path = path.as_ref();
        let doc = ScenarioDocument::read(path)?;
        let map_path = match map_override {
            Some(p) => p.to_path_buf(),
            None => path.parent().unwrap_or(Path::new("")).join(&doc.map),
        };
        let map = LaneMap::load(&map_path)?;
        Self::from_document(&doc, Arc::new(map), cfg)
    }

    pub fn from_document(doc: &ScenarioDocument, map: Arc<LaneMap>, cfg: &ModelConfig) -> Result<Self, SimError> {
        let lane_of = |id: u32| -> Result<LaneId, SimError> {
            let id = LaneId(id);
            map.lane(id).map(|_| id).ok_or(SimError::Invalid(format!("unknown lane {id}")))
        };
        let e = &doc.ego;
        let ego = EgoState {
            p: e.p,
            d: e.d,
            v: e.v,
            lane: lane_of(e.lane)?,
        };
        if !(e.width > 0.0 && e.length > 0.0 && e.v >= 0.0) {
            return Err(SimError::Invalid("ego dimensions must be positive and speed non-negative".into()));
        }
        let ego_lane = map.lane_unchecked(ego.lane);
        if !(0.0..=ego_lane.length()).contains(&ego.p) {
            return Err(SimError::Invalid(format!("ego position {} outside lane {}", ego.p, ego.lane)));
        }

        let mut traffic = Vec::with_capacity(doc.vehicles.len());
        let mut synthetic = Vec::new();
        for (i, v) in doc.vehicles.iter().enumerate() {
            let dims = match v {
                VehicleDocument::Recorded { dims, .. } | VehicleDocument::Synthetic { dims, .. } => *dims,
            };
            if !(dims[0] > 0.0 && dims[1] > 0.0) {
                return Err(SimError::Invalid(format!("vehicle {i}: dimensions must be positive")));
            }
            let base = |p: f64, v: f64, lane: LaneId| NonEgoState {
                p,
                v,
                lane,
                width: dims[0],
                length: dims[1],
                idm_trait: 0.0,
                departed: p > map.lane_unchecked(lane).length(),
            };
            match v {
                VehicleDocument::Recorded { states, .. } => {
                    let mut out = Vec::with_capacity(states.len());
                    for (k, s) in states.iter().enumerate() {
                        if s[0] != k as f64 {
                            return Err(SimError::TrajectoryGap { vehicle: i, step: k as u32 });
                        }
                        let lane = lane_of(s[3] as u32)?;
                        if !(s[1] >= 0.0 && s[2] >= 0.0) {
                            return Err(SimError::Invalid(format!("vehicle {i}, step {k}: negative position or speed")));
                        }
                        out.push(base(s[1], s[2], lane));
                    }
                    if out.len() <= doc.duration as usize {
                        return Err(SimError::TrajectoryGap {
                            vehicle: i,
                            step: out.len() as u32,
                        });
                    }
                    out.truncate(doc.duration as usize + 1);
                    traffic.push(Trajectory {
                        width: dims[0],
                        length: dims[1],
                        states: out,
                    });
                }
                VehicleDocument::Synthetic { init, .. } => {
                    let mut s = base(init.p, init.v, lane_of(init.lane)?);
                    s.idm_trait = init.idm_trait;
                    synthetic.push((traffic.len(), s));
                    traffic.push(Trajectory {
                        width: dims[0],
                        length: dims[1],
                        states: Vec::new(),
                    });
                }
            }
        }
        if !synthetic.is_empty() {
            let initial: Vec<NonEgoState> = synthetic.iter().map(|(_, s)| *s).collect();
            let rolled = roll_traffic(&map, cfg, initial, doc.duration, doc.seed);
            for (slot, (index, _)) in synthetic.iter().enumerate() {
                traffic[*index].states = rolled.iter().map(|step| step[slot]).collect();
            }
        }

        let scenario = Self {
            map,
            ego,
            ego_dims: (e.width, e.length),
            traffic,
            duration: doc.duration,
            label: doc.label.clone(),
        };
        scenario.check_initial_overlap()?;
        Ok(scenario)
    }

    /// Surrounding vehicles at step `k`.
    pub fn traffic_at(&self, k: u32) -> Vec<NonEgoState> {
        self.traffic.iter().map(|t| t.states[k as usize]).collect()
    }

    fn check_initial_overlap(&self) -> Result<(), SimError> {
        let lane = self.map.lane_unchecked(self.ego.lane);
        let ego = OrientedRect::new(
            lane.offset_position(self.ego.p, self.ego.d)?,
            lane.heading(self.ego.p)?,
            self.ego_dims.0,
            self.ego_dims.1,
        );
        let rects: Vec<(usize, OrientedRect)> = self
            .traffic_at(0)
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.departed)
            .map(|(i, s)| (i, vehicle_rect(s, &self.map)))
            .collect();
        for (n, (i, a)) in rects.iter().enumerate() {
            if ego.overlaps(a) {
                return Err(SimError::InitialCollision(format!("ego and vehicle {i}")));
            }
            for (j, b) in &rects[n + 1..] {
                if a.overlaps(b) {
                    return Err(SimError::InitialCollision(format!("vehicles {i} and {j}")));
                }
            }
        }
        Ok(())
    }
}

/// Drive vehicles with the IDM among themselves for `steps` steps, with
/// per-step acceleration noise. Returns the states at steps `0..=steps`.
pub fn roll_traffic(map: &LaneMap, cfg: &ModelConfig, initial: Vec<NonEgoState>, steps: u32, seed: u64) -> Vec<Vec<NonEgoState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = cfg.idm.accel_variance.sqrt();
    let mut out = vec![initial];
    for _ in 0..steps {
        let current = out.last().expect("non-empty");
        let next = current
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.departed {
                    return *s;
                }
                let noise = sd * rng.sample::<f64, _>(StandardNormal);
                let leader = traffic_leader(current, i, None);
                let a = idm_accel(s.v, leader, &cfg.idm, cfg.v_des, s.idm_trait, noise)
                    .expect("traffic leader gaps are positive");
                step_nonego(s, a, cfg.dt, (0.0, 0.0), map.lane_unchecked(s.lane).length())
            })
            .collect();
        out.push(next);
    }
    out
}
