use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scenario::{roll_traffic, EgoDocument, Scenario, ScenarioDocument, VehicleDocument};
use super::SimError;
use crate::geometry::Vec2;
use crate::lane_map::spline::ArcLengthSpline;
use crate::lane_map::{LaneDocument, LaneId, LaneMap, MapDocument, WidthSpec};
use crate::merge_model::{ModelConfig, NonEgoState};

/// Physical width of every lane of the synthetic ramp.
pub const LANE_WIDTH: f64 = 3.75;
/// Length of the highway before the merge window.
pub const HIGHWAY_LEAD: f64 = 400.0;
pub const HIGHWAY_LENGTH: f64 = 2800.0;
/// Horizontal extent of the curved approach of the ramp.
pub const APPROACH: f64 = 100.0;
pub const TRAFFIC_DIMS: [f64; 2] = [1.8, 4.5];
/// Steps of traffic generated by the templates.
pub const TEMPLATE_DURATION: u32 = 40;
/// Standard deviation of the desired-speed jitter of template drivers.
const SPEED_JITTER: f64 = 0.5;

/// Built-in scenario generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Template {
    /// Ego on the ramp next to a platoon in the target lane; the first
    /// vehicle starts level with the ego and the others every `gap` meters
    /// behind it.
    PlatoonMerge {
        v_traffic: f64,
        gap: f64,
        n_vehicles: usize,
        v_ego0: f64,
        merge_len: f64,
    },
    /// A single vehicle in the target lane, `behind` meters behind the ego
    /// and faster than the ego can reach before the ramp ends.
    FastAdjacent {
        v_fast: f64,
        behind: f64,
        v_ego0: f64,
        merge_len: f64,
    },
}

impl Template {
    pub const PLATOON: Template = Template::PlatoonMerge {
        v_traffic: 25.0,
        gap: 60.0,
        n_vehicles: 3,
        v_ego0: 18.0,
        merge_len: 200.0,
    };
    pub const FAST_ADJACENT: Template = Template::FastAdjacent {
        v_fast: 30.0,
        behind: 15.0,
        v_ego0: 20.5,
        merge_len: 200.0,
    };

    pub fn name(&self) -> &'static str {
        match self {
            Template::PlatoonMerge { .. } => "platoon_merge",
            Template::FastAdjacent { .. } => "fast_adjacent",
        }
    }

    pub fn merge_len(&self) -> f64 {
        match *self {
            Template::PlatoonMerge { merge_len, .. } | Template::FastAdjacent { merge_len, .. } => merge_len,
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Template::PlatoonMerge {
                v_traffic,
                gap,
                n_vehicles,
                v_ego0,
                merge_len,
            } => write!(f, "platoon_merge({v_traffic}, {gap}, {n_vehicles}, {v_ego0}, {merge_len})"),
            Template::FastAdjacent {
                v_fast,
                behind,
                v_ego0,
                merge_len,
            } => write!(f, "fast_adjacent({v_fast}, {behind}, {v_ego0}, {merge_len})"),
        }
    }
}

impl FromStr for Template {
    type Err = SimError;

    /// Accepts a bare name (`platoon`, `platoon_merge`, `fast_adjacent`) for
    /// the defaults, or a name with all parameters, e.g.
    /// `platoon_merge(25, 60, 3, 18, 200)`.
    fn from_str(s: &str) -> Result<Self, SimError> {
        let bad = || SimError::UnknownTemplate(s.to_string());
        let s = s.trim();
        let (name, args) = match s.split_once('(') {
            Some((name, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(bad)?;
                let args: Result<Vec<f64>, _> = inner.split(',').map(|a| a.trim().parse::<f64>()).collect();
                (name.trim(), Some(args.map_err(|_| bad())?))
            }
            None => (s, None),
        };
        match (name, args.as_deref()) {
            ("platoon" | "platoon_merge", None) => Ok(Self::PLATOON),
            ("platoon" | "platoon_merge", Some(&[v_traffic, gap, n, v_ego0, merge_len])) => {
                if n < 0.0 || n.fract() != 0.0 {
                    return Err(bad());
                }
                Ok(Template::PlatoonMerge {
                    v_traffic,
                    gap,
                    n_vehicles: n as usize,
                    v_ego0,
                    merge_len,
                })
            }
            ("fast_adjacent", None) => Ok(Self::FAST_ADJACENT),
            ("fast_adjacent", Some(&[v_fast, behind, v_ego0, merge_len])) => Ok(Template::FastAdjacent {
                v_fast,
                behind,
                v_ego0,
                merge_len,
            }),
            _ => Err(bad()),
        }
    }
}

fn ramp_points(merge_len: f64) -> Vec<[f64; 2]> {
    let w = LANE_WIDTH;
    let mut ramp: Vec<[f64; 2]> = (0..=20)
        .map(|i| {
            let x = -APPROACH + APPROACH * i as f64 / 20.0;
            [x, -w - 10.0 * (x / APPROACH).powi(2)]
        })
        .collect();
    let steps = (merge_len / 10.0).ceil().max(1.0) as usize;
    ramp.extend((1..=steps).map(|i| [merge_len * i as f64 / steps as f64, -w]));
    ramp
}

/// Arc length along the ramp at which it meets x = 0.
pub fn window_start(merge_len: f64) -> f64 {
    let points: Vec<Vec2> = ramp_points(merge_len).iter().map(|&[x, y]| Vec2::new(x, y)).collect();
    ArcLengthSpline::fit(&points)
        .expect("ramp control points are distinct")
        .project(Vec2::new(0.0, -LANE_WIDTH))
}

/// Straight two-lane highway along +x (lane 1 on the right, lane 2 on the
/// left) and a ramp (lane 3) that curves in from the right and runs
/// alongside lane 1 for `merge_len` meters, starting at x = 0.
pub fn ramp_map(merge_len: f64) -> MapDocument {
    let w = LANE_WIDTH;
    let x_end = HIGHWAY_LENGTH - HIGHWAY_LEAD;
    let start = window_start(merge_len);
    MapDocument {
        desired_lane: 1,
        width_is_full: false,
        lanes: vec![
            LaneDocument {
                id: 1,
                control_points: vec![[-HIGHWAY_LEAD, 0.0], [x_end, 0.0]],
                width: WidthSpec::Constant(w),
                left: vec![[0.0, HIGHWAY_LENGTH, 2.0]],
                right: vec![[HIGHWAY_LEAD, HIGHWAY_LEAD + merge_len, 3.0]],
                is_merge_lane: false,
                desired_successor: None,
            },
            LaneDocument {
                id: 2,
                control_points: vec![[-HIGHWAY_LEAD, w], [x_end, w]],
                width: WidthSpec::Constant(w),
                left: vec![],
                right: vec![[0.0, HIGHWAY_LENGTH, 1.0]],
                is_merge_lane: false,
                desired_successor: None,
            },
            LaneDocument {
                id: 3,
                control_points: ramp_points(merge_len),
                width: WidthSpec::Constant(w),
                left: vec![[start, start + merge_len, 1.0]],
                right: vec![],
                is_merge_lane: true,
                desired_successor: None,
            },
        ],
    }
}

/// A generated scenario with its map, ready to be written out.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub map: MapDocument,
    pub scenario: ScenarioDocument,
}

impl SynthOutput {
    pub fn build(&self, cfg: &ModelConfig) -> Result<Scenario, SimError> {
        let map = LaneMap::from_document(&self.map)?;
        Scenario::from_document(&self.scenario, Arc::new(map), cfg)
    }
}

/// Materialize a template. Traffic is rolled out with the IDM from `seed`
/// and stored as recorded trajectories.
pub fn synth_scenario(template: &Template, seed: u64, cfg: &ModelConfig) -> Result<SynthOutput, SimError> {
    let merge_len = template.merge_len();
    if !(merge_len > 0.0) {
        return Err(SimError::Infeasible("merge length must be positive".into()));
    }
    let map_doc = ramp_map(merge_len);
    let map = LaneMap::from_document(&map_doc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let desired_offset = |v: f64| v - cfg.v_des;
    let vehicle = |x: f64, v: f64, idm_trait: f64| NonEgoState {
        p: x + HIGHWAY_LEAD,
        v,
        lane: LaneId(1),
        width: TRAFFIC_DIMS[0],
        length: TRAFFIC_DIMS[1],
        idm_trait,
        departed: false,
    };
    let (v_ego0, initial) = match *template {
        Template::PlatoonMerge {
            v_traffic,
            gap,
            n_vehicles,
            v_ego0,
            ..
        } => {
            if !(v_traffic >= 0.0 && gap > TRAFFIC_DIMS[1] && v_ego0 >= 0.0) {
                return Err(SimError::Infeasible(format!("{template}: vehicles would overlap")));
            }
            let traffic = (0..n_vehicles)
                .map(|i| {
                    let jitter: f64 = SPEED_JITTER * rng.sample::<f64, _>(StandardNormal);
                    vehicle(-gap * i as f64, v_traffic, desired_offset(v_traffic) + jitter)
                })
                .collect::<Vec<_>>();
            (v_ego0, traffic)
        }
        Template::FastAdjacent {
            v_fast,
            behind,
            v_ego0,
            merge_len,
        } => {
            let a_max = cfg.idm.a_max;
            let t_end = (-v_ego0 + (v_ego0 * v_ego0 + 2.0 * a_max * merge_len).sqrt()) / a_max;
            let reachable = v_ego0 + a_max * t_end;
            if !(v_fast > reachable) {
                return Err(SimError::Infeasible(format!(
                    "{template}: adjacent speed {v_fast} does not exceed reachable ego speed {reachable:.2}"
                )));
            }
            (v_ego0, vec![vehicle(-behind, v_fast, desired_offset(v_fast))])
        }
    };
    if initial.iter().any(|s| s.p < 0.0) {
        return Err(SimError::Infeasible(format!("{template}: traffic starts before the highway")));
    }
    let rolled = roll_traffic(&map, cfg, initial, TEMPLATE_DURATION, rng.random());
    let vehicles = (0..rolled[0].len())
        .map(|i| VehicleDocument::Recorded {
            dims: TRAFFIC_DIMS,
            states: rolled
                .iter()
                .enumerate()
                .map(|(k, step)| [k as f64, step[i].p, step[i].v, step[i].lane.0 as f64])
                .collect(),
        })
        .collect();
    let scenario = ScenarioDocument {
        map: PathBuf::from("map.json"),
        ego: EgoDocument {
            lane: 3,
            p: window_start(merge_len),
            d: 0.0,
            v: v_ego0,
            width: cfg.ego_width,
            length: cfg.ego_length,
        },
        vehicles,
        duration: TEMPLATE_DURATION,
        label: format!("{template} seed {seed}"),
        seed,
    };
    let out = SynthOutput { map: map_doc, scenario };
    out.build(cfg)?;
    Ok(out)
}
