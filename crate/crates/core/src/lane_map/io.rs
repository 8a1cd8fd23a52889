//! JSON lane-map format.
//!
//! ```json
//! { "desired_lane": 1,
//!   "lanes": [ { "id": 1, "control_points": [[0,0],[500,0]], "width": 3.5,
//!                "left": [[0,500,2]], "right": [], "is_merge_lane": false } ] }
//! ```
//!
//! `width` is the physical lane width (a number or `[[p, w], ...]`). Unless
//! `width_is_full` is set, the lateral threshold used by the model is half of it.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spline::ArcLengthSpline;
use super::{Lane, LaneId, LaneMap, MapError, NeighborSpan, Side, WidthProfile};
use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub desired_lane: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub width_is_full: bool,
    pub lanes: Vec<LaneDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneDocument {
    pub id: u32,
    pub control_points: Vec<[f64; 2]>,
    pub width: WidthSpec,
    #[serde(default)]
    pub left: Vec<[f64; 3]>,
    #[serde(default)]
    pub right: Vec<[f64; 3]>,
    #[serde(default)]
    pub is_merge_lane: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub desired_successor: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WidthSpec {
    Constant(f64),
    Table(Vec<[f64; 2]>),
}

impl MapDocument {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, MapError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, MapError> {
        serde_json::from_str(text).map_err(|e| MapError::Schema {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map documents always serialize")
    }
}

fn invalid(msg: impl Into<String>) -> MapError {
    MapError::Validation(msg.into())
}

fn spans(raw: &[[f64; 3]], owner: u32, side: &str) -> Result<Vec<NeighborSpan>, MapError> {
    let mut out = Vec::with_capacity(raw.len());
    for &[start, end, id] in raw {
        if !(start.is_finite() && end.is_finite()) || end < start {
            return Err(invalid(format!(
                "lane {owner}: {side} neighbor span [{start}, {end}] is not an interval"
            )));
        }
        if id.fract() != 0.0 || id < 1.0 {
            return Err(invalid(format!(
                "lane {owner}: {side} neighbor id {id} is not a positive integer"
            )));
        }
        out.push(NeighborSpan {
            start,
            end,
            lane: LaneId(id as u32),
        });
    }
    out.sort_by(|a, b| a.start.total_cmp(&b.start));
    Ok(out)
}

fn width_profile(spec: &WidthSpec, owner: u32, factor: f64) -> Result<WidthProfile, MapError> {
    let profile = match spec {
        WidthSpec::Constant(w) => WidthProfile::Constant(*w),
        WidthSpec::Table(rows) => {
            if rows.is_empty() {
                return Err(invalid(format!("lane {owner}: empty width table")));
            }
            let mut rows: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            if rows.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(invalid(format!("lane {owner}: duplicate width sample")));
            }
            WidthProfile::Table(rows)
        }
    };
    let positive = match &profile {
        WidthProfile::Constant(w) => *w > 0.0 && w.is_finite(),
        WidthProfile::Table(rows) => rows.iter().all(|r| r.1 > 0.0 && r.1.is_finite()),
    };
    if !positive {
        return Err(invalid(format!("lane {owner}: width must be positive")));
    }
    Ok(profile.scaled(factor))
}

pub(super) fn build(doc: &MapDocument) -> Result<LaneMap, MapError> {
    let m = doc.lanes.len();
    if m == 0 {
        return Err(invalid("map has no lanes"));
    }
    let ids: BTreeSet<u32> = doc.lanes.iter().map(|l| l.id).collect();
    let expected: BTreeSet<u32> = (1..=m as u32).collect();
    if ids != expected {
        return Err(invalid(format!(
            "lane ids must be unique and exactly 1..={m}, got {:?}",
            doc.lanes.iter().map(|l| l.id).collect::<Vec<_>>()
        )));
    }
    if !ids.contains(&doc.desired_lane) {
        return Err(invalid(format!(
            "desired lane {} is not in the map",
            doc.desired_lane
        )));
    }
    let factor = if doc.width_is_full { 1.0 } else { 0.5 };

    let mut lanes: Vec<Option<Lane>> = vec![None; m];
    for ld in &doc.lanes {
        let points: Vec<Vec2> = ld.control_points.iter().map(|&p| p.into()).collect();
        if points.iter().any(|p| !p.is_finite()) {
            return Err(invalid(format!("lane {}: non-finite control point", ld.id)));
        }
        let centerline = ArcLengthSpline::fit(&points).ok_or_else(|| {
            invalid(format!(
                "lane {}: zero-length or degenerate centerline",
                ld.id
            ))
        })?;
        let lane = Lane {
            id: LaneId(ld.id),
            centerline,
            width: width_profile(&ld.width, ld.id, factor)?,
            left: spans(&ld.left, ld.id, "left")?,
            right: spans(&ld.right, ld.id, "right")?,
            is_merge_lane: ld.is_merge_lane,
            desired_successor: ld.desired_successor.map(LaneId),
        };
        for s in lane.left.iter().chain(lane.right.iter()) {
            if !ids.contains(&s.lane.0) || s.lane == lane.id {
                return Err(invalid(format!(
                    "lane {}: neighbor {} does not exist",
                    ld.id, s.lane
                )));
            }
        }
        if let Some(succ) = lane.desired_successor {
            if !ids.contains(&succ.0) {
                return Err(invalid(format!(
                    "lane {}: desired successor {succ} does not exist",
                    ld.id
                )));
            }
        }
        lanes[ld.id as usize - 1] = Some(lane);
    }
    let map = LaneMap {
        lanes: lanes.into_iter().map(|l| l.expect("ids checked")).collect(),
        desired_lane: LaneId(doc.desired_lane),
    };
    check_symmetry(&map)?;
    Ok(map)
}

/// Every declared neighbor span must be mirrored by the neighbor lane at the
/// geometrically corresponding arc positions.
fn check_symmetry(map: &LaneMap) -> Result<(), MapError> {
    const FRACTIONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
    for lane in map.lanes() {
        for (side, mirror) in [(Side::Left, Side::Right), (Side::Right, Side::Left)] {
            for span in lane.neighbors(side) {
                let other = map.lane_unchecked(span.lane);
                for f in FRACTIONS {
                    let p = lane.clamp(span.start + f * (span.end - span.start));
                    let q = other.project(lane.centerline.position(p));
                    if other.neighbor_at(q, mirror) != Some(lane.id) {
                        return Err(invalid(format!(
                            "asymmetric neighbors: lane {} declares {:?} neighbor {} at p={p:.2}, \
                             but lane {} has no {:?} neighbor {} at p={q:.2}",
                            lane.id, side, span.lane, other.id, mirror, lane.id
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}
