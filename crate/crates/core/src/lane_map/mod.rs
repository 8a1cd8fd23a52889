//! Discretized highway topology.
//!
//! Each lane carries a centerline parameterized by arc length `p`, a width
//! profile and piecewise neighbor relations. The queries here provide the
//! lane-frame mappings used everywhere else: position, heading, curvature,
//! projection of a global point onto the lane, lateral offsetting and the
//! signed lateral distance of a global point.

mod io;
pub mod spline;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
pub use io::{LaneDocument, MapDocument, WidthSpec};
use spline::ArcLengthSpline;

/// Slack allowed when checking `0 <= p <= length`.
const RANGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("failed to read map {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed map {path} at line {line}, column {column}: {message}")]
    Schema {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid map: {0}")]
    Validation(String),
    #[error("arc length {p} outside lane {lane} of length {length}")]
    OutOfRange { lane: LaneId, p: f64, length: f64 },
}

/// Lateral extent of a lane as a function of arc length.
#[derive(Debug, Clone, PartialEq)]
pub enum WidthProfile {
    Constant(f64),
    /// Piecewise-linear through `(p, w)` samples sorted by `p`, held constant
    /// beyond the first and last sample.
    Table(Vec<(f64, f64)>),
}

impl WidthProfile {
    pub fn at(&self, p: f64) -> f64 {
        match self {
            WidthProfile::Constant(w) => *w,
            WidthProfile::Table(rows) => {
                let first = rows[0];
                let last = rows[rows.len() - 1];
                if p <= first.0 {
                    return first.1;
                }
                if p >= last.0 {
                    return last.1;
                }
                let i = rows.partition_point(|r| r.0 <= p);
                let (p0, w0) = rows[i - 1];
                let (p1, w1) = rows[i];
                w0 + (w1 - w0) * (p - p0) / (p1 - p0)
            }
        }
    }

    fn scaled(&self, factor: f64) -> WidthProfile {
        match self {
            WidthProfile::Constant(w) => WidthProfile::Constant(w * factor),
            WidthProfile::Table(rows) => {
                WidthProfile::Table(rows.iter().map(|&(p, w)| (p, w * factor)).collect())
            }
        }
    }
}

/// A neighbor lane declared over `[start, end]` of this lane's arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSpan {
    pub start: f64,
    pub end: f64,
    pub lane: LaneId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    id: LaneId,
    centerline: ArcLengthSpline,
    width: WidthProfile,
    left: Vec<NeighborSpan>,
    right: Vec<NeighborSpan>,
    is_merge_lane: bool,
    desired_successor: Option<LaneId>,
}

impl Lane {
    pub fn id(&self) -> LaneId {
        self.id
    }

    /// Total arc length.
    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    pub fn is_merge_lane(&self) -> bool {
        self.is_merge_lane
    }

    pub fn desired_successor(&self) -> Option<LaneId> {
        self.desired_successor
    }

    pub fn centerline(&self) -> &ArcLengthSpline {
        &self.centerline
    }

    pub fn neighbors(&self, side: Side) -> &[NeighborSpan] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn check_range(&self, p: f64) -> Result<f64, MapError> {
        let length = self.length();
        if p.is_nan() || p < -RANGE_EPS || p > length + RANGE_EPS {
            return Err(MapError::OutOfRange {
                lane: self.id,
                p,
                length,
            });
        }
        Ok(p.clamp(0.0, length))
    }

    /// Clamp `p` into the lane. For callers that have decided clamping is meaningful.
    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(0.0, self.length())
    }

    /// Centerline point at arc length `p`.
    pub fn position(&self, p: f64) -> Result<Vec2, MapError> {
        Ok(self.centerline.position(self.check_range(p)?))
    }

    /// Unit tangent of the centerline at `p`.
    pub fn heading(&self, p: f64) -> Result<Vec2, MapError> {
        Ok(self.centerline.heading(self.check_range(p)?))
    }

    /// Signed curvature at `p`; positive when the lane bends to the left.
    pub fn curvature(&self, p: f64) -> Result<f64, MapError> {
        Ok(self.centerline.curvature(self.check_range(p)?))
    }

    /// Point `d` meters to the left (negative: right) of the centerline at `p`.
    pub fn offset_position(&self, p: f64, d: f64) -> Result<Vec2, MapError> {
        let p = self.check_range(p)?;
        let (pos, d1, _) = self.centerline.eval(p);
        Ok(pos + d1.normalized().rot90() * d)
    }

    /// Arc length of the centerline point closest to `point`.
    pub fn project(&self, point: Vec2) -> f64 {
        self.centerline.project(point)
    }

    /// Signed lateral distance of `point` from the centerline, positive to
    /// the left of the lane heading.
    pub fn signed_distance(&self, point: Vec2) -> f64 {
        self.frenet(point).1
    }

    /// `(p, d)` lane coordinates of a global point.
    pub fn frenet(&self, point: Vec2) -> (f64, f64) {
        let p = self.project(point);
        let (pos, d1, _) = self.centerline.eval(p);
        (p, d1.normalized().rot90().dot(point - pos))
    }

    /// Lateral threshold `w(p)`: distance from the centerline to the lane edge.
    pub fn width(&self, p: f64) -> f64 {
        self.width.at(p)
    }

    pub fn neighbor_at(&self, p: f64, side: Side) -> Option<LaneId> {
        self.neighbors(side)
            .iter()
            .find(|s| s.start <= p && p <= s.end)
            .map(|s| s.lane)
    }
}

/// All lanes of a highway section plus the target lane of the merge.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneMap {
    lanes: Vec<Lane>,
    desired_lane: LaneId,
}

impl LaneMap {
    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn desired_lane(&self) -> LaneId {
        self.desired_lane
    }

    pub fn lane(&self, id: LaneId) -> Option<&Lane> {
        let idx = (id.0 as usize).checked_sub(1)?;
        self.lanes.get(idx)
    }

    /// Lane lookup for ids already validated against this map.
    pub(crate) fn lane_unchecked(&self, id: LaneId) -> &Lane {
        &self.lanes[id.0 as usize - 1]
    }

    /// Build from a parsed document, fitting every centerline and validating
    /// the topology.
    pub fn from_document(doc: &MapDocument) -> Result<Self, MapError> {
        io::build(doc)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, MapError> {
        let doc = MapDocument::read(path)?;
        Self::from_document(&doc)
    }
}
