#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use merge_planner::lane_map::{LaneDocument, MapDocument, WidthSpec};
use merge_planner::LaneMap;

pub const CIRCLE_RADIUS: f64 = 50.0;
/// Clothoid with curvature `s / CLOTHOID_A2`.
pub const CLOTHOID_A2: f64 = 2000.0;
pub const CLOTHOID_LENGTH: f64 = 120.0;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn single_lane(points: Vec<[f64; 2]>, width: f64) -> LaneMap {
    let doc = MapDocument {
        desired_lane: 1,
        width_is_full: true,
        lanes: vec![LaneDocument {
            id: 1,
            control_points: points,
            width: WidthSpec::Constant(width),
            left: vec![],
            right: vec![],
            is_merge_lane: false,
            desired_successor: None,
        }],
    };
    LaneMap::from_document(&doc).expect("fixture map is valid")
}

pub fn straight() -> LaneMap {
    single_lane(vec![[0.0, 0.0], [100.0, 0.0]], 1.875)
}

/// Quarter circle of radius 50 starting at the origin with heading +x.
/// Counter-clockwise bends left, clockwise bends right.
pub fn quarter_circle(counter_clockwise: bool) -> LaneMap {
    let sign = if counter_clockwise { 1.0 } else { -1.0 };
    let points = (0..=90)
        .map(|deg| {
            let t = (deg as f64).to_radians().min(FRAC_PI_2);
            [CIRCLE_RADIUS * t.sin(), sign * CIRCLE_RADIUS * (1.0 - t.cos())]
        })
        .collect();
    single_lane(points, 1.875)
}

/// Exact point of the quarter circle at arc length `s`.
pub fn circle_point(s: f64, counter_clockwise: bool) -> [f64; 2] {
    let sign = if counter_clockwise { 1.0 } else { -1.0 };
    let t = s / CIRCLE_RADIUS;
    [CIRCLE_RADIUS * t.sin(), sign * CIRCLE_RADIUS * (1.0 - t.cos())]
}

/// Clothoid sampled every 2 m by Simpson integration of its heading.
pub fn clothoid() -> LaneMap {
    let heading = |s: f64| s * s / (2.0 * CLOTHOID_A2);
    let mut points = vec![[0.0, 0.0]];
    let (mut x, mut y) = (0.0, 0.0);
    let step = 2.0;
    let sub = 64;
    let mut s = 0.0;
    while s < CLOTHOID_LENGTH - 1e-9 {
        let h = step / sub as f64;
        for k in 0..sub {
            let a = s + k as f64 * h;
            let (t0, t1, t2) = (heading(a), heading(a + 0.5 * h), heading(a + h));
            x += h / 6.0 * (t0.cos() + 4.0 * t1.cos() + t2.cos());
            y += h / 6.0 * (t0.sin() + 4.0 * t1.sin() + t2.sin());
        }
        s += step;
        points.push([x, y]);
    }
    single_lane(points, 1.875)
}

pub fn curved_fixtures() -> Vec<(&'static str, LaneMap)> {
    vec![
        ("straight", straight()),
        ("circle", quarter_circle(true)),
        ("clothoid", clothoid()),
    ]
}
