mod common;

use common::*;
use merge_planner::lane_map::MapDocument;
use merge_planner::{Lane, LaneId, LaneMap, MapError, Side, Vec2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn first_lane(map: &LaneMap) -> &Lane {
    map.lane(LaneId(1)).unwrap()
}

#[test]
fn two_lane_fixture_loads_with_mutual_neighbors() {
    let map = LaneMap::load(fixture("two_lanes.json")).unwrap();
    assert_eq!(map.len(), 2);
    let a = map.lane(LaneId(1)).unwrap();
    let b = map.lane(LaneId(2)).unwrap();
    assert_eq!(a.neighbor_at(50.0, Side::Right), Some(LaneId(2)));
    assert_eq!(b.neighbor_at(50.0, Side::Left), Some(LaneId(1)));
    assert_eq!(a.neighbor_at(50.0, Side::Left), None);
    assert_eq!(a.width(3.0), 1.875);
}

#[test]
fn neighbor_relations_are_symmetric_under_reprojection() {
    let map = LaneMap::load(fixture("ramp_merge.json")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for lane in map.lanes() {
        for (side, mirror) in [(Side::Left, Side::Right), (Side::Right, Side::Left)] {
            for _ in 0..200 {
                let p = rng.random_range(0.0..lane.length());
                if let Some(other) = lane.neighbor_at(p, side) {
                    let other = map.lane(other).unwrap();
                    let q = other.project(lane.position(p).unwrap());
                    assert_eq!(other.neighbor_at(q, mirror), Some(lane.id()), "lane {} p {p}", lane.id());
                }
            }
        }
    }
}

#[test]
fn ramp_fixture_has_left_neighbor_only_in_the_merge_window() {
    let map = LaneMap::load(fixture("ramp_merge.json")).unwrap();
    assert_eq!(map.len(), 3);
    assert_eq!(map.desired_lane(), LaneId(2));
    let ramp = map.lane(LaneId(3)).unwrap();
    assert!(ramp.is_merge_lane());
    assert_eq!(ramp.desired_successor(), Some(LaneId(2)));
    let window = ramp.length() - 200.0;
    assert_eq!(ramp.neighbor_at(window + 100.0, Side::Left), Some(LaneId(2)));
    assert_eq!(ramp.neighbor_at(ramp.length(), Side::Left), Some(LaneId(2)));
    assert_eq!(ramp.neighbor_at(window - 5.0, Side::Left), None);
    assert_eq!(ramp.neighbor_at(window + 100.0, Side::Right), None);
}

#[test]
fn asymmetric_neighbors_are_rejected() {
    let err = LaneMap::load(fixture("asymmetric.json")).unwrap_err();
    assert!(matches!(err, MapError::Validation(ref m) if m.contains("asymmetric")), "{err}");
}

#[test]
fn malformed_file_reports_position() {
    match LaneMap::load(fixture("malformed.json")).unwrap_err() {
        MapError::Schema { path, line, .. } => {
            assert!(path.ends_with("malformed.json"));
            assert_eq!(line, 5);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn missing_file_names_the_path() {
    let err = LaneMap::load(fixture("absent.json")).unwrap_err();
    assert!(matches!(err, MapError::Io { ref path, .. } if path.ends_with("absent.json")));
}

#[test]
fn degenerate_maps_are_rejected() {
    let zero = r#"{"desired_lane": 1, "lanes": [{"id": 1, "control_points": [[1, 1], [1, 1]], "width": 3.5}]}"#;
    let dup = r#"{"desired_lane": 1, "lanes": [
        {"id": 1, "control_points": [[0, 0], [10, 0]], "width": 3.5},
        {"id": 1, "control_points": [[0, 4], [10, 4]], "width": 3.5}]}"#;
    let no_target = r#"{"desired_lane": 4, "lanes": [{"id": 1, "control_points": [[0, 0], [10, 0]], "width": 3.5}]}"#;
    let bad_width = r#"{"desired_lane": 1, "lanes": [{"id": 1, "control_points": [[0, 0], [10, 0]], "width": [[0, 3.5], [5, 0]]}]}"#;
    for text in [zero, dup, no_target, bad_width] {
        let doc = MapDocument::parse(text, "inline").unwrap();
        assert!(matches!(LaneMap::from_document(&doc), Err(MapError::Validation(_))), "{text}");
    }
}

#[test]
fn document_round_trips_through_json() {
    let doc = MapDocument::read(fixture("ramp_merge.json")).unwrap();
    let again = MapDocument::parse(&doc.to_json(), "again").unwrap();
    assert_eq!(doc, again);
    assert_eq!(LaneMap::from_document(&doc).unwrap(), LaneMap::from_document(&again).unwrap());
}

#[test]
fn quarter_circle_position_matches_exact_arc() {
    let map = quarter_circle(true);
    let lane = first_lane(&map);
    let expected: Vec2 = circle_point(25.0, true).into();
    assert!(lane.position(25.0).unwrap().distance(expected) < 1e-3);
    assert!((lane.length() - CIRCLE_RADIUS * std::f64::consts::FRAC_PI_2).abs() < 1e-3);
}

/// Length of a dense polyline through the curve between `a` and `b`.
fn polyline_length(lane: &Lane, a: f64, b: f64, samples: usize) -> f64 {
    let mut total = 0.0;
    let mut prev = lane.position(a).unwrap();
    for k in 1..=samples {
        let next = lane.position(a + (b - a) * k as f64 / samples as f64).unwrap();
        total += prev.distance(next);
        prev = next;
    }
    total
}

#[test]
fn parameter_is_arc_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, map) in curved_fixtures() {
        let lane = first_lane(&map);
        for _ in 0..20 {
            let a = rng.random_range(0.0..lane.length());
            let b = rng.random_range(a..=lane.length());
            if b - a < 1.0 {
                continue;
            }
            let measured = polyline_length(lane, a, b, 20_000);
            assert!(((measured - (b - a)) / (b - a)).abs() < 1e-4, "{name}: [{a}, {b}] measured {measured}");
        }
    }
}

#[test]
fn headings_are_unit_and_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-3;
    for (name, map) in curved_fixtures() {
        let lane = first_lane(&map);
        for _ in 0..1000 {
            let p = rng.random_range(0.0..=lane.length());
            let t = lane.heading(p).unwrap();
            assert!((t.norm() - 1.0).abs() < 1e-9, "{name}");
            let (lo, hi) = ((p - h).max(0.0), (p + h).min(lane.length()));
            let fd = (lane.position(hi).unwrap() - lane.position(lo).unwrap()).normalized();
            assert!(fd.distance(t) < 1e-3, "{name} at {p}");
        }
    }
}

#[test]
fn circle_heading_rotates_with_arc_length() {
    let map = quarter_circle(true);
    let lane = first_lane(&map);
    for p in [5.0, 20.0, 40.0, 70.0] {
        let expected = Vec2::from_angle(p / CIRCLE_RADIUS);
        assert!(lane.heading(p).unwrap().distance(expected) < 1e-4, "p {p}");
    }
}

#[test]
fn curvature_sign_and_magnitude() {
    let straight = straight();
    for p in [0.0, 33.0, 100.0] {
        assert!(first_lane(&straight).curvature(p).unwrap().abs() < 1e-9);
    }
    for (ccw, sign) in [(true, 1.0), (false, -1.0)] {
        let map = quarter_circle(ccw);
        let lane = first_lane(&map);
        let mut p = 10.0;
        while p < lane.length() - 10.0 {
            let k = lane.curvature(p).unwrap();
            assert!((k - sign / CIRCLE_RADIUS).abs() < 0.01 / CIRCLE_RADIUS, "ccw {ccw} p {p}: {k}");
            p += 2.5;
        }
    }
}

#[test]
fn curvature_matches_heading_finite_differences() {
    let h = 1e-3;
    for (name, map) in curved_fixtures() {
        let lane = first_lane(&map);
        let mut p = 5.0;
        while p < lane.length() - 5.0 {
            let t0 = lane.heading(p - h).unwrap();
            let t1 = lane.heading(p + h).unwrap();
            let fd = t0.cross(t1).atan2(t0.dot(t1)) / (2.0 * h);
            let k = lane.curvature(p).unwrap();
            assert!((fd - k).abs() <= 0.01 * k.abs().max(1e-3), "{name} p {p}: {k} vs {fd}");
            p += 3.0;
        }
    }
}

#[test]
fn left_offset_moves_away_from_the_center_of_a_right_bend() {
    let map = quarter_circle(false);
    let lane = first_lane(&map);
    let center = Vec2::new(0.0, -CIRCLE_RADIUS);
    let p = 40.0;
    let inner = lane.offset_position(p, -1.0).unwrap().distance(center);
    let outer = lane.offset_position(p, 1.0).unwrap().distance(center);
    assert!(outer > inner);
    let map = quarter_circle(true);
    let lane = first_lane(&map);
    let center = Vec2::new(0.0, CIRCLE_RADIUS);
    assert!(lane.offset_position(p, 1.0).unwrap().distance(center) < lane.offset_position(p, -1.0).unwrap().distance(center));
}

#[test]
fn projection_agrees_with_dense_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (name, map) in [("circle", quarter_circle(true)), ("clothoid", clothoid())] {
        let lane = first_lane(&map);
        let n = 100_000;
        let samples: Vec<(f64, Vec2)> = (0..=n)
            .map(|k| {
                let p = lane.length() * k as f64 / n as f64;
                (p, lane.position(p).unwrap())
            })
            .collect();
        let resolution = lane.length() / n as f64;
        for _ in 0..50 {
            let p = rng.random_range(0.0..lane.length());
            let d = rng.random_range(-5.0..5.0);
            let point = lane.offset_position(p, d).unwrap();
            let best = samples
                .iter()
                .min_by(|a, b| a.1.distance(point).total_cmp(&b.1.distance(point)))
                .unwrap()
                .0;
            let got = lane.project(point);
            assert!((got - best).abs() <= resolution, "{name}: {got} vs {best}");
        }
    }
}

#[test]
fn projection_of_centerline_points_is_identity() {
    for (name, map) in curved_fixtures() {
        let lane = first_lane(&map);
        for p in [0.0, 0.5, 37.5, lane.length() / 2.0, lane.length()] {
            let q = lane.project(lane.position(p).unwrap());
            assert!((q - p).abs() < 1e-4, "{name}: {p} -> {q}");
        }
    }
}

#[test]
fn signed_distance_examples() {
    let map = straight();
    let lane = first_lane(&map);
    assert!((lane.signed_distance(Vec2::new(10.0, -1.5)) + 1.5).abs() < 1e-12);
    let map = clothoid();
    let lane = first_lane(&map);
    for p in [3.0, 60.0, 110.0] {
        assert!(lane.signed_distance(lane.position(p).unwrap()).abs() < 1e-6);
    }
}

fn fixture_strategy() -> impl Strategy<Value = usize> {
    0usize..3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn offset_round_trip(idx in fixture_strategy(), u in 0.0f64..=1.0, v in -1.0f64..=1.0) {
        let fixtures = curved_fixtures();
        let (name, map) = &fixtures[idx];
        let lane = first_lane(map);
        let p = u * lane.length();
        let d = v * lane.width(p);
        prop_assume!((d * lane.curvature(p).unwrap()).abs() < 0.5);
        let point = lane.offset_position(p, d).unwrap();
        let (p2, d2) = lane.frenet(point);
        prop_assert!((p2 - p).abs() < 1e-4, "{} p {} -> {}", name, p, p2);
        prop_assert!((d2 - d).abs() < 1e-6, "{} d {} -> {}", name, d, d2);
        prop_assert!((lane.signed_distance(point) - d).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_positions_are_errors(extra in 1e-6f64..1e3) {
        let map = straight();
        let lane = first_lane(&map);
        prop_assert!(lane.position(lane.length() + extra).is_err());
        prop_assert!(lane.offset_position(-extra, 0.0).is_err());
        prop_assert!(lane.curvature(-extra).is_err());
    }
}
