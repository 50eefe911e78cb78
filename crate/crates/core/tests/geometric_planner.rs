mod common;

use std::collections::BTreeSet;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use snav::geometric_planner::{
    self, motion_valid, sample_informed, sample_state, state_valid, Algorithm, ClockMode,
    GeometricProblem, PlanError, PlannerConfig,
};
use snav::map_builder::point_in_contour;
use snav::scene_graph::{Room, SceneGraph};
use snav::{GlobalMap, MapParams, Point2, Rect, RoomId};

use common::{dense_valid, exact_wall_distance, load, rng, winding_contains};

fn work(timeout: f64, seed: u64) -> PlannerConfig {
    PlannerConfig {
        timeout,
        seed,
        clock: ClockMode::Work,
        ..PlannerConfig::default()
    }
}

fn single_room(w: f64, h: f64) -> (SceneGraph, GlobalMap) {
    let graph = SceneGraph::new(
        "map",
        Rect::new(Point2::new(0.0, 0.0), Point2::new(w, h)),
        vec![Room::rectangle("r1", Point2::new(0.0, 0.0), Point2::new(w, h))],
        Vec::new(),
    )
    .unwrap();
    let map = GlobalMap::build(&graph, &MapParams::default()).unwrap();
    (graph, map)
}

fn rooms(ids: &[&str]) -> Vec<RoomId> {
    ids.iter().map(|s| RoomId::new(*s)).collect()
}

#[test]
fn room_center_is_valid() {
    let (_, map) = load("threeroom.map");
    let problem = GeometricProblem::new(Point2::new(2.0, 2.0), Point2::new(6.0, 2.0))
        .restricted_to(rooms(&["r1", "r2"]), []);
    assert!(state_valid(&map, &problem, Point2::new(2.0, 2.0)));
}

#[test]
fn disallowed_room_is_invalid_only_when_constrained() {
    let (_, map) = load("threeroom.map");
    let free = GeometricProblem::new(Point2::new(2.0, 2.0), Point2::new(3.0, 2.0));
    let constrained = free.clone().restricted_to(rooms(&["r1"]), []);
    let p = Point2::new(10.0, 2.0);
    assert!(state_valid(&map, &free, p));
    assert!(!state_valid(&map, &constrained, p));
}

#[test]
fn state_validity_matches_oracle_on_random_points() {
    let (graph, map) = load("paper8.map");
    let allowed = rooms(&["r1", "r2", "r4"]);
    let problem = GeometricProblem::new(Point2::new(2.5, 3.0), Point2::new(8.5, 7.5))
        .restricted_to(allowed.clone(), []);
    let unconstrained = GeometricProblem::new(problem.start, problem.goal);
    let rings: Vec<Vec<Point2>> = graph
        .rooms
        .iter()
        .filter(|r| allowed.contains(&r.id))
        .map(|r| {
            let b = r.rect();
            vec![b.min, Point2::new(b.max.x, b.min.y), b.max, Point2::new(b.min.x, b.max.y)]
        })
        .collect();
    let bbox = map.bbox;
    let mut rng = rng(10);
    let mut disagreements = Vec::new();
    for _ in 0..10_000 {
        let p = Point2::new(
            rng.random_range(bbox.min.x - 0.5..bbox.max.x + 0.5),
            rng.random_range(bbox.min.y - 0.5..bbox.max.y + 0.5),
        );
        let clear = exact_wall_distance(map.segments(), p) >= problem.robot_radius && bbox.contains(p);
        let inside = rings.iter().any(|ring| winding_contains(ring, p));
        if state_valid(&map, &unconstrained, p) != clear {
            disagreements.push((p, "unconstrained"));
        }
        if state_valid(&map, &problem, p) != (clear && inside) {
            disagreements.push((p, "constrained"));
        }
    }
    assert!(disagreements.is_empty(), "{disagreements:?}");
}

#[test]
fn motion_validity_examples() {
    let (_, map) = load("threeroom.map");
    let problem = GeometricProblem::new(Point2::new(2.0, 2.0), Point2::new(10.0, 2.0));
    let a = Point2::new(2.0, 2.0);
    assert!(motion_valid(&map, &problem, a, a));
    // Through the wall between r1 and r2, away from the doorway.
    assert!(!motion_valid(&map, &problem, Point2::new(3.0, 0.8), Point2::new(5.0, 0.8)));
    // Straight through the 1 m doorway centered at (4, 2).
    let through = (Point2::new(3.0, 2.0), Point2::new(5.0, 2.0));
    assert!(motion_valid(&map, &problem, through.0, through.1));
    assert!(dense_valid(&map, &[through.0, through.1], problem.robot_radius));
}

#[test]
fn doorway_motion_agrees_with_dense_oracle() {
    let (_, map) = load("threeroom.map");
    let problem = GeometricProblem::new(Point2::new(2.0, 2.0), Point2::new(10.0, 2.0));
    let r = problem.robot_radius;
    let mut rng = rng(4);
    let mut checked = 0;
    for _ in 0..400 {
        let a = Point2::new(rng.random_range(3.0..3.6), rng.random_range(1.0..3.0));
        let b = Point2::new(rng.random_range(4.4..5.0), rng.random_range(1.0..3.0));
        if !state_valid(&map, &problem, a) || !state_valid(&map, &problem, b) {
            continue;
        }
        checked += 1;
        let verdict = motion_valid(&map, &problem, a, b);
        assert_eq!(verdict, dense_valid(&map, &[a, b], r), "{a} -> {b}");
    }
    assert!(checked > 100);
}

#[test]
fn uniform_room_sampling_mean_within_three_sigma() {
    let (_, map) = single_room(4.0, 3.0);
    let problem = GeometricProblem::new(Point2::new(1.0, 1.0), Point2::new(3.0, 2.0))
        .restricted_to(rooms(&["r1"]), []);
    let mut rng = rng(5);
    let n = 100_000;
    let (mut sx, mut sy) = (0.0, 0.0);
    for _ in 0..n {
        let p = sample_state(&problem, &map, 0.0, &mut rng).unwrap();
        assert!(p.x >= 0.0 && p.x <= 4.0 && p.y >= 0.0 && p.y <= 3.0);
        sx += p.x;
        sy += p.y;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let sigma = |w: f64| w / 12f64.sqrt() / (n as f64).sqrt();
    assert!((mx - 2.0).abs() < 3.0 * sigma(4.0), "mean x {mx}");
    assert!((my - 1.5).abs() < 3.0 * sigma(3.0), "mean y {my}");
}

#[test]
fn constrained_samples_fall_in_allowed_contours() {
    let (_, map) = load("paper8.map");
    let allowed = rooms(&["r1", "r4", "r8"]);
    let problem = GeometricProblem::new(Point2::new(2.5, 3.0), Point2::new(15.0, 12.0))
        .restricted_to(allowed.clone(), []);
    let contours: Vec<_> = map.contours.iter().filter(|c| allowed.contains(&c.room)).collect();
    let mut rng = rng(6);
    for _ in 0..20_000 {
        let p = sample_state(&problem, &map, 0.0, &mut rng).unwrap();
        assert!(contours.iter().any(|c| point_in_contour(c, p)), "{p}");
    }
}

#[test]
fn full_goal_bias_always_returns_goal() {
    let (_, map) = single_room(4.0, 3.0);
    let problem = GeometricProblem::new(Point2::new(1.0, 1.0), Point2::new(3.0, 2.0));
    let mut rng = rng(7);
    for _ in 0..100 {
        assert_eq!(sample_state(&problem, &map, 1.0, &mut rng).unwrap(), problem.goal);
    }
}

#[test]
fn empty_region_is_reported() {
    let (_, map) = single_room(4.0, 3.0);
    let problem = GeometricProblem::new(Point2::new(1.0, 1.0), Point2::new(3.0, 2.0))
        .restricted_to(rooms(&["nowhere"]), []);
    assert_eq!(sample_state(&problem, &map, 0.0, &mut rng(1)), Err(PlanError::EmptyRegion));
}

#[test]
fn informed_samples_stay_in_analytic_ellipse() {
    let problem = GeometricProblem::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0));
    let (a, b) = (6.0f64, 11f64.sqrt());
    let mut rng = rng(8);
    for _ in 0..20_000 {
        let p = sample_informed(&problem, 12.0, &mut rng).unwrap();
        let (x, y) = (p.x - 5.0, p.y);
        assert!(x * x / (a * a) + y * y / (b * b) <= 1.0 + 1e-12, "{p}");
    }
}

#[test]
fn degenerate_ellipse_collapses_to_segment() {
    let problem = GeometricProblem::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0));
    let mut rng = rng(9);
    for _ in 0..1000 {
        let p = sample_informed(&problem, 10.0, &mut rng).unwrap();
        assert_eq!(p.y, 0.0);
        assert!((0.0..=10.0).contains(&p.x));
    }
    assert!(sample_informed(&problem, 9.0, &mut rng).is_err());
}

#[test]
fn informed_samples_are_area_uniform() {
    // Rotated foci so the sampler's frame transform is exercised.
    let start = Point2::new(1.0, 2.0);
    let goal = Point2::new(7.0, 10.0);
    let problem = GeometricProblem::new(start, goal);
    let c_min = start.distance(goal);
    let c_best = 12.0;
    let a = c_best / 2.0;
    let b = (c_best * c_best - c_min * c_min).sqrt() / 2.0;
    let (cos, sin) = ((goal.x - start.x) / c_min, (goal.y - start.y) / c_min);
    let center = start.lerp(goal, 0.5);

    // Bin in the ellipse's own frame on the unit disc: 10 equal-area rings by
    // 10 equal angular sectors.
    let n = 100_000;
    let mut counts = [0u64; 100];
    let mut rng = rng(12);
    for _ in 0..n {
        let p = sample_informed(&problem, c_best, &mut rng).unwrap();
        let (dx, dy) = (p.x - center.x, p.y - center.y);
        let u = (cos * dx + sin * dy) / a;
        let v = (-sin * dx + cos * dy) / b;
        let r2 = (u * u + v * v).min(1.0 - 1e-15);
        let ring = (r2 * 10.0) as usize;
        let theta = v.atan2(u).rem_euclid(std::f64::consts::TAU);
        let sector = ((theta / std::f64::consts::TAU * 10.0) as usize).min(9);
        counts[ring * 10 + sector] += 1;
    }
    let expected = n as f64 / 100.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new(99.0).unwrap().cdf(chi2);
    assert!(p_value > 0.001, "chi2 {chi2}, p {p_value}");
}

#[test]
fn start_at_goal_needs_no_samples() {
    let (_, map) = single_room(10.0, 10.0);
    let p = Point2::new(5.0, 5.0);
    let out = geometric_planner::plan(&map, &GeometricProblem::new(p, p), &work(0.1, 1)).unwrap();
    let path = out.path.unwrap();
    assert_eq!(path.length, 0.0);
    assert_eq!(out.stats.samples_created, 0);
}

#[test]
fn straight_line_in_empty_room() {
    let (_, map) = single_room(10.0, 10.0);
    let problem = GeometricProblem::new(Point2::new(1.0, 1.0), Point2::new(9.0, 9.0));
    let out = geometric_planner::plan(&map, &problem, &work(0.1, 3)).unwrap();
    assert!(out.stats.solved);
    let len = out.path.unwrap().length;
    let opt = 128f64.sqrt();
    assert!(len >= opt - 1e-9 && len <= opt * 1.05, "{len}");
}

#[test]
fn seed_42_is_bit_identical() {
    let (_, map) = load("paper8.map");
    let problem = GeometricProblem::new(Point2::new(2.5, 3.0), Point2::new(15.0, 12.0));
    let cfg = work(0.05, 42);
    let a = geometric_planner::plan(&map, &problem, &cfg).unwrap();
    let b = geometric_planner::plan(&map, &problem, &cfg).unwrap();
    assert_eq!(a.stats, b.stats);
    let (pa, pb) = (a.path.unwrap(), b.path.unwrap());
    assert_eq!(pa.waypoints.len(), pb.waypoints.len());
    assert!(pa.waypoints.iter().zip(&pb.waypoints).all(|(x, y)| x.bitwise_eq(y)));
    assert_eq!(pa.length.to_bits(), pb.length.to_bits());
}

#[test]
fn iteration_budget_stops_the_planner() {
    let (_, map) = single_room(10.0, 10.0);
    let problem = GeometricProblem::new(Point2::new(1.0, 1.0), Point2::new(9.0, 9.0));
    let cfg = PlannerConfig {
        timeout: 0.0,
        max_iterations: 250,
        ..PlannerConfig::default()
    };
    let out = geometric_planner::plan(&map, &problem, &cfg).unwrap();
    assert_eq!(out.stats.iterations, 250);
    assert!(out.stats.samples_created >= out.stats.iterations);
}

#[test]
fn anytime_cost_never_increases() {
    let (_, map) = load("paper8.map");
    let problem = GeometricProblem::new(Point2::new(1.5, 1.5), Point2::new(15.0, 12.0));
    for algorithm in [Algorithm::RrtStar, Algorithm::InformedRrtStar] {
        for seed in 0..5 {
            let cfg = PlannerConfig {
                algorithm,
                trace: true,
                ..work(0.05, seed)
            };
            let out = geometric_planner::plan(&map, &problem, &cfg).unwrap();
            let history = out.trace.unwrap().cost_history;
            assert!(history.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].0 >= w[0].0), "{history:?}");
            if let Some(&(_, last)) = history.last() {
                assert_eq!(last, out.stats.best_cost);
            }
        }
    }
}

#[test]
fn rrt_stops_at_first_solution() {
    let (_, map) = single_room(10.0, 10.0);
    let problem = GeometricProblem::new(Point2::new(1.0, 1.0), Point2::new(9.0, 9.0));
    let cfg = PlannerConfig {
        algorithm: Algorithm::Rrt,
        ..work(0.1, 2)
    };
    let out = geometric_planner::plan(&map, &problem, &cfg).unwrap();
    assert!(out.stats.solved);
    assert!(out.stats.planning_time < 0.1);
}

#[test]
fn invalid_endpoints_are_errors() {
    let (_, map) = load("threeroom.map");
    let cfg = work(0.01, 0);
    let inside_wall = Point2::new(4.0, 0.5);
    let ok = Point2::new(2.0, 2.0);
    let e = geometric_planner::plan(&map, &GeometricProblem::new(inside_wall, ok), &cfg).unwrap_err();
    assert_eq!(e, PlanError::InvalidStart(inside_wall));
    let e = geometric_planner::plan(&map, &GeometricProblem::new(ok, inside_wall), &cfg).unwrap_err();
    assert_eq!(e, PlanError::InvalidGoal(inside_wall));
}

#[test]
fn returned_paths_are_valid_and_lengths_consistent() {
    let (_, map) = load("paper8.map");
    let problem = GeometricProblem::new(Point2::new(1.5, 1.5), Point2::new(15.0, 12.0));
    for algorithm in [Algorithm::Rrt, Algorithm::RrtStar, Algorithm::InformedRrtStar] {
        let cfg = PlannerConfig {
            algorithm,
            ..work(0.05, 17)
        };
        let path = geometric_planner::plan(&map, &problem, &cfg).unwrap().path.unwrap();
        assert!(path.first().bitwise_eq(&problem.start));
        assert!(path.last().bitwise_eq(&problem.goal));
        let sum: f64 = path.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum();
        assert!((sum - path.length).abs() < 1e-9);
        for w in path.waypoints.windows(2) {
            assert!(motion_valid(&map, &problem, w[0], w[1]));
        }
        assert!(dense_valid(&map, &path.waypoints, problem.robot_radius), "{algorithm:?}");
    }
}

#[test]
fn constrained_paths_stay_in_reduced_free_space() {
    let (graph, map) = load("paper8.map");
    let topo = snav::semantic_planner::build_topology(&graph, 1.0);
    let (start, goal) = (Point2::new(1.5, 1.5), Point2::new(15.0, 12.0));
    let route = snav::semantic_planner::semantic_route(&topo, &graph, start, goal).unwrap();
    let problem = GeometricProblem::new(start, goal)
        .restricted_to(route.free_space.iter().cloned(), route.doorways.iter().cloned());
    let contours: Vec<_> = map.contours.iter().filter(|c| route.free_space.contains(&c.room)).collect();
    let openings: Vec<Rect> = route
        .doorways
        .iter()
        .map(|d| map.carved.opening(d).unwrap().region)
        .collect();
    for seed in 0..5 {
        let out = geometric_planner::plan(&map, &problem, &work(0.05, seed)).unwrap();
        for p in out.path.unwrap().waypoints {
            assert!(
                contours.iter().any(|c| point_in_contour(c, p)) || openings.iter().any(|r| r.contains(p)),
                "{p} outside reduced free space"
            );
        }
    }
}

#[test]
fn traced_samples_respect_the_region() {
    let (_, map) = load("paper8.map");
    let allowed: BTreeSet<RoomId> = rooms(&["r1", "r2"]).into_iter().collect();
    let problem = GeometricProblem::new(Point2::new(1.5, 1.5), Point2::new(8.0, 3.0))
        .restricted_to(allowed.iter().cloned(), []);
    let cfg = PlannerConfig {
        trace: true,
        ..work(0.02, 5)
    };
    let out = geometric_planner::plan(&map, &problem, &cfg).unwrap();
    let contours: Vec<_> = map.contours.iter().filter(|c| allowed.contains(&c.room)).collect();
    for s in out.trace.unwrap().samples {
        assert!(s.point == problem.goal || contours.iter().any(|c| point_in_contour(c, s.point)));
    }
}
