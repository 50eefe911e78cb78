//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snav::scene_graph::{Doorway, Room, SceneGraph};
use snav::{GlobalMap, MapParams, Point2, Rect, WallSegment};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps").join(name)
}

pub fn load(name: &str) -> (SceneGraph, GlobalMap) {
    let graph = snav::load_map(fixture(name)).expect("fixture parses");
    let map = GlobalMap::build(&graph, &MapParams::default()).expect("fixture builds");
    (graph, map)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// --- distances -------------------------------------------------------------

/// Distance from `p` to the segment `[a, b]` by clamped projection.
pub fn exact_point_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.x + t * dx, a.y + t * dy);
    ((p.x - qx).powi(2) + (p.y - qy).powi(2)).sqrt()
}

/// Minimum over every wall of the exact point-to-segment distance.
pub fn exact_wall_distance(walls: &[WallSegment], p: Point2) -> f64 {
    walls
        .iter()
        .map(|w| exact_point_segment(p, w.a, w.b))
        .fold(f64::INFINITY, f64::min)
}

/// Walk every polyline edge in steps of at most `step` and report the first
/// point closer than `radius` to a wall or outside `bbox`.
pub fn first_dense_violation(
    walls: &[WallSegment],
    bbox: Rect,
    waypoints: &[Point2],
    radius: f64,
    step: f64,
) -> Option<(Point2, f64)> {
    let check = |p: Point2| {
        let d = exact_wall_distance(walls, p);
        (d < radius || !bbox.contains(p)).then_some((p, d))
    };
    if let Some(v) = waypoints.first().and_then(|&p| check(p)) {
        return Some(v);
    }
    for w in waypoints.windows(2) {
        let len = ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt();
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let p = Point2::new(w[0].x + (w[1].x - w[0].x) * t, w[0].y + (w[1].y - w[0].y) * t);
            if let Some(v) = check(p) {
                return Some(v);
            }
        }
    }
    None
}

pub fn dense_valid(map: &GlobalMap, waypoints: &[Point2], radius: f64) -> bool {
    first_dense_violation(map.segments(), map.bbox, waypoints, radius, 1e-3).is_none()
}

// --- containment -----------------------------------------------------------

/// Winding number of the closed ring `ring` around `p`; boundary points count
/// as inside.
pub fn winding_contains(ring: &[Point2], p: Point2) -> bool {
    let n = ring.len();
    let mut winding = 0i32;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        let within_x = p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x);
        let within_y = p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y);
        if cross == 0.0 && within_x && within_y {
            return true;
        }
        if a.y <= p.y {
            if b.y > p.y && cross > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && cross < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

pub fn in_ellipse(p: Point2, start: Point2, goal: Point2, c_best: f64) -> bool {
    p.distance(start) + p.distance(goal) <= c_best * (1.0 + 1e-9) + 1e-12
}

// --- semantic routes -------------------------------------------------------

fn sq(a: Point2, b: Point2) -> f64 {
    (a.x - b.x).powi(2) + (a.y - b.y).powi(2)
}

/// Cheapest route cost by exhaustive enumeration of simple room sequences
/// and every doorway choice between consecutive rooms. Blocked doorways are
/// skipped. Leg costs: `|s-d|² + p` out of the start room, `|c-d|² + p` for
/// each room-doorway incidence in between, `|d-g|²` into the goal.
pub fn brute_force_route_cost(graph: &SceneGraph, penalty: f64, start: Point2, goal: Point2) -> Option<f64> {
    let room_of = |p: Point2| {
        graph
            .rooms
            .iter()
            .filter(|r| r.rect().contains(p))
            .map(|r| r.id.clone())
            .min()
    };
    let s = room_of(start)?;
    let g = room_of(goal)?;
    if s == g {
        return Some(0.0);
    }
    let center = |id: &snav::RoomId| graph.rooms.iter().find(|r| &r.id == id).unwrap().center;
    let mut best: Option<f64> = None;

    // (current room, last doorway center, cost so far, rooms visited)
    fn walk(
        graph: &SceneGraph,
        penalty: f64,
        goal_room: &snav::RoomId,
        goal: Point2,
        room: &snav::RoomId,
        cost: f64,
        entry: Option<Point2>,
        visited: &mut Vec<snav::RoomId>,
        center: &dyn Fn(&snav::RoomId) -> Point2,
        start: Point2,
        best: &mut Option<f64>,
    ) {
        for d in graph.doorways.iter().filter(|d| !d.blocked) {
            let next = if &d.rooms.0 == room {
                &d.rooms.1
            } else if &d.rooms.1 == room {
                &d.rooms.0
            } else {
                continue;
            };
            if visited.contains(next) {
                continue;
            }
            let leave = match entry {
                None => sq(start, d.center) + penalty,
                Some(_) => sq(center(room), d.center) + penalty,
            };
            if next == goal_room {
                let total = cost + leave + sq(d.center, goal);
                if best.map_or(true, |b| total < b) {
                    *best = Some(total);
                }
                continue;
            }
            let enter = sq(center(next), d.center) + penalty;
            visited.push(next.clone());
            walk(
                graph,
                penalty,
                goal_room,
                goal,
                next,
                cost + leave + enter,
                Some(d.center),
                visited,
                center,
                start,
                best,
            );
            visited.pop();
        }
    }

    let mut visited = vec![s.clone()];
    walk(graph, penalty, &g, goal, &s, 0.0, None, &mut visited, &center, start, &mut best);
    best
}

// --- random scene graphs ---------------------------------------------------

/// A random floor plan: up to `max_rooms` rooms on a 3×2 grid of cells with
/// random column widths and row heights, and up to `max_doors` doorways on
/// shared walls, some of them blocked.
pub fn random_scene(rng: &mut impl Rng, max_rooms: usize, max_doors: usize) -> SceneGraph {
    let cols: Vec<f64> = (0..3).map(|_| rng.random_range(3.0..6.0)).collect();
    let rows: Vec<f64> = (0..2).map(|_| rng.random_range(3.0..6.0)).collect();
    let xs: Vec<f64> = std::iter::once(0.0)
        .chain(cols.iter().scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        }))
        .collect();
    let ys: Vec<f64> = std::iter::once(0.0)
        .chain(rows.iter().scan(0.0, |acc, h| {
            *acc += h;
            Some(*acc)
        }))
        .collect();

    let n_rooms = rng.random_range(2..=max_rooms.min(6));
    let mut cells: Vec<(usize, usize)> = (0..2).flat_map(|j| (0..3).map(move |i| (i, j))).collect();
    // Keep a random subset of cells.
    for k in (1..cells.len()).rev() {
        let m = rng.random_range(0..=k);
        cells.swap(k, m);
    }
    cells.truncate(n_rooms);
    cells.sort();

    let rooms: Vec<Room> = cells
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            Room::rectangle(
                format!("r{k}"),
                Point2::new(xs[i], ys[j]),
                Point2::new(xs[i + 1], ys[j + 1]),
            )
        })
        .collect();

    let mut adjacent = Vec::new();
    for (a, &(ia, ja)) in cells.iter().enumerate() {
        for (b, &(ib, jb)) in cells.iter().enumerate().skip(a + 1) {
            if ja == jb && ib == ia + 1 {
                adjacent.push((a, b, true));
            } else if ia == ib && jb == ja + 1 {
                adjacent.push((a, b, false));
            }
        }
    }
    // Each shared wall holds at most two doorways, one per half, so openings
    // never overlap.
    let mut doorways = Vec::new();
    let mut used = vec![0usize; adjacent.len()];
    if !adjacent.is_empty() {
        let n_doors = rng.random_range(1..=max_doors.min(2 * adjacent.len()));
        for k in 0..n_doors {
            let mut slot = rng.random_range(0..adjacent.len());
            while used[slot] == 2 {
                slot = (slot + 1) % adjacent.len();
            }
            let half = if used[slot] == 0 { rng.random_range(0..2) } else { 1 - doorways_half(&doorways, slot) };
            used[slot] += 1;
            let (a, b, vertical_wall) = adjacent[slot];
            let (ia, ja) = cells[a];
            let (lo, hi) = if vertical_wall { (ys[ja], ys[ja + 1]) } else { (xs[ia], xs[ia + 1]) };
            let mid = (lo + hi) / 2.0;
            let (lo, hi) = if half == 0 { (lo, mid) } else { (mid, hi) };
            let t = rng.random_range(lo + 0.7..hi - 0.7);
            let center = if vertical_wall { Point2::new(xs[ia + 1], t) } else { Point2::new(t, ys[ja + 1]) };
            let mut door = Doorway::new(
                format!("d{k}"),
                center,
                1.0,
                rooms[a].id.as_str(),
                rooms[b].id.as_str(),
            );
            door.blocked = rng.random_bool(0.15);
            doorways.push((slot, half, door));
        }
    }
    let doorways = doorways.into_iter().map(|(_, _, d)| d).collect();
    let bbox = Rect::new(Point2::new(0.0, 0.0), Point2::new(xs[3], ys[2]));
    SceneGraph::new("map", bbox, rooms, doorways).expect("generated scene is valid")
}

fn doorways_half(doorways: &[(usize, usize, Doorway)], slot: usize) -> usize {
    doorways.iter().find(|(s, _, _)| *s == slot).map_or(0, |(_, h, _)| *h)
}

/// A point strictly inside `room`, at least `margin` from its walls.
pub fn point_in(room: &Room, margin: f64, rng: &mut impl Rng) -> Point2 {
    let r = room.rect();
    Point2::new(
        rng.random_range(r.min.x + margin..r.max.x - margin),
        rng.random_range(r.min.y + margin..r.max.y - margin),
    )
}
