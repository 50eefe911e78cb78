//! Optimistic global map reconstructed from a [`SceneGraph`]: one contour per
//! room, wall footprints with doorway openings cut out, and a 2D signed
//! distance field sampled exactly at grid nodes.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{point_segment_distance, segment_segment_distance, Point2, Rect, WallSegment};
use crate::scene_graph::{rectangle_from_walls, DoorwayId, Room, RoomId, SceneGraph};

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_WALL_HALF_THICKNESS: f64 = 0.05;
pub const DEFAULT_ATTACH_THRESHOLD: f64 = 0.5;
pub const DEFAULT_OPENING_DEPTH: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("room {0}: walls do not close into a contour")]
    DegenerateRoom(RoomId),
    #[error("doorway {doorway}: {reason}")]
    DoorwayPlacement { doorway: DoorwayId, reason: String },
    #[error("no wall segments to build a distance field from")]
    EmptyMap,
    #[error("resolution must be positive")]
    BadResolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("point ({x}, {y}) is outside the distance field")]
pub struct OutOfBounds {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    pub resolution: f64,
    /// Half-width of the band around each wall that reads as negative.
    pub wall_half_thickness: f64,
    /// Maximum separation of the two walls a doorway may attach to.
    pub attach_threshold: f64,
    /// Extent of a doorway opening across the wall, used by constrained planning.
    pub opening_depth: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            wall_half_thickness: DEFAULT_WALL_HALF_THICKNESS,
            attach_threshold: DEFAULT_ATTACH_THRESHOLD,
            opening_depth: DEFAULT_OPENING_DEPTH,
        }
    }
}

// --- contours ---------------------------------------------------------------

/// Closed counter-clockwise ring bounding a room's free space.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub room: RoomId,
    pub vertices: Vec<Point2>,
    bounds: Rect,
    axis_aligned_rect: bool,
}

impl Contour {
    pub fn new(room: RoomId, vertices: Vec<Point2>) -> Self {
        let bounds = vertices.iter().fold(
            Rect::new(
                Point2::new(f64::INFINITY, f64::INFINITY),
                Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            ),
            |r, p| Rect::new(
                Point2::new(r.min.x.min(p.x), r.min.y.min(p.y)),
                Point2::new(r.max.x.max(p.x), r.max.y.max(p.y)),
            ),
        );
        let axis_aligned_rect = vertices.len() == 4
            && vertices.iter().all(|v| {
                (v.x == bounds.min.x || v.x == bounds.max.x)
                    && (v.y == bounds.min.y || v.y == bounds.max.y)
            });
        Self {
            room,
            vertices,
            bounds,
            axis_aligned_rect,
        }
    }

    /// Signed shoelace area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Whether the ring is an axis-aligned rectangle.
    pub fn is_rectangle(&self) -> bool {
        self.axis_aligned_rect
    }

    pub fn contains(&self, p: Point2) -> bool {
        if self.axis_aligned_rect {
            return self.bounds.contains(p);
        }
        point_in_contour(self, p)
    }
}

/// Convert a room's four walls into its contour ring.
pub fn contour_from_room(room: &Room) -> Result<Contour, BuildError> {
    let (rect, _) =
        rectangle_from_walls(&room.walls).map_err(|_| BuildError::DegenerateRoom(room.id.clone()))?;
    let vertices = vec![
        rect.min,
        Point2::new(rect.max.x, rect.min.y),
        rect.max,
        Point2::new(rect.min.x, rect.max.y),
    ];
    Ok(Contour::new(room.id.clone(), vertices))
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    (b - a).cross(p - a) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Even-odd containment test; points on the boundary count as inside.
pub fn point_in_contour(contour: &Contour, p: Point2) -> bool {
    let mut inside = false;
    for (a, b) in contour.edges() {
        if on_segment(p, a, b) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

// --- doorway carving --------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CarvedWall {
    pub room: RoomId,
    pub original: WallSegment,
    /// What is left of the wall after removing doorway openings.
    pub pieces: Vec<WallSegment>,
}

impl CarvedWall {
    pub fn remaining_length(&self) -> f64 {
        self.pieces.iter().map(WallSegment::length).sum()
    }
}

/// Gap cut into a pair of coincident walls for one unblocked doorway.
#[derive(Debug, Clone, PartialEq)]
pub struct DoorOpening {
    pub doorway: DoorwayId,
    /// Doorway center projected onto the wall line.
    pub center: Point2,
    pub width: f64,
    /// Indices into [`CarvedWalls::walls`] of the two walls that were cut.
    pub walls: [usize; 2],
    /// Width × depth rectangle around the opening; a traversable region when
    /// planning is restricted to route rooms.
    pub region: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarvedWalls {
    pub walls: Vec<CarvedWall>,
    pub openings: Vec<DoorOpening>,
}

impl CarvedWalls {
    pub fn segments(&self) -> Vec<WallSegment> {
        self.walls.iter().flat_map(|w| w.pieces.iter().copied()).collect()
    }

    pub fn opening(&self, id: &DoorwayId) -> Option<&DoorOpening> {
        self.openings.iter().find(|o| &o.doorway == id)
    }
}

fn axis_interval(w: &WallSegment, horizontal: bool) -> (f64, f64) {
    let (a, b) = if horizontal { (w.a.x, w.b.x) } else { (w.a.y, w.b.y) };
    (a.min(b), a.max(b))
}

fn subtract_interval(wall: &mut CarvedWall, horizontal: bool, lo: f64, hi: f64) {
    let mut next = Vec::with_capacity(wall.pieces.len() + 1);
    for piece in &wall.pieces {
        let (p_lo, p_hi) = axis_interval(piece, horizontal);
        let fixed = if horizontal { piece.a.y } else { piece.a.x };
        let make = |s: f64, e: f64| {
            if horizontal {
                WallSegment::new(Point2::new(s, fixed), Point2::new(e, fixed))
            } else {
                WallSegment::new(Point2::new(fixed, s), Point2::new(fixed, e))
            }
        };
        if hi <= p_lo || lo >= p_hi {
            next.push(*piece);
            continue;
        }
        if lo > p_lo {
            next.push(make(p_lo, lo));
        }
        if hi < p_hi {
            next.push(make(hi, p_hi));
        }
    }
    wall.pieces = next;
}

/// Cut every unblocked doorway into the two closest parallel walls of the
/// rooms it connects. Blocked doorways leave their walls intact.
pub fn carve_doorways(graph: &SceneGraph, params: &MapParams) -> Result<CarvedWalls, BuildError> {
    let mut walls: Vec<CarvedWall> = Vec::new();
    let mut wall_index = std::collections::HashMap::new();
    for room in &graph.rooms {
        for (k, w) in room.walls.iter().enumerate() {
            wall_index.insert((room.id.clone(), k), walls.len());
            let horizontal = w.is_horizontal(crate::scene_graph::GEOMETRY_EPS);
            let (lo, hi) = axis_interval(w, horizontal);
            // Pieces are stored in increasing axis order.
            let piece = if horizontal {
                WallSegment::new(Point2::new(lo, w.a.y), Point2::new(hi, w.a.y))
            } else {
                WallSegment::new(Point2::new(w.a.x, lo), Point2::new(w.a.x, hi))
            };
            walls.push(CarvedWall {
                room: room.id.clone(),
                original: *w,
                pieces: vec![piece],
            });
        }
    }

    let mut openings = Vec::new();
    for door in graph.doorways.iter().filter(|d| !d.blocked) {
        let placement = |reason: String| BuildError::DoorwayPlacement {
            doorway: door.id.clone(),
            reason,
        };
        let room_a = graph
            .room(&door.rooms.0)
            .ok_or_else(|| placement(format!("unknown room {}", door.rooms.0)))?;
        let room_b = graph
            .room(&door.rooms.1)
            .ok_or_else(|| placement(format!("unknown room {}", door.rooms.1)))?;

        // Closest parallel pair; ties broken by proximity to the doorway center.
        let mut best: Option<(f64, f64, usize, usize, bool)> = None;
        for (ka, wa) in room_a.walls.iter().enumerate() {
            for (kb, wb) in room_b.walls.iter().enumerate() {
                let eps = crate::scene_graph::GEOMETRY_EPS;
                let horizontal = wa.is_horizontal(eps) && wb.is_horizontal(eps);
                let vertical = wa.is_vertical(eps) && wb.is_vertical(eps);
                if !horizontal && !vertical {
                    continue;
                }
                let gap = segment_segment_distance(wa.a, wa.b, wb.a, wb.b);
                let near = wa.distance_to_point(door.center) + wb.distance_to_point(door.center);
                let better = match best {
                    None => true,
                    Some((g, n, ..)) => gap < g || (gap == g && near < n),
                };
                if better {
                    best = Some((gap, near, ka, kb, horizontal));
                }
            }
        }
        let (gap, _, ka, kb, horizontal) =
            best.ok_or_else(|| placement("rooms have no parallel walls".into()))?;
        if gap >= params.attach_threshold {
            return Err(placement(format!(
                "closest walls are {gap:.3} m apart (threshold {} m)",
                params.attach_threshold
            )));
        }
        let ia = wall_index[&(room_a.id.clone(), ka)];
        let ib = wall_index[&(room_b.id.clone(), kb)];
        let (a_lo, a_hi) = axis_interval(&walls[ia].original, horizontal);
        let (b_lo, b_hi) = axis_interval(&walls[ib].original, horizontal);
        let overlap = (a_lo.max(b_lo), a_hi.min(b_hi));
        let along = if horizontal { door.center.x } else { door.center.y };
        let half = door.width / 2.0;
        let (lo, hi) = (along - half, along + half);
        if lo < overlap.0 || hi > overlap.1 {
            return Err(placement(format!(
                "opening [{lo}, {hi}] leaves the shared wall overlap [{}, {}]",
                overlap.0, overlap.1
            )));
        }
        subtract_interval(&mut walls[ia], horizontal, lo, hi);
        subtract_interval(&mut walls[ib], horizontal, lo, hi);

        let line_a = if horizontal { walls[ia].original.a.y } else { walls[ia].original.a.x };
        let line_b = if horizontal { walls[ib].original.a.y } else { walls[ib].original.a.x };
        let across = (line_a + line_b) / 2.0;
        let center = if horizontal {
            Point2::new(along, across)
        } else {
            Point2::new(across, along)
        };
        let half_depth = (params.opening_depth + (line_a - line_b).abs()) / 2.0;
        let region = if horizontal {
            Rect::from_center(center, half, half_depth)
        } else {
            Rect::from_center(center, half_depth, half)
        };
        openings.push(DoorOpening {
            doorway: door.id.clone(),
            center,
            width: door.width,
            walls: [ia, ib],
            region,
        });
    }
    Ok(CarvedWalls { walls, openings })
}

// --- signed distance field -------------------------------------------------

/// Sign convention: nodes within `half_thickness` of a wall store the negated
/// distance, all others the plain distance.
pub fn signed_wall_distance(unsigned: f64, half_thickness: f64) -> f64 {
    if unsigned < half_thickness {
        -unsigned
    } else {
        unsigned
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    pub origin: Point2,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    pub half_thickness: f64,
    /// Row-major node values, `values[j * nx + i]` at `origin + (i, j) * resolution`.
    pub values: Vec<f64>,
}

impl SdfGrid {
    pub fn node(&self, i: usize, j: usize) -> Point2 {
        node_position(self.origin, self.resolution, i, j)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn extent(&self) -> Rect {
        Rect::new(self.origin, self.node(self.nx - 1, self.ny - 1))
    }

    /// Bilinear interpolation of the stored distance magnitudes at `p`,
    /// before any sign is re-applied.
    pub fn unsigned_at(&self, p: Point2) -> Result<f64, OutOfBounds> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        let max_i = (self.nx - 1) as f64;
        let max_j = (self.ny - 1) as f64;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= max_i && fy <= max_j) {
            return Err(OutOfBounds { x: p.x, y: p.y });
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let row0 = j * self.nx + i;
        let row1 = row0 + self.nx;
        let v00 = self.values[row0].abs();
        let v10 = self.values[row0 + 1].abs();
        let v01 = self.values[row1].abs();
        let v11 = self.values[row1 + 1].abs();
        let bottom = v00 + (v10 - v00) * tx;
        let top = v01 + (v11 - v01) * tx;
        Ok(bottom + (top - bottom) * ty)
    }

    /// Upper bound on |unsigned_at(p) − true distance|: the field is
    /// 1-Lipschitz and every corner lies within one cell diagonal of `p`.
    pub fn interpolation_bound(&self) -> f64 {
        self.resolution * std::f64::consts::SQRT_2
    }

    /// Text export: a four-line header followed by one line per grid row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "origin {} {}", self.origin.x, self.origin.y);
        let _ = writeln!(out, "resolution {}", self.resolution);
        let _ = writeln!(out, "nx {}", self.nx);
        let _ = writeln!(out, "ny {}", self.ny);
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

fn node_position(origin: Point2, resolution: f64, i: usize, j: usize) -> Point2 {
    Point2::new(
        origin.x + i as f64 * resolution,
        origin.y + j as f64 * resolution,
    )
}

/// Sample the exact distance to the nearest wall segment at every node of a
/// grid covering `bbox` plus a two-cell margin.
pub fn build_sdf(
    segments: &[WallSegment],
    bbox: Rect,
    resolution: f64,
    half_thickness: f64,
) -> Result<SdfGrid, BuildError> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(BuildError::BadResolution);
    }
    if segments.is_empty() {
        return Err(BuildError::EmptyMap);
    }
    // Snap the origin to a multiple of the resolution so that nodes fall on
    // round coordinates.
    let i0 = (bbox.min.x / resolution).floor() - 2.0;
    let j0 = (bbox.min.y / resolution).floor() - 2.0;
    let origin = Point2::new(i0 * resolution, j0 * resolution);
    let nx = ((bbox.max.x / resolution).ceil() + 2.0 - i0) as usize + 1;
    let ny = ((bbox.max.y / resolution).ceil() + 2.0 - j0) as usize + 1;

    let mut values = vec![0.0; nx * ny];
    values
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(j, row)| {
            for (i, v) in row.iter_mut().enumerate() {
                let p = node_position(origin, resolution, i, j);
                let d = segments
                    .iter()
                    .map(|s| point_segment_distance(p, s.a, s.b))
                    .fold(f64::INFINITY, f64::min);
                *v = signed_wall_distance(d, half_thickness);
            }
        });
    Ok(SdfGrid {
        origin,
        resolution,
        nx,
        ny,
        half_thickness,
        values,
    })
}

/// Continuous field lookup: bilinear over the four surrounding nodes.
///
/// Magnitudes are interpolated and the wall-band sign is applied afterwards,
/// so the sign flip at the band edge does not smear across a cell.
pub fn sdf_query(grid: &SdfGrid, p: Point2) -> Result<f64, OutOfBounds> {
    let u = grid.unsigned_at(p)?;
    Ok(signed_wall_distance(u, grid.half_thickness))
}

// --- global map -------------------------------------------------------------

/// Whether some point of `[a, b]` lies strictly inside `r`.
fn crosses_open_rect(a: Point2, b: Point2, r: Rect) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, d, lo, hi) in [(a.x, b.x - a.x, r.min.x, r.max.x), (a.y, b.y - a.y, r.min.y, r.max.y)] {
        if d == 0.0 {
            if p <= lo || p >= hi {
                return false;
            }
        } else {
            let (ta, tb) = ((lo - p) / d, (hi - p) / d);
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    t0 < t1
}

#[derive(Debug, Clone)]
pub struct GlobalMap {
    pub bbox: Rect,
    /// One contour per room, in scene-graph order.
    pub contours: Vec<Contour>,
    pub carved: CarvedWalls,
    pub sdf: SdfGrid,
    segments: Vec<WallSegment>,
    wall_boxes: Vec<Rect>,
    wall_free: Vec<bool>,
}

/// Outcome of an exact clearance query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClearanceCheck {
    pub clear: bool,
    /// Wall pieces whose bounding box was tested.
    pub box_tests: usize,
    /// Wall pieces that needed an exact distance evaluation.
    pub exact_tests: usize,
}

impl GlobalMap {
    pub fn build(graph: &SceneGraph, params: &MapParams) -> Result<Self, BuildError> {
        let contours = graph
            .rooms
            .iter()
            .map(contour_from_room)
            .collect::<Result<Vec<_>, _>>()?;
        for c in &contours {
            debug_assert!(c.signed_area() > 0.0);
        }
        let carved = carve_doorways(graph, params)?;
        let segments = carved.segments();
        let sdf = build_sdf(
            &segments,
            graph.bbox,
            params.resolution,
            params.wall_half_thickness,
        )?;
        log::debug!(
            "global map: {} contours, {} wall pieces, {}x{} sdf",
            contours.len(),
            segments.len(),
            sdf.nx,
            sdf.ny
        );
        let wall_boxes = segments
            .iter()
            .map(|s| Rect::new(
                Point2::new(s.a.x.min(s.b.x), s.a.y.min(s.b.y)),
                Point2::new(s.a.x.max(s.b.x), s.a.y.max(s.b.y)),
            ))
            .collect();
        let wall_free = contours
            .iter()
            .map(|c| {
                c.is_rectangle()
                    && !segments
                        .iter()
                        .any(|s| crosses_open_rect(s.a, s.b, c.bounds()))
            })
            .collect();
        Ok(Self {
            bbox: graph.bbox,
            contours,
            carved,
            sdf,
            segments,
            wall_boxes,
            wall_free,
        })
    }

    pub fn segments(&self) -> &[WallSegment] {
        &self.segments
    }

    pub fn contour(&self, room: &RoomId) -> Option<&Contour> {
        self.contours.iter().find(|c| &c.room == room)
    }

    /// True when contour `index` is a rectangle with no wall piece passing
    /// through its interior, so the distance from an interior point to the
    /// nearest wall is at least its distance to the rectangle's boundary.
    pub fn contour_is_wall_free(&self, index: usize) -> bool {
        self.wall_free[index]
    }

    pub fn contour_index(&self, room: &RoomId) -> Option<usize> {
        self.contours.iter().position(|c| &c.room == room)
    }

    /// Exact distance from `p` to the nearest carved wall piece.
    pub fn wall_distance(&self, p: Point2) -> f64 {
        self.segments
            .iter()
            .map(|s| point_segment_distance(p, s.a, s.b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact minimum distance from the segment `[a, b]` to any wall piece.
    pub fn wall_distance_segment(&self, a: Point2, b: Point2) -> f64 {
        self.segments
            .iter()
            .map(|s| segment_segment_distance(a, b, s.a, s.b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether every point of `[a, b]` is at least `radius` from every wall
    /// piece, computed exactly. Pieces whose bounding box is already that far
    /// away are skipped.
    pub fn segment_clearance(&self, a: Point2, b: Point2, radius: f64) -> ClearanceCheck {
        let query = Rect::new(
            Point2::new(a.x.min(b.x), a.y.min(b.y)),
            Point2::new(a.x.max(b.x), a.y.max(b.y)),
        );
        let mut check = ClearanceCheck {
            clear: true,
            box_tests: 0,
            exact_tests: 0,
        };
        for (seg, bx) in self.segments.iter().zip(&self.wall_boxes) {
            check.box_tests += 1;
            if query.gap_to(bx) >= radius {
                continue;
            }
            check.exact_tests += 1;
            if segment_segment_distance(a, b, seg.a, seg.b) < radius {
                check.clear = false;
                break;
            }
        }
        check
    }

    /// Exact clearance of a single point; see [`GlobalMap::segment_clearance`].
    pub fn point_clearance(&self, p: Point2, radius: f64) -> ClearanceCheck {
        let mut check = ClearanceCheck {
            clear: true,
            box_tests: 0,
            exact_tests: 0,
        };
        for (seg, bx) in self.segments.iter().zip(&self.wall_boxes) {
            check.box_tests += 1;
            if bx.distance_to(p) >= radius {
                continue;
            }
            check.exact_tests += 1;
            if point_segment_distance(p, seg.a, seg.b) < radius {
                check.clear = false;
                break;
            }
        }
        check
    }

    /// Whether `p` is at least `radius` from every wall. Decided from the
    /// grid when the interpolation bound allows, exactly otherwise.
    pub fn has_clearance(&self, p: Point2, radius: f64) -> bool {
        match self.sdf.unsigned_at(p) {
            Ok(u) => {
                let bound = self.sdf.interpolation_bound();
                if u - bound >= radius {
                    true
                } else if u + bound < radius {
                    false
                } else {
                    self.point_clearance(p, radius).clear
                }
            }
            Err(_) => self.point_clearance(p, radius).clear,
        }
    }

    /// SVG drawing of contours, carved walls, and doorway openings.
    pub fn to_svg(&self) -> String {
        crate::svg::render_map(self, &crate::svg::Overlay::default())
    }
}
