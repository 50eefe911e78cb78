//! Room / doorway / wall model of an indoor environment and its JSON map format.
//!
//! A [`SceneGraph`] is validated once on construction and treated as an
//! immutable value afterwards; edits such as [`SceneGraph::set_doorway_blocked`]
//! return a new graph.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use crate::geometry::{Point2, Rect, WallSegment};

/// Tolerance used when checking that walls close into a rectangle and that
/// doorways sit on the boundary shared by their rooms.
pub const GEOMETRY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoomId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DoorwayId(pub String);

impl RoomId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl DoorwayId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for DoorwayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// Why four walls failed to close into an axis-aligned rectangle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RectangleError {
    #[error("wall {0} has zero length")]
    ZeroLengthWall(usize),
    #[error("wall {0} is not axis-aligned")]
    NotAxisAligned(usize),
    #[error("walls enclose no area")]
    NoArea,
    #[error("walls do not close into a rectangle")]
    NotClosed,
}

/// Recognise the rectangle spanned by four wall footprints.
///
/// Walls may come in any order and orientation, but each side of the
/// rectangle must be covered by exactly one wall whose endpoints match the
/// corners within [`GEOMETRY_EPS`].
pub fn rectangle_from_walls(walls: &[WallSegment; 4]) -> Result<(Rect, [Side; 4]), RectangleError> {
    let tol = GEOMETRY_EPS;
    for (i, w) in walls.iter().enumerate() {
        if !(w.length() > 0.0) {
            return Err(RectangleError::ZeroLengthWall(i));
        }
        if !w.is_horizontal(tol) && !w.is_vertical(tol) {
            return Err(RectangleError::NotAxisAligned(i));
        }
    }
    let xs = walls.iter().flat_map(|w| [w.a.x, w.b.x]);
    let ys = walls.iter().flat_map(|w| [w.a.y, w.b.y]);
    let min_x = xs.clone().fold(f64::INFINITY, f64::min);
    let max_x = xs.fold(f64::NEG_INFINITY, f64::max);
    let min_y = ys.clone().fold(f64::INFINITY, f64::min);
    let max_y = ys.fold(f64::NEG_INFINITY, f64::max);
    if max_x - min_x <= tol || max_y - min_y <= tol {
        return Err(RectangleError::NoArea);
    }
    let near = |a: f64, b: f64| (a - b).abs() <= tol;
    let spans = |lo: f64, hi: f64, a: f64, b: f64| {
        (near(lo, a) && near(hi, b)) || (near(lo, b) && near(hi, a))
    };
    let mut sides = [Side::Bottom; 4];
    let mut seen = [false; 4];
    for (i, w) in walls.iter().enumerate() {
        let side = if w.is_horizontal(tol) && spans(min_x, max_x, w.a.x, w.b.x) {
            if near(w.a.y, min_y) && near(w.b.y, min_y) {
                Side::Bottom
            } else if near(w.a.y, max_y) && near(w.b.y, max_y) {
                Side::Top
            } else {
                return Err(RectangleError::NotClosed);
            }
        } else if w.is_vertical(tol) && spans(min_y, max_y, w.a.y, w.b.y) {
            if near(w.a.x, min_x) && near(w.b.x, min_x) {
                Side::Left
            } else if near(w.a.x, max_x) && near(w.b.x, max_x) {
                Side::Right
            } else {
                return Err(RectangleError::NotClosed);
            }
        } else {
            return Err(RectangleError::NotClosed);
        };
        let slot = side as usize;
        if seen[slot] {
            return Err(RectangleError::NotClosed);
        }
        seen[slot] = true;
        sides[i] = side;
    }
    Ok((
        Rect::new(Point2::new(min_x, min_y), Point2::new(max_x, max_y)),
        sides,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub id: RoomId,
    /// Optional human-readable alias ("kitchen") usable as a query goal.
    pub name: Option<String>,
    pub center: Point2,
    pub walls: [WallSegment; 4],
    /// Distances between the two pairs of opposing walls (x extent, y extent).
    pub widths: (f64, f64),
    rect: Rect,
}

impl Room {
    /// Build a room from its walls. Fails when the walls do not form a
    /// closed rectangle.
    pub fn new(
        id: RoomId,
        name: Option<String>,
        center: Point2,
        walls: [WallSegment; 4],
    ) -> Result<Self, RectangleError> {
        let (rect, _) = rectangle_from_walls(&walls)?;
        Ok(Self {
            id,
            name,
            center,
            walls,
            widths: (rect.width(), rect.height()),
            rect,
        })
    }

    /// Convenience constructor for an axis-aligned room; the center is the
    /// rectangle midpoint.
    pub fn rectangle(id: impl Into<String>, min: Point2, max: Point2) -> Self {
        let walls = [
            WallSegment::new(min, Point2::new(max.x, min.y)),
            WallSegment::new(Point2::new(max.x, min.y), max),
            WallSegment::new(max, Point2::new(min.x, max.y)),
            WallSegment::new(Point2::new(min.x, max.y), min),
        ];
        let center = min.lerp(max, 0.5);
        Room::new(RoomId::new(id), None, center, walls).expect("rectangle walls close")
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.rect.contains(p)
    }

    pub fn area(&self) -> f64 {
        self.rect.area()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Doorway {
    pub id: DoorwayId,
    pub center: Point2,
    pub width: f64,
    pub rooms: (RoomId, RoomId),
    pub blocked: bool,
}

impl Doorway {
    pub fn new(id: impl Into<String>, center: Point2, width: f64, a: &str, b: &str) -> Self {
        Self {
            id: DoorwayId::new(id),
            center,
            width,
            rooms: (RoomId::new(a), RoomId::new(b)),
            blocked: false,
        }
    }

    pub fn connects(&self, room: &RoomId) -> bool {
        &self.rooms.0 == room || &self.rooms.1 == room
    }

    /// The room on the other side of the doorway, if `room` is one of its ends.
    pub fn other_room(&self, room: &RoomId) -> Option<&RoomId> {
        if &self.rooms.0 == room {
            Some(&self.rooms.1)
        } else if &self.rooms.1 == room {
            Some(&self.rooms.0)
        } else {
            None
        }
    }
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error in field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

/// A scene-graph invariant violation, naming the offending entity.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{entity}: {message}")]
pub struct ValidationError {
    pub entity: String,
    pub message: String,
}

impl ValidationError {
    fn new(entity: impl fmt::Display, message: impl Into<String>) -> Self {
        Self {
            entity: entity.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneGraphError {
    #[error("unknown doorway id {0}")]
    UnknownDoorway(DoorwayId),
    #[error("unknown room {0}")]
    UnknownRoom(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub frame: String,
    /// Bounds of the planning state space.
    pub bbox: Rect,
    pub rooms: Vec<Room>,
    pub doorways: Vec<Doorway>,
}

impl SceneGraph {
    /// Assemble and validate a scene graph.
    pub fn new(
        frame: impl Into<String>,
        bbox: Rect,
        rooms: Vec<Room>,
        doorways: Vec<Doorway>,
    ) -> Result<Self, ValidationError> {
        let graph = Self {
            frame: frame.into(),
            bbox,
            rooms,
            doorways,
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if !self.bbox.min.is_finite() || !self.bbox.max.is_finite() {
            return Err(ValidationError::new("bbox", "non-finite bounds"));
        }
        if !(self.bbox.max.x > self.bbox.min.x && self.bbox.max.y > self.bbox.min.y) {
            return Err(ValidationError::new("bbox", "max must exceed min"));
        }
        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for room in &self.rooms {
            if !ids.insert(room.id.as_str()) {
                return Err(ValidationError::new(
                    format!("room {}", room.id),
                    "duplicate id",
                ));
            }
            if let Some(name) = &room.name {
                if !names.insert(name.as_str()) {
                    return Err(ValidationError::new(
                        format!("room {}", room.id),
                        format!("duplicate name {name}"),
                    ));
                }
            }
            let label = format!("room {}", room.id);
            if !room.center.is_finite()
                || room.walls.iter().any(|w| !w.a.is_finite() || !w.b.is_finite())
            {
                return Err(ValidationError::new(label, "non-finite coordinate"));
            }
            let (rect, _) = rectangle_from_walls(&room.walls)
                .map_err(|e| ValidationError::new(&label, e.to_string()))?;
            if rect != room.rect {
                return Err(ValidationError::new(&label, "stale rectangle"));
            }
            if !rect.contains_strictly(room.center) {
                return Err(ValidationError::new(
                    &label,
                    format!("center {} not strictly inside walls", room.center),
                ));
            }
            let inflated = self.bbox.inflate(1e-9);
            if room
                .walls
                .iter()
                .any(|w| !inflated.contains(w.a) || !inflated.contains(w.b))
            {
                return Err(ValidationError::new(&label, "wall vertex outside bbox"));
            }
        }
        for door in &self.doorways {
            let label = format!("doorway {}", door.id);
            if !ids.insert(door.id.as_str()) {
                return Err(ValidationError::new(label, "duplicate id"));
            }
            if !door.center.is_finite() {
                return Err(ValidationError::new(label, "non-finite center"));
            }
            if !(door.width > 0.0) || !door.width.is_finite() {
                return Err(ValidationError::new(label, "width must be positive"));
            }
            let (a, b) = &door.rooms;
            if a == b {
                return Err(ValidationError::new(label, "connects a room to itself"));
            }
            let ra = self
                .room(a)
                .ok_or_else(|| ValidationError::new(&label, format!("unknown room {a}")))?;
            let rb = self
                .room(b)
                .ok_or_else(|| ValidationError::new(&label, format!("unknown room {b}")))?;
            // Shared boundary region: within the gap between the two rooms.
            let slack = ra.rect.distance_to(door.center) + rb.rect.distance_to(door.center)
                - ra.rect.gap_to(&rb.rect);
            if slack > GEOMETRY_EPS {
                return Err(ValidationError::new(
                    label,
                    format!("center {} is not on the boundary between {a} and {b}", door.center),
                ));
            }
        }
        Ok(())
    }

    pub fn room(&self, id: &RoomId) -> Option<&Room> {
        self.rooms.iter().find(|r| &r.id == id)
    }

    pub fn doorway(&self, id: &DoorwayId) -> Option<&Doorway> {
        self.doorways.iter().find(|d| &d.id == id)
    }

    /// Resolve a room by id or by its name alias.
    pub fn room_by_name(&self, key: &str) -> Option<&Room> {
        self.rooms
            .iter()
            .find(|r| r.id.as_str() == key)
            .or_else(|| self.rooms.iter().find(|r| r.name.as_deref() == Some(key)))
    }

    /// Doorways incident to `room`, in storage order.
    pub fn doorways_of<'a>(&'a self, room: &RoomId) -> impl Iterator<Item = &'a Doorway> + 'a {
        let room = room.clone();
        self.doorways.iter().filter(move |d| d.connects(&room))
    }

    /// The room containing `p`. Boundary points belong to every room touching
    /// them; ties go to the lexicographically smallest room id.
    pub fn locate_room(&self, p: Point2) -> Option<&RoomId> {
        if !p.is_finite() {
            return None;
        }
        self.rooms
            .iter()
            .filter(|r| r.contains(p))
            .map(|r| &r.id)
            .min()
    }

    /// A copy of this graph with one doorway's `blocked` flag changed.
    pub fn set_doorway_blocked(
        &self,
        id: &DoorwayId,
        blocked: bool,
    ) -> Result<SceneGraph, SceneGraphError> {
        let mut next = self.clone();
        let door = next
            .doorways
            .iter_mut()
            .find(|d| &d.id == id)
            .ok_or_else(|| SceneGraphError::UnknownDoorway(id.clone()))?;
        door.blocked = blocked;
        Ok(next)
    }
}

// --- map file format -------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RawBbox {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct RawWall {
    a: [f64; 2],
    b: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRoom {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    center: [f64; 2],
    walls: Vec<RawWall>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDoorway {
    id: String,
    center: [f64; 2],
    width: f64,
    rooms: [String; 2],
    #[serde(default)]
    blocked: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMap {
    frame: String,
    bbox: RawBbox,
    rooms: Vec<RawRoom>,
    doorways: Vec<RawDoorway>,
}

const TOP_FIELDS: &[&str] = &["frame", "bbox", "rooms", "doorways"];
const BBOX_FIELDS: &[&str] = &["min", "max"];
const ROOM_FIELDS: &[&str] = &["id", "name", "center", "walls"];
const WALL_FIELDS: &[&str] = &["a", "b"];
const DOORWAY_FIELDS: &[&str] = &["id", "center", "width", "rooms", "blocked"];

fn check_fields(value: &Value, allowed: &[&str], path: &str) -> Result<(), MapError> {
    if let Value::Object(map) = value {
        if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            let field = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            return Err(MapError::Field {
                field,
                message: "unknown field".into(),
            });
        }
    }
    Ok(())
}

fn check_unknown_fields(root: &Value) -> Result<(), MapError> {
    check_fields(root, TOP_FIELDS, "")?;
    if let Some(bbox) = root.get("bbox") {
        check_fields(bbox, BBOX_FIELDS, "bbox")?;
    }
    if let Some(Value::Array(rooms)) = root.get("rooms") {
        for (i, room) in rooms.iter().enumerate() {
            let path = format!("rooms[{i}]");
            check_fields(room, ROOM_FIELDS, &path)?;
            if let Some(Value::Array(walls)) = room.get("walls") {
                for (j, wall) in walls.iter().enumerate() {
                    check_fields(wall, WALL_FIELDS, &format!("{path}.walls[{j}]"))?;
                }
            }
        }
    }
    if let Some(Value::Array(doors)) = root.get("doorways") {
        for (i, door) in doors.iter().enumerate() {
            check_fields(door, DOORWAY_FIELDS, &format!("doorways[{i}]"))?;
        }
    }
    Ok(())
}

fn raw_to_graph(raw: RawMap) -> Result<SceneGraph, MapError> {
    let mut rooms = Vec::with_capacity(raw.rooms.len());
    for (i, r) in raw.rooms.into_iter().enumerate() {
        let walls: [RawWall; 4] = r.walls.try_into().map_err(|w: Vec<RawWall>| MapError::Field {
            field: format!("rooms[{i}].walls"),
            message: format!("expected exactly 4 walls, found {}", w.len()),
        })?;
        let walls = walls.map(|w| WallSegment::new(w.a.into(), w.b.into()));
        let room = Room::new(RoomId(r.id.clone()), r.name, r.center.into(), walls)
            .map_err(|e| ValidationError::new(format!("room {}", r.id), e.to_string()))?;
        rooms.push(room);
    }
    let doorways = raw
        .doorways
        .into_iter()
        .map(|d| {
            let [a, b] = d.rooms;
            Doorway {
                id: DoorwayId(d.id),
                center: d.center.into(),
                width: d.width,
                rooms: (RoomId(a), RoomId(b)),
                blocked: d.blocked,
            }
        })
        .collect();
    let bbox = Rect::new(raw.bbox.min.into(), raw.bbox.max.into());
    Ok(SceneGraph::new(raw.frame, bbox, rooms, doorways)?)
}

/// Parse a map document. Unknown fields are rejected unless `lenient`.
pub fn parse_map(text: &str, lenient: bool) -> Result<SceneGraph, MapError> {
    let value: Value = serde_json::from_str(text).map_err(|e| MapError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if !lenient {
        check_unknown_fields(&value)?;
    }
    let raw: RawMap = serde_json::from_value(value).map_err(|e| MapError::Field {
        field: "map".into(),
        message: e.to_string(),
    })?;
    raw_to_graph(raw)
}

/// Load and validate a map file in strict mode.
pub fn load_map(path: impl AsRef<Path>) -> Result<SceneGraph, MapError> {
    load_map_with(path, false)
}

pub fn load_map_with(path: impl AsRef<Path>, lenient: bool) -> Result<SceneGraph, MapError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map(&text, lenient)
}

pub fn map_to_string(graph: &SceneGraph) -> String {
    let raw = RawMap {
        frame: graph.frame.clone(),
        bbox: RawBbox {
            min: graph.bbox.min.into(),
            max: graph.bbox.max.into(),
        },
        rooms: graph
            .rooms
            .iter()
            .map(|r| RawRoom {
                id: r.id.0.clone(),
                name: r.name.clone(),
                center: r.center.into(),
                walls: r
                    .walls
                    .iter()
                    .map(|w| RawWall {
                        a: w.a.into(),
                        b: w.b.into(),
                    })
                    .collect(),
            })
            .collect(),
        doorways: graph
            .doorways
            .iter()
            .map(|d| RawDoorway {
                id: d.id.0.clone(),
                center: d.center.into(),
                width: d.width,
                rooms: [d.rooms.0 .0.clone(), d.rooms.1 .0.clone()],
                blocked: d.blocked,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("map serializes");
    text.push('\n');
    text
}

pub fn save_map(graph: &SceneGraph, path: impl AsRef<Path>) -> Result<(), MapError> {
    let path = path.as_ref();
    std::fs::write(path, map_to_string(graph)).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })
}
