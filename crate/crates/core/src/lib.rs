//! Hierarchical semantic-geometric path planning.
//!
//! A [`scene_graph::SceneGraph`] of rooms, walls, and doorways drives three
//! layers: a shortest route over the room/doorway topology
//! ([`semantic_planner`]), a reconstruction of the geometric map with a signed
//! distance field ([`map_builder`]), and sampling-based planners
//! ([`geometric_planner`]) that can be restricted to the rooms on the route and
//! run per room ([`subproblem_solver`]). [`bench`] compares the three setups.

pub mod bench;
pub mod geometric_planner;
pub mod geometry;
pub mod map_builder;
pub mod scene_graph;
pub mod semantic_planner;
pub mod subproblem_solver;
pub mod svg;

pub use geometry::{Point2, Rect, WallSegment};
pub use map_builder::{GlobalMap, MapParams};
pub use scene_graph::{load_map, DoorwayId, RoomId, SceneGraph};
