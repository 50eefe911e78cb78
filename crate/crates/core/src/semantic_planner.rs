//! Shortest routes on the room/doorway topology.
//!
//! Rooms and unblocked doorways form a bipartite undirected graph. A
//! room-doorway edge costs the (squared, by default) distance between the room
//! center and the doorway center plus a fixed per-doorway penalty. Query
//! endpoints are attached directly to the doorways of the rooms that contain
//! them, so a route reads `start -> d_k -> ... -> d_{k+n} -> goal` together
//! with the rooms it passes through.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::Point2;
use crate::scene_graph::{Doorway, DoorwayId, Room, RoomId, SceneGraph};

pub const DEFAULT_DOORWAY_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    /// ‖p − d‖² + p_d
    #[default]
    SquaredEuclidean,
    /// ‖p − d‖ + p_d
    Euclidean,
}

impl CostMetric {
    pub fn leg(self, a: Point2, b: Point2) -> f64 {
        match self {
            CostMetric::SquaredEuclidean => a.distance_squared(b),
            CostMetric::Euclidean => a.distance(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("doorway {doorway} does not connect to room {room}")]
    NotIncident { room: RoomId, doorway: DoorwayId },
    #[error("start {0} is not inside any room")]
    StartOutsideMap(Point2),
    #[error("goal {0} is not inside any room")]
    GoalOutsideMap(Point2),
    #[error("NoRoute: no open doorway sequence connects {from} to {to}")]
    NoRoute { from: RoomId, to: RoomId },
}

/// Room-to-doorway edge cost with the squared-distance metric.
pub fn edge_cost(room: &Room, doorway: &Doorway, penalty: f64) -> Result<f64, RouteError> {
    edge_cost_with(CostMetric::SquaredEuclidean, room, doorway, penalty)
}

pub fn edge_cost_with(
    metric: CostMetric,
    room: &Room,
    doorway: &Doorway,
    penalty: f64,
) -> Result<f64, RouteError> {
    if !doorway.connects(&room.id) {
        return Err(RouteError::NotIncident {
            room: room.id.clone(),
            doorway: doorway.id.clone(),
        });
    }
    Ok(metric.leg(room.center, doorway.center) + penalty)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyEdge {
    pub room: RoomId,
    pub doorway: DoorwayId,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct TopologyGraph {
    pub rooms: Vec<RoomId>,
    /// Open doorways only.
    pub doorways: Vec<DoorwayId>,
    pub edges: Vec<TopologyEdge>,
    pub penalty: f64,
    pub metric: CostMetric,
    edge_lookup: HashMap<(RoomId, DoorwayId), f64>,
}

impl TopologyGraph {
    pub fn node_count(&self) -> usize {
        self.rooms.len() + self.doorways.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn cost(&self, room: &RoomId, doorway: &DoorwayId) -> Option<f64> {
        self.edge_lookup.get(&(room.clone(), doorway.clone())).copied()
    }

    pub fn has_doorway(&self, id: &DoorwayId) -> bool {
        self.doorways.contains(id)
    }
}

pub fn build_topology(graph: &SceneGraph, penalty: f64) -> TopologyGraph {
    build_topology_with(graph, penalty, CostMetric::default())
}

pub fn build_topology_with(graph: &SceneGraph, penalty: f64, metric: CostMetric) -> TopologyGraph {
    let rooms: Vec<RoomId> = graph.rooms.iter().map(|r| r.id.clone()).collect();
    let mut doorways = Vec::new();
    let mut edges = Vec::new();
    for door in graph.doorways.iter().filter(|d| !d.blocked) {
        doorways.push(door.id.clone());
        for room_id in [&door.rooms.0, &door.rooms.1] {
            let room = graph.room(room_id).expect("validated scene graph");
            let cost = edge_cost_with(metric, room, door, penalty).expect("incident by construction");
            edges.push(TopologyEdge {
                room: room_id.clone(),
                doorway: door.id.clone(),
                cost,
            });
        }
    }
    let edge_lookup = edges
        .iter()
        .map(|e| ((e.room.clone(), e.doorway.clone()), e.cost))
        .collect();
    TopologyGraph {
        rooms,
        doorways,
        edges,
        penalty,
        metric,
        edge_lookup,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticRoute {
    pub start: Point2,
    pub goal: Point2,
    pub doorways: Vec<DoorwayId>,
    /// Rooms in travel order, `doorways.len() + 1` of them.
    pub rooms: Vec<RoomId>,
    /// Reduced free space: the set of rooms on the route.
    pub free_space: BTreeSet<RoomId>,
    pub cost: f64,
}

#[derive(Serialize)]
struct RouteJson<'a> {
    start: [f64; 2],
    goal: [f64; 2],
    doorways: &'a [DoorwayId],
    rooms: &'a [RoomId],
    cost: f64,
}

impl SemanticRoute {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RouteJson {
            start: self.start.into(),
            goal: self.goal.into(),
            doorways: &self.doorways,
            rooms: &self.rooms,
            cost: self.cost,
        })
        .expect("route serializes")
    }
}

/// Search label: accumulated cost plus the doorway/room sequence so far.
#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    doorways: Vec<DoorwayId>,
    rooms: Vec<RoomId>,
}

impl Label {
    /// Cost first, then fewer doorways, then lexicographic doorway ids.
    fn rank(&self, other: &Label) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.doorways.len().cmp(&other.doorways.len()))
            .then_with(|| self.doorways.cmp(&other.doorways))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    Room(RoomId),
    Door(DoorwayId),
}

struct Queued {
    label: Label,
    node: Node,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on the label rank.
        other.label.rank(&self.label)
    }
}

fn open_doorways<'a>(topo: &TopologyGraph, graph: &'a SceneGraph, room: &RoomId) -> Vec<&'a Doorway> {
    graph
        .doorways_of(room)
        .filter(|d| topo.has_doorway(&d.id))
        .collect()
}

/// Minimum-cost route between two positions.
///
/// The start connects to every open doorway of its room with cost
/// `leg(p_s, d) + p_d`, the goal to every open doorway of its room with
/// `leg(d, p_g)`. Between them the search follows topology edges; the start
/// and goal rooms are not re-entered, so the room sequence is simple.
pub fn semantic_route(
    topo: &TopologyGraph,
    graph: &SceneGraph,
    start: Point2,
    goal: Point2,
) -> Result<SemanticRoute, RouteError> {
    let start_room = graph
        .locate_room(start)
        .cloned()
        .ok_or(RouteError::StartOutsideMap(start))?;
    let goal_room = graph
        .locate_room(goal)
        .cloned()
        .ok_or(RouteError::GoalOutsideMap(goal))?;

    if start_room == goal_room {
        return Ok(SemanticRoute {
            start,
            goal,
            doorways: Vec::new(),
            rooms: vec![start_room.clone()],
            free_space: BTreeSet::from([start_room]),
            cost: 0.0,
        });
    }

    let open_doors_of = |room: &RoomId| open_doorways(topo, graph, room);

    let mut settled: HashMap<Node, Label> = HashMap::new();
    let mut heap = BinaryHeap::new();
    for door in open_doors_of(&start_room) {
        heap.push(Queued {
            label: Label {
                cost: topo.metric.leg(start, door.center) + topo.penalty,
                doorways: vec![door.id.clone()],
                rooms: vec![start_room.clone()],
            },
            node: Node::Door(door.id.clone()),
        });
    }

    while let Some(Queued { label, node }) = heap.pop() {
        if settled.contains_key(&node) {
            continue;
        }
        settled.insert(node.clone(), label.clone());
        match &node {
            Node::Door(door_id) => {
                let door = graph.doorway(door_id).expect("topology doorway exists");
                for room in [&door.rooms.0, &door.rooms.1] {
                    if room == &start_room || room == &goal_room {
                        continue;
                    }
                    let next = Node::Room(room.clone());
                    if settled.contains_key(&next) {
                        continue;
                    }
                    let mut rooms = label.rooms.clone();
                    rooms.push(room.clone());
                    heap.push(Queued {
                        label: Label {
                            cost: label.cost + topo.cost(room, door_id).expect("incident edge"),
                            doorways: label.doorways.clone(),
                            rooms,
                        },
                        node: next,
                    });
                }
            }
            Node::Room(room) => {
                for door in open_doors_of(room) {
                    let next = Node::Door(door.id.clone());
                    if settled.contains_key(&next) {
                        continue;
                    }
                    let mut doorways = label.doorways.clone();
                    doorways.push(door.id.clone());
                    heap.push(Queued {
                        label: Label {
                            cost: label.cost + topo.cost(room, &door.id).expect("incident edge"),
                            doorways,
                            rooms: label.rooms.clone(),
                        },
                        node: next,
                    });
                }
            }
        }
    }

    let best = open_doors_of(&goal_room)
        .into_iter()
        .filter_map(|door| {
            settled.get(&Node::Door(door.id.clone())).map(|label| {
                let mut rooms = label.rooms.clone();
                rooms.push(goal_room.clone());
                Label {
                    cost: label.cost + topo.metric.leg(door.center, goal),
                    doorways: label.doorways.clone(),
                    rooms,
                }
            })
        })
        .min_by(|a, b| a.rank(b))
        .ok_or_else(|| RouteError::NoRoute {
            from: start_room.clone(),
            to: goal_room.clone(),
        })?;

    Ok(SemanticRoute {
        start,
        goal,
        free_space: best.rooms.iter().cloned().collect(),
        doorways: best.doorways,
        rooms: best.rooms,
        cost: best.cost,
    })
}
