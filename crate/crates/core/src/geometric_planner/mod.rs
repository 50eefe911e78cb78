//! Sampling-based planners on the global map: RRT, RRT*, and Informed RRT*,
//! optionally restricted to a set of rooms.

mod clock;
mod sampling;
mod tree;
mod validity;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

pub use clock::{ClockMode, WorkMeter};
pub use sampling::{sample_informed, sample_state, InformedSampler, RegionSampler};
pub use tree::plan;
pub use validity::{motion_valid, state_valid, Validity};

use crate::geometry::Point2;
use crate::scene_graph::{DoorwayId, RoomId};

pub const DEFAULT_STEER_RANGE: f64 = 1.0;
pub const DEFAULT_GOAL_BIAS: f64 = 0.05;
pub const DEFAULT_GOAL_TOLERANCE: f64 = 0.1;
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.3;
pub const DEFAULT_REWIRE_FACTOR: f64 = 1.1;
/// Upper bound on the interpolation step used by motion checks.
pub const MAX_MOTION_STEP: f64 = 0.025;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricProblem {
    pub start: Point2,
    pub goal: Point2,
    /// Rooms the planner may use; `None` plans over the whole bounding box.
    pub allowed_rooms: Option<BTreeSet<RoomId>>,
    /// Doorways whose openings join the allowed region when it is restricted.
    pub route_doorways: Vec<DoorwayId>,
    pub goal_tolerance: f64,
    pub robot_radius: f64,
}

impl GeometricProblem {
    pub fn new(start: Point2, goal: Point2) -> Self {
        Self {
            start,
            goal,
            allowed_rooms: None,
            route_doorways: Vec::new(),
            goal_tolerance: DEFAULT_GOAL_TOLERANCE,
            robot_radius: DEFAULT_ROBOT_RADIUS,
        }
    }

    pub fn restricted_to(
        mut self,
        rooms: impl IntoIterator<Item = RoomId>,
        doorways: impl IntoIterator<Item = DoorwayId>,
    ) -> Self {
        self.allowed_rooms = Some(rooms.into_iter().collect());
        self.route_doorways = doorways.into_iter().collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricPath {
    pub waypoints: Vec<Point2>,
    #[serde(rename = "length_m")]
    pub length: f64,
}

impl GeometricPath {
    pub fn new(waypoints: Vec<Point2>) -> Self {
        let length = polyline_length(&waypoints);
        Self { waypoints, length }
    }

    pub fn first(&self) -> Point2 {
        self.waypoints[0]
    }

    pub fn last(&self) -> Point2 {
        *self.waypoints.last().expect("path has waypoints")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serializes")
    }
}

pub fn polyline_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rrt,
    RrtStar,
    #[default]
    InformedRrtStar,
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rrt" => Ok(Algorithm::Rrt),
            "rrt_star" => Ok(Algorithm::RrtStar),
            "informed_rrt_star" | "irrt" => Ok(Algorithm::InformedRrtStar),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub algorithm: Algorithm,
    /// Seconds on the configured clock; zero disables the time limit.
    pub timeout: f64,
    /// Zero disables the iteration limit.
    pub max_iterations: u64,
    pub steer_range: f64,
    pub goal_bias: f64,
    pub rewire_factor: f64,
    pub seed: u64,
    pub clock: ClockMode,
    /// Record every drawn sample and each improvement of the best cost.
    pub trace: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::InformedRrtStar,
            timeout: 0.1,
            max_iterations: 0,
            steer_range: DEFAULT_STEER_RANGE,
            goal_bias: DEFAULT_GOAL_BIAS,
            rewire_factor: DEFAULT_REWIRE_FACTOR,
            seed: 0,
            clock: ClockMode::Wall,
            trace: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let limited = self.timeout > 0.0 || self.max_iterations > 0;
        if !limited || !self.timeout.is_finite() || self.timeout < 0.0 {
            return Err(PlanError::InvalidConfig(
                "need a positive timeout or iteration limit".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.goal_bias) {
            return Err(PlanError::InvalidConfig("goal_bias must lie in [0, 1)".into()));
        }
        if !(self.steer_range > 0.0) {
            return Err(PlanError::InvalidConfig("steer range must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PlannerStats {
    /// Every sample drawn, including ones rejected by the region or validity checks.
    pub samples_created: u64,
    pub rejected_samples: u64,
    pub iterations: u64,
    pub tree_size: usize,
    pub solved: bool,
    /// Seconds on the configured clock.
    pub planning_time: f64,
    pub best_cost: f64,
}

/// A sample drawn during planning together with the solution cost in effect
/// when it was drawn (infinite before the first solution).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub point: Point2,
    pub best_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanTrace {
    pub samples: Vec<TraceSample>,
    /// `(iteration, best_cost)` each time the best cost changed.
    pub cost_history: Vec<(u64, f64)>,
    /// Parent-child edges of the final tree.
    pub tree: Vec<(Point2, Point2)>,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub path: Option<GeometricPath>,
    pub stats: PlannerStats,
    /// Primitive operation counts for the run.
    pub work: WorkMeter,
    pub trace: Option<PlanTrace>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("start {0} is not a valid state")]
    InvalidStart(Point2),
    #[error("goal {0} is not a valid state")]
    InvalidGoal(Point2),
    #[error("allowed region is empty")]
    EmptyRegion,
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
}
