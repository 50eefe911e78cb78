//! Splits a semantic route into one planning problem per room, solves them
//! under a shared time budget, and joins the pieces at doorway centers.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometric_planner::{
    self, GeometricPath, GeometricProblem, PlanError, PlannerConfig, PlannerStats, Validity,
    WorkMeter,
};
use crate::geometry::Point2;
use crate::map_builder::{BuildError, GlobalMap, MapParams};
use crate::scene_graph::{DoorwayId, RoomId, SceneGraph, SceneGraphError};
use crate::semantic_planner::{self, RouteError, SemanticRoute, TopologyGraph};

/// One local query: move from `start` to `goal` inside a single room.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    /// Position along the route, starting at 1.
    pub index: usize,
    pub start: Point2,
    pub goal: Point2,
    pub room: RoomId,
    pub entry: Option<DoorwayId>,
    pub exit: Option<DoorwayId>,
}

impl Subproblem {
    /// The geometric problem restricted to this room and its route doorways.
    pub fn problem(&self) -> GeometricProblem {
        GeometricProblem::new(self.start, self.goal).restricted_to(
            [self.room.clone()],
            self.entry.iter().chain(self.exit.iter()).cloned(),
        )
    }

    fn key(&self) -> CacheKey {
        (
            self.start.x.to_bits(),
            self.start.y.to_bits(),
            self.goal.x.to_bits(),
            self.goal.y.to_bits(),
            self.room.clone(),
        )
    }
}

type CacheKey = (u64, u64, u64, u64, RoomId);

/// Break `route` into `route.doorways.len() + 1` subproblems. Doorway
/// waypoints are the doorway centers taken from `graph`.
///
/// # Panics
///
/// Panics if the route names a doorway that `graph` does not contain.
pub fn decompose(route: &SemanticRoute, graph: &SceneGraph) -> Vec<Subproblem> {
    let centers: Vec<Point2> = route
        .doorways
        .iter()
        .map(|d| {
            graph
                .doorway(d)
                .unwrap_or_else(|| panic!("route doorway {d} missing from graph"))
                .center
        })
        .collect();
    (0..=route.doorways.len())
        .map(|k| Subproblem {
            index: k + 1,
            start: if k == 0 { route.start } else { centers[k - 1] },
            goal: centers.get(k).copied().unwrap_or(route.goal),
            room: route.rooms[k].clone(),
            entry: k.checked_sub(1).map(|j| route.doorways[j].clone()),
            exit: route.doorways.get(k).cloned(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Planner settings; its timeout and iteration limit are the global budget.
    pub planner: PlannerConfig,
    /// Worker threads; `None` uses `min(n, available parallelism)`.
    pub workers: Option<usize>,
    /// Re-run unsolved subproblems with time left over by early finishers.
    pub redistribute: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            workers: None,
            redistribute: false,
        }
    }
}

impl SolveConfig {
    pub fn new(planner: PlannerConfig) -> Self {
        Self {
            planner,
            ..Self::default()
        }
    }

    /// Planner settings for subproblem `index` out of `n`.
    pub fn subproblem_config(&self, index: usize, n: usize) -> PlannerConfig {
        let mut cfg = self.planner.clone();
        cfg.timeout = self.planner.timeout / n as f64;
        if self.planner.max_iterations > 0 {
            cfg.max_iterations = (self.planner.max_iterations / n as u64).max(1);
        }
        cfg.seed = self.planner.seed ^ index as u64;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("subproblem {index} is infeasible: {reason}")]
    SubproblemInfeasible { index: usize, reason: PlanError },
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Graph(#[from] SceneGraphError),
    #[error(transparent)]
    Config(PlanError),
}

/// Joined per-room paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalPath {
    pub segments: Vec<GeometricPath>,
    #[serde(rename = "total_length_m")]
    pub total_length: f64,
    pub stats: Vec<PlannerStats>,
}

impl GlobalPath {
    /// Join segments whose endpoints coincide exactly.
    ///
    /// # Panics
    ///
    /// Panics if consecutive segments do not share a bitwise-equal endpoint.
    pub fn join(segments: Vec<GeometricPath>, stats: Vec<PlannerStats>) -> Self {
        for w in segments.windows(2) {
            assert!(
                w[0].last().bitwise_eq(&w[1].first()),
                "segments do not meet: {} vs {}",
                w[0].last(),
                w[1].first()
            );
        }
        let total_length = segments.iter().map(|s| s.length).sum();
        Self {
            segments,
            total_length,
            stats,
        }
    }

    /// All waypoints with the shared joints listed once.
    pub fn waypoints(&self) -> Vec<Point2> {
        let mut out: Vec<Point2> = Vec::new();
        for seg in &self.segments {
            let skip = usize::from(!out.is_empty());
            out.extend(seg.waypoints.iter().skip(skip).copied());
        }
        out
    }

    pub fn samples_created(&self) -> u64 {
        self.stats.iter().map(|s| s.samples_created).sum()
    }

    pub fn planning_time(&self) -> f64 {
        self.stats.iter().map(|s| s.planning_time).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("global path serializes")
    }
}

/// Result of solving a list of subproblems.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Present when every subproblem was solved.
    pub path: Option<GlobalPath>,
    /// Per-subproblem results in index order.
    pub segments: Vec<Option<GeometricPath>>,
    pub stats: Vec<PlannerStats>,
    /// Time budget each subproblem received, in seconds.
    pub budgets: Vec<f64>,
}

impl SolveOutcome {
    fn from_parts(parts: Vec<(Option<GeometricPath>, PlannerStats)>, budgets: Vec<f64>) -> Self {
        let (segments, stats): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
        let path = segments
            .iter()
            .cloned()
            .collect::<Option<Vec<_>>>()
            .map(|segs| GlobalPath::join(segs, stats.clone()));
        Self {
            path,
            segments,
            stats,
            budgets,
        }
    }

    pub fn samples_created(&self) -> u64 {
        self.stats.iter().map(|s| s.samples_created).sum()
    }

    pub fn planning_time(&self) -> f64 {
        self.stats.iter().map(|s| s.planning_time).sum()
    }
}

fn check_feasible(subs: &[Subproblem], map: &GlobalMap) -> Result<(), SolveError> {
    for sub in subs {
        let problem = sub.problem();
        let validity = Validity::new(map, &problem).map_err(|reason| SolveError::SubproblemInfeasible {
            index: sub.index,
            reason,
        })?;
        let mut meter = WorkMeter::default();
        let reason = if !validity.state_valid(sub.start, &mut meter) {
            Some(PlanError::InvalidStart(sub.start))
        } else if !validity.state_valid(sub.goal, &mut meter) {
            Some(PlanError::InvalidGoal(sub.goal))
        } else {
            None
        };
        if let Some(reason) = reason {
            return Err(SolveError::SubproblemInfeasible {
                index: sub.index,
                reason,
            });
        }
    }
    Ok(())
}

fn solve_one(
    sub: &Subproblem,
    map: &GlobalMap,
    config: &PlannerConfig,
) -> Result<(Option<GeometricPath>, PlannerStats), SolveError> {
    geometric_planner::plan(map, &sub.problem(), config)
        .map(|o| (o.path, o.stats))
        .map_err(|reason| match reason {
            PlanError::InvalidConfig(_) => SolveError::Config(reason),
            reason => SolveError::SubproblemInfeasible {
                index: sub.index,
                reason,
            },
        })
}

fn worker_count(config: &SolveConfig, n: usize) -> usize {
    let hw = std::thread::available_parallelism().map_or(1, |p| p.get());
    config.workers.unwrap_or(hw.min(n)).max(1)
}

fn run_indexed<T, F>(workers: usize, items: &[T], f: F) -> Vec<Result<(Option<GeometricPath>, PlannerStats), SolveError>>
where
    T: Sync,
    F: Fn(&T) -> Result<(Option<GeometricPath>, PlannerStats), SolveError> + Sync + Send,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(err) => {
            log::warn!("thread pool unavailable ({err}); solving sequentially");
            items.iter().map(f).collect()
        }
    }
}

/// Solve every subproblem with an equal share of the global budget and join
/// the results. Subproblem `i` is seeded with `seed ^ i`, so the outcome does
/// not depend on the number of workers when the work clock is used.
pub fn solve_all(subs: &[Subproblem], map: &GlobalMap, config: &SolveConfig) -> Result<SolveOutcome, SolveError> {
    config.planner.validate().map_err(SolveError::Config)?;
    check_feasible(subs, map)?;
    let n = subs.len();
    let configs: Vec<PlannerConfig> = subs.iter().map(|s| config.subproblem_config(s.index, n)).collect();
    let jobs: Vec<(&Subproblem, &PlannerConfig)> = subs.iter().zip(&configs).collect();
    let mut parts = run_indexed(worker_count(config, n), &jobs, |(s, c)| solve_one(s, map, c))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut budgets: Vec<f64> = configs.iter().map(|c| c.timeout).collect();

    if config.redistribute {
        let leftover: f64 = parts
            .iter()
            .zip(&budgets)
            .filter(|((p, _), _)| p.is_some())
            .map(|((_, st), b)| (b - st.planning_time).max(0.0))
            .sum();
        let unsolved: Vec<usize> = (0..n).filter(|&i| parts[i].0.is_none()).collect();
        if leftover > 0.0 && !unsolved.is_empty() {
            let extra = leftover / unsolved.len() as f64;
            for i in unsolved {
                let mut cfg = configs[i].clone();
                cfg.timeout += extra;
                budgets[i] = cfg.timeout;
                parts[i] = solve_one(&subs[i], map, &cfg)?;
            }
        }
    }
    Ok(SolveOutcome::from_parts(parts, budgets))
}

/// A route together with its decomposition and solution.
#[derive(Debug, Clone)]
pub struct HierarchicalPlan {
    pub route: SemanticRoute,
    pub subproblems: Vec<Subproblem>,
    pub outcome: SolveOutcome,
    /// Whether each subproblem's segment came from the cache.
    pub reused: Vec<bool>,
}

impl HierarchicalPlan {
    pub fn path(&self) -> Option<&GlobalPath> {
        self.outcome.path.as_ref()
    }

    pub fn resolved_count(&self) -> usize {
        self.reused.iter().filter(|r| !**r).count()
    }
}

/// Stateful planner that remembers solved subproblems and reuses them when
/// a doorway closes and the route is recomputed.
pub struct SubproblemSolver {
    graph: SceneGraph,
    params: MapParams,
    map: GlobalMap,
    topology: TopologyGraph,
    penalty: f64,
    config: SolveConfig,
    cache: HashMap<CacheKey, (GeometricPath, PlannerStats)>,
    solves: AtomicU64,
}

impl SubproblemSolver {
    pub fn new(graph: SceneGraph, params: MapParams, penalty: f64, config: SolveConfig) -> Result<Self, SolveError> {
        let map = GlobalMap::build(&graph, &params)?;
        let topology = semantic_planner::build_topology(&graph, penalty);
        Ok(Self {
            graph,
            params,
            map,
            topology,
            penalty,
            config,
            cache: HashMap::new(),
            solves: AtomicU64::new(0),
        })
    }

    pub fn graph(&self) -> &SceneGraph {
        &self.graph
    }

    pub fn map(&self) -> &GlobalMap {
        &self.map
    }

    /// Number of subproblems handed to a planner so far.
    pub fn solve_count(&self) -> u64 {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn plan(&mut self, start: Point2, goal: Point2) -> Result<HierarchicalPlan, SolveError> {
        let route = semantic_planner::semantic_route(&self.topology, &self.graph, start, goal)?;
        self.solve_route(route)
    }

    /// Close `blocked` and plan again from `current` to the previous goal.
    /// Subproblems whose start, goal and room are unchanged keep their
    /// earlier segment as long as it is still valid on the updated map.
    pub fn replan(
        &mut self,
        previous: &HierarchicalPlan,
        blocked: &DoorwayId,
        current: Point2,
    ) -> Result<HierarchicalPlan, SolveError> {
        self.graph = self.graph.set_doorway_blocked(blocked, true)?;
        self.map = GlobalMap::build(&self.graph, &self.params)?;
        self.topology = semantic_planner::build_topology(&self.graph, self.penalty);
        self.plan(current, previous.route.goal)
    }

    fn still_valid(&self, sub: &Subproblem, path: &GeometricPath) -> bool {
        let problem = sub.problem();
        path.waypoints
            .windows(2)
            .all(|w| geometric_planner::motion_valid(&self.map, &problem, w[0], w[1]))
    }

    fn solve_route(&mut self, route: SemanticRoute) -> Result<HierarchicalPlan, SolveError> {
        let subs = decompose(&route, &self.graph);
        check_feasible(&subs, &self.map)?;
        let n = subs.len();
        let cached: Vec<Option<(GeometricPath, PlannerStats)>> = subs
            .iter()
            .map(|s| {
                self.cache
                    .get(&s.key())
                    .filter(|(path, _)| self.still_valid(s, path))
                    .cloned()
            })
            .collect();
        let pending: Vec<(&Subproblem, PlannerConfig)> = subs
            .iter()
            .zip(&cached)
            .filter(|(_, c)| c.is_none())
            .map(|(s, _)| (s, self.config.subproblem_config(s.index, n)))
            .collect();
        let map = &self.map;
        let solves = &self.solves;
        let results = run_indexed(worker_count(&self.config, pending.len()), &pending, |(s, c)| {
            solves.fetch_add(1, Ordering::Relaxed);
            solve_one(s, map, c)
        });
        let mut fresh = results.into_iter();
        let mut parts = Vec::with_capacity(n);
        let mut reused = Vec::with_capacity(n);
        for (sub, hit) in subs.iter().zip(cached) {
            match hit {
                Some((path, stats)) => {
                    parts.push((Some(path), stats));
                    reused.push(true);
                }
                None => {
                    let (path, stats) = fresh.next().expect("one result per pending subproblem")?;
                    if let Some(p) = &path {
                        self.cache.insert(sub.key(), (p.clone(), stats));
                    }
                    parts.push((path, stats));
                    reused.push(false);
                }
            }
        }
        let budgets = (1..=n).map(|i| self.config.subproblem_config(i, n).timeout).collect();
        Ok(HierarchicalPlan {
            route,
            subproblems: subs,
            outcome: SolveOutcome::from_parts(parts, budgets),
            reused,
        })
    }
}
