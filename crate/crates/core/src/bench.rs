//! Repeated randomized queries across the three planner setups, with CSV,
//! JSON, and SVG boxplot output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometric_planner::{
    self, Algorithm, ClockMode, GeometricProblem, PlannerConfig, Validity, WorkMeter,
};
use crate::geometry::Point2;
use crate::map_builder::{BuildError, GlobalMap, MapParams};
use crate::scene_graph::{self, MapError, SceneGraph};
use crate::semantic_planner::{self, TopologyGraph, DEFAULT_DOORWAY_PENALTY};
use crate::subproblem_solver::{self, SolveConfig};

pub const CSV_HEADER: &str = "query_id,mode,seed,solved,samples,path_length_m,time_s";

/// Draws allowed when searching for one valid random state.
const MAX_STATE_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Informed RRT* over the whole map.
    #[serde(rename = "irrt")]
    Irrt,
    /// Informed RRT* restricted to the rooms of the semantic route.
    #[serde(rename = "irrt_sg")]
    IrrtSg,
    /// Restricted Informed RRT* solved per room along the route.
    #[serde(rename = "irrt_sg_sps")]
    IrrtSgSps,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Irrt, Mode::IrrtSg, Mode::IrrtSgSps];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Irrt => "irrt",
            Mode::IrrtSg => "irrt_sg",
            Mode::IrrtSgSps => "irrt_sg_sps",
        }
    }

    /// Parse a comma-separated list such as `irrt,irrt_sg`.
    pub fn parse_list(s: &str) -> Result<Vec<Mode>, String> {
        let modes = s
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Mode>, _>>()?;
        if modes.is_empty() {
            return Err("no modes given".into());
        }
        Ok(modes)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected irrt, irrt_sg, or irrt_sg_sps)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryDistribution {
    /// The same pair for every query.
    Fixed { start: Point2, goal: Point2 },
    /// Uniform over valid states; start and goal lie in different rooms
    /// unless `allow_same_room` is set.
    Random { allow_same_room: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub map_path: PathBuf,
    pub modes: Vec<Mode>,
    pub n_queries: usize,
    /// Per-query planning budget in seconds.
    pub timeout: f64,
    pub seed: u64,
    pub queries: QueryDistribution,
    /// Worker threads across queries; `None` uses the rayon default.
    pub jobs: Option<usize>,
    pub clock: ClockMode,
    pub doorway_penalty: f64,
    pub map_params: MapParams,
}

impl BenchConfig {
    pub fn new(map_path: impl Into<PathBuf>) -> Self {
        Self {
            map_path: map_path.into(),
            modes: Mode::ALL.to_vec(),
            n_queries: 1000,
            timeout: 0.1,
            seed: 0,
            queries: QueryDistribution::Random {
                allow_same_room: false,
            },
            jobs: None,
            clock: ClockMode::Wall,
            doorway_penalty: DEFAULT_DOORWAY_PENALTY,
            map_params: MapParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_queries == 0 {
            return Err(BenchError::Config("n_queries must be at least 1".into()));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(BenchError::Config("timeout must be positive".into()));
        }
        if self.modes.is_empty() {
            return Err(BenchError::Config("no modes selected".into()));
        }
        if self.jobs == Some(0) {
            return Err(BenchError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("invalid bench configuration: {0}")]
    Config(String),
    #[error("no records to summarize")]
    EmptyInput,
    #[error("could not find a valid {0} state")]
    NoValidState(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    pub id: usize,
    pub start: Point2,
    pub goal: Point2,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub query_id: usize,
    pub mode: Mode,
    pub seed: u64,
    pub solved: bool,
    pub samples: u64,
    #[serde(rename = "path_length_m")]
    pub path_length: Option<f64>,
    #[serde(rename = "time_s")]
    pub time: f64,
}

fn random_valid_state(
    map: &GlobalMap,
    graph: &SceneGraph,
    rng: &mut ChaCha8Rng,
    what: &'static str,
    mut accept: impl FnMut(&crate::scene_graph::RoomId) -> bool,
) -> Result<Point2, BenchError> {
    let bbox = map.bbox;
    let any = GeometricProblem::new(bbox.center(), bbox.center());
    let validity = Validity::new(map, &any).expect("unrestricted problems have a region");
    let mut meter = WorkMeter::default();
    for _ in 0..MAX_STATE_ATTEMPTS {
        let p = Point2::new(
            bbox.min.x + rng.random::<f64>() * bbox.width(),
            bbox.min.y + rng.random::<f64>() * bbox.height(),
        );
        if !validity.state_valid(p, &mut meter) {
            continue;
        }
        if let Some(room) = graph.locate_room(p) {
            if accept(room) {
                return Ok(p);
            }
        }
    }
    Err(BenchError::NoValidState(what))
}

/// The query list for `config`, derived only from the master seed.
pub fn generate_queries(
    graph: &SceneGraph,
    map: &GlobalMap,
    config: &BenchConfig,
) -> Result<Vec<Query>, BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.n_queries);
    for id in 0..config.n_queries {
        let (start, goal) = match &config.queries {
            QueryDistribution::Fixed { start, goal } => (*start, *goal),
            QueryDistribution::Random { allow_same_room } => {
                let start = random_valid_state(map, graph, &mut rng, "start", |_| true)?;
                let start_room = graph.locate_room(start).cloned();
                let goal = random_valid_state(map, graph, &mut rng, "goal", |room| {
                    *allow_same_room || Some(room) != start_room.as_ref()
                })?;
                (start, goal)
            }
        };
        out.push(Query {
            id,
            start,
            goal,
            seed: rng.next_u64(),
        });
    }
    Ok(out)
}

fn unsolved(query: &Query, mode: Mode, samples: u64, time: f64) -> BenchRecord {
    BenchRecord {
        query_id: query.id,
        mode,
        seed: query.seed,
        solved: false,
        samples,
        path_length: None,
        time,
    }
}

/// Run one query in one mode. Failures of any kind become unsolved records.
pub fn run_query(
    graph: &SceneGraph,
    map: &GlobalMap,
    topology: &TopologyGraph,
    query: &Query,
    mode: Mode,
    config: &BenchConfig,
) -> BenchRecord {
    let planner = PlannerConfig {
        algorithm: Algorithm::InformedRrtStar,
        timeout: config.timeout,
        seed: query.seed,
        clock: config.clock,
        ..PlannerConfig::default()
    };
    let problem = GeometricProblem::new(query.start, query.goal);
    let single = |problem: GeometricProblem| match geometric_planner::plan(map, &problem, &planner) {
        Ok(o) => BenchRecord {
            query_id: query.id,
            mode,
            seed: query.seed,
            solved: o.stats.solved,
            samples: o.stats.samples_created,
            path_length: o.path.map(|p| p.length),
            time: o.stats.planning_time,
        },
        Err(err) => {
            log::warn!("query {} ({mode}): {err}", query.id);
            unsolved(query, mode, 0, 0.0)
        }
    };
    if mode == Mode::Irrt {
        return single(problem);
    }
    let route = match semantic_planner::semantic_route(topology, graph, query.start, query.goal) {
        Ok(r) => r,
        Err(err) => {
            log::warn!("query {} ({mode}): {err}", query.id);
            return unsolved(query, mode, 0, 0.0);
        }
    };
    if mode == Mode::IrrtSg {
        return single(problem.restricted_to(route.free_space.iter().cloned(), route.doorways.iter().cloned()));
    }
    let subs = subproblem_solver::decompose(&route, graph);
    let solve = SolveConfig {
        planner: planner.clone(),
        workers: Some(1),
        redistribute: false,
    };
    match subproblem_solver::solve_all(&subs, map, &solve) {
        Ok(out) => BenchRecord {
            query_id: query.id,
            mode,
            seed: query.seed,
            solved: out.path.is_some(),
            samples: out.samples_created(),
            path_length: out.path.as_ref().map(|p| p.total_length),
            time: out.planning_time(),
        },
        Err(err) => {
            log::warn!("query {} ({mode}): {err}", query.id);
            unsolved(query, mode, 0, 0.0)
        }
    }
}

/// Load the map named in `config` and run the benchmark.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    config.validate()?;
    let graph = scene_graph::load_map(&config.map_path)?;
    let map = GlobalMap::build(&graph, &config.map_params)?;
    run_bench_on(&graph, &map, config)
}

/// Run the benchmark on an already built map. Records are ordered by query
/// id, then by the order of `config.modes`.
pub fn run_bench_on(
    graph: &SceneGraph,
    map: &GlobalMap,
    config: &BenchConfig,
) -> Result<Vec<BenchRecord>, BenchError> {
    config.validate()?;
    let queries = generate_queries(graph, map, config)?;
    let topology = semantic_planner::build_topology(graph, config.doorway_penalty);
    let run = |q: &Query| -> Vec<BenchRecord> {
        config
            .modes
            .iter()
            .map(|&m| run_query(graph, map, &topology, q, m, config))
            .collect()
    };
    let per_query: Vec<Vec<BenchRecord>> = match config.jobs {
        Some(1) => queries.iter().map(run).collect(),
        jobs => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = jobs {
                builder = builder.num_threads(n);
            }
            let pool = builder
                .build()
                .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
            pool.install(|| queries.par_iter().map(run).collect())
        }
    };
    Ok(per_query.into_iter().flatten().collect())
}

// --- CSV ---------------------------------------------------------------------

pub fn write_csv_to<W: std::io::Write>(records: &[BenchRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[BenchRecord]) -> String {
    let mut buf = Vec::new();
    write_csv_to(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn write_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<(), BenchError> {
    std::fs::write(path, to_csv_string(records))?;
    Ok(())
}

pub fn records_from_csv(text: &str) -> Result<Vec<BenchRecord>, BenchError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(BenchError::Config(format!("unexpected csv header `{}`", header.join(","))));
    }
    reader
        .deserialize()
        .collect::<Result<Vec<BenchRecord>, _>>()
        .map_err(BenchError::from)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>, BenchError> {
    records_from_csv(&std::fs::read_to_string(path)?)
}

// --- summary -----------------------------------------------------------------

/// Nearest-rank quantile of ascending `sorted`: the element at rank
/// `ceil(q * n)`, with rank at least 1.
///
/// # Panics
///
/// Panics if `sorted` is empty.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q1: nearest_rank(&v, 0.25),
            median: nearest_rank(&v, 0.5),
            q3: nearest_rank(&v, 0.75),
            max: v[v.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    #[serde(skip)]
    pub mode: Mode,
    pub runs: usize,
    pub solved: usize,
    pub solve_rate: f64,
    pub samples: Quantiles,
    /// Over solved runs only.
    pub path_length: Option<Quantiles>,
}

/// Per-mode order statistics, in the order modes first appear.
pub fn summarize(records: &[BenchRecord]) -> Result<Vec<ModeSummary>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let mut order: Vec<Mode> = Vec::new();
    for r in records {
        if !order.contains(&r.mode) {
            order.push(r.mode);
        }
    }
    Ok(order
        .into_iter()
        .map(|mode| {
            let runs: Vec<&BenchRecord> = records.iter().filter(|r| r.mode == mode).collect();
            let samples: Vec<f64> = runs.iter().map(|r| r.samples as f64).collect();
            let lengths: Vec<f64> = runs.iter().filter(|r| r.solved).filter_map(|r| r.path_length).collect();
            let solved = runs.iter().filter(|r| r.solved).count();
            ModeSummary {
                mode,
                runs: runs.len(),
                solved,
                solve_rate: solved as f64 / runs.len() as f64,
                samples: Quantiles::of(&samples).expect("mode has runs"),
                path_length: Quantiles::of(&lengths),
            }
        })
        .collect())
}

/// `{mode: {samples: {...}, path_length: {...}, solve_rate, ...}}`.
pub fn summary_json(summaries: &[ModeSummary]) -> String {
    let map: BTreeMap<&str, &ModeSummary> = summaries.iter().map(|s| (s.mode.as_str(), s)).collect();
    serde_json::to_string_pretty(&map).expect("summary serializes")
}

/// Query ids solved by every mode present in `records`.
pub fn common_solved(records: &[BenchRecord]) -> BTreeSet<usize> {
    let modes: BTreeSet<Mode> = records.iter().map(|r| r.mode).collect();
    let mut solved: BTreeMap<usize, BTreeSet<Mode>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.solved) {
        solved.entry(r.query_id).or_default().insert(r.mode);
    }
    solved
        .into_iter()
        .filter(|(_, m)| *m == modes)
        .map(|(id, _)| id)
        .collect()
}

/// Plain-text table of the summary for terminal output.
pub fn summary_table(summaries: &[ModeSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>8} {:>10} {:>10} {:>10} {:>10}",
        "mode", "runs", "solved", "samples", "len q1", "len med", "len q3"
    );
    for s in summaries {
        let (q1, med, q3) = s
            .path_length
            .map_or(("-".into(), "-".into(), "-".into()), |q| {
                (format!("{:.3}", q.q1), format!("{:.3}", q.median), format!("{:.3}", q.q3))
            });
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>7.1}% {:>10} {:>10} {:>10} {:>10}",
            s.mode.as_str(),
            s.runs,
            100.0 * s.solve_rate,
            s.samples.median,
            q1,
            med,
            q3
        );
    }
    out
}

// --- boxplot -------------------------------------------------------------------

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const PAD: f64 = 40.0;

/// Two panels (samples created, path length), one box per mode. Whiskers
/// span min to max; every box carries its five numbers as data attributes.
pub fn boxplot_svg(summaries: &[ModeSummary]) -> String {
    let panels: [(&str, &str, Vec<Option<Quantiles>>); 2] = [
        ("samples", "samples created", summaries.iter().map(|s| Some(s.samples)).collect()),
        ("path_length", "path length [m]", summaries.iter().map(|s| s.path_length).collect()),
    ];
    let width = 2.0 * PANEL_W + 3.0 * PAD;
    let height = PANEL_H + 2.0 * PAD + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (p, (metric, label, boxes)) in panels.iter().enumerate() {
        let x0 = PAD + p as f64 * (PANEL_W + PAD);
        let y0 = PAD;
        let present: Vec<Quantiles> = boxes.iter().flatten().copied().collect();
        let lo = present.iter().map(|q| q.min).fold(f64::INFINITY, f64::min);
        let hi = present.iter().map(|q| q.max).fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        };
        let y = |v: f64| y0 + PANEL_H * (1.0 - (v - lo) / (hi - lo));
        let _ = writeln!(
            svg,
            r##"<g class="panel" data-metric="{metric}"><rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#888"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            x0 + PANEL_W / 2.0,
            y0 - 12.0
        );
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{hi:.3}</text>"#, x0 - 4.0, y0 + 10.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{lo:.3}</text>"#, x0 - 4.0, y0 + PANEL_H);
        let slot = PANEL_W / boxes.len().max(1) as f64;
        for (k, (summary, q)) in summaries.iter().zip(boxes).enumerate() {
            let cx = x0 + slot * (k as f64 + 0.5);
            let _ = writeln!(
                svg,
                r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                y0 + PANEL_H + 16.0,
                summary.mode
            );
            let Some(q) = q else { continue };
            let half = slot * 0.25;
            let _ = writeln!(
                svg,
                r#"<g class="box" data-mode="{}" data-metric="{metric}" data-min="{}" data-q1="{}" data-median="{}" data-q3="{}" data-max="{}">"#,
                summary.mode, q.min, q.q1, q.median, q.q3, q.max
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#333"/>"##,
                y(q.min),
                y(q.max)
            );
            for v in [q.min, q.max] {
                let _ = writeln!(
                    svg,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333"/>"##,
                    cx - half / 2.0,
                    y(v),
                    cx + half / 2.0,
                    y(v)
                );
            }
            let _ = writeln!(
                svg,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#333"/>"##,
                cx - half,
                y(q.q3),
                2.0 * half,
                (y(q.q1) - y(q.q3)).max(0.5)
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c00" stroke-width="2"/>"##,
                cx - half,
                y(q.median),
                cx + half,
                y(q.median)
            );
            svg.push_str("</g>\n");
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}
