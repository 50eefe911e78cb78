use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use snav::bench::{self, BenchConfig, Mode, QueryDistribution};
use snav::geometric_planner::{self, ClockMode, GeometricProblem, PlannerConfig};
use snav::map_builder::GlobalMap;
use snav::scene_graph::{self, MapError, SceneGraph};
use snav::semantic_planner;
use snav::subproblem_solver::{self, SolveConfig};
use snav::svg::{render_map, Overlay};
use snav::{MapParams, Point2};

#[derive(Parser)]
#[command(name = "snav", version, about = "Hierarchical semantic-geometric path planning")]
struct Cli {
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a map file parses and passes validation.
    Validate(ValidateArgs),
    /// Plan a path between two positions.
    Plan(PlanArgs),
    /// Run the three-way planner comparison.
    Bench(BenchArgs),
    /// Draw a map, optionally with its distance field and a path.
    Render(RenderArgs),
}

#[derive(Args)]
struct MapArgs {
    /// Scene graph map file (JSON).
    #[arg(long)]
    map: PathBuf,
    /// Ignore unknown fields in the map file.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scene graph map file (JSON).
    map: PathBuf,
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    map: MapArgs,
    /// Start position as "x,y".
    #[arg(long, value_parser = parse_point)]
    start: Point2,
    /// Goal position as "x,y".
    #[arg(long, value_parser = parse_point, conflicts_with = "goal_room", required_unless_present = "goal_room")]
    goal: Option<Point2>,
    /// Goal room by name or id; the goal is the room's center.
    #[arg(long)]
    goal_room: Option<String>,
    /// irrt, irrt_sg, or irrt_sg_sps.
    #[arg(long, default_value = "irrt_sg_sps")]
    mode: Mode,
    /// Planning budget in seconds.
    #[arg(long, default_value_t = 0.1)]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Penalty added per doorway in the semantic search.
    #[arg(long = "p-d", default_value_t = semantic_planner::DEFAULT_DOORWAY_PENALTY)]
    p_d: f64,
    /// wall or work.
    #[arg(long, default_value = "wall")]
    clock: ClockMode,
    /// Give time left by early finishers to unsolved subproblems.
    #[arg(long)]
    redistribute: bool,
    /// Path JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG rendering of map, samples, tree, and path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    #[arg(long, default_value_t = 0.1)]
    timeout: f64,
    /// Comma-separated subset of irrt, irrt_sg, irrt_sg_sps.
    #[arg(long, default_value = "irrt,irrt_sg,irrt_sg_sps", value_delimiter = ',')]
    modes: Vec<Mode>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// wall or work; work makes timing and CSV output reproducible.
    #[arg(long, default_value = "wall")]
    clock: ClockMode,
    /// Use this start for every query (with --fixed-goal).
    #[arg(long, value_parser = parse_point, requires = "fixed_goal")]
    fixed_start: Option<Point2>,
    #[arg(long, value_parser = parse_point, requires = "fixed_start")]
    fixed_goal: Option<Point2>,
    /// Allow random start and goal in the same room.
    #[arg(long)]
    same_room: bool,
    #[arg(long = "p-d", default_value_t = semantic_planner::DEFAULT_DOORWAY_PENALTY)]
    p_d: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Boxplot of samples and path length per mode.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// JSON summary output.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    out: PathBuf,
    /// Include the signed distance field heat layer.
    #[arg(long)]
    sdf: bool,
    /// Path JSON written by `plan --out`.
    #[arg(long)]
    path: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<Point2, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"x,y\", got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .ok_or_else(|| format!("`{v}` is not a finite number"))
    };
    Ok(Point2::new(parse(x)?, parse(y)?))
}

/// Failure classes mapped to the documented exit codes.
enum Failure {
    /// Parse, validation, no route, or no solution.
    Domain(anyhow::Error),
    /// Bad arguments or file system trouble.
    Usage(anyhow::Error),
}

impl Failure {
    fn domain(e: impl Into<anyhow::Error>) -> Self {
        Failure::Domain(e.into())
    }

    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure::Usage(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path, lenient: bool) -> Result<SceneGraph, Failure> {
    scene_graph::load_map_with(path, lenient).map_err(|e| match e {
        MapError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            Failure::usage(anyhow!("no such file: {}", path.display()))
        }
        MapError::Io { .. } => Failure::usage(e),
        other => Failure::domain(anyhow!("{}: {other}", path.display())),
    })
}

fn build(graph: &SceneGraph) -> Result<GlobalMap, Failure> {
    GlobalMap::build(graph, &MapParams::default()).map_err(Failure::domain)
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::usage)
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let graph = load(&args.map, args.lenient)?;
    build(&graph)?;
    println!(
        "{}: ok ({} rooms, {} doorways)",
        args.map.display(),
        graph.rooms.len(),
        graph.doorways.len()
    );
    Ok(())
}

fn cmd_plan(args: &PlanArgs, jobs: Option<usize>) -> CmdResult {
    if !(args.timeout > 0.0) {
        return Err(Failure::usage(anyhow!("--timeout must be positive")));
    }
    let graph = load(&args.map.map, args.map.lenient)?;
    let map = build(&graph)?;
    let goal = match (&args.goal, &args.goal_room) {
        (Some(g), _) => *g,
        (None, Some(name)) => graph
            .room_by_name(name)
            .map(|r| r.center)
            .ok_or_else(|| Failure::domain(anyhow!("unknown room `{name}`")))?,
        (None, None) => unreachable!("clap requires --goal or --goal-room"),
    };
    let planner = PlannerConfig {
        timeout: args.timeout,
        seed: args.seed,
        clock: args.clock,
        trace: args.svg.is_some(),
        ..PlannerConfig::default()
    };
    let topology = semantic_planner::build_topology(&graph, args.p_d);
    let route = if args.mode == Mode::Irrt {
        None
    } else {
        let route = semantic_planner::semantic_route(&topology, &graph, args.start, goal)
            .map_err(Failure::domain)?;
        log::info!("semantic route: rooms {:?} doorways {:?}", route.rooms, route.doorways);
        Some(route)
    };

    let mut overlay_samples = Vec::new();
    let mut overlay_tree = Vec::new();
    let (json, paths, length, samples) = match (&route, args.mode) {
        (Some(route), Mode::IrrtSgSps) => {
            let subs = subproblem_solver::decompose(route, &graph);
            let config = SolveConfig {
                planner,
                workers: jobs,
                redistribute: args.redistribute,
            };
            let out = subproblem_solver::solve_all(&subs, &map, &config).map_err(Failure::domain)?;
            let samples = out.samples_created();
            let path = out.path.ok_or_else(|| {
                Failure::domain(anyhow!("no solution within {} s ({} samples)", args.timeout, samples))
            })?;
            let paths: Vec<Vec<Point2>> = path.segments.iter().map(|s| s.waypoints.clone()).collect();
            (path.to_json(), paths, path.total_length, samples)
        }
        _ => {
            let mut problem = GeometricProblem::new(args.start, goal);
            if let Some(route) = &route {
                problem = problem.restricted_to(route.free_space.iter().cloned(), route.doorways.iter().cloned());
            }
            let out = geometric_planner::plan(&map, &problem, &planner).map_err(Failure::domain)?;
            if let Some(trace) = out.trace {
                overlay_samples = trace.samples.iter().map(|s| s.point).collect();
                overlay_tree = trace.tree;
            }
            let samples = out.stats.samples_created;
            let path = out.path.ok_or_else(|| {
                Failure::domain(anyhow!("no solution within {} s ({} samples)", args.timeout, samples))
            })?;
            (path.to_json(), vec![path.waypoints.clone()], path.length, samples)
        }
    };

    println!("length_m: {length:.4}");
    println!("samples: {samples}");
    if let Some(out) = &args.out {
        write_file(out, &json)?;
    }
    if let Some(svg) = &args.svg {
        let overlay = Overlay {
            sdf: false,
            paths: paths.iter().map(Vec::as_slice).collect(),
            samples: &overlay_samples,
            tree: &overlay_tree,
            start: Some(args.start),
            goal: Some(goal),
        };
        write_file(svg, &render_map(&map, &overlay))?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs, jobs: Option<usize>) -> CmdResult {
    let graph = load(&args.map.map, args.map.lenient)?;
    let map = build(&graph)?;
    let mut config = BenchConfig::new(&args.map.map);
    config.modes = args.modes.clone();
    config.n_queries = args.queries;
    config.timeout = args.timeout;
    config.seed = args.seed;
    config.clock = args.clock;
    config.jobs = jobs;
    config.doorway_penalty = args.p_d;
    config.queries = match (args.fixed_start, args.fixed_goal) {
        (Some(start), Some(goal)) => QueryDistribution::Fixed { start, goal },
        _ => QueryDistribution::Random {
            allow_same_room: args.same_room,
        },
    };
    config.validate().map_err(Failure::usage)?;
    let records = bench::run_bench_on(&graph, &map, &config).map_err(Failure::domain)?;
    let summaries = bench::summarize(&records).map_err(Failure::domain)?;
    print!("{}", bench::summary_table(&summaries));
    if let Some(csv) = &args.csv {
        write_file(csv, &bench::to_csv_string(&records))?;
    }
    if let Some(svg) = &args.svg {
        write_file(svg, &bench::boxplot_svg(&summaries))?;
    }
    if let Some(summary) = &args.summary {
        write_file(summary, &bench::summary_json(&summaries))?;
    }
    Ok(())
}

fn read_path_json(path: &Path) -> Result<Vec<Vec<Point2>>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::usage)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not JSON", path.display()))
        .map_err(Failure::domain)?;
    let polyline = |v: &serde_json::Value| -> Option<Vec<Point2>> {
        v.get("waypoints")?
            .as_array()?
            .iter()
            .map(|p| {
                let xy = p.as_array()?;
                Some(Point2::new(xy.first()?.as_f64()?, xy.get(1)?.as_f64()?))
            })
            .collect()
    };
    let paths = match value.get("segments").and_then(|s| s.as_array()) {
        Some(segments) => segments.iter().map(polyline).collect::<Option<Vec<_>>>(),
        None => polyline(&value).map(|p| vec![p]),
    };
    paths.ok_or_else(|| Failure::domain(anyhow!("{} holds no waypoints", path.display())))
}

fn cmd_render(args: &RenderArgs) -> CmdResult {
    let graph = load(&args.map.map, args.map.lenient)?;
    let map = build(&graph)?;
    let paths = match &args.path {
        Some(p) => read_path_json(p)?,
        None => Vec::new(),
    };
    let overlay = Overlay {
        sdf: args.sdf,
        paths: paths.iter().map(Vec::as_slice).collect(),
        ..Overlay::default()
    };
    write_file(&args.out, &render_map(&map, &overlay))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SNAV_LOG", "warn")).init();
    let cli = Cli::parse();
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Plan(a) => cmd_plan(a, cli.jobs),
        Command::Bench(a) => cmd_bench(a, cli.jobs),
        Command::Render(a) => cmd_render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
