use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point2;
use crate::map_builder::GlobalMap;

use super::clock::Deadline;
use super::{
    Algorithm, GeometricPath, GeometricProblem, InformedSampler, PlanError, PlanOutcome,
    PlanTrace, PlannerConfig, PlannerStats, RegionSampler, TraceSample, Validity, WorkMeter,
};

/// Region rejections tolerated per iteration before giving up on the ellipse.
const MAX_INFORMED_ATTEMPTS: usize = 256;

struct Node {
    point: Point2,
    parent: Option<usize>,
    cost: f64,
    children: Vec<usize>,
}

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn new(root: Point2) -> Self {
        Self {
            nodes: vec![Node {
                point: root,
                parent: None,
                cost: 0.0,
                children: Vec::new(),
            }],
        }
    }

    fn nearest(&self, p: Point2, meter: &mut WorkMeter) -> usize {
        meter.neighbour_distances += self.nodes.len() as u64;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.point.distance_squared(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn near_into(&self, p: Point2, radius: f64, out: &mut Vec<usize>, meter: &mut WorkMeter) {
        meter.neighbour_distances += self.nodes.len() as u64;
        let r2 = radius * radius;
        out.clear();
        out.extend(
            self.nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.point.distance_squared(p) <= r2)
                .map(|(i, _)| i),
        );
    }

    fn add(&mut self, point: Point2, parent: usize) -> usize {
        let cost = self.nodes[parent].cost + self.nodes[parent].point.distance(point);
        let id = self.nodes.len();
        self.nodes.push(Node {
            point,
            parent: Some(parent),
            cost,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    fn reparent(&mut self, node: usize, new_parent: usize, meter: &mut WorkMeter) {
        if let Some(old) = self.nodes[node].parent {
            self.nodes[old].children.retain(|&c| c != node);
        }
        self.nodes[node].parent = Some(new_parent);
        self.nodes[new_parent].children.push(node);
        let base = self.nodes[new_parent].cost + self.nodes[new_parent].point.distance(self.nodes[node].point);
        self.nodes[node].cost = base;
        let mut stack = self.nodes[node].children.clone();
        while let Some(c) = stack.pop() {
            meter.cost_updates += 1;
            let p = self.nodes[c].parent.expect("child has parent");
            self.nodes[c].cost = self.nodes[p].cost + self.nodes[p].point.distance(self.nodes[c].point);
            stack.extend(self.nodes[c].children.iter().copied());
        }
    }

    fn path_to(&self, mut node: usize) -> Vec<Point2> {
        let mut pts = vec![self.nodes[node].point];
        while let Some(p) = self.nodes[node].parent {
            pts.push(self.nodes[p].point);
            node = p;
        }
        pts.reverse();
        pts
    }
}

fn steer(from: Point2, to: Point2, range: f64) -> Point2 {
    let d = from.distance(to);
    if d <= range {
        to
    } else {
        from.lerp(to, range / d)
    }
}

/// Shrinking-ball connection radius for RRT* in the plane, for a sampling
/// region of measure `region_area`.
fn rewire_radius(config: &PlannerConfig, region_area: f64, n: usize) -> f64 {
    let n = n.max(2) as f64;
    let gamma = config.rewire_factor * 2.0 * 1.5f64.sqrt() * (region_area / std::f64::consts::PI).sqrt();
    (gamma * (n.ln() / n).sqrt()).min(config.steer_range)
}

/// Plan from `problem.start` to `problem.goal`.
///
/// Runs until the configured time or iteration budget is exhausted (RRT stops
/// at its first solution) and returns the best path found, if any. With the
/// informed variant, samples come from the ellipse bounded by the current best
/// cost once a first solution exists.
pub fn plan(
    map: &GlobalMap,
    problem: &GeometricProblem,
    config: &PlannerConfig,
) -> Result<PlanOutcome, PlanError> {
    config.validate()?;
    let validity = Validity::new(map, problem)?;
    let region = RegionSampler::new(&validity)?;
    let mut meter = WorkMeter::default();
    let mut deadline = Deadline::new(config.clock, config.timeout, config.max_iterations);
    let mut trace = config.trace.then(PlanTrace::default);

    if !validity.state_valid(problem.start, &mut meter) {
        return Err(PlanError::InvalidStart(problem.start));
    }
    if !validity.state_valid(problem.goal, &mut meter) {
        return Err(PlanError::InvalidGoal(problem.goal));
    }

    let finish = |path: Option<GeometricPath>, meter: &WorkMeter, deadline: &Deadline, tree_size: usize, rejected: u64, trace: Option<PlanTrace>| {
        let best_cost = path.as_ref().map_or(f64::INFINITY, |p| p.length);
        PlanOutcome {
            stats: PlannerStats {
                samples_created: meter.samples,
                rejected_samples: rejected,
                iterations: meter.iterations,
                tree_size,
                solved: path.is_some(),
                planning_time: deadline.elapsed(meter),
                best_cost,
            },
            path,
            trace,
            work: *meter,
        }
    };

    if problem.start.distance(problem.goal) <= problem.goal_tolerance
        && validity.motion_valid(problem.start, problem.goal, &mut meter)
    {
        let path = GeometricPath::new(vec![problem.start, problem.goal]);
        if let Some(t) = trace.as_mut() {
            t.cost_history.push((0, path.length));
        }
        return Ok(finish(Some(path), &meter, &deadline, 1, 0, trace));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let informed = InformedSampler::new(problem.start, problem.goal);
    let mut tree = Tree::new(problem.start);
    // Nodes within goal tolerance that can connect straight to the goal.
    let mut goal_nodes: Vec<usize> = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    let mut rejected = 0u64;
    let star = config.algorithm != Algorithm::Rrt;
    let mut near: Vec<usize> = Vec::new();
    let mut through: Vec<f64> = Vec::new();

    while !deadline.expired(&meter) {
        meter.iterations += 1;
        let c_best = best.map_or(f64::INFINITY, |(_, c)| c);

        let sample = if config.goal_bias > 0.0 && rng.random::<f64>() < config.goal_bias {
            meter.samples += 1;
            problem.goal
        } else if config.algorithm == Algorithm::InformedRrtStar && c_best.is_finite() {
            let mut attempt = 0;
            loop {
                meter.samples += 1;
                attempt += 1;
                let p = informed.draw(c_best, &mut rng);
                if validity.in_region(p, &mut meter) || attempt >= MAX_INFORMED_ATTEMPTS {
                    break p;
                }
                rejected += 1;
                if let Some(t) = trace.as_mut() {
                    t.samples.push(TraceSample { point: p, best_cost: c_best });
                }
            }
        } else {
            region.draw(&mut rng, &mut meter)
        };
        if let Some(t) = trace.as_mut() {
            t.samples.push(TraceSample {
                point: sample,
                best_cost: c_best,
            });
        }

        let nearest = tree.nearest(sample, &mut meter);
        let new_point = steer(tree.nodes[nearest].point, sample, config.steer_range);
        if !validity.state_valid(new_point, &mut meter) {
            rejected += 1;
            continue;
        }

        let new_id = if star {
            let measure = if config.algorithm == Algorithm::InformedRrtStar && c_best.is_finite() {
                let (a, b) = informed.semi_axes(c_best);
                region.area().min(std::f64::consts::PI * a * b)
            } else {
                region.area()
            };
            let radius = rewire_radius(config, measure, tree.nodes.len() + 1);
            tree.near_into(new_point, radius, &mut near, &mut meter);
            if !near.contains(&nearest) {
                near.push(nearest);
            }
            meter.near_candidates += 2 * near.len() as u64;
            // Cheapest valid parent first; motion checks are lazy.
            through.clear();
            through.extend(
                near.iter()
                    .map(|&i| tree.nodes[i].cost + tree.nodes[i].point.distance(new_point)),
            );
            let mut parent = None;
            loop {
                let best_slot = (0..near.len())
                    .filter(|&k| through[k].is_finite())
                    .min_by(|&a, &b| through[a].total_cmp(&through[b]).then(near[a].cmp(&near[b])));
                let Some(k) = best_slot else { break };
                if validity.motion_valid(tree.nodes[near[k]].point, new_point, &mut meter) {
                    parent = Some(near[k]);
                    break;
                }
                through[k] = f64::INFINITY;
            }
            let Some(parent) = parent else {
                rejected += 1;
                continue;
            };
            let id = tree.add(new_point, parent);
            for &i in &near {
                if i == parent {
                    continue;
                }
                let via_new = tree.nodes[id].cost + new_point.distance(tree.nodes[i].point);
                if via_new < tree.nodes[i].cost
                    && validity.motion_valid(new_point, tree.nodes[i].point, &mut meter)
                {
                    tree.reparent(i, id, &mut meter);
                }
            }
            id
        } else {
            if !validity.motion_valid(tree.nodes[nearest].point, new_point, &mut meter) {
                rejected += 1;
                continue;
            }
            tree.add(new_point, nearest)
        };

        if new_point.distance(problem.goal) <= problem.goal_tolerance
            && validity.motion_valid(new_point, problem.goal, &mut meter)
        {
            goal_nodes.push(new_id);
        }

        let current = goal_nodes
            .iter()
            .map(|&g| (g, tree.nodes[g].cost + tree.nodes[g].point.distance(problem.goal)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((node, cost)) = current {
            if best.map_or(true, |(_, c)| cost < c) {
                best = Some((node, cost));
                if let Some(t) = trace.as_mut() {
                    t.cost_history.push((meter.iterations, cost));
                }
            }
            if !star {
                break;
            }
        }
    }

    if let Some(t) = trace.as_mut() {
        t.tree = tree
            .nodes
            .iter()
            .filter_map(|n| n.parent.map(|p| (tree.nodes[p].point, n.point)))
            .collect();
    }
    let path = best.map(|(node, _)| {
        let mut pts = tree.path_to(node);
        if !pts.last().expect("non-empty").bitwise_eq(&problem.goal) {
            pts.push(problem.goal);
        }
        GeometricPath::new(pts)
    });
    Ok(finish(path, &meter, &deadline, tree.nodes.len(), rejected, trace))
}
