use crate::geometry::{Point2, Rect};
use crate::map_builder::{Contour, GlobalMap};

use super::{GeometricProblem, PlanError, WorkMeter, MAX_MOTION_STEP};

/// State and motion validity for one problem on one map.
///
/// A state is valid when it lies in the map bounds, inside the allowed region
/// (if the problem restricts it), and at least `robot_radius` from every wall.
/// Clearance is read from the distance grid when the interpolation error bound
/// decides it and computed exactly from the wall segments otherwise, so
/// verdicts always agree with the exact geometry.
pub struct Validity<'a> {
    map: &'a GlobalMap,
    bbox: Rect,
    contours: Option<Vec<&'a Contour>>,
    openings: Vec<Rect>,
    /// Allowed wall-free rooms shrunk by the robot radius; every point of
    /// one of these is valid, and so is every segment inside one of them.
    insets: Vec<Rect>,
    radius: f64,
    step: f64,
}

impl<'a> Validity<'a> {
    pub fn new(map: &'a GlobalMap, problem: &GeometricProblem) -> Result<Self, PlanError> {
        let mut insets = Vec::new();
        let contours = match &problem.allowed_rooms {
            None => None,
            Some(rooms) => {
                let mut found: Vec<&Contour> = Vec::new();
                for (i, c) in map.contours.iter().enumerate() {
                    if !rooms.contains(&c.room) {
                        continue;
                    }
                    found.push(c);
                    let b = c.bounds();
                    let r = problem.robot_radius;
                    if map.contour_is_wall_free(i) && b.width() > 2.0 * r && b.height() > 2.0 * r {
                        insets.push(b.inflate(-r));
                    }
                }
                if found.is_empty() {
                    return Err(PlanError::EmptyRegion);
                }
                Some(found)
            }
        };
        let openings = problem
            .route_doorways
            .iter()
            .filter_map(|d| map.carved.opening(d))
            .map(|o| o.region)
            .collect();
        Ok(Self {
            map,
            bbox: map.bbox,
            contours,
            openings,
            insets,
            radius: problem.robot_radius,
            step: MAX_MOTION_STEP.min(map.sdf.resolution / 2.0),
        })
    }

    pub fn map(&self) -> &GlobalMap {
        self.map
    }

    pub fn is_restricted(&self) -> bool {
        self.contours.is_some()
    }

    pub fn allowed_contours(&self) -> Option<&[&'a Contour]> {
        self.contours.as_deref()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Bounds and allowed-region membership, without clearance.
    pub fn in_region(&self, p: Point2, meter: &mut WorkMeter) -> bool {
        meter.region_checks += 1;
        if !self.bbox.contains(p) {
            return false;
        }
        match &self.contours {
            None => true,
            Some(contours) => {
                meter.region_checks += contours.len() as u64;
                contours.iter().any(|c| c.contains(p))
                    || self.openings.iter().any(|r| r.contains(p))
            }
        }
    }

    fn clearance_ok(&self, p: Point2, meter: &mut WorkMeter) -> bool {
        meter.grid_lookups += 1;
        match self.map.sdf.unsigned_at(p) {
            Ok(u) => {
                let bound = self.map.sdf.interpolation_bound();
                if u - bound >= self.radius {
                    true
                } else if u + bound < self.radius {
                    false
                } else {
                    self.exact_point(p, meter)
                }
            }
            Err(_) => self.exact_point(p, meter),
        }
    }

    fn exact_point(&self, p: Point2, meter: &mut WorkMeter) -> bool {
        let check = self.map.point_clearance(p, self.radius);
        meter.box_tests += check.box_tests as u64;
        meter.exact_distances += check.exact_tests as u64;
        check.clear
    }

    fn inset_of(&self, p: Point2, meter: &mut WorkMeter) -> Option<usize> {
        if self.insets.is_empty() {
            return None;
        }
        meter.region_checks += self.insets.len() as u64;
        self.insets.iter().position(|r| r.contains(p))
    }

    pub fn state_valid(&self, p: Point2, meter: &mut WorkMeter) -> bool {
        if !p.is_finite() {
            return false;
        }
        if self.inset_of(p, meter).is_some() {
            return true;
        }
        self.in_region(p, meter) && self.clearance_ok(p, meter)
    }

    /// Checks the interpolated states at spacing `min(0.025 m, resolution / 2)`
    /// for region membership, and certifies clearance along every sub-step,
    /// including the stretches between interpolated states.
    pub fn motion_valid(&self, a: Point2, b: Point2, meter: &mut WorkMeter) -> bool {
        if !a.is_finite() || !b.is_finite() {
            return false;
        }
        if let Some(k) = self.inset_of(a, meter) {
            meter.region_checks += 1;
            if self.insets[k].contains(b) {
                return true;
            }
        }
        let length = a.distance(b);
        if length == 0.0 {
            return self.state_valid(a, meter);
        }
        let n = (length / self.step).ceil().max(1.0) as usize;
        let sub = length / n as f64;
        let bound = self.map.sdf.interpolation_bound();
        let certified = self.radius + bound + sub / 2.0;
        let mut prev: Option<Sample> = None;
        for k in 0..=n {
            let q = if k == n { b } else { a.lerp(b, k as f64 / n as f64) };
            let inset = self.inset_of(q, meter);
            if inset.is_none() && !self.in_region(q, meter) {
                return false;
            }
            let mut cur = Sample { point: q, inset, clearance: None };
            if let Some(p) = prev.as_mut() {
                let shared_inset = cur.inset.is_some() && cur.inset == p.inset;
                if !shared_inset {
                    let (u_prev, u) = match (self.grid_clearance(p, meter), self.grid_clearance(&mut cur, meter)) {
                        (Some(x), Some(y)) => (x, y),
                        _ => return false,
                    };
                    if u + bound < self.radius {
                        return false;
                    }
                    if u_prev.min(u) < certified {
                        let check = self.map.segment_clearance(p.point, q, self.radius);
                        meter.box_tests += check.box_tests as u64;
                        meter.exact_distances += check.exact_tests as u64;
                        if !check.clear {
                            return false;
                        }
                    }
                }
            }
            prev = Some(cur);
        }
        true
    }

    fn grid_clearance(&self, s: &mut Sample, meter: &mut WorkMeter) -> Option<f64> {
        if s.clearance.is_none() {
            meter.grid_lookups += 1;
            s.clearance = self.map.sdf.unsigned_at(s.point).ok();
        }
        s.clearance
    }
}

struct Sample {
    point: Point2,
    inset: Option<usize>,
    clearance: Option<f64>,
}

/// Whether `p` is a valid state for `problem` on `map`.
pub fn state_valid(map: &GlobalMap, problem: &GeometricProblem, p: Point2) -> bool {
    match Validity::new(map, problem) {
        Ok(v) => v.state_valid(p, &mut WorkMeter::default()),
        Err(_) => false,
    }
}

/// Whether the straight motion from `a` to `b` stays valid.
pub fn motion_valid(map: &GlobalMap, problem: &GeometricProblem, a: Point2, b: Point2) -> bool {
    match Validity::new(map, problem) {
        Ok(v) => v.motion_valid(a, b, &mut WorkMeter::default()),
        Err(_) => false,
    }
}
