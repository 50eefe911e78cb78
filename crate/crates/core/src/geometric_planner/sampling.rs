use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::UnitDisc;

use crate::geometry::{Point2, Rect};
use crate::map_builder::{Contour, GlobalMap};

use super::{GeometricProblem, PlanError, Validity, WorkMeter};

/// Uniform sampler over the allowed region: the union of allowed room
/// contours, or the whole map bounds when unrestricted.
pub struct RegionSampler<'a> {
    contours: Vec<&'a Contour>,
    pick: Option<WeightedIndex<f64>>,
    bbox: Rect,
    area: f64,
}

impl<'a> RegionSampler<'a> {
    pub fn new(validity: &Validity<'a>) -> Result<Self, PlanError> {
        let bbox = validity.map().bbox;
        match validity.allowed_contours() {
            None => Ok(Self {
                contours: Vec::new(),
                pick: None,
                bbox,
                area: bbox.area(),
            }),
            Some(contours) => {
                let areas: Vec<f64> = contours.iter().map(|c| c.signed_area()).collect();
                let pick = WeightedIndex::new(&areas).map_err(|_| PlanError::EmptyRegion)?;
                Ok(Self {
                    contours: contours.to_vec(),
                    pick: Some(pick),
                    bbox,
                    area: areas.iter().sum(),
                })
            }
        }
    }

    /// Lebesgue measure of the sampling region.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// One uniform draw. Each attempt counts as a created sample; contour
    /// rejections (non-rectangular rooms) retry.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, meter: &mut WorkMeter) -> Point2 {
        match &self.pick {
            None => {
                meter.samples += 1;
                uniform_in(self.bbox, rng)
            }
            Some(pick) => loop {
                meter.samples += 1;
                let contour = self.contours[pick.sample(rng)];
                let p = uniform_in(contour.bounds(), rng);
                meter.region_checks += 1;
                if contour.contains(p) {
                    break p;
                }
            },
        }
    }
}

fn uniform_in<R: Rng + ?Sized>(r: Rect, rng: &mut R) -> Point2 {
    Point2::new(
        r.min.x + rng.random::<f64>() * r.width(),
        r.min.y + rng.random::<f64>() * r.height(),
    )
}

/// One state drawn from the problem's sampling region, or the goal with
/// probability `goal_bias`.
pub fn sample_state<R: Rng + ?Sized>(
    problem: &GeometricProblem,
    map: &GlobalMap,
    goal_bias: f64,
    rng: &mut R,
) -> Result<Point2, PlanError> {
    let validity = Validity::new(map, problem)?;
    let sampler = RegionSampler::new(&validity)?;
    if goal_bias > 0.0 && rng.random::<f64>() < goal_bias {
        return Ok(problem.goal);
    }
    Ok(sampler.draw(rng, &mut WorkMeter::default()))
}

/// Direct sampler for the ellipse with foci at start and goal whose
/// transverse diameter is the current best cost.
#[derive(Debug, Clone, Copy)]
pub struct InformedSampler {
    center: Point2,
    cos: f64,
    sin: f64,
    c_min: f64,
}

impl InformedSampler {
    pub fn new(start: Point2, goal: Point2) -> Self {
        let c_min = start.distance(goal);
        let (cos, sin) = if c_min > 0.0 {
            ((goal.x - start.x) / c_min, (goal.y - start.y) / c_min)
        } else {
            (1.0, 0.0)
        };
        Self {
            center: start.lerp(goal, 0.5),
            cos,
            sin,
            c_min,
        }
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    /// Semi-axes `(c_best / 2, sqrt(c_best² − c_min²) / 2)`.
    pub fn semi_axes(&self, c_best: f64) -> (f64, f64) {
        let conj = (c_best * c_best - self.c_min * self.c_min).max(0.0).sqrt();
        (c_best / 2.0, conj / 2.0)
    }

    pub fn draw<R: Rng + ?Sized>(&self, c_best: f64, rng: &mut R) -> Point2 {
        let (a, b) = self.semi_axes(c_best);
        let [u, v]: [f64; 2] = UnitDisc.sample(rng);
        let (x, y) = (a * u, b * v);
        Point2::new(
            self.center.x + self.cos * x - self.sin * y,
            self.center.y + self.sin * x + self.cos * y,
        )
    }
}

/// One uniform draw from the informed ellipse of `problem` for cost `c_best`.
/// When `c_best` equals the straight-line distance the ellipse collapses onto
/// the start-goal segment.
pub fn sample_informed<R: Rng + ?Sized>(
    problem: &GeometricProblem,
    c_best: f64,
    rng: &mut R,
) -> Result<Point2, PlanError> {
    let sampler = InformedSampler::new(problem.start, problem.goal);
    if !(c_best >= sampler.c_min() * (1.0 - 1e-12)) {
        return Err(PlanError::InvalidConfig(format!(
            "c_best {c_best} below straight-line distance {}",
            sampler.c_min()
        )));
    }
    Ok(sampler.draw(c_best, rng))
}
