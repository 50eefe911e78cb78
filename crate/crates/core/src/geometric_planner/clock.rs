use std::time::Instant;

use serde::Serialize;

/// How planning time is measured.
///
/// `Wall` uses the system clock. `Work` charges a fixed cost per primitive
/// operation (sample draw, nearest-neighbour distance, grid lookup, exact
/// segment distance), which makes timed runs reproducible bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Wall,
    Work,
}

impl std::str::FromStr for ClockMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wall" => Ok(ClockMode::Wall),
            "work" => Ok(ClockMode::Work),
            other => Err(format!("unknown clock `{other}` (expected wall or work)")),
        }
    }
}

// Nanoseconds charged per operation, fitted to release-build timings.
const NS_PER_SAMPLE: f64 = 10.0;
const NS_PER_NEIGHBOUR_DISTANCE: f64 = 1.9;
const NS_PER_REGION_CHECK: f64 = 5.0;
const NS_PER_GRID_LOOKUP: f64 = 38.0;
const NS_PER_BOX_TEST: f64 = 3.0;
const NS_PER_EXACT_DISTANCE: f64 = 250.0;
const NS_PER_NEAR_CANDIDATE: f64 = 4.6;
const NS_PER_COST_UPDATE: f64 = 58.0;
const NS_PER_ITERATION: f64 = 50.0;

/// Operation counters for one planner run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkMeter {
    pub samples: u64,
    pub neighbour_distances: u64,
    pub region_checks: u64,
    pub grid_lookups: u64,
    pub box_tests: u64,
    pub exact_distances: u64,
    /// Entries of RRT* neighbourhoods considered for parent choice and rewiring.
    pub near_candidates: u64,
    /// Node costs rewritten after a rewire.
    pub cost_updates: u64,
    pub iterations: u64,
}

impl WorkMeter {
    pub fn virtual_seconds(&self) -> f64 {
        (self.samples as f64 * NS_PER_SAMPLE
            + self.neighbour_distances as f64 * NS_PER_NEIGHBOUR_DISTANCE
            + self.region_checks as f64 * NS_PER_REGION_CHECK
            + self.grid_lookups as f64 * NS_PER_GRID_LOOKUP
            + self.box_tests as f64 * NS_PER_BOX_TEST
            + self.exact_distances as f64 * NS_PER_EXACT_DISTANCE
            + self.near_candidates as f64 * NS_PER_NEAR_CANDIDATE
            + self.cost_updates as f64 * NS_PER_COST_UPDATE
            + self.iterations as f64 * NS_PER_ITERATION)
            * 1e-9
    }
}

pub(crate) struct Deadline {
    mode: ClockMode,
    started: Instant,
    timeout: f64,
    max_iterations: u64,
    expired: bool,
}

impl Deadline {
    pub(crate) fn new(mode: ClockMode, timeout: f64, max_iterations: u64) -> Self {
        Self {
            mode,
            started: Instant::now(),
            timeout,
            max_iterations,
            expired: false,
        }
    }

    /// Wall-clock reads happen every 64 iterations to bound overhead.
    pub(crate) fn expired(&mut self, meter: &WorkMeter) -> bool {
        if self.expired {
            return true;
        }
        let it = meter.iterations;
        if self.max_iterations > 0 && it >= self.max_iterations {
            self.expired = true;
        } else if self.timeout > 0.0 {
            self.expired = match self.mode {
                ClockMode::Work => meter.virtual_seconds() >= self.timeout,
                ClockMode::Wall => {
                    it % 64 == 0 && self.started.elapsed().as_secs_f64() >= self.timeout
                }
            };
        }
        self.expired
    }

    pub(crate) fn elapsed(&self, meter: &WorkMeter) -> f64 {
        match self.mode {
            ClockMode::Wall => self.started.elapsed().as_secs_f64(),
            ClockMode::Work => meter.virtual_seconds(),
        }
    }
}
