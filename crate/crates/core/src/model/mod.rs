//! Domain types: robots, tasks, the world grid, allocations and solutions.

mod allocation;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learning::{LearnError, QualityMap};
use crate::scheduler;

pub use allocation::{Allocation, MAX_ASSIGNMENTS};
pub use validate::{validate_solution, validate_solution_with, ValidationReport, Violation, Warning};

/// Absolute tolerance used for float comparisons throughout the solver.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("cell ({}, {}) is outside the {width}x{height} map", .cell.col, .cell.row)]
    OutOfBounds { cell: Cell, width: usize, height: usize },
    #[error("cell ({}, {}) is occupied", .cell.col, .cell.row)]
    Occupied { cell: Cell },
    #[error("precedence constraints contain a cycle")]
    PrecedenceCycle,
    #[error("{0} task-robot assignments exceed the supported maximum of {MAX_ASSIGNMENTS}")]
    TooManyAssignments(usize),
    #[error("big-M {big_m} is smaller than the worst-case makespan {worst}")]
    BigMTooSmall { big_m: f64, worst: f64 },
    #[error("the all-robots allocation cannot be scheduled")]
    RootUnschedulable,
    #[error("quality map for task {task}: {source}")]
    Quality { task: usize, source: LearnError },
}

/// Grid coordinate; serialized as `[col, row]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Cell { col, row }
    }
}

impl From<[usize; 2]> for Cell {
    fn from([col, row]: [usize; 2]) -> Self {
        Cell { col, row }
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.col, c.row]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Robot {
    pub traits: Vec<f64>,
    pub start: Cell,
    /// Meters per second.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    /// Seconds; independent of coalition size.
    pub duration: f64,
    pub start_site: Cell,
    pub end_site: Cell,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskNetwork {
    pub tasks: Vec<Task>,
    /// `(i, j)`: task `i` must finish before `j` starts.
    pub precedence: Vec<(usize, usize)>,
    /// Unordered pairs that may not overlap in time.
    pub mutex: Vec<(usize, usize)>,
}

impl TaskNetwork {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// True when `(i, j)` or `(j, i)` is a precedence pair.
    pub fn precedence_related(&self, i: usize, j: usize) -> bool {
        self.precedence.iter().any(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i))
    }

    fn validate(&self) -> Result<(), ModelError> {
        let m = self.tasks.len();
        for t in &self.tasks {
            if !(t.duration > 0.0) || !t.duration.is_finite() {
                return Err(ModelError::InvalidInput(format!("task duration {} must be positive", t.duration)));
            }
        }
        for &(i, j) in self.precedence.iter().chain(&self.mutex) {
            if i >= m || j >= m {
                return Err(ModelError::InvalidInput(format!("constraint ({i}, {j}) references a missing task")));
            }
            if i == j {
                return Err(ModelError::InvalidInput(format!("constraint ({i}, {j}) is a self-pair")));
            }
        }
        // Kahn's algorithm
        let mut indeg = vec![0usize; m];
        for &(_, j) in &self.precedence {
            indeg[j] += 1;
        }
        let mut ready: Vec<usize> = (0..m).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for &(a, b) in &self.precedence {
                if a == i {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
        if seen != m {
            return Err(ModelError::PrecedenceCycle);
        }
        Ok(())
    }
}

/// `N × U` non-negative trait matrix, one row per robot.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamTraitMatrix {
    robots: usize,
    traits: usize,
    entries: Vec<f64>,
}

impl TeamTraitMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let traits = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || traits == 0 {
            return Err(ModelError::InvalidInput("trait matrix needs at least one robot and one trait".into()));
        }
        let mut entries = Vec::with_capacity(rows.len() * traits);
        for row in rows {
            if row.len() != traits {
                return Err(ModelError::DimensionMismatch {
                    what: "trait row",
                    expected: traits,
                    found: row.len(),
                });
            }
            if row.iter().any(|q| !(*q >= 0.0) || !q.is_finite()) {
                return Err(ModelError::InvalidInput(format!("traits must be finite and non-negative: {row:?}")));
            }
            entries.extend_from_slice(row);
        }
        Ok(TeamTraitMatrix {
            robots: rows.len(),
            traits,
            entries,
        })
    }

    pub fn robots(&self) -> usize {
        self.robots
    }

    pub fn traits(&self) -> usize {
        self.traits
    }

    pub fn row(&self, robot: usize) -> &[f64] {
        &self.entries[robot * self.traits..(robot + 1) * self.traits]
    }
}

/// Occupancy grid. Row 0 is the first line of the ASCII map.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    width: usize,
    height: usize,
    blocked: Vec<bool>,
    cell_size: f64,
}

impl WorldMap {
    pub fn open(width: usize, height: usize, cell_size: f64) -> Result<Self, ModelError> {
        Self::with_blocked(width, height, cell_size, std::iter::empty())
    }

    pub fn with_blocked(width: usize, height: usize, cell_size: f64, blocked: impl IntoIterator<Item = Cell>) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::InvalidInput("map must be at least 1x1".into()));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(ModelError::InvalidInput(format!("cell size {cell_size} must be positive")));
        }
        let mut map = WorldMap {
            width,
            height,
            blocked: vec![false; width * height],
            cell_size,
        };
        for c in blocked {
            map.check_bounds(c)?;
            map.blocked[c.row * width + c.col] = true;
        }
        Ok(map)
    }

    /// Parses rows of `'.'` (free) and `'#'` (occupied).
    pub fn from_ascii<S: AsRef<str>>(rows: &[S], cell_size: f64) -> Result<Self, ModelError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        let mut blocked = Vec::new();
        for (row, line) in rows.iter().enumerate() {
            let line = line.as_ref();
            if line.chars().count() != width {
                return Err(ModelError::InvalidInput(format!("map row {row} has length {} (expected {width})", line.chars().count())));
            }
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => blocked.push(Cell::new(col, row)),
                    other => return Err(ModelError::InvalidInput(format!("unexpected map character {other:?} at ({col}, {row})"))),
                }
            }
        }
        Self::with_blocked(width, height, cell_size, blocked)
    }

    pub fn to_ascii(&self) -> Vec<String> {
        (0..self.height)
            .map(|r| (0..self.width).map(|c| if self.blocked[r * self.width + c] { '#' } else { '.' }).collect())
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col < self.width && c.row < self.height
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.blocked[c.row * self.width + c.col]
    }

    fn check_bounds(&self, c: Cell) -> Result<(), ModelError> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(ModelError::OutOfBounds {
                cell: c,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn check_free(&self, c: Cell) -> Result<(), ModelError> {
        self.check_bounds(c)?;
        if self.is_free(c) {
            Ok(())
        } else {
            Err(ModelError::Occupied { cell: c })
        }
    }
}

/// Everything needed to build a [`ProblemDomain`].
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub network: TaskNetwork,
    pub robots: Vec<Robot>,
    pub quality_maps: Vec<QualityMap>,
    pub world: WorldMap,
    pub time_budget: f64,
    pub alpha: f64,
    /// Defaults to a value comfortably above the worst-case makespan.
    pub big_m: Option<f64>,
}

pub const DEFAULT_ALPHA: f64 = 0.4;

/// A validated problem instance. The worst-case makespan (all robots on all
/// tasks, Euclidean travel estimates) is computed once at construction.
#[derive(Debug, Clone)]
pub struct ProblemDomain {
    network: TaskNetwork,
    robots: Vec<Robot>,
    traits: TeamTraitMatrix,
    quality_maps: Vec<QualityMap>,
    world: WorldMap,
    time_budget: f64,
    alpha: f64,
    big_m: f64,
    big_m_explicit: bool,
    worst_makespan: f64,
}

impl ProblemDomain {
    pub fn new(spec: DomainSpec) -> Result<Self, ModelError> {
        let DomainSpec {
            network,
            robots,
            quality_maps,
            world,
            time_budget,
            alpha,
            big_m,
        } = spec;
        network.validate()?;
        if network.is_empty() {
            return Err(ModelError::InvalidInput("task network is empty".into()));
        }
        let rows: Vec<Vec<f64>> = robots.iter().map(|r| r.traits.clone()).collect();
        let traits = TeamTraitMatrix::from_rows(&rows)?;
        let assignments = network.len() * robots.len();
        if assignments > MAX_ASSIGNMENTS {
            return Err(ModelError::TooManyAssignments(assignments));
        }
        for r in &robots {
            if !(r.speed > 0.0) || !r.speed.is_finite() {
                return Err(ModelError::InvalidInput(format!("robot speed {} must be positive", r.speed)));
            }
            world.check_free(r.start)?;
        }
        for t in &network.tasks {
            world.check_free(t.start_site)?;
            world.check_free(t.end_site)?;
        }
        if quality_maps.len() != network.len() {
            return Err(ModelError::DimensionMismatch {
                what: "quality maps",
                expected: network.len(),
                found: quality_maps.len(),
            });
        }
        for (task, q) in quality_maps.iter().enumerate() {
            if let Some(dim) = q.input_dim() {
                if dim != traits.traits() {
                    return Err(ModelError::Quality {
                        task,
                        source: LearnError::DimensionMismatch {
                            expected: traits.traits(),
                            found: dim,
                        },
                    });
                }
            }
        }
        if !(time_budget > 0.0) || !time_budget.is_finite() {
            return Err(ModelError::InvalidInput(format!("time budget {time_budget} must be positive")));
        }
        check_alpha(alpha)?;
        let mut domain = ProblemDomain {
            network,
            robots,
            traits,
            quality_maps,
            world,
            time_budget,
            alpha,
            big_m: f64::INFINITY,
            big_m_explicit: big_m.is_some(),
            worst_makespan: 0.0,
        };
        let worst = scheduler::worst_makespan(&domain).ok_or(ModelError::RootUnschedulable)?;
        domain.worst_makespan = worst;
        domain.big_m = match big_m {
            Some(b) if b < worst => return Err(ModelError::BigMTooSmall { big_m: b, worst }),
            Some(b) => b,
            None => default_big_m(&domain),
        };
        Ok(domain)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ModelError> {
        check_alpha(alpha)?;
        Ok(ProblemDomain { alpha, ..self.clone() })
    }

    pub fn with_time_budget(&self, time_budget: f64) -> Result<Self, ModelError> {
        if !(time_budget > 0.0) || !time_budget.is_finite() {
            return Err(ModelError::InvalidInput(format!("time budget {time_budget} must be positive")));
        }
        Ok(ProblemDomain { time_budget, ..self.clone() })
    }

    pub fn network(&self) -> &TaskNetwork {
        &self.network
    }

    pub fn tasks(&self) -> &[Task] {
        &self.network.tasks
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn traits(&self) -> &TeamTraitMatrix {
        &self.traits
    }

    pub fn quality_maps(&self) -> &[QualityMap] {
        &self.quality_maps
    }

    pub fn world(&self) -> &WorldMap {
        &self.world
    }

    pub fn time_budget(&self) -> f64 {
        self.time_budget
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Whether `big_m` came from the instance rather than the default.
    pub fn big_m_is_explicit(&self) -> bool {
        self.big_m_explicit
    }

    /// `C_worst`: optimal makespan of the all-robots allocation under
    /// Euclidean travel estimates.
    pub fn worst_makespan(&self) -> f64 {
        self.worst_makespan
    }

    pub fn num_tasks(&self) -> usize {
        self.network.len()
    }

    pub fn num_robots(&self) -> usize {
        self.robots.len()
    }

    /// True when every quality map is known to be monotone.
    pub fn has_monotone_quality(&self) -> bool {
        self.quality_maps.iter().all(QualityMap::is_monotone)
    }

    pub fn root_allocation(&self) -> Allocation {
        Allocation::full(self.num_tasks(), self.num_robots())
    }

    pub fn null_allocation(&self) -> Allocation {
        Allocation::empty(self.num_tasks(), self.num_robots())
    }

    /// Unordered task pairs declared mutex by the user, normalized to `i < j`.
    pub fn user_mutex_pairs(&self) -> BTreeSet<(usize, usize)> {
        self.network.mutex.iter().map(|&(i, j)| (i.min(j), i.max(j))).collect()
    }
}

fn check_alpha(alpha: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(ModelError::InvalidInput(format!("alpha {alpha} must lie in [0, 1]")))
    }
}

fn default_big_m(domain: &ProblemDomain) -> f64 {
    let durations: f64 = domain.tasks().iter().map(|t| t.duration).sum();
    10.0 * (domain.worst_makespan + durations).max(1.0)
}

/// Per-task start times and the mutex orientations that realized them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub start_times: Vec<f64>,
    pub makespan: f64,
    pub orderings: Vec<PairOrder>,
}

/// Orientation of a disjunctive pair `(i, j)` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOrder {
    pub i: usize,
    pub j: usize,
    /// `p_ij`: true when `i` runs before `j`.
    pub i_first: bool,
}

/// One robot's path to a task site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    pub robot: usize,
    /// Position in the robot's task sequence (0 = from its start cell).
    pub leg: usize,
    pub from_task: Option<usize>,
    pub to_task: usize,
    pub cells: Vec<Cell>,
    /// Meters.
    pub length: f64,
    /// Seconds at the robot's speed.
    pub duration: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub allocation: Allocation,
    pub schedule: Schedule,
    pub motion_plans: Vec<MotionPlan>,
    pub total_quality: f64,
    pub naq: f64,
    pub tbo: f64,
    pub tetam: f64,
    pub bound_report: Option<crate::analysis::BoundReport>,
}

/// `Y = A Q`: row `m` sums the trait rows of the robots on task `m`.
pub fn aggregate_traits(alloc: &Allocation, traits: &TeamTraitMatrix) -> Result<Vec<Vec<f64>>, ModelError> {
    if alloc.robots() != traits.robots() {
        return Err(ModelError::DimensionMismatch {
            what: "allocation columns",
            expected: traits.robots(),
            found: alloc.robots(),
        });
    }
    Ok((0..alloc.tasks())
        .map(|m| {
            let mut y = vec![0.0; traits.traits()];
            for n in alloc.coalition(m) {
                for (acc, q) in y.iter_mut().zip(traits.row(n)) {
                    *acc += q;
                }
            }
            y
        })
        .collect())
}

/// `Λ(A) = Σ_m clamp(λ_m(y_m), 0, 1)`.
pub fn total_allocation_quality(alloc: &Allocation, domain: &ProblemDomain) -> Result<f64, ModelError> {
    if alloc.tasks() != domain.num_tasks() {
        return Err(ModelError::DimensionMismatch {
            what: "allocation rows",
            expected: domain.num_tasks(),
            found: alloc.tasks(),
        });
    }
    let y = aggregate_traits(alloc, domain.traits())?;
    let mut total = 0.0;
    for (task, (map, ym)) in domain.quality_maps().iter().zip(&y).enumerate() {
        let q = map.evaluate(ym).map_err(|source| ModelError::Quality { task, source })?;
        total += q.clamp(0.0, 1.0);
    }
    Ok(total)
}

/// Children of `alloc` in the allocation graph: one per assignment, with
/// that assignment removed, in row-major order.
pub fn successors(alloc: &Allocation) -> Vec<Allocation> {
    alloc.successors().collect()
}
