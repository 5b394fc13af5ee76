//! Grid path planning and travel-time tables.
//!
//! Paths are 4-connected with unit-cost moves; A* uses the straight-line
//! distance between cell centers as its heuristic, which is also the
//! admissible travel estimate the scheduler starts from.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::RwLock;

use thiserror::Error;

use crate::model::{Allocation, Cell, MotionPlan, ProblemDomain, Schedule, WorldMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no collision-free path from ({}, {}) to ({}, {})", .0.from.col, .0.from.row, .0.to.col, .0.to.row)]
    NoPath(PathQuery),
    #[error("path endpoint ({}, {}) is outside the map or occupied", .0.col, .0.row)]
    BlockedEndpoint(Cell),
    #[error("speed {0} must be positive")]
    NonPositiveSpeed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathQuery {
    pub from: Cell,
    pub to: Cell,
}

impl PathQuery {
    pub fn new(from: Cell, to: Cell) -> Self {
        PathQuery { from, to }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub cells: Vec<Cell>,
    /// Meters: `(cells − 1) · cell_size`.
    pub length: f64,
}

/// Straight-line distance between cell centers, in meters.
pub fn euclidean_estimate(q: PathQuery, cell_size: f64) -> f64 {
    let dc = q.from.col as f64 - q.to.col as f64;
    let dr = q.from.row as f64 - q.to.row as f64;
    dc.hypot(dr) * cell_size
}

/// Seconds needed to cover `path_length` meters at `speed` m/s.
pub fn travel_time(path_length: f64, speed: f64) -> Result<f64, PlanError> {
    if !(speed > 0.0) {
        return Err(PlanError::NonPositiveSpeed(speed));
    }
    Ok(path_length / speed)
}

/// Travel time of a planning result; unreachable goals take forever.
pub fn travel_time_or_inf(result: &Result<PathResult, PlanError>, speed: f64) -> f64 {
    match result {
        Ok(p) => p.length / speed,
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    row: usize,
    col: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f
            .total_cmp(&other.f)
            .then(self.row.cmp(&other.row))
            .then(self.col.cmp(&other.col))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 4-connected path by A*. Neighbors expand in N, E, S, W order and
/// equal-priority frontier cells pop in ascending `(row, col)`.
pub fn plan_path(q: PathQuery, world: &WorldMap) -> Result<PathResult, PlanError> {
    for c in [q.from, q.to] {
        if !world.is_free(c) {
            return Err(PlanError::BlockedEndpoint(c));
        }
    }
    let w = world.width();
    let idx = |c: Cell| c.row * w + c.col;
    let h = |c: Cell| euclidean_estimate(PathQuery::new(c, q.to), 1.0);
    let n_cells = w * world.height();
    let mut g = vec![u32::MAX; n_cells];
    let mut parent = vec![usize::MAX; n_cells];
    let mut closed = vec![false; n_cells];
    let mut open = BinaryHeap::new();

    g[idx(q.from)] = 0;
    open.push(Reverse(Frontier {
        f: h(q.from),
        row: q.from.row,
        col: q.from.col,
    }));
    while let Some(Reverse(node)) = open.pop() {
        let cur = Cell::new(node.col, node.row);
        let ci = idx(cur);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cur == q.to {
            let mut cells = vec![cur];
            let mut at = ci;
            while parent[at] != usize::MAX {
                at = parent[at];
                cells.push(Cell::new(at % w, at / w));
            }
            cells.reverse();
            let length = (cells.len() - 1) as f64 * world.cell_size();
            return Ok(PathResult { cells, length });
        }
        for next in neighbors(cur, world) {
            let ni = idx(next);
            let tentative = g[ci] + 1;
            if !closed[ni] && tentative < g[ni] {
                g[ni] = tentative;
                parent[ni] = ci;
                open.push(Reverse(Frontier {
                    f: tentative as f64 + h(next),
                    row: next.row,
                    col: next.col,
                }));
            }
        }
    }
    Err(PlanError::NoPath(q))
}

/// Free 4-neighbors in N, E, S, W order (row 0 is north).
pub fn neighbors(c: Cell, world: &WorldMap) -> impl Iterator<Item = Cell> + '_ {
    let candidates = [
        c.row.checked_sub(1).map(|r| Cell::new(c.col, r)),
        Some(Cell::new(c.col + 1, c.row)),
        Some(Cell::new(c.col, c.row + 1)),
        c.col.checked_sub(1).map(|col| Cell::new(col, c.row)),
    ];
    candidates.into_iter().flatten().filter(move |n| world.is_free(*n))
}

/// Memoized planner. One cache serves one world map.
#[derive(Debug, Default)]
pub struct PathCache {
    entries: RwLock<HashMap<PathQuery, Result<PathResult, PlanError>>>,
    planner_calls: AtomicUsize,
}

impl PathCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of times the underlying planner actually ran.
    pub fn planner_calls(&self) -> usize {
        self.planner_calls.load(AtomicOrdering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("path cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plan(&self, q: PathQuery, world: &WorldMap) -> Result<PathResult, PlanError> {
        if let Some(hit) = self.entries.read().expect("path cache poisoned").get(&q) {
            return hit.clone();
        }
        let mut entries = self.entries.write().expect("path cache poisoned");
        // another thread may have planned it while we waited for the lock
        if let Some(hit) = entries.get(&q) {
            return hit.clone();
        }
        self.planner_calls.fetch_add(1, AtomicOrdering::Relaxed);
        let result = plan_path(q, world);
        entries.insert(q, result.clone());
        result
    }
}

/// Same contract as [`plan_path`], served from `cache` after the first call.
pub fn memoized_plan(cache: &PathCache, q: PathQuery, world: &WorldMap) -> Result<PathResult, PlanError> {
    cache.plan(q, world)
}

/// Per-robot travel times: robot start to each task, and from the end site
/// of task `i` to the start site of task `j`. Unreachable legs are `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTable {
    robots: usize,
    tasks: usize,
    initial: Vec<f64>,
    between: Vec<f64>,
}

/// Identifies one entry of a [`TravelTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    Initial { robot: usize, task: usize },
    Between { robot: usize, from: usize, to: usize },
}

impl Leg {
    pub fn query(self, domain: &ProblemDomain) -> PathQuery {
        let tasks = domain.tasks();
        match self {
            Leg::Initial { robot, task } => PathQuery::new(domain.robots()[robot].start, tasks[task].start_site),
            Leg::Between { from, to, .. } => PathQuery::new(tasks[from].end_site, tasks[to].start_site),
        }
    }

    pub fn robot(self) -> usize {
        match self {
            Leg::Initial { robot, .. } | Leg::Between { robot, .. } => robot,
        }
    }
}

impl TravelTable {
    fn build(domain: &ProblemDomain, mut time: impl FnMut(Leg) -> f64) -> Self {
        let (n, m) = (domain.num_robots(), domain.num_tasks());
        let mut initial = Vec::with_capacity(n * m);
        let mut between = Vec::with_capacity(n * m * m);
        for robot in 0..n {
            for task in 0..m {
                initial.push(time(Leg::Initial { robot, task }));
            }
            for from in 0..m {
                for to in 0..m {
                    between.push(time(Leg::Between { robot, from, to }));
                }
            }
        }
        TravelTable {
            robots: n,
            tasks: m,
            initial,
            between,
        }
    }

    /// Every entry from the straight-line estimate.
    pub fn euclidean(domain: &ProblemDomain) -> Self {
        let cell = domain.world().cell_size();
        Self::build(domain, |leg| {
            euclidean_estimate(leg.query(domain), cell) / domain.robots()[leg.robot()].speed
        })
    }

    /// Every entry from the planner.
    pub fn planned(domain: &ProblemDomain, cache: &PathCache) -> Self {
        Self::build(domain, |leg| planned_leg_time(domain, cache, leg))
    }

    pub fn get(&self, leg: Leg) -> f64 {
        match leg {
            Leg::Initial { robot, task } => self.initial[robot * self.tasks + task],
            Leg::Between { robot, from, to } => self.between[(robot * self.tasks + from) * self.tasks + to],
        }
    }

    pub fn set(&mut self, leg: Leg, value: f64) {
        match leg {
            Leg::Initial { robot, task } => self.initial[robot * self.tasks + task] = value,
            Leg::Between { robot, from, to } => self.between[(robot * self.tasks + from) * self.tasks + to] = value,
        }
    }

    pub fn initial(&self, robot: usize, task: usize) -> f64 {
        self.get(Leg::Initial { robot, task })
    }

    pub fn between(&self, robot: usize, from: usize, to: usize) -> f64 {
        self.get(Leg::Between { robot, from, to })
    }

    pub fn robots(&self) -> usize {
        self.robots
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }
}

/// Planned travel time of one leg for its robot.
pub fn planned_leg_time(domain: &ProblemDomain, cache: &PathCache, leg: Leg) -> f64 {
    let result = cache.plan(leg.query(domain), domain.world());
    travel_time_or_inf(&result, domain.robots()[leg.robot()].speed)
}

/// Tasks of `robot` in execution order (start time, then index).
pub fn itinerary(alloc: &Allocation, schedule: &Schedule, robot: usize) -> Vec<usize> {
    let mut tasks: Vec<usize> = alloc.tasks_of(robot).collect();
    tasks.sort_by(|&a, &b| schedule.start_times[a].total_cmp(&schedule.start_times[b]).then(a.cmp(&b)));
    tasks
}

/// Motion plans for every leg the schedule requires.
pub fn instantiate_motion_plans(
    domain: &ProblemDomain,
    alloc: &Allocation,
    schedule: &Schedule,
    cache: &PathCache,
) -> Result<Vec<MotionPlan>, PlanError> {
    let mut plans = Vec::new();
    for robot in 0..domain.num_robots() {
        let speed = domain.robots()[robot].speed;
        let mut prev: Option<usize> = None;
        for (leg, task) in itinerary(alloc, schedule, robot).into_iter().enumerate() {
            let q = match prev {
                None => Leg::Initial { robot, task },
                Some(from) => Leg::Between { robot, from, to: task },
            }
            .query(domain);
            let path = cache.plan(q, domain.world())?;
            plans.push(MotionPlan {
                robot,
                leg,
                from_task: prev,
                to_task: task,
                duration: path.length / speed,
                length: path.length,
                cells: path.cells,
            });
            prev = Some(task);
        }
    }
    Ok(plans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    /// Breadth-first distance in moves, written independently of the planner.
    fn bfs_distance(world: &WorldMap, from: Cell, to: Cell) -> Option<usize> {
        let (w, h) = (world.width(), world.height());
        let mut dist = vec![usize::MAX; w * h];
        let mut queue = VecDeque::from([from]);
        dist[from.row * w + from.col] = 0;
        while let Some(c) = queue.pop_front() {
            if c == to {
                return Some(dist[c.row * w + c.col]);
            }
            let d = dist[c.row * w + c.col];
            let steps: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];
            for (dc, dr) in steps {
                let (nc, nr) = (c.col as isize + dc, c.row as isize + dr);
                if nc < 0 || nr < 0 || nc as usize >= w || nr as usize >= h {
                    continue;
                }
                let n = Cell::new(nc as usize, nr as usize);
                if world.is_free(n) && dist[n.row * w + n.col] == usize::MAX {
                    dist[n.row * w + n.col] = d + 1;
                    queue.push_back(n);
                }
            }
        }
        None
    }

    #[test]
    fn euclidean_examples() {
        let q = |a: (usize, usize), b: (usize, usize)| PathQuery::new(Cell::new(a.0, a.1), Cell::new(b.0, b.1));
        assert_eq!(euclidean_estimate(q((0, 0), (0, 0)), 1.0), 0.0);
        assert_eq!(euclidean_estimate(q((0, 0), (3, 4)), 1.0), 5.0);
        assert_eq!(euclidean_estimate(q((0, 0), (2, 0)), 0.5), 1.0);
    }

    #[test]
    fn travel_time_examples() {
        assert_eq!(travel_time(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(travel_time(10.0, 2.0).unwrap(), 5.0);
        assert!(travel_time(1.0, 0.0).is_err());
        let none: Result<PathResult, PlanError> = Err(PlanError::NoPath(PathQuery::new(Cell::new(0, 0), Cell::new(1, 1))));
        assert_eq!(travel_time_or_inf(&none, 1.0), f64::INFINITY);
    }

    #[test]
    fn open_grid_is_manhattan() {
        let w = WorldMap::open(5, 5, 0.5).unwrap();
        let p = plan_path(PathQuery::new(Cell::new(0, 0), Cell::new(2, 3)), &w).unwrap();
        assert_eq!(p.cells.len(), 6);
        assert_eq!(p.length, 5.0 * 0.5);
        assert_eq!(p.cells.first(), Some(&Cell::new(0, 0)));
        assert_eq!(p.cells.last(), Some(&Cell::new(2, 3)));
    }

    #[test]
    fn identity_query() {
        let w = WorldMap::open(3, 3, 1.0).unwrap();
        let p = plan_path(PathQuery::new(Cell::new(1, 1), Cell::new(1, 1)), &w).unwrap();
        assert_eq!(p.cells, vec![Cell::new(1, 1)]);
        assert_eq!(p.length, 0.0);
    }

    #[test]
    fn blocked_middle_column_has_no_path() {
        let w = WorldMap::from_ascii(&[".#.", ".#.", ".#."], 1.0).unwrap();
        let q = PathQuery::new(Cell::new(0, 0), Cell::new(2, 0));
        assert_eq!(bfs_distance(&w, q.from, q.to), None);
        assert_eq!(plan_path(q, &w), Err(PlanError::NoPath(q)));
        // with a gap in the column the detour exists
        let w = WorldMap::from_ascii(&[".#.", ".#.", "..."], 1.0).unwrap();
        assert_eq!(plan_path(q, &w).unwrap().cells.len(), 7);
    }

    #[test]
    fn blocked_endpoint_rejected() {
        let w = WorldMap::from_ascii(&[".#"], 1.0).unwrap();
        assert!(matches!(
            plan_path(PathQuery::new(Cell::new(0, 0), Cell::new(1, 0)), &w),
            Err(PlanError::BlockedEndpoint(_))
        ));
    }

    #[test]
    fn equal_cost_paths_are_deterministic() {
        let w = WorldMap::open(4, 4, 1.0).unwrap();
        let q = PathQuery::new(Cell::new(0, 0), Cell::new(3, 3));
        let a = plan_path(q, &w).unwrap();
        for _ in 0..5 {
            assert_eq!(plan_path(q, &w).unwrap(), a);
        }
    }

    #[test]
    fn cache_plans_once_per_query() {
        let w = WorldMap::open(6, 6, 1.0).unwrap();
        let cache = PathCache::new();
        let q1 = PathQuery::new(Cell::new(0, 0), Cell::new(5, 5));
        let q2 = PathQuery::new(Cell::new(5, 5), Cell::new(0, 0));
        let first = memoized_plan(&cache, q1, &w).unwrap();
        let second = memoized_plan(&cache, q1, &w).unwrap();
        assert_eq!(cache.planner_calls(), 1);
        assert_eq!(first, second);
        memoized_plan(&cache, q2, &w).unwrap();
        assert_eq!(cache.planner_calls(), 2);
        assert_eq!(cache.len(), 2);
    }

    fn random_world(seed: u64, w: usize, h: usize) -> WorldMap {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let blocked: Vec<Cell> = (0..w * h)
            .filter(|_| rng.gen_bool(0.25))
            .map(|i| Cell::new(i % w, i / w))
            .collect();
        WorldMap::with_blocked(w, h, 1.0, blocked).unwrap()
    }

    proptest! {
        #[test]
        fn planner_matches_bfs_and_dominates_estimate(seed in any::<u64>(), w in 2usize..12, h in 2usize..12,
                                                     a in any::<(usize, usize)>(), b in any::<(usize, usize)>()) {
            let world = random_world(seed, w, h);
            let from = Cell::new(a.0 % w, a.1 % h);
            let to = Cell::new(b.0 % w, b.1 % h);
            prop_assume!(world.is_free(from) && world.is_free(to));
            let q = PathQuery::new(from, to);
            match (plan_path(q, &world), bfs_distance(&world, from, to)) {
                (Ok(p), Some(d)) => {
                    prop_assert_eq!(p.cells.len() - 1, d);
                    prop_assert!(euclidean_estimate(q, 1.0) <= p.length + 1e-12);
                    prop_assert!(p.cells.iter().all(|c| world.is_free(*c)));
                    for pair in p.cells.windows(2) {
                        let md = pair[0].col.abs_diff(pair[1].col) + pair[0].row.abs_diff(pair[1].row);
                        prop_assert_eq!(md, 1);
                    }
                }
                (Err(PlanError::NoPath(_)), None) => {}
                (got, want) => prop_assert!(false, "planner {:?} vs bfs {:?}", got, want),
            }
        }
    }
}
