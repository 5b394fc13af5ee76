//! Exact minimum-makespan scheduling for one allocation.
//!
//! The scheduling model is a set of difference constraints (durations,
//! travel offsets, precedence) plus disjunctive mutex pairs. Fixing the
//! orientation of every disjunction leaves a longest-path problem on a DAG;
//! [`solve_milp`] searches orientations depth-first with the partial
//! longest path as its lower bound.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::{Allocation, PairOrder, ProblemDomain, Schedule, EPS};
use crate::motion::{planned_leg_time, Leg, PathCache, TravelTable};

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("orientation covers {found} of {expected} disjunctive pairs")]
    IncompleteOrder { expected: usize, found: usize },
}

/// `s_after ≥ s_before + d_before + travel`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecedenceEdge {
    pub before: usize,
    pub after: usize,
    pub travel: f64,
}

/// Disjunctive pair `(i, j)` with `i < j` and travel times for both orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutexPair {
    pub i: usize,
    pub j: usize,
    pub travel_ij: f64,
    pub travel_ji: f64,
}

impl MutexPair {
    fn holds(&self, starts: &[f64], durations: &[f64], i_first: bool) -> bool {
        if i_first {
            starts[self.j] >= starts[self.i] + durations[self.i] + self.travel_ij
        } else {
            starts[self.i] >= starts[self.j] + durations[self.j] + self.travel_ji
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub durations: Vec<f64>,
    /// `x_i`: earliest start of each task given its coalition's travel.
    pub initial_offsets: Vec<f64>,
    pub precedence: Vec<PrecedenceEdge>,
    pub mutex: Vec<MutexPair>,
    /// Kept for reporting; disjunctions are branched on explicitly.
    pub big_m: f64,
    /// Some mutex pair cannot be ordered either way.
    pub infeasible_on_construction: bool,
}

impl ConstraintSet {
    pub fn num_tasks(&self) -> usize {
        self.durations.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    pub status: ScheduleStatus,
    pub schedule: Option<Schedule>,
    pub nodes_explored: u64,
}

impl ScheduleOutcome {
    /// Makespan, or `+∞` when infeasible.
    pub fn makespan(&self) -> f64 {
        self.schedule.as_ref().map_or(f64::INFINITY, |s| s.makespan)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == ScheduleStatus::Optimal
    }
}

fn max_or_zero(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// Realizes the scheduling constraints of `alloc` with travel times from
/// `travel`.
///
/// Disjunctive pairs are the user mutexes plus every pair of tasks sharing
/// a robot, minus pairs already related by precedence. Pair travel is the
/// slowest shared robot; pairs with no shared robot need no travel.
pub fn build_constraints(domain: &ProblemDomain, alloc: &Allocation, travel: &TravelTable) -> ConstraintSet {
    let m = domain.num_tasks();
    let network = domain.network();
    let pair_travel = |from: usize, to: usize| max_or_zero(alloc.shared_robots(from, to).map(|r| travel.between(r, from, to)));

    let initial_offsets = (0..m)
        .map(|t| max_or_zero(alloc.coalition(t).map(|r| travel.initial(r, t))))
        .collect();
    let precedence = network
        .precedence
        .iter()
        .map(|&(before, after)| PrecedenceEdge {
            before,
            after,
            travel: pair_travel(before, after),
        })
        .collect();

    let mut pairs: BTreeSet<(usize, usize)> = domain.user_mutex_pairs();
    for i in 0..m {
        for j in i + 1..m {
            if alloc.shares_robot(i, j) {
                pairs.insert((i, j));
            }
        }
    }
    let mutex: Vec<MutexPair> = pairs
        .into_iter()
        .filter(|&(i, j)| !network.precedence_related(i, j))
        .map(|(i, j)| MutexPair {
            i,
            j,
            travel_ij: pair_travel(i, j),
            travel_ji: pair_travel(j, i),
        })
        .collect();
    let infeasible_on_construction = mutex.iter().any(|p| p.travel_ij.is_infinite() && p.travel_ji.is_infinite());

    ConstraintSet {
        durations: domain.tasks().iter().map(|t| t.duration).collect(),
        initial_offsets,
        precedence,
        mutex,
        big_m: domain.big_m(),
        infeasible_on_construction,
    }
}

/// Earliest start times under the precedence edges plus the oriented mutex
/// pairs (`None` entries are ignored). `None` when the system is
/// inconsistent: an infinite travel time or a cycle.
fn longest_path(cs: &ConstraintSet, orient: &[Option<bool>]) -> Option<Vec<f64>> {
    let m = cs.num_tasks();
    let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(cs.precedence.len() + cs.mutex.len());
    for e in &cs.precedence {
        edges.push((e.before, e.after, e.travel));
    }
    for (p, o) in cs.mutex.iter().zip(orient) {
        match o {
            Some(true) => edges.push((p.i, p.j, p.travel_ij)),
            Some(false) => edges.push((p.j, p.i, p.travel_ji)),
            None => {}
        }
    }
    if edges.iter().any(|e| !e.2.is_finite()) || cs.initial_offsets.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut indeg = vec![0usize; m];
    for &(_, to, _) in &edges {
        indeg[to] += 1;
    }
    let mut starts = cs.initial_offsets.clone();
    let mut ready: Vec<usize> = (0..m).rev().filter(|&i| indeg[i] == 0).collect();
    let mut done = 0;
    while let Some(u) = ready.pop() {
        done += 1;
        for &(from, to, travel) in &edges {
            if from != u {
                continue;
            }
            let earliest = starts[u] + cs.durations[u] + travel;
            if earliest > starts[to] {
                starts[to] = earliest;
            }
            indeg[to] -= 1;
            if indeg[to] == 0 {
                ready.push(to);
            }
        }
    }
    (done == m).then_some(starts)
}

fn makespan_of(cs: &ConstraintSet, starts: &[f64]) -> f64 {
    starts.iter().zip(&cs.durations).map(|(s, d)| s + d).fold(0.0, f64::max)
}

/// Outcome of scheduling with every disjunction fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedOrder {
    Feasible { start_times: Vec<f64>, makespan: f64 },
    Infeasible,
}

/// Makespan with every mutex pair oriented by `order` (`order[k]` is true
/// when `cs.mutex[k].i` runs first).
pub fn evaluate_fixed_order(cs: &ConstraintSet, order: &[bool]) -> Result<FixedOrder, ScheduleError> {
    if order.len() != cs.mutex.len() {
        return Err(ScheduleError::IncompleteOrder {
            expected: cs.mutex.len(),
            found: order.len(),
        });
    }
    let orient: Vec<Option<bool>> = order.iter().copied().map(Some).collect();
    Ok(match longest_path(cs, &orient) {
        Some(start_times) => {
            let makespan = makespan_of(cs, &start_times);
            FixedOrder::Feasible { start_times, makespan }
        }
        None => FixedOrder::Infeasible,
    })
}

struct BranchAndBound<'a> {
    cs: &'a ConstraintSet,
    branch_order: Vec<usize>,
    orient: Vec<Option<bool>>,
    best: Option<(f64, Vec<f64>, Vec<bool>)>,
    nodes: u64,
}

impl BranchAndBound<'_> {
    fn incumbent(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.0)
    }

    fn search(&mut self) {
        self.nodes += 1;
        let Some(starts) = longest_path(self.cs, &self.orient) else {
            return;
        };
        let bound = makespan_of(self.cs, &starts);
        if bound >= self.incumbent() {
            return;
        }
        let cs = self.cs;
        let violated = self
            .branch_order
            .iter()
            .copied()
            .find(|&k| self.orient[k].is_none() && !cs.mutex[k].holds(&starts, &cs.durations, true) && !cs.mutex[k].holds(&starts, &cs.durations, false));
        let Some(k) = violated else {
            // The relaxed schedule already respects every open disjunction,
            // so it is optimal for this subtree.
            let order = self
                .orient
                .iter()
                .zip(&cs.mutex)
                .map(|(o, p)| o.unwrap_or_else(|| p.holds(&starts, &cs.durations, true)))
                .collect();
            self.best = Some((bound, starts, order));
            return;
        };
        let pair = cs.mutex[k];
        let first = starts[pair.i] <= starts[pair.j];
        for i_first in [first, !first] {
            let travel = if i_first { pair.travel_ij } else { pair.travel_ji };
            if travel.is_infinite() {
                continue;
            }
            self.orient[k] = Some(i_first);
            self.search();
            self.orient[k] = None;
        }
    }
}

/// Minimum makespan over all orientations of the disjunctive pairs.
pub fn solve_milp(cs: &ConstraintSet) -> ScheduleOutcome {
    if cs.infeasible_on_construction {
        return ScheduleOutcome {
            status: ScheduleStatus::Infeasible,
            schedule: None,
            nodes_explored: 0,
        };
    }
    let mut branch_order: Vec<usize> = (0..cs.mutex.len()).collect();
    branch_order.sort_by(|&a, &b| {
        let key = |k: usize| cs.mutex[k].travel_ij.max(cs.mutex[k].travel_ji);
        key(b).total_cmp(&key(a)).then(a.cmp(&b))
    });
    let mut bb = BranchAndBound {
        cs,
        branch_order,
        orient: vec![None; cs.mutex.len()],
        best: None,
        nodes: 0,
    };
    bb.search();
    match bb.best {
        Some((makespan, start_times, order)) => ScheduleOutcome {
            status: ScheduleStatus::Optimal,
            schedule: Some(Schedule {
                start_times,
                makespan,
                orderings: cs
                    .mutex
                    .iter()
                    .zip(order)
                    .map(|(p, i_first)| PairOrder { i: p.i, j: p.j, i_first })
                    .collect(),
            }),
            nodes_explored: bb.nodes,
        },
        None => ScheduleOutcome {
            status: ScheduleStatus::Infeasible,
            schedule: None,
            nodes_explored: bb.nodes,
        },
    }
}

/// Schedules `alloc` with the given travel table.
pub fn schedule_allocation(domain: &ProblemDomain, alloc: &Allocation, travel: &TravelTable) -> ScheduleOutcome {
    solve_milp(&build_constraints(domain, alloc, travel))
}

/// `C_worst`: optimal makespan of the all-robots allocation under Euclidean
/// travel estimates. Every task pair shares every robot, so every pair is
/// disjunctive. `None` when even that schedule is infeasible.
pub fn worst_makespan(domain: &ProblemDomain) -> Option<f64> {
    let out = schedule_allocation(domain, &domain.root_allocation(), &TravelTable::euclidean(domain));
    out.is_optimal().then(|| out.makespan())
}

/// Travel table that starts from Euclidean estimates and swaps individual
/// entries for planned times on demand. Each entry is planned at most once.
#[derive(Debug, Clone)]
pub struct TravelRefiner {
    table: TravelTable,
    planned: std::collections::HashSet<Leg>,
}

impl TravelRefiner {
    pub fn new(domain: &ProblemDomain) -> Self {
        TravelRefiner {
            table: TravelTable::euclidean(domain),
            planned: Default::default(),
        }
    }

    pub fn table(&self) -> &TravelTable {
        &self.table
    }

    pub fn is_planned(&self, leg: Leg) -> bool {
        self.planned.contains(&leg)
    }

    pub fn planned_legs(&self) -> usize {
        self.planned.len()
    }

    /// Plans `leg` if needed; true when its travel time grew by more than
    /// the comparison tolerance.
    fn refine(&mut self, domain: &ProblemDomain, cache: &PathCache, leg: Leg) -> bool {
        if !self.planned.insert(leg) {
            return false;
        }
        let old = self.table.get(leg);
        let new = planned_leg_time(domain, cache, leg);
        self.table.set(leg, new);
        new > old + EPS
    }
}

/// Legs whose travel times the schedule actually relies on: each coalition
/// member's approach to its task, and shared-robot transfers along
/// precedence edges and realized mutex orientations.
pub fn legs_used(domain: &ProblemDomain, alloc: &Allocation, schedule: &Schedule) -> Vec<Leg> {
    let mut legs = Vec::new();
    for task in 0..domain.num_tasks() {
        legs.extend(alloc.coalition(task).map(|robot| Leg::Initial { robot, task }));
    }
    let mut transfer = |from: usize, to: usize| {
        legs.extend(alloc.shared_robots(from, to).map(|robot| Leg::Between { robot, from, to }));
    };
    for &(from, to) in &domain.network().precedence {
        transfer(from, to);
    }
    for o in &schedule.orderings {
        if o.i_first {
            transfer(o.i, o.j);
        } else {
            transfer(o.j, o.i);
        }
    }
    legs
}

/// Replaces every travel time used by `schedule` with its planned value and
/// rebuilds the constraints. `changed` is true when any used travel time
/// increased.
pub fn refine_with_motion_plans(
    domain: &ProblemDomain,
    alloc: &Allocation,
    schedule: &Schedule,
    refiner: &mut TravelRefiner,
    cache: &PathCache,
) -> (ConstraintSet, bool) {
    let mut changed = false;
    for leg in legs_used(domain, alloc, schedule) {
        changed |= refiner.refine(domain, cache, leg);
    }
    (build_constraints(domain, alloc, refiner.table()), changed)
}

/// Result of the refine/re-solve fixpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedOutcome {
    pub outcome: ScheduleOutcome,
    pub rounds: usize,
}

/// Solve, refine the travel times the schedule uses, re-solve, until no
/// used travel time changes. At most `|legs| + 1` rounds.
pub fn schedule_with_refinement(
    domain: &ProblemDomain,
    alloc: &Allocation,
    refiner: &mut TravelRefiner,
    cache: &PathCache,
) -> RefinedOutcome {
    let (n, m) = (domain.num_robots(), domain.num_tasks());
    let cap = n * m + n * m * m + 1;
    let mut outcome = schedule_allocation(domain, alloc, refiner.table());
    let mut rounds = 0;
    while rounds < cap {
        rounds += 1;
        let Some(schedule) = outcome.schedule.as_ref() else {
            break;
        };
        let (cs, changed) = refine_with_motion_plans(domain, alloc, schedule, refiner, cache);
        if !changed {
            break;
        }
        outcome = solve_milp(&cs);
    }
    RefinedOutcome { outcome, rounds }
}
