//! Greedy best-first search over the allocation lattice.
//!
//! The root assigns every robot to every task; each edge removes one
//! assignment. Nodes are ranked by TETAM and scheduled under straight-line
//! travel estimates. A node whose estimate fits the budget has its travel
//! times replaced by planned ones before it is accepted.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{bound_report, BoundReport};
use crate::heuristics::{naq, tbo, tetam, HeuristicContext, HeuristicError};
use crate::model::{total_allocation_quality, Allocation, ModelError, ProblemDomain, Solution};
use crate::motion::{instantiate_motion_plans, PathCache, PlanError, TravelTable};
use crate::par::{self, Execution};
use crate::scheduler::{schedule_allocation, schedule_with_refinement, ScheduleOutcome, TravelRefiner};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error("motion planning failed for an accepted schedule: {0}")]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub alloc: Allocation,
    pub quality: f64,
    pub naq: f64,
    pub tbo: f64,
    pub tetam: f64,
    pub makespan: f64,
    pub depth: usize,
    pub schedule: ScheduleOutcome,
}

/// One open node at termination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpenNodeSummary {
    pub key: u128,
    pub quality: f64,
    pub tbo: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub nodes_generated: u64,
    pub scheduler_calls: u64,
    pub planner_calls: u64,
    /// Candidates whose planned travel times pushed them over budget.
    pub reinsertions: u64,
    /// Expansion edges along which NAQ decreased. Always zero for monotone
    /// quality maps.
    pub naq_decreases: u64,
    pub open_set_snapshot: Vec<OpenNodeSummary>,
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Solved(Box<Solution>),
    Infeasible,
}

impl SearchOutcome {
    pub fn solution(&self) -> Option<&Solution> {
        match self {
            SearchOutcome::Solved(s) => Some(s),
            SearchOutcome::Infeasible => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    pub stats: SearchStats,
    pub context: HeuristicContext,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SearchConfig {
    /// How successor evaluation is dispatched. Results are identical either way.
    pub execution: Execution,
}

/// Priority of an open node: TETAM, then depth, then allocation key.
#[derive(Debug, Clone, Copy)]
struct Priority {
    tetam: f64,
    depth: usize,
    key: u128,
    slot: usize,
}

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.tetam
            .total_cmp(&other.tetam)
            .then(self.depth.cmp(&other.depth))
            .then(self.key.cmp(&other.key))
            .then(self.slot.cmp(&other.slot))
    }
}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-TETAM open set with deterministic tie-breaking.
#[derive(Debug, Default)]
pub struct OpenSet {
    nodes: Vec<Option<SearchNode>>,
    heap: BinaryHeap<Reverse<Priority>>,
}

impl OpenSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn push(&mut self, node: SearchNode) {
        let p = Priority {
            tetam: node.tetam,
            depth: node.depth,
            key: node.alloc.key(),
            slot: self.nodes.len(),
        };
        self.nodes.push(Some(node));
        self.heap.push(Reverse(p));
    }

    /// Node with minimum TETAM; ties go to the shallower node, then the
    /// smaller allocation key.
    pub fn pop_min(&mut self) -> Option<SearchNode> {
        let Reverse(p) = self.heap.pop()?;
        self.nodes[p.slot].take()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SearchNode> {
        self.heap.iter().filter_map(|Reverse(p)| self.nodes[p.slot].as_ref())
    }
}

struct Evaluator<'a> {
    domain: &'a ProblemDomain,
    ctx: HeuristicContext,
    estimates: TravelTable,
    clamp_quality: bool,
}

impl Evaluator<'_> {
    fn quality(&self, alloc: &Allocation) -> Result<f64, SearchError> {
        let q = total_allocation_quality(alloc, self.domain)?;
        // Learned maps need not be monotone; keep NAQ inside its range.
        Ok(if self.clamp_quality {
            q.clamp(self.ctx.q_null.min(self.ctx.q_root), self.ctx.q_root.max(self.ctx.q_null))
        } else {
            q
        })
    }

    fn node(&self, alloc: Allocation, quality: f64, schedule: ScheduleOutcome) -> Result<SearchNode, SearchError> {
        let makespan = schedule.makespan();
        let naq_v = naq(quality, &self.ctx)?;
        let tbo_v = tbo(makespan, &self.ctx)?;
        Ok(SearchNode {
            alloc,
            quality,
            naq: naq_v,
            tbo: tbo_v,
            tetam: tetam(naq_v, tbo_v, self.domain.alpha())?,
            makespan,
            depth: alloc.depth(),
            schedule,
        })
    }

    fn evaluate(&self, alloc: Allocation) -> Result<SearchNode, SearchError> {
        let quality = self.quality(&alloc)?;
        let schedule = schedule_allocation(self.domain, &alloc, &self.estimates);
        self.node(alloc, quality, schedule)
    }
}

/// Heuristic normalization constants for `domain`.
pub fn heuristic_context(domain: &ProblemDomain) -> Result<HeuristicContext, ModelError> {
    Ok(HeuristicContext {
        q_root: total_allocation_quality(&domain.root_allocation(), domain)?,
        q_null: total_allocation_quality(&domain.null_allocation(), domain)?,
        c_max: domain.time_budget(),
        c_worst: domain.worst_makespan(),
    })
}

pub fn qitags_solve(domain: &ProblemDomain) -> Result<SearchResult, SearchError> {
    qitags_solve_with(domain, &SearchConfig::default(), &PathCache::new())
}

pub fn qitags_solve_with(domain: &ProblemDomain, config: &SearchConfig, cache: &PathCache) -> Result<SearchResult, SearchError> {
    let ctx = heuristic_context(domain)?;
    let eval = Evaluator {
        domain,
        ctx,
        estimates: TravelTable::euclidean(domain),
        clamp_quality: !domain.has_monotone_quality(),
    };
    let planner_start = cache.planner_calls();
    let mut refiner = TravelRefiner::new(domain);
    let mut stats = SearchStats::default();
    let mut open = OpenSet::new();
    let mut visited: HashSet<u128> = HashSet::new();

    let root = domain.root_allocation();
    visited.insert(root.key());
    open.push(eval.evaluate(root)?);
    stats.nodes_generated += 1;
    stats.scheduler_calls += 1;

    while let Some(mut node) = open.pop_min() {
        if node.tbo == 0.0 {
            let refined = schedule_with_refinement(domain, &node.alloc, &mut refiner, cache).outcome;
            let updated = eval.node(node.alloc, node.quality, refined)?;
            if updated.tbo == 0.0 {
                let schedule = updated.schedule.schedule.clone().expect("feasible schedule");
                let motion_plans = instantiate_motion_plans(domain, &updated.alloc, &schedule, cache)?;
                stats.planner_calls = (cache.planner_calls() - planner_start) as u64;
                stats.open_set_snapshot = open
                    .iter()
                    .map(|n| OpenNodeSummary {
                        key: n.alloc.key(),
                        quality: n.quality,
                        tbo: n.tbo,
                    })
                    .collect();
                stats.open_set_snapshot.sort_by_key(|s| s.key);
                let mut solution = Solution {
                    allocation: updated.alloc,
                    schedule,
                    motion_plans,
                    total_quality: updated.quality,
                    naq: updated.naq,
                    tbo: updated.tbo,
                    tetam: updated.tetam,
                    bound_report: None,
                };
                solution.bound_report = Some(bound_report(domain.alpha(), &ctx, &solution, &stats.open_set_snapshot, None));
                return Ok(SearchResult {
                    outcome: SearchOutcome::Solved(Box::new(solution)),
                    stats,
                    context: ctx,
                });
            }
            stats.reinsertions += 1;
            open.push(updated);
            continue;
        }

        stats.nodes_expanded += 1;
        let children: Vec<Allocation> = node.alloc.successors().filter(|c| visited.insert(c.key())).collect();
        let evaluated = par::map_indexed(config.execution, &children, |_, &c| eval.evaluate(c));
        for child in evaluated {
            let child = child?;
            stats.nodes_generated += 1;
            stats.scheduler_calls += 1;
            if child.naq < node.naq - 1e-12 {
                stats.naq_decreases += 1;
            }
            open.push(child);
        }
        // free the expanded node's schedule early
        node.schedule.schedule = None;
    }

    stats.planner_calls = (cache.planner_calls() - planner_start) as u64;
    Ok(SearchResult {
        outcome: SearchOutcome::Infeasible,
        stats,
        context: ctx,
    })
}

/// Convenience accessor for the bound report of a solved search.
pub fn report_of(result: &SearchResult) -> Option<&BoundReport> {
    result.outcome.solution().and_then(|s| s.bound_report.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures, validate_solution, Cell, DomainSpec, Robot, Task, TaskNetwork, WorldMap};
    use crate::learning::QualityMap;
    use crate::scheduler::ScheduleStatus;

    fn dummy(tetam: f64, depth_bits: u128, tasks: usize, robots: usize) -> SearchNode {
        let alloc = Allocation::from_bits(tasks, robots, depth_bits).unwrap();
        SearchNode {
            alloc,
            quality: 0.0,
            naq: 0.0,
            tbo: 0.0,
            tetam,
            makespan: 0.0,
            depth: alloc.depth(),
            schedule: ScheduleOutcome {
                status: ScheduleStatus::Infeasible,
                schedule: None,
                nodes_explored: 0,
            },
        }
    }

    #[test]
    fn pop_min_orders_by_tetam_depth_key() {
        let mut open = OpenSet::new();
        open.push(dummy(0.4, 0b1111, 2, 2));
        open.push(dummy(0.3, 0b1111, 2, 2));
        assert_eq!(open.pop_min().unwrap().tetam, 0.3);

        let mut open = OpenSet::new();
        open.push(dummy(0.5, 0b0011, 2, 2)); // depth 2
        open.push(dummy(0.5, 0b1110, 2, 2)); // depth 1
        assert_eq!(open.pop_min().unwrap().depth, 1);

        let mut open = OpenSet::new();
        open.push(dummy(0.5, 0b1101, 2, 2));
        open.push(dummy(0.5, 0b1011, 2, 2));
        assert_eq!(open.pop_min().unwrap().alloc.key(), 0b1011);
        assert_eq!(open.pop_min().unwrap().alloc.key(), 0b1101);
        assert!(open.pop_min().is_none());
    }

    #[test]
    fn loose_budget_returns_root() {
        let d = fixtures::two_by_two(1000.0);
        let r = qitags_solve(&d).unwrap();
        let sol = r.outcome.solution().unwrap();
        assert_eq!(sol.allocation, d.root_allocation());
        assert_eq!(sol.total_quality, r.context.q_root);
        assert_eq!(r.stats.nodes_expanded, 0);
        assert!(validate_solution(&d, sol).is_valid());
    }

    #[test]
    fn impossible_budget_is_infeasible_after_exhaustion() {
        let d = fixtures::two_by_two(0.001);
        let r = qitags_solve(&d).unwrap();
        assert!(matches!(r.outcome, SearchOutcome::Infeasible));
        assert_eq!(r.stats.nodes_generated, 16);
        assert_eq!(r.stats.scheduler_calls, 16);
        assert!(r.stats.nodes_expanded <= r.stats.nodes_generated);
    }

    #[test]
    fn tight_budget_drops_assignments() {
        // Root serializes both tasks on both robots; dropping robot 0 from
        // task 1 lets the tasks overlap.
        let d = fixtures::two_by_two(12.0);
        assert!(d.worst_makespan() > 12.0);
        let r = qitags_solve(&d).unwrap();
        let sol = r.outcome.solution().unwrap();
        assert!(sol.schedule.makespan <= 12.0);
        assert!(sol.allocation.popcount() < 4);
        assert!(validate_solution(&d, sol).is_valid());
        let report = sol.bound_report.as_ref().unwrap();
        assert!(report.apriori_bound >= 0.0);
        assert_eq!(r.stats.naq_decreases, 0);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        for budget in [6.0, 9.0, 12.0, 15.0] {
            let d = fixtures::two_by_two(budget);
            let seq = qitags_solve_with(&d, &SearchConfig { execution: Execution::Sequential }, &PathCache::new()).unwrap();
            let par = qitags_solve_with(&d, &SearchConfig { execution: Execution::Parallel }, &PathCache::new()).unwrap();
            assert_eq!(seq.stats, par.stats);
            assert_eq!(
                seq.outcome.solution().map(|s| s.allocation),
                par.outcome.solution().map(|s| s.allocation)
            );
        }
    }

    #[test]
    fn refinement_reinserts_when_detour_breaks_budget() {
        // Straight-line 4 cells, planned detour 22: the estimate fits, the
        // plan does not.
        let rows: Vec<String> = (0..10).map(|r| if r < 9 { ".....#....".into() } else { "..........".into() }).collect();
        let world = WorldMap::from_ascii(&rows, 1.0).unwrap();
        let site = |c, r| Cell::new(c, r);
        let d = ProblemDomain::new(DomainSpec {
            network: TaskNetwork {
                tasks: vec![
                    Task { duration: 2.0, start_site: site(3, 0), end_site: site(3, 0) },
                    Task { duration: 2.0, start_site: site(7, 0), end_site: site(7, 0) },
                ],
                precedence: vec![],
                mutex: vec![],
            },
            robots: vec![Robot { traits: vec![1.0], start: site(3, 0), speed: 1.0 }],
            quality_maps: vec![QualityMap::Constant(0.5), QualityMap::Constant(0.5)],
            world,
            time_budget: 10.0,
            alpha: 0.4,
            big_m: None,
        })
        .unwrap();
        let r = qitags_solve(&d).unwrap();
        assert!(r.stats.reinsertions >= 1);
        let sol = r.outcome.solution().unwrap();
        assert!(sol.schedule.makespan <= 10.0);
        assert!(validate_solution(&d, sol).is_valid());
    }
}
