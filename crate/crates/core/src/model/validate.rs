//! Independent checks on a finished solution: budget, temporal constraints
//! under planned travel times, and the motion plans themselves.

use serde::Serialize;

use super::{Cell, ProblemDomain, Solution, EPS};
use crate::motion::{itinerary, planned_leg_time, Leg, PathCache, TravelTable};
use crate::scheduler::build_constraints;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DimensionMismatch { what: String, expected: usize, found: usize },
    BudgetExceeded { makespan: f64, budget: f64 },
    MakespanMismatch { recorded: f64, computed: f64 },
    NegativeStart { task: usize, start: f64 },
    InitialTravel { task: usize, start: f64, earliest: f64 },
    Precedence { before: usize, after: usize, start: f64, earliest: f64 },
    Mutex { i: usize, j: usize },
    MissingMotionPlan { robot: usize, leg: usize },
    MotionPlanEndpoint { robot: usize, leg: usize },
    MotionPlanCollision { robot: usize, leg: usize, cell: Cell },
    MotionPlanDisconnected { robot: usize, leg: usize },
    MotionPlanTooSlow { robot: usize, leg: usize, needed: f64, available: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    EmptyCoalition { task: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Violations other than motion-plan problems.
    pub fn temporal_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| {
            matches!(
                v,
                Violation::InitialTravel { .. } | Violation::Precedence { .. } | Violation::Mutex { .. } | Violation::NegativeStart { .. }
            )
        })
    }
}

/// Validates `sol` against `domain` with a fresh path cache.
pub fn validate_solution(domain: &ProblemDomain, sol: &Solution) -> ValidationReport {
    validate_solution_with(domain, sol, &PathCache::new())
}

pub fn validate_solution_with(domain: &ProblemDomain, sol: &Solution, cache: &PathCache) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (m, n) = (domain.num_tasks(), domain.num_robots());
    let alloc = &sol.allocation;
    let starts = &sol.schedule.start_times;
    for (what, expected, found) in [
        ("allocation rows", m, alloc.tasks()),
        ("allocation columns", n, alloc.robots()),
        ("start times", m, starts.len()),
    ] {
        if expected != found {
            report.violations.push(Violation::DimensionMismatch {
                what: what.into(),
                expected,
                found,
            });
        }
    }
    if !report.violations.is_empty() {
        return report;
    }

    for task in 0..m {
        if alloc.coalition(task).next().is_none() {
            report.warnings.push(Warning::EmptyCoalition { task });
        }
    }

    let durations: Vec<f64> = domain.tasks().iter().map(|t| t.duration).collect();
    let computed = starts.iter().zip(&durations).map(|(s, d)| s + d).fold(0.0, f64::max);
    if (computed - sol.schedule.makespan).abs() > EPS {
        report.violations.push(Violation::MakespanMismatch {
            recorded: sol.schedule.makespan,
            computed,
        });
    }
    let makespan = computed.max(sol.schedule.makespan);
    if makespan > domain.time_budget() {
        report.violations.push(Violation::BudgetExceeded {
            makespan,
            budget: domain.time_budget(),
        });
    }
    for (task, &start) in starts.iter().enumerate() {
        if start < 0.0 {
            report.violations.push(Violation::NegativeStart { task, start });
        }
    }

    // Temporal constraints with planned travel on every leg the allocation
    // can use.
    let mut table = TravelTable::euclidean(domain);
    for robot in 0..n {
        for task in alloc.tasks_of(robot) {
            let leg = Leg::Initial { robot, task };
            table.set(leg, planned_leg_time(domain, cache, leg));
            for to in alloc.tasks_of(robot) {
                let leg = Leg::Between { robot, from: task, to };
                table.set(leg, planned_leg_time(domain, cache, leg));
            }
        }
    }
    let cs = build_constraints(domain, alloc, &table);
    for (task, (&start, &earliest)) in starts.iter().zip(&cs.initial_offsets).enumerate() {
        if start + EPS < earliest {
            report.violations.push(Violation::InitialTravel { task, start, earliest });
        }
    }
    for e in &cs.precedence {
        let earliest = starts[e.before] + durations[e.before] + e.travel;
        if starts[e.after] + EPS < earliest {
            report.violations.push(Violation::Precedence {
                before: e.before,
                after: e.after,
                start: starts[e.after],
                earliest,
            });
        }
    }
    for p in &cs.mutex {
        let i_first = starts[p.j] + EPS >= starts[p.i] + durations[p.i] + p.travel_ij;
        let j_first = starts[p.i] + EPS >= starts[p.j] + durations[p.j] + p.travel_ji;
        if !i_first && !j_first {
            report.violations.push(Violation::Mutex { i: p.i, j: p.j });
        }
    }

    check_motion_plans(domain, sol, &durations, &mut report);
    report
}

fn check_motion_plans(domain: &ProblemDomain, sol: &Solution, durations: &[f64], report: &mut ValidationReport) {
    let world = domain.world();
    let tasks = domain.tasks();
    let starts = &sol.schedule.start_times;
    for robot in 0..domain.num_robots() {
        let speed = domain.robots()[robot].speed;
        let mut prev: Option<usize> = None;
        for (leg, task) in itinerary(&sol.allocation, &sol.schedule, robot).into_iter().enumerate() {
            let (from_cell, ready) = match prev {
                None => (domain.robots()[robot].start, 0.0),
                Some(p) => (tasks[p].end_site, starts[p] + durations[p]),
            };
            let expected_from = prev;
            prev = Some(task);
            let Some(plan) = sol
                .motion_plans
                .iter()
                .find(|p| p.robot == robot && p.leg == leg && p.to_task == task && p.from_task == expected_from)
            else {
                report.violations.push(Violation::MissingMotionPlan { robot, leg });
                continue;
            };
            if plan.cells.first() != Some(&from_cell) || plan.cells.last() != Some(&tasks[task].start_site) {
                report.violations.push(Violation::MotionPlanEndpoint { robot, leg });
            }
            if let Some(&cell) = plan.cells.iter().find(|c| !world.is_free(**c)) {
                report.violations.push(Violation::MotionPlanCollision { robot, leg, cell });
            }
            let adjacent = plan
                .cells
                .windows(2)
                .all(|w| w[0].col.abs_diff(w[1].col) + w[0].row.abs_diff(w[1].row) == 1);
            if !adjacent {
                report.violations.push(Violation::MotionPlanDisconnected { robot, leg });
            }
            let needed = plan.cells.len().saturating_sub(1) as f64 * world.cell_size() / speed;
            let available = starts[task] - ready;
            if needed > available + EPS {
                report.violations.push(Violation::MotionPlanTooSlow {
                    robot,
                    leg,
                    needed,
                    available,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures, Allocation, MotionPlan, PairOrder, Schedule};
    use crate::motion::instantiate_motion_plans;

    fn solution(domain: &ProblemDomain, alloc: Allocation, start_times: Vec<f64>) -> Solution {
        let makespan = start_times
            .iter()
            .zip(domain.tasks())
            .map(|(s, t)| s + t.duration)
            .fold(0.0, f64::max);
        let schedule = Schedule {
            start_times,
            makespan,
            orderings: vec![],
        };
        let motion_plans = instantiate_motion_plans(domain, &alloc, &schedule, &PathCache::new()).unwrap();
        Solution {
            allocation: alloc,
            schedule,
            motion_plans,
            total_quality: 0.0,
            naq: 0.0,
            tbo: 0.0,
            tetam: 0.0,
            bound_report: None,
        }
    }

    #[test]
    fn hand_built_valid_solution() {
        // robot 0 → task 0 (4 m), robot 1 → task 1 (4 m at 2 m/s)
        let d = fixtures::two_by_two(8.0);
        let a = Allocation::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let sol = solution(&d, a, vec![4.0, 2.0]);
        let r = validate_solution(&d, &sol);
        assert!(r.is_valid(), "{r:?}");
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn makespan_equal_to_budget_is_fine() {
        let d = fixtures::two_by_two(8.0);
        let a = Allocation::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let sol = solution(&d, a, vec![4.0, 5.0]);
        assert_eq!(sol.schedule.makespan, 8.0);
        assert!(validate_solution(&d, &sol).is_valid());
        let tight = fixtures::two_by_two(7.999);
        assert!(matches!(validate_solution(&tight, &sol).violations[..], [Violation::BudgetExceeded { .. }]));
    }

    #[test]
    fn early_start_violates_travel() {
        let d = fixtures::two_by_two(100.0);
        let a = Allocation::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let sol = solution(&d, a, vec![3.0, 2.0]);
        let r = validate_solution(&d, &sol);
        assert!(r.violations.contains(&Violation::InitialTravel {
            task: 0,
            start: 3.0,
            earliest: 4.0
        }));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::MotionPlanTooSlow { robot: 0, .. })));
    }

    #[test]
    fn precedence_violation_flagged() {
        let base = fixtures::two_by_two(100.0);
        let d = ProblemDomain::new(crate::model::DomainSpec {
            network: crate::model::TaskNetwork {
                precedence: vec![(0, 1)],
                ..base.network().clone()
            },
            robots: base.robots().to_vec(),
            quality_maps: base.quality_maps().to_vec(),
            world: base.world().clone(),
            time_budget: 100.0,
            alpha: 0.4,
            big_m: None,
        })
        .unwrap();
        let a = Allocation::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        let sol = solution(&d, a, vec![4.0, 5.0]);
        let r = validate_solution(&d, &sol);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Precedence { before: 0, after: 1, .. })));
    }

    #[test]
    fn overlapping_shared_robot_is_a_mutex_violation() {
        let d = fixtures::two_by_two(100.0);
        let a = Allocation::from_rows(&[vec![1, 0], vec![1, 0]]).unwrap();
        let mut sol = solution(&d, a, vec![4.0, 4.0]);
        sol.schedule.orderings = vec![PairOrder { i: 0, j: 1, i_first: true }];
        let r = validate_solution(&d, &sol);
        assert!(r.violations.contains(&Violation::Mutex { i: 0, j: 1 }));
    }

    #[test]
    fn bad_motion_plans_flagged() {
        let d = ProblemDomain::new(crate::model::DomainSpec {
            world: crate::model::WorldMap::from_ascii(&[".....", ".#...", ".....", ".....", "....."], 1.0).unwrap(),
            network: fixtures::two_by_two(100.0).network().clone(),
            robots: fixtures::two_by_two(100.0).robots().to_vec(),
            quality_maps: fixtures::two_by_two(100.0).quality_maps().to_vec(),
            time_budget: 100.0,
            alpha: 0.4,
            big_m: None,
        })
        .unwrap();
        let a = Allocation::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let mut sol = solution(&d, a, vec![10.0, 0.0]);
        assert!(validate_solution(&d, &sol).is_valid());
        assert_eq!(validate_solution(&d, &sol).warnings, vec![Warning::EmptyCoalition { task: 1 }]);

        let good: MotionPlan = sol.motion_plans[0].clone();
        sol.motion_plans[0].cells[1] = Cell::new(1, 1);
        let r = validate_solution(&d, &sol);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::MotionPlanCollision { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::MotionPlanDisconnected { .. })));

        sol.motion_plans[0] = good.clone();
        sol.motion_plans[0].cells.pop();
        let r = validate_solution(&d, &sol);
        assert!(r.violations.contains(&Violation::MotionPlanEndpoint { robot: 0, leg: 0 }));

        sol.motion_plans.clear();
        let r = validate_solution(&d, &sol);
        assert_eq!(r.violations, vec![Violation::MissingMotionPlan { robot: 0, leg: 0 }]);
    }

    #[test]
    fn dimension_mismatch_short_circuits() {
        let d = fixtures::two_by_two(100.0);
        let mut sol = solution(&d, d.root_allocation(), vec![4.0, 20.0]);
        sol.schedule.start_times.pop();
        let r = validate_solution(&d, &sol);
        assert!(matches!(r.violations[..], [Violation::DimensionMismatch { .. }]));
    }
}
