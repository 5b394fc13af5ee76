use serde::Serialize;

use super::AnalysisError;
use crate::model::{total_allocation_quality, Allocation, ProblemDomain, Schedule};
use crate::motion::{PathCache, TravelTable};
use crate::par::{self, Execution};
use crate::scheduler::schedule_allocation;

/// Largest `M · N` the oracle will enumerate.
pub const ORACLE_MAX_ASSIGNMENTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleResult {
    Optimal {
        quality: f64,
        allocation: Allocation,
        schedule: Schedule,
        /// Allocations enumerated.
        enumerated: u64,
    },
    NoFeasible {
        enumerated: u64,
    },
}

impl OracleResult {
    pub fn quality(&self) -> Option<f64> {
        match self {
            OracleResult::Optimal { quality, .. } => Some(*quality),
            OracleResult::NoFeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, OracleResult::Optimal { .. })
    }
}

pub fn brute_force_optimal(domain: &ProblemDomain) -> Result<OracleResult, AnalysisError> {
    brute_force_optimal_with(domain, Execution::default(), &PathCache::new())
}

/// Highest-quality allocation whose optimal schedule under fully planned
/// travel times fits the budget. Ties go to the smaller allocation key.
pub fn brute_force_optimal_with(domain: &ProblemDomain, exec: Execution, cache: &PathCache) -> Result<OracleResult, AnalysisError> {
    let (m, n) = (domain.num_tasks(), domain.num_robots());
    let assignments = m * n;
    if assignments > ORACLE_MAX_ASSIGNMENTS {
        return Err(AnalysisError::TooLarge { assignments });
    }
    let total = 1u64 << assignments;
    let scored = par::map_range(exec, total as usize, |bits| {
        let alloc = Allocation::from_bits(m, n, bits as u128).expect("bits within range");
        total_allocation_quality(&alloc, domain).map(|q| (q, alloc))
    });
    let mut scored: Vec<(f64, Allocation)> = scored.into_iter().collect::<Result<_, _>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.key().cmp(&b.1.key())));

    let travel = TravelTable::planned(domain, cache);
    let budget = domain.time_budget();
    let fits = |(_, alloc): &(f64, Allocation)| schedule_allocation(domain, alloc, &travel).makespan() <= budget;
    Ok(match par::position_first(exec, &scored, fits) {
        Some(i) => {
            let (quality, allocation) = scored[i];
            let schedule = schedule_allocation(domain, &allocation, &travel).schedule.expect("feasible");
            OracleResult::Optimal {
                quality,
                allocation,
                schedule,
                enumerated: total,
            }
        }
        None => OracleResult::NoFeasible { enumerated: total },
    })
}
