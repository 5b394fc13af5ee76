use serde::Serialize;

use super::{brute_force_optimal_with, AnalysisError, ORACLE_MAX_ASSIGNMENTS};
use crate::model::ProblemDomain;
use crate::motion::PathCache;
use crate::par::{self, Execution};
use crate::search::{qitags_solve_with, SearchConfig};

/// One row of the α sweep. Quality fields are empty when the search found
/// no solution; gap and `holds_*` are empty without an oracle optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub quality: Option<f64>,
    pub makespan: Option<f64>,
    pub norm_gap: Option<f64>,
    pub norm_apriori_bound: f64,
    pub norm_posthoc_bound: Option<f64>,
    pub holds_apriori: Option<bool>,
    pub holds_posthoc: Option<bool>,
}

/// `0.0, 0.1, …, 1.0`.
pub fn default_alphas() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

pub fn alpha_sweep(domain: &ProblemDomain, alphas: &[f64]) -> Result<Vec<SweepRow>, AnalysisError> {
    alpha_sweep_with(domain, alphas, Execution::default())
}

/// Solves `domain` once per α. The optimum comes from the exhaustive oracle
/// when the instance is small enough, and is shared by every row.
pub fn alpha_sweep_with(domain: &ProblemDomain, alphas: &[f64], exec: Execution) -> Result<Vec<SweepRow>, AnalysisError> {
    let domains = alphas.iter().map(|&a| domain.with_alpha(a)).collect::<Result<Vec<_>, _>>()?;
    let cache = PathCache::new();
    let optimum = if domain.num_tasks() * domain.num_robots() <= ORACLE_MAX_ASSIGNMENTS {
        brute_force_optimal_with(domain, exec, &cache)?.quality()
    } else {
        None
    };
    // The oracle already parallelizes; the per-α searches run side by side
    // with sequential successor evaluation.
    let config = SearchConfig {
        execution: Execution::Sequential,
    };
    let rows = par::map_indexed(exec, &domains, |_, d| -> Result<SweepRow, AnalysisError> {
        let result = qitags_solve_with(d, &config, &cache)?;
        let span = result.context.quality_span();
        let norm = |v: f64| if span > 0.0 { v / span } else { 0.0 };
        let alpha = d.alpha();
        let norm_apriori_bound = if alpha >= 1.0 { f64::INFINITY } else { alpha / (1.0 - alpha) };
        Ok(match result.outcome.solution() {
            Some(sol) => {
                let report = sol.bound_report.clone().expect("search attaches a bound report");
                let report = match optimum {
                    Some(q) => report.with_optimal(q),
                    None => report,
                };
                SweepRow {
                    alpha,
                    quality: Some(sol.total_quality),
                    makespan: Some(sol.schedule.makespan),
                    norm_gap: report.gap.map(norm),
                    norm_apriori_bound: if span > 0.0 { norm_apriori_bound } else { 0.0 },
                    norm_posthoc_bound: Some(norm(report.posthoc_bound)),
                    holds_apriori: report.holds_apriori,
                    holds_posthoc: report.holds_posthoc,
                }
            }
            None => SweepRow {
                alpha,
                quality: None,
                makespan: None,
                norm_gap: None,
                norm_apriori_bound: if span > 0.0 { norm_apriori_bound } else { 0.0 },
                norm_posthoc_bound: None,
                holds_apriori: None,
                holds_posthoc: None,
            },
        })
    });
    rows.into_iter().collect()
}
