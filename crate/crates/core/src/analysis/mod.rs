//! Suboptimality bounds, the exhaustive optimal oracle, and experiment
//! harnesses built on them.

mod generator;
mod oracle;
mod sweep;

use serde::Serialize;
use thiserror::Error;

use crate::heuristics::HeuristicContext;
use crate::model::{ModelError, Solution, EPS};
use crate::search::{OpenNodeSummary, SearchError};

pub use generator::{generate_infeasible_instance, generate_instance, GeneratorConfig};
pub use oracle::{brute_force_optimal, brute_force_optimal_with, OracleResult, ORACLE_MAX_ASSIGNMENTS};
pub use sweep::{alpha_sweep, alpha_sweep_with, default_alphas, SweepRow};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{assignments} task-robot assignments exceed the oracle limit of {ORACLE_MAX_ASSIGNMENTS}")]
    TooLarge { assignments: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// `α / (1 − α) · (q_root − q_null)`; `+∞` at `α = 1`.
pub fn apriori_bound(alpha: f64, q_root: f64, q_null: f64) -> f64 {
    if alpha >= 1.0 {
        return f64::INFINITY;
    }
    alpha / (1.0 - alpha) * (q_root - q_null)
}

/// The a-priori bound scaled by the TBO of the best-quality open node.
pub fn posthoc_bound(alpha: f64, q_root: f64, q_null: f64, tbo_best_open: f64) -> f64 {
    if tbo_best_open == 0.0 {
        return 0.0;
    }
    apriori_bound(alpha, q_root, q_null) * tbo_best_open
}

/// TBO of the highest-quality node among the open set and the accepted
/// solution. Equal qualities resolve to the larger TBO.
pub fn tbo_of_best_open(open: &[OpenNodeSummary], solution_quality: f64) -> f64 {
    let mut best = (solution_quality, 0.0);
    for n in open {
        if n.quality > best.0 || (n.quality == best.0 && n.tbo > best.1) {
            best = (n.quality, n.tbo);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub alpha: f64,
    pub q_root: f64,
    pub q_null: f64,
    pub q_solution: f64,
    pub q_optimal: Option<f64>,
    pub apriori_bound: f64,
    pub posthoc_bound: f64,
    /// `q_optimal − q_solution`
    pub gap: Option<f64>,
    pub tbo_of_best_open: f64,
    pub holds_apriori: Option<bool>,
    pub holds_posthoc: Option<bool>,
    /// `α ≥ 0.5`: the bound is at least the whole quality span.
    pub trivial: bool,
    /// `C_worst ≥ C_max`, the regime in which the bound is guaranteed.
    pub budget_binding: bool,
}

impl BoundReport {
    /// Fills in the optimality gap and whether each bound holds.
    pub fn with_optimal(mut self, q_optimal: f64) -> Self {
        let gap = q_optimal - self.q_solution;
        self.q_optimal = Some(q_optimal);
        self.gap = Some(gap);
        self.holds_apriori = Some(gap <= self.apriori_bound + EPS);
        self.holds_posthoc = Some(gap <= self.posthoc_bound + EPS);
        self
    }
}

pub fn bound_report(alpha: f64, ctx: &HeuristicContext, solution: &Solution, open: &[OpenNodeSummary], q_optimal: Option<f64>) -> BoundReport {
    let tbo_best = tbo_of_best_open(open, solution.total_quality);
    let report = BoundReport {
        alpha,
        q_root: ctx.q_root,
        q_null: ctx.q_null,
        q_solution: solution.total_quality,
        q_optimal: None,
        apriori_bound: apriori_bound(alpha, ctx.q_root, ctx.q_null),
        posthoc_bound: posthoc_bound(alpha, ctx.q_root, ctx.q_null, tbo_best),
        gap: None,
        tbo_of_best_open: tbo_best,
        holds_apriori: None,
        holds_posthoc: None,
        trivial: alpha >= 0.5,
        budget_binding: ctx.c_worst >= ctx.c_max,
    };
    match q_optimal {
        Some(q) => report.with_optimal(q),
        None => report,
    }
}
