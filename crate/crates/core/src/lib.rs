//! Quality-optimized spatio-temporal task allocation for heterogeneous robot
//! teams.
//!
//! A best-first search over robot-to-task allocations trades allocation
//! quality against a makespan budget. Each candidate allocation is scheduled
//! exactly (branch-and-bound over disjunctive task pairs) with travel times
//! that start as straight-line estimates and are refined by a grid planner
//! once a candidate looks feasible. Task quality comes from linear maps or
//! from Gaussian-process models trained by max-entropy active learning.
//!
//! ```no_run
//! use qitags_core::{io, search};
//!
//! let instance = io::read_instance("instance.json".as_ref()).unwrap();
//! let result = search::qitags_solve(&instance.domain).unwrap();
//! if let Some(sol) = result.outcome.solution() {
//!     println!("quality {} makespan {}", sol.total_quality, sol.schedule.makespan);
//! }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod heuristics;
pub mod io;
pub mod learning;
pub mod model;
pub mod motion;
pub mod par;
pub mod scheduler;
pub mod search;

pub use model::{Allocation, ProblemDomain, Solution};
pub use par::Execution;
pub use search::{qitags_solve, qitags_solve_with, SearchConfig, SearchOutcome, SearchResult};
