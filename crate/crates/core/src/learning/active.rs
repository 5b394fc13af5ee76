//! Max-entropy query selection and the uniform-sampling baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gp::{gp_predict, GpHyper, GpModel};
use super::LearnError;
use crate::par::{self, Execution};

/// Unlabeled candidates plus a mask of which ones have been queried.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryPool {
    pub candidates: Vec<Vec<f64>>,
    pub labeled: Vec<bool>,
}

impl QueryPool {
    pub fn new(candidates: Vec<Vec<f64>>) -> Self {
        let labeled = vec![false; candidates.len()];
        QueryPool { candidates, labeled }
    }

    pub fn unlabeled_count(&self) -> usize {
        self.labeled.iter().filter(|l| !**l).count()
    }
}

/// Held-out points with known labels used to score a model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl EvalSet {
    /// Root mean squared error of the model's clamped posterior mean.
    pub fn rmse(&self, model: &GpModel) -> Result<f64, LearnError> {
        if self.inputs.is_empty() {
            return Ok(0.0);
        }
        let mut se = 0.0;
        for (x, y) in self.inputs.iter().zip(&self.labels) {
            let p = gp_predict(model, x)?;
            se += (p.clamped_mean() - y).powi(2);
        }
        Ok((se / self.inputs.len() as f64).sqrt())
    }
}

/// Outcome of one learning run.
#[derive(Debug, Clone)]
pub struct LearningRun {
    pub model: GpModel,
    /// RMSE on the evaluation set after each label; `rmse_trace[k]` is the
    /// error with `k + 1` training samples.
    pub rmse_trace: Vec<f64>,
    /// Pool indices in the order they were labeled.
    pub queried: Vec<usize>,
}

/// Index of the unlabeled candidate with the largest posterior variance.
/// Ties go to the smallest index.
pub fn select_query(model: &GpModel, pool: &QueryPool) -> Result<usize, LearnError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in pool.candidates.iter().enumerate() {
        if pool.labeled[i] {
            continue;
        }
        let var = gp_predict(model, x)?.variance;
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((i, var));
        }
    }
    best.map(|(i, _)| i).ok_or(LearnError::NoUnlabeledCandidates)
}

fn check_inputs(pool: &QueryPool, eval: &EvalSet, budget: usize) -> Result<usize, LearnError> {
    let available = pool.unlabeled_count();
    if budget > available {
        return Err(LearnError::BudgetExceedsPool { budget, available });
    }
    if eval.inputs.len() != eval.labels.len() {
        return Err(LearnError::DimensionMismatch {
            expected: eval.inputs.len(),
            found: eval.labels.len(),
        });
    }
    if let Some(i) = eval.inputs.iter().position(|e| pool.candidates.iter().any(|c| c == e)) {
        return Err(LearnError::EvalOverlapsPool(i));
    }
    Ok(pool.candidates.first().or(eval.inputs.first()).map_or(0, Vec::len))
}

/// Runs a learning loop where `pick` chooses the next pool index.
fn run_loop<L, P>(
    mut labeler: L,
    pool: &QueryPool,
    eval: &EvalSet,
    budget: usize,
    hyper: GpHyper,
    mut pick: P,
) -> Result<LearningRun, LearnError>
where
    L: FnMut(usize, &[f64]) -> Result<f64, String>,
    P: FnMut(&GpModel, &QueryPool) -> Result<usize, LearnError>,
{
    let dim = check_inputs(pool, eval, budget)?;
    let mut pool = pool.clone();
    let mut model = GpModel::prior(dim, hyper)?;
    let mut trace = Vec::with_capacity(budget);
    let mut queried = Vec::with_capacity(budget);
    for _ in 0..budget {
        let idx = pick(&model, &pool)?;
        let label = match labeler(idx, &pool.candidates[idx]) {
            Ok(y) if (0.0..=1.0).contains(&y) => y,
            Ok(y) => {
                return Err(LearnError::Oracle {
                    message: format!("label {y} for candidate {idx} is outside [0, 1]"),
                    partial_trace: trace,
                })
            }
            Err(message) => {
                return Err(LearnError::Oracle {
                    message,
                    partial_trace: trace,
                })
            }
        };
        pool.labeled[idx] = true;
        queried.push(idx);
        model = model.condition(&pool.candidates[idx], label)?;
        trace.push(eval.rmse(&model)?);
    }
    Ok(LearningRun {
        model,
        rmse_trace: trace,
        queried,
    })
}

/// Max-entropy active learning: repeatedly label the most uncertain
/// candidate, refit, and record the evaluation RMSE.
pub fn active_learn<L>(labeler: L, pool: &QueryPool, eval: &EvalSet, budget: usize, hyper: GpHyper) -> Result<LearningRun, LearnError>
where
    L: FnMut(usize, &[f64]) -> Result<f64, String>,
{
    run_loop(labeler, pool, eval, budget, hyper, select_query)
}

/// Passive baseline: labels a seeded uniform sample without replacement.
pub fn uniform_baseline<L>(
    labeler: L,
    pool: &QueryPool,
    eval: &EvalSet,
    budget: usize,
    hyper: GpHyper,
    seed: u64,
) -> Result<LearningRun, LearnError>
where
    L: FnMut(usize, &[f64]) -> Result<f64, String>,
{
    let mut order: Vec<usize> = (0..pool.candidates.len()).filter(|&i| !pool.labeled[i]).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut next = order.into_iter();
    run_loop(labeler, pool, eval, budget, hyper, move |_, _| {
        next.next().ok_or(LearnError::NoUnlabeledCandidates)
    })
}

/// Per-step min/mean/max of RMSE across uniform-baseline seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub traces: Vec<Vec<f64>>,
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

/// Runs [`uniform_baseline`] for each seed (in parallel under
/// [`Execution::Parallel`]) and summarizes the traces.
pub fn uniform_envelope<L>(
    labeler: L,
    pool: &QueryPool,
    eval: &EvalSet,
    budget: usize,
    hyper: GpHyper,
    seeds: &[u64],
    exec: Execution,
) -> Result<Envelope, LearnError>
where
    L: Fn(usize, &[f64]) -> Result<f64, String> + Sync,
{
    let runs = par::map_indexed(exec, seeds, |_, &seed| uniform_baseline(&labeler, pool, eval, budget, hyper, seed));
    let traces = runs
        .into_iter()
        .map(|r| r.map(|run| run.rmse_trace))
        .collect::<Result<Vec<_>, _>>()?;
    let steps = traces.first().map_or(0, Vec::len);
    let column = |k: usize| traces.iter().map(move |t| t[k]);
    let min = (0..steps).map(|k| column(k).fold(f64::INFINITY, f64::min)).collect();
    let max = (0..steps).map(|k| column(k).fold(f64::NEG_INFINITY, f64::max)).collect();
    let mean = (0..steps).map(|k| column(k).sum::<f64>() / traces.len() as f64).collect();
    Ok(Envelope { traces, min, mean, max })
}
