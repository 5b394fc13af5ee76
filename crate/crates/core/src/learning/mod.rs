//! Trait-quality maps and how they are learned.
//!
//! A quality map turns the aggregated traits of a coalition into a score in
//! `[0, 1]`. Ground-truth maps are linear; learned maps are GP posteriors
//! trained by max-entropy active learning (see [`active`]).

pub mod active;
pub mod dataset;
pub mod gp;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use active::{active_learn, select_query, uniform_baseline, uniform_envelope, EvalSet, LearningRun, QueryPool};
pub use dataset::{roster_dataset, Dataset};
pub use gp::{gp_fit, gp_predict, rbf_kernel, GpHyper, GpModel, GpModelData, Prediction, PRIOR_MEAN};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot fit a GP with zero training samples")]
    EmptyTrainingSet,
    #[error("label {value} at index {index} is outside [0, 1]")]
    LabelOutOfRange { index: usize, value: f64 },
    #[error("invalid GP hyperparameters {0:?}")]
    InvalidHyper(GpHyper),
    #[error("kernel matrix of size {size} is not positive definite (noise variance {noise_var})")]
    NotPositiveDefinite { size: usize, noise_var: f64 },
    #[error("query pool has no unlabeled candidates")]
    NoUnlabeledCandidates,
    #[error("budget {budget} exceeds the {available} unlabeled candidates")]
    BudgetExceedsPool { budget: usize, available: usize },
    #[error("evaluation point {0} also appears in the query pool")]
    EvalOverlapsPool(usize),
    #[error("labeling oracle failed after {} labels: {message}", partial_trace.len())]
    Oracle { message: String, partial_trace: Vec<f64> },
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `clamp(w · y / normalizer, 0, 1)` with non-negative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQualityMap {
    weights: Vec<f64>,
    normalizer: f64,
}

impl LinearQualityMap {
    pub fn new(weights: Vec<f64>, normalizer: f64) -> Result<Self, LearnError> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(normalizer > 0.0) || !normalizer.is_finite() {
            return Err(LearnError::Dataset(format!(
                "linear quality map needs finite non-negative weights and a positive normalizer (got {weights:?} / {normalizer})"
            )));
        }
        Ok(LinearQualityMap { weights, normalizer })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<f64, LearnError> {
        if y.len() != self.weights.len() {
            return Err(LearnError::DimensionMismatch {
                expected: self.weights.len(),
                found: y.len(),
            });
        }
        let raw: f64 = self.weights.iter().zip(y).map(|(w, v)| w * v).sum::<f64>() / self.normalizer;
        Ok(raw.clamp(0.0, 1.0))
    }
}

/// The quality map λ_m attached to one task.
#[derive(Debug, Clone)]
pub enum QualityMap {
    Linear(LinearQualityMap),
    /// Constant score, independent of the coalition.
    Constant(f64),
    /// GP posterior mean. `source` records where the model was loaded from.
    Learned { model: GpModel, source: Option<PathBuf> },
}

impl QualityMap {
    /// Raw map output. Callers that need `[0, 1]` clamp it themselves.
    pub fn evaluate(&self, y: &[f64]) -> Result<f64, LearnError> {
        match self {
            QualityMap::Linear(m) => m.evaluate(y),
            QualityMap::Constant(c) => Ok(*c),
            QualityMap::Learned { model, .. } => gp_predict(model, y).map(|p| p.mean),
        }
    }

    /// Whether the map is known to be monotone non-decreasing in every trait.
    pub fn is_monotone(&self) -> bool {
        !matches!(self, QualityMap::Learned { .. })
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            QualityMap::Linear(m) => Some(m.weights.len()),
            QualityMap::Constant(_) => None,
            QualityMap::Learned { model, .. } => Some(model.dim()),
        }
    }
}
