//! Normalized allocation quality (NAQ), time budget overrun (TBO) and their
//! convex combination TETAM.

use thiserror::Error;

use crate::model::EPS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeuristicError {
    #[error("quality {q} is outside [{q_null}, {q_root}]")]
    QualityOutOfRange { q: f64, q_null: f64, q_root: f64 },
    #[error("makespan {0} is negative")]
    NegativeMakespan(f64),
    #[error("alpha {0} must lie in [0, 1]")]
    InvalidAlpha(f64),
}

/// Normalization constants fixed once per problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicContext {
    pub q_root: f64,
    pub q_null: f64,
    pub c_max: f64,
    pub c_worst: f64,
}

impl HeuristicContext {
    pub fn quality_span(&self) -> f64 {
        self.q_root - self.q_null
    }
}

/// `(q_root − q) / (q_root − q_null)`; zero when the span is empty.
pub fn naq(q: f64, ctx: &HeuristicContext) -> Result<f64, HeuristicError> {
    if q < ctx.q_null - EPS || q > ctx.q_root + EPS || q.is_nan() {
        return Err(HeuristicError::QualityOutOfRange {
            q,
            q_null: ctx.q_null,
            q_root: ctx.q_root,
        });
    }
    let span = ctx.quality_span();
    if span <= 0.0 {
        return Ok(0.0);
    }
    Ok((ctx.q_root - q) / span)
}

/// `max((C − C_max) / |C_worst − C_max|, 0)`. When `C_worst = C_max` the
/// overrun is 0 within budget and `+∞` beyond it.
pub fn tbo(makespan: f64, ctx: &HeuristicContext) -> Result<f64, HeuristicError> {
    if makespan < 0.0 || makespan.is_nan() {
        return Err(HeuristicError::NegativeMakespan(makespan));
    }
    if makespan <= ctx.c_max {
        return Ok(0.0);
    }
    let span = (ctx.c_worst - ctx.c_max).abs();
    if span == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((makespan - ctx.c_max) / span)
}

/// `(1 − α)·naq + α·tbo`.
pub fn tetam(naq_v: f64, tbo_v: f64, alpha: f64) -> Result<f64, HeuristicError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(HeuristicError::InvalidAlpha(alpha));
    }
    // keeps 0·∞ out of the endpoints
    if alpha == 0.0 {
        return Ok(naq_v);
    }
    if alpha == 1.0 {
        return Ok(tbo_v);
    }
    Ok((1.0 - alpha) * naq_v + alpha * tbo_v)
}
