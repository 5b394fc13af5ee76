//! Gaussian-process regression with an RBF kernel.
//!
//! The posterior uses a constant prior mean of [`PRIOR_MEAN`]; quality
//! labels live in `[0, 1]` so the midpoint is the natural uninformed guess.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::LearnError;

/// Constant prior mean of every quality GP.
pub const PRIOR_MEAN: f64 = 0.5;

/// Lower bound applied to the noise variance so `K + σ_n² I` stays SPD.
pub const NOISE_FLOOR: f64 = 1e-8;

/// `σ_f² · exp(−‖a − b‖² / (2ℓ²))`
pub fn rbf_kernel(a: &[f64], b: &[f64], signal_var: f64, length_scale: f64) -> Result<f64, LearnError> {
    if a.len() != b.len() {
        return Err(LearnError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(rbf_unchecked(a, b, signal_var, length_scale))
}

#[inline]
fn rbf_unchecked(a: &[f64], b: &[f64], signal_var: f64, length_scale: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    signal_var * (-sq / (2.0 * length_scale * length_scale)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub signal_var: f64,
    pub length_scale: f64,
    pub noise_var: f64,
}

impl GpHyper {
    /// Fixed defaults: `σ_f² = 0.25`, `ℓ = √dim`, `σ_n² = 1e-4`.
    pub fn defaults_for(dim: usize) -> Self {
        GpHyper {
            signal_var: 0.25,
            length_scale: (dim.max(1) as f64).sqrt(),
            noise_var: 1e-4,
        }
    }

    fn validated(self) -> Result<Self, LearnError> {
        if !(self.signal_var > 0.0) || !(self.length_scale > 0.0) || !(self.noise_var >= 0.0) {
            return Err(LearnError::InvalidHyper(self));
        }
        Ok(GpHyper {
            noise_var: self.noise_var.max(NOISE_FLOOR),
            ..self
        })
    }
}

/// A fitted (or prior-only) GP over trait vectors of a fixed dimension.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyper,
    dim: usize,
    inputs: Vec<Vec<f64>>,
    labels: Vec<f64>,
    // Lower Cholesky factor of K + σ_n² I.
    chol_lower: DMatrix<f64>,
    // (K + σ_n² I)⁻¹ (labels − prior mean)
    weights: DVector<f64>,
}

/// On-disk form of a model. Only the training data and hyperparameters are
/// stored; the factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelData {
    pub hyper: GpHyper,
    pub dim: usize,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl GpModel {
    /// A model with no training data: mean 0.5 and variance `σ_f²` everywhere.
    pub fn prior(dim: usize, hyper: GpHyper) -> Result<Self, LearnError> {
        let hyper = hyper.validated()?;
        Ok(GpModel {
            hyper,
            dim,
            inputs: Vec::new(),
            labels: Vec::new(),
            chol_lower: DMatrix::zeros(0, 0),
            weights: DVector::zeros(0),
        })
    }

    pub fn hyper(&self) -> GpHyper {
        self.hyper
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Returns a new model with `(input, label)` appended to the training set.
    pub fn condition(&self, input: &[f64], label: f64) -> Result<Self, LearnError> {
        let mut inputs = self.inputs.clone();
        let mut labels = self.labels.clone();
        inputs.push(input.to_vec());
        labels.push(label);
        fit_raw(self.dim, inputs, labels, self.hyper)
    }

    /// Log marginal likelihood of the training labels under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.labels.len();
        if n == 0 {
            return 0.0;
        }
        let centered = DVector::from_iterator(n, self.labels.iter().map(|y| y - PRIOR_MEAN));
        let data_fit = -0.5 * centered.dot(&self.weights);
        let log_det: f64 = (0..n).map(|i| self.chol_lower[(i, i)].ln()).sum();
        data_fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    pub fn to_data(&self) -> GpModelData {
        GpModelData {
            hyper: self.hyper,
            dim: self.dim,
            inputs: self.inputs.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn from_data(data: GpModelData) -> Result<Self, LearnError> {
        if data.inputs.is_empty() {
            return GpModel::prior(data.dim, data.hyper);
        }
        fit_raw(data.dim, data.inputs, data.labels, data.hyper)
    }

    fn kernel_column(&self, query: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs
                .iter()
                .map(|x| rbf_unchecked(x, query, self.hyper.signal_var, self.hyper.length_scale)),
        )
    }
}

/// Posterior mean and variance at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Raw posterior mean; may stray outside `[0, 1]`.
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    /// Mean clamped to the quality range, as consumed by the allocator.
    pub fn clamped_mean(&self) -> f64 {
        self.mean.clamp(0.0, 1.0)
    }
}

/// Fits a GP to `inputs`/`labels`. At least one sample is required and every
/// label must lie in `[0, 1]`.
pub fn gp_fit(inputs: &[Vec<f64>], labels: &[f64], hyper: GpHyper) -> Result<GpModel, LearnError> {
    if inputs.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if inputs.len() != labels.len() {
        return Err(LearnError::DimensionMismatch {
            expected: inputs.len(),
            found: labels.len(),
        });
    }
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, y)| !(0.0..=1.0).contains(*y)) {
        return Err(LearnError::LabelOutOfRange { index: i, value: y });
    }
    let dim = inputs[0].len();
    fit_raw(dim, inputs.to_vec(), labels.to_vec(), hyper)
}

fn fit_raw(dim: usize, inputs: Vec<Vec<f64>>, labels: Vec<f64>, hyper: GpHyper) -> Result<GpModel, LearnError> {
    let hyper = hyper.validated()?;
    if let Some(x) = inputs.iter().find(|x| x.len() != dim) {
        return Err(LearnError::DimensionMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    let n = inputs.len();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = rbf_unchecked(&inputs[i], &inputs[j], hyper.signal_var, hyper.length_scale);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
        gram[(i, i)] += hyper.noise_var;
    }
    let chol = gram.cholesky().ok_or(LearnError::NotPositiveDefinite {
        size: n,
        noise_var: hyper.noise_var,
    })?;
    let centered = DVector::from_iterator(n, labels.iter().map(|y| y - PRIOR_MEAN));
    let weights = chol.solve(&centered);
    Ok(GpModel {
        hyper,
        dim,
        inputs,
        labels,
        chol_lower: chol.unpack(),
        weights,
    })
}

pub fn gp_predict(model: &GpModel, query: &[f64]) -> Result<Prediction, LearnError> {
    if query.len() != model.dim {
        return Err(LearnError::DimensionMismatch {
            expected: model.dim,
            found: query.len(),
        });
    }
    if model.is_empty() {
        return Ok(Prediction {
            mean: PRIOR_MEAN,
            variance: model.hyper.signal_var,
        });
    }
    let k_star = model.kernel_column(query);
    let mean = PRIOR_MEAN + k_star.dot(&model.weights);
    let v = model
        .chol_lower
        .solve_lower_triangular(&k_star)
        .expect("cholesky factor has a positive diagonal");
    let variance = (model.hyper.signal_var - v.dot(&v)).max(0.0);
    Ok(Prediction { mean, variance })
}

/// Coarse grid search over `σ_f²` and `ℓ` maximizing the log marginal
/// likelihood. The noise variance is kept from `base`.
pub fn fit_with_grid_search(inputs: &[Vec<f64>], labels: &[f64], base: GpHyper) -> Result<GpModel, LearnError> {
    const SIGNAL: [f64; 5] = [0.05, 0.1, 0.25, 0.5, 1.0];
    const SCALE: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut best: Option<(f64, GpModel)> = None;
    for &s in &SIGNAL {
        for &l in &SCALE {
            let hyper = GpHyper {
                signal_var: s,
                length_scale: base.length_scale * l,
                noise_var: base.noise_var,
            };
            let Ok(model) = gp_fit(inputs, labels, hyper) else {
                continue;
            };
            let lml = model.log_marginal_likelihood();
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, model));
            }
        }
    }
    match best {
        Some((_, m)) => Ok(m),
        None => gp_fit(inputs, labels, base),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let a = [0.3, 0.7];
        assert_eq!(rbf_kernel(&a, &a, 0.8, 2.0).unwrap(), 0.8);
        let far = rbf_kernel(&[0.0], &[1e3], 1.0, 1.0).unwrap();
        assert!(far < 1e-300);
        // ‖a − b‖² = 2
        let k = rbf_kernel(&[0.0, 0.0], &[1.0, 1.0], 1.0, 1.0).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.3679).abs() < 1e-4);
        assert!(matches!(
            rbf_kernel(&[0.0], &[0.0, 1.0], 1.0, 1.0),
            Err(LearnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_sample_interpolates() {
        let hyper = GpHyper {
            signal_var: 0.25,
            length_scale: 1.0,
            noise_var: 0.0,
        };
        let m = gp_fit(&[vec![0.2, 0.4]], &[0.9], hyper).unwrap();
        assert_eq!(m.hyper().noise_var, NOISE_FLOOR);
        let p = gp_predict(&m, &[0.2, 0.4]).unwrap();
        assert!((p.mean - 0.9).abs() < 1e-6);
        assert!(p.variance < 1e-6);
    }

    #[test]
    fn empty_training_set_rejected() {
        let err = gp_fit(&[], &[], GpHyper::defaults_for(2)).unwrap_err();
        assert!(matches!(err, LearnError::EmptyTrainingSet));
    }

    #[test]
    fn out_of_range_label_rejected() {
        let err = gp_fit(&[vec![0.0]], &[1.5], GpHyper::defaults_for(1)).unwrap_err();
        assert!(matches!(err, LearnError::LabelOutOfRange { index: 0, .. }));
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let hyper = GpHyper::defaults_for(2);
        let m = gp_fit(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[0.1, 0.2], hyper).unwrap();
        let p = gp_predict(&m, &[1e4, 1e4]).unwrap();
        assert!((p.mean - PRIOR_MEAN).abs() < 1e-12);
        assert!((p.variance - hyper.signal_var).abs() < 1e-12);
    }

    #[test]
    fn linear_function_fits_in_sample() {
        // ℓ large relative to the input spread; labels from 0.1 + 0.2·(x0 + x1)
        let inputs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.2, 1.0 - i as f64 * 0.15]).collect();
        let labels: Vec<f64> = inputs.iter().map(|x| 0.1 + 0.2 * (x[0] + x[1])).collect();
        let hyper = GpHyper {
            signal_var: 0.25,
            length_scale: 10.0,
            noise_var: 1e-8,
        };
        let m = gp_fit(&inputs, &labels, hyper).unwrap();
        let se: f64 = inputs
            .iter()
            .zip(&labels)
            .map(|(x, y)| (gp_predict(&m, x).unwrap().mean - y).powi(2))
            .sum();
        assert!((se / 5.0).sqrt() < 1e-3);
    }

    #[test]
    fn data_round_trip_preserves_predictions() {
        let m = gp_fit(&[vec![0.1], vec![0.5]], &[0.2, 0.7], GpHyper::defaults_for(1)).unwrap();
        let json = serde_json::to_string(&m.to_data()).unwrap();
        let back = GpModel::from_data(serde_json::from_str(&json).unwrap()).unwrap();
        for q in [0.0, 0.3, 0.9] {
            assert_eq!(gp_predict(&m, &[q]).unwrap(), gp_predict(&back, &[q]).unwrap());
        }
    }

    #[test]
    fn grid_search_does_not_lose_likelihood() {
        let inputs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 8.0]).collect();
        let labels: Vec<f64> = inputs.iter().map(|x| 0.5 + 0.4 * (6.0 * x[0]).sin()).collect();
        let base = GpHyper::defaults_for(1);
        let fixed = gp_fit(&inputs, &labels, base).unwrap();
        let tuned = fit_with_grid_search(&inputs, &labels, base).unwrap();
        assert!(tuned.log_marginal_likelihood() >= fixed.log_marginal_likelihood());
    }
}
