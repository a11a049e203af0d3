use nalgebra::{DMatrix, DVector};

use super::newton::{maximize, Evaluation, Objective};
use super::{canonical_row_order, EstimationError, FitOptions, Standardizer};
use crate::numeric::{log1p_exp, sigmoid};

/// Fitted binary logistic regression, intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLogisticModel {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    /// Penalized log-likelihood after each accepted Newton step, starting
    /// from the all-zero coefficients.
    pub log_likelihood_trace: Vec<f64>,
}

impl BinaryLogisticModel {
    pub fn num_features(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64, EstimationError> {
        if x.len() != self.num_features() {
            return Err(EstimationError::DimensionMismatch {
                expected: self.num_features(),
                got: x.len(),
            });
        }
        Ok(self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, EstimationError> {
        self.linear_predictor(x).map(sigmoid)
    }
}

pub fn predict_binary(model: &BinaryLogisticModel, x: &[f64]) -> Result<f64, EstimationError> {
    model.predict(x)
}

/// Design matrix with a leading intercept column, rows in canonical order.
pub(crate) struct BinaryObjective {
    design: DMatrix<f64>,
    labels: Vec<f64>,
    ridge: f64,
}

impl BinaryObjective {
    pub(crate) fn new(features: &DMatrix<f64>, labels: &[bool], ridge: f64) -> Self {
        let (m, p) = features.shape();
        let order = canonical_row_order(features, |i| u64::from(labels[i]));
        let design = DMatrix::from_fn(m, p + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                features[(order[r], c - 1)]
            }
        });
        let labels = order
            .iter()
            .map(|&i| f64::from(u8::from(labels[i])))
            .collect();
        Self {
            design,
            labels,
            ridge,
        }
    }

    fn predictors(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.design * beta
    }

    fn penalty(&self, beta: &DVector<f64>) -> f64 {
        0.5 * self.ridge * beta.rows(1, beta.len() - 1).norm_squared()
    }
}

impl Objective for BinaryObjective {
    fn dimension(&self) -> usize {
        self.design.ncols()
    }

    fn log_likelihood(&self, beta: &DVector<f64>) -> f64 {
        let eta = self.predictors(beta);
        eta.iter()
            .zip(&self.labels)
            .map(|(&z, &y)| y * z - log1p_exp(z))
            .sum::<f64>()
            - self.penalty(beta)
    }

    fn evaluate(&self, beta: &DVector<f64>) -> Evaluation {
        let eta = self.predictors(beta);
        let p: DVector<f64> = eta.map(sigmoid);
        let residual = DVector::from_iterator(
            p.len(),
            self.labels.iter().zip(p.iter()).map(|(y, pi)| y - pi),
        );
        let mut gradient = self.design.transpose() * residual;
        let weights = p.map(|pi| pi * (1.0 - pi));
        let weighted = DMatrix::from_fn(self.design.nrows(), self.design.ncols(), |r, c| {
            self.design[(r, c)] * weights[r]
        });
        let mut information = self.design.transpose() * weighted;
        for j in 1..beta.len() {
            gradient[j] -= self.ridge * beta[j];
            information[(j, j)] += self.ridge;
        }
        let log_likelihood = eta
            .iter()
            .zip(&self.labels)
            .map(|(&z, &y)| y * z - log1p_exp(z))
            .sum::<f64>()
            - self.penalty(beta);
        Evaluation {
            log_likelihood,
            gradient,
            information,
        }
    }

    fn perfectly_classified(&self, beta: &DVector<f64>) -> bool {
        self.predictors(beta)
            .iter()
            .zip(&self.labels)
            .all(|(&z, &y)| if y > 0.5 { z > 0.0 } else { z < 0.0 })
    }

    fn max_abs_predictor(&self, beta: &DVector<f64>) -> f64 {
        self.predictors(beta).amax()
    }
}

/// Maximum-likelihood binary logistic regression by damped Newton steps.
/// The ridge penalty `ridge/2 · ‖β‖²` excludes the intercept.
pub fn fit_binary_logistic(
    features: &DMatrix<f64>,
    labels: &[bool],
    options: &FitOptions,
) -> Result<BinaryLogisticModel, EstimationError> {
    options.validate()?;
    if features.nrows() != labels.len() {
        return Err(EstimationError::DimensionMismatch {
            expected: features.nrows(),
            got: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(EstimationError::EmptyInput);
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(EstimationError::OneClassOnly);
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(EstimationError::NonFinite);
    }

    let standardizer = options
        .standardize
        .then(|| Standardizer::from_columns(features));
    let working = match &standardizer {
        Some(s) => s.apply(features),
        None => features.clone(),
    };
    let objective = BinaryObjective::new(&working, labels, options.ridge);
    let outcome = maximize(&objective, options)?;
    let coefficients = match &standardizer {
        Some(s) => s.back_transform(outcome.beta.as_slice()),
        None => outcome.beta.as_slice().to_vec(),
    };
    Ok(BinaryLogisticModel {
        coefficients,
        converged: outcome.converged,
        iterations: outcome.iterations,
        final_gradient_norm: outcome.gradient_norm,
        log_likelihood_trace: outcome.trace,
    })
}

/// Unpenalized Bernoulli log-likelihood of `coefficients` on the data.
pub fn binary_log_likelihood(
    features: &DMatrix<f64>,
    labels: &[bool],
    coefficients: &[f64],
) -> f64 {
    (0..features.nrows())
        .map(|i| {
            let z = coefficients[0]
                + (0..features.ncols())
                    .map(|j| coefficients[j + 1] * features[(i, j)])
                    .sum::<f64>();
            if labels[i] {
                z - log1p_exp(z)
            } else {
                -log1p_exp(z)
            }
        })
        .sum()
}

/// Analytic gradient of [`binary_log_likelihood`].
pub fn binary_gradient(features: &DMatrix<f64>, labels: &[bool], coefficients: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; coefficients.len()];
    for i in 0..features.nrows() {
        let z = coefficients[0]
            + (0..features.ncols())
                .map(|j| coefficients[j + 1] * features[(i, j)])
                .sum::<f64>();
        let r = f64::from(u8::from(labels[i])) - sigmoid(z);
        g[0] += r;
        for j in 0..features.ncols() {
            g[j + 1] += r * features[(i, j)];
        }
    }
    g
}
