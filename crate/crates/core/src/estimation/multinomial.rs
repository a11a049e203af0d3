use nalgebra::{DMatrix, DVector};

use super::newton::{maximize, Evaluation, Objective};
use super::{canonical_row_order, EstimationError, FitOptions, Standardizer};

/// Multinomial logit with one baseline class pinned at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialLogisticModel {
    /// One `(P + 1)` vector per class, intercept first; `coefficients[baseline - 1]`
    /// is all zeros.
    pub coefficients: Vec<Vec<f64>>,
    /// 1-based baseline class.
    pub baseline: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub log_likelihood_trace: Vec<f64>,
}

impl MultinomialLogisticModel {
    /// Coefficients given directly as `β_t` vectors (intercept first).
    pub fn from_coefficients(coefficients: Vec<Vec<f64>>, baseline: usize) -> Self {
        Self {
            coefficients,
            baseline,
            converged: true,
            iterations: 0,
            final_gradient_norm: 0.0,
            log_likelihood_trace: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn num_features(&self) -> usize {
        self.coefficients[0].len() - 1
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, EstimationError> {
        if x.len() != self.num_features() {
            return Err(EstimationError::DimensionMismatch {
                expected: self.num_features(),
                got: x.len(),
            });
        }
        let eta: Vec<f64> = self
            .coefficients
            .iter()
            .map(|b| b[0] + b[1..].iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
            .collect();
        Ok(softmax(&eta))
    }
}

pub fn predict_multinomial(
    model: &MultinomialLogisticModel,
    x: &[f64],
) -> Result<Vec<f64>, EstimationError> {
    model.predict(x)
}

/// Softmax with the maximum subtracted before exponentiation.
pub fn softmax(eta: &[f64]) -> Vec<f64> {
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = eta.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

struct MultinomialObjective {
    design: DMatrix<f64>,
    /// 0-based class per row.
    labels: Vec<usize>,
    /// 0-based classes with free coefficients, in parameter-block order.
    free: Vec<usize>,
    num_classes: usize,
    ridge: f64,
}

impl MultinomialObjective {
    fn block(&self) -> usize {
        self.design.ncols()
    }

    fn predictors(&self, beta: &DVector<f64>) -> DMatrix<f64> {
        let p = self.block();
        let mut eta = DMatrix::zeros(self.design.nrows(), self.num_classes);
        for (b, &class) in self.free.iter().enumerate() {
            let coef = beta.rows(b * p, p);
            eta.set_column(class, &(&self.design * coef));
        }
        eta
    }

    fn log_softmax_row(eta: &DMatrix<f64>, r: usize) -> (f64, f64) {
        let row = eta.row(r);
        let max = row.max();
        let total: f64 = row.iter().map(|z| (z - max).exp()).sum();
        (max, total.ln())
    }

    fn penalty(&self, beta: &DVector<f64>) -> f64 {
        let p = self.block();
        let mut s = 0.0;
        for b in 0..self.free.len() {
            for j in 1..p {
                s += beta[b * p + j].powi(2);
            }
        }
        0.5 * self.ridge * s
    }
}

impl Objective for MultinomialObjective {
    fn dimension(&self) -> usize {
        self.free.len() * self.block()
    }

    fn log_likelihood(&self, beta: &DVector<f64>) -> f64 {
        let eta = self.predictors(beta);
        (0..eta.nrows())
            .map(|r| {
                let (max, log_total) = Self::log_softmax_row(&eta, r);
                eta[(r, self.labels[r])] - max - log_total
            })
            .sum::<f64>()
            - self.penalty(beta)
    }

    fn evaluate(&self, beta: &DVector<f64>) -> Evaluation {
        let eta = self.predictors(beta);
        let p = self.block();
        let q = self.free.len();
        let mut gradient = DVector::zeros(q * p);
        let mut information = DMatrix::zeros(q * p, q * p);
        let mut log_likelihood = 0.0;
        for r in 0..eta.nrows() {
            let (max, log_total) = Self::log_softmax_row(&eta, r);
            log_likelihood += eta[(r, self.labels[r])] - max - log_total;
            let probs: Vec<f64> = self
                .free
                .iter()
                .map(|&c| (eta[(r, c)] - max - log_total).exp())
                .collect();
            let x = self.design.row(r);
            for a in 0..q {
                let y = f64::from(u8::from(self.labels[r] == self.free[a]));
                let resid = y - probs[a];
                for j in 0..p {
                    gradient[a * p + j] += resid * x[j];
                }
                for b in a..q {
                    let w = if a == b {
                        probs[a] * (1.0 - probs[a])
                    } else {
                        -probs[a] * probs[b]
                    };
                    for j in 0..p {
                        let wx = w * x[j];
                        for k in 0..p {
                            information[(a * p + j, b * p + k)] += wx * x[k];
                        }
                    }
                }
            }
        }
        for a in 0..q {
            for b in 0..a {
                for j in 0..p {
                    for k in 0..p {
                        information[(a * p + j, b * p + k)] = information[(b * p + k, a * p + j)];
                    }
                }
            }
            for j in 1..p {
                gradient[a * p + j] -= self.ridge * beta[a * p + j];
                information[(a * p + j, a * p + j)] += self.ridge;
            }
        }
        Evaluation {
            log_likelihood: log_likelihood - self.penalty(beta),
            gradient,
            information,
        }
    }

    fn perfectly_classified(&self, beta: &DVector<f64>) -> bool {
        let eta = self.predictors(beta);
        (0..eta.nrows()).all(|r| {
            let own = eta[(r, self.labels[r])];
            (0..self.num_classes).all(|c| c == self.labels[r] || eta[(r, c)] < own)
        })
    }

    fn max_abs_predictor(&self, beta: &DVector<f64>) -> f64 {
        self.predictors(beta).amax()
    }
}

/// Maximum-likelihood multinomial logit; `labels` and `baseline` are 1-based.
pub fn fit_multinomial_logistic(
    features: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
    baseline: usize,
    options: &FitOptions,
) -> Result<MultinomialLogisticModel, EstimationError> {
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
    if baseline == 0 || baseline > num_classes {
        return Err(EstimationError::InvalidOption(format!(
            "baseline class {} outside 1..={}",
            baseline, num_classes
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l > num_classes) {
        return Err(EstimationError::InvalidOption(format!(
            "label {} outside 1..={}",
            bad, num_classes
        )));
    }
    let mut present = vec![false; num_classes];
    for &l in labels {
        present[l - 1] = true;
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(EstimationError::MissingClass(missing + 1));
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
    let (m, k) = working.shape();
    let order = canonical_row_order(&working, |i| labels[i] as u64);
    let design = DMatrix::from_fn(m, k + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            working[(order[r], c - 1)]
        }
    });
    let objective = MultinomialObjective {
        design,
        labels: order.iter().map(|&i| labels[i] - 1).collect(),
        free: (0..num_classes).filter(|&c| c != baseline - 1).collect(),
        num_classes,
        ridge: options.ridge,
    };
    let outcome = maximize(&objective, options)?;

    let p = k + 1;
    let mut coefficients = vec![vec![0.0; p]; num_classes];
    for (b, &class) in objective.free.iter().enumerate() {
        let block = &outcome.beta.as_slice()[b * p..(b + 1) * p];
        coefficients[class] = match &standardizer {
            Some(s) => s.back_transform(block),
            None => block.to_vec(),
        };
    }
    Ok(MultinomialLogisticModel {
        coefficients,
        baseline,
        converged: outcome.converged,
        iterations: outcome.iterations,
        final_gradient_norm: outcome.gradient_norm,
        log_likelihood_trace: outcome.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::fit_binary_logistic;

    fn mechanism_two() -> MultinomialLogisticModel {
        MultinomialLogisticModel::from_coefficients(
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.75, 0.25, 0.5],
                vec![0.0, 0.25, 0.75, 0.5],
            ],
            1,
        )
    }

    #[test]
    fn uniform_probabilities() {
        let zero = MultinomialLogisticModel::from_coefficients(vec![vec![0.0; 4]; 3], 1);
        for p in zero.predict(&[0.3, -1.0, 2.0]).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        for p in mechanism_two().predict(&[0.0, 0.0, 0.0]).unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mechanism_two_at_ones() {
        let p = predict_multinomial(&mechanism_two(), &[1.0, 1.0, 1.0]).unwrap();
        let e = 1.5f64.exp();
        let expected = [
            1.0 / (1.0 + 2.0 * e),
            e / (1.0 + 2.0 * e),
            e / (1.0 + 2.0 * e),
        ];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(mechanism_two().predict(&[1.0]).is_err());
    }

    #[test]
    fn softmax_survives_large_predictors() {
        let p = softmax(&[1000.0, 999.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_classes_agree_with_binary_fit() {
        let x = DMatrix::from_row_slice(
            8,
            2,
            &[
                -2.0, 1.0, -1.5, 0.0, -1.0, 2.0, -0.5, 1.0, 0.0, -1.0, 0.5, 0.5, 1.0, -2.0, 2.0,
                0.0,
            ],
        );
        let y = [false, false, true, false, true, false, true, true];
        let labels: Vec<usize> = y.iter().map(|&b| if b { 2 } else { 1 }).collect();
        let opts = FitOptions::default();
        let binary = fit_binary_logistic(&x, &y, &opts).unwrap();
        let multi = fit_multinomial_logistic(&x, &labels, 2, 1, &opts).unwrap();
        assert!(multi.coefficients[0].iter().all(|&b| b == 0.0));
        for (a, b) in binary.coefficients.iter().zip(&multi.coefficients[1]) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(multi.final_gradient_norm < 1e-8);
    }

    #[test]
    fn missing_class_and_bad_baseline() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let opts = FitOptions::default();
        assert_eq!(
            fit_multinomial_logistic(&x, &[1, 1, 1], 3, 1, &opts),
            Err(EstimationError::MissingClass(2))
        );
        assert!(matches!(
            fit_multinomial_logistic(&x, &[1, 2, 3], 3, 4, &opts),
            Err(EstimationError::InvalidOption(_))
        ));
    }

    #[test]
    fn separated_classes_are_reported() {
        let x = DMatrix::from_column_slice(6, 1, &[-3.0, -2.0, 0.0, 0.5, 2.0, 3.0]);
        assert_eq!(
            fit_multinomial_logistic(&x, &[1, 1, 2, 2, 3, 3], 3, 1, &FitOptions::default()),
            Err(EstimationError::SeparationDetected)
        );
    }
}
