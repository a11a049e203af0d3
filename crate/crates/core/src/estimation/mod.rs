//! Contrast-specific propensity score estimation.
//!
//! For a contrast `λ` with indicator `D = sgn(λ_W)`, the score is
//! `c(X) = pr(D = 1 | X, |D| = 1)`. Two estimators are provided: exact-cell
//! frequencies for discrete covariates and binary logistic regression on the
//! `|D| = 1` units. Multinomial treatment probabilities convert to the same
//! score by restriction and renormalization.

mod logistic;
mod multinomial;
mod newton;

use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_rational::BigRational;
use thiserror::Error;

use crate::contrast::{Contrast, ContrastError};
use crate::dataset::{build_cell_index, Dataset};

pub use logistic::{
    binary_gradient, binary_log_likelihood, fit_binary_logistic, predict_binary,
    BinaryLogisticModel,
};
pub use multinomial::{
    fit_multinomial_logistic, predict_multinomial, softmax, MultinomialLogisticModel,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("labels contain only one class")]
    OneClassOnly,
    #[error("treatment class {0} has no units")]
    MissingClass(usize),
    #[error("separation detected: the likelihood has no finite maximizer (retry with ridge > 0)")]
    SeparationDetected,
    #[error("singular Hessian: no ascent step found")]
    SingularHessian,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no observations")]
    EmptyInput,
    #[error("non-finite feature value")]
    NonFinite,
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("no probability mass on treatments with nonzero coefficients")]
    ZeroDenominator,
    #[error("contrast {contrast}: {message}")]
    MissingGroup { contrast: String, message: String },
    #[error(transparent)]
    Contrast(#[from] ContrastError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub ridge: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Fit on standardized features and back-transform the coefficients.
    pub standardize: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            max_iter: 100,
            tol: 1e-8,
            standardize: false,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<(), EstimationError> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(EstimationError::InvalidOption(format!(
                "ridge must be a finite nonnegative number, got {}",
                self.ridge
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(EstimationError::InvalidOption(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Per-column centering and scaling; constant columns are only centered.
pub(crate) struct Standardizer {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn from_columns(x: &DMatrix<f64>) -> Self {
        let m = x.nrows() as f64;
        let (means, scales) = x
            .column_iter()
            .map(|col| {
                let mean = col.sum() / m;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
                let sd = var.sqrt();
                (mean, if sd > 0.0 { sd } else { 1.0 })
            })
            .unzip();
        Self { means, scales }
    }

    pub(crate) fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
            (x[(r, c)] - self.means[c]) / self.scales[c]
        })
    }

    pub(crate) fn back_transform(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(beta.len());
        let slopes: Vec<f64> = beta[1..]
            .iter()
            .zip(&self.scales)
            .map(|(b, s)| b / s)
            .collect();
        let shift: f64 = slopes.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        out.push(beta[0] - shift);
        out.extend(slopes);
        out
    }
}

/// Row permutation that sorts rows by their feature bits, then by `tag`.
/// Fitting in this order makes the estimates independent of input order.
pub(crate) fn canonical_row_order<F: Fn(usize) -> u64>(x: &DMatrix<f64>, tag: F) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| {
        for c in 0..x.ncols() {
            match x[(a, c)].total_cmp(&x[(b, c)]) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        tag(a).cmp(&tag(b))
    });
    order
}

/// One score per unit, with a mask for units where the score is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
    /// Exact fractions, available from frequency-based estimators.
    pub exact: Option<Vec<Option<BigRational>>>,
}

impl ScoreVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        let defined = vec![true; values.len()];
        Self {
            values,
            defined,
            exact: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.defined[i].then_some(self.values[i])
    }

    pub fn exact_value(&self, i: usize) -> Option<&BigRational> {
        self.exact.as_ref().and_then(|e| e[i].as_ref())
    }

    pub fn num_undefined(&self) -> usize {
        self.defined.iter().filter(|&&d| !d).count()
    }
}

/// Cell-frequency score: within each exact covariate cell, the share of
/// `D = +1` among units with `|D| = 1`. Cells without such units are masked.
pub fn empirical_csps(d: &Dataset, c: &Contrast) -> Result<ScoreVector, EstimationError> {
    let indicators = indicators_for(d, c)?;
    Ok(frequency_scores(&build_cell_index(d), &indicators))
}

/// Frequency score over an arbitrary partition of the units.
pub(crate) fn frequency_scores(
    cells: &crate::dataset::CellIndex,
    indicators: &[i8],
) -> ScoreVector {
    let n = indicators.len();
    let mut values = vec![f64::NAN; n];
    let mut defined = vec![false; n];
    let mut exact = vec![None; n];
    for cell in cells.cells() {
        let positive = cell.units.iter().filter(|&&i| indicators[i] > 0).count();
        let eligible = cell.units.iter().filter(|&&i| indicators[i] != 0).count();
        if eligible == 0 {
            continue;
        }
        let value = positive as f64 / eligible as f64;
        let fraction = BigRational::new(positive.into(), eligible.into());
        for &i in &cell.units {
            values[i] = value;
            defined[i] = true;
            exact[i] = Some(fraction.clone());
        }
    }
    ScoreVector {
        values,
        defined,
        exact: Some(exact),
    }
}

pub(crate) fn indicators_for(d: &Dataset, c: &Contrast) -> Result<Vec<i8>, EstimationError> {
    if c.num_treatments() != d.num_treatments() {
        return Err(ContrastError::DimensionMismatch {
            expected: d.num_treatments(),
            got: c.num_treatments(),
        }
        .into());
    }
    Ok(c.indicators(d.treatments())?)
}

/// Row-major rows as a matrix.
pub fn feature_matrix(rows: usize, cols: usize, values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, values)
}

/// Logistic score: fits `pr(D = 1 | X)` on the `|D| = 1` units and predicts
/// for every unit.
pub fn model_csps(
    d: &Dataset,
    c: &Contrast,
    options: &FitOptions,
) -> Result<ScoreVector, EstimationError> {
    let indicators = indicators_for(d, c)?;
    let features = feature_matrix(d.num_units(), d.num_covariates(), d.covariate_values());
    fit_and_predict(&features, &indicators, options, &c.display_name()).map(|(_, s)| s)
}

/// Fits a binary logistic model of `D = +1` vs `D = -1` on the eligible rows
/// of `features` and scores all rows.
pub(crate) fn fit_and_predict(
    features: &DMatrix<f64>,
    indicators: &[i8],
    options: &FitOptions,
    name: &str,
) -> Result<(BinaryLogisticModel, ScoreVector), EstimationError> {
    let eligible: Vec<usize> = (0..indicators.len())
        .filter(|&i| indicators[i] != 0)
        .collect();
    for (sign, side) in [(1, "positive"), (-1, "negative")] {
        if !eligible.iter().any(|&i| indicators[i] == sign) {
            return Err(EstimationError::MissingGroup {
                contrast: name.to_string(),
                message: format!("no units in the {} group", side),
            });
        }
    }
    let subset = features.select_rows(eligible.iter());
    let labels: Vec<bool> = eligible.iter().map(|&i| indicators[i] > 0).collect();
    let model = fit_binary_logistic(&subset, &labels, options)?;
    let values = (0..features.nrows())
        .map(|r| {
            let row: Vec<f64> = features.row(r).iter().copied().collect();
            model.predict(&row)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok((model, ScoreVector::from_values(values)))
}

/// `Σ_{λ_t > 0} p_t / Σ_{λ_t ≠ 0} p_t`.
pub fn csps_from_treatment_probs(probs: &[f64], c: &Contrast) -> Result<f64, EstimationError> {
    if probs.len() != c.num_treatments() {
        return Err(EstimationError::DimensionMismatch {
            expected: c.num_treatments(),
            got: probs.len(),
        });
    }
    let signs = c.signs();
    let positive: f64 = probs
        .iter()
        .zip(&signs)
        .filter(|(_, &s)| s > 0)
        .map(|(p, _)| p)
        .sum();
    let total: f64 = probs
        .iter()
        .zip(&signs)
        .filter(|(_, &s)| s != 0)
        .map(|(p, _)| p)
        .sum();
    if total <= 0.0 {
        return Err(EstimationError::ZeroDenominator);
    }
    Ok(positive / total)
}
