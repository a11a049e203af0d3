//! Damped Newton ascent shared by the logistic fitters.

use nalgebra::{DMatrix, DVector};

use super::{EstimationError, FitOptions};

/// Coefficient norm past which a ridge-free fit is treated as diverging.
pub(crate) const DIVERGENCE_NORM: f64 = 1e6;
/// Linear predictors beyond this magnitude saturate double precision.
pub(crate) const SATURATED_PREDICTOR: f64 = 30.0;
const MAX_HALVINGS: usize = 30;

pub(crate) struct Evaluation {
    pub log_likelihood: f64,
    pub gradient: DVector<f64>,
    /// Negative Hessian (positive semi-definite).
    pub information: DMatrix<f64>,
}

pub(crate) trait Objective {
    fn dimension(&self) -> usize;
    fn log_likelihood(&self, beta: &DVector<f64>) -> f64;
    fn evaluate(&self, beta: &DVector<f64>) -> Evaluation;
    /// Every observation strictly on the correct side of the decision rule.
    fn perfectly_classified(&self, beta: &DVector<f64>) -> bool;
    fn max_abs_predictor(&self, beta: &DVector<f64>) -> f64;
}

pub(crate) struct NewtonOutcome {
    pub beta: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub trace: Vec<f64>,
}

fn within_rounding(new: f64, old: f64) -> bool {
    new >= old || (old - new) <= 1e-12 * (1.0 + old.abs())
}

pub(crate) fn maximize<O: Objective>(
    objective: &O,
    options: &FitOptions,
) -> Result<NewtonOutcome, EstimationError> {
    let separation_possible = options.ridge == 0.0;
    let mut beta = DVector::zeros(objective.dimension());
    let mut eval = objective.evaluate(&beta);
    let mut trace = vec![eval.log_likelihood];
    let mut iterations = 0;

    let diverged = |beta: &DVector<f64>| {
        separation_possible
            && (objective.perfectly_classified(beta)
                || beta.norm() > DIVERGENCE_NORM
                || objective.max_abs_predictor(beta) > SATURATED_PREDICTOR)
    };

    loop {
        let gradient_norm = eval.gradient.norm();
        if gradient_norm < options.tol {
            if diverged(&beta) {
                return Err(EstimationError::SeparationDetected);
            }
            return Ok(NewtonOutcome {
                beta,
                converged: true,
                iterations,
                gradient_norm,
                trace,
            });
        }
        if iterations >= options.max_iter {
            if diverged(&beta) {
                return Err(EstimationError::SeparationDetected);
            }
            return Ok(NewtonOutcome {
                beta,
                converged: false,
                iterations,
                gradient_norm,
                trace,
            });
        }

        let Some(step) = solve(&eval.information, &eval.gradient) else {
            if diverged(&beta) {
                return Err(EstimationError::SeparationDetected);
            }
            return Err(EstimationError::SingularHessian);
        };

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &beta + &step * scale;
            let ll = objective.log_likelihood(&candidate);
            if ll.is_finite() && within_rounding(ll, eval.log_likelihood) {
                accepted = Some(candidate);
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            if diverged(&beta) {
                return Err(EstimationError::SeparationDetected);
            }
            return Err(EstimationError::SingularHessian);
        };

        beta = next;
        iterations += 1;
        eval = objective.evaluate(&beta);
        trace.push(eval.log_likelihood);
        if separation_possible
            && (objective.perfectly_classified(&beta) || beta.norm() > DIVERGENCE_NORM)
        {
            return Err(EstimationError::SeparationDetected);
        }
    }
}

fn solve(information: &DMatrix<f64>, gradient: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = information.clone().cholesky() {
        let step = chol.solve(gradient);
        if step.iter().all(|v| v.is_finite()) {
            return Some(step);
        }
    }
    let lu = information.clone().lu();
    lu.solve(gradient)
        .filter(|step| step.iter().all(|v| v.is_finite()))
}
