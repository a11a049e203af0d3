//! Contrast-specific propensity scores (CSPS) for studies with more than two
//! treatments.
//!
//! A contrast among `T` treatments is bifurcated into the treatments with
//! positive and with negative coefficients. The CSPS of a contrast is the
//! probability of landing in the positive group given the covariates, among
//! units in either group. Balancing on the scores of several contrasts
//! balances the space spanned by their bifurcations; [`balancing`] chains the
//! scores into a propensity score for each target contrast and subclassifies
//! on it.

pub mod balancing;
pub mod contrast;
pub mod dataset;
pub mod estimation;
pub mod example;
pub mod numeric;
pub mod report;
pub mod simulation;

pub use balancing::{
    chained_propensity, covariate_mean_difference, exact_mean_difference, run_algorithm,
    subclassify, AlgorithmConfig, BalanceError, BalanceReport, Estimator, SubclassAssignment,
    SubclassMethod,
};
pub use contrast::{
    bifurcation_span_contains, linear_combination, parse_contrast_file, Bifurcation, Contrast,
    ContrastError, Scalar,
};
pub use dataset::{build_cell_index, CellIndex, Dataset, DatasetError, Schema};
pub use estimation::{
    csps_from_treatment_probs, empirical_csps, fit_binary_logistic, fit_multinomial_logistic,
    model_csps, predict_binary, predict_multinomial, BinaryLogisticModel, EstimationError,
    FitOptions, MultinomialLogisticModel, ScoreVector,
};
pub use simulation::{
    oracle_group_means, run_experiment, sample_dataset, ExperimentResult, SimulationConfig,
    SimulationError,
};
