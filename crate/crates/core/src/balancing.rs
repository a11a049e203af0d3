//! The chained balancing routine.
//!
//! Scores for `J` balancing contrasts are estimated first and then used as
//! the covariates of an ordinary propensity score for each target
//! bifurcation. Units with `|D*| = 1` are subclassified on that chained
//! score, and covariate mean differences between the `D* = +1` and
//! `D* = -1` groups are compared before and after subclassification.

use std::collections::HashMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use thiserror::Error;

use crate::contrast::{Contrast, ContrastError};
use crate::dataset::{group_by_key, Dataset};
use crate::estimation::{
    empirical_csps, feature_matrix, fit_and_predict, frequency_scores, indicators_for, model_csps,
    EstimationError, FitOptions, ScoreVector,
};
use crate::numeric::canonical_mean;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Contrast(#[from] ContrastError),
    #[error("contrast {contrast}: score undefined for {units} unit(s) in its bifurcation")]
    UndefinedScores { contrast: String, units: usize },
    #[error("contrast {contrast}: the {side} group is empty{context}")]
    EmptyGroup {
        contrast: String,
        side: &'static str,
        context: String,
    },
    #[error("too few units to form subclasses: {0}")]
    TooFewUnits(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Exact covariate-cell frequencies (discrete covariates).
    Empirical,
    /// Binary logistic regression.
    Logistic,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Empirical => "empirical",
            Estimator::Logistic => "logistic",
        })
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "empirical" => Ok(Estimator::Empirical),
            "logistic" => Ok(Estimator::Logistic),
            other => Err(format!(
                "unknown estimator {:?} (expected empirical or logistic)",
                other
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubclassMethod {
    /// One subclass per distinct score value.
    ExactValues,
    /// `S` subclasses cut at the empirical `s/S` quantiles.
    Quantile(usize),
}

impl fmt::Display for SubclassMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubclassMethod::ExactValues => f.write_str("exact"),
            SubclassMethod::Quantile(s) => write!(f, "quantile({})", s),
        }
    }
}

/// Accepts `exact`, a subclass count `S`, or `quantile(S)`.
impl std::str::FromStr for SubclassMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "exact" {
            return Ok(SubclassMethod::ExactValues);
        }
        let count = s
            .strip_prefix("quantile(")
            .and_then(|rest| rest.strip_suffix(')'))
            .unwrap_or(s);
        match count.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(SubclassMethod::Quantile(n)),
            _ => Err(format!(
                "invalid subclass setting {:?} (expected a count >= 1 or \"exact\")",
                s
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmConfig {
    pub estimator: Estimator,
    pub subclass: SubclassMethod,
    pub fit: FitOptions,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Logistic,
            subclass: SubclassMethod::Quantile(5),
            fit: FitOptions::default(),
        }
    }
}

impl AlgorithmConfig {
    /// Exact cells and one subclass per distinct score, for discrete data.
    pub fn exact() -> Self {
        Self {
            estimator: Estimator::Empirical,
            subclass: SubclassMethod::ExactValues,
            fit: FitOptions::default(),
        }
    }
}

/// Scores of the balancing contrasts plus the chained score of a target.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainedPropensity {
    pub balancing_scores: Vec<ScoreVector>,
    pub score: ScoreVector,
    /// `D*` per unit for the target.
    pub indicators: Vec<i8>,
}

/// Estimates the score of every balancing contrast.
pub fn balancing_scores(
    d: &Dataset,
    balancing: &[Contrast],
    config: &AlgorithmConfig,
) -> Result<Vec<ScoreVector>, BalanceError> {
    if balancing.is_empty() {
        return Err(BalanceError::InvalidConfig(
            "at least one balancing contrast is required".into(),
        ));
    }
    balancing
        .iter()
        .map(|c| {
            Ok(match config.estimator {
                Estimator::Empirical => empirical_csps(d, c)?,
                Estimator::Logistic => model_csps(d, c, &config.fit)?,
            })
        })
        .collect()
}

/// Propensity of `D* = +1` given the balancing scores, among `|D*| = 1`.
pub fn chain_scores(
    d: &Dataset,
    scores: &[ScoreVector],
    target: &Contrast,
    config: &AlgorithmConfig,
) -> Result<ChainedPropensity, BalanceError> {
    let indicators = indicators_for(d, target)?;
    let name = target.display_name();
    for (sign, side) in [(1, "positive"), (-1, "negative")] {
        if !indicators.contains(&sign) {
            return Err(BalanceError::EmptyGroup {
                contrast: name,
                side,
                context: String::new(),
            });
        }
    }
    let undefined = (0..d.num_units())
        .filter(|&i| indicators[i] != 0 && scores.iter().any(|s| !s.defined[i]))
        .count();
    if undefined > 0 {
        return Err(BalanceError::UndefinedScores {
            contrast: name,
            units: undefined,
        });
    }

    let score = match config.estimator {
        Estimator::Empirical => {
            let cells = group_by_key(d.num_units(), |i| {
                let key: Vec<ScoreKey> = scores.iter().map(|s| ScoreKey::of(s, i)).collect();
                let repr = scores.iter().map(|s| s.values[i]).collect();
                (key, repr)
            });
            frequency_scores(&cells, &indicators)
        }
        Estimator::Logistic => {
            let values: Vec<f64> = (0..d.num_units())
                .flat_map(|i| scores.iter().map(move |s| s.values[i]))
                .collect();
            let features = feature_matrix(d.num_units(), scores.len(), &values);
            let (_, mut score) = fit_and_predict(&features, &indicators, &config.fit, &name)?;
            // scores of units outside every balancing bifurcation are undefined
            for i in 0..d.num_units() {
                if scores.iter().any(|s| !s.defined[i]) {
                    score.defined[i] = false;
                }
            }
            score
        }
    };
    Ok(ChainedPropensity {
        balancing_scores: scores.to_vec(),
        score,
        indicators,
    })
}

pub fn chained_propensity(
    d: &Dataset,
    balancing: &[Contrast],
    target: &Contrast,
    config: &AlgorithmConfig,
) -> Result<ChainedPropensity, BalanceError> {
    let scores = balancing_scores(d, balancing, config)?;
    chain_scores(d, &scores, target, config)
}

/// Hash key for a score: the exact fraction when known, else the bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ScoreKey {
    Undefined,
    Exact(BigRational),
    Bits(u64),
}

impl ScoreKey {
    fn of(s: &ScoreVector, i: usize) -> Self {
        if !s.defined[i] {
            ScoreKey::Undefined
        } else if let Some(r) = s.exact_value(i) {
            ScoreKey::Exact(r.clone())
        } else {
            ScoreKey::Bits(s.values[i].to_bits())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubclassAssignment {
    /// 1-based subclass per unit; `None` for units outside `|D*| = 1`.
    pub labels: Vec<Option<usize>>,
    pub num_subclasses: usize,
    pub method: SubclassMethod,
    /// `(min, max)` score per subclass, indexed by `label - 1`.
    pub score_ranges: Vec<(f64, f64)>,
    /// Number of merges performed to repair one-class subclasses.
    pub merges: usize,
}

struct Stratum {
    units: Vec<usize>,
    min: f64,
    max: f64,
}

impl Stratum {
    fn has_both(&self, indicators: &[i8]) -> bool {
        self.units.iter().any(|&i| indicators[i] > 0)
            && self.units.iter().any(|&i| indicators[i] < 0)
    }

    fn absorb(&mut self, other: Stratum) {
        self.units.extend(other.units);
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }
}

/// Subclassifies the `|D*| = 1` units on their scores.
///
/// Quantile cutpoints are the order statistics at ranks `⌈s·n/S⌉`; a unit
/// whose score equals a cutpoint belongs to the lower subclass. Any subclass
/// missing one of the two groups is merged with its neighbour on the side of
/// the median subclass until every subclass has both.
pub fn subclassify(
    scores: &ScoreVector,
    indicators: &[i8],
    method: SubclassMethod,
) -> Result<SubclassAssignment, BalanceError> {
    let eligible: Vec<usize> = (0..indicators.len())
        .filter(|&i| indicators[i] != 0)
        .collect();
    if eligible.is_empty() {
        return Err(BalanceError::TooFewUnits("no units with |D*| = 1".into()));
    }
    if let Some(&i) = eligible.iter().find(|&&i| !scores.defined[i]) {
        return Err(BalanceError::UndefinedScores {
            contrast: format!("(unit {})", i + 1),
            units: eligible.iter().filter(|&&i| !scores.defined[i]).count(),
        });
    }

    let mut strata: Vec<Stratum> = match method {
        SubclassMethod::ExactValues => {
            let mut index: HashMap<ScoreKey, usize> = HashMap::new();
            let mut strata: Vec<Stratum> = Vec::new();
            for &i in &eligible {
                let v = scores.values[i];
                let s = *index.entry(ScoreKey::of(scores, i)).or_insert_with(|| {
                    strata.push(Stratum {
                        units: Vec::new(),
                        min: v,
                        max: v,
                    });
                    strata.len() - 1
                });
                strata[s].units.push(i);
            }
            strata.sort_by(|a, b| a.min.total_cmp(&b.min));
            strata
        }
        SubclassMethod::Quantile(s) => {
            if s == 0 {
                return Err(BalanceError::InvalidConfig(
                    "number of subclasses must be at least 1".into(),
                ));
            }
            let mut sorted: Vec<f64> = eligible.iter().map(|&i| scores.values[i]).collect();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let cuts: Vec<f64> = (1..s)
                .map(|k| {
                    let rank = (k * n).div_ceil(s).max(1);
                    sorted[rank - 1]
                })
                .collect();
            let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); s];
            for &i in &eligible {
                let v = scores.values[i];
                let k = cuts.iter().filter(|&&c| v > c).count();
                buckets[k].push(i);
            }
            buckets
                .into_iter()
                .filter(|b| !b.is_empty())
                .map(|units| {
                    let (min, max) = units
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &i| {
                            (acc.0.min(scores.values[i]), acc.1.max(scores.values[i]))
                        });
                    Stratum { units, min, max }
                })
                .collect()
        }
    };

    let mut merges = 0;
    while strata.len() > 1 {
        let Some(bad) = strata.iter().position(|s| !s.has_both(indicators)) else {
            break;
        };
        let mid = (strata.len() - 1) as f64 / 2.0;
        let position = bad as f64;
        let neighbour = if position < mid || bad == 0 {
            bad + 1
        } else {
            bad - 1
        };
        let removed = strata.remove(bad);
        let target = if neighbour > bad {
            neighbour - 1
        } else {
            neighbour
        };
        strata[target].absorb(removed);
        merges += 1;
    }
    if !strata[0].has_both(indicators) {
        return Err(BalanceError::TooFewUnits(
            "the eligible units do not contain both groups".into(),
        ));
    }

    if method == SubclassMethod::ExactValues {
        // label in order of first appearance in the data
        strata.sort_by_key(|s| s.units.iter().copied().min());
    }
    let mut labels = vec![None; indicators.len()];
    let mut score_ranges = Vec::with_capacity(strata.len());
    for (k, stratum) in strata.iter().enumerate() {
        for &i in &stratum.units {
            labels[i] = Some(k + 1);
        }
        score_ranges.push((stratum.min, stratum.max));
    }
    Ok(SubclassAssignment {
        labels,
        num_subclasses: strata.len(),
        method,
        score_ranges,
        merges,
    })
}

/// Covariate means of the two groups of a bifurcation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupComparison {
    pub n_positive: usize,
    pub n_negative: usize,
    pub mean_positive: Vec<f64>,
    pub mean_negative: Vec<f64>,
    /// `mean_positive - mean_negative`.
    pub difference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubclassRow {
    pub label: usize,
    pub score_min: f64,
    pub score_max: f64,
    /// Share of the `|D*| = 1` units in this subclass.
    pub weight: f64,
    pub comparison: GroupComparison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanDifference {
    pub pooled: GroupComparison,
    pub subclasses: Vec<SubclassRow>,
    /// Weighted average of the within-subclass differences.
    pub weighted: Option<Vec<f64>>,
}

/// Unit lists `(label, positives, negatives)`; label 0 is the pooled set.
fn partition_units(
    indicators: &[i8],
    subclasses: Option<&SubclassAssignment>,
) -> Vec<(usize, Vec<usize>, Vec<usize>)> {
    let split = |units: &mut dyn Iterator<Item = usize>| {
        let (pos, neg): (Vec<usize>, Vec<usize>) = units
            .filter(|&i| indicators[i] != 0)
            .partition(|&i| indicators[i] > 0);
        (pos, neg)
    };
    let (pos, neg) = split(&mut (0..indicators.len()));
    let mut out = vec![(0, pos, neg)];
    if let Some(sub) = subclasses {
        for label in 1..=sub.num_subclasses {
            let (pos, neg) =
                split(&mut (0..indicators.len()).filter(|&i| sub.labels[i] == Some(label)));
            out.push((label, pos, neg));
        }
    }
    out
}

fn check_groups(
    target: &Contrast,
    label: usize,
    pos: &[usize],
    neg: &[usize],
) -> Result<(), BalanceError> {
    let context = if label == 0 {
        String::new()
    } else {
        format!(" in subclass {}", label)
    };
    if pos.is_empty() {
        return Err(BalanceError::EmptyGroup {
            contrast: target.display_name(),
            side: "positive",
            context,
        });
    }
    if neg.is_empty() {
        return Err(BalanceError::EmptyGroup {
            contrast: target.display_name(),
            side: "negative",
            context,
        });
    }
    Ok(())
}

fn group_means(d: &Dataset, units: &[usize]) -> Vec<f64> {
    (0..d.num_covariates())
        .map(|k| {
            let mut values: Vec<f64> = units.iter().map(|&i| d.covariate(i, k)).collect();
            canonical_mean(&mut values)
        })
        .collect()
}

fn compare(d: &Dataset, pos: &[usize], neg: &[usize]) -> GroupComparison {
    let mean_positive = group_means(d, pos);
    let mean_negative = group_means(d, neg);
    let difference = mean_positive
        .iter()
        .zip(&mean_negative)
        .map(|(a, b)| a - b)
        .collect();
    GroupComparison {
        n_positive: pos.len(),
        n_negative: neg.len(),
        mean_positive,
        mean_negative,
        difference,
    }
}

/// Pooled `D* = +1` minus `D* = -1` covariate means and, with subclasses,
/// within-subclass differences and their share-weighted average.
pub fn covariate_mean_difference(
    d: &Dataset,
    target: &Contrast,
    subclasses: Option<&SubclassAssignment>,
) -> Result<MeanDifference, BalanceError> {
    let indicators = indicators_for(d, target)?;
    let parts = partition_units(&indicators, subclasses);
    for (label, pos, neg) in &parts {
        check_groups(target, *label, pos, neg)?;
    }
    let (_, pos, neg) = &parts[0];
    let pooled = compare(d, pos, neg);
    let total = (pooled.n_positive + pooled.n_negative) as f64;
    let subclass_rows: Vec<SubclassRow> = parts[1..]
        .iter()
        .map(|(label, pos, neg)| {
            let (score_min, score_max) = subclasses.unwrap().score_ranges[label - 1];
            SubclassRow {
                label: *label,
                score_min,
                score_max,
                weight: (pos.len() + neg.len()) as f64 / total,
                comparison: compare(d, pos, neg),
            }
        })
        .collect();
    let weighted = subclasses.map(|_| weighted_difference(&subclass_rows, d.num_covariates()));
    Ok(MeanDifference {
        pooled,
        subclasses: subclass_rows,
        weighted,
    })
}

/// `Σ weight_s · diff_s`, summed in ascending score order.
pub fn weighted_difference(rows: &[SubclassRow], num_covariates: usize) -> Vec<f64> {
    let mut ordered: Vec<&SubclassRow> = rows.iter().collect();
    ordered.sort_by(|a, b| a.score_min.total_cmp(&b.score_min));
    (0..num_covariates)
        .map(|k| {
            ordered
                .iter()
                .map(|r| r.weight * r.comparison.difference[k])
                .sum()
        })
        .collect()
}

/// Group means in exact rational arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactComparison {
    pub label: usize,
    pub mean_positive: Vec<BigRational>,
    pub mean_negative: Vec<BigRational>,
    pub difference: Vec<BigRational>,
}

/// Exact counterpart of [`covariate_mean_difference`]: every covariate is
/// converted to the rational it represents. The first entry is the pooled
/// comparison (label 0), followed by one entry per subclass.
pub fn exact_mean_difference(
    d: &Dataset,
    target: &Contrast,
    subclasses: Option<&SubclassAssignment>,
) -> Result<Vec<ExactComparison>, BalanceError> {
    let indicators = indicators_for(d, target)?;
    let parts = partition_units(&indicators, subclasses);
    let exact_mean = |units: &[usize], k: usize| {
        let sum = units.iter().fold(BigRational::zero(), |acc, &i| {
            acc + BigRational::from_float(d.covariate(i, k)).expect("finite covariate")
        });
        sum / BigRational::from_integer(units.len().into())
    };
    parts
        .iter()
        .map(|(label, pos, neg)| {
            check_groups(target, *label, pos, neg)?;
            let mean_positive: Vec<BigRational> = (0..d.num_covariates())
                .map(|k| exact_mean(pos, k))
                .collect();
            let mean_negative: Vec<BigRational> = (0..d.num_covariates())
                .map(|k| exact_mean(neg, k))
                .collect();
            let difference = mean_positive
                .iter()
                .zip(&mean_negative)
                .map(|(a, b)| a - b)
                .collect();
            Ok(ExactComparison {
                label: *label,
                mean_positive,
                mean_negative,
                difference,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetReport {
    pub chained: ChainedPropensity,
    pub subclasses: SubclassAssignment,
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub differences: MeanDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetOutcome {
    pub target: Contrast,
    pub result: Result<TargetReport, BalanceError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub covariate_names: Vec<String>,
    pub balancing: Vec<Contrast>,
    pub config: AlgorithmConfig,
    pub targets: Vec<TargetOutcome>,
}

impl BalanceReport {
    pub fn successes(&self) -> impl Iterator<Item = (&Contrast, &TargetReport)> {
        self.targets
            .iter()
            .filter_map(|t| t.result.as_ref().ok().map(|r| (&t.target, r)))
    }

    pub fn first_error(&self) -> Option<(&Contrast, &BalanceError)> {
        self.targets
            .iter()
            .find_map(|t| t.result.as_ref().err().map(|e| (&t.target, e)))
    }
}

fn evaluate_target(
    d: &Dataset,
    scores: &[ScoreVector],
    target: &Contrast,
    config: &AlgorithmConfig,
) -> Result<TargetReport, BalanceError> {
    let chained = chain_scores(d, scores, target, config)?;
    let subclasses = subclassify(&chained.score, &chained.indicators, config.subclass)?;
    let differences = covariate_mean_difference(d, target, Some(&subclasses))?;
    Ok(TargetReport {
        before: differences.pooled.difference.clone(),
        after: differences.weighted.clone().unwrap_or_default(),
        chained,
        subclasses,
        differences,
    })
}

/// Runs the full routine for every target. Failures are recorded per
/// target; other targets still run.
pub fn run_algorithm(
    d: &Dataset,
    balancing: &[Contrast],
    targets: &[Contrast],
    config: &AlgorithmConfig,
) -> BalanceReport {
    let scores = if targets.is_empty() {
        Ok(Vec::new())
    } else {
        balancing_scores(d, balancing, config)
    };
    let outcomes = targets
        .par_iter()
        .map(|target| TargetOutcome {
            target: target.clone(),
            result: scores
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|s| evaluate_target(d, s, target, config)),
        })
        .collect();
    BalanceReport {
        covariate_names: d.covariate_names().to_vec(),
        balancing: balancing.to_vec(),
        config: *config,
        targets: outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example::{artificial_dataset, lambda_one, lambda_three, lambda_two};
    use num_traits::ToPrimitive;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn subclass_method_parsing() {
        assert_eq!("exact".parse(), Ok(SubclassMethod::ExactValues));
        assert_eq!("5".parse(), Ok(SubclassMethod::Quantile(5)));
        assert_eq!("quantile(3)".parse(), Ok(SubclassMethod::Quantile(3)));
        assert!("0".parse::<SubclassMethod>().is_err());
        assert!("five".parse::<SubclassMethod>().is_err());
    }

    #[test]
    fn chained_scores_of_artificial_example() {
        let d = artificial_dataset();
        let chained = chained_propensity(
            &d,
            &[lambda_one(), lambda_two()],
            &lambda_three(),
            &AlgorithmConfig::exact(),
        )
        .unwrap();
        let cells: Vec<BigRational> = [0, 6, 12, 18]
            .iter()
            .map(|&i| chained.score.exact_value(i).unwrap().clone())
            .collect();
        assert_eq!(cells, vec![r(1, 5), r(1, 3), r(3, 4), r(1, 2)]);
    }

    #[test]
    fn chaining_on_the_target_itself_reproduces_its_score() {
        let d = artificial_dataset();
        let config = AlgorithmConfig::exact();
        for target in [lambda_one(), lambda_two(), lambda_three()] {
            let own = empirical_csps(&d, &target).unwrap();
            let chained =
                chained_propensity(&d, std::slice::from_ref(&target), &target, &config).unwrap();
            for i in 0..d.num_units() {
                if chained.indicators[i] != 0 {
                    assert_eq!(chained.score.exact_value(i), own.exact_value(i));
                }
            }
        }
    }

    #[test]
    fn exact_subclasses_follow_first_appearance() {
        let d = artificial_dataset();
        let report = run_algorithm(
            &d,
            &[lambda_one(), lambda_two()],
            &[lambda_three()],
            &AlgorithmConfig::exact(),
        );
        let t = report.targets[0].result.as_ref().unwrap();
        assert_eq!(t.subclasses.num_subclasses, 4);
        for (cell, label) in [0, 6, 12, 18].iter().zip(1..=4) {
            let in_cell: Vec<Option<usize>> = (*cell..cell + 6)
                .filter(|&i| t.chained.indicators[i] != 0)
                .map(|i| t.subclasses.labels[i])
                .collect();
            assert!(in_cell.iter().all(|&l| l == Some(label)));
        }
        assert!(t.after.iter().all(|&v| v == 0.0));
        for row in &t.differences.subclasses {
            assert!(row.comparison.difference.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn counterexample_means_are_exact() {
        let d = artificial_dataset();
        let scores = balancing_scores(&d, &[lambda_two()], &AlgorithmConfig::exact()).unwrap();
        let target = lambda_one();
        let indicators = target.indicators(d.treatments()).unwrap();
        let subclasses = subclassify(&scores[0], &indicators, SubclassMethod::ExactValues).unwrap();
        let half = (0..d.num_units())
            .find(|&i| scores[0].exact_value(i) == Some(&r(1, 2)) && indicators[i] != 0)
            .and_then(|i| subclasses.labels[i])
            .unwrap();
        let exact = exact_mean_difference(&d, &target, Some(&subclasses)).unwrap();
        let row = exact.iter().find(|e| e.label == half).unwrap();
        assert_eq!(row.mean_positive, vec![r(1, 3); 3]);
        assert_eq!(row.mean_negative, vec![r(2, 3); 3]);
        assert_eq!(row.difference, vec![r(-1, 3); 3]);
    }

    #[test]
    fn exact_values_with_constant_scores() {
        let scores = ScoreVector::from_values(vec![0.5; 6]);
        let indicators = [1, -1, 1, -1, 0, 1];
        let s = subclassify(&scores, &indicators, SubclassMethod::Quantile(5)).unwrap();
        assert_eq!(s.num_subclasses, 1);
        assert_eq!(s.labels[4], None);
    }

    #[test]
    fn quantile_split_of_distinct_scores() {
        let values: Vec<f64> = (0..100).map(|i| f64::from(i) / 100.0).collect();
        let indicators: Vec<i8> = (0..100).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let s = subclassify(
            &ScoreVector::from_values(values),
            &indicators,
            SubclassMethod::Quantile(5),
        )
        .unwrap();
        assert_eq!(s.num_subclasses, 5);
        for label in 1..=5 {
            assert_eq!(s.labels.iter().filter(|&&l| l == Some(label)).count(), 20);
        }
        assert_eq!(s.labels[19], Some(1));
        assert_eq!(s.labels[20], Some(2));
    }

    #[test]
    fn boundary_ties_go_to_the_lower_subclass() {
        let values = vec![0.1, 0.2, 0.2, 0.2, 0.9, 0.95];
        let indicators = vec![1, -1, 1, -1, 1, -1];
        let s = subclassify(
            &ScoreVector::from_values(values),
            &indicators,
            SubclassMethod::Quantile(2),
        )
        .unwrap();
        assert_eq!(
            s.labels,
            vec![Some(1), Some(1), Some(1), Some(1), Some(2), Some(2)]
        );
    }

    #[test]
    fn one_class_subclasses_merge_toward_the_median() {
        // lowest fifth holds only positives
        let values: Vec<f64> = (0..10).map(f64::from).collect();
        let indicators = vec![1, 1, 1, -1, 1, -1, 1, -1, 1, -1];
        let s = subclassify(
            &ScoreVector::from_values(values),
            &indicators,
            SubclassMethod::Quantile(5),
        )
        .unwrap();
        assert_eq!(s.merges, 1);
        assert_eq!(s.num_subclasses, 4);
        assert_eq!(s.labels[0], s.labels[3]);
        assert_eq!(s.score_ranges[0], (0.0, 3.0));
    }

    #[test]
    fn subclassify_errors() {
        let scores = ScoreVector::from_values(vec![0.1, 0.2]);
        assert!(matches!(
            subclassify(&scores, &[0, 0], SubclassMethod::Quantile(2)),
            Err(BalanceError::TooFewUnits(_))
        ));
        assert!(matches!(
            subclassify(&scores, &[1, 1], SubclassMethod::Quantile(2)),
            Err(BalanceError::TooFewUnits(_))
        ));
        assert!(matches!(
            subclassify(&scores, &[1, -1], SubclassMethod::Quantile(0)),
            Err(BalanceError::InvalidConfig(_))
        ));
        let mut masked = scores.clone();
        masked.defined[1] = false;
        assert!(matches!(
            subclassify(&masked, &[1, -1], SubclassMethod::ExactValues),
            Err(BalanceError::UndefinedScores { .. })
        ));
    }

    #[test]
    fn empty_group_is_an_error() {
        let d = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![1, 3], 3).unwrap();
        let c: Contrast = "1 -1 0".parse().unwrap();
        assert!(matches!(
            covariate_mean_difference(&d, &c, None),
            Err(BalanceError::EmptyGroup {
                side: "negative",
                ..
            })
        ));
    }

    #[test]
    fn undefined_balancing_scores_are_reported() {
        // the first cell has only treatment 3, so the (1,-1,0) score is undefined there
        let d = Dataset::from_rows(
            &[vec![0.0], vec![0.0], vec![1.0], vec![1.0], vec![1.0]],
            vec![3, 3, 1, 2, 3],
            3,
        )
        .unwrap();
        let pair: Contrast = "1 -1 0".parse().unwrap();
        let target: Contrast = "0 1 -1".parse().unwrap();
        assert!(matches!(
            chained_propensity(&d, &[pair], &target, &AlgorithmConfig::exact()),
            Err(BalanceError::UndefinedScores { units: 2, .. })
        ));
    }

    #[test]
    fn run_algorithm_edge_cases() {
        let d = artificial_dataset();
        let report = run_algorithm(&d, &[lambda_one()], &[], &AlgorithmConfig::exact());
        assert!(report.targets.is_empty());

        let four: Contrast = "1 -1 0 0".parse().unwrap();
        let report = run_algorithm(
            &d,
            &[lambda_one(), lambda_two()],
            &[four, lambda_three()],
            &AlgorithmConfig::exact(),
        );
        assert!(report.targets[0].result.is_err());
        assert!(report.targets[1].result.is_ok());
        assert_eq!(report.successes().count(), 1);
    }

    #[test]
    fn pooled_linearity_identity_is_exact() {
        let d = artificial_dataset();
        let diff = |s: &str| {
            let c: Contrast = s.parse().unwrap();
            exact_mean_difference(&d, &c, None).unwrap()[0]
                .difference
                .clone()
        };
        let (a, b, c) = (diff("1 0 -1"), diff("1 -1 0"), diff("0 1 -1"));
        for k in 0..3 {
            assert_eq!(a[k], &b[k] + &c[k]);
        }
    }

    #[test]
    fn weighted_average_matches_rows() {
        let d = artificial_dataset();
        let report = run_algorithm(
            &d,
            &[lambda_two()],
            &[lambda_one()],
            &AlgorithmConfig::exact(),
        );
        let t = report.targets[0].result.as_ref().unwrap();
        let rows = &t.differences.subclasses;
        assert!((rows.iter().map(|r| r.weight).sum::<f64>() - 1.0).abs() < 1e-12);
        for k in 0..3 {
            let recomputed: f64 = rows
                .iter()
                .map(|r| r.weight * r.comparison.difference[k])
                .sum();
            assert!((recomputed - t.after[k]).abs() < 1e-12);
        }
        // the c_2 = 1/2 subclass is unbalanced, so the average is not zero
        assert!(t.after.iter().any(|v| v.abs() > 0.01));
        let exact = exact_mean_difference(&d, &lambda_one(), Some(&t.subclasses)).unwrap();
        let weighted: f64 = exact[1..]
            .iter()
            .zip(rows)
            .map(|(e, r)| r.weight * e.difference[0].to_f64().unwrap())
            .sum();
        assert!((weighted - t.after[0]).abs() < 1e-12);
    }
}
