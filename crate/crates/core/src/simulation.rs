//! Monte Carlo harness: standard-normal covariates, multinomial-logit
//! treatment assignment, and before/after balance averaged over replications.
//!
//! Replication `r` draws from a ChaCha8 generator seeded with `seed` on
//! stream `r`. Each unit consumes `K` standard normals (ziggurat) followed by
//! one uniform on `[0, 1)` that selects the treatment by inverting the
//! cumulative softmax probabilities.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::balancing::{run_algorithm, AlgorithmConfig};
use crate::contrast::Contrast;
use crate::dataset::Dataset;
use crate::estimation::softmax;

/// Stream reserved for the large-sample oracle draw.
pub const ORACLE_STREAM: u64 = u64::MAX;
pub const DEFAULT_ORACLE_SIZE: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("coefficient file line {line}: {message}")]
    CoefficientFile { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub num_units: usize,
    pub num_covariates: usize,
    pub num_treatments: usize,
    /// `β_t` per treatment, each of length `K` (no intercept).
    pub coefficients: Vec<Vec<f64>>,
    pub replications: usize,
    pub seed: u64,
    pub balancing: Vec<Contrast>,
    pub targets: Vec<Contrast>,
    pub algorithm: AlgorithmConfig,
}

/// `(1/3, 2/3, -1)`, `(1, -1, 0)`, `(1, 0, -1)`, `(0, 1, -1)`.
pub fn default_targets() -> Vec<Contrast> {
    [
        ([(1, 3), (2, 3), (-1, 1)], "lambda1"),
        ([(1, 1), (-1, 1), (0, 1)], "lambda2"),
        ([(1, 1), (0, 1), (-1, 1)], "lambda3"),
        ([(0, 1), (1, 1), (-1, 1)], "lambda4"),
    ]
    .iter()
    .map(|(c, label)| Contrast::from_ratios(c).unwrap().with_label(*label))
    .collect()
}

/// The first two default targets.
pub fn default_balancing() -> Vec<Contrast> {
    default_targets().into_iter().take(2).collect()
}

impl SimulationConfig {
    /// Three treatments, three covariates, caller-supplied coefficients.
    pub fn with_coefficients(coefficients: Vec<Vec<f64>>) -> Self {
        let num_covariates = coefficients.first().map_or(0, Vec::len);
        Self {
            num_units: 800,
            num_covariates,
            num_treatments: coefficients.len(),
            coefficients,
            replications: 100,
            seed: 0,
            balancing: default_balancing(),
            targets: default_targets(),
            algorithm: AlgorithmConfig::default(),
        }
    }

    /// Complete randomization: every `β_t = 0`.
    pub fn mechanism_one() -> Self {
        Self::with_coefficients(vec![vec![0.0; 3]; 3])
    }

    pub fn mechanism_two() -> Self {
        Self::with_coefficients(vec![
            vec![0.0, 0.0, 0.0],
            vec![0.75, 0.25, 0.5],
            vec![0.25, 0.75, 0.5],
        ])
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let invalid = |m: String| Err(SimulationError::InvalidConfig(m));
        if self.num_treatments < 2 {
            return invalid(format!(
                "need at least 2 treatments, got {}",
                self.num_treatments
            ));
        }
        if self.coefficients.len() != self.num_treatments {
            return invalid(format!(
                "{} coefficient vectors for {} treatments",
                self.coefficients.len(),
                self.num_treatments
            ));
        }
        if let Some(t) = self
            .coefficients
            .iter()
            .position(|b| b.len() != self.num_covariates)
        {
            return invalid(format!(
                "coefficient vector {} has length {}, expected {}",
                t + 1,
                self.coefficients[t].len(),
                self.num_covariates
            ));
        }
        if self.coefficients.iter().flatten().any(|b| !b.is_finite()) {
            return invalid("coefficients must be finite".into());
        }
        if self.num_covariates == 0 {
            return invalid("need at least one covariate".into());
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1".into());
        }
        if self.num_units < self.num_treatments {
            return invalid(format!(
                "N = {} is smaller than T = {}",
                self.num_units, self.num_treatments
            ));
        }
        for c in self.balancing.iter().chain(&self.targets) {
            if c.num_treatments() != self.num_treatments {
                return invalid(format!(
                    "contrast {} has {} coefficients, expected {}",
                    c.display_name(),
                    c.num_treatments(),
                    self.num_treatments
                ));
            }
        }
        Ok(())
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Draws one unit's covariates into `x` and returns its 1-based treatment.
    fn draw_unit(&self, rng: &mut ChaCha8Rng, x: &mut [f64]) -> usize {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let eta: Vec<f64> = self
            .coefficients
            .iter()
            .map(|b| b.iter().zip(x.iter()).map(|(c, v)| c * v).sum())
            .collect();
        let probs = softmax(&eta);
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        for (t, p) in probs.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return t + 1;
            }
        }
        self.num_treatments
    }
}

/// Parses one coefficient vector per line (whitespace or comma separated);
/// `#` starts a comment.
pub fn parse_coefficient_file(text: &str) -> Result<Vec<Vec<f64>>, SimulationError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let row = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| SimulationError::CoefficientFile {
                        line: i + 1,
                        message: format!("{:?} is not a number", s),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SimulationError::CoefficientFile {
            line: 0,
            message: "no coefficient vectors".into(),
        });
    }
    if let Some(i) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return Err(SimulationError::CoefficientFile {
            line: i + 1,
            message: "vectors have different lengths".into(),
        });
    }
    Ok(rows)
}

/// The dataset of replication `replication_index`.
pub fn sample_dataset(cfg: &SimulationConfig, replication_index: usize) -> Dataset {
    let mut rng = cfg.stream(replication_index as u64);
    let k = cfg.num_covariates;
    let mut covariates = vec![0.0; cfg.num_units * k];
    let mut treatments = Vec::with_capacity(cfg.num_units);
    for unit in covariates.chunks_mut(k) {
        treatments.push(cfg.draw_unit(&mut rng, unit));
    }
    Dataset::new(covariates, treatments, k, cfg.num_treatments, None)
        .expect("sampled data are well formed")
}

/// Before/after differences of one target in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDifferences {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    pub num_subclasses: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    /// Per target, or the first error message.
    pub outcome: Result<Vec<TargetDifferences>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub target_names: Vec<String>,
    pub covariate_names: Vec<String>,
    pub replications: Vec<ReplicationRecord>,
    /// `[target][covariate]` means over the retained replications.
    pub mean_before: Vec<Vec<f64>>,
    pub mean_after: Vec<Vec<f64>>,
    pub excluded: usize,
}

impl ExperimentResult {
    pub fn retained(&self) -> impl Iterator<Item = (usize, &[TargetDifferences])> {
        self.replications
            .iter()
            .filter_map(|r| r.outcome.as_deref().ok().map(|t| (r.index, t)))
    }
}

pub fn run_replication(cfg: &SimulationConfig, index: usize) -> ReplicationRecord {
    let d = sample_dataset(cfg, index);
    let report = run_algorithm(&d, &cfg.balancing, &cfg.targets, &cfg.algorithm);
    let outcome = match report.first_error() {
        Some((target, err)) => Err(format!("{}: {}", target.display_name(), err)),
        None => Ok(report
            .successes()
            .map(|(_, t)| TargetDifferences {
                before: t.before.clone(),
                after: t.after.clone(),
                num_subclasses: t.subclasses.num_subclasses,
            })
            .collect()),
    };
    ReplicationRecord { index, outcome }
}

/// Runs every replication (in parallel) and averages the retained ones in
/// replication order. Replications whose routine failed are excluded and
/// counted.
pub fn run_experiment(cfg: &SimulationConfig) -> Result<ExperimentResult, SimulationError> {
    cfg.validate()?;
    let replications: Vec<ReplicationRecord> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect();
    let num_targets = cfg.targets.len();
    let k = cfg.num_covariates;
    let mut sum_before = vec![vec![0.0; k]; num_targets];
    let mut sum_after = vec![vec![0.0; k]; num_targets];
    let mut retained = 0usize;
    for rep in &replications {
        if let Ok(targets) = &rep.outcome {
            retained += 1;
            for (t, diff) in targets.iter().enumerate() {
                for j in 0..k {
                    sum_before[t][j] += diff.before[j];
                    sum_after[t][j] += diff.after[j];
                }
            }
        }
    }
    let mean = |sums: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        sums.into_iter()
            .map(|row| row.into_iter().map(|s| s / retained as f64).collect())
            .collect()
    };
    Ok(ExperimentResult {
        target_names: cfg.targets.iter().map(Contrast::display_name).collect(),
        covariate_names: (1..=k).map(|j| format!("x{}", j)).collect(),
        mean_before: mean(sum_before),
        mean_after: mean(sum_after),
        excluded: cfg.replications - retained,
        replications,
    })
}

/// Pooled `D = +1` minus `D = -1` covariate means for each target from one
/// draw of `oracle_n` units, accumulated directly per treatment without the
/// balancing routine.
pub fn oracle_group_means(
    cfg: &SimulationConfig,
    oracle_n: usize,
) -> Result<Vec<Vec<f64>>, SimulationError> {
    cfg.validate()?;
    let k = cfg.num_covariates;
    let mut rng = cfg.stream(ORACLE_STREAM);
    let mut sums = vec![vec![0.0; k]; cfg.num_treatments];
    let mut counts = vec![0usize; cfg.num_treatments];
    let mut x = vec![0.0; k];
    for _ in 0..oracle_n {
        let t = cfg.draw_unit(&mut rng, &mut x) - 1;
        counts[t] += 1;
        for (s, v) in sums[t].iter_mut().zip(&x) {
            *s += v;
        }
    }
    Ok(cfg
        .targets
        .iter()
        .map(|c| {
            let signs = c.signs();
            let group_mean = |sign: i8, j: usize| {
                let (s, n) = (0..cfg.num_treatments)
                    .filter(|&t| signs[t] == sign)
                    .fold((0.0, 0usize), |(s, n), t| (s + sums[t][j], n + counts[t]));
                s / n as f64
            };
            (0..k)
                .map(|j| group_mean(1, j) - group_mean(-1, j))
                .collect()
        })
        .collect())
}
