//! Contrasts among `T` treatments and their bifurcations.
//!
//! A contrast is a coefficient vector summing to zero. Coefficients are kept
//! as exact rationals whenever every input was rational (`"1/2"`, `"-1"`,
//! `"0.25"`), and fall back to double precision otherwise.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Zero-sum tolerance applied to floating-point contrasts.
pub const ZERO_SUM_TOLERANCE: f64 = 1e-12;

/// Tolerance for the orthogonality test in floating-point mode.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContrastError {
    #[error("coefficients sum to {sum}, but a contrast's coefficients must sum to zero")]
    NotAContrast { sum: f64 },
    #[error("every coefficient is zero")]
    AllZero,
    #[error("a contrast needs at least two treatments, got {0}")]
    TooShort(usize),
    #[error("bifurcation has no {0} component")]
    DegenerateBifurcation(&'static str),
    #[error("lower bound exceeds upper bound for treatment {0}")]
    InvalidBounds(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("treatment {treatment} is outside 1..={num_treatments}")]
    OutOfRangeTreatment {
        treatment: usize,
        num_treatments: usize,
    },
    #[error("cannot parse coefficient {0:?}")]
    Parse(String),
}

/// A single coefficient or weight, exact when possible.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Exact(BigRational),
    Real(f64),
}

impl Scalar {
    pub fn ratio(numer: i64, denom: i64) -> Self {
        Scalar::Exact(BigRational::new(numer.into(), denom.into()))
    }

    pub fn integer(value: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(value.into()))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => rational_to_f64(r),
            Scalar::Real(x) => *x,
        }
    }

    pub fn signum(&self) -> i8 {
        match self {
            Scalar::Exact(r) => {
                if r.is_zero() {
                    0
                } else if r.is_positive() {
                    1
                } else {
                    -1
                }
            }
            Scalar::Real(x) => {
                if *x == 0.0 {
                    0
                } else if *x > 0.0 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    fn to_real(&self) -> Scalar {
        Scalar::Real(self.to_f64())
    }

    fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a * b),
            _ => Scalar::Real(self.to_f64() * other.to_f64()),
        }
    }

    fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a + b),
            _ => Scalar::Real(self.to_f64() + other.to_f64()),
        }
    }

    fn compare(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            _ => self.to_f64().total_cmp(&other.to_f64()),
        }
    }
}

impl From<f64> for Scalar {
    fn from(value: f64) -> Self {
        Scalar::Real(value)
    }
}

impl From<i64> for Scalar {
    fn from(value: i64) -> Self {
        Scalar::integer(value)
    }
}

impl From<BigRational> for Scalar {
    fn from(value: BigRational) -> Self {
        Scalar::Exact(value)
    }
}

impl FromStr for Scalar {
    type Err = ContrastError;

    /// Accepts `p/q`, integers and plain decimals (`-0.25`) as exact values.
    /// Anything else that parses as `f64` (exponents, `inf`) is kept as a real.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || ContrastError::Parse(s.to_string());
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| err())?;
            let q: BigInt = q.trim().parse().map_err(|_| err())?;
            if q.is_zero() {
                return Err(err());
            }
            return Ok(Scalar::Exact(BigRational::new(p, q)));
        }
        if let Some(r) = parse_decimal(s) {
            return Ok(Scalar::Exact(r));
        }
        let x: f64 = s.parse().map_err(|_| err())?;
        if !x.is_finite() {
            return Err(err());
        }
        Ok(Scalar::Real(x))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{}", r),
            Scalar::Real(x) => write!(f, "{}", x),
        }
    }
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let digits = format!("{}{}", int_part, frac_part);
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = BigRational::new(numer, denom);
    Some(if neg { -r } else { r })
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator/denominator too large for the direct conversion
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// A zero-sum coefficient vector over `T ≥ 2` treatments.
#[derive(Debug, Clone, PartialEq)]
pub struct Contrast {
    coefficients: Vec<Scalar>,
    label: Option<String>,
}

impl Contrast {
    /// Validates `coefficients` as a contrast. Mixed exact/real input is
    /// demoted to reals.
    pub fn new(coefficients: Vec<Scalar>, label: Option<String>) -> Result<Self, ContrastError> {
        if coefficients.len() < 2 {
            return Err(ContrastError::TooShort(coefficients.len()));
        }
        let coefficients = if coefficients.iter().all(Scalar::is_exact) {
            coefficients
        } else {
            coefficients.iter().map(Scalar::to_real).collect()
        };
        if coefficients.iter().all(|c| c.signum() == 0) {
            return Err(ContrastError::AllZero);
        }
        match &coefficients[0] {
            Scalar::Exact(_) => {
                let sum = coefficients
                    .iter()
                    .fold(BigRational::zero(), |acc, c| match c {
                        Scalar::Exact(r) => acc + r,
                        Scalar::Real(_) => unreachable!(),
                    });
                if !sum.is_zero() {
                    return Err(ContrastError::NotAContrast {
                        sum: rational_to_f64(&sum),
                    });
                }
            }
            Scalar::Real(_) => {
                let sum: f64 = coefficients.iter().map(Scalar::to_f64).sum();
                if sum.abs() > ZERO_SUM_TOLERANCE {
                    return Err(ContrastError::NotAContrast { sum });
                }
            }
        }
        Ok(Self {
            coefficients,
            label,
        })
    }

    pub fn from_f64(coefficients: &[f64]) -> Result<Self, ContrastError> {
        Self::new(
            coefficients.iter().map(|&x| Scalar::Real(x)).collect(),
            None,
        )
    }

    /// Exact contrast from `(numerator, denominator)` pairs.
    pub fn from_ratios(coefficients: &[(i64, i64)]) -> Result<Self, ContrastError> {
        Self::new(
            coefficients
                .iter()
                .map(|&(p, q)| Scalar::ratio(p, q))
                .collect(),
            None,
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// The label, or the coefficients joined by spaces when unlabeled.
    pub fn display_name(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None => self
                .coefficients
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    pub fn num_treatments(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Scalar] {
        &self.coefficients
    }

    pub fn is_exact(&self) -> bool {
        self.coefficients.iter().all(Scalar::is_exact)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coefficients.iter().map(Scalar::to_f64).collect()
    }

    /// `sgn(λ)` componentwise.
    pub fn signs(&self) -> Vec<i8> {
        self.coefficients.iter().map(Scalar::signum).collect()
    }

    pub fn sgn_bifurcate(&self) -> Bifurcation {
        let signs = self.signs();
        Bifurcation::from_signs(&signs).expect("a valid contrast has both signs")
    }

    /// Bifurcation with per-treatment dead zones: component `t` keeps its sign
    /// only when `λ_t < lower[t]` or `λ_t > upper[t]`.
    pub fn bounded_bifurcate(
        &self,
        lower: &[Scalar],
        upper: &[Scalar],
    ) -> Result<Bifurcation, ContrastError> {
        let t = self.num_treatments();
        for bound in [lower, upper] {
            if bound.len() != t {
                return Err(ContrastError::DimensionMismatch {
                    expected: t,
                    got: bound.len(),
                });
            }
        }
        if let Some(i) = (0..t).find(|&i| lower[i].compare(&upper[i]) == Ordering::Greater) {
            return Err(ContrastError::InvalidBounds(i + 1));
        }
        let signs: Vec<i8> = self
            .coefficients
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(c, (lo, hi))| {
                let outside = c.compare(lo) == Ordering::Less || c.compare(hi) == Ordering::Greater;
                if outside {
                    c.signum()
                } else {
                    0
                }
            })
            .collect();
        Bifurcation::from_signs(&signs)
    }

    pub fn is_orthogonal(&self, other: &Contrast) -> Result<bool, ContrastError> {
        self.check_dimension(other.num_treatments())?;
        if self.is_exact() && other.is_exact() {
            let dot = self
                .coefficients
                .iter()
                .zip(&other.coefficients)
                .fold(Scalar::integer(0), |acc, (a, b)| acc.add(&a.mul(b)));
            return Ok(dot.signum() == 0);
        }
        let dot: f64 = self
            .to_f64()
            .iter()
            .zip(other.to_f64())
            .map(|(a, b)| a * b)
            .sum();
        Ok(dot.abs() <= ORTHOGONALITY_TOLERANCE)
    }

    /// `D` for a unit assigned to `treatment` (1-based): `sgn(λ_treatment)`.
    pub fn indicator(&self, treatment: usize) -> Result<i8, ContrastError> {
        if treatment == 0 || treatment > self.num_treatments() {
            return Err(ContrastError::OutOfRangeTreatment {
                treatment,
                num_treatments: self.num_treatments(),
            });
        }
        Ok(self.coefficients[treatment - 1].signum())
    }

    /// Indicators for a whole vector of 1-based labels.
    pub fn indicators(&self, treatments: &[usize]) -> Result<Vec<i8>, ContrastError> {
        treatments.iter().map(|&t| self.indicator(t)).collect()
    }

    fn check_dimension(&self, got: usize) -> Result<(), ContrastError> {
        if got != self.num_treatments() {
            return Err(ContrastError::DimensionMismatch {
                expected: self.num_treatments(),
                got,
            });
        }
        Ok(())
    }
}

impl FromStr for Contrast {
    type Err = ContrastError;

    /// One line of a contrast file: whitespace-separated coefficients with an
    /// optional trailing `# label`.
    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let (body, label) = match line.split_once('#') {
            Some((body, label)) => {
                let label = label.trim();
                (body, (!label.is_empty()).then(|| label.to_string()))
            }
            None => (line, None),
        };
        let coefficients = body
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Scalar>, _>>()?;
        Contrast::new(coefficients, label)
    }
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body = self
            .coefficients
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        match &self.label {
            Some(l) => write!(f, "({}) # {}", body, l),
            None => write!(f, "({})", body),
        }
    }
}

/// Parses a contrast file. Blank lines and lines starting with `#` are skipped.
/// Errors carry the 1-based line number.
pub fn parse_contrast_file(text: &str) -> Result<Vec<Contrast>, (usize, ContrastError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| l.parse().map_err(|e| (i + 1, e)))
        .collect()
}

/// Weighted sum `Σ w_i · c_i`. Exact when every weight and contrast is exact.
pub fn linear_combination(terms: &[(Scalar, &Contrast)]) -> Result<Contrast, ContrastError> {
    let Some((_, first)) = terms.first() else {
        return Err(ContrastError::AllZero);
    };
    let t = first.num_treatments();
    let mut acc = vec![Scalar::integer(0); t];
    for (weight, contrast) in terms {
        first.check_dimension(contrast.num_treatments())?;
        for (a, c) in acc.iter_mut().zip(&contrast.coefficients) {
            *a = a.add(&weight.mul(c));
        }
    }
    if acc.iter().all(|c| c.signum() == 0) {
        return Err(ContrastError::AllZero);
    }
    if !acc.iter().all(Scalar::is_exact) {
        // rounding can leave a residue beyond the validation tolerance
        let sum: f64 = acc.iter().map(Scalar::to_f64).sum();
        if sum.abs() > ZERO_SUM_TOLERANCE {
            let n = t as f64;
            acc = acc
                .iter()
                .map(|c| Scalar::Real(c.to_f64() - sum / n))
                .collect();
        }
    }
    Contrast::new(acc, None)
}

/// The pair `{f(λ)⁺, f(λ)⁻}` of sign vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bifurcation {
    positive: Vec<i8>,
    negative: Vec<i8>,
}

impl Bifurcation {
    /// Builds the bifurcation from a `{-1, 0, 1}` sign vector.
    pub fn from_signs(signs: &[i8]) -> Result<Self, ContrastError> {
        let positive: Vec<i8> = signs.iter().map(|&s| i8::from(s > 0)).collect();
        let negative: Vec<i8> = signs.iter().map(|&s| -i8::from(s < 0)).collect();
        if !positive.contains(&1) {
            return Err(ContrastError::DegenerateBifurcation("positive"));
        }
        if !negative.contains(&-1) {
            return Err(ContrastError::DegenerateBifurcation("negative"));
        }
        Ok(Self { positive, negative })
    }

    pub fn positive_part(&self) -> &[i8] {
        &self.positive
    }

    pub fn negative_part(&self) -> &[i8] {
        &self.negative
    }

    pub fn num_treatments(&self) -> usize {
        self.positive.len()
    }

    /// Positive plus negative part, i.e. the sign vector.
    pub fn signs(&self) -> Vec<i8> {
        self.positive
            .iter()
            .zip(&self.negative)
            .map(|(p, n)| p + n)
            .collect()
    }
}

/// Whether both part-vectors of `target` lie in the row space spanned by the
/// part-vectors of `basis`.
pub fn bifurcation_span_contains(
    basis: &[Bifurcation],
    target: &Bifurcation,
) -> Result<bool, ContrastError> {
    let t = target.num_treatments();
    if let Some(b) = basis.iter().find(|b| b.num_treatments() != t) {
        return Err(ContrastError::DimensionMismatch {
            expected: t,
            got: b.num_treatments(),
        });
    }
    let mut rows: Vec<Vec<i8>> = basis
        .iter()
        .flat_map(|b| [b.positive.clone(), b.negative.clone()])
        .collect();
    let before = exact_rank(&rows);
    rows.push(target.positive.clone());
    rows.push(target.negative.clone());
    Ok(exact_rank(&rows) == before)
}

/// Rank of an integer matrix by fraction-exact Gaussian elimination.
pub fn exact_rank(rows: &[Vec<i8>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|&v| BigRational::from_integer(BigInt::from(v)))
                .collect()
        })
        .collect();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = BigRational::one() / m[rank][col].clone();
        let pivot_row = m[rank].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != rank && !row[col].is_zero() {
                let factor = &row[col] * &inv;
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= &factor * p;
                }
            }
        }
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    rank
}

/// Rank of a real matrix with partial pivoting and absolute pivot tolerance.
pub fn float_rank(rows: &[Vec<f64>], pivot_tolerance: f64) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let ncols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        if rank == m.len() {
            break;
        }
        let (pivot, value) = (rank..m.len())
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if value <= pivot_tolerance {
            continue;
        }
        m.swap(rank, pivot);
        let pivot_row = m[rank].clone();
        for row in m.iter_mut().skip(rank + 1) {
            let factor = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= factor * p;
            }
        }
        rank += 1;
    }
    rank
}
