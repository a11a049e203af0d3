//! The 24-unit, three-treatment artificial example and its reproduction.
//!
//! Four covariate cells of six units each. Balancing on the scores of
//! `(1/2, 1/2, -1)` and `(1, -1, 0)` exactly balances `(0, 1, -1)`, while
//! balancing on the `(1, -1, 0)` score alone leaves `(1/2, 1/2, -1)`
//! unbalanced.

use std::fmt::Write as _;

use num_rational::BigRational;

use crate::balancing::{
    balancing_scores, chain_scores, exact_mean_difference, subclassify, AlgorithmConfig,
    BalanceError, SubclassMethod,
};
use crate::contrast::Contrast;
use crate::dataset::{build_cell_index, Dataset};

const CELLS: [([f64; 3], [usize; 6]); 4] = [
    ([1.0, 1.0, 1.0], [1, 2, 3, 3, 3, 3]),
    ([1.0, 0.0, 1.0], [1, 1, 1, 2, 3, 3]),
    ([0.0, 1.0, 1.0], [1, 1, 2, 2, 2, 3]),
    ([0.0, 0.0, 0.0], [1, 1, 2, 2, 3, 3]),
];

/// Expected per-cell fractions, in cell order.
pub const EXPECTED_C1: [(i64, i64); 4] = [(1, 3), (2, 3), (5, 6), (2, 3)];
pub const EXPECTED_C2: [(i64, i64); 4] = [(1, 2), (3, 4), (2, 5), (1, 2)];
pub const EXPECTED_CHAINED: [(i64, i64); 4] = [(1, 5), (1, 3), (3, 4), (1, 2)];
pub const EXPECTED_SUBCLASS_LABELS: [usize; 4] = [1, 2, 3, 4];
/// Group means of `(1/2, 1/2, -1)` within the `c_2 = 1/2` subclass.
pub const EXPECTED_COUNTEREXAMPLE: [(i64, i64); 2] = [(1, 3), (2, 3)];

pub fn artificial_dataset() -> Dataset {
    let mut rows = Vec::with_capacity(24);
    let mut treatments = Vec::with_capacity(24);
    for (x, ws) in CELLS {
        for w in ws {
            rows.push(x.to_vec());
            treatments.push(w);
        }
    }
    Dataset::from_rows(&rows, treatments, 3).expect("embedded example is well formed")
}

pub fn lambda_one() -> Contrast {
    Contrast::from_ratios(&[(1, 2), (1, 2), (-1, 1)])
        .unwrap()
        .with_label("lambda1")
}

pub fn lambda_two() -> Contrast {
    Contrast::from_ratios(&[(1, 1), (-1, 1), (0, 1)])
        .unwrap()
        .with_label("lambda2")
}

pub fn lambda_three() -> Contrast {
    Contrast::from_ratios(&[(0, 1), (1, 1), (-1, 1)])
        .unwrap()
        .with_label("lambda3")
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub covariates: Vec<f64>,
    pub treatments: Vec<usize>,
    pub c1: BigRational,
    pub c2: BigRational,
    pub chained: BigRational,
    pub subclass: usize,
    /// Exact covariate means of `D_3 = +1` and `D_3 = -1` within the subclass.
    pub mean_positive: Vec<BigRational>,
    pub mean_negative: Vec<BigRational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleReproduction {
    pub cells: Vec<CellRow>,
    pub num_subclasses: usize,
    /// Exact differences per subclass for `(0, 1, -1)`.
    pub subclass_differences: Vec<Vec<BigRational>>,
    pub counterexample_positive: Vec<BigRational>,
    pub counterexample_negative: Vec<BigRational>,
    pub mismatches: Vec<String>,
}

impl ExampleReproduction {
    pub fn is_exact_match(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let fmt_vec = |v: &[BigRational]| {
            format!(
                "({})",
                v.iter()
                    .map(|r| r.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            )
        };
        let _ = writeln!(
            out,
            "Balancing on c1 (1/2,1/2,-1) and c2 (1,-1,0); target (0,1,-1)"
        );
        let _ = writeln!(
            out,
            "{:<10} {:<14} {:>5} {:>5} {:>8} {:>9} {:<10} {:<10}",
            "X", "W", "c1", "c2", "chained", "subclass", "D3=+1", "D3=-1"
        );
        for cell in &self.cells {
            let x = format!(
                "({})",
                cell.covariates
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            let w = cell
                .treatments
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                out,
                "{:<10} {:<14} {:>5} {:>5} {:>8} {:>9} {:<10} {:<10}",
                x,
                w,
                cell.c1.to_string(),
                cell.c2.to_string(),
                cell.chained.to_string(),
                cell.subclass,
                fmt_vec(&cell.mean_positive),
                fmt_vec(&cell.mean_negative)
            );
        }
        let _ = writeln!(out, "subclasses: {}", self.num_subclasses);
        for (s, diff) in self.subclass_differences.iter().enumerate() {
            let _ = writeln!(out, "subclass {} difference: {}", s + 1, fmt_vec(diff));
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Balancing on c2 alone; target (1/2,1/2,-1), subclass c2 = 1/2"
        );
        let _ = writeln!(
            out,
            "D1=+1 means {}  D1=-1 means {}",
            fmt_vec(&self.counterexample_positive),
            fmt_vec(&self.counterexample_negative)
        );
        if self.is_exact_match() {
            let _ = writeln!(out, "all values match");
        } else {
            for m in &self.mismatches {
                let _ = writeln!(out, "MISMATCH {}", m);
            }
        }
        out
    }
}

fn check<T: PartialEq + std::fmt::Display>(
    mismatches: &mut Vec<String>,
    what: &str,
    got: &T,
    want: &T,
) {
    if got != want {
        mismatches.push(format!("{}: got {}, expected {}", what, got, want));
    }
}

/// Runs both pipelines on the embedded data and compares every derived
/// value against the expected fractions.
pub fn reproduce() -> Result<ExampleReproduction, BalanceError> {
    let d = artificial_dataset();
    let config = AlgorithmConfig::exact();
    let index = build_cell_index(&d);

    let scores = balancing_scores(&d, &[lambda_one(), lambda_two()], &config)?;
    let chained = chain_scores(&d, &scores, &lambda_three(), &config)?;
    let subclasses = subclassify(
        &chained.score,
        &chained.indicators,
        SubclassMethod::ExactValues,
    )?;
    let exact = exact_mean_difference(&d, &lambda_three(), Some(&subclasses))?;

    let mut mismatches = Vec::new();
    let mut cells = Vec::new();
    for (k, cell) in index.cells().iter().enumerate() {
        let first = cell.units[0];
        let eligible = cell
            .units
            .iter()
            .copied()
            .find(|&i| chained.indicators[i] != 0)
            .unwrap_or(first);
        let subclass = subclasses.labels[eligible].unwrap_or(0);
        let (mean_positive, mean_negative) = exact
            .iter()
            .find(|e| e.label == subclass)
            .map(|e| (e.mean_positive.clone(), e.mean_negative.clone()))
            .unwrap_or_default();
        let row = CellRow {
            covariates: cell.key.clone(),
            treatments: cell.units.iter().map(|&i| d.treatments()[i]).collect(),
            c1: scores[0].exact_value(first).cloned().unwrap_or_default(),
            c2: scores[1].exact_value(first).cloned().unwrap_or_default(),
            chained: chained
                .score
                .exact_value(first)
                .cloned()
                .unwrap_or_default(),
            subclass,
            mean_positive,
            mean_negative,
        };
        let cell_name = format!("cell {}", k + 1);
        if let Some(&(p, q)) = EXPECTED_C1.get(k) {
            check(
                &mut mismatches,
                &format!("{} c1", cell_name),
                &row.c1,
                &ratio(p, q),
            );
        }
        if let Some(&(p, q)) = EXPECTED_C2.get(k) {
            check(
                &mut mismatches,
                &format!("{} c2", cell_name),
                &row.c2,
                &ratio(p, q),
            );
        }
        if let Some(&(p, q)) = EXPECTED_CHAINED.get(k) {
            check(
                &mut mismatches,
                &format!("{} chained score", cell_name),
                &row.chained,
                &ratio(p, q),
            );
        }
        if let Some(&label) = EXPECTED_SUBCLASS_LABELS.get(k) {
            check(
                &mut mismatches,
                &format!("{} subclass", cell_name),
                &row.subclass,
                &label,
            );
        }
        cells.push(row);
    }
    check(
        &mut mismatches,
        "number of cells",
        &cells.len(),
        &EXPECTED_C1.len(),
    );
    check(
        &mut mismatches,
        "number of subclasses",
        &subclasses.num_subclasses,
        &EXPECTED_SUBCLASS_LABELS.len(),
    );
    let subclass_differences: Vec<Vec<BigRational>> =
        exact[1..].iter().map(|e| e.difference.clone()).collect();
    for (s, diff) in subclass_differences.iter().enumerate() {
        for (k, v) in diff.iter().enumerate() {
            check(
                &mut mismatches,
                &format!("subclass {} difference x{}", s + 1, k + 1),
                v,
                &ratio(0, 1),
            );
        }
    }

    // c_2 alone, target (1/2, 1/2, -1)
    let only_c2 = balancing_scores(&d, &[lambda_two()], &config)?;
    let target = lambda_one();
    let indicators = target.indicators(d.treatments())?;
    let c2_subclasses = subclassify(&only_c2[0], &indicators, SubclassMethod::ExactValues)?;
    let half = ratio(1, 2);
    let half_label = (0..d.num_units())
        .find(|&i| indicators[i] != 0 && only_c2[0].exact_value(i) == Some(&half))
        .and_then(|i| c2_subclasses.labels[i]);
    let (counterexample_positive, counterexample_negative) = match half_label {
        Some(label) => {
            let exact = exact_mean_difference(&d, &target, Some(&c2_subclasses))?;
            let row = exact.into_iter().find(|e| e.label == label).unwrap();
            (row.mean_positive, row.mean_negative)
        }
        None => {
            mismatches.push("no subclass with c2 = 1/2".into());
            (Vec::new(), Vec::new())
        }
    };
    let [(pp, pq), (np, nq)] = EXPECTED_COUNTEREXAMPLE;
    for (k, (pos, neg)) in counterexample_positive
        .iter()
        .zip(&counterexample_negative)
        .enumerate()
    {
        check(
            &mut mismatches,
            &format!("counterexample D1=+1 mean x{}", k + 1),
            pos,
            &ratio(pp, pq),
        );
        check(
            &mut mismatches,
            &format!("counterexample D1=-1 mean x{}", k + 1),
            neg,
            &ratio(np, nq),
        );
    }

    Ok(ExampleReproduction {
        cells,
        num_subclasses: subclasses.num_subclasses,
        subclass_differences,
        counterexample_positive,
        counterexample_negative,
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduction_matches() {
        let r = reproduce().unwrap();
        assert!(r.is_exact_match(), "{:?}", r.mismatches);
        assert_eq!(r.num_subclasses, 4);
        let text = r.render();
        assert!(text.contains("all values match"));
        assert!(text.contains("1/5"));
    }

    #[test]
    fn dataset_shape() {
        let d = artificial_dataset();
        assert_eq!(
            (d.num_units(), d.num_covariates(), d.num_treatments()),
            (24, 3, 3)
        );
        assert_eq!(lambda_one().indicator(2), Ok(1));
    }
}
