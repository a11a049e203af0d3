//! Text and CSV renderings. Text tables round to two decimals; CSV output
//! carries 17 significant digits. Both are produced from the same values.

use std::fmt::Write as _;

use crate::balancing::BalanceReport;
use crate::contrast::Contrast;
use crate::estimation::ScoreVector;
use crate::numeric::format_g17;
use crate::simulation::ExperimentResult;

/// Two-decimal presentation without a negative zero.
pub fn format_2dp(x: f64) -> String {
    let s = format!("{:.2}", x);
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn csv_line(fields: &[String]) -> String {
    let escaped: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    escaped.join(",") + "\n"
}

fn score_field(s: &ScoreVector, i: usize) -> String {
    s.get(i).map(format_g17).unwrap_or_default()
}

/// `unit, D_<c>..., csps_<c>...` with 1-based unit numbers.
pub fn estimate_csv(
    contrasts: &[Contrast],
    indicators: &[Vec<i8>],
    scores: &[ScoreVector],
) -> String {
    let mut out = String::new();
    let mut header = vec!["unit".to_string()];
    header.extend(contrasts.iter().map(|c| format!("D_{}", c.display_name())));
    header.extend(
        contrasts
            .iter()
            .map(|c| format!("csps_{}", c.display_name())),
    );
    out.push_str(&csv_line(&header));
    let n = scores.first().map_or(0, ScoreVector::len);
    for i in 0..n {
        let mut row = vec![(i + 1).to_string()];
        row.extend(indicators.iter().map(|d| d[i].to_string()));
        row.extend(scores.iter().map(|s| score_field(s, i)));
        out.push_str(&csv_line(&row));
    }
    out
}

/// Summary of an estimate run: per contrast, group sizes and score range.
pub fn estimate_text(
    contrasts: &[Contrast],
    indicators: &[Vec<i8>],
    scores: &[ScoreVector],
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>6} {:>6} {:>6} {:>8} {:>8} {:>9}",
        "contrast", "D=+1", "D=0", "D=-1", "min", "max", "undefined"
    );
    for ((c, d), s) in contrasts.iter().zip(indicators).zip(scores) {
        let count = |v: i8| d.iter().filter(|&&x| x == v).count();
        let defined: Vec<f64> = (0..s.len()).filter_map(|i| s.get(i)).collect();
        let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
        let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>6} {:>6} {:>8} {:>8} {:>9}",
            c.display_name(),
            count(1),
            count(0),
            count(-1),
            format_2dp(min),
            format_2dp(max),
            s.num_undefined()
        );
    }
    out
}

pub fn balance_text(report: &BalanceReport) -> String {
    let mut out = String::new();
    let names: Vec<String> = report
        .balancing
        .iter()
        .map(Contrast::display_name)
        .collect();
    let _ = writeln!(
        out,
        "balancing on: {}  (estimator {}, subclasses {})",
        names.join(", "),
        report.config.estimator,
        report.config.subclass
    );
    for outcome in &report.targets {
        let name = outcome.target.display_name();
        let t = match &outcome.result {
            Ok(t) => t,
            Err(e) => {
                let _ = writeln!(out, "\ntarget {}: ERROR {}", name, e);
                continue;
            }
        };
        let pooled = &t.differences.pooled;
        let _ = writeln!(
            out,
            "\ntarget {}: D=+1 n={}, D=-1 n={}, subclasses={}",
            name, pooled.n_positive, pooled.n_negative, t.subclasses.num_subclasses
        );
        let _ = writeln!(out, "{:<12} {:>8} {:>8}", "covariate", "before", "after");
        for (k, cov) in report.covariate_names.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<12} {:>8} {:>8}",
                cov,
                format_2dp(t.before[k]),
                format_2dp(t.after[k])
            );
        }
        let _ = writeln!(
            out,
            "{:>8} {:>15} {:>6} {:>6} {:>7}  difference",
            "subclass", "score range", "n+", "n-", "weight"
        );
        for row in &t.differences.subclasses {
            let diffs: Vec<String> = row
                .comparison
                .difference
                .iter()
                .map(|&v| format_2dp(v))
                .collect();
            let _ = writeln!(
                out,
                "{:>8} {:>15} {:>6} {:>6} {:>7}  ({})",
                row.label,
                format!(
                    "[{}, {}]",
                    format_2dp(row.score_min),
                    format_2dp(row.score_max)
                ),
                row.comparison.n_positive,
                row.comparison.n_negative,
                format_2dp(row.weight),
                diffs.join(", ")
            );
        }
    }
    out
}

pub const BALANCE_CSV_HEADER: &str =
    "target,row,subclass,covariate,before,after,mean_positive,mean_negative,n_positive,n_negative,weight,score_min,score_max,error";

/// One `summary` row per target and covariate, then one `subclass` row per
/// subclass and covariate. Failed targets get a single `error` row.
pub fn balance_csv(report: &BalanceReport) -> String {
    let mut out = String::from(BALANCE_CSV_HEADER);
    out.push('\n');
    for outcome in &report.targets {
        let name = outcome.target.display_name();
        let t = match &outcome.result {
            Ok(t) => t,
            Err(e) => {
                let mut row = vec![name, "error".into()];
                row.extend(std::iter::repeat_n(String::new(), 11));
                row.push(e.to_string());
                out.push_str(&csv_line(&row));
                continue;
            }
        };
        let pooled = &t.differences.pooled;
        for (k, cov) in report.covariate_names.iter().enumerate() {
            out.push_str(&csv_line(&[
                name.clone(),
                "summary".into(),
                String::new(),
                cov.clone(),
                format_g17(t.before[k]),
                format_g17(t.after[k]),
                format_g17(pooled.mean_positive[k]),
                format_g17(pooled.mean_negative[k]),
                pooled.n_positive.to_string(),
                pooled.n_negative.to_string(),
                "1".into(),
                String::new(),
                String::new(),
                String::new(),
            ]));
        }
        for row in &t.differences.subclasses {
            let c = &row.comparison;
            for (k, cov) in report.covariate_names.iter().enumerate() {
                out.push_str(&csv_line(&[
                    name.clone(),
                    "subclass".into(),
                    row.label.to_string(),
                    cov.clone(),
                    String::new(),
                    format_g17(c.difference[k]),
                    format_g17(c.mean_positive[k]),
                    format_g17(c.mean_negative[k]),
                    c.n_positive.to_string(),
                    c.n_negative.to_string(),
                    format_g17(row.weight),
                    format_g17(row.score_min),
                    format_g17(row.score_max),
                    String::new(),
                ]));
            }
        }
    }
    out
}

/// Per-unit columns appended to the dataset CSV by `balance`: balancing
/// scores, then chained score and subclass per target.
pub fn unit_columns(report: &BalanceReport) -> Vec<(String, Vec<String>)> {
    let mut columns = Vec::new();
    let Some((_, first)) = report.successes().next() else {
        return columns;
    };
    for (c, s) in report.balancing.iter().zip(&first.chained.balancing_scores) {
        columns.push((
            format!("csps_{}", c.display_name()),
            (0..s.len()).map(|i| score_field(s, i)).collect(),
        ));
    }
    for (target, t) in report.successes() {
        let name = target.display_name();
        let s = &t.chained.score;
        columns.push((
            format!("chained_{}", name),
            (0..s.len()).map(|i| score_field(s, i)).collect(),
        ));
        columns.push((
            format!("subclass_{}", name),
            t.subclasses
                .labels
                .iter()
                .map(|l| l.map(|v| v.to_string()).unwrap_or_default())
                .collect(),
        ));
    }
    columns
}

/// Table of averaged differences: one row per target, before and after
/// blocks of covariate columns.
pub fn experiment_table(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let k = result.covariate_names.len();
    let width = 7;
    let block = k * (width + 1);
    let _ = writeln!(
        out,
        "{:<12} {:<block$} {:<block$}",
        "contrast",
        "before balancing",
        "after balancing",
        block = block
    );
    let covs: String = result
        .covariate_names
        .iter()
        .map(|c| format!("{:>width$} ", c, width = width))
        .collect();
    let _ = writeln!(out, "{:<12} {}{}", "", covs, covs);
    for (t, name) in result.target_names.iter().enumerate() {
        let cells = |row: &[f64]| -> String {
            row.iter()
                .map(|&v| format!("{:>width$} ", format_2dp(v), width = width))
                .collect()
        };
        let _ = writeln!(
            out,
            "{:<12} {}{}",
            name,
            cells(&result.mean_before[t]),
            cells(&result.mean_after[t])
        );
    }
    let _ = writeln!(
        out,
        "replications: {} retained, {} excluded",
        result.replications.len() - result.excluded,
        result.excluded
    );
    out
}

pub const REPLICATION_CSV_HEADER: &str =
    "replication,target,covariate,before,after,num_subclasses,error";

pub fn replication_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(REPLICATION_CSV_HEADER);
    out.push('\n');
    for rep in &result.replications {
        match &rep.outcome {
            Ok(targets) => {
                for (t, diff) in targets.iter().enumerate() {
                    for (j, cov) in result.covariate_names.iter().enumerate() {
                        out.push_str(&csv_line(&[
                            rep.index.to_string(),
                            result.target_names[t].clone(),
                            cov.clone(),
                            format_g17(diff.before[j]),
                            format_g17(diff.after[j]),
                            diff.num_subclasses.to_string(),
                            String::new(),
                        ]));
                    }
                }
            }
            Err(e) => out.push_str(&csv_line(&[
                rep.index.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.clone(),
            ])),
        }
    }
    out
}
