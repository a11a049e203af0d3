use csps::example::{artificial_dataset, lambda_one, lambda_two};
use csps::*;
use nalgebra::DMatrix;

#[test]
fn multinomial_recovers_mechanism_two_coefficients() {
    let mut cfg = SimulationConfig::mechanism_two();
    cfg.num_units = 100_000;
    cfg.seed = 11;
    let d = sample_dataset(&cfg, 0);
    let x = DMatrix::from_row_slice(d.num_units(), d.num_covariates(), d.covariate_values());
    let model = fit_multinomial_logistic(&x, d.treatments(), 3, 1, &FitOptions::default()).unwrap();
    assert!(model.converged);
    for t in 1..3 {
        assert!(model.coefficients[t][0].abs() < 0.05, "intercept {}", t);
        for (k, &b) in cfg.coefficients[t].iter().enumerate() {
            let got = model.coefficients[t][k + 1];
            assert!(
                (got - b).abs() < 0.05,
                "class {} x{}: {} vs {}",
                t + 1,
                k + 1,
                got,
                b
            );
        }
    }
}

#[test]
fn randomized_scores_are_flat() {
    let mut cfg = SimulationConfig::mechanism_one();
    cfg.num_units = 20_000;
    cfg.seed = 3;
    let d = sample_dataset(&cfg, 0);
    let x = DMatrix::from_row_slice(d.num_units(), d.num_covariates(), d.covariate_values());
    for c in cfg.targets.iter() {
        let ind = c.indicators(d.treatments()).unwrap();
        let rows: Vec<usize> = (0..d.num_units()).filter(|&i| ind[i] != 0).collect();
        let labels: Vec<bool> = rows.iter().map(|&i| ind[i] > 0).collect();
        let model =
            fit_binary_logistic(&x.select_rows(rows.iter()), &labels, &FitOptions::default())
                .unwrap();
        for b in &model.coefficients[1..] {
            assert!(b.abs() < 0.1, "{}: slope {}", c.display_name(), b);
        }
    }
}

#[test]
fn chained_logistic_score_matches_direct_refit() {
    let mut cfg = SimulationConfig::mechanism_two();
    cfg.seed = 5;
    let d = sample_dataset(&cfg, 0);
    let chained = chained_propensity(
        &d,
        &cfg.balancing,
        &cfg.targets[3],
        &AlgorithmConfig::default(),
    )
    .unwrap();
    assert!(chained.score.values.iter().all(|&v| v > 0.0 && v < 1.0));

    // refit on the balancing-score columns by hand
    let n = d.num_units();
    let mut cols = Vec::with_capacity(2 * n);
    for i in 0..n {
        cols.push(chained.balancing_scores[0].values[i]);
        cols.push(chained.balancing_scores[1].values[i]);
    }
    let x = DMatrix::from_row_slice(n, 2, &cols);
    let rows: Vec<usize> = (0..n).filter(|&i| chained.indicators[i] != 0).collect();
    let labels: Vec<bool> = rows.iter().map(|&i| chained.indicators[i] > 0).collect();
    let model =
        fit_binary_logistic(&x.select_rows(rows.iter()), &labels, &FitOptions::default()).unwrap();
    for i in 0..n {
        let p = model.predict(&[cols[2 * i], cols[2 * i + 1]]).unwrap();
        assert!((p - chained.score.values[i]).abs() < 1e-9);
    }
}

#[test]
fn empirical_scores_on_embedded_example() {
    let d = artificial_dataset();
    let c1 = empirical_csps(&d, &lambda_one()).unwrap();
    let c2 = empirical_csps(&d, &lambda_two()).unwrap();
    assert_eq!(c1.num_undefined(), 0);
    assert_eq!(c2.num_undefined(), 0);
    assert!((c1.values[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((c2.values[23] - 0.5).abs() < 1e-15);
}
