use std::path::Path;
use std::process::{Command, Output};

use csps::example::{artificial_dataset, lambda_one, lambda_three, lambda_two};
use csps::{report, run_algorithm, AlgorithmConfig};

fn csps(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csps"))
        .args(args)
        .current_dir(dir)
        .env_remove("CSPS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_example_inputs(dir: &Path) {
    let mut data = Vec::new();
    artificial_dataset().write_csv(&mut data, "w", &[]).unwrap();
    std::fs::write(dir.join("data.csv"), data).unwrap();
    std::fs::write(
        dir.join("contrasts.txt"),
        "1/2 1/2 -1 # lambda1\n1 -1 0 # lambda2\n",
    )
    .unwrap();
    std::fs::write(dir.join("targets.txt"), "0 1 -1 # lambda3\n").unwrap();
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn example_matches_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = csps(&["example"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("all values match"));
    assert!(stdout.contains("(1/3,1/3,1/3)"));
}

#[test]
fn file_driven_balance_equals_embedded_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    write_example_inputs(dir.path());
    let out = csps(
        &[
            "balance",
            "--data",
            "data.csv",
            "--contrasts",
            "contrasts.txt",
            "--targets",
            "targets.txt",
            "--estimator",
            "empirical",
            "-S",
            "exact",
            "--output-dir",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let expected = run_algorithm(
        &artificial_dataset(),
        &[lambda_one(), lambda_two()],
        &[lambda_three()],
        &AlgorithmConfig::exact(),
    );
    assert_eq!(
        read(dir.path().join("out/balance.csv")),
        report::balance_csv(&expected)
    );
    assert_eq!(
        read(dir.path().join("out/balance.txt")),
        report::balance_text(&expected)
    );
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        report::balance_text(&expected)
    );
    let units = read(dir.path().join("out/units.csv"));
    assert!(units
        .starts_with("x1,x2,x3,w,csps_lambda1,csps_lambda2,chained_lambda3,subclass_lambda3\n"));
    assert_eq!(units.lines().count(), 25);
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = csps(
            &[
                "simulate",
                "--mechanism",
                "II",
                "--seed",
                "7",
                "-R",
                "20",
                "--output-dir",
                run,
            ],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
    }
    for file in ["simulation_table.txt", "simulation_replications.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{} differs", file);
    }
}

#[test]
fn non_zero_sum_contrast_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    write_example_inputs(dir.path());
    std::fs::write(dir.path().join("bad.txt"), "1 1 -1\n").unwrap();
    let out = csps(
        &["estimate", "--data", "data.csv", "--contrasts", "bad.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("must sum to zero"), "{}", stderr);
    assert!(!dir.path().join("estimates.csv").exists());
}

#[test]
fn estimate_writes_scores_for_each_contrast() {
    let dir = tempfile::tempdir().unwrap();
    write_example_inputs(dir.path());
    let out = csps(
        &[
            "estimate",
            "--data",
            "data.csv",
            "--contrasts",
            "contrasts.txt",
            "--estimator",
            "empirical",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let csv = read(dir.path().join("estimates.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("unit,D_lambda1,D_lambda2,csps_lambda1,csps_lambda2")
    );
    assert_eq!(lines.next(), Some("1,1,1,0.33333333333333331,0.5"));
    assert!(!dir.path().join("estimates.txt").exists());
}

#[test]
fn estimation_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // x perfectly separates treatment 1 from treatment 2
    std::fs::write(dir.path().join("sep.csv"), "x,w\n0,1\n1,1\n2,2\n3,2\n").unwrap();
    std::fs::write(dir.path().join("c.txt"), "1 -1\n").unwrap();
    let out = csps(
        &["estimate", "--data", "sep.csv", "--contrasts", "c.txt"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8(out.stderr).unwrap().contains("contrast"));
}

#[test]
fn missing_data_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_example_inputs(dir.path());
    let out = csps(
        &[
            "balance",
            "--data",
            "nope.csv",
            "--contrasts",
            "contrasts.txt",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.cfg"),
        "mechanism = I\nseed = 3\nreplications = 4\nformat = csv\n",
    )
    .unwrap();
    let base = ["simulate", "-N", "200", "--output-dir"];
    let via_config = csps(
        &[&base[..], &["cfg", "--config", "run.cfg"]].concat(),
        dir.path(),
    );
    let via_flags = csps(
        &[
            &base[..],
            &[
                "flags",
                "--mechanism",
                "I",
                "--seed",
                "3",
                "-R",
                "4",
                "--format",
                "csv",
            ],
        ]
        .concat(),
        dir.path(),
    );
    assert_eq!(via_config.status.code(), Some(0));
    assert_eq!(via_flags.status.code(), Some(0));
    let a = read(dir.path().join("cfg/simulation_replications.csv"));
    assert_eq!(
        a,
        read(dir.path().join("flags/simulation_replications.csv"))
    );
    assert_eq!(a.lines().filter(|l| l.starts_with("3,")).count(), 12);

    let overridden = csps(
        &[&base[..], &["over", "--config", "run.cfg", "--seed", "5"]].concat(),
        dir.path(),
    );
    assert_eq!(overridden.status.code(), Some(0));
    assert_ne!(a, read(dir.path().join("over/simulation_replications.csv")));
}

#[test]
fn output_directory_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_csps"))
        .args(["simulate", "--mechanism", "I", "-R", "2", "-N", "100"])
        .current_dir(dir.path())
        .env("CSPS_OUTPUT_DIR", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("env-out/simulation_table.txt").exists());
}
