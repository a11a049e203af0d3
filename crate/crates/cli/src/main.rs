use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csps::balancing::{Estimator, SubclassMethod};
use csps::report;
use csps::simulation::parse_coefficient_file;
use csps::{
    empirical_csps, example, model_csps, parse_contrast_file, run_algorithm, run_experiment,
    AlgorithmConfig, BalanceError, Contrast, ContrastError, Dataset, EstimationError, FitOptions,
    Schema, SimulationConfig,
};

mod config;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Estimation(String),
    #[error("reproduced values differ from the expected example values")]
    Mismatch,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Mismatch => 1,
            CliError::Input(_) => 2,
            CliError::Estimation(_) => 3,
        }
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        match e {
            EstimationError::Contrast(_) => CliError::Input(e.to_string()),
            other => CliError::Estimation(other.to_string()),
        }
    }
}

impl From<BalanceError> for CliError {
    fn from(e: BalanceError) -> Self {
        match e {
            BalanceError::Contrast(_) | BalanceError::InvalidConfig(_) => {
                CliError::Input(e.to_string())
            }
            BalanceError::Estimation(inner) => inner.into(),
            other => CliError::Estimation(other.to_string()),
        }
    }
}

/// Contrast-specific propensity scores for multiple treatments.
#[derive(Debug, Parser)]
#[command(name = "csps", version)]
struct Cli {
    /// File of `key = value` lines supplying default flag values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reproduce the embedded 24-unit example; exits 1 on any mismatch.
    #[command(args_override_self = true)]
    Example,
    /// Estimate a score for each contrast in a contrast file.
    #[command(args_override_self = true)]
    Estimate(EstimateArgs),
    /// Run the balancing algorithm and report covariate balance per target.
    #[command(args_override_self = true)]
    Balance(BalanceArgs),
    /// Run the Monte Carlo experiment.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Both,
}

impl Format {
    fn text(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Text
    }
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Directory for output files.
    #[arg(long, env = "CSPS_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    data: PathBuf,

    /// Contrast file: one contrast per line, optional `# label`.
    #[arg(long)]
    contrasts: PathBuf,

    #[arg(long, default_value = "w")]
    treatment_column: String,

    #[arg(long, default_value = "logistic", value_parser = parse_estimator)]
    estimator: Estimator,

    /// Ridge penalty for logistic fits.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,

    /// Fit logistic models on standardized covariates.
    #[arg(long)]
    standardize: bool,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BalanceArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Target contrast file; defaults to the balancing contrasts.
    #[arg(long)]
    targets: Option<PathBuf>,

    /// Number of subclasses, or `exact` for one per distinct score.
    #[arg(short = 'S', long, default_value = "5", value_parser = parse_subclasses)]
    subclasses: SubclassMethod,

    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// `I`, `II`, or a coefficient file with one row per treatment.
    #[arg(long, default_value = "II")]
    mechanism: String,

    #[arg(short = 'N', long, default_value_t = 800)]
    units: usize,

    #[arg(short = 'R', long, default_value_t = 100)]
    replications: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(short = 'S', long, default_value = "5", value_parser = parse_subclasses)]
    subclasses: SubclassMethod,

    #[command(flatten)]
    output: OutputArgs,
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse()
}

fn parse_subclasses(s: &str) -> Result<SubclassMethod, String> {
    s.parse()
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {}", path.display(), e)))
}

fn load_contrasts(path: &Path) -> Result<Vec<Contrast>, CliError> {
    let contrasts = parse_contrast_file(&read_file(path)?).map_err(|(line, e)| {
        CliError::Input(format!("{}, line {}: {}", path.display(), line, e))
    })?;
    if contrasts.is_empty() {
        return Err(CliError::Input(format!("{}: no contrasts", path.display())));
    }
    Ok(contrasts)
}

fn check_lengths(contrasts: &[Contrast], t: usize) -> Result<(), CliError> {
    for c in contrasts {
        if c.num_treatments() != t {
            return Err(CliError::Input(
                ContrastError::DimensionMismatch {
                    expected: t,
                    got: c.num_treatments(),
                }
                .to_string()
                    + &format!(" (contrast {})", c.display_name()),
            ));
        }
    }
    Ok(())
}

fn load_data(args: &DataArgs, num_treatments: usize) -> Result<Dataset, CliError> {
    let schema = Schema {
        treatment_column: args.treatment_column.clone(),
        covariate_columns: None,
        num_treatments: Some(num_treatments),
    };
    let d = Dataset::load(&args.data, &schema).map_err(|e| CliError::Input(e.to_string()))?;
    for w in d.warnings() {
        eprintln!("warning: {}", w);
    }
    Ok(d)
}

fn fit_options(args: &DataArgs) -> Result<FitOptions, CliError> {
    if !(args.ridge >= 0.0 && args.ridge.is_finite()) {
        return Err(CliError::Input(format!(
            "ridge must be >= 0, got {}",
            args.ridge
        )));
    }
    Ok(FitOptions {
        ridge: args.ridge,
        standardize: args.standardize,
        ..FitOptions::default()
    })
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), contents))
        .map_err(|e| CliError::Input(format!("cannot write {}: {}", dir.join(name).display(), e)))
}

fn cmd_example() -> Result<(), CliError> {
    let r = example::reproduce()?;
    print!("{}", r.render());
    if r.is_exact_match() {
        Ok(())
    } else {
        Err(CliError::Mismatch)
    }
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let contrasts = load_contrasts(&args.data.contrasts)?;
    let t = contrasts[0].num_treatments();
    check_lengths(&contrasts, t)?;
    let d = load_data(&args.data, t)?;
    let options = fit_options(&args.data)?;
    let mut indicators = Vec::new();
    let mut scores = Vec::new();
    for c in &contrasts {
        indicators.push(
            c.indicators(d.treatments())
                .map_err(EstimationError::from)?,
        );
        let s = match args.data.estimator {
            Estimator::Empirical => empirical_csps(&d, c),
            Estimator::Logistic => model_csps(&d, c, &options),
        }
        .map_err(|e| match CliError::from(e) {
            CliError::Estimation(m) => {
                CliError::Estimation(format!("contrast {}: {}", c.display_name(), m))
            }
            other => other,
        })?;
        scores.push(s);
    }
    let out = &args.output;
    if out.format.text() {
        let text = report::estimate_text(&contrasts, &indicators, &scores);
        print!("{}", text);
        write_output(&out.output_dir, "estimates.txt", &text)?;
    }
    if out.format.csv() {
        let csv = report::estimate_csv(&contrasts, &indicators, &scores);
        write_output(&out.output_dir, "estimates.csv", &csv)?;
    }
    Ok(())
}

fn cmd_balance(args: &BalanceArgs) -> Result<(), CliError> {
    let balancing = load_contrasts(&args.data.contrasts)?;
    let targets = match &args.targets {
        Some(path) => load_contrasts(path)?,
        None => balancing.clone(),
    };
    let t = balancing[0].num_treatments();
    check_lengths(&balancing, t)?;
    check_lengths(&targets, t)?;
    let d = load_data(&args.data, t)?;
    let config = AlgorithmConfig {
        estimator: args.data.estimator,
        subclass: args.subclasses,
        fit: fit_options(&args.data)?,
    };
    let result = run_algorithm(&d, &balancing, &targets, &config);

    let out = &args.output;
    if out.format.text() {
        let text = report::balance_text(&result);
        print!("{}", text);
        write_output(&out.output_dir, "balance.txt", &text)?;
    }
    if out.format.csv() {
        write_output(
            &out.output_dir,
            "balance.csv",
            &report::balance_csv(&result),
        )?;
        let mut units = Vec::new();
        d.write_csv(
            &mut units,
            &args.data.treatment_column,
            &report::unit_columns(&result),
        )
        .map_err(|e| CliError::Input(e.to_string()))?;
        let units = String::from_utf8(units).expect("csv output is UTF-8");
        write_output(&out.output_dir, "units.csv", &units)?;
    }
    match result.first_error() {
        Some((target, e)) => Err(match CliError::from(e.clone()) {
            CliError::Estimation(m) => {
                CliError::Estimation(format!("target {}: {}", target.display_name(), m))
            }
            other => other,
        }),
        None => Ok(()),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut cfg = match args.mechanism.as_str() {
        "I" | "1" => SimulationConfig::mechanism_one(),
        "II" | "2" => SimulationConfig::mechanism_two(),
        path => {
            let text = read_file(Path::new(path))?;
            let coefficients = parse_coefficient_file(&text)
                .map_err(|e| CliError::Input(format!("{}: {}", path, e)))?;
            SimulationConfig::with_coefficients(coefficients)
        }
    };
    cfg.num_units = args.units;
    cfg.replications = args.replications;
    cfg.seed = args.seed;
    cfg.algorithm.subclass = args.subclasses;
    let result = run_experiment(&cfg).map_err(|e| CliError::Input(e.to_string()))?;

    let out = &args.output;
    if out.format.text() {
        let text = report::experiment_table(&result);
        print!("{}", text);
        write_output(&out.output_dir, "simulation_table.txt", &text)?;
    }
    if out.format.csv() {
        write_output(
            &out.output_dir,
            "simulation_replications.csv",
            &report::replication_csv(&result),
        )?;
    }
    if result.excluded > 0 {
        eprintln!(
            "warning: {} of {} replications excluded after estimation failures",
            result.excluded, cfg.replications
        );
    }
    if result.excluded == cfg.replications && cfg.replications > 0 {
        return Err(CliError::Estimation("every replication failed".into()));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Example => cmd_example(),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Balance(args) => cmd_balance(args),
        Command::Simulate(args) => cmd_simulate(args),
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::inject(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e);
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code())
        }
    }
}
