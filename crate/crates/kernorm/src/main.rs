use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kernorm::config::{parse_grid, DataSource, ExperimentConfig, MethodKind};
use kernorm::data::{load_csv, CsvOptions};
use kernorm::error::{HarnessError, Result};
use kernorm::oracle::{run_suite, SUITES};
use kernorm::report::{emit_report, Format};
use kernorm::run_experiment;
use kernorm_core::baselines::{
    energy_test, hz_test, lmmda_test, random_projection_test, Calibration, DirectionLaw, EnergyNorm,
    EuclideanProjections, KernelProjections, LmmdaConfig, ProjectionConfig,
};
use kernorm_core::kernel::KernelSpec;
use kernorm_core::lmmd::{run_test, LmmdConfig};
use kernorm_core::null::{estimate_null_from_sample, CovarianceSpec};
use kernorm_core::synthetic::GaussianSpec;

/// Kernel normality tests and the experiments that compare them.
#[derive(Parser)]
#[command(name = "kernorm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "KERNORM_WORKERS")]
    workers: Option<usize>,

    /// Test level.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Monte-Carlo replicates for the quantile.
    #[arg(long = "B", global = true)]
    b: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one test on a CSV dataset.
    Test(TestArgs),
    /// Run an experiment preset or configuration file.
    Experiment(ExperimentArgs),
    /// Run the brute-force validation suites.
    Oracle(OracleArgs),
    /// Print the version.
    Version,
}

#[derive(Args)]
struct DataArgs {
    /// Name (or 0-based index) of the label column.
    #[arg(long)]
    label_column: Option<String>,
    /// Keep only rows with these labels (comma separated).
    #[arg(long, value_delimiter = ',')]
    keep_labels: Option<Vec<String>>,
    /// Multiply every feature.
    #[arg(long)]
    scale: Option<f64>,
}

impl DataArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            label_column: self.label_column.clone(),
            keep_labels: self.keep_labels.clone(),
            scale: self.scale,
        }
    }
}

#[derive(Args)]
struct TestArgs {
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    csv: DataArgs,
    /// lmmd, lmmda, rp, hz or ed.
    #[arg(long, default_value = "lmmd")]
    method: String,
    /// `linear` or `gaussian`.
    #[arg(long, default_value = "linear")]
    kernel: String,
    /// Gaussian kernel parameter in exp(-σ²‖x − y‖²).
    #[arg(long, default_value_t = 1e-4)]
    sigma_sq: f64,
    /// Null covariance scale λ of N(0, λ·diag(1, 1/4, …)); the null is
    /// estimated from the data when omitted.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset name or path to a configuration file.
    preset: String,
    /// Restore the published replicate counts and grids.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    replicates: Option<usize>,
    /// Sample sizes: `100,200` or `100:500:100`.
    #[arg(long)]
    n_grid: Option<String>,
    /// Dataset for experiments that use one.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    csv: DataArgs,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Comma-separated subset of csv,svg.
    #[arg(long, default_value = "csv,svg")]
    format: String,
    /// Record wall-clock times.
    #[arg(long, overrides_with = "no_timing")]
    timing: bool,
    /// Write NA instead of times, for byte-stable output.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Suite to run; all of them when omitted.
    #[arg(long)]
    suite: Option<String>,
}

fn global_pool(workers: Option<usize>) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build_global()
        .map_err(|e| HarnessError::Config(format!("cannot start workers: {e}")))
}

fn kernel(args: &TestArgs) -> Result<KernelSpec> {
    match args.kernel.as_str() {
        "linear" => Ok(KernelSpec::Linear),
        "gaussian" => Ok(KernelSpec::gaussian(args.sigma_sq)?),
        other => Err(HarnessError::Config(format!("unknown kernel '{other}'"))),
    }
}

fn test(cli: &Cli, args: &TestArgs) -> Result<()> {
    global_pool(cli.workers)?;
    let x = load_csv(&args.data, &args.csv.options())?;
    let kernel = kernel(args)?;
    let method = MethodKind::parse(&args.method)?;
    let alpha = cli.alpha.unwrap_or(0.05);
    let b = cli.b.unwrap_or(250);
    let seed = cli.seed.unwrap_or(0);
    let known = match args.lambda {
        Some(lambda) if kernel == KernelSpec::Linear => Some(GaussianSpec::new(0.0, lambda, x.dim())?),
        Some(_) => return Err(HarnessError::Config("--lambda needs the linear kernel".into())),
        None => None,
    };
    let cov = match &known {
        Some(spec) => CovarianceSpec::diagonal(spec.variances())?,
        None => estimate_null_from_sample(&kernel, &x)?,
    };
    let calibration = Calibration {
        alpha,
        replicates: b,
        seed,
        parallel: true,
    };
    let (statistic, threshold, reject) = match method {
        MethodKind::Lmmd => {
            let config = LmmdConfig {
                alpha,
                replicates: b,
                seed,
                ..LmmdConfig::default()
            };
            let r = run_test(&x, &kernel, &cov, &config)?;
            (r.statistic, r.threshold, r.reject)
        }
        MethodKind::Lmmda => {
            let config = LmmdaConfig {
                alpha,
                draws: b,
                seed,
                ..LmmdaConfig::default()
            };
            let r = lmmda_test(&x, &kernel, &cov, &config)?;
            (r.statistic, r.threshold, r.reject)
        }
        MethodKind::RandomProjection => {
            let config = ProjectionConfig {
                alpha,
                seed,
                ..ProjectionConfig::default()
            };
            let r = match (&kernel, &known) {
                (KernelSpec::Linear, Some(spec)) => random_projection_test(
                    &EuclideanProjections::diagonal_null(
                        &x,
                        DirectionLaw::DecayingDiagonal,
                        vec![0.0; x.dim()],
                        &spec.variances(),
                    )?,
                    &config,
                )?,
                (KernelSpec::Linear, None) => random_projection_test(
                    &EuclideanProjections::empirical_null(&x, DirectionLaw::DecayingDiagonal)?,
                    &config,
                )?,
                (k, _) => random_projection_test(&KernelProjections::new(k, &x)?, &config)?,
            };
            (r.statistic, r.threshold, r.reject)
        }
        MethodKind::HenzeZirkler => {
            let r = hz_test(&x, &calibration)?;
            (r.statistic, r.threshold, r.reject)
        }
        MethodKind::EnergyDistance => {
            let r = energy_test(&x, 1000, EnergyNorm::Euclidean, &calibration)?;
            (r.statistic, r.threshold, r.reject)
        }
    };
    println!("method = {}", method.name());
    println!("n = {}", x.n());
    println!("d = {}", x.dim());
    println!("statistic = {statistic}");
    println!("threshold = {threshold}");
    println!("reject = {reject}");
    println!("seed = {seed}");
    Ok(())
}

fn experiment(cli: &Cli, args: &ExperimentArgs) -> Result<()> {
    let mut config = if kernorm::config::PRESETS.iter().any(|(n, _)| *n == args.preset) {
        ExperimentConfig::preset(&args.preset, args.paper_scale)?
    } else {
        let path = PathBuf::from(&args.preset);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            HarnessError::Config(format!(
                "'{}' is neither a preset nor a readable file: {e}",
                args.preset
            ))
        })?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
        ExperimentConfig::parse(name, &text, args.paper_scale)?
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.workers.is_some() {
        config.workers = cli.workers;
    }
    if let Some(alpha) = cli.alpha {
        config.alpha = alpha;
    }
    if let Some(b) = cli.b {
        config.b_grid = vec![b];
    }
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    if let Some(grid) = &args.n_grid {
        config.n_grid = parse_grid("--n-grid", grid)?;
    }
    if let Some(path) = &args.data {
        let options = args.csv.options();
        config.data = DataSource {
            path: Some(path.clone()),
            options: CsvOptions {
                label_column: options.label_column.or(config.data.options.label_column),
                keep_labels: options.keep_labels.or(config.data.options.keep_labels),
                scale: options.scale.or(config.data.options.scale),
            },
        };
    }
    if args.timing {
        config.timing = true;
    }
    if args.no_timing {
        config.timing = false;
    }
    let formats = Format::parse_list(&args.format)?;
    let rows = run_experiment(&config)?;
    for path in emit_report(&rows, &args.out, &formats, &config.name)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn oracle(cli: &Cli, args: &OracleArgs) -> Result<bool> {
    global_pool(cli.workers)?;
    let seed = cli.seed.unwrap_or(20_160_101);
    let suites: Vec<&str> = match &args.suite {
        Some(s) => vec![s.as_str()],
        None => SUITES.to_vec(),
    };
    let mut all = true;
    for suite in suites {
        let outcome = run_suite(suite, seed)?;
        all &= outcome.passed;
        println!(
            "{} {}: {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            outcome.suite,
            outcome.detail
        );
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Test(args) => test(&cli, args).map(|_| true),
        Command::Experiment(args) => experiment(&cli, args).map(|_| true),
        Command::Oracle(args) => oracle(&cli, args),
        Command::Version => {
            println!("kernorm {}", env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
