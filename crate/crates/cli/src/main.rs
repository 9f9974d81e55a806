use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use popcorr::commands::{
    run_decompose, run_scan, run_simulate, run_test, BoundSpec, DecomposeOptions, ScanOptions, SigmaSpec,
    SimulateOptions, TestOptions,
};
use popcorr::config::{apply_override, load_config};
use popcorr::inference::DofConvention;
use popcorr::scan::{median_rel_err, DEFAULT_BINS};
use popcorr::{Error, Result, SimulationConfig};

/// Environment variable that fixes the number of worker threads.
const THREADS_VAR: &str = "POPCORR_THREADS";

#[derive(Parser)]
#[command(
    name = "popcorr",
    version,
    about = "Principal-component corrected association estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo comparison of the PSC and CPC estimators.
    Simulate(SimulateArgs),
    /// Fit both estimators for every column of a matrix.
    Scan(ScanArgs),
    /// Bias-aware test of H0: beta_j = 0 with the CPC estimator.
    Test(TestArgs),
    /// Singular values and alignments of one column.
    Decompose(DecomposeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// `key = value` config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set replicates=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write an SVG plot per scenario.
    #[arg(long)]
    svg: bool,
    /// Also write replicate 1's design, coefficients and response per scenario.
    #[arg(long)]
    dump_design: bool,
}

#[derive(Args)]
struct InputArgs {
    /// Numeric CSV, rows are samples and columns covariates.
    #[arg(long)]
    matrix: PathBuf,
    /// Input CSV files start with a header line.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Single-column response CSV.
    #[arg(long)]
    response: PathBuf,
    #[arg(long, short, default_value_t = 10)]
    k: usize,
    /// Relative-error thresholds to count exceedances for.
    #[arg(long = "threshold", default_values_t = [0.5, 1.0])]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    response: PathBuf,
    /// Tested column, 1-based.
    #[arg(long, short = 'j', default_value_t = 1)]
    target: usize,
    #[arg(long, short)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Upper bound B on the l1 norm of the omitted component coefficients.
    #[arg(long, conflicts_with = "beta", required_unless_present = "beta")]
    bound: Option<f64>,
    /// True coefficient vector (single-column CSV) to compute the bound from.
    #[arg(long)]
    beta: Option<PathBuf>,
    /// Known noise standard deviation.
    #[arg(long, conflicts_with = "estimate_sigma", required_unless_present = "estimate_sigma")]
    sigma: Option<f64>,
    /// Estimate sigma from the CPC residuals and use a Student t quantile.
    #[arg(long)]
    estimate_sigma: bool,
    /// Degrees of freedom for the t quantile: `n-1` or `n-k-1`.
    #[arg(long, default_value = "n-1")]
    dof: String,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Column whose alignments are reported, 1-based.
    #[arg(long, short = 'j', default_value_t = 1)]
    target: usize,
    /// Column to remove before decomposing, 1-based.
    #[arg(long)]
    exclude: Option<usize>,
    #[arg(long, short)]
    out: PathBuf,
}

fn zero_based(name: &str, j: usize) -> Result<usize> {
    j.checked_sub(1)
        .ok_or_else(|| Error::Usage(format!("--{name} is 1-based, got 0")))
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Usage(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Usage(format!("cannot configure thread pool: {e}")))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => SimulationConfig::default(),
    };
    for assignment in &args.overrides {
        apply_override(&mut config, assignment)?;
    }
    let opts = SimulateOptions {
        config,
        out_dir: args.out,
        svg: args.svg,
        dump_design: args.dump_design,
        config_path: args.config,
    };
    let report = run_simulate(&opts)?;
    println!("scenario\tmethod\tk\tmean\tsd\tn_fail");
    for c in &report.cells {
        println!(
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{}",
            c.scenario, c.method, c.k, c.mean, c.sd, c.n_fail
        );
    }
    println!("wrote {}", opts.out_dir.display());
    Ok(())
}

fn scan(args: ScanArgs) -> Result<()> {
    let opts = ScanOptions {
        matrix: args.input.matrix,
        response: args.response,
        has_header: args.input.header,
        k: args.k,
        thresholds: args.thresholds,
        bins: args.bins,
        out_dir: args.out,
    };
    let (out, summary) = run_scan(&opts)?;
    println!("covariates: {}", out.records.len());
    println!("k: {}", out.k);
    for (t, count) in &summary.exceedances {
        println!("rel_err > {t}: {count}");
    }
    println!("rel_err undefined: {}", summary.undefined);
    if let Some(m) = median_rel_err(&out.records) {
        println!("median rel_err: {m:.6}");
    }
    println!("wrote {}", opts.out_dir.display());
    Ok(())
}

fn test(args: TestArgs) -> Result<()> {
    let dof = DofConvention::parse(&args.dof)
        .ok_or_else(|| Error::Usage(format!("--dof must be `n-1` or `n-k-1`, got `{}`", args.dof)))?;
    let bound = match (args.bound, args.beta) {
        (Some(b), _) => BoundSpec::Bound(b),
        (None, Some(path)) => BoundSpec::Beta(path),
        (None, None) => return Err(Error::Usage("one of --bound or --beta is required".into())),
    };
    let sigma = match args.sigma {
        Some(s) => SigmaSpec::Known(s),
        None => SigmaSpec::Estimate,
    };
    let opts = TestOptions {
        matrix: args.input.matrix,
        response: args.response,
        has_header: args.input.header,
        target: zero_based("target", args.target)?,
        k: args.k,
        level: args.level,
        bound,
        sigma,
        dof,
        out_dir: args.out,
    };
    let report = run_test(&opts)?;
    let o = &report.outcome;
    println!("alpha_hat: {:.10e}", o.alpha_hat);
    println!("N: {:.10e} ({})", o.numerator, report.bound.source.as_str());
    println!("D: {:.10e}", o.denominator);
    println!(
        "sigma: {:.6}{}",
        o.sigma,
        if o.sigma_estimated { " (estimated)" } else { "" }
    );
    println!("quantile: {} = {:.6}", o.family, o.quantile);
    println!("interval: [{:.10e}, {:.10e}]", o.interval.0, o.interval.1);
    println!("decision: {}", if o.reject { "reject" } else { "accept" });
    Ok(())
}

fn decompose(args: DecomposeArgs) -> Result<()> {
    let opts = DecomposeOptions {
        matrix: args.input.matrix,
        has_header: args.input.header,
        target: zero_based("target", args.target)?,
        exclude: args.exclude.map(|j| zero_based("exclude", j)).transpose()?,
        out_dir: args.out,
    };
    let spectrum = run_decompose(&opts)?;
    println!("component\tsingular_value\talignment");
    for (s, (sv, c)) in spectrum
        .singular_values
        .iter()
        .zip(spectrum.alignments.iter())
        .enumerate()
    {
        println!("{}\t{sv:.6}\t{c:.6}", s + 1);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Scan(a) => scan(a),
        Command::Test(a) => test(a),
        Command::Decompose(a) => decompose(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
