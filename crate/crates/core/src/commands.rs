//! End-to-end runs behind the command-line subcommands. Each writes its CSV
//! outputs and a manifest into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::config::snapshot;
use crate::error::{Error, Result};
use crate::estimators::{basis_for, fit_with_basis, gamma_truth_cpc, Method};
use crate::inference::{
    compute_nd_with_basis, estimate_sigma, gamma_tail_l1, test_h0, BiasBound, BoundSource, DofConvention, Sigma,
    TestOutcome,
};
use crate::io::{fmt_f64, fmt_opt, load_matrix_csv, load_vector_csv, write_csv};
use crate::linalg::{thin_svd, GenotypeMatrix, DEFAULT_COND_TOL};
use crate::manifest::RunManifest;
use crate::plot::{band_plot_svg, Series};
use crate::scan::{scan_all, summarize_scan, ScanOutput, ScanSummary};
use crate::simulation::{
    first_replicate, monte_carlo_run, replicate_seed, scenario_base_seed, simulate_response, stream_rng, Scenario,
    SimulationConfig, SimulationReport, Stream,
};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_standardized(path: &Path, has_header: bool) -> Result<GenotypeMatrix> {
    GenotypeMatrix::center_normalize(&load_matrix_csv(path, has_header)?)
}

fn load_centered_response(path: &Path, has_header: bool, n: usize) -> Result<DVector<f64>> {
    let y = load_vector_csv(path, has_header)?;
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {n} rows but response has {} entries",
            y.len()
        )));
    }
    let mean = y.mean();
    Ok(y.map(|v| v - mean))
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub config: SimulationConfig,
    pub out_dir: PathBuf,
    pub svg: bool,
    /// Also write replicate 0's standardized design, coefficients and response.
    pub dump_design: bool,
    /// Config file the run was read from, digested into the manifest.
    pub config_path: Option<PathBuf>,
}

pub fn run_simulate(opts: &SimulateOptions) -> Result<SimulationReport> {
    let config = &opts.config;
    let report = monte_carlo_run(config)?;
    ensure_dir(&opts.out_dir)?;
    let mut outputs = Vec::new();

    let estimates = report.estimates.iter().map(|e| {
        vec![
            e.scenario.to_string(),
            e.method.to_string(),
            e.k.to_string(),
            (e.replicate + 1).to_string(),
            fmt_opt(e.alpha_hat),
            e.flag.as_str().to_string(),
        ]
    });
    write_csv(
        &opts.out_dir.join("estimates.csv"),
        &["scenario", "method", "k", "replicate", "alpha_hat", "flag"],
        estimates,
    )?;
    outputs.push("estimates.csv".to_string());

    let summary = report.cells.iter().map(|c| {
        vec![
            c.scenario.to_string(),
            c.method.to_string(),
            c.k.to_string(),
            fmt_f64(c.mean),
            fmt_f64(c.sd),
            fmt_f64(c.theo_bias),
            fmt_f64(c.theo_var),
            c.n_fail.to_string(),
        ]
    });
    write_csv(
        &opts.out_dir.join("summary.csv"),
        &[
            "scenario",
            "method",
            "k",
            "mean",
            "sd",
            "theo_bias",
            "theo_var",
            "n_fail",
        ],
        summary,
    )?;
    outputs.push("summary.csv".to_string());

    for &scenario in &config.scenarios {
        let band = |method: Method| -> Vec<(f64, f64, f64)> {
            config
                .k_values()
                .map(|k| {
                    let c = report.cell(scenario, method, k).expect("every cell is summarized");
                    (k as f64, c.mean, c.sd)
                })
                .collect()
        };
        let (cpc, psc) = (band(Method::Cpc), band(Method::Psc));
        let rows = cpc.iter().zip(&psc).map(|(c, p)| {
            vec![
                (c.0 as usize).to_string(),
                fmt_f64(c.1),
                fmt_f64(c.1 - c.2),
                fmt_f64(c.1 + c.2),
                fmt_f64(p.1),
                fmt_f64(p.1 - p.2),
                fmt_f64(p.1 + p.2),
            ]
        });
        let name = format!("plot_{scenario}.csv");
        write_csv(
            &opts.out_dir.join(&name),
            &[
                "k",
                "cpc_mean",
                "cpc_lower",
                "cpc_upper",
                "psc_mean",
                "psc_lower",
                "psc_upper",
            ],
            rows,
        )?;
        outputs.push(name);

        if opts.svg {
            let series = [
                Series {
                    label: "CPC",
                    color: "steelblue",
                    points: cpc,
                },
                Series {
                    label: "PSC",
                    color: "firebrick",
                    points: psc,
                },
            ];
            let svg = band_plot_svg(
                &format!("Estimates of beta_1, {scenario} scenario"),
                "k",
                Some(1.0),
                &series,
            );
            let name = format!("plot_{scenario}.svg");
            let path = opts.out_dir.join(&name);
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            outputs.push(name);
        }

        if opts.dump_design {
            outputs.extend(dump_design(config, scenario, &opts.out_dir)?);
        }
    }

    let mut manifest = RunManifest::new("simulate");
    if let Some(path) = &opts.config_path {
        manifest = manifest.with_input(path)?;
    }
    manifest.seed = Some(config.seed);
    manifest.config = snapshot(config);
    manifest.outputs = outputs;
    manifest.write(&opts.out_dir)?;
    Ok(report)
}

/// Writes `design_<s>.csv` (unit-norm columns), `beta_<s>.csv` on the same
/// scale, and `response_<s>.csv` for replicate 0 of a scenario.
fn dump_design(config: &SimulationConfig, scenario: Scenario, dir: &Path) -> Result<Vec<String>> {
    let rep = first_replicate(config, scenario)?;
    let scale = (config.n as f64).sqrt();
    // same noise draw as replicate 0 of the Monte Carlo run
    let seed0 = replicate_seed(scenario_base_seed(config.seed, scenario), 0);
    let mut noise = stream_rng(seed0, Stream::Noise);
    let y = simulate_response(&rep.design, &rep.beta, config.sigma, &mut noise);

    let x = rep.design.values();
    let design_rows = x.row_iter().map(|r| r.iter().map(|v| fmt_f64(v / scale)).collect());
    let header: Vec<String> = (1..=config.p).map(|j| format!("x{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let names = [
        format!("design_{scenario}.csv"),
        format!("beta_{scenario}.csv"),
        format!("response_{scenario}.csv"),
    ];
    write_csv(&dir.join(&names[0]), &header, design_rows)?;
    write_csv(
        &dir.join(&names[1]),
        &["beta"],
        rep.beta.iter().map(|b| vec![fmt_f64(b * scale)]),
    )?;
    write_csv(&dir.join(&names[2]), &["y"], y.iter().map(|v| vec![fmt_f64(*v)]))?;
    Ok(names.to_vec())
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub matrix: PathBuf,
    pub response: PathBuf,
    pub has_header: bool,
    pub k: usize,
    pub thresholds: Vec<f64>,
    pub bins: usize,
    pub out_dir: PathBuf,
}

pub fn run_scan(opts: &ScanOptions) -> Result<(ScanOutput, ScanSummary)> {
    let x = load_standardized(&opts.matrix, opts.has_header)?;
    let y = load_centered_response(&opts.response, opts.has_header, x.nrows())?;
    let out = scan_all(&x, &y, opts.k)?;
    let summary = summarize_scan(&out.records, &opts.thresholds, opts.bins);
    ensure_dir(&opts.out_dir)?;

    let rows = out.records.iter().map(|r| {
        vec![
            (r.target + 1).to_string(),
            fmt_opt(r.alpha_cpc),
            fmt_opt(r.alpha_psc),
            fmt_opt(r.abs_err),
            fmt_opt(r.rel_err),
            r.flags.render(),
        ]
    });
    write_csv(
        &opts.out_dir.join("scan.csv"),
        &["j", "alpha_cpc", "alpha_psc", "abs_err", "rel_err", "flags"],
        rows,
    )?;
    let bins = summary
        .abs_histogram
        .iter()
        .map(|b| ("abs_err", b))
        .chain(summary.rel_histogram.iter().map(|b| ("rel_err", b)))
        .map(|(metric, b)| vec![metric.to_string(), fmt_f64(b.lo), fmt_f64(b.hi), b.count.to_string()]);
    write_csv(
        &opts.out_dir.join("histogram.csv"),
        &["metric", "bin_lo", "bin_hi", "count"],
        bins,
    )?;

    let mut manifest = RunManifest::new("scan")
        .with_input(&opts.matrix)?
        .with_input(&opts.response)?;
    manifest.set("k", opts.k);
    manifest.set("has_header", opts.has_header);
    manifest.set("bins", opts.bins);
    let thresholds: Vec<String> = opts.thresholds.iter().map(f64::to_string).collect();
    manifest.set("thresholds", thresholds.join(","));
    manifest.outputs = vec!["scan.csv".into(), "histogram.csv".into()];
    manifest.write(&opts.out_dir)?;
    Ok((out, summary))
}

/// Source of the bias-bound numerator.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundSpec {
    /// User bound `B >= ||gamma_tail||_1`.
    Bound(f64),
    /// True coefficients (one per column of the standardized matrix).
    Beta(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    Known(f64),
    Estimate,
}

#[derive(Debug, Clone)]
pub struct TestOptions {
    pub matrix: PathBuf,
    pub response: PathBuf,
    pub has_header: bool,
    /// Zero-based tested column.
    pub target: usize,
    pub k: usize,
    pub level: f64,
    pub bound: BoundSpec,
    pub sigma: SigmaSpec,
    pub dof: DofConvention,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub bound: BiasBound,
    pub outcome: TestOutcome,
}

pub fn run_test(opts: &TestOptions) -> Result<TestReport> {
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidLevel(opts.level));
    }
    let x = load_standardized(&opts.matrix, opts.has_header)?;
    x.check_target(opts.target)?;
    let y = load_centered_response(&opts.response, opts.has_header, x.nrows())?;
    let basis = basis_for(&x, Method::Cpc, opts.target)?;

    let (tail, source) = match &opts.bound {
        BoundSpec::Bound(b) => {
            if !(*b >= 0.0) || !b.is_finite() {
                return Err(Error::InvalidBound(*b));
            }
            (*b, BoundSource::UserBound)
        }
        BoundSpec::Beta(path) => {
            let beta = load_vector_csv(path, opts.has_header)?;
            let gamma = gamma_truth_cpc(&x, &beta, opts.target)?;
            (gamma_tail_l1(&gamma, opts.k), BoundSource::Truth)
        }
    };
    let bound = compute_nd_with_basis(&x, &basis, opts.target, opts.k, tail, source)?;
    let fit = fit_with_basis(&x, &y, &basis, Method::Cpc, opts.target, opts.k, DEFAULT_COND_TOL)?;
    let sigma = match opts.sigma {
        SigmaSpec::Known(s) => Sigma::Known(s),
        SigmaSpec::Estimate => Sigma::Estimated(estimate_sigma(&fit.residuals, opts.k)?),
    };
    let outcome = test_h0(
        fit.alpha_hat,
        bound.numerator,
        bound.denominator,
        sigma,
        x.nrows(),
        opts.k,
        opts.level,
        opts.dof,
    )?;

    ensure_dir(&opts.out_dir)?;
    let row = vec![
        (opts.target + 1).to_string(),
        opts.k.to_string(),
        fmt_f64(outcome.alpha_hat),
        fmt_f64(outcome.numerator),
        fmt_f64(outcome.denominator),
        bound.source.as_str().to_string(),
        fmt_f64(outcome.sigma),
        outcome.sigma_estimated.to_string(),
        fmt_f64(outcome.level),
        outcome.family.to_string(),
        fmt_f64(outcome.quantile),
        fmt_f64(outcome.interval.0),
        fmt_f64(outcome.interval.1),
        if outcome.reject { "reject" } else { "accept" }.to_string(),
    ];
    write_csv(
        &opts.out_dir.join("test.csv"),
        &[
            "j",
            "k",
            "alpha_hat",
            "numerator",
            "denominator",
            "bound_source",
            "sigma",
            "sigma_estimated",
            "level",
            "family",
            "quantile",
            "lower",
            "upper",
            "decision",
        ],
        [row],
    )?;

    let mut manifest = RunManifest::new("test")
        .with_input(&opts.matrix)?
        .with_input(&opts.response)?;
    if let BoundSpec::Beta(path) = &opts.bound {
        manifest = manifest.with_input(path)?;
    }
    manifest.set("j", opts.target + 1);
    manifest.set("k", opts.k);
    manifest.set("level", opts.level);
    manifest.set("bound_source", source.as_str());
    if let BoundSpec::Bound(b) = opts.bound {
        manifest.set("bound", b);
    }
    match opts.sigma {
        SigmaSpec::Known(s) => manifest.set("sigma", s),
        SigmaSpec::Estimate => manifest.set("sigma", "estimated"),
    }
    manifest.set("dof_convention", opts.dof.as_str());
    manifest.set("has_header", opts.has_header);
    manifest.outputs = vec!["test.csv".into()];
    manifest.write(&opts.out_dir)?;
    Ok(TestReport { bound, outcome })
}

#[derive(Debug, Clone)]
pub struct DecomposeOptions {
    pub matrix: PathBuf,
    pub has_header: bool,
    /// Zero-based column whose alignments are reported.
    pub target: usize,
    /// Zero-based column removed before decomposing.
    pub exclude: Option<usize>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub singular_values: DVector<f64>,
    pub alignments: DVector<f64>,
}

pub fn run_decompose(opts: &DecomposeOptions) -> Result<Spectrum> {
    let x = load_standardized(&opts.matrix, opts.has_header)?;
    x.check_target(opts.target)?;
    if let Some(j) = opts.exclude {
        x.check_target(j)?;
    }
    let basis = match opts.exclude {
        Some(j) => thin_svd(&x.without_column(j), 1.0)?,
        None => thin_svd(x.values(), 1.0)?,
    };
    let spectrum = Spectrum {
        singular_values: basis.singular_values().clone(),
        alignments: basis.alignments(&x.column(opts.target)),
    };

    ensure_dir(&opts.out_dir)?;
    let rows = spectrum
        .singular_values
        .iter()
        .zip(spectrum.alignments.iter())
        .enumerate()
        .map(|(s, (sv, c))| vec![(s + 1).to_string(), fmt_f64(*sv), fmt_f64(*c)]);
    write_csv(
        &opts.out_dir.join("spectrum.csv"),
        &["component", "singular_value", "alignment"],
        rows,
    )?;

    let mut manifest = RunManifest::new("decompose").with_input(&opts.matrix)?;
    manifest.set("target", opts.target + 1);
    manifest.set(
        "exclude",
        opts.exclude.map_or("none".to_string(), |j| (j + 1).to_string()),
    );
    manifest.set("has_header", opts.has_header);
    manifest.outputs = vec!["spectrum.csv".into()];
    manifest.write(&opts.out_dir)?;
    Ok(spectrum)
}
