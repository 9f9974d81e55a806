use std::fs;
use std::path::Path;

use popcorr::commands::{
    run_decompose, run_scan, run_simulate, run_test, BoundSpec, DecomposeOptions, ScanOptions, SigmaSpec,
    SimulateOptions, TestOptions,
};
use popcorr::inference::DofConvention;
use popcorr::manifest::{file_sha256, RunManifest, MANIFEST_FILE};
use popcorr::{Error, Scenario, SimulationConfig};

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn toy_matrix(dir: &Path) -> std::path::PathBuf {
    let rows: Vec<String> = (0..10)
        .map(|i| {
            (0..5)
                .map(|j| (((i * i * (j + 2) + 3 * i * j + j) % 11) as f64 - 5.0).to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let path = dir.join("x.csv");
    write(&path, &(rows.join("\n") + "\n"));
    path
}

fn response(dir: &Path, values: &[f64]) -> std::path::PathBuf {
    let path = dir.join("y.csv");
    let text: Vec<String> = values.iter().map(f64::to_string).collect();
    write(&path, &(text.join("\n") + "\n"));
    path
}

fn test_opts(dir: &Path, y: &[f64], bound: f64) -> TestOptions {
    TestOptions {
        matrix: toy_matrix(dir),
        response: response(dir, y),
        has_header: false,
        target: 0,
        k: 2,
        level: 0.05,
        bound: BoundSpec::Bound(bound),
        sigma: SigmaSpec::Known(1.0),
        dof: DofConvention::SampleSize,
        out_dir: dir.join("test"),
    }
}

#[test]
fn orthonormal_input_has_flat_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    write(&path, "1,1,1\n-1,1,-1\n1,-1,-1\n-1,-1,1\n");
    let spectrum = run_decompose(&DecomposeOptions {
        matrix: path,
        has_header: false,
        target: 0,
        exclude: None,
        out_dir: dir.path().join("dec"),
    })
    .unwrap();
    assert_eq!(spectrum.singular_values.len(), 3);
    for s in spectrum.singular_values.iter() {
        assert!((s - 1.0).abs() < 1e-12);
    }
    let csv = fs::read_to_string(dir.path().join("dec/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("component,singular_value,alignment"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn exclude_out_of_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_decompose(&DecomposeOptions {
        matrix: toy_matrix(dir.path()),
        has_header: false,
        target: 0,
        exclude: Some(5),
        out_dir: dir.path().join("dec"),
    })
    .unwrap_err();
    assert!(matches!(err, Error::TargetOutOfRange { target: 5, cols: 5 }));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn structured_alignment_disappears_with_exclusion() {
    let dir = tempfile::tempdir().unwrap();
    let config = SimulationConfig {
        n: 300,
        p: 30,
        sparsity: 3,
        scenarios: vec![Scenario::Structured],
        k_max: 2,
        replicates: 1,
        ..SimulationConfig::default()
    };
    run_simulate(&SimulateOptions {
        config,
        out_dir: dir.path().to_path_buf(),
        svg: false,
        dump_design: true,
        config_path: None,
    })
    .unwrap();
    let opts = |exclude| DecomposeOptions {
        matrix: dir.path().join("design_structured.csv"),
        has_header: true,
        target: 0,
        exclude,
        out_dir: dir.path().join("dec"),
    };
    let full = run_decompose(&opts(None)).unwrap();
    assert!(full.alignments.rows(0, 2).amax() > 0.99);
    let excluded = run_decompose(&opts(Some(0))).unwrap();
    assert!(excluded.alignments.rows(0, 2).amax() < 0.1);
}

#[test]
fn zero_estimate_is_accepted_and_large_one_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let accept = run_test(&test_opts(dir.path(), &[0.0; 10], 0.0)).unwrap();
    assert_eq!(accept.outcome.alpha_hat, 0.0);
    assert!(!accept.outcome.reject);

    // y proportional to the tested column: alpha_hat far outside +-1.96 / sqrt(D)
    let x = popcorr::io::load_matrix_csv(&dir.path().join("x.csv"), false).unwrap();
    let col: Vec<f64> = x.column(0).iter().map(|v| 50.0 * v).collect();
    let reject = run_test(&test_opts(dir.path(), &col, 0.0)).unwrap();
    let half = 1.959963984540054 / reject.outcome.denominator.sqrt();
    assert!(reject.outcome.alpha_hat.abs() > half);
    assert!(reject.outcome.reject);
    assert!((reject.outcome.interval.1 - half).abs() < 1e-12);

    let csv = fs::read_to_string(dir.path().join("test/test.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().ends_with(",reject"));
}

#[test]
fn negative_bound_and_bad_level_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_test(&test_opts(dir.path(), &[0.0; 10], -1.0)).unwrap_err();
    assert!(matches!(err, Error::InvalidBound(_)));
    let mut opts = test_opts(dir.path(), &[0.0; 10], 0.0);
    opts.level = 1.5;
    assert!(matches!(run_test(&opts).unwrap_err(), Error::InvalidLevel(_)));
}

#[test]
fn degenerate_denominator_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    // column 1 is an exact copy of column 2, so D = 0 at k = 1
    write(&dir.path().join("dup.csv"), "1,1\n2,2\n0,0\n5,5\n3,3\n4,4\n");
    let mut opts = test_opts(dir.path(), &[1.0, 0.0, 2.0, 1.0, 0.0, 1.0], 0.0);
    opts.matrix = dir.path().join("dup.csv");
    opts.k = 1;
    let err = run_test(&opts).unwrap_err();
    assert!(matches!(err, Error::DegenerateD(_)), "{err:?}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn scan_writes_one_row_per_covariate_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
    let opts = ScanOptions {
        matrix: toy_matrix(dir.path()),
        response: response(dir.path(), &y),
        has_header: false,
        k: 2,
        thresholds: vec![0.5, 1.0],
        bins: 10,
        out_dir: dir.path().join("scan"),
    };
    let (out, summary) = run_scan(&opts).unwrap();
    assert_eq!(out.records.len(), 5);
    assert!(summary.exceedances[0].1 >= summary.exceedances[1].1);

    let scan = fs::read_to_string(dir.path().join("scan/scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 6);
    let hist = fs::read_to_string(dir.path().join("scan/histogram.csv")).unwrap();
    assert_eq!(hist.lines().count(), 21);

    let manifest = RunManifest::read(&dir.path().join("scan").join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.command, "scan");
    assert_eq!(manifest.inputs[0].sha256, file_sha256(&opts.matrix).unwrap());
    assert_eq!(manifest.config["k"], "2");
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = SimulationConfig {
        n: 60,
        p: 12,
        sparsity: 4,
        scenarios: vec![Scenario::Independent, Scenario::Binary],
        k_min: 1,
        k_max: 3,
        replicates: 5,
        seed: 3,
        ..SimulationConfig::default()
    };
    let run = |name: &str| {
        let out = dir.path().join(name);
        run_simulate(&SimulateOptions {
            config: config.clone(),
            out_dir: out.clone(),
            svg: true,
            dump_design: false,
            config_path: None,
        })
        .unwrap();
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in [
        "estimates.csv",
        "summary.csv",
        "plot_independent.csv",
        "plot_binary.csv",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let estimates = fs::read_to_string(a.join("estimates.csv")).unwrap();
    assert_eq!(estimates.lines().count(), 1 + 2 * 2 * 3 * 5);
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2 * 3);
    assert!(a.join("plot_binary.svg").exists());

    let mut ma = RunManifest::read(&a.join(MANIFEST_FILE)).unwrap();
    let mb = RunManifest::read(&b.join(MANIFEST_FILE)).unwrap();
    ma.timestamp_unix = mb.timestamp_unix;
    assert_eq!(ma, mb);
}
