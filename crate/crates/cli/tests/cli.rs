use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn popcorr(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_popcorr"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("POPCORR_THREADS", t),
        None => cmd.env_remove("POPCORR_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn toy_inputs(dir: &Path, zero_response: bool) -> (PathBuf, PathBuf) {
    let x: Vec<String> = (0..10)
        .map(|i| {
            (0..5)
                .map(|j| ((i * i * (j + 2) + 3 * i * j + j) % 11).to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let y: Vec<String> = (0..10)
        .map(|i| {
            if zero_response {
                "0".into()
            } else {
                format!("{}", (i as f64 * 0.9).cos())
            }
        })
        .collect();
    let (xp, yp) = (dir.join("x.csv"), dir.join("y.csv"));
    fs::write(&xp, x.join("\n")).unwrap();
    fs::write(&yp, y.join("\n")).unwrap();
    (xp, yp)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn scan_toy_matrix_has_one_row_per_column() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = toy_inputs(dir.path(), false);
    let out_dir = dir.path().join("out");
    let out = popcorr(
        &[
            "scan",
            "--matrix",
            s(&x),
            "--response",
            s(&y),
            "-k",
            "2",
            "-o",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("rel_err > 0.5:"));
    assert!(stdout.contains("rel_err > 1:"));
    let scan = fs::read_to_string(out_dir.join("scan.csv")).unwrap();
    let lines: Vec<&str> = scan.lines().collect();
    assert_eq!(lines[0], "j,alpha_cpc,alpha_psc,abs_err,rel_err,flags");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1,"));
    assert!(out_dir.join("histogram.csv").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn zero_response_gives_zero_alphas() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = toy_inputs(dir.path(), true);
    let out_dir = dir.path().join("out");
    let out = popcorr(
        &[
            "scan",
            "--matrix",
            s(&x),
            "--response",
            s(&y),
            "-k",
            "2",
            "-o",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 0);
    let scan = fs::read_to_string(out_dir.join("scan.csv")).unwrap();
    for line in scan.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[4], "NA");
        assert_eq!(fields[5], "rel_err_undefined");
    }
}

#[test]
fn single_replicate_has_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.conf");
    fs::write(
        &config,
        "n = 50\np = 10\nsparsity = 3\nreplicates = 1\nk_min = 1\nk_max = 1\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = popcorr(&["simulate", "--config", s(&config), "-o", s(&out_dir)], None);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let estimates = fs::read_to_string(out_dir.join("estimates.csv")).unwrap();
    assert_eq!(estimates.lines().count(), 3);
    assert_eq!(
        estimates.lines().next(),
        Some("scenario,method,k,replicate,alpha_hat,flag")
    );
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next(),
        Some("scenario,method,k,mean,sd,theo_bias,theo_var,n_fail")
    );
    assert!(out_dir.join("plot_independent.csv").exists());
}

#[test]
fn simulate_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = popcorr(
            &[
                "simulate",
                "--set",
                "n=80",
                "--set",
                "p=15",
                "--set",
                "sparsity=4",
                "--set",
                "k_max=4",
                "--set",
                "replicates=12",
                "--set",
                "scenario=all",
                "-o",
                s(&out_dir),
            ],
            Some(threads),
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (
            fs::read(out_dir.join("estimates.csv")).unwrap(),
            fs::read(out_dir.join("summary.csv")).unwrap(),
        )
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    assert_eq!(one, run("8"));
}

#[test]
fn config_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    fs::write(&config, "replicates = lots\n").unwrap();
    let out = popcorr(&["simulate", "--config", s(&config), "-o", s(dir.path())], None);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicates"));

    let out = popcorr(&["simulate", "--set", "bogus=1", "-o", s(dir.path())], None);
    assert_eq!(code(&out), 1);
    let out = popcorr(&["frobnicate"], None);
    assert_eq!(code(&out), 1);
    let out = popcorr(&["--help"], None);
    assert_eq!(code(&out), 0);
}

#[test]
fn data_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1,2\n3,4\n5\n").unwrap();
    let out = popcorr(&["decompose", "--matrix", s(&ragged), "-o", s(dir.path())], None);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));

    let (x, _) = toy_inputs(dir.path(), false);
    let short = dir.path().join("short.csv");
    fs::write(&short, "1\n2\n3\n").unwrap();
    let out = popcorr(
        &["scan", "--matrix", s(&x), "--response", s(&short), "-o", s(dir.path())],
        None,
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn exclude_out_of_range_is_an_argument_error() {
    let dir = tempfile::tempdir().unwrap();
    let (x, _) = toy_inputs(dir.path(), false);
    let out = popcorr(
        &["decompose", "--matrix", s(&x), "--exclude", "6", "-o", s(dir.path())],
        None,
    );
    assert_eq!(code(&out), 1);
    let out = popcorr(
        &["decompose", "--matrix", s(&x), "--exclude", "0", "-o", s(dir.path())],
        None,
    );
    assert_eq!(code(&out), 1);
    let out = popcorr(
        &["decompose", "--matrix", s(&x), "--exclude", "5", "-o", s(dir.path())],
        None,
    );
    assert_eq!(code(&out), 0);
}

#[test]
fn test_command_reports_decision_and_degenerate_d() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = toy_inputs(dir.path(), true);
    let out_dir = dir.path().join("t");
    let out = popcorr(
        &[
            "test",
            "--matrix",
            s(&x),
            "--response",
            s(&y),
            "-k",
            "2",
            "--bound",
            "0",
            "--sigma",
            "1",
            "-o",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("decision: accept"));
    assert!(stdout.contains("quantile: normal"));
    let csv = fs::read_to_string(out_dir.join("test.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);

    let out = popcorr(
        &[
            "test",
            "--matrix",
            s(&x),
            "--response",
            s(&y),
            "-k",
            "2",
            "--bound",
            "0",
            "--estimate-sigma",
            "--dof",
            "n-k-1",
            "-o",
            s(&out_dir),
        ],
        None,
    );
    // zero response: sigma estimate is 0, which is not a valid noise scale
    assert_eq!(code(&out), 1);

    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "1,1\n2,2\n0,0\n5,5\n3,3\n4,4\n").unwrap();
    let y6 = dir.path().join("y6.csv");
    fs::write(&y6, "1\n0\n2\n1\n0\n1\n").unwrap();
    let out = popcorr(
        &[
            "test",
            "--matrix",
            s(&dup),
            "--response",
            s(&y6),
            "-k",
            "1",
            "--bound",
            "0",
            "--sigma",
            "1",
            "-o",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 3);

    let out = popcorr(
        &[
            "test",
            "--matrix",
            s(&x),
            "--response",
            s(&y),
            "-k",
            "2",
            "-o",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 1, "missing --bound/--beta and sigma is a usage error");
}
