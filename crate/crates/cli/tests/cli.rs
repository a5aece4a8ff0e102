use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kernel-fields"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Non-comment lines.
fn table(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn identical_samples_have_zero_vstat() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0\n2\n-1.5\n");
    let o = run(&[
        "distance",
        "--x",
        &a,
        "--y",
        &a,
        "--kernel",
        "fractional:H=0.5",
        "--estimator",
        "vstat",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# version="));
    assert!(text.contains("# seed="));
    assert!(text.contains("# convention="));
    let rows = table(&text);
    assert_eq!(rows[0], "estimator,kernel,value,std_error,n_x,n_y,metadata");
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[0], "v_statistic");
    assert_eq!(cells[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows.len(), 2);
}

#[test]
fn estimators_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0\n2\n");
    let b = write(dir.path(), "b.csv", "1\n3\n");
    let value = |est: &str| -> f64 {
        let o = run(&[
            "distance",
            "--x",
            &a,
            "--y",
            &b,
            "--kernel",
            "fractional:H=0.5",
            "--estimator",
            est,
        ]);
        assert_eq!(o.status.code(), Some(0), "{est}");
        table(&stdout(&o))[1]
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    let v = value("vstat");
    assert!((v - 0.5).abs() < 1e-12);
    assert!((value("cvm") - v).abs() < 1e-12);
    assert!((value("fourier") - v).abs() < 1e-6);
    assert!((value("field-mc") - v).abs() < 0.05);
}

#[test]
fn convention_flag_halves_the_unbiased_value() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0.1\n0.9\n-0.4\n1.7\n");
    let b = write(dir.path(), "b.csv", "0.5\n-1.2\n0.3\n2.2\n");
    let value = |conv: &str| -> f64 {
        let o = run(&[
            "distance",
            "--x",
            &a,
            "--y",
            &b,
            "--kernel",
            "fractional:H=0.3",
            "--estimator",
            "unbiased",
            "--convention",
            conv,
        ]);
        assert_eq!(o.status.code(), Some(0));
        table(&stdout(&o))[1]
            .split(',')
            .nth(2)
            .unwrap()
            .parse()
            .unwrap()
    };
    let (p, c) = (value("paper"), value("corrected"));
    assert!((2.0 * p - c).abs() <= 1e-15 * c.abs().max(1.0));
}

#[test]
fn sample_field_trace_is_pinned_at_origin() {
    let o = run(&[
        "sample-field",
        "--spec",
        "fbm",
        "--hurst",
        "0.3",
        "--grid",
        "0:1:1024",
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = table(&text);
    assert_eq!(rows[0], "t,value");
    assert_eq!(rows.len(), 1 + 1024);
    assert_eq!(rows[1], "0,0");
    let last: Vec<f64> = rows[1024].split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!(last[1].is_finite());
}

#[test]
fn sample_field_at_points_uses_coordinate_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.csv", "0,0\n0.5,1\n1,-1\n");
    let o = run(&["sample-field", "--spec", "additive", "--points", &p]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = table(&text);
    assert_eq!(rows[0], "x1,x2,value");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].ends_with(",0"));
}

#[test]
fn identical_argv_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0.3\n-1\n2\n");
    let b = write(dir.path(), "b.csv", "1\n0.25\n");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "distance",
            "--x",
            &a,
            "--y",
            &b,
            "--kernel",
            "fractional:H=0.7",
            "--estimator",
            "field-mc",
            "--replications",
            "3000",
            "--seed",
            "11",
        ],
        vec![
            "sample-field",
            "--spec",
            "gff",
            "--grid",
            "0:1:65",
            "--seed",
            "3",
        ],
        vec!["verify", "--case", "cvm", "--seed", "5", "--sets", "20"],
        vec![
            "experiment",
            "--experiment",
            "snr-sweep",
            "--set",
            "r=200",
            "--set",
            "h_grid=0.2:0.8:3",
        ],
    ];
    for args in cases {
        let first = run(&args);
        let second = run(&args);
        assert_eq!(first.status.code(), Some(0), "{args:?}");
        assert!(!first.stdout.is_empty());
        assert_eq!(first.stdout, second.stdout, "{args:?}");
    }
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let args = ["sample-field", "--spec", "fbm", "--grid", "0:2:33"];
    let piped = run(&args);
    let o = bin()
        .args(args)
        .args(["--out", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(fs::read(&path).unwrap(), piped.stdout);
}

#[test]
fn verify_equivalence_passes() {
    let o = run(&["verify", "--case", "equivalence", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows = table(&text);
    assert_eq!(rows.len(), 1 + 5 * 3);
    assert!(rows[1..].iter().all(|r| r.ends_with(",pass")));
}

#[test]
fn failed_verification_exits_2() {
    // two draws per row: the Monte Carlo interval is meaningless and some
    // rows miss it; the table is still written
    let o = run(&[
        "verify",
        "--case",
        "equivalence",
        "--sets",
        "20",
        "--replications",
        "2",
    ]);
    let text = stdout(&o);
    assert!(table(&text).iter().any(|r| r.ends_with(",FAIL")));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("verification rows failed"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "snr.conf",
        "# small SNR sweep\nexperiment=snr-sweep\nh_grid=0.1:0.9:3\nn=16\nr=100\nseed=7\n",
    );
    let base = run(&["experiment", "--config", &cfg]);
    assert_eq!(base.status.code(), Some(0));
    let text = stdout(&base);
    assert!(text.contains("# seed=7"));
    assert!(text.contains("# convention=corrected"));
    let rows = table(&text);
    assert_eq!(rows[0], "perturbation,H,signal_mean,signal_std,snr");
    // 5 perturbations x 3 H values
    assert_eq!(rows.len(), 1 + 15);

    let reseeded = run(&["experiment", "--config", &cfg, "--seed", "8"]);
    assert!(stdout(&reseeded).contains("# seed=8"));
    assert_ne!(reseeded.stdout, base.stdout);

    let fewer = run(&[
        "experiment",
        "--config",
        &cfg,
        "--set",
        "perturbations=mean:0.5",
    ]);
    assert_eq!(table(&stdout(&fewer)).len(), 1 + 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.csv", "0\n1\n");
    let bad = write(dir.path(), "bad.csv", "0\nnope\n");

    // unknown flag: usage on stderr
    let o = run(&["distance", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());

    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));

    let distance = |x: &str, kernel: &str, est: &str| {
        run(&[
            "distance",
            "--x",
            x,
            "--y",
            &a,
            "--kernel",
            kernel,
            "--estimator",
            est,
        ])
    };
    assert_eq!(
        distance(&bad, "fractional:H=0.5", "vstat").status.code(),
        Some(1)
    );
    assert_eq!(
        distance(&a, "fractional:H=1.5", "vstat").status.code(),
        Some(1)
    );
    assert_eq!(distance(&a, "bogus", "vstat").status.code(), Some(1));
    // singular diagonal
    assert_eq!(
        distance(&a, "riesz:alpha=0.25", "vstat").status.code(),
        Some(1)
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        distance(missing.to_str().unwrap(), "fractional:H=0.5", "vstat")
            .status
            .code(),
        Some(1)
    );

    assert_eq!(
        run(&["experiment", "--set", "r=10"]).status.code(),
        Some(1),
        "no experiment selected"
    );
    assert_eq!(
        run(&["experiment", "--experiment", "snr", "--set", "warp=9"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["sample-field", "--spec", "gff", "--grid", "0:2:5"])
            .status
            .code(),
        Some(1),
        "free field lives on [0, 1]"
    );
}
