use std::path::PathBuf;
use std::process::Command;

use proptest::prelude::*;
use sdstab::simloop::{Sample, Trajectory};
use sdstab_cli::commands::{execute, log_log_slope, parse_partition};
use sdstab_cli::csvout::{parse_trajectory_csv, trajectory_csv};
use sdstab_cli::sysfile::{load_system, parse_system, LoadError};

fn systems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems")
}

fn sys_path(name: &str) -> String {
    systems_dir().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = execute(std::iter::once("sdstab").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sdstab-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn bundled_systems_load() {
    let d = load_system(&systems_dir().join("dblint.sys")).unwrap();
    assert_eq!(d.dim(), 2);
    let e1 = load_system(&systems_dir().join("example1.sys")).unwrap();
    assert_eq!(e1.dim(), 2);
    let e2 = load_system(&systems_dir().join("example2.sys")).unwrap();
    assert_eq!(e2.dim(), 3);
    // alpha(x3) = 1 + x3 and beta = 1, so alpha(0) = beta(0) = 1.
    assert_eq!(e2.f.eval(&[1.0, 2.0, 0.5]).unwrap(), vec![3.0, -1.0, 0.0]);
    assert_eq!(e2.g.eval(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
}

#[test]
fn too_few_components_is_a_dimension_mismatch() {
    let src = "dim = 3\nf = [\"x2\", \"-x1\"]\ng = [\"0\", \"0\", \"1\"]\nV = \"x1^2+x2^2+x3^2\"\n";
    match parse_system(src) {
        Err(LoadError::DimensionMismatch { expected: 3, found: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(load_system(&systems_dir().join("missing.sys")), Err(LoadError::Io(_))));
}

#[test]
fn certify_prints_the_case_and_writes_witness_rows() {
    let dir = tempdir("certify");
    let (code, out, _) = run(&["certify", "--system", &sys_path("dblint.sys"), "--at", "1,0", "--out", dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.starts_with("case=P2 N=1"), "{out}");
    let csv = std::fs::read_to_string(dir.join("certificate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,case,N,gV,fV,witness_name,witness_value"));
    let bracket = lines.find(|l| l.contains("[f,g]V")).expect("bracket witness row");
    let (head, tail) = bracket.split_once(",\"[f,g]V\",").expect("quoted bracket name");
    let fields: Vec<&str> = head.split(',').collect();
    assert_eq!(fields[2], "P2");
    assert_eq!(fields[3], "1");
    assert_eq!(tail.parse::<f64>().unwrap(), -1.0);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn exit_code_matrix() {
    let dir = tempdir("matrix");
    let zero = dir.join("zero.sys");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(&zero, "dim = 2\nf = [\"0\", \"0\"]\ng = [\"0\", \"0\"]\nV = \"x1^2+x2^2\"\n").unwrap();
    let zero = zero.to_string_lossy().into_owned();
    let dbl = sys_path("dblint.sys");
    let e1 = sys_path("example1.sys");
    let e2 = sys_path("example2.sys");
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["certify", "--system", &dbl, "--at", "1,0"], 0),
        (vec!["certify", "--system", &dbl, "--at", "0,1"], 0),
        (vec!["certify", "--system", &dbl, "--at", "0,0"], 1),
        (vec!["certify", "--system", &dbl, "--at", "1,0,0"], 1),
        (vec!["certify", "--system", &dbl, "--at", "1,x"], 1),
        (vec!["certify", "--system", "/nonexistent/file.sys", "--at", "1,0"], 1),
        (vec!["certify", "--system", &zero, "--at", "1,0"], 2),
        (vec!["certify", "--system", &e1, "--at", "1,0", "--nmax", "1"], 2),
        (vec!["certify", "--system", &e1, "--at", "1,0"], 0),
        (vec!["certify-grid", "--system", &dbl, "--box", "-1:1,-1:1", "--res", "3"], 0),
        (vec!["certify-grid", "--system", &zero, "--box", "-1:1,-1:1", "--res", "3"], 2),
        (vec!["certify-grid", "--system", &dbl, "--box", "1:-1,-1:1"], 1),
        (vec!["step", "--system", &e2, "--at", "1,0,0"], 0),
        (vec!["step", "--system", &zero, "--at", "1,0"], 2),
        (vec!["step", "--system", &dbl, "--at", "0,0"], 1),
        (vec!["simulate", "--system", &zero, "--x0", "1,0", "--horizon", "1"], 2),
        (vec!["simulate", "--system", &dbl, "--x0", "1,0", "--horizon", "-1"], 1),
        (vec!["simulate", "--system", &dbl, "--x0", "1,0", "--partition", "uniform:0"], 1),
        (vec!["simulate", "--system", &dbl, "--x0", "1,0", "--partition", "explicit:0.1,0.2"], 1),
        (vec!["diagnose-m", "--system", &e2, "--at", "1,1,0"], 0),
        (vec!["diagnose-m", "--system", &e2, "--at", "1,1,0", "--order", "9"], 1),
        (vec!["cbh-check", "--system", &dbl, "--at", "1,0", "--k", "2"], 0),
        (vec!["cbh-check", "--system", &dbl, "--at", "1,0", "--k", "99"], 1),
        (vec!["frobnicate"], 1),
        (vec!["certify", "--system", &dbl], 1),
        (vec!["--help"], 0),
    ];
    for (args, expected) in cases {
        let (code, out, err) = run(&args);
        assert_eq!(code, expected, "{args:?}\nstdout: {out}\nstderr: {err}");
        if expected == 1 {
            assert!(!err.is_empty(), "{args:?} failed silently");
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn binary_exit_codes_match_execute() {
    let bin = env!("CARGO_BIN_EXE_sdstab");
    let dbl = sys_path("dblint.sys");
    for (at, expected) in [("1,0", 0), ("0,0", 1)] {
        let status = Command::new(bin).args(["certify", "--system", &dbl, "--at", at]).status().unwrap();
        assert_eq!(status.code(), Some(expected), "--at {at}");
    }
    let status = Command::new(bin).arg("--bogus").status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn simulate_writes_trajectory_report_and_plot_script() {
    let dir = tempdir("simulate");
    let (code, out, err) = run(&[
        "simulate",
        "--system",
        &sys_path("dblint.sys"),
        "--x0",
        "1,0",
        "--partition",
        "uniform:0.5",
        "--horizon",
        "50",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("converged: true"), "{out}");
    let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,V,segment_index,is_checkpoint\n"));
    let samples = parse_trajectory_csv(&csv).unwrap();
    assert_eq!(samples[0].t, 0.0);
    assert_eq!(samples[0].x, vec![1.0, 0.0]);
    assert!(samples[0].checkpoint);
    let report = std::fs::read_to_string(dir.join("report.txt")).unwrap();
    assert!(report.contains("fact checkpoint_decrease: ok"));
    assert!(report.contains("interval, t_start, t_end, steps, status"));
    let script = std::fs::read_to_string(dir.join("plot_trajectory.py")).unwrap();
    assert!(script.contains("trajectory.csv") && script.contains("matplotlib"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn explicit_partition_continues_with_the_last_gap_or_the_given_step() {
    let p = parse_partition("explicit:0,0.1,0.7").unwrap();
    let t = p.times_until(1.5);
    assert_eq!(t.len(), 5);
    assert!((t[3] - 1.3).abs() < 1e-12 && t[4] == 1.5);
    let p = parse_partition("explicit:0,0.1,0.7,0.8,2.0:0.5").unwrap();
    assert_eq!(p.times_until(3.0), vec![0.0, 0.1, 0.7, 0.8, 2.0, 2.5, 3.0]);
    assert!(parse_partition("uniform:abc").is_err());
    assert!(parse_partition("spiral:1").is_err());
}

#[test]
fn slope_of_a_power_law() {
    let rows: Vec<(f64, f64)> = [0.01, 0.02, 0.05, 0.1].iter().map(|t| (*t, 7.0 * t * t * t)).collect();
    assert!((log_log_slope(&rows).unwrap() - 3.0).abs() < 1e-12);
    assert_eq!(log_log_slope(&rows[..1]), None);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        Just(5e-324),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_csv_round_trips_bit_exactly(
        dim in 1usize..4,
        rows in prop::collection::vec((finite(), prop::collection::vec(finite(), 3), finite(), 0usize..50, any::<bool>()), 0..20),
    ) {
        let samples: Vec<Sample> = rows
            .into_iter()
            .map(|(t, x, v, segment, checkpoint)| Sample { t, x: x[..dim].to_vec(), v, segment, checkpoint })
            .collect();
        let traj = Trajectory { dim, samples: samples.clone(), segments: Vec::new() };
        let back = parse_trajectory_csv(&trajectory_csv(&traj)).unwrap();
        prop_assert_eq!(back.len(), samples.len());
        for (a, b) in back.iter().zip(&samples) {
            prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
            prop_assert_eq!(a.v.to_bits(), b.v.to_bits());
            prop_assert_eq!(a.segment, b.segment);
            prop_assert_eq!(a.checkpoint, b.checkpoint);
            for (p, q) in a.x.iter().zip(&b.x) {
                prop_assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn certify_exit_code_depends_only_on_the_point(x1 in -3.0..3.0f64, x2 in -3.0..3.0f64, origin in any::<bool>()) {
        let at = if origin { "0,0".to_string() } else { format!("{x1},{x2}") };
        let (code, out, _) = run(&["certify", "--system", &sys_path("dblint.sys"), "--at", &at]);
        if origin {
            prop_assert_eq!(code, 1);
        } else {
            // The double integrator is certified everywhere off the origin.
            prop_assert_eq!(code, 0);
            prop_assert!(out.starts_with("case="));
            prop_assert!(!out.contains("Inconclusive"));
        }
    }
}
