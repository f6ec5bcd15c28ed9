use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use tpspline::measurements::{ForwardOperator, MeasurementFunctional, Rect};
use tpspline::odo::Odo;
use tpspline::spline::{Domain, TensorAtom, TensorSpline};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tpspline"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(cfg: &Path, dir: &Path, seed: Option<&str>) -> PathBuf {
    let mut args = vec!["simulate", "--config", s(cfg), "--out", s(dir)];
    if let Some(seed) = seed {
        args.extend(["--seed", seed]);
    }
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("problem.toml")
}

fn write_doc(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// `count` and the first integer after `count=` in the sparsity verdict.
fn sparsity(dir: &Path) -> (usize, usize) {
    let cert = fs::read_to_string(dir.join("certification.txt")).unwrap();
    let line = cert.lines().find(|l| l.starts_with("sparsity")).unwrap();
    let field = |k: &str| {
        line.split_whitespace()
            .find_map(|w| w.strip_prefix(k))
            .unwrap()
            .parse()
            .unwrap()
    };
    (field("count="), field("bound="))
}

#[test]
fn boxes_scenario_solves_within_bound() {
    let tmp = TempDir::new().unwrap();
    let problem = simulate(&config("boxes.toml"), tmp.path(), None);
    let o = run(&["solve", "--config", s(&problem), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let (count, bound) = sparsity(tmp.path());
    assert_eq!(bound, 5);
    assert!(count <= 5);
    let csv = fs::read_to_string(tmp.path().join("atoms.csv")).unwrap();
    assert!(csv.starts_with("family,n,n',weight,x1,x2\n"));
}

#[test]
fn diracs_scenario_solves_within_bound() {
    let tmp = TempDir::new().unwrap();
    let problem = simulate(&config("diracs.toml"), tmp.path(), None);
    let o = run(&["solve", "--config", s(&problem), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let (count, bound) = sparsity(tmp.path());
    assert_eq!(bound, 4);
    assert!(count <= 4);
}

#[test]
fn cube_scenario_solves() {
    let tmp = TempDir::new().unwrap();
    let problem = simulate(&config("cube.toml"), tmp.path(), None);
    let o = run(&["solve", "--config", s(&problem), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let (count, bound) = sparsity(tmp.path());
    assert_eq!(bound, 6);
    assert!(count <= 6);
}

#[test]
fn random_truth_has_requested_shape() {
    let tmp = TempDir::new().unwrap();
    let text = fs::read_to_string(simulate(&config("boxes.toml"), tmp.path(), None)).unwrap();
    let truth = text.lines().find(|l| l.starts_with("atoms = ")).unwrap();
    assert_eq!(truth.matches("\"green_green").count(), 10);
    assert_eq!(truth.matches("\"poly_green").count(), 5);
    assert_eq!(truth.matches("\"green_poly").count(), 5);
}

#[test]
fn noiseless_data_equals_exact_measurements() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_doc(
        tmp.path(),
        "known.toml",
        r#"schema_version = 1
seed = 9

[operators]
alpha1 = 0.0
order1 = 1
alpha2 = 0.0
order2 = 1

[truth]
atoms = ["green_green,0,0,1.5,0.25,0.5", "poly_green,1,0,-0.5,,0.3"]

[[functionals]]
kind = "box"
bounds = [0.1, 0.6, 0.2, 0.9]

[[functionals]]
kind = "box"
bounds = [0.0, 1.0, 0.0, 0.4]
"#,
    );
    let out = tmp.path().join("sim");
    let text = fs::read_to_string(simulate(&cfg, &out, None)).unwrap();
    let y: Vec<f64> = text
        .lines()
        .find_map(|l| l.strip_prefix("y = ["))
        .unwrap()
        .trim_end_matches(']')
        .split(',')
        .map(|v| v.trim().parse().unwrap())
        .collect();
    let d = Odo::derivative(1).unwrap();
    let spline = TensorSpline::fundamental(
        d,
        d,
        Domain::unit(),
        vec![
            TensorAtom::TensorGreen {
                a: 1.5,
                x1: 0.25,
                x2: 0.5,
            },
            TensorAtom::PolyGreen {
                n: 1,
                b: -0.5,
                y: 0.3,
            },
        ],
    )
    .unwrap();
    let fwd = ForwardOperator::new(
        vec![
            MeasurementFunctional::unit_box(Rect::new(0.1, 0.6, 0.2, 0.9).unwrap()),
            MeasurementFunctional::unit_box(Rect::new(0.0, 1.0, 0.0, 0.4).unwrap()),
        ],
        Domain::unit(),
    );
    assert_eq!(y, fwd.measure_all(&spline));
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let tmp = TempDir::new().unwrap();
    let a = fs::read(simulate(
        &config("boxes.toml"),
        &tmp.path().join("a"),
        Some("5"),
    ))
    .unwrap();
    let b = fs::read(simulate(
        &config("boxes.toml"),
        &tmp.path().join("b"),
        Some("5"),
    ))
    .unwrap();
    let c = fs::read(simulate(
        &config("boxes.toml"),
        &tmp.path().join("c"),
        Some("6"),
    ))
    .unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn solve_and_render_outputs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let problem = simulate(&config("diracs.toml"), tmp.path(), None);
    let mut outputs = Vec::new();
    for run_dir in ["x", "y"] {
        let dir = tmp.path().join(run_dir);
        assert_eq!(
            code(&run(&["solve", "--config", s(&problem), "--out", s(&dir)])),
            0
        );
        let r = run(&[
            "render",
            "--config",
            s(&dir.join("result.toml")),
            "--out",
            s(&dir),
            "--resolution",
            "64",
        ]);
        assert_eq!(code(&r), 0);
        outputs.push(
            [
                "atoms.csv",
                "result.toml",
                "heatmap.svg",
                "decomposition.svg",
            ]
            .map(|f| fs::read(dir.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn result_document_round_trips() {
    let tmp = TempDir::new().unwrap();
    let problem = simulate(&config("boxes.toml"), tmp.path(), None);
    assert_eq!(
        code(&run(&[
            "solve",
            "--config",
            s(&problem),
            "--out",
            s(tmp.path())
        ])),
        0
    );
    let first = fs::read_to_string(tmp.path().join("result.toml")).unwrap();
    // re-solving the result document rewrites it unchanged
    let again = tmp.path().join("again");
    let result = tmp.path().join("result.toml");
    assert_eq!(
        code(&run(&["solve", "--config", s(&result), "--out", s(&again)])),
        0
    );
    assert_eq!(
        fs::read_to_string(again.join("result.toml")).unwrap(),
        first
    );
}

#[test]
fn diracs_with_first_order_operator_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_doc(
        tmp.path(),
        "bad.toml",
        r#"schema_version = 1
seed = 1
lambda = 0.1
y = [1.0, 2.0, 3.0]

[operators]
alpha1 = 0.0
order1 = 1
alpha2 = 0.0
order2 = 2

[[functionals]]
kind = "dirac"
point = [0.2, 0.3]

[[functionals]]
kind = "dirac"
point = [0.5, 0.6]

[[functionals]]
kind = "dirac"
point = [0.7, 0.1]
"#,
    );
    let o = run(&["solve", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("DiracNeedsOrderTwo"));
}

#[test]
fn unreachable_tolerance_exits_3() {
    let tmp = TempDir::new().unwrap();
    let problem = simulate(&config("boxes.toml"), tmp.path(), None);
    let text = fs::read_to_string(&problem)
        .unwrap()
        .replace("max_iter = 200000", "max_iter = 30");
    let cfg = write_doc(tmp.path(), "short.toml", &text);
    let o = run(&[
        "solve",
        "--config",
        s(&cfg),
        "--out",
        s(tmp.path()),
        "--tol",
        "1e-300",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_certificate_exits_4() {
    let tmp = TempDir::new().unwrap();
    let problem = simulate(&config("boxes.toml"), tmp.path(), None);
    let text = fs::read_to_string(&problem)
        .unwrap()
        .replace("max_iter = 200000", "max_iter = 200000\ncertify_tol = -1.0");
    let cfg = write_doc(tmp.path(), "strict.toml", &text);
    let o = run(&["solve", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(code(&o), 4);
    let cert = fs::read_to_string(tmp.path().join("certification.txt")).unwrap();
    assert!(cert.contains("gap FAIL"));
}

#[test]
fn input_and_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.toml");
    assert_eq!(code(&run(&["solve", "--config", s(&missing)])), 1);
    let bad = write_doc(tmp.path(), "v9.toml", "schema_version = 9\nseed = 0\n");
    assert_eq!(code(&run(&["solve", "--config", s(&bad)])), 1);
    assert_eq!(code(&run(&["solve"])), 64);
    assert_eq!(
        code(&run(&[
            "render",
            "--config",
            "x",
            "--extended-window",
            "1,0,0,1"
        ])),
        64
    );
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn verify_exit_codes() {
    let ok = run(&["verify", "--suite", "admissibility", "--seed", "3"]);
    assert_eq!(code(&ok), 0);
    let out = String::from_utf8_lossy(&ok.stdout);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
    let bio = run(&["verify", "--suite", "biorthogonality", "--count", "4"]);
    assert_eq!(code(&bio), 0);
    assert_eq!(code(&run(&["verify", "--suite", "nonexistent"])), 1);
}
