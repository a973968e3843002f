use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use abem_core::adaptive::{read_trace_csv, write_trace_csv};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("abemlab-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn abemlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abemlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn run_config(dir: &Path, text: &str) -> Output {
    fs::write(dir.join("exp.cfg"), text).unwrap();
    abemlab(dir, &["run", "exp.cfg"])
}

const SLIT: &str = "problem = slit
equation_tag = weakly_singular
estimator_kind = two_level
max_dofs = 64
compare_uniform = true
outputs = out
";

#[test]
fn run_writes_all_artifacts() {
    let dir = scratch("artifacts");
    let out = run_config(&dir, SLIT);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let o = dir.join("out");
    let rows = read_trace_csv(fs::File::open(o.join("trace.csv")).unwrap()).unwrap();
    assert!(rows.len() >= 10);
    assert!(rows.iter().all(|r| r.dofs <= 64));
    for l in 0..rows.len() {
        let mesh = fs::read_to_string(o.join(format!("mesh_{l}.txt"))).unwrap();
        let first: Vec<&str> = mesh.lines().next().unwrap().split_whitespace().collect();
        assert_eq!(first.len(), 7);
        assert_eq!(first[0], l.to_string());
        let est = fs::read_to_string(o.join(format!("estimators_{l}.txt"))).unwrap();
        assert!(est
            .lines()
            .all(|line| line.split_whitespace().nth(1) == Some("two_level")));
    }
    assert!(o.join("trace_uniform.csv").exists());
    let rates = fs::read_to_string(o.join("rates.txt")).unwrap();
    assert!(rates.starts_with("adaptive -"));
    assert!(rates.contains("\nuniform -"));
    let svg = fs::read_to_string(o.join("convergence.svg")).unwrap();
    assert!(svg.contains("<polyline"));
}

#[test]
fn traces_are_deterministic() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    assert!(run_config(&a, SLIT).status.success());
    assert!(run_config(&b, SLIT).status.success());
    let ta = fs::read(a.join("out/trace.csv")).unwrap();
    let tb = fs::read(b.join("out/trace.csv")).unwrap();
    assert_eq!(ta, tb);
    // and the CSV round-trips byte for byte
    let mut again = Vec::new();
    write_trace_csv(&read_trace_csv(ta.as_slice()).unwrap(), &mut again).unwrap();
    assert_eq!(again, ta);
}

#[test]
fn invalid_theta_names_the_field() {
    let dir = scratch("theta");
    let out = run_config(&dir, &SLIT.replace("max_dofs = 64", "theta = 1.5"));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`theta`"));
}

#[test]
fn faermann_rejected_for_hypersingular() {
    let dir = scratch("mismatch");
    let out = run_config(
        &dir,
        "problem = slit\nequation_tag = hypersingular\nestimator_kind = faermann\n",
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`estimator_kind`"));
}

#[test]
fn incompatible_data_on_closed_curve() {
    let dir = scratch("compat");
    for rhs in ["one", "arc_length"] {
        let out = run_config(
            &dir,
            &format!("problem = square_closed\nequation_tag = hypersingular_stabilized\nestimator_kind = two_level\nseed_mesh_elements = 4\nrhs = {rhs}\n"),
        );
        assert_eq!(out.status.code(), Some(1), "{rhs}");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("`rhs`"),
            "{rhs}"
        );
    }
}

#[test]
fn verify_accepts_and_rejects() {
    let dir = scratch("verify");
    assert!(run_config(&dir, SLIT).status.success());
    let ok = abemlab(&dir, &["verify", "out/trace.csv"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let mut rows = read_trace_csv(fs::File::open(dir.join("out/trace.csv")).unwrap()).unwrap();
    let n = rows.len();
    rows[n - 3].a2_c = 1e6;
    let mut buf = Vec::new();
    write_trace_csv(&rows, &mut buf).unwrap();
    fs::write(dir.join("bad.csv"), buf).unwrap();
    let bad = abemlab(&dir, &["verify", "bad.csv"]);
    assert_eq!(bad.status.code(), Some(3));
    fs::write(dir.join("garbage.csv"), "a,b\n1,2\n").unwrap();
    assert_eq!(
        abemlab(&dir, &["verify", "garbage.csv"]).status.code(),
        Some(1)
    );
}

#[test]
fn oracle_self_test() {
    let dir = scratch("oracle");
    let out = abemlab(&dir, &["oracle", "--pairs", "12"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 above"));
}

#[test]
fn synthetic_data_is_reproduced() {
    let dir = scratch("synthetic");
    let out = run_config(
        &dir,
        "problem = square_closed\nequation_tag = hypersingular_stabilized\nestimator_kind = weighted_residual\nseed_mesh_elements = 8\nrhs = synthetic:5\noutputs = out\n",
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = read_trace_csv(fs::File::open(dir.join("out/trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].mu < 1e-8);
}
