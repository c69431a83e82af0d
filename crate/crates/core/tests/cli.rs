use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jlolab::matrix::ComplexMatrix;
use jlolab::spectral::trivial_triple;
use jlolab::{GradedSpace, Idempotent, SpectralTripleFD};
use serde_json::Value;
use tempfile::TempDir;

fn jlolab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jlolab"))
        .args(args)
        .current_dir(dir)
        .env("JLOLAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn diagonal_projection(entries: &[f64]) -> Idempotent {
    let rows: Vec<Vec<f64>> = (0..entries.len())
        .map(|i| {
            (0..entries.len())
                .map(|j| if i == j { entries[i] } else { 0.0 })
                .collect()
        })
        .collect();
    let rows: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    Idempotent::new(ComplexMatrix::from_real_rows(&rows), 1).unwrap()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn default_verify_passes_with_many_identities() {
    let dir = TempDir::new().unwrap();
    let o = jlolab(dir.path(), &["verify", "--report", "r.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(dir.path(), "r.json");
    assert_eq!(r["schema"], 1);
    let checks = r["checks"].as_array().unwrap();
    let mut names: Vec<&str> = checks.iter().map(|c| c["identity"].as_str().unwrap()).collect();
    names.dedup();
    assert!(names.len() >= 10);
    assert!(checks.iter().all(|c| c["pass"] == true));
    assert!(dir.path().join("r.txt").exists());
}

#[test]
fn reports_are_reproducible() {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    for dir in &dirs {
        let o = jlolab(
            dir.path(),
            &["verify", "--trials", "2", "--seed", "9", "--report", "r.json"],
        );
        assert_eq!(o.status.code(), Some(0));
    }
    let (mut a, mut b) = (report(dirs[0].path(), "r.json"), report(dirs[1].path(), "r.json"));
    a["timestamp"] = Value::Null;
    b["timestamp"] = Value::Null;
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn unattainable_tolerance_fails() {
    let dir = TempDir::new().unwrap();
    let o = jlolab(dir.path(), &["verify", "--trials", "1", "--tolerance", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_trials_is_a_vacuous_pass() {
    let dir = TempDir::new().unwrap();
    let o = jlolab(dir.path(), &["verify", "--trials", "0", "--report", "z.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trials = 0"));
    assert_eq!(report(dir.path(), "z.json")["checks"].as_array().unwrap().len(), 0);
}

#[test]
fn config_file_and_errors() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"trials": 1, "dims": [[1, 2]], "max_degree": 1, "mc_samples": 5000}"#,
    )
    .unwrap();
    let o = jlolab(
        dir.path(),
        &["verify", "--config", "c.json", "--report", "c-report.json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(report(dir.path(), "c-report.json")["config"]["dims"][0][1], 2);

    std::fs::write(dir.path().join("bad.json"), r#"{"trials": "many"}"#).unwrap();
    assert_eq!(
        jlolab(dir.path(), &["verify", "--config", "bad.json"]).status.code(),
        Some(2)
    );
    std::fs::write(dir.path().join("deg.json"), r#"{"max_degree": 5}"#).unwrap();
    assert_eq!(
        jlolab(dir.path(), &["verify", "--config", "deg.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        jlolab(dir.path(), &["verify", "--config", "missing.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(jlolab(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(jlolab(dir.path(), &["verify", "--trials", "-3"]).status.code(), Some(2));
}

#[test]
fn index_of_rank_one_projection() {
    let dir = TempDir::new().unwrap();
    let t = write_json(dir.path(), "t.json", &trivial_triple(GradedSpace::new(2, 1)));
    let e = write_json(dir.path(), "e.json", &diagonal_projection(&[1.0, 0.0, 0.0]));
    let o = jlolab(dir.path(), &["index", t.to_str().unwrap(), e.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("pairing 1.000000000000"), "{}", stdout(&o));
    assert!(stdout(&o).contains("fredholm index 1,"));
}

#[test]
fn index_of_unit_is_zero() {
    let dir = TempDir::new().unwrap();
    let t = write_json(dir.path(), "t.json", &trivial_triple(GradedSpace::new(1, 1)));
    let e = write_json(dir.path(), "e.json", &Idempotent::unit(2));
    let o = jlolab(dir.path(), &["index", t.to_str().unwrap(), e.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("fredholm index 0,"));
}

#[test]
fn index_product_law() {
    let dir = TempDir::new().unwrap();
    write_json(dir.path(), "t1.json", &trivial_triple(GradedSpace::new(2, 1)));
    write_json(dir.path(), "e1.json", &diagonal_projection(&[1.0, 1.0, 0.0]));
    write_json(dir.path(), "t2.json", &trivial_triple(GradedSpace::new(1, 2)));
    write_json(dir.path(), "e2.json", &diagonal_projection(&[0.0, 1.0, 0.0]));
    let args = [
        "index",
        "t1.json",
        "e1.json",
        "--times",
        "t2.json",
        "--times-idempotent",
        "e2.json",
    ];
    let o = jlolab(dir.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("product law: 2 × -1 = -2 vs -2"), "{}", stdout(&o));
}

#[test]
fn index_rejects_malformed_input() {
    let dir = TempDir::new().unwrap();
    let t = write_json(dir.path(), "t.json", &trivial_triple(GradedSpace::new(1, 1)));
    std::fs::write(dir.path().join("junk.json"), "{not json").unwrap();
    std::fs::write(
        dir.path().join("notidem.json"),
        r#"{"k": 1, "e": {"rows": 2, "cols": 2, "entries": [[2,0],[0,0],[0,0],[0,0]]}}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("even_d.json"),
        r#"{"dim_even": 1, "dim_odd": 1, "D": {"rows": 2, "cols": 2, "entries": [[1,0],[0,0],[0,0],[0,0]]}, "generators": []}"#,
    )
    .unwrap();
    let t = t.to_str().unwrap();
    assert_eq!(jlolab(dir.path(), &["index", t, "junk.json"]).status.code(), Some(2));
    assert_eq!(jlolab(dir.path(), &["index", t, "notidem.json"]).status.code(), Some(2));
    assert_eq!(
        jlolab(dir.path(), &["index", "even_d.json", "notidem.json"])
            .status
            .code(),
        Some(2)
    );
    let wrong = write_json(dir.path(), "wrong.json", &Idempotent::unit(3));
    assert_eq!(
        jlolab(dir.path(), &["index", t, wrong.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn index_fails_when_series_diverges() {
    let dir = TempDir::new().unwrap();
    // a projection far from commuting with a large D
    let big = SpectralTripleFD::new(
        GradedSpace::new(1, 1),
        ComplexMatrix::from_real_rows(&[&[0.0, 40.0], &[40.0, 0.0]]),
        vec![],
    )
    .unwrap();
    let t = write_json(dir.path(), "t.json", &big);
    let e = write_json(dir.path(), "e.json", &diagonal_projection(&[1.0, 0.0]));
    let o = jlolab(dir.path(), &["index", t.to_str().unwrap(), e.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn decompose_counts_and_volumes() {
    let dir = TempDir::new().unwrap();
    let o = jlolab(
        dir.path(),
        &["decompose", "--p", "1", "--q", "1", "--samples", "100000"],
    );
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("(1,1)-shuffles: 2 (closed form 2)"));
    assert_eq!(s.matches("0.500000").count(), 2, "{s}");

    let o = jlolab(dir.path(), &["decompose", "--p", "2", "--q", "2", "--samples", "20000"]);
    assert!(stdout(&o).contains("(2,2)-shuffles: 6 (closed form 6)"));
    let o = jlolab(dir.path(), &["decompose", "--cyclic", "1,1", "--samples", "20000"]);
    assert!(stdout(&o).contains("(1,1)-cyclic shuffles, r = 2: 12 (closed form 12)"));
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn decompose_rejects_large_degree() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        jlolab(dir.path(), &["decompose", "--p", "4", "--q", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        jlolab(dir.path(), &["decompose", "--cyclic", "2,2,2"]).status.code(),
        Some(2)
    );
    assert_eq!(jlolab(dir.path(), &["decompose", "--p", "1"]).status.code(), Some(2));
}

#[test]
fn bench_runs() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"dims": [[1, 1], [2, 1]], "max_degree": 2, "mc_samples": 2000}"#,
    )
    .unwrap();
    let o = jlolab(dir.path(), &["bench", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 7);
}
