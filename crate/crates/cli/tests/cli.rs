use std::path::Path;
use std::process::{Command, Output};

use sylkrylov::linalg::{write_dense, write_sparse};
use sylkrylov::problems::{random_dense, random_nonsymmetric, random_spd};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sylkrylov"))
        .args(args)
        .output()
        .expect("run sylkrylov")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).trim().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Writes a nonsymmetric Sylvester problem of size 30 x 20 with s = 2.
fn sylvester_inputs(dir: &Path) {
    write_sparse(&random_nonsymmetric(30, 0.2, 1), path(dir, "A.mtx")).unwrap();
    write_sparse(&random_nonsymmetric(20, 0.2, 2), path(dir, "B.mtx")).unwrap();
    write_dense(&random_dense(30, 2, 3), path(dir, "C1.mtx")).unwrap();
    write_dense(&random_dense(20, 2, 4), path(dir, "C2.mtx")).unwrap();
}

#[test]
fn sylvester_solve_then_check() {
    let dir = tempfile::tempdir().unwrap();
    sylvester_inputs(dir.path());
    let d = |n| path(dir.path(), n);
    let sol = d("sol");
    let out = cli(&[
        "solve",
        "--a",
        &d("A.mtx"),
        "--b",
        &d("B.mtx"),
        "--c1",
        &d("C1.mtx"),
        "--c2",
        &d("C2.mtx"),
        "--tol",
        "1e-10",
        "--out",
        &sol,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["V.mtx", "core.mtx", "W.mtx", "history.csv", "meta.json"] {
        assert!(Path::new(&sol).join(f).exists(), "missing {f}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&sol).join("meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["method"], "f-bicgstab");
    assert_eq!(meta["status"], "converged");

    let checked = cli(&["check", &sol]);
    assert_eq!(code(&checked), 0);
    let res: f64 = stdout(&checked).parse().unwrap();
    assert!(res <= 1e-9, "residual {res}");

    // Checking against a different right-hand side fails.
    write_dense(&random_dense(30, 2, 99), d("other.mtx")).unwrap();
    let mismatched = cli(&["check", &sol, "--c1", &d("other.mtx")]);
    assert_eq!(code(&mismatched), 4);
}

#[test]
fn lyapunov_with_generated_rhs_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n| path(dir.path(), n);
    write_sparse(&random_spd(40, 0.2, 5), d("A.mtx")).unwrap();
    let sol = d("sol");
    let out = cli(&[
        "solve",
        "--a",
        &d("A.mtx"),
        "--rank",
        "3",
        "--seed",
        "11",
        "--out",
        &sol,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(&sol).join("inputs").join("C1.mtx").exists());
    assert!(Path::new(&sol).join("V.mtx").exists());
    assert_eq!(code(&cli(&["check", &sol])), 0);

    // Same seed, same right-hand side: the truncated solver's symmetric output checks too.
    let sym = d("sym");
    let out = cli(&[
        "solve",
        "--a",
        &d("A.mtx"),
        "--rank",
        "3",
        "--seed",
        "11",
        "--method",
        "t-cg",
        "--out",
        &sym,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(Path::new(&sol).join("inputs").join("C1.mtx")).unwrap(),
        std::fs::read(Path::new(&sym).join("inputs").join("C1.mtx")).unwrap()
    );
    for f in ["Z.mtx", "D.mtx"] {
        assert!(Path::new(&sym).join(f).exists(), "missing {f}");
    }
    assert_eq!(code(&cli(&["check", &sym])), 0);
}

#[test]
fn example_mode_records_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let sol = path(dir.path(), "sol");
    let out = cli(&[
        "solve",
        "--example",
        "ex2",
        "--method",
        "f-bicgstab",
        "--out",
        &sol,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(&sol).join("inputs").join("A.mtx").exists());
    assert_eq!(code(&cli(&["check", &sol])), 0);
}

#[test]
fn manifest_paths_resolve_relative_to_manifest() {
    let dir = tempfile::tempdir().unwrap();
    sylvester_inputs(dir.path());
    let manifest = path(dir.path(), "run.json");
    std::fs::write(
        &manifest,
        r#"{"a": "A.mtx", "b": "B.mtx", "c1": "C1.mtx", "c2": "C2.mtx", "method": "mo-bicgstab", "tol": 1e-9}"#,
    )
    .unwrap();
    let sol = path(dir.path(), "sol");
    let out = cli(&["solve", "--manifest", &manifest, "--out", &sol]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(&sol).join("X.mtx").exists());
    assert_eq!(code(&cli(&["check", &sol])), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    sylvester_inputs(dir.path());
    let d = |n| path(dir.path(), n);
    let sol = d("sol");

    let missing = cli(&["solve", "--a", &d("nope.mtx"), "--out", &sol]);
    assert_eq!(code(&missing), 1);
    assert!(!Path::new(&sol).exists());

    assert_eq!(
        code(&cli(&[
            "solve",
            "--a",
            &d("A.mtx"),
            "--method",
            "f-gmres",
            "--out",
            &sol
        ])),
        1
    );
    assert_eq!(code(&cli(&["solve", "--bogus"])), 1);
    assert_eq!(code(&cli(&["bench", "ex9"])), 1);
    assert_eq!(code(&cli(&["check", &d("absent")])), 1);
    assert_eq!(code(&cli(&["--help"])), 0);

    let capped = cli(&[
        "solve",
        "--a",
        &d("A.mtx"),
        "--b",
        &d("B.mtx"),
        "--c1",
        &d("C1.mtx"),
        "--c2",
        &d("C2.mtx"),
        "--tol",
        "1e-14",
        "--max-iter",
        "1",
        "--out",
        &sol,
    ]);
    assert_eq!(code(&capped), 2);
}

#[test]
fn bench_writes_report_and_histories() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = path(dir.path(), "bench");
    let out = cli(&[
        "bench",
        "ex4",
        "--grid",
        "5",
        "--methods",
        "f-bicgstab,t-bicgstab",
        "--eps-trunc",
        "1e-8,1e-12",
        "--out",
        &out_dir,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(&out_dir).join("ex4_desk.json")).unwrap(),
    )
    .unwrap();
    let records = report["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    let mut labels: Vec<String> = Vec::new();
    for r in records {
        let label = match r["eps_t"].as_f64() {
            Some(e) => format!("{}_eps{e:e}", r["method"].as_str().unwrap()),
            None => r["method"].as_str().unwrap().to_string(),
        };
        let csv =
            std::fs::read_to_string(Path::new(&out_dir).join(format!("ex4_desk_{label}.csv")))
                .unwrap();
        assert!(csv.starts_with("iteration,rel_residual"));
        // Header plus one row per iteration, including the initial residual.
        let iterations = r["iterations"].as_u64().unwrap() as usize;
        assert!(iterations > 0);
        assert_eq!(csv.lines().count(), iterations + 2, "{label}");
        labels.push(label);
    }
    assert_eq!(
        labels,
        ["f-bicgstab", "t-bicgstab_eps1e-8", "t-bicgstab_eps1e-12"]
    );
}
