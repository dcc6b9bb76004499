use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chebfill"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mesh_gen_then_solve_square() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(
        dir.path(),
        &[
            "mesh-gen", "--domain", "square", "--nx", "1", "--ny", "1", "--order", "1",
        ],
    );
    assert!(gen.status.success(), "{gen:?}");
    let mesh = dir.path().join("mesh.json");
    assert!(mesh.exists());

    let solve = run(
        dir.path(),
        &[
            "solve",
            "--orders",
            "6",
            "--mesh",
            mesh.to_str().unwrap(),
            "--show",
            "2",
        ],
    );
    assert!(solve.status.success(), "{solve:?}");
    let out = stdout(&solve);
    assert!(out.contains("nullspace 25"), "{out}");
    let csv = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
    let first: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (first - std::f64::consts::PI.powi(2) / 4.0).abs() < 1e-5,
        "{csv}"
    );
}

#[test]
fn assemble_writes_symmetric_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(
        dir.path(),
        &["mesh-gen", "--nx", "2", "--ny", "2", "--order", "2"],
    );
    assert!(gen.status.success());
    let mesh = dir.path().join("mesh.json");
    let out = run(
        dir.path(),
        &[
            "assemble",
            "--orders",
            "2,3",
            "--backend",
            "direct",
            "--mesh",
            mesh.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let text = fs::read_to_string(dir.path().join("mass.txt")).unwrap();
    let entries: std::collections::HashMap<(usize, usize), f64> = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (
                (f[0].parse().unwrap(), f[1].parse().unwrap()),
                f[2].parse().unwrap(),
            )
        })
        .collect();
    assert!(!entries.is_empty());
    for (&(i, j), &v) in &entries {
        assert_eq!(entries.get(&(j, i)), Some(&v));
    }
}

#[test]
fn verify_passes_with_small_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "verify",
            "--elements",
            "2",
            "--max-order",
            "3",
            "--seed",
            "7",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn bench_and_convergence_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(
        dir.path(),
        &["mesh-gen", "--nx", "1", "--ny", "1", "--order", "2"],
    );
    assert!(gen.status.success());
    let mesh = dir.path().join("mesh.json");
    let mesh = mesh.to_str().unwrap();
    let bench = run(
        dir.path(),
        &["bench", "--sweep", "2,3", "--reps", "1", "--mesh", mesh],
    );
    assert!(bench.status.success(), "{bench:?}");
    let csv = fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("bench.md").exists());

    let conv = run(
        dir.path(),
        &[
            "convergence",
            "--sweep",
            "2,3",
            "--reference-order",
            "4",
            "--modes",
            "2",
            "--mesh",
            mesh,
        ],
    );
    assert!(conv.status.success(), "{conv:?}");
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn usage_errors_exit_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve", "--orders", "0"][..],
        &["frobnicate"],
        &["solve", "--mesh", "/nonexistent/mesh.json"],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {out:?}");
    }
}
