//! Acceptance criteria 1-11, one test each. Every test writes a single
//! `PASS`/`FAIL` line straight to stdout so it shows up without `--nocapture`.

use flowlab::runner::suite::{self, Criterion};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

fn report(c: Criterion) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", c.line()).unwrap();
    out.flush().unwrap();
    assert!(c.passed, "{}", c.line());
}

#[test]
fn criterion_01_jacobi_closed_forms() {
    report(suite::criterion_1());
}

#[test]
fn criterion_02_unstable_curvature() {
    report(suite::criterion_2());
}

#[test]
fn criterion_03_closed_orbit_exponent_bound() {
    report(suite::criterion_3());
}

#[test]
fn criterion_04_small_exponent_orbits() {
    report(suite::criterion_4());
}

#[test]
fn criterion_05_pressure_oracle_agreement() {
    report(suite::criterion_5());
}

#[test]
fn criterion_06_pressure_structure() {
    report(suite::criterion_6());
}

#[test]
fn criterion_07_legendre_spectrum() {
    report(suite::criterion_7());
}

#[test]
fn criterion_08_nested_convergence() {
    report(suite::criterion_8());
}

#[test]
fn criterion_09_coding_construction() {
    report(suite::criterion_9());
}

#[test]
fn criterion_10_hyperbolicity_certificate() {
    report(suite::criterion_10());
}

fn config_tree() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

#[test]
fn criterion_11_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_flowlab"))
            .args(["suite", "all", "--config"])
            .arg(config_tree())
            .arg("--out")
            .arg(d.path())
            .output()
            .unwrap();
        assert!(
            d.path().join("summary.json").exists(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
    }
    let (a, b) = (snapshot(dirs[0].path()), snapshot(dirs[1].path()));
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let runs = a.keys().filter(|k| k.ends_with("record.json")).count();
    let passed = differing.is_empty() && runs > 0 && a.len() == b.len();
    report(Criterion {
        id: "C11".into(),
        title: "determinism".into(),
        passed,
        detail: format!(
            "{} files from {runs} runs compared, {} differ {:?}",
            a.len(),
            differing.len(),
            differing
        ),
    });
}
