// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use sha2::{Digest, Sha256};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic")
}

fn erasure(args: &[&str], out: &Path) -> Output {
    let config = fixture().join("config.toml");
    Command::new(env!("CARGO_BIN_EXE_erasure"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(out)
        .args(["--layers", "1,9"])
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
}

/// Output directory with the probe grid trained once for all tests.
fn trained() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        assert_ok(&erasure(&["probes", "train"], &dir));
        dir
    })
}

/// Fresh output directory sharing the trained probes.
fn with_probes() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let probes = dir.path().join("probes");
    std::fs::create_dir_all(&probes).unwrap();
    for e in std::fs::read_dir(trained().join("probes")).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), probes.join(e.file_name())).unwrap();
    }
    dir
}

fn manifest(out: &Path, command: &str) -> Value {
    let path = out
        .join("manifests")
        .join(format!("{}.json", command.replace(' ', "-")));
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// Every listed artifact exists and hashes to its recorded digest.
fn check_artifacts(out: &Path, m: &Value) {
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for a in artifacts {
        let rel = a["path"].as_str().unwrap();
        let path = if Path::new(rel).is_absolute() {
            PathBuf::from(rel)
        } else {
            out.join(rel)
        };
        let bytes = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            hex::encode(Sha256::digest(&bytes)),
            a["sha256"].as_str().unwrap(),
            "{rel}"
        );
        assert_eq!(bytes.len() as u64, a["bytes"].as_u64().unwrap());
    }
}

#[test]
fn shipped_fixture_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_erasure"))
        .args(["synth", "--dtype", "f16", "--out"])
        .arg(dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert_ok(&o);
    let mut compared = 0;
    for rel in ["annotations.jsonl", "config.toml"] {
        assert_eq!(
            std::fs::read(dir.path().join(rel)).unwrap(),
            std::fs::read(fixture().join(rel)).unwrap(),
            "{rel}"
        );
        compared += 1;
    }
    for e in std::fs::read_dir(fixture().join("corpus")).unwrap() {
        let name = e.unwrap().file_name();
        let fresh = std::fs::read(dir.path().join("corpus").join(&name)).unwrap();
        assert_eq!(
            fresh,
            std::fs::read(fixture().join("corpus").join(&name)).unwrap(),
            "{name:?}"
        );
        compared += 1;
    }
    assert!(compared > 10);
}

#[test]
fn probes_train_writes_every_cell() {
    let out = trained();
    for layer in [1, 9] {
        for offset in [0, -1, -2] {
            assert!(out
                .join(format!("probes/probe_l{layer}_o{offset}.probe"))
                .is_file());
        }
    }
    let m = manifest(out, "probes train");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["schema_version"], 1);
    assert_eq!(m["seeds"]["components"].as_object().unwrap().len(), 12);
    assert!(m["inputs"].as_array().unwrap().len() > 12);
    check_artifacts(out, &m);
}

#[test]
fn missing_probe_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = erasure(&["vocab", "build"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(
        err.contains("missing probe for") && err.contains("(layer 1, offset 0)"),
        "{err}"
    );
    assert!(err.contains("(layer 9, offset -2)"), "{err}");
    let m = manifest(dir.path(), "vocab build");
    assert_eq!(m["status"], "validation_error");
    assert!(m["error"].as_str().unwrap().contains("layer 1, offset 0"));
}

#[test]
fn single_missing_cell_is_named() {
    let dir = with_probes();
    std::fs::remove_file(dir.path().join("probes/probe_l9_o-1.probe")).unwrap();
    let o = erasure(&["score"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(
        err.contains("(layer 9, offset -1)") && !err.contains("offset 0)"),
        "{err}"
    );
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&#39;")
}

#[test]
fn segment_report_caption_names_best_segment() {
    let dir = with_probes();
    assert_ok(&erasure(&["segment", "--doc", "d0", "--report"], dir.path()));
    let json: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("segments/d0.json")).unwrap()).unwrap();
    let best = json["segments"]
        .as_array()
        .unwrap()
        .iter()
        .fold(None::<&Value>, |acc, s| match acc {
            Some(b) if b["psi"].as_f64().unwrap() >= s["psi"].as_f64().unwrap() => Some(b),
            _ => Some(s),
        })
        .unwrap();
    let html = std::fs::read_to_string(dir.path().join("reports/d0.html")).unwrap();
    let caption = format!(
        "<b>&ldquo;{}&rdquo;</b> (&psi; = {:.3})",
        html_escape(best["surface"].as_str().unwrap()),
        best["psi"].as_f64().unwrap()
    );
    assert!(html.contains(&caption), "caption {caption} not in report");
    let files: Vec<_> = std::fs::read_dir(dir.path().join("reports")).unwrap().collect();
    assert_eq!(files.len(), 1);
    check_artifacts(dir.path(), &manifest(dir.path(), "segment"));
}

fn read_tree(root: &Path, rel: &str) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(root.join(rel))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        assert_ok(&erasure(&["probes", "train", "--jobs", jobs], dir.path()));
        assert_ok(&erasure(&["vocab", "build", "--jobs", jobs], dir.path()));
    }
    assert_eq!(read_tree(a.path(), "probes"), read_tree(b.path(), "probes"));
    assert_eq!(read_tree(a.path(), "segments"), read_tree(b.path(), "segments"));
    let va = std::fs::read(a.path().join("vocab.tsv")).unwrap();
    assert_eq!(va, std::fs::read(b.path().join("vocab.tsv")).unwrap());
    assert!(va.split(|&c| c == b'\n').count() > 3, "vocabulary is empty");
    let (ma, mb) = (
        manifest(a.path(), "vocab build"),
        manifest(b.path(), "vocab build"),
    );
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    check_artifacts(a.path(), &ma);
}

#[test]
fn different_seed_changes_split() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&erasure(
        &["probes", "train", "--seed", "5", "--offsets", "0"],
        dir.path(),
    ));
    let here = manifest(dir.path(), "probes train");
    let base = manifest(trained(), "probes train");
    assert_ne!(
        here["seeds"]["components"]["split/l1/o0"],
        base["seeds"]["components"]["split/l1/o0"]
    );
    assert_ne!(here["config_sha256"], base["config_sha256"]);
}

#[test]
fn downstream_commands_write_their_reports() {
    let dir = with_probes();
    let out = dir.path();
    assert_ok(&erasure(&["vocab", "build"], out));
    assert_ok(&erasure(&["vocab", "eval"], out));
    let eval: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("vocab_eval.json")).unwrap()).unwrap();
    assert_eq!(eval["mte"]["recall"], 1.0);
    assert_ok(&erasure(&["ablate-l", "--ls", "9"], out));
    let ablation = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(ablation.lines().count(), 2);
    assert!(ablation.lines().nth(1).unwrap().starts_with("9,"));
    assert_ok(&erasure(&["probes", "eval"], out));
    assert_ok(&erasure(&["report"], out));
    assert_eq!(
        read_tree(out, "curves")
            .iter()
            .filter(|(n, _)| n.ends_with(".svg"))
            .count(),
        3
    );
    assert_ok(&erasure(&["freq-audit"], out));
    assert!(
        std::fs::read_to_string(out.join("freq_audit.tsv"))
            .unwrap()
            .lines()
            .count()
            > 1
    );
    assert_ok(&erasure(&["score", "--doc", "d3"], out));
    assert!(out.join("deltas/d3.csv").is_file());
    for cmd in [
        "vocab build",
        "vocab eval",
        "ablate-l",
        "probes eval",
        "report",
        "freq-audit",
        "score",
    ] {
        let m = manifest(out, cmd);
        assert_eq!(m["status"], "ok", "{cmd}");
        check_artifacts(out, &m);
    }
}

#[test]
fn validation_failures_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["score", "--L", "5"],
        vec!["score", "--offsets", "0,7"],
        vec!["segment", "--doc", "nope"],
        vec!["report", "--scheme", "sideways"],
        vec!["frobnicate"],
    ] {
        let o = erasure(&args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "corpus = \"x\"\nlayrs = [1]\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_erasure"))
        .args(["score", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(manifest(dir.path(), "score")["status"], "validation_error");
}

#[test]
fn corrupt_probe_is_a_runtime_error() {
    let dir = with_probes();
    let path = dir.path().join("probes/probe_l1_o0.probe");
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let o = erasure(&["score"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(manifest(dir.path(), "score")["status"], "runtime_error");
}
