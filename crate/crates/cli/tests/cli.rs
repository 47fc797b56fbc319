use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visual-vault")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Setup {
    dir: TempDir,
    matrix: PathBuf,
}

impl Setup {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let matrix = dir.path().join("matrix.json");
        let o = run(&["matrix", "gen", "--seed", "1", "--out", s(&matrix)]);
        assert!(o.status.success(), "{o:?}");
        Setup { dir, matrix }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn enroll(&self, out: &str, rows: &[&str], seed_hex: &str, extra: &[&str]) -> Output {
        let params = fixture("params_512.json");
        let embs = fixture("micro_embeddings.csv");
        let out = self.path(out);
        let mut args = vec!["enroll", "--params", s(&params), "--matrix", s(&self.matrix)];
        args.extend(["--embeddings", s(&embs), "--seed-hex", seed_hex, "--out", s(&out)]);
        for r in rows {
            args.extend(["--row", r]);
        }
        args.extend(extra);
        run(&args)
    }

    fn recover(&self, vault: &str, rows: &[&str]) -> Output {
        let embs = fixture("micro_embeddings.csv");
        let vault = self.path(vault);
        let mut args = vec!["recover", "--vault", s(&vault), "--matrix", s(&self.matrix), "--embeddings", s(&embs)];
        for r in rows {
            args.extend(["--row", r]);
        }
        run(&args)
    }
}

const SEED: &str = "00112233445566778899aabbccddeeff00112233445566778899aabbccddeeff";

#[test]
fn toy_params_are_written_but_fail_hiding() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("toy.json");
    let o = run(&["params", "gen", "--n", "8", "--r", "2", "--lambda", "1", "--universe", "8", "--rng-seed", "3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let report = stdout(&o);
    assert!(report.contains("[FAIL] hiding (r2)"), "{report}");
    assert!(report.contains("[PASS] q safe prime"), "{report}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["n"], 8);
    assert_eq!(json["q_bits"], 32);
    let o = run(&["params", "validate", "--params", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_radius_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bad.json");
    let o = run(&["params", "gen", "--r", "300", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn default_params_fail_only_in_strict_mode() {
    let p = fixture("params_512.json");
    assert!(run(&["params", "validate", "--params", s(&p)]).status.success());
    assert_eq!(run(&["params", "validate", "--params", s(&p), "--strict"]).status.code(), Some(2));
}

#[test]
fn matrix_generation_is_deterministic() {
    let a = Setup::new();
    let other = a.path("again.json");
    assert!(run(&["matrix", "gen", "--seed", "1", "--out", s(&other)]).status.success());
    assert_eq!(std::fs::read(&a.matrix).unwrap(), std::fs::read(&other).unwrap());
    let full = a.path("full.json");
    assert!(run(&["matrix", "gen", "--seed", "1", "--with-entries", "--out", s(&full)]).status.success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&full).unwrap()).unwrap();
    assert!(json["entries"].as_array().unwrap().len() > 25_000);
}

#[test]
fn enroll_then_recover_from_other_views() {
    let t = Setup::new();
    let o = t.enroll("v.json", &["obj003:0"], SEED, &["--rng-seed", "5"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("obj003:0 "));
    for view in ["obj003:0", "obj003:15", "obj003:35"] {
        let o = t.recover("v.json", &[view]);
        assert_eq!(o.status.code(), Some(0), "{view}: {o:?}");
        assert_eq!(stdout(&o).trim(), SEED);
    }
    let o = t.recover("v.json", &["obj004:0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).is_empty());
}

#[test]
fn enrolling_twice_gives_different_records() {
    let t = Setup::new();
    assert!(t.enroll("a.json", &["obj001:0"], SEED, &[]).status.success());
    assert!(t.enroll("b.json", &["obj001:0"], SEED, &[]).status.success());
    assert_ne!(std::fs::read(t.path("a.json")).unwrap(), std::fs::read(t.path("b.json")).unwrap());
    assert_eq!(stdout(&t.recover("b.json", &["obj001:15"])).trim(), SEED);
}

#[test]
fn malformed_inputs_exit_with_two() {
    let t = Setup::new();
    assert!(t.enroll("v.json", &["obj002:0"], SEED, &[]).status.success());
    let text = std::fs::read_to_string(t.path("v.json")).unwrap();
    let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["r"] = serde_json::json!(141);
    std::fs::write(t.path("tampered.json"), json.to_string()).unwrap();
    assert_eq!(t.recover("tampered.json", &["obj002:0"]).status.code(), Some(2));
    std::fs::write(t.path("garbage.json"), "{not json").unwrap();
    assert_eq!(t.recover("garbage.json", &["obj002:0"]).status.code(), Some(2));
    assert_eq!(t.recover("v.json", &["obj999:0"]).status.code(), Some(2));
    assert_eq!(t.enroll("short.json", &["obj002:0"], "0011", &[]).status.code(), Some(2));
}

#[test]
fn multi_object_vault_needs_every_member() {
    let t = Setup::new();
    let rows = ["obj000:0", "obj005:0", "obj007:0"];
    assert_eq!(t.enroll("m.json", &rows, SEED, &[]).status.code(), Some(2), "needs --multi");
    let o = t.enroll("m.json", &rows, SEED, &["--multi"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().count(), 3);
    let o = t.recover("m.json", &["obj000:15", "obj005:35", "obj007:15"]);
    assert_eq!(stdout(&o).trim(), SEED);
    let o = t.recover("m.json", &["obj000:15", "obj006:15", "obj007:15"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(t.recover("m.json", &["obj000:15"]).status.code(), Some(2));
}

#[test]
fn eval_reports_summary_det_and_cross_counts() {
    let t = Setup::new();
    let embs = fixture("micro_embeddings.csv");
    let det = t.path("det.csv");
    let o = run(&["eval", "--embeddings", s(&embs), "--matrix", s(&t.matrix), "--det-out", s(&det)]);
    assert!(o.status.success(), "{o:?}");
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["n_genuine"], 30);
    assert_eq!(summary["n_impostor"], 45);
    assert!(summary["eer"].as_f64().unwrap() < 0.5);
    assert_eq!(std::fs::read_to_string(&det).unwrap().lines().count(), 514);

    let templates = t.path("templates.csv");
    let o = run(&["binarize", "--embeddings", s(&embs), "--matrix", s(&t.matrix), "--out", s(&templates)]);
    assert!(o.status.success(), "{o:?}");
    let o = run(&["eval", "--templates", s(&templates)]);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&stdout(&o)).unwrap(), summary);

    let o = run(&["eval", "--cross", "--probes", s(&templates), "--refs", s(&templates)]);
    assert!(o.status.success(), "{o:?}");
    let cross: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cross["pairs"], 900);
    assert!(cross["accepts"].as_u64().unwrap() >= 30);
}
