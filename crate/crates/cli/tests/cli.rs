use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const COREBOOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/coreboot.fm");

fn strongfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strongfm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn analyze_implication() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "imp.dimacs", "p cnf 2 1\n-1 2 0\n");
    let out = strongfm(&["analyze", &file]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["num_arcs"], 1);
    assert_eq!(json["num_edges"], 0);
    assert_eq!(json["core_pct"], 0.0);
    assert_eq!(json["dead_pct"], 0.0);
}

#[test]
fn analyze_coreboot_names_hubs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("cb");
    let out = strongfm(&["analyze", COREBOOT, "--out", out_dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json = stdout_json(&out);
    assert_eq!(
        json["max_in_degree"]["features"],
        serde_json::json!(["HAVE_VBE_LINEAR_FRAMEBUFFER"])
    );
    assert_eq!(
        json["max_out_degree"]["features"],
        serde_json::json!(["NO_GFX_INIT"])
    );
    for f in [
        "graphs.dot",
        "graphs.graphml",
        "graphs.json",
        "nodes.csv",
        "histograms.csv",
        "summary.json",
    ] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }

    let dot = strongfm(&["export", out_dir.to_str().unwrap(), "--format", "dot"]);
    assert!(dot.status.success());
    let text = String::from_utf8(dot.stdout).unwrap();
    assert!(text.contains("NO_GFX_INIT -> HAVE_VBE_LINEAR_FRAMEBUFFER"));
    assert_eq!(
        text,
        fs::read_to_string(out_dir.join("graphs.dot")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let void = write(dir.path(), "void.dimacs", "p cnf 1 2\n1 0\n-1 0\n");
    let out = strongfm(&["analyze", &void]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("void model"));

    let bad = write(dir.path(), "bad.dimacs", "p cnf 2 1\n1 7 0\n");
    assert_eq!(strongfm(&["analyze", &bad]).status.code(), Some(2));
    let bad_fm = write(dir.path(), "bad.fm", "  indented root\n");
    assert_eq!(strongfm(&["analyze", &bad_fm]).status.code(), Some(2));
    assert_eq!(
        strongfm(&["analyze", "/nonexistent.dimacs"]).status.code(),
        Some(1)
    );
    assert_eq!(
        strongfm(&["analyze", &void, "--threshold", "0"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn validate_and_oracle() {
    let out = strongfm(&["validate", COREBOOT, "--absence", "all", "--seed", "7"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json = stdout_json(&out);
    assert_eq!(json["discrepancies"], serde_json::json!([]));
    assert_eq!(json["checked_nodes"], 12);

    let out = strongfm(&["oracle", COREBOOT]);
    assert!(out.status.success());
    let json = stdout_json(&out);
    assert_eq!(json["matches_extraction"], true);
    let requires = &json["relations"]["NO_GFX_INIT"]["requires"];
    assert!(requires
        .as_array()
        .unwrap()
        .contains(&serde_json::json!("HAVE_VBE_LINEAR_FRAMEBUFFER")));
}

#[test]
fn corpus_run() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.dimacs", "p cnf 2 1\n-1 2 0\n");
    write(dir.path(), "b.dimacs", "p cnf 3 2\n1 0\n-2 3 0\n");
    write(dir.path(), "c.dimacs", "p cnf 1 2\n1 0\n-1 0\n");
    fs::copy(COREBOOT, dir.path().join("cb.fm")).unwrap();
    let manifest = write(
        dir.path(),
        "manifest.csv",
        "id,path,format,domain\na,a.dimacs,dimacs,x\nb,b.dimacs,dimacs,x\nc,c.dimacs,dimacs,x\ncb,cb.fm,fm,firmware\n",
    );
    let out_dir = dir.path().join("out");
    let out = strongfm(&[
        "corpus",
        &manifest,
        "--jobs",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json = stdout_json(&out);
    assert_eq!(json["analyzed"], 3);
    assert_eq!(json["failed"], 1);
    let corpus = fs::read_to_string(out_dir.join("corpus.csv")).unwrap();
    assert!(corpus.starts_with("id,domain,num_vars"));
    assert!(corpus.contains("require_density_x"));
    assert_eq!(corpus.lines().count(), 4);
    let failures = fs::read_to_string(out_dir.join("failures.csv")).unwrap();
    assert!(failures.contains("c,x,void"));
}
