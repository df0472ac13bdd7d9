use aclm_core::corpus::{parse_conll_documents, ParseOptions};
use aclm_core::testkit::{write_toy_dataset, MockServer, ToyPaths};
use std::path::Path;
use std::process::{Command, Output};

fn aclm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aclm")).args(args).env("RUST_LOG", "warn").output().expect("run aclm")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn toy(dir: &Path) -> ToyPaths {
    write_toy_dataset(&dir.join("data"), 50, 7).unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("json status line");
    serde_json::from_str(line).unwrap()
}

fn augment(paths: &ToyPaths, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "augment",
        "--input",
        s(&paths.corpus),
        "--attn",
        s(&paths.attention),
        "--embeddings",
        s(&paths.embeddings),
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    aclm(&args)
}

#[test]
fn split_writes_nested_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let paths = toy(dir.path());
    let out = dir.path().join("split");
    let res = aclm(&["split", "--input", s(&paths.corpus), "--sizes", "10,20", "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let read = |name: &str| {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        parse_conll_documents(&text, ParseOptions::default()).unwrap()
    };
    let small = read("train-10.conll");
    let large = read("train-20.conll");
    assert_eq!((small.len(), large.len()), (10, 20));
    assert!(small.iter().all(|d| large.contains(d)));
    assert!(out.join("manifest.json").exists());

    let res = aclm(&["split", "--input", s(&paths.corpus), "--sizes", "500", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(stderr_json(&res)["status"], "error");
}

#[test]
fn template_dumps_one_line_per_entity_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let paths = toy(dir.path());
    let out = dir.path().join("tpl");
    let res =
        aclm(&["template", "--input", s(&paths.corpus), "--attn", s(&paths.attention), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(out.join("templates.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 34);
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }

    // the attention strategy needs maps
    let res = aclm(&["template", "--input", s(&paths.corpus), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn augment_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths = toy(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, workers) in [(&a, "1"), (&b, "4")] {
        let res = augment(&paths, out, &["--rounds", "2", "--workers", workers]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["augmented.conll", "records.jsonl"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let records = std::fs::read_to_string(a.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 34 * 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "augment");
    assert_eq!(manifest["inputs"]["input"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn failing_backend_reports_partial() {
    let dir = tempfile::tempdir().unwrap();
    let paths = toy(dir.path());
    let server = MockServer::start(|_| (422, r#"{"error": "bad request"}"#.into()));
    let out = dir.path().join("svc");
    let url = server.url();
    let res = augment(
        &paths,
        &out,
        &["--backend", "service", "--service-url", &url, "--job-id", "j1", "--rounds", "1", "--no-mixner"],
    );
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(stderr_json(&res)["status"], "partial");
    // originals are still written
    let text = std::fs::read_to_string(out.join("augmented.conll")).unwrap();
    assert_eq!(parse_conll_documents(&text, ParseOptions::default()).unwrap().len(), 50);
}

#[test]
fn baseline_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let paths = toy(dir.path());
    let base = dir.path().join("lwtr");
    let res = aclm(&["baseline", "--input", s(&paths.corpus), "--rounds", "2", "--out", s(&base)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let augmented = base.join("augmented.conll");

    let eval = dir.path().join("eval");
    let res = aclm(&[
        "evaluate",
        "--pred",
        s(&paths.corpus),
        "--gold",
        s(&paths.corpus),
        "--pairs",
        s(&augmented),
        "--out",
        s(&eval),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["f1"]["micro_f1"], 1.0);
    assert_eq!(report["diversity"]["pairs"], 100);
    assert!(String::from_utf8_lossy(&res.stdout).contains("micro"));

    let res = aclm(&["evaluate", "--out", s(&eval)]);
    assert_eq!(res.status.code(), Some(1));
}
