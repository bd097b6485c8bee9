use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn commvec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commvec")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = commvec(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two topics whose documents never mix vocabularies.
fn corpus(dir: &Path) -> PathBuf {
    let mut lines = Vec::new();
    for d in 0..240usize {
        let t = d % 2;
        let words: Vec<String> = (0..10)
            .map(|i| format!("t{t}w{:02}", (d * 7 + i * i * 3) % 23))
            .collect();
        lines.push(words.join(" "));
    }
    let path = dir.join("docs.txt");
    fs::write(&path, lines.join("\n")).unwrap();
    path
}

#[test]
fn staged_commands_match_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let docs = corpus(d);
    let out_dir = d.join("run");
    let report: serde_json::Value = serde_json::from_str(&ok(&[
        "run",
        "--format",
        "text",
        "--window",
        "4",
        "--k",
        "3",
        "--ntop",
        "2",
        "--seed",
        "8",
        "--out-dir",
        s(&out_dir),
        s(&docs),
    ]))
    .unwrap();

    let (edges, graph, pruned) = (d.join("e.tsv"), d.join("g.snapshot"), d.join("p.snapshot"));
    let (part, sizes, model) = (d.join("part.tsv"), d.join("sizes.tsv"), d.join("model.txt"));
    ok(&[
        "ingest",
        "--format",
        "text",
        "--window",
        "4",
        "--out",
        s(&edges),
        s(&docs),
    ]);
    ok(&["build-graph", "--in", s(&edges), "--out", s(&graph)]);
    ok(&[
        "preprocess",
        "--in",
        s(&graph),
        "--k",
        "3",
        "--ntop",
        "2",
        "--out",
        s(&pruned),
    ]);
    ok(&[
        "detect",
        "--in",
        s(&pruned),
        "--seed",
        "8",
        "--out",
        s(&part),
        "--sizes",
        s(&sizes),
    ]);
    ok(&[
        "embed",
        "--graph",
        s(&pruned),
        "--partition",
        s(&part),
        "--out",
        s(&model),
    ]);

    assert_eq!(fs::read(&edges).unwrap(), fs::read(out_dir.join("edges.tsv")).unwrap());
    assert_eq!(
        fs::read(&pruned).unwrap(),
        fs::read(out_dir.join("pruned.snapshot")).unwrap()
    );
    assert_eq!(
        fs::read(&part).unwrap(),
        fs::read(out_dir.join("partition.tsv")).unwrap()
    );
    assert_eq!(fs::read(&sizes).unwrap(), fs::read(out_dir.join("sizes.tsv")).unwrap());

    // Only the run embeds config provenance, so compare the vectors.
    let body = |p: &Path| {
        let text = fs::read_to_string(p).unwrap();
        text.lines()
            .filter(|l| !l.starts_with("#provenance"))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    assert_eq!(body(&model), body(&out_dir.join("model.txt")));

    let stats: serde_json::Value = serde_json::from_str(&ok(&["stats", s(&model)])).unwrap();
    assert_eq!(stats["kind"], "model");
    assert_eq!(stats["vocab"], report["vocab_size"]);
    assert_eq!(stats["dims"], report["communities"]);
}

#[test]
fn query_eval_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let docs = corpus(d);
    let out_dir = d.join("run");
    ok(&[
        "run",
        "--format",
        "text",
        "--k",
        "2",
        "--ntop",
        "1",
        "--out-dir",
        s(&out_dir),
        s(&docs),
    ]);
    let model = out_dir.join("model.txt");
    let loaded = commvec::EmbeddingModel::load(&model).unwrap();
    let term = loaded
        .terms()
        .iter()
        .zip(loaded.vectors())
        .find(|(_, v)| v.nnz() > 0)
        .map(|(t, _)| t.clone())
        .unwrap();

    let nearest = ok(&["query", "nearest", "--model", s(&model), "--term", &term, "--topk", "3"]);
    let rows: Vec<&str> = nearest.lines().collect();
    assert!(!rows.is_empty() && rows.len() <= 3);
    assert!(rows
        .iter()
        .all(|r| r.split('\t').count() == 2 && !r.starts_with(&format!("{term}\t"))));

    let explain = d.join("explain.tsv");
    ok(&[
        "query",
        "explain",
        "--model",
        s(&model),
        "--terms",
        &term,
        "--topdims",
        "2",
        "--out",
        s(&explain),
    ]);
    assert!(!fs::read_to_string(&explain).unwrap().is_empty());

    let cats = d.join("cats.tsv");
    let items: Vec<String> = loaded.terms().iter().map(|t| format!("{t}\t{}", &t[..2])).collect();
    fs::write(&cats, items.join("\n")).unwrap();
    let result: serde_json::Value =
        serde_json::from_str(&ok(&["eval", "cat", "--model", s(&model), "--dataset", s(&cats)])).unwrap();
    assert_eq!(result["metric"], "purity");
    for key in ["value", "coverage", "n_kept"] {
        assert!(result[key].is_number(), "{key}");
    }

    let dense = d.join("dense.txt");
    ok(&["export", "--model", s(&model), "--out", s(&dense)]);
    let text = fs::read_to_string(&dense).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, format!("{} {}", loaded.len(), loaded.dim()));
    assert_eq!(text.lines().count(), loaded.len() + 1);
}

#[test]
fn failures_exit_nonzero_with_stage_tag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = d.join("missing.tsv");

    let out = commvec(&["build-graph", "--in", s(&missing), "--out", s(&d.join("g"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[build-graph]"));

    let out = commvec(&["run", "--set", "bogus=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[config]"));

    let docs = corpus(d);
    let out = commvec(&[
        "run",
        "--format",
        "text",
        "--k",
        "500",
        "--out-dir",
        s(&d.join("o")),
        s(&docs),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[preprocess]"));
    assert!(d.join("o").join("graph.snapshot").exists());

    let bad = d.join("bad.tsv");
    fs::write(&bad, "a\tb\tnot-a-number\n").unwrap();
    let out = commvec(&["preprocess", "--in", s(&bad), "--out", s(&d.join("p"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[preprocess]"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let docs = corpus(d);
    let cfg = d.join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# demo\ninput = {}\nformat = text\nk = 3\nntop = 2\nseed = 1\nout_dir = {}\n",
            s(&docs),
            s(&d.join("a"))
        ),
    )
    .unwrap();
    let a: serde_json::Value = serde_json::from_str(&ok(&["run", "--config", s(&cfg)])).unwrap();
    let b: serde_json::Value = serde_json::from_str(&ok(&[
        "run",
        "--config",
        s(&cfg),
        "--seed",
        "2",
        "--out-dir",
        s(&d.join("b")),
    ]))
    .unwrap();
    assert_eq!(a["seed"], 1);
    assert_eq!(b["seed"], 2);
    assert_ne!(a["config_hash"], b["config_hash"]);
    assert!(d.join("a").join("model.txt").exists() && d.join("b").join("model.txt").exists());
}
