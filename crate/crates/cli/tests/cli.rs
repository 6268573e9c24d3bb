use std::path::Path;
use std::process::{Command, Output};

fn edl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edl")).args(args).output().unwrap()
}

fn error_line(out: &Output) -> Vec<String> {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    lines[0].split('\t').map(String::from).collect()
}

#[test]
fn failures_print_one_tab_separated_line() {
    let out = edl(&["run", "--set", "docs=/nonexistent/docs.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    let fields = error_line(&out);
    assert_eq!(fields.len(), 3);
    assert_eq!((fields[0].as_str(), fields[1].as_str()), ("error", "missing_artifact"));
    assert!(fields[2].contains("/nonexistent/docs.tsv"));

    let out = edl(&["eval"]);
    assert_eq!(error_line(&out)[1], "missing_setting");

    let out = edl(&["kb-index", "--set", "colour=blue"]);
    assert_eq!(error_line(&out)[1], "config");
}

#[test]
fn synth_then_index_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = edl(&["synth", "--out", data.to_str().unwrap()]);
    assert!(out.status.success());

    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/desk.conf");
    let index = dir.path().join("index.json");
    let out = edl(&[
        "kb-index",
        "-c",
        config.to_str().unwrap(),
        "-s",
        &format!("index={}", index.display()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("entities=")));
    assert!(index.exists());

    let gold = data.join("mini.gold.tsv");
    let out = edl(&[
        "eval",
        "-s",
        &format!("gold={}", gold.display()),
        "-s",
        &format!("system={}", gold.display()),
    ]);
    assert!(out.status.success());
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.starts_with("metric\tlanguage\tP\tR\tF\n"));
    assert!(report.lines().skip(1).all(|l| l.ends_with("\t1.000\t1.000\t1.000")));
}
