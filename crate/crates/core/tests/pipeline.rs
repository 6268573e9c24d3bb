use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use edl_core::corpus::{parse_gold, LinkTarget};
use edl_core::pipeline::{cmd_eval, cmd_kb_index, cmd_run, cmd_train_el, cmd_train_md, PipelineConfig, PipelineError};
use edl_core::synth;
use tempfile::TempDir;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Bundled inputs with small training budgets; outputs go under `dir`.
fn quick_config(dir: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::load(data_dir().join("desk.conf")).unwrap();
    for pair in ["tagger.max_epochs=2", "ranker.max_epochs=3"] {
        c.set_pair(pair).unwrap();
    }
    c.set("index", &dir.join("kb.index.json").to_string_lossy()).unwrap();
    c.set("checkpoints", &dir.join("ckpt").to_string_lossy()).unwrap();
    c
}

/// One trained system shared by the tests of this file.
fn trained() -> &'static (TempDir, PipelineConfig) {
    static TRAINED: OnceLock<(TempDir, PipelineConfig)> = OnceLock::new();
    TRAINED.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = quick_config(dir.path());
        cmd_kb_index(&config).unwrap();
        cmd_train_md(&config).unwrap();
        cmd_train_el(&config).unwrap();
        (dir, config)
    })
}

#[test]
fn bundled_data_matches_generator() {
    for (name, content) in synth::bundle() {
        let on_disk = fs::read_to_string(data_dir().join(name)).unwrap();
        assert!(on_disk == content, "{name} is stale; regenerate with `edl synth`");
    }
}

#[test]
fn kb_index_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a.json", "b.json"] {
        let mut c = quick_config(dir.path());
        c.set("index", &dir.path().join(name).to_string_lossy()).unwrap();
        let summary = cmd_kb_index(&c).unwrap();
        assert!(summary.entities > 0);
        outputs.push((fs::read(&summary.index).unwrap(), fs::read(&summary.manifest).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn kb_index_reports_the_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let kb = fs::read_to_string(data_dir().join(synth::files::KB)).unwrap();
    let mut lines: Vec<&str> = kb.lines().collect();
    lines[2] = "broken";
    let path = dir.path().join("kb.tsv");
    fs::write(&path, lines.join("\n")).unwrap();
    let mut c = quick_config(dir.path());
    c.set("kb", &path.to_string_lossy()).unwrap();
    let err = cmd_kb_index(&c).unwrap_err();
    assert_eq!(err.code(), "kb");
    assert!(err.to_string().contains("line 3"), "{err}");
}

#[test]
fn missing_inputs_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = quick_config(dir.path());
    c.set("kb", &dir.path().join("absent.tsv").to_string_lossy()).unwrap();
    assert!(matches!(cmd_kb_index(&c), Err(PipelineError::MissingArtifact(_))));
    let c = PipelineConfig::default();
    assert!(matches!(cmd_run(&c), Err(PipelineError::MissingSetting("docs"))));
}

#[test]
fn training_writes_balanced_reproducible_ensembles() {
    let (_, config) = trained();
    let dir = tempfile::tempdir().unwrap();
    let mut again = config.clone();
    again.set("checkpoints", &dir.path().to_string_lossy()).unwrap();
    let md = cmd_train_md(&again).unwrap();
    assert_eq!(md.checkpoints.len(), config.members * config.model_kinds.len());
    assert_eq!(md.fold_sizes.len(), config.members);
    let (lo, hi) = (md.fold_sizes.iter().min().unwrap(), md.fold_sizes.iter().max().unwrap());
    assert!(hi - lo <= 1);
    assert_eq!(md.fold_sizes.iter().sum::<usize>(), md.items);
    let first = config.path("checkpoints").unwrap();
    for path in &md.checkpoints {
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(path).unwrap(), fs::read(first.join(name)).unwrap(), "{name:?}");
    }
    let el = cmd_train_el(&again).unwrap();
    assert_eq!(el.checkpoints.len(), config.members);
    assert_eq!(el.skipped, 0);
}

#[test]
fn run_links_every_mention_and_is_deterministic() {
    let (_, config) = trained();
    let a = cmd_run(config).unwrap();
    let mut single = config.clone();
    single.workers = 1;
    let b = cmd_run(&single).unwrap();
    assert_eq!(a.submission, b.submission);
    assert_eq!(a.links.len(), a.linked.len());
    for (l, link) in a.linked.iter().zip(&a.links) {
        assert_eq!(l.mention.key(), link.mention.key());
        assert!((l.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        match &link.target {
            LinkTarget::KbId(id) => assert!(l.candidates.candidates.iter().any(|c| c.kb_id() == Some(id))),
            LinkTarget::NilCluster(id) => assert!(id.starts_with("NIL")),
        }
    }
    assert_eq!(parse_gold(&a.submission).unwrap().len(), a.links.len());
}

#[test]
fn empty_corpus_gives_empty_submission() {
    let (_, config) = trained();
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("empty.tsv");
    fs::write(&docs, "").unwrap();
    let mut c = config.clone();
    c.set("docs", &docs.to_string_lossy()).unwrap();
    c.set("output", &dir.path().join("out.tsv").to_string_lossy()).unwrap();
    let out = cmd_run(&c).unwrap();
    assert!(out.links.is_empty());
    assert_eq!(fs::read_to_string(dir.path().join("out.tsv")).unwrap(), "");
}

#[test]
fn eval_scores_disjoint_output_as_zero() {
    let dir = tempfile::tempdir().unwrap();
    let gold = data_dir().join(synth::files::MINI_GOLD);
    let shifted: String = fs::read_to_string(&gold)
        .unwrap()
        .lines()
        .map(|line| {
            let mut f: Vec<String> = line.split('\t').map(String::from).collect();
            f[3] = format!("elsewhere-{}", f[3]);
            f.join("\t") + "\n"
        })
        .collect();
    let system = dir.path().join("system.tsv");
    fs::write(&system, shifted).unwrap();
    let mut c = quick_config(dir.path());
    c.set("system", &system.to_string_lossy()).unwrap();
    let report = cmd_eval(&c).unwrap();
    for line in report.lines().skip(1) {
        assert!(line.ends_with("\t0.000\t0.000\t0.000"), "{line}");
    }
    c.set("system", &gold.to_string_lossy()).unwrap();
    let report = cmd_eval(&c).unwrap();
    for line in report.lines().skip(1) {
        assert!(line.ends_with("\t1.000\t1.000\t1.000"), "{line}");
    }
}
