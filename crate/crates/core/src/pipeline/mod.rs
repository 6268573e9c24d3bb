//! The end-to-end commands: index building, training of both ensembles,
//! linking runs, diagnostics and scoring.

mod config;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    format_submission, parse_documents, parse_gold, CorpusError, Document, GoldLink, Language, LinkTarget, Mention,
};
use crate::detect::{
    detect_document, labeled_sentences, train, DetectError, DetectorEnsemble, LabeledSentence, MentionModels,
    ModelKind, TaggerConfig, TrainedModel, Vocab,
};
use crate::eval::report;
use crate::kb::{parse_kb, AuxTables, KbError, KbIndex};
use crate::link::{
    candidate_metrics, candidate_report, extract_features, generate_candidates, rank_examples, train_ranker, Candidate,
    CandidateSet, DocumentContext, LinkError, RankExample, Ranker, RankerConfig,
};
use crate::neural::{format_checkpoint, parse_checkpoint, seeded_rng, Manifest, NeuralError};
use crate::nil::{assign_cluster_ids, cluster_nils};

use config::{ranker_pairs, tagger_pairs};
pub use config::{PipelineConfig, PATH_KEYS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("setting `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("setting `{0}` is required")]
    MissingSetting(&'static str),
    #[error("{}: not found", .0.display())]
    MissingArtifact(PathBuf),
    #[error("no {0} to train on")]
    EmptyCorpus(&'static str),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Kb { path: PathBuf, source: KbError },
    #[error("{}: {source}", path.display())]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{}: {source}", path.display())]
    Checkpoint { path: PathBuf, source: NeuralError },
    #[error("{}: {reason}", path.display())]
    IncompatibleCheckpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable identifier of the error class.
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Config { .. } => "config",
            PipelineError::MissingSetting(_) => "missing_setting",
            PipelineError::MissingArtifact(_) => "missing_artifact",
            PipelineError::EmptyCorpus(_) => "empty_corpus",
            PipelineError::Io { .. } => "io",
            PipelineError::Kb { .. } => "kb",
            PipelineError::Corpus { .. } => "corpus",
            PipelineError::Checkpoint { .. } | PipelineError::IncompatibleCheckpoint { .. } => "checkpoint",
            PipelineError::Detect(_) => "detect",
            PipelineError::Link(_) => "link",
            PipelineError::Pool(_) => "pool",
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    fs::write(path, content).map_err(|e| PipelineError::io(path, e))
}

fn sha256(content: &str) -> String {
    hex::encode(Sha256::digest(content.as_bytes()))
}

fn load_docs(path: &Path) -> Result<Vec<Document>> {
    parse_documents(&read(path)?).map_err(|source| PipelineError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

fn load_links(path: &Path) -> Result<Vec<GoldLink>> {
    parse_gold(&read(path)?).map_err(|source| PipelineError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

fn load_index(config: &PipelineConfig) -> Result<KbIndex> {
    let path = config.path("index")?;
    KbIndex::from_json(&read(path)?).map_err(|source| PipelineError::Kb {
        path: path.to_path_buf(),
        source,
    })
}

fn pool(config: &PipelineConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))
}

/// Documents in the configured languages and the gold links inside them.
fn select(config: &PipelineConfig, docs: Vec<Document>, gold: Vec<GoldLink>) -> (Vec<Document>, Vec<GoldLink>) {
    let docs: Vec<Document> = docs
        .into_iter()
        .filter(|d| config.languages.contains(&d.language))
        .collect();
    let ids: std::collections::HashSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    let gold = gold
        .into_iter()
        .filter(|g| ids.contains(g.mention.doc_id.as_str()))
        .collect();
    (docs, gold)
}

/// Fold of every item: a seeded shuffle dealt round-robin, so fold sizes
/// differ by at most one.
pub fn fold_assignment(items: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items).collect();
    order.shuffle(&mut seeded_rng(seed));
    let mut fold = vec![0; items];
    for (i, &item) in order.iter().enumerate() {
        fold[item] = i % folds;
    }
    fold
}

/// Training and held-out parts for ensemble member `member`. With a single
/// member everything is used for training.
fn split<T: Clone>(items: &[T], fold: &[usize], members: usize, member: usize) -> (Vec<T>, Vec<T>) {
    if members == 1 {
        return (items.to_vec(), Vec::new());
    }
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (item, &f) in items.iter().zip(fold) {
        if f == member { &mut dev } else { &mut train }.push(item.clone());
    }
    (train, dev)
}

fn member_seed(seed: u64, member: usize) -> u64 {
    seed.wrapping_add(member as u64)
}

fn md_checkpoint(dir: &Path, kind: ModelKind, member: usize) -> PathBuf {
    dir.join(format!("md.{kind}.{}.ckpt", member + 1))
}

fn md_vocab(dir: &Path) -> PathBuf {
    dir.join("md.vocab")
}

fn el_checkpoint(dir: &Path, member: usize) -> PathBuf {
    dir.join(format!("el.{}.ckpt", member + 1))
}

fn el_vocab(dir: &Path, member: usize) -> PathBuf {
    dir.join(format!("el.{}.vocab", member + 1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexSummary {
    pub entities: usize,
    pub index: PathBuf,
    pub manifest: PathBuf,
}

/// Builds the KB index from the snapshot and auxiliary tables and writes it
/// with a manifest of input digests next to it (`<index>.manifest`).
pub fn cmd_kb_index(config: &PipelineConfig) -> Result<IndexSummary> {
    let kb_path = config.path("kb")?;
    let kb_text = read(kb_path)?;
    let kb_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Kb { path, source }
    };
    let entities = parse_kb(&kb_text).map_err(kb_err(kb_path))?;
    let mut aux_text = BTreeMap::new();
    for key in ["abbreviations", "zh_variants", "translations"] {
        let text = match config.optional_path(key) {
            Some(p) => read(p)?,
            None => String::new(),
        };
        aux_text.insert(key, text);
    }
    let aux = AuxTables::parse(
        &aux_text["abbreviations"],
        &aux_text["zh_variants"],
        &aux_text["translations"],
    )
    .map_err(kb_err(config.optional_path("abbreviations").unwrap_or(kb_path)))?;
    let count = entities.len();
    let index = KbIndex::build(entities, aux).map_err(kb_err(kb_path))?;
    let json = index.to_json();
    let index_path = config.path("index")?;
    write(index_path, &json)?;

    let mut manifest = format!(
        "entities={count}\nindex_sha256={}\nkb_sha256={}\n",
        sha256(&json),
        sha256(&kb_text)
    );
    for (key, text) in &aux_text {
        manifest.push_str(&format!("{key}_sha256={}\n", sha256(text)));
    }
    let manifest_path = PathBuf::from(format!("{}.manifest", index_path.display()));
    write(&manifest_path, &manifest)?;
    Ok(IndexSummary {
        entities: count,
        index: index_path.to_path_buf(),
        manifest: manifest_path,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    /// Training items (sentences or candidate lists) after filtering.
    pub items: usize,
    /// Items left out, such as gold targets missing from candidate lists.
    pub skipped: usize,
    /// Held-out items per member.
    pub fold_sizes: Vec<usize>,
    pub checkpoints: Vec<PathBuf>,
}

fn manifest(config: &PipelineConfig, member: usize, extra: Vec<(String, String)>) -> Manifest {
    let mut m = Manifest {
        config_hash: config.settings_hash(),
        seed: member_seed(config.seed, member),
        extra: extra.into_iter().collect(),
    };
    m.extra.insert("member".into(), (member + 1).to_string());
    m
}

fn fold_sizes(fold: &[usize], members: usize) -> Vec<usize> {
    if members == 1 {
        return vec![0];
    }
    (0..members).map(|k| fold.iter().filter(|&&f| f == k).count()).collect()
}

/// Trains `members` detectors of every configured kind, each on all folds
/// but its own, which serves as its early-stopping set.
pub fn cmd_train_md(config: &PipelineConfig) -> Result<TrainSummary> {
    config.validate()?;
    let docs = load_docs(config.path("md_docs")?)?;
    let gold = load_links(config.path("md_gold")?)?;
    let (docs, gold) = select(config, docs, gold);
    let sentences: Vec<LabeledSentence> = labeled_sentences(&docs, &gold)
        .into_iter()
        .filter(|s| !s.tokens.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(PipelineError::EmptyCorpus("sentences"));
    }
    let vocab = Vocab::build(sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str)));
    let fold = fold_assignment(sentences.len(), config.members, config.seed);
    let jobs: Vec<(ModelKind, usize)> = config
        .model_kinds
        .iter()
        .flat_map(|&kind| (0..config.members).map(move |k| (kind, k)))
        .collect();
    let trained = pool(config)?.install(|| {
        jobs.par_iter()
            .map(|&(kind, k)| {
                let (train_set, dev_set) = split(&sentences, &fold, config.members, k);
                let tagger = TaggerConfig {
                    seed: member_seed(config.seed, k),
                    ..config.tagger.clone()
                };
                let (model, report) = train(kind, &train_set, &dev_set, &tagger, &vocab)?;
                let mut extra = tagger_pairs(&tagger);
                extra.push(("kind".into(), kind.to_string()));
                extra.push(("best_epoch".into(), report.best_epoch.to_string()));
                extra.push(("train_items".into(), train_set.len().to_string()));
                extra.push(("dev_items".into(), dev_set.len().to_string()));
                Ok((kind, k, format_checkpoint(model.params(), &manifest(config, k, extra))))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let dir = config.path("checkpoints")?;
    write(&md_vocab(dir), &vocab.to_text())?;
    let mut checkpoints = Vec::new();
    for (kind, k, text) in trained {
        let path = md_checkpoint(dir, kind, k);
        write(&path, &text)?;
        checkpoints.push(path);
    }
    Ok(TrainSummary {
        items: sentences.len(),
        skipped: 0,
        fold_sizes: fold_sizes(&fold, config.members),
        checkpoints,
    })
}

/// Builds ranking examples from the linking training set and trains
/// `members` rankers on four-fifths splits. Mentions whose gold target is
/// not among their candidates are counted and left out.
pub fn cmd_train_el(config: &PipelineConfig) -> Result<TrainSummary> {
    config.validate()?;
    let index = load_index(config)?;
    let docs = load_docs(config.path("el_docs")?)?;
    let gold = load_links(config.path("el_gold")?)?;
    let (docs, gold) = select(config, docs, gold);
    let settings = |l: Language| config.candidate_settings(l);
    let (examples, skipped) = pool(config)?.install(|| rank_examples(&docs, &gold, &index, &settings))?;
    if examples.is_empty() {
        return Err(PipelineError::EmptyCorpus("candidate lists"));
    }
    let fold = fold_assignment(examples.len(), config.members, config.seed);
    let trained = pool(config)?.install(|| {
        (0..config.members)
            .into_par_iter()
            .map(|k| {
                let (train_set, dev_set): (Vec<RankExample>, _) = split(&examples, &fold, config.members, k);
                let ranker_config = RankerConfig {
                    seed: member_seed(config.seed, k),
                    ..config.ranker.clone()
                };
                let (ranker, report) = train_ranker(&train_set, &dev_set, &ranker_config)?;
                let mut extra = ranker_pairs(&ranker_config);
                extra.push(("best_epoch".into(), report.best_epoch.to_string()));
                extra.push(("train_items".into(), train_set.len().to_string()));
                extra.push(("dev_items".into(), dev_set.len().to_string()));
                let text = format_checkpoint(&ranker.params, &manifest(config, k, extra));
                Ok((k, text, ranker.words.to_text()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let dir = config.path("checkpoints")?;
    let mut checkpoints = Vec::new();
    for (k, text, words) in trained {
        write(&el_vocab(dir, k), &words)?;
        let path = el_checkpoint(dir, k);
        write(&path, &text)?;
        checkpoints.push(path);
    }
    Ok(TrainSummary {
        items: examples.len(),
        skipped,
        fold_sizes: fold_sizes(&fold, config.members),
        checkpoints,
    })
}

fn read_manifested(path: &Path) -> Result<(crate::neural::ParameterStore, Manifest)> {
    parse_checkpoint(&read(path)?).map_err(|source| PipelineError::Checkpoint {
        path: path.to_path_buf(),
        source,
    })
}

/// Applies the `<prefix>.<field>` manifest entries through `set`.
fn restore<E: std::fmt::Display>(
    path: &Path,
    manifest: &Manifest,
    prefix: &str,
    mut set: impl FnMut(&str, &str) -> std::result::Result<(), E>,
) -> Result<()> {
    for (k, v) in &manifest.extra {
        if let Some(field) = k.strip_prefix(prefix) {
            set(field, v).map_err(|e| PipelineError::IncompatibleCheckpoint {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        }
    }
    Ok(())
}

fn load_detectors(config: &PipelineConfig) -> Result<MentionModels> {
    let dir = config.path("checkpoints")?;
    let vocab = Vocab::from_text(&read(&md_vocab(dir))?);
    let mut models = MentionModels {
        crnnlm: None,
        seq2seq: None,
        beam_width: config.tagger.beam_width,
    };
    for &kind in &config.model_kinds {
        let mut members = Vec::new();
        for k in 0..config.members {
            let path = md_checkpoint(dir, kind, k);
            let (params, manifest) = read_manifested(&path)?;
            let mut tagger = TaggerConfig {
                seed: manifest.seed,
                ..TaggerConfig::default()
            };
            restore(&path, &manifest, "tagger.", |f, v| tagger.set(f, v))?;
            let mut model = TrainedModel::new(kind, tagger, vocab.clone())?;
            model
                .params_mut()
                .copy_values_from(&params)
                .map_err(|e| PipelineError::IncompatibleCheckpoint {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
            members.push(model);
        }
        let ensemble = Some(DetectorEnsemble::new(members)?);
        match kind {
            ModelKind::Crnnlm => models.crnnlm = ensemble,
            ModelKind::Seq2Seq => models.seq2seq = ensemble,
        }
    }
    Ok(models)
}

fn load_rankers(config: &PipelineConfig) -> Result<Vec<Ranker>> {
    let dir = config.path("checkpoints")?;
    (0..config.members)
        .map(|k| {
            let path = el_checkpoint(dir, k);
            let (params, manifest) = read_manifested(&path)?;
            let words = Vocab::from_text(&read(&el_vocab(dir, k))?);
            let mut ranker_config = RankerConfig {
                seed: manifest.seed,
                ..RankerConfig::default()
            };
            restore(&path, &manifest, "ranker.", |f, v| ranker_config.set(f, v))?;
            Ranker::from_parts(ranker_config, words, params).map_err(|e| PipelineError::IncompatibleCheckpoint {
                path: path.clone(),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// One mention with its candidates and the ensemble's decision.
#[derive(Clone, Debug)]
pub struct LinkedMention {
    pub mention: Mention,
    pub candidates: CandidateSet,
    pub posterior: Vec<f64>,
    pub choice: usize,
}

impl LinkedMention {
    pub fn decision(&self) -> &Candidate {
        &self.candidates.candidates[self.choice]
    }
}

fn link_document(
    config: &PipelineConfig,
    doc: &Document,
    mentions: &[Mention],
    index: &KbIndex,
    rankers: &[Ranker],
) -> Result<Vec<LinkedMention>> {
    let settings = config.candidate_settings(doc.language);
    let ctx = DocumentContext::new(doc, mentions, index, &settings);
    mentions
        .iter()
        .map(|m| {
            let set = generate_candidates(m, &ctx, index, &settings);
            let inputs = set
                .candidates
                .iter()
                .map(|c| {
                    let sim = c
                        .kb_id()
                        .and_then(|id| ctx.similarities.get(id))
                        .copied()
                        .unwrap_or(0.0);
                    extract_features(m, c, doc, index, sim)
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let (choice, posterior) = Ranker::link(rankers, &set.candidates, &inputs)?;
            Ok(LinkedMention {
                mention: m.clone(),
                candidates: set,
                posterior,
                choice,
            })
        })
        .collect()
}

/// Links the given mentions of every document in parallel; the output
/// follows document order.
fn link_all(
    config: &PipelineConfig,
    docs: &[Document],
    mentions: &HashMap<String, Vec<Mention>>,
    index: &KbIndex,
    rankers: &[Ranker],
) -> Result<Vec<LinkedMention>> {
    let per_doc = pool(config)?.install(|| {
        docs.par_iter()
            .map(|d| {
                let ms = mentions.get(&d.doc_id).map_or(&[][..], Vec::as_slice);
                link_document(config, d, ms, index, rankers)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_doc.into_iter().flatten().collect())
}

/// Final links: KB decisions as they are, NIL decisions grouped into
/// numbered clusters.
fn resolve(linked: &[LinkedMention]) -> Vec<GoldLink> {
    let all: Vec<Mention> = linked.iter().map(|l| l.mention.clone()).collect();
    let nils: Vec<Mention> = linked
        .iter()
        .filter(|l| *l.decision() == Candidate::Nil)
        .map(|l| l.mention.clone())
        .collect();
    let mut cluster_of = HashMap::new();
    for c in assign_cluster_ids(cluster_nils(&nils, &all)) {
        for m in c.members {
            cluster_of.insert(m.key(), c.cluster_id.clone());
        }
    }
    linked
        .iter()
        .map(|l| GoldLink {
            mention: l.mention.clone(),
            target: match l.decision() {
                Candidate::Kb(id) => LinkTarget::KbId(id.clone()),
                Candidate::Nil => LinkTarget::NilCluster(cluster_of[&l.mention.key()].clone()),
            },
        })
        .collect()
}

fn detect_all(config: &PipelineConfig, docs: &[Document]) -> Result<HashMap<String, Vec<Mention>>> {
    let models = load_detectors(config)?;
    let detected = pool(config)?.install(|| {
        docs.par_iter()
            .map(|d| {
                let nominal = config.nominal_languages.contains(&d.language);
                Ok((d.doc_id.clone(), detect_document(&models, d, nominal)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(detected.into_iter().collect())
}

/// Output of a full run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub linked: Vec<LinkedMention>,
    pub links: Vec<GoldLink>,
    pub submission: String,
}

fn run_pipeline(
    config: &PipelineConfig,
    docs: &[Document],
    mentions: &HashMap<String, Vec<Mention>>,
) -> Result<RunOutput> {
    let index = load_index(config)?;
    let rankers = load_rankers(config)?;
    let linked = link_all(config, docs, mentions, &index, &rankers)?;
    let links = resolve(&linked);
    let submission = format_submission(&links, &config.system_id);
    Ok(RunOutput {
        linked,
        links,
        submission,
    })
}

fn run_docs(config: &PipelineConfig) -> Result<Vec<Document>> {
    let docs = load_docs(config.path("docs")?)?;
    Ok(docs
        .into_iter()
        .filter(|d| config.languages.contains(&d.language))
        .collect())
}

/// Detection with both ensembles and their merge, candidate generation,
/// ranking and NIL clustering over the `docs` corpus. The submission is
/// written to `output` when set.
pub fn cmd_run(config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    let docs = run_docs(config)?;
    let mentions = detect_all(config, &docs)?;
    let out = run_pipeline(config, &docs, &mentions)?;
    if let Some(path) = config.optional_path("output") {
        write(path, &out.submission)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
struct CandidateRecord {
    id: String,
    search_score: Option<f64>,
    posterior: f64,
}

#[derive(Clone, Debug, Serialize)]
struct MentionRecord<'a> {
    doc_id: &'a str,
    char_start: usize,
    char_end: usize,
    surface: &'a str,
    entity_type: &'static str,
    kind: &'static str,
    queries: &'a [String],
    candidates: Vec<CandidateRecord>,
    link: &'a str,
}

/// Per-mention JSON lines: queries, candidates with their search scores and
/// posteriors, and the final link.
pub fn diagnostics(out: &RunOutput) -> String {
    let mut text = String::new();
    for (l, link) in out.linked.iter().zip(&out.links) {
        let scores: HashMap<&str, f64> = l.candidates.result1.iter().map(|(id, s)| (id.as_str(), *s)).collect();
        let record = MentionRecord {
            doc_id: &l.mention.doc_id,
            char_start: l.mention.char_start,
            char_end: l.mention.char_end,
            surface: &l.mention.surface,
            entity_type: l.mention.entity_type.as_str(),
            kind: l.mention.kind.as_str(),
            queries: l.candidates.queries.as_slice(),
            candidates: l
                .candidates
                .candidates
                .iter()
                .zip(&l.posterior)
                .map(|(c, &posterior)| CandidateRecord {
                    id: c.kb_id().unwrap_or("NIL").to_string(),
                    search_score: c.kb_id().and_then(|id| scores.get(id).copied()),
                    posterior,
                })
                .collect(),
            link: link.target.as_str(),
        };
        text.push_str(&serde_json::to_string(&record).expect("records serialize"));
        text.push('\n');
    }
    text
}

#[derive(Clone, Debug)]
pub struct DiagOutput {
    pub jsonl: String,
    /// Candidate coverage table, present when gold mentions were linked.
    pub candidate_report: Option<String>,
}

/// Linking diagnostics. With `gold` set the gold mentions are linked and a
/// candidate coverage table is added; otherwise mentions come from the
/// detectors. The JSON lines are written to `output` when set.
pub fn cmd_diag(config: &PipelineConfig) -> Result<DiagOutput> {
    config.validate()?;
    let docs = run_docs(config)?;
    let gold = match config.optional_path("gold") {
        Some(p) => Some(select(config, docs.clone(), load_links(p)?).1),
        None => None,
    };
    let mentions = match &gold {
        Some(g) => {
            let mut by_doc: HashMap<String, Vec<Mention>> = HashMap::new();
            for link in g {
                by_doc
                    .entry(link.mention.doc_id.clone())
                    .or_default()
                    .push(link.mention.clone());
            }
            by_doc
        }
        None => detect_all(config, &docs)?,
    };
    let out = run_pipeline(config, &docs, &mentions)?;
    let jsonl = diagnostics(&out);
    if let Some(path) = config.optional_path("output") {
        write(path, &jsonl)?;
    }
    let candidate_report = gold.map(|g| coverage_table(&docs, &g, &out.linked)).transpose()?;
    Ok(DiagOutput {
        jsonl,
        candidate_report,
    })
}

fn coverage_table(docs: &[Document], gold: &[GoldLink], linked: &[LinkedMention]) -> Result<String> {
    let language: HashMap<&str, Language> = docs.iter().map(|d| (d.doc_id.as_str(), d.language)).collect();
    let sets: HashMap<_, &CandidateSet> = linked.iter().map(|l| (l.mention.key(), &l.candidates)).collect();
    let mut metrics = BTreeMap::new();
    for lang in Language::ALL {
        let (g, lists): (Vec<GoldLink>, Vec<CandidateSet>) = gold
            .iter()
            .filter(|g| language.get(g.mention.doc_id.as_str()) == Some(lang))
            .filter_map(|g| sets.get(&g.mention.key()).map(|s| (g.clone(), (*s).clone())))
            .unzip();
        match candidate_metrics(&g, &lists) {
            Ok(m) => {
                metrics.insert(*lang, m);
            }
            Err(LinkError::EmptyInput) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(candidate_report(&metrics))
}

/// Scores `system` against `gold`. Per-language rows need `docs`; without
/// it only the overall rows are printed. The report is written to `output`
/// when set.
pub fn cmd_eval(config: &PipelineConfig) -> Result<String> {
    let system = load_links(config.path("system")?)?;
    let gold = load_links(config.path("gold")?)?;
    let language: HashMap<String, Language> = match config.optional_path("docs") {
        Some(p) => load_docs(p)?.into_iter().map(|d| (d.doc_id, d.language)).collect(),
        None => HashMap::new(),
    };
    let text = report(&system, &gold, &|doc| language.get(doc).copied());
    if let Some(path) = config.optional_path("output") {
        write(path, &text)?;
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        for n in [0, 1, 7, 50, 53] {
            let fold = fold_assignment(n, 5, 3);
            let sizes = fold_sizes(&fold, 5);
            assert_eq!(sizes.iter().sum::<usize>(), n);
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        assert_eq!(fold_assignment(20, 5, 3), fold_assignment(20, 5, 3));
        assert_ne!(fold_assignment(20, 5, 3), fold_assignment(20, 5, 4));
    }

    #[test]
    fn splits_hold_out_one_fold() {
        let items: Vec<usize> = (0..10).collect();
        let fold = fold_assignment(10, 5, 1);
        let (train, dev) = split(&items, &fold, 5, 2);
        assert_eq!((train.len(), dev.len()), (8, 2));
        let (train, dev) = split(&items, &fold, 1, 0);
        assert_eq!((train.len(), dev.len()), (10, 0));
    }

    #[test]
    fn error_codes_are_stable() {
        assert_eq!(PipelineError::MissingSetting("kb").code(), "missing_setting");
        assert_eq!(PipelineError::EmptyCorpus("sentences").code(), "empty_corpus");
    }
}
