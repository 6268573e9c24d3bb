//! Entity linking: query expansion, candidate generation, candidate
//! features and the neural ranker that picks a KB node or NIL.

mod features;
mod ranker;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{Document, GoldLink, Language, LinkTarget, Mention, MentionKind};
use crate::kb::{normalize_name, terms, KbIndex};
use crate::neural::NeuralError;

pub use features::{
    edit_bin, extract_features, word_edit_distance, FeatureInput, FEATURE_DIM, PROJECTION_DIM, WORD_DIM,
};
pub use ranker::{
    decide, ensemble_posterior, rank_examples, train_ranker, RankExample, Ranker, RankerConfig, RankerReport,
};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("no candidates to rank")]
    EmptyList,
    #[error("candidate `{0}` is not in the KB")]
    UnknownCandidate(String),
    #[error("no gold mentions with KB targets")]
    EmptyInput,
    #[error("no usable training examples")]
    EmptyTrainingSet,
    #[error("ensemble members disagree on feature space")]
    IncompatibleModels,
    #[error("invalid ranker configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

pub type Result<T> = std::result::Result<T, LinkError>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Candidate {
    Kb(String),
    Nil,
}

impl Candidate {
    pub fn kb_id(&self) -> Option<&str> {
        match self {
            Candidate::Kb(id) => Some(id),
            Candidate::Nil => None,
        }
    }
}

/// Default list cut-off for the ranked fuzzy results, per language.
pub fn default_top_n(language: Language) -> usize {
    match language {
        Language::Eng | Language::Spa => 3,
        Language::Cmn => 30,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSettings {
    pub top_n: usize,
    /// Hits kept per fuzzy query.
    pub fuzzy_limit: usize,
    /// Hits kept from the whole-document search.
    pub document_limit: usize,
}

impl CandidateSettings {
    pub fn for_language(language: Language) -> Self {
        CandidateSettings {
            top_n: default_top_n(language),
            fuzzy_limit: 20,
            document_limit: 20,
        }
    }
}

/// The queries for one mention, unique after name normalization, in the
/// order they were produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueryList(Vec<String>);

impl QueryList {
    pub fn new<S: Into<String>>(queries: impl IntoIterator<Item = S>) -> Self {
        let mut list = QueryList::default();
        for q in queries {
            list.push(q);
        }
        list
    }

    fn push(&mut self, q: impl Into<String>) {
        let q = q.into();
        let key = normalize_name(&q);
        if !key.is_empty() && !self.0.iter().any(|x| normalize_name(x) == key) {
            self.0.push(q);
        }
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The closest named mention of the same type in the mention's document,
/// by midpoint distance with the earlier one winning ties.
pub fn nearest_named<'a>(mention: &Mention, doc_mentions: &'a [Mention]) -> Option<&'a Mention> {
    doc_mentions
        .iter()
        .filter(|m| m.doc_id == mention.doc_id && m.kind == MentionKind::Nam && m.entity_type == mention.entity_type)
        .min_by_key(|m| (m.midpoint2().abs_diff(mention.midpoint2()), m.char_start, m.char_end))
}

/// Builds the query list for `mention`:
///
/// 1. the surface itself;
/// 2. longer mentions of the document containing the base's terms in order;
/// 3. the other Chinese script of every query so far;
/// 4. abbreviation expansions of the base;
/// 5. for nominal mentions the base is the nearest same-type named mention;
/// 6. the lexicon translation of the surface (and of a nominal's base),
///    itself expanded with 2 and 4.
pub fn expand_queries(mention: &Mention, doc_mentions: &[Mention], index: &KbIndex) -> QueryList {
    let aux = index.aux();
    let mut q = QueryList::default();
    q.push(mention.surface.clone());

    let expand_base = |q: &mut QueryList, base: &str| {
        q.push(base);
        let needle = terms(base);
        let mut longer: Vec<&Mention> = doc_mentions
            .iter()
            .filter(|m| {
                let hay = terms(&m.surface);
                m.doc_id == mention.doc_id
                    && !needle.is_empty()
                    && hay.len() > needle.len()
                    && hay.windows(needle.len()).any(|w| w == needle.as_slice())
            })
            .collect();
        longer.sort_by_key(|m| (m.char_start, m.char_end));
        for m in longer {
            q.push(m.surface.clone());
        }
        for full in aux.expand_abbreviation(base) {
            q.push(full);
        }
    };

    let base = match mention.kind {
        MentionKind::Nam => Some(mention.surface.clone()),
        MentionKind::Nom => nearest_named(mention, doc_mentions).map(|m| m.surface.clone()),
    };
    if let Some(b) = &base {
        expand_base(&mut q, b);
    }
    let so_far = q.0.clone();
    for s in &so_far {
        if let Some(v) = aux.zh_variant(s) {
            q.push(v);
        }
    }

    let mut sources = vec![mention.surface.clone()];
    sources.extend(base);
    let mut translated = Vec::new();
    for s in &sources {
        let variant = aux.zh_variant(s);
        for form in std::iter::once(s.clone()).chain(variant) {
            if let Some(t) = aux.translate(&form) {
                translated.push(t);
            }
        }
    }
    for t in translated {
        expand_base(&mut q, &t);
    }
    q
}

/// Per-document state shared by all its mentions.
#[derive(Clone, Debug)]
pub struct DocumentContext<'a> {
    pub doc: &'a Document,
    pub mentions: &'a [Mention],
    /// Positive description cosines for the document text.
    pub similarities: BTreeMap<String, f64>,
    /// Ids of the whole-document search hits.
    pub result2: BTreeSet<String>,
}

impl<'a> DocumentContext<'a> {
    pub fn new(doc: &'a Document, mentions: &'a [Mention], index: &KbIndex, settings: &CandidateSettings) -> Self {
        DocumentContext {
            doc,
            mentions,
            similarities: index.document_similarities(&doc.text),
            result2: index
                .document_search(&doc.text, settings.document_limit)
                .into_iter()
                .map(|h| h.kb_id)
                .collect(),
        }
    }
}

/// One mention's candidates together with how they were found.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub queries: QueryList,
    /// Result1 ranked by best fuzzy score, popularity, then id.
    pub result1: Vec<(String, f64)>,
    pub top: Vec<String>,
    pub overlap: Vec<String>,
    pub titles: Vec<String>,
    /// Unique KB candidates followed by exactly one `Nil`.
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn kb_count(&self) -> usize {
        self.candidates.len() - 1
    }

    pub fn contains(&self, kb_id: &str) -> bool {
        self.candidates.iter().any(|c| c.kb_id() == Some(kb_id))
    }
}

/// Result1 is every exact or fuzzy hit of any query; Result2 the document
/// search hits. The list is the top `N` of Result1, Result1 ∩ Result2,
/// entities whose title matches a query exactly, and `Nil`.
pub fn generate_candidates(
    mention: &Mention,
    ctx: &DocumentContext,
    index: &KbIndex,
    settings: &CandidateSettings,
) -> CandidateSet {
    candidates_for_queries(expand_queries(mention, ctx.mentions, index), ctx, index, settings)
}

/// [`generate_candidates`] for an explicit query list.
pub fn candidates_for_queries(
    queries: QueryList,
    ctx: &DocumentContext,
    index: &KbIndex,
    settings: &CandidateSettings,
) -> CandidateSet {
    let mut best: HashMap<String, f64> = HashMap::new();
    let mut note = |id: String, score: f64| {
        let e = best.entry(id).or_insert(score);
        if score > *e {
            *e = score;
        }
    };
    for q in queries.as_slice() {
        for id in index.exact_lookup(q) {
            note(id, 1.0);
        }
        for hit in index.fuzzy_search(q, settings.fuzzy_limit) {
            note(hit.kb_id, hit.score);
        }
    }
    let links = |id: &str| index.entity(id).map_or(0, |e| e.links_count);
    let mut result1: Vec<(String, f64)> = best.into_iter().collect();
    result1.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| links(b).cmp(&links(a)))
            .then_with(|| a.cmp(b))
    });

    let top: Vec<String> = result1.iter().take(settings.top_n).map(|(id, _)| id.clone()).collect();
    let overlap: Vec<String> = result1
        .iter()
        .filter(|(id, _)| ctx.result2.contains(id))
        .map(|(id, _)| id.clone())
        .collect();
    let titles: Vec<String> = queries.as_slice().iter().flat_map(|q| index.title_lookup(q)).collect();

    let mut seen = BTreeSet::new();
    let mut candidates = Vec::new();
    for id in top.iter().chain(&overlap).chain(&titles) {
        if seen.insert(id.clone()) {
            candidates.push(Candidate::Kb(id.clone()));
        }
    }
    candidates.push(Candidate::Nil);
    CandidateSet {
        queries,
        result1,
        top,
        overlap,
        titles,
        candidates,
    }
}

/// Coverage and mean KB-candidate count over the gold mentions with KB
/// targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateMetrics {
    pub coverage: f64,
    pub avg_count: f64,
    pub mentions: usize,
}

/// `lists[i]` belongs to `gold[i]`; NIL gold mentions are ignored.
pub fn candidate_metrics(gold: &[GoldLink], lists: &[CandidateSet]) -> Result<CandidateMetrics> {
    let mut covered = 0usize;
    let mut total = 0usize;
    let mut count = 0usize;
    for (g, list) in gold.iter().zip(lists) {
        let LinkTarget::KbId(id) = &g.target else {
            continue;
        };
        total += 1;
        count += list.kb_count();
        if list.contains(id) {
            covered += 1;
        }
    }
    if total == 0 {
        return Err(LinkError::EmptyInput);
    }
    Ok(CandidateMetrics {
        coverage: covered as f64 / total as f64,
        avg_count: count as f64 / total as f64,
        mentions: total,
    })
}

/// Tab-separated table with a row per metric and a column per language.
pub fn candidate_report(metrics: &BTreeMap<Language, CandidateMetrics>) -> String {
    let langs = [Language::Eng, Language::Cmn, Language::Spa];
    let mut out = String::from("test set");
    for l in langs {
        let _ = write!(out, "\t{l}");
    }
    out.push('\n');
    for (label, cell) in [
        (
            "coverage",
            (|m: &CandidateMetrics| format!("{:.3}", m.coverage)) as fn(&CandidateMetrics) -> String,
        ),
        ("avg. count", |m: &CandidateMetrics| format!("{:.2}", m.avg_count)),
    ] {
        out.push_str(label);
        for l in langs {
            let _ = write!(out, "\t{}", metrics.get(&l).map_or_else(|| "-".to_string(), cell));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Category, EntityType};
    use crate::kb::{AuxTables, KbEntity};

    fn mention(doc: &str, start: usize, surface: &str, ty: EntityType, kind: MentionKind) -> Mention {
        Mention {
            doc_id: doc.into(),
            char_start: start,
            char_end: start + surface.chars().count(),
            surface: surface.into(),
            entity_type: ty,
            kind,
            confidence: 1.0,
        }
    }

    fn entity(id: &str, name: &str, aliases: &[&str], links: u64) -> KbEntity {
        let mut a: BTreeSet<String> = aliases.iter().map(|s| s.to_string()).collect();
        a.insert(name.into());
        KbEntity {
            kb_id: id.into(),
            canonical_name: name.into(),
            aliases: a,
            links_count: links,
            description: format!("about {name}"),
            redirect_titles: BTreeSet::new(),
            disambiguation_titles: BTreeSet::new(),
            english_name: None,
        }
    }

    fn index() -> KbIndex {
        let aux = AuxTables::parse("sc\tSouth Carolina\n", "", "").unwrap();
        KbIndex::build(
            vec![
                entity("m.1", "George W. Bush", &["Bush"], 10),
                entity("m.2", "South Carolina", &[], 5),
                entity("m.3", "Barack Hussein Obama", &["Obama"], 7),
            ],
            aux,
        )
        .unwrap()
    }

    #[test]
    fn query_rules() {
        let idx = index();
        let ms = vec![
            mention("d", 0, "George Bush", EntityType::Per, MentionKind::Nam),
            mention("d", 20, "Bush", EntityType::Per, MentionKind::Nam),
        ];
        let q = expand_queries(&ms[1], &ms, &idx);
        assert_eq!(q.as_slice(), ["Bush", "George Bush"]);

        let sc = mention("d", 0, "sc", EntityType::Gpe, MentionKind::Nam);
        let q = expand_queries(&sc, std::slice::from_ref(&sc), &idx);
        assert!(q.as_slice().contains(&"South Carolina".to_string()));

        let ms = vec![
            mention("d", 0, "Barack Hussein Obama", EntityType::Per, MentionKind::Nam),
            mention("d", 30, "president", EntityType::Per, MentionKind::Nom),
            mention("d", 200, "John", EntityType::Per, MentionKind::Nam),
        ];
        let q = expand_queries(&ms[1], &ms, &idx);
        assert_eq!(q.as_slice(), ["president", "Barack Hussein Obama"]);
    }

    #[test]
    fn nearest_named_prefers_earlier_on_ties() {
        let ms = vec![
            mention("d", 0, "Ann", EntityType::Per, MentionKind::Nam),
            mention("d", 10, "boss", EntityType::Per, MentionKind::Nom),
            mention("d", 21, "Bob", EntityType::Per, MentionKind::Nam),
            mention("d", 5, "Acme", EntityType::Org, MentionKind::Nam),
        ];
        assert_eq!(nearest_named(&ms[1], &ms).unwrap().surface, "Ann");
    }

    #[test]
    fn candidate_lists() {
        let idx = index();
        let doc = Document {
            doc_id: "d".into(),
            text: "Bush visited".into(),
            category: Category::NewsReport,
            language: Language::Eng,
        };
        let ms = vec![mention("d", 0, "Bush", EntityType::Per, MentionKind::Nam)];
        let settings = CandidateSettings::for_language(Language::Eng);
        let ctx = DocumentContext::new(&doc, &ms, &idx, &settings);
        let set = generate_candidates(&ms[0], &ctx, &idx, &settings);
        assert!(set.contains("m.1"));
        assert_eq!(set.candidates.iter().filter(|c| **c == Candidate::Nil).count(), 1);
        assert_eq!(set.candidates.last(), Some(&Candidate::Nil));

        let none = vec![mention("d", 0, "Zzyzx", EntityType::Per, MentionKind::Nam)];
        let ctx = DocumentContext::new(&doc, &none, &idx, &settings);
        let set = generate_candidates(&none[0], &ctx, &idx, &settings);
        assert_eq!(set.candidates, vec![Candidate::Nil]);
    }

    #[test]
    fn metrics_and_report() {
        let set = |ids: &[&str]| CandidateSet {
            queries: QueryList::default(),
            result1: Vec::new(),
            top: Vec::new(),
            overlap: Vec::new(),
            titles: Vec::new(),
            candidates: ids
                .iter()
                .map(|i| Candidate::Kb(i.to_string()))
                .chain([Candidate::Nil])
                .collect(),
        };
        let gold = |id: &str| GoldLink {
            mention: mention("d", 0, "x", EntityType::Per, MentionKind::Nam),
            target: LinkTarget::KbId(id.into()),
        };
        let m = candidate_metrics(
            &[gold("a"), gold("b")],
            &[set(&["a", "x", "y"]), set(&["b", "1", "2", "3", "4"])],
        )
        .unwrap();
        assert_eq!(m.coverage, 1.0);
        assert_eq!(m.avg_count, 4.0);
        assert!(matches!(candidate_metrics(&[], &[]), Err(LinkError::EmptyInput)));
        let report = candidate_report(&BTreeMap::from([(Language::Eng, m)]));
        assert_eq!(
            report,
            "test set\tENG\tCMN\tSPA\ncoverage\t1.000\t-\t-\navg. count\t4.00\t-\t-\n"
        );
    }
}
