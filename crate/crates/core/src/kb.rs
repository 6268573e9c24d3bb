//! Knowledge-base snapshot and its search paths: exact name lookup, fuzzy
//! alias search, and tf-idf similarity between a document and entity
//! descriptions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{escape_text, unescape_text};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate kb_id `{0}`")]
    DuplicateKbId(String),
    #[error("index format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KbError>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbEntity {
    pub kb_id: String,
    pub canonical_name: String,
    pub aliases: BTreeSet<String>,
    pub links_count: u64,
    pub description: String,
    pub redirect_titles: BTreeSet<String>,
    pub disambiguation_titles: BTreeSet<String>,
    pub english_name: Option<String>,
}

impl KbEntity {
    /// Every name the entity can be found under.
    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.aliases
            .iter()
            .chain(&self.redirect_titles)
            .chain(&self.disambiguation_titles)
    }
}

/// Lowercases and collapses runs of whitespace to single spaces.
pub fn normalize_name(name: &str) -> String {
    name.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_ideograph(c: char) -> bool {
    matches!(c as u32, 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FFFF)
}

/// Search terms of a string: lowercased runs of letters and digits, with
/// each CJK ideograph a term of its own.
pub fn terms(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run = String::new();
    for c in text.chars() {
        if is_ideograph(c) {
            if !run.is_empty() {
                out.push(std::mem::take(&mut run));
            }
            out.push(c.to_string());
        } else if c.is_alphanumeric() {
            run.extend(c.to_lowercase());
        } else if !run.is_empty() {
            out.push(std::mem::take(&mut run));
        }
    }
    if !run.is_empty() {
        out.push(run);
    }
    out
}

/// `min(9, floor(log2(1 + links_count)))`.
pub fn hot_bin(links_count: u64) -> usize {
    let m = links_count.saturating_add(1);
    (63 - m.leading_zeros() as usize).min(9)
}

/// Similarity of two names: `1 − d / max(|a|, |b|)` with `d` the character
/// edit distance.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    let len = a.chars().count().max(b.chars().count());
    if len == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / len as f64
}

fn split_set(field: &str) -> BTreeSet<String> {
    field
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// Reads KB records: `kb_id, canonical_name, aliases, links_count,
/// description, redirect_titles, disambiguation_titles, english_name`,
/// tab-separated, with `|` between set members. The canonical name is always
/// counted among the aliases.
pub fn parse_kb(content: &str) -> Result<Vec<KbEntity>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |reason: String| KbError::Malformed { line: line_no, reason };
        if f.len() != 8 {
            return Err(bad(format!("expected 8 tab-separated fields, found {}", f.len())));
        }
        if f[0].is_empty() || f[1].trim().is_empty() {
            return Err(bad("empty kb_id or canonical name".into()));
        }
        let links_count = f[3].parse().map_err(|_| bad(format!("bad links_count `{}`", f[3])))?;
        if !seen.insert(f[0].to_string()) {
            return Err(KbError::DuplicateKbId(f[0].to_string()));
        }
        let mut aliases = split_set(f[2]);
        aliases.insert(f[1].to_string());
        out.push(KbEntity {
            kb_id: f[0].to_string(),
            canonical_name: f[1].to_string(),
            aliases,
            links_count,
            description: unescape_text(f[4]),
            redirect_titles: split_set(f[5]),
            disambiguation_titles: split_set(f[6]),
            english_name: Some(f[7].to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

pub fn load_kb(path: impl AsRef<Path>) -> Result<Vec<KbEntity>> {
    parse_kb(&fs::read_to_string(path)?)
}

pub fn format_kb(entities: &[KbEntity]) -> String {
    let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join("|");
    entities
        .iter()
        .map(|e| {
            format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                e.kb_id,
                e.canonical_name,
                join(&e.aliases),
                e.links_count,
                escape_text(&e.description),
                join(&e.redirect_titles),
                join(&e.disambiguation_titles),
                e.english_name.as_deref().unwrap_or("")
            )
        })
        .collect()
}

/// Abbreviations, Chinese script variants and the translation lexicon.
/// Keys are stored normalized.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxTables {
    pub abbreviations: BTreeMap<String, BTreeSet<String>>,
    /// Simplified to traditional.
    pub zh_variants: BTreeMap<String, String>,
    pub translations: BTreeMap<String, String>,
}

fn parse_pairs(content: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once('\t').ok_or_else(|| KbError::Malformed {
            line: i + 1,
            reason: "expected two tab-separated columns".into(),
        })?;
        out.push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(out)
}

impl AuxTables {
    pub fn parse(abbreviations: &str, zh_variants: &str, translations: &str) -> Result<Self> {
        let mut aux = AuxTables::default();
        for (k, v) in parse_pairs(abbreviations)? {
            aux.abbreviations.entry(normalize_name(&k)).or_default().insert(v);
        }
        for (k, v) in parse_pairs(zh_variants)? {
            aux.zh_variants.insert(k, v);
        }
        for (k, v) in parse_pairs(translations)? {
            aux.translations.insert(normalize_name(&k), v);
        }
        Ok(aux)
    }

    /// Reads whichever of the three tables exist; missing files count as empty.
    pub fn load(abbreviations: &Path, zh_variants: &Path, translations: &Path) -> Result<Self> {
        let read = |p: &Path| -> Result<String> {
            if p.exists() {
                Ok(fs::read_to_string(p)?)
            } else {
                Ok(String::new())
            }
        };
        Self::parse(&read(abbreviations)?, &read(zh_variants)?, &read(translations)?)
    }

    pub fn expand_abbreviation(&self, name: &str) -> Vec<String> {
        self.abbreviations
            .get(&normalize_name(name))
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn translate(&self, name: &str) -> Option<String> {
        self.translations.get(&normalize_name(name)).cloned()
    }

    /// The other-script spelling of `name`: a whole-string entry if one
    /// exists, otherwise character-wise substitution. Tried both ways.
    pub fn zh_variant(&self, name: &str) -> Option<String> {
        if let Some(t) = self.zh_variants.get(name) {
            return Some(t.clone());
        }
        if let Some((s, _)) = self.zh_variants.iter().find(|(_, t)| *t == name) {
            return Some(s.clone());
        }
        let forward: HashMap<char, char> = self.single_chars(false);
        let backward: HashMap<char, char> = self.single_chars(true);
        for table in [forward, backward] {
            let swapped: String = name.chars().map(|c| *table.get(&c).unwrap_or(&c)).collect();
            if swapped != name {
                return Some(swapped);
            }
        }
        None
    }

    fn single_chars(&self, reverse: bool) -> HashMap<char, char> {
        self.zh_variants
            .iter()
            .filter_map(|(s, t)| {
                let (mut a, mut b) = (s.chars(), t.chars());
                match (a.next(), a.next(), b.next(), b.next()) {
                    (Some(x), None, Some(y), None) => Some(if reverse { (y, x) } else { (x, y) }),
                    _ => None,
                }
            })
            .collect()
    }
}

/// A search hit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub kb_id: String,
    pub score: f64,
}

/// Frozen search structures over a KB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KbIndex {
    entities: Vec<KbEntity>,
    aux: AuxTables,
    /// Normalized alias, redirect or disambiguation title -> entity positions.
    exact: BTreeMap<String, BTreeSet<usize>>,
    /// Normalized canonical, redirect or disambiguation title -> positions.
    titles: BTreeMap<String, BTreeSet<usize>>,
    /// Term -> (normalized name, entity position) pairs containing it.
    name_terms: BTreeMap<String, BTreeSet<(String, usize)>>,
    /// Description term -> (entity position, tf-idf weight).
    postings: BTreeMap<String, Vec<(usize, f64)>>,
    idf: BTreeMap<String, f64>,
    norms: Vec<f64>,
}

/// Largest character edit distance at which a single-term query still
/// reaches a name it shares no term with.
pub const SINGLE_TERM_EDIT_BOUND: usize = 2;

fn tf(text: &str) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for t in terms(text) {
        *counts.entry(t).or_insert(0.0) += 1.0;
    }
    counts
}

impl KbIndex {
    pub fn build(entities: Vec<KbEntity>, aux: AuxTables) -> Result<Self> {
        let mut entities = entities;
        entities.sort_by(|a, b| a.kb_id.cmp(&b.kb_id));
        if let Some(w) = entities.windows(2).find(|w| w[0].kb_id == w[1].kb_id) {
            return Err(KbError::DuplicateKbId(w[0].kb_id.clone()));
        }
        let mut exact: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        let mut titles: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        let mut name_terms: BTreeMap<String, BTreeSet<(String, usize)>> = BTreeMap::new();
        for (i, e) in entities.iter().enumerate() {
            for name in e.names() {
                let n = normalize_name(name);
                exact.entry(n.clone()).or_default().insert(i);
                for t in terms(&n) {
                    name_terms.entry(t).or_default().insert((n.clone(), i));
                }
            }
            for title in std::iter::once(&e.canonical_name)
                .chain(&e.redirect_titles)
                .chain(&e.disambiguation_titles)
            {
                titles.entry(normalize_name(title)).or_default().insert(i);
            }
        }

        let n_docs = entities.len() as f64;
        let doc_tf: Vec<BTreeMap<String, f64>> = entities.iter().map(|e| tf(&e.description)).collect();
        let mut df: BTreeMap<String, f64> = BTreeMap::new();
        for counts in &doc_tf {
            for t in counts.keys() {
                *df.entry(t.clone()).or_insert(0.0) += 1.0;
            }
        }
        let idf: BTreeMap<String, f64> = df.iter().map(|(t, d)| (t.clone(), (1.0 + n_docs / d).ln())).collect();
        let mut postings: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        let mut norms = vec![0.0; entities.len()];
        for (i, counts) in doc_tf.iter().enumerate() {
            for (t, c) in counts {
                let w = c * idf[t];
                norms[i] += w * w;
                postings.entry(t.clone()).or_default().push((i, w));
            }
            norms[i] = norms[i].sqrt();
        }
        Ok(KbIndex {
            entities,
            aux,
            exact,
            titles,
            name_terms,
            postings,
            idf,
            norms,
        })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn aux(&self) -> &AuxTables {
        &self.aux
    }

    pub fn entities(&self) -> &[KbEntity] {
        &self.entities
    }

    pub fn entity(&self, kb_id: &str) -> Option<&KbEntity> {
        self.position(kb_id).map(|i| &self.entities[i])
    }

    fn position(&self, kb_id: &str) -> Option<usize> {
        self.entities.binary_search_by(|e| e.kb_id.as_str().cmp(kb_id)).ok()
    }

    fn ids(&self, positions: Option<&BTreeSet<usize>>) -> BTreeSet<String> {
        positions
            .into_iter()
            .flatten()
            .map(|&i| self.entities[i].kb_id.clone())
            .collect()
    }

    /// Entities with an alias, redirect or disambiguation title equal to
    /// `name` after normalization.
    pub fn exact_lookup(&self, name: &str) -> BTreeSet<String> {
        self.ids(self.exact.get(&normalize_name(name)))
    }

    /// Entities whose canonical name, redirect or disambiguation title equals
    /// `name` after normalization.
    pub fn title_lookup(&self, name: &str) -> BTreeSet<String> {
        self.ids(self.titles.get(&normalize_name(name)))
    }

    /// Order used for every ranked list: score, then popularity, then id.
    fn rank(&self, scored: HashMap<usize, f64>, limit: usize) -> Vec<Hit> {
        let mut hits: Vec<(usize, f64)> = scored.into_iter().collect();
        hits.sort_by(|(a, sa), (b, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.entities[*b].links_count.cmp(&self.entities[*a].links_count))
                .then_with(|| self.entities[*a].kb_id.cmp(&self.entities[*b].kb_id))
        });
        hits.truncate(limit);
        hits.into_iter()
            .map(|(i, score)| Hit {
                kb_id: self.entities[i].kb_id.clone(),
                score,
            })
            .collect()
    }

    /// Names sharing a term with `query`, plus (for single-term queries)
    /// names within [`SINGLE_TERM_EDIT_BOUND`] edits, scored by
    /// [`name_similarity`] and ranked best name per entity first.
    pub fn fuzzy_search(&self, query: &str, limit: usize) -> Vec<Hit> {
        let q = normalize_name(query);
        let q_terms = terms(&q);
        let mut best: HashMap<usize, f64> = HashMap::new();
        let mut consider = |name: &str, i: usize| {
            let s = name_similarity(&q, name);
            let e = best.entry(i).or_insert(s);
            if s > *e {
                *e = s;
            }
        };
        for &i in self.exact.get(&q).into_iter().flatten() {
            consider(&q, i);
        }
        for t in &q_terms {
            for (name, i) in self.name_terms.get(t).into_iter().flatten() {
                consider(name, *i);
            }
        }
        if q_terms.len() == 1 {
            let q_len = q.chars().count();
            for (name, positions) in &self.exact {
                if name.chars().count().abs_diff(q_len) > SINGLE_TERM_EDIT_BOUND {
                    continue;
                }
                if strsim::levenshtein(&q, name) <= SINGLE_TERM_EDIT_BOUND {
                    for &i in positions {
                        consider(name, i);
                    }
                }
            }
        }
        self.rank(best, limit)
    }

    /// Cosine similarity between the tf-idf vector of `text` and each entity
    /// description; positive scores only.
    pub fn document_search(&self, text: &str, limit: usize) -> Vec<Hit> {
        self.rank(self.cosines(text), limit)
    }

    /// Every positive description cosine for `text`, by kb_id.
    pub fn document_similarities(&self, text: &str) -> BTreeMap<String, f64> {
        self.cosines(text)
            .into_iter()
            .map(|(i, s)| (self.entities[i].kb_id.clone(), s))
            .collect()
    }

    fn cosines(&self, text: &str) -> HashMap<usize, f64> {
        let (dot, norm) = self.query_products(text);
        if norm == 0.0 {
            return HashMap::new();
        }
        dot.into_iter()
            .filter(|(i, d)| *d > 0.0 && self.norms[*i] > 0.0)
            .map(|(i, d)| (i, (d / (norm * self.norms[i])).min(1.0)))
            .collect()
    }

    fn query_products(&self, text: &str) -> (HashMap<usize, f64>, f64) {
        let mut dot: HashMap<usize, f64> = HashMap::new();
        let mut norm = 0.0;
        for (t, c) in tf(text) {
            let Some(idf) = self.idf.get(&t) else {
                continue;
            };
            let w = c * idf;
            norm += w * w;
            for (i, dw) in &self.postings[&t] {
                *dot.entry(*i).or_insert(0.0) += w * dw;
            }
        }
        (dot, norm.sqrt())
    }

    pub fn hot_bin(&self, kb_id: &str) -> usize {
        self.entity(kb_id).map_or(0, |e| hot_bin(e.links_count))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| KbError::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(id: &str, name: &str, aliases: &[&str], links: u64, desc: &str) -> KbEntity {
        let mut a: BTreeSet<String> = aliases.iter().map(|s| s.to_string()).collect();
        a.insert(name.to_string());
        KbEntity {
            kb_id: id.into(),
            canonical_name: name.into(),
            aliases: a,
            links_count: links,
            description: desc.into(),
            redirect_titles: BTreeSet::new(),
            disambiguation_titles: BTreeSet::new(),
            english_name: None,
        }
    }

    fn index() -> KbIndex {
        let mut uk = entity("m.uk", "United Kingdom", &["England"], 500, "country in europe");
        uk.redirect_titles.insert("Britain".into());
        KbIndex::build(
            vec![
                entity(
                    "m.gwb",
                    "George W. Bush",
                    &["Bush"],
                    900,
                    "president of the united states",
                ),
                entity("m.ghwb", "George H. W. Bush", &["Bush"], 700, "former president"),
                uk,
            ],
            AuxTables::default(),
        )
        .unwrap()
    }

    #[test]
    fn exact_lookup_folds_case_and_follows_redirects() {
        let idx = index();
        assert_eq!(idx.exact_lookup("bush").len(), 2);
        assert!(idx.exact_lookup("ENGLAND").contains("m.uk"));
        assert!(idx.exact_lookup("Britain").contains("m.uk"));
        assert!(idx.exact_lookup("nowhere").is_empty());
        assert!(idx.title_lookup("britain").contains("m.uk"));
        assert!(idx.title_lookup("england").is_empty());
    }

    #[test]
    fn fuzzy_scores_by_edit_distance() {
        let idx = index();
        let hits = idx.fuzzy_search("George Bush", 10);
        let gwb = hits.iter().find(|h| h.kb_id == "m.gwb").unwrap();
        assert!((gwb.score - (1.0 - 3.0 / 14.0)).abs() < 1e-12);
        let hits = idx.fuzzy_search("Bush", 10);
        assert_eq!(hits[0].score, 1.0);
        assert_eq!(hits[0].kb_id, "m.gwb");
        assert!(idx.fuzzy_search("xyzzy", 10).is_empty());
        assert_eq!(idx.fuzzy_search("Englnd", 10)[0].kb_id, "m.uk");
    }

    #[test]
    fn document_search_self_similarity() {
        let idx = index();
        let hits = idx.document_search("country in europe", 5);
        assert_eq!(hits[0].kb_id, "m.uk");
        assert!((hits[0].score - 1.0).abs() < 1e-9);
        assert!(idx.document_search("zebra", 5).is_empty());
    }

    #[test]
    fn hot_bins() {
        assert_eq!(hot_bin(0), 0);
        assert_eq!(hot_bin(1), 1);
        assert_eq!(hot_bin(1000), 9);
        assert_eq!(hot_bin(u64::MAX), 9);
    }

    #[test]
    fn kb_round_trip_and_errors() {
        let idx = index();
        let text = format_kb(idx.entities());
        assert_eq!(parse_kb(&text).unwrap(), idx.entities());
        assert!(matches!(
            parse_kb("a\tA\t\t1\td\t\t\t\na\tB\t\t1\td\t\t\t\n"),
            Err(KbError::DuplicateKbId(_))
        ));
        assert!(matches!(
            parse_kb("a\tA\t\tmany\td\t\t\t\n"),
            Err(KbError::Malformed { line: 1, .. })
        ));
        let rebuilt = KbIndex::from_json(&idx.to_json()).unwrap();
        assert_eq!(rebuilt, idx);
        assert_eq!(rebuilt.to_json(), idx.to_json());
        let empty = KbIndex::build(Vec::new(), AuxTables::default()).unwrap();
        assert!(empty.fuzzy_search("bush", 3).is_empty());
        assert!(empty.document_search("bush", 3).is_empty());
    }

    #[test]
    fn aux_tables() {
        let aux = AuxTables::parse("SC\tSouth Carolina\n", "国\t國\n", "Estados Unidos\tUnited States\n").unwrap();
        assert_eq!(aux.expand_abbreviation("sc"), vec!["South Carolina".to_string()]);
        assert_eq!(aux.zh_variant("中国").as_deref(), Some("中國"));
        assert_eq!(aux.zh_variant("中國").as_deref(), Some("中国"));
        assert_eq!(aux.translate("estados unidos").as_deref(), Some("United States"));
        assert_eq!(aux.zh_variant("abc"), None);
    }
}
