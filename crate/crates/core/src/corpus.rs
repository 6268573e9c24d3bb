//! Documents, tokens, typed mentions and the tab-separated file formats used
//! for corpora, gold annotations and system submissions.
//!
//! All offsets are counted in Unicode scalar values, never bytes.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed input at line {line}: {reason}")]
    MalformedInput { line: usize, reason: String },
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocId(String),
    #[error("unknown entity type `{value}` at line {line}")]
    UnknownEntityType { line: usize, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal $(| $alias:literal)*),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
                match s {
                    $($text $(| $alias)* => Ok($name::$variant),)+
                    other => Err(other.to_string()),
                }
            }
        }
    };
}

string_enum!(
    /// Document language.
    Language { Eng => "ENG", Cmn => "CMN", Spa => "SPA" }
);

string_enum!(
    /// Source genre of a document.
    Category { NewsReport => "NewsReport" | "NW", DiscussionForum => "DiscussionForum" | "DF" }
);

string_enum!(
    EntityType { Per => "PER", Org => "ORG", Gpe => "GPE", Loc => "LOC", Fac => "FAC" }
);

string_enum!(
    /// Named (proper name) or nominal (common noun) mention.
    MentionKind { Nam => "NAM", Nom => "NOM" }
);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub category: Category,
    pub language: Language,
}

impl Document {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring in character units; out-of-range ends are clamped.
    pub fn slice(&self, char_start: usize, char_end: usize) -> String {
        char_slice(&self.text, char_start, char_end)
    }

    /// Newline-delimited sentences with their document-level tokens.
    pub fn sentences(&self) -> Vec<Vec<Token>> {
        let mut sentences = Vec::new();
        let mut offset = 0;
        for line in self.text.split('\n') {
            let mut tokens = tokenize(line, self.language);
            for t in &mut tokens {
                t.char_start += offset;
                t.char_end += offset;
            }
            if !tokens.is_empty() {
                sentences.push(tokens);
            }
            offset += line.chars().count() + 1;
        }
        sentences
    }
}

pub fn char_slice(text: &str, char_start: usize, char_end: usize) -> String {
    text.chars()
        .skip(char_start)
        .take(char_end.saturating_sub(char_start))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub doc_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
    pub entity_type: EntityType,
    pub kind: MentionKind,
    pub confidence: f64,
}

/// Identity of a mention for matching purposes: document, span, type and kind.
pub type MentionKey = (String, usize, usize, EntityType, MentionKind);

impl Mention {
    pub fn key(&self) -> MentionKey {
        (
            self.doc_id.clone(),
            self.char_start,
            self.char_end,
            self.entity_type,
            self.kind,
        )
    }

    pub fn span_key(&self) -> (String, usize, usize) {
        (self.doc_id.clone(), self.char_start, self.char_end)
    }

    pub fn len(&self) -> usize {
        self.char_end - self.char_start
    }

    pub fn is_empty(&self) -> bool {
        self.char_end <= self.char_start
    }

    /// Twice the character midpoint, kept integral.
    pub fn midpoint2(&self) -> usize {
        self.char_start + self.char_end
    }

    /// True when `self` strictly contains neither nor is contained by `other`,
    /// but the two spans share at least one character.
    pub fn crosses(&self, other: &Mention) -> bool {
        if self.doc_id != other.doc_id {
            return false;
        }
        let overlap = self.char_start < other.char_end && other.char_start < self.char_end;
        let nested = (self.char_start <= other.char_start && other.char_end <= self.char_end)
            || (other.char_start <= self.char_start && self.char_end <= other.char_end);
        overlap && !nested
    }

    pub fn surface_matches(&self, doc: &Document) -> bool {
        doc.slice(self.char_start, self.char_end) == self.surface
    }
}

/// A link decision: a KB node or a NIL cluster label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LinkTarget {
    KbId(String),
    NilCluster(String),
}

impl LinkTarget {
    pub fn parse(s: &str) -> Self {
        if s.starts_with("NIL") {
            LinkTarget::NilCluster(s.to_string())
        } else {
            LinkTarget::KbId(s.to_string())
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, LinkTarget::NilCluster(_))
    }

    pub fn as_str(&self) -> &str {
        match self {
            LinkTarget::KbId(s) | LinkTarget::NilCluster(s) => s,
        }
    }
}

/// A mention together with its link decision. Used both for gold
/// annotations and for system output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldLink {
    pub mention: Mention,
    pub target: LinkTarget,
}

/// Splits `text` into tokens with character offsets.
///
/// ENG and SPA: a maximal run of letters/digits is one token, every other
/// non-space character is a token of its own. CMN: one token per
/// non-whitespace character.
pub fn tokenize(text: &str, language: Language) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run: Option<(usize, String)> = None;
    let flush = |run: &mut Option<(usize, String)>, end: usize, tokens: &mut Vec<Token>| {
        if let Some((start, surface)) = run.take() {
            tokens.push(Token {
                surface,
                char_start: start,
                char_end: end,
            });
        }
    };
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_whitespace() {
            flush(&mut run, i, &mut tokens);
            continue;
        }
        let joins = language != Language::Cmn && c.is_alphanumeric();
        if joins {
            match &mut run {
                Some((_, s)) => s.push(c),
                None => run = Some((i, c.to_string())),
            }
        } else {
            flush(&mut run, i, &mut tokens);
            tokens.push(Token {
                surface: c.to_string(),
                char_start: i,
                char_end: i + 1,
            });
        }
    }
    flush(&mut run, n, &mut tokens);
    tokens
}

pub fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn malformed(line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedInput {
        line,
        reason: reason.into(),
    }
}

pub fn parse_documents(content: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        if fields.len() != 4 {
            return Err(malformed(line_no, "expected 4 tab-separated fields"));
        }
        let category = fields[1]
            .parse()
            .map_err(|v| malformed(line_no, format!("unknown category `{v}`")))?;
        let language = fields[2]
            .parse()
            .map_err(|v| malformed(line_no, format!("unknown language `{v}`")))?;
        let doc_id = fields[0].to_string();
        if doc_id.is_empty() {
            return Err(malformed(line_no, "empty doc_id"));
        }
        if !seen.insert(doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId(doc_id));
        }
        docs.push(Document {
            doc_id,
            text: unescape_text(fields[3]),
            category,
            language,
        });
    }
    Ok(docs)
}

pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    parse_documents(&fs::read_to_string(path)?)
}

pub fn write_documents(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            d.doc_id,
            d.category,
            d.language,
            escape_text(&d.text)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn parse_gold(content: &str) -> Result<Vec<GoldLink>> {
    let mut links = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 8 {
            return Err(malformed(
                line_no,
                format!("expected 8 tab-separated fields, found {}", f.len()),
            ));
        }
        let (doc_id, span) = f[3]
            .rsplit_once(':')
            .ok_or_else(|| malformed(line_no, "offset field must be doc_id:start-end"))?;
        let (start, end) = span
            .split_once('-')
            .ok_or_else(|| malformed(line_no, "offset field must be doc_id:start-end"))?;
        let char_start: usize = start
            .parse()
            .map_err(|_| malformed(line_no, format!("bad start offset `{start}`")))?;
        let char_end: usize = end
            .parse()
            .map_err(|_| malformed(line_no, format!("bad end offset `{end}`")))?;
        if char_start >= char_end {
            return Err(malformed(line_no, "empty or inverted span"));
        }
        if f[4].is_empty() {
            return Err(malformed(line_no, "empty link field"));
        }
        let entity_type = f[5].parse().map_err(|v| CorpusError::UnknownEntityType {
            line: line_no,
            value: v,
        })?;
        let kind = f[6]
            .parse()
            .map_err(|v| malformed(line_no, format!("unknown mention kind `{v}`")))?;
        let confidence: f64 = f[7]
            .parse()
            .map_err(|_| malformed(line_no, format!("bad confidence `{}`", f[7])))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(malformed(line_no, "confidence outside [0,1]"));
        }
        links.push(GoldLink {
            mention: Mention {
                doc_id: doc_id.to_string(),
                char_start,
                char_end,
                surface: f[2].to_string(),
                entity_type,
                kind,
                confidence,
            },
            target: LinkTarget::parse(f[4]),
        });
    }
    Ok(links)
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldLink>> {
    parse_gold(&fs::read_to_string(path)?)
}

/// Renders linked mentions in submission order: sorted by
/// (doc_id, char_start, char_end), then type and kind for full determinism.
pub fn format_submission(links: &[GoldLink], system_id: &str) -> String {
    let mut sorted: Vec<&GoldLink> = links.iter().collect();
    sorted.sort_by(|a, b| {
        let (ma, mb) = (&a.mention, &b.mention);
        (
            &ma.doc_id,
            ma.char_start,
            ma.char_end,
            ma.entity_type,
            ma.kind,
            &a.target,
        )
            .cmp(&(
                &mb.doc_id,
                mb.char_start,
                mb.char_end,
                mb.entity_type,
                mb.kind,
                &b.target,
            ))
    });
    let mut out = String::new();
    for (i, link) in sorted.iter().enumerate() {
        let m = &link.mention;
        out.push_str(&format!(
            "{}\t{}_{:06}\t{}\t{}:{}-{}\t{}\t{}\t{}\t{}\n",
            system_id,
            system_id,
            i + 1,
            m.surface,
            m.doc_id,
            m.char_start,
            m.char_end,
            link.target.as_str(),
            m.entity_type,
            m.kind,
            m.confidence
        ));
    }
    out
}

pub fn write_submission(links: &[GoldLink], system_id: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(format_submission(links, system_id).as_bytes())?;
    Ok(())
}
