//! Nested mention spans as bracketed symbol sequences, and the flat BIO view
//! used by the sequence tagger.
//!
//! A sentence of `n` tokens with spans is written as a sequence of typed
//! open/close brackets around exactly `n` placeholders `Z`, terminated by
//! `</s>`:
//!
//! ```text
//! Kentucky Fried Chicken   {(0,3,FAC), (0,1,PER)}
//! [_FAC [_PER Z ]_PER Z Z ]_FAC </s>
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::corpus::{EntityType, MentionKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("spans {0:?} and {1:?} cross")]
    CrossingSpans(Span, Span),
    #[error("span {0:?} lies outside a sentence of {1} tokens")]
    SpanOutOfBounds(Span, usize),
    #[error("unmatched bracket at symbol {0}")]
    UnmatchedBracket(usize),
    #[error("bracket pair closing at symbol {0} encloses no placeholder")]
    EmptySpan(usize),
    #[error("expected {expected} placeholders, found {found}")]
    PlaceholderCountMismatch { expected: usize, found: usize },
    #[error("end-of-sequence symbol at position {0} is not last")]
    MisplacedEnd(usize),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

pub type Result<T> = std::result::Result<T, CodecError>;

/// Entity type paired with mention kind; ten labels in total.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub entity_type: EntityType,
    pub kind: MentionKind,
}

impl Label {
    pub const COUNT: usize = 10;

    pub fn new(entity_type: EntityType, kind: MentionKind) -> Self {
        Label { entity_type, kind }
    }

    pub fn index(self) -> usize {
        self.entity_type.index() * 2 + self.kind.index()
    }

    pub fn from_index(i: usize) -> Self {
        Label {
            entity_type: EntityType::ALL[i / 2],
            kind: MentionKind::ALL[i % 2],
        }
    }

    pub fn all() -> impl Iterator<Item = Label> {
        (0..Self::COUNT).map(Label::from_index)
    }

    fn suffix(self) -> String {
        match self.kind {
            MentionKind::Nam => self.entity_type.to_string(),
            MentionKind::Nom => format!("{}-NOM", self.entity_type),
        }
    }

    fn parse_suffix(s: &str) -> Option<Self> {
        let (ty, kind) = match s.strip_suffix("-NOM") {
            Some(ty) => (ty, MentionKind::Nom),
            None => (s, MentionKind::Nam),
        };
        Some(Label::new(ty.parse().ok()?, kind))
    }
}

/// Half-open token span `[start, end)` with its label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

impl Span {
    pub fn new(start: usize, end: usize, entity_type: EntityType, kind: MentionKind) -> Self {
        Span {
            start,
            end,
            label: Label::new(entity_type, kind),
        }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    fn crosses(&self, other: &Span) -> bool {
        let overlap = self.start < other.end && other.start < self.end;
        overlap && !self.contains(other) && !other.contains(self)
    }
}

// Canonical order: by start, longer spans first, then label.
impl Ord for Span {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.start, std::cmp::Reverse(self.end), self.label).cmp(&(
            other.start,
            std::cmp::Reverse(other.end),
            other.label,
        ))
    }
}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A set of token spans in which any two spans are disjoint or nested.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NestedLabeling {
    spans: BTreeSet<Span>,
}

impl NestedLabeling {
    pub fn new(spans: impl IntoIterator<Item = Span>) -> Result<Self> {
        let spans: BTreeSet<Span> = spans.into_iter().collect();
        let v: Vec<&Span> = spans.iter().collect();
        for (i, a) in v.iter().enumerate() {
            if a.start >= a.end {
                return Err(CodecError::SpanOutOfBounds(**a, a.end));
            }
            for b in &v[i + 1..] {
                // sorted by start: once b starts past a's end nothing later can cross a
                if b.start >= a.end {
                    break;
                }
                if a.crosses(b) {
                    return Err(CodecError::CrossingSpans(**a, **b));
                }
            }
        }
        Ok(NestedLabeling { spans })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        self.spans.iter()
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Spans not contained in any other span.
    pub fn outermost(&self) -> Vec<Span> {
        let mut out: Vec<Span> = Vec::new();
        for s in &self.spans {
            // canonical order visits containers before their contents
            if out.last().is_some_and(|o| s.start < o.end) {
                continue;
            }
            out.push(*s);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Open(Label),
    Close(Label),
    Placeholder,
    EndOfSequence,
}

impl Symbol {
    /// 10 opens, 10 closes, placeholder, end.
    pub const ALPHABET: usize = 2 * Label::COUNT + 2;
    pub const PLACEHOLDER_ID: usize = 2 * Label::COUNT;
    pub const END_ID: usize = 2 * Label::COUNT + 1;

    pub fn id(self) -> usize {
        match self {
            Symbol::Open(l) => l.index(),
            Symbol::Close(l) => Label::COUNT + l.index(),
            Symbol::Placeholder => Self::PLACEHOLDER_ID,
            Symbol::EndOfSequence => Self::END_ID,
        }
    }

    pub fn from_id(id: usize) -> Self {
        match id {
            i if i < Label::COUNT => Symbol::Open(Label::from_index(i)),
            i if i < 2 * Label::COUNT => Symbol::Close(Label::from_index(i - Label::COUNT)),
            Self::PLACEHOLDER_ID => Symbol::Placeholder,
            Self::END_ID => Symbol::EndOfSequence,
            _ => panic!("symbol id {id} outside alphabet"),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Open(l) => write!(f, "[_{}", l.suffix()),
            Symbol::Close(l) => write!(f, "]_{}", l.suffix()),
            Symbol::Placeholder => f.write_str("Z"),
            Symbol::EndOfSequence => f.write_str("</s>"),
        }
    }
}

impl std::str::FromStr for Symbol {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || CodecError::UnknownSymbol(s.to_string());
        match s {
            "Z" => Ok(Symbol::Placeholder),
            "</s>" => Ok(Symbol::EndOfSequence),
            _ => {
                if let Some(rest) = s.strip_prefix("[_") {
                    Label::parse_suffix(rest).map(Symbol::Open).ok_or_else(unknown)
                } else if let Some(rest) = s.strip_prefix("]_") {
                    Label::parse_suffix(rest).map(Symbol::Close).ok_or_else(unknown)
                } else {
                    Err(unknown())
                }
            }
        }
    }
}

/// Space-separated rendering, e.g. `[_FAC [_PER Z ]_PER Z Z ]_FAC </s>`.
pub fn render(symbols: &[Symbol]) -> String {
    symbols.iter().map(Symbol::to_string).collect::<Vec<_>>().join(" ")
}

pub fn parse_rendered(line: &str) -> Result<Vec<Symbol>> {
    line.split_whitespace().map(str::parse).collect()
}

/// Writes `labeling` over `sentence_length` placeholders.
pub fn linearize(sentence_length: usize, labeling: &NestedLabeling) -> Result<Vec<Symbol>> {
    let spans: Vec<Span> = labeling.spans().copied().collect();
    if let Some(s) = spans.iter().find(|s| s.end > sentence_length) {
        return Err(CodecError::SpanOutOfBounds(*s, sentence_length));
    }
    let mut out = Vec::with_capacity(sentence_length + 2 * spans.len() + 1);
    let mut stack: Vec<Span> = Vec::new();
    let mut next = spans.iter().peekable();
    for pos in 0..sentence_length {
        while let Some(s) = next.next_if(|s| s.start == pos) {
            if let Some(top) = stack.last() {
                if s.end > top.end {
                    return Err(CodecError::CrossingSpans(*top, *s));
                }
            }
            out.push(Symbol::Open(s.label));
            stack.push(*s);
        }
        out.push(Symbol::Placeholder);
        while let Some(top) = stack.last() {
            if top.end != pos + 1 {
                break;
            }
            out.push(Symbol::Close(top.label));
            stack.pop();
        }
    }
    out.push(Symbol::EndOfSequence);
    Ok(out)
}

/// Inverse of [`linearize`]. A trailing `</s>` is optional.
pub fn parse_symbols(sentence_length: usize, symbols: &[Symbol]) -> Result<NestedLabeling> {
    let placeholders = symbols.iter().filter(|s| **s == Symbol::Placeholder).count();
    if placeholders != sentence_length {
        return Err(CodecError::PlaceholderCountMismatch {
            expected: sentence_length,
            found: placeholders,
        });
    }
    let mut stack: Vec<(Label, usize)> = Vec::new();
    let mut spans = Vec::new();
    let mut pos = 0;
    for (i, sym) in symbols.iter().enumerate() {
        match *sym {
            Symbol::Open(l) => stack.push((l, pos)),
            Symbol::Close(l) => match stack.pop() {
                Some((open, start)) if open == l => {
                    if start == pos {
                        return Err(CodecError::EmptySpan(i));
                    }
                    spans.push(Span {
                        start,
                        end: pos,
                        label: l,
                    });
                }
                _ => return Err(CodecError::UnmatchedBracket(i)),
            },
            Symbol::Placeholder => pos += 1,
            Symbol::EndOfSequence => {
                if i + 1 != symbols.len() {
                    return Err(CodecError::MisplacedEnd(i));
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(CodecError::UnmatchedBracket(symbols.len()));
    }
    NestedLabeling::new(spans)
}

/// Drops unmatched brackets so the result parses.
///
/// A close with no same-label open on the stack is dropped; a close matching
/// a deeper open drops the opens above it; bracket pairs enclosing no
/// placeholder are dropped; opens still pending at the end are dropped.
/// Placeholders are never removed. Any `</s>` is moved to the end.
pub fn repair(symbols: &[Symbol]) -> Vec<Symbol> {
    let (kept, saw_end) = repair_positions(symbols);
    let mut repaired: Vec<Symbol> = kept.into_iter().map(|i| symbols[i]).collect();
    if saw_end {
        repaired.push(Symbol::EndOfSequence);
    }
    repaired
}

/// Indices of the symbols [`repair`] keeps, end markers excluded, and
/// whether an end marker was present.
pub fn repair_positions(symbols: &[Symbol]) -> (Vec<usize>, bool) {
    let mut out: Vec<Option<usize>> = Vec::with_capacity(symbols.len());
    // (label, index in `out`, placeholders seen when opened)
    let mut stack: Vec<(Label, usize, usize)> = Vec::new();
    let mut placeholders = 0;
    let mut saw_end = false;
    for (i, sym) in symbols.iter().enumerate() {
        match *sym {
            Symbol::Open(l) => {
                stack.push((l, out.len(), placeholders));
                out.push(Some(i));
            }
            Symbol::Placeholder => {
                placeholders += 1;
                out.push(Some(i));
            }
            Symbol::Close(l) => {
                let Some(depth) = stack.iter().rposition(|(open, _, _)| *open == l) else {
                    continue;
                };
                for (_, idx, _) in stack.drain(depth + 1..) {
                    out[idx] = None;
                }
                let (_, idx, opened_at) = stack.pop().expect("matched entry");
                if opened_at == placeholders {
                    out[idx] = None;
                } else {
                    out.push(Some(i));
                }
            }
            Symbol::EndOfSequence => saw_end = true,
        }
    }
    for (_, idx, _) in stack {
        out[idx] = None;
    }
    (out.into_iter().flatten().collect(), saw_end)
}

/// Flat BIO tag: `O`, or `B`/`I` for one of the ten labels (21 tags).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlatTag {
    Outside,
    Begin(Label),
    Inside(Label),
}

impl FlatTag {
    pub const COUNT: usize = 2 * Label::COUNT + 1;

    pub fn id(self) -> usize {
        match self {
            FlatTag::Outside => 0,
            FlatTag::Begin(l) => 1 + 2 * l.index(),
            FlatTag::Inside(l) => 2 + 2 * l.index(),
        }
    }

    pub fn from_id(id: usize) -> Self {
        assert!(id < Self::COUNT, "tag id {id} outside tag set");
        match id {
            0 => FlatTag::Outside,
            i if i % 2 == 1 => FlatTag::Begin(Label::from_index((i - 1) / 2)),
            i => FlatTag::Inside(Label::from_index((i - 2) / 2)),
        }
    }

    pub fn label(self) -> Option<Label> {
        match self {
            FlatTag::Outside => None,
            FlatTag::Begin(l) | FlatTag::Inside(l) => Some(l),
        }
    }

    /// Whether `self` may follow `prev` (`None` = sentence start).
    pub fn may_follow(self, prev: Option<FlatTag>) -> bool {
        match self {
            FlatTag::Inside(l) => prev.and_then(FlatTag::label) == Some(l),
            _ => true,
        }
    }
}

impl fmt::Display for FlatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlatTag::Outside => f.write_str("O"),
            FlatTag::Begin(l) => write!(f, "B-{}-{}", l.entity_type, l.kind),
            FlatTag::Inside(l) => write!(f, "I-{}-{}", l.entity_type, l.kind),
        }
    }
}

/// Outermost spans of `labeling` as BIO tags over `sentence_length` tokens.
pub fn flatten_to_bio(sentence_length: usize, labeling: &NestedLabeling) -> Vec<FlatTag> {
    let mut tags = vec![FlatTag::Outside; sentence_length];
    for s in labeling.outermost() {
        tags[s.start] = FlatTag::Begin(s.label);
        for t in &mut tags[s.start + 1..s.end] {
            *t = FlatTag::Inside(s.label);
        }
    }
    tags
}

/// Spans encoded by a BIO sequence. An `I` that cannot continue the current
/// span starts a new one.
pub fn bio_to_spans(tags: &[FlatTag]) -> NestedLabeling {
    let mut spans = Vec::new();
    let mut current: Option<(Label, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match *tag {
            FlatTag::Inside(l) if current.is_some_and(|(c, _)| c == l) => {}
            FlatTag::Outside => {
                if let Some((label, start)) = current.take() {
                    spans.push(Span { start, end: i, label });
                }
            }
            FlatTag::Begin(l) | FlatTag::Inside(l) => {
                if let Some((label, start)) = current.take() {
                    spans.push(Span { start, end: i, label });
                }
                current = Some((l, i));
            }
        }
    }
    if let Some((label, start)) = current {
        spans.push(Span {
            start,
            end: tags.len(),
            label,
        });
    }
    NestedLabeling::new(spans).expect("flat spans never cross")
}
