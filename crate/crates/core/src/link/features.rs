use crate::corpus::{Category, Document, EntityType, Language, Mention};
use crate::kb::{hot_bin, terms, KbIndex};

use super::{Candidate, LinkError, Result};

pub const WORD_DIM: usize = 100;
pub const PROJECTION_DIM: usize = 10;
/// Two summed word vectors and six projected one-hot features.
pub const FEATURE_DIM: usize = 2 * WORD_DIM + 6 * PROJECTION_DIM;

/// Bins of the quantized features.
pub const BINS: usize = 10;

/// Discrete inputs of the ranker for one mention-candidate pair. The ranker
/// turns them into the dense feature vector through its learned embeddings
/// and projections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureInput {
    pub mention_words: Vec<String>,
    /// `None` for the NIL candidate, which has a learned name vector.
    pub name_words: Option<Vec<String>>,
    pub entity_type: usize,
    pub category: usize,
    pub hot: usize,
    pub edit: usize,
    pub cosine: usize,
    pub translation: usize,
}

impl FeatureInput {
    /// Rows used in each projection table: type, category, then the four
    /// ten-bin features.
    pub fn projection_rows(&self) -> [usize; 6] {
        [
            self.entity_type,
            self.category,
            self.hot,
            self.edit,
            self.cosine,
            self.translation,
        ]
    }
}

/// Levenshtein distance over search terms (characters for Chinese).
pub fn word_edit_distance(a: &str, b: &str) -> usize {
    strsim::generic_levenshtein(&terms(a), &terms(b))
}

pub fn edit_bin(distance: usize) -> usize {
    distance.min(BINS - 1)
}

pub fn cosine_bin(similarity: f64) -> usize {
    ((10.0 * similarity).floor().max(0.0) as usize).min(BINS - 1)
}

/// English rendering of a mention: the surface itself for English text,
/// otherwise the lexicon translation of the surface or its other script.
fn translate(index: &KbIndex, surface: &str, language: Language) -> Option<String> {
    if language == Language::Eng {
        return Some(surface.to_string());
    }
    let aux = index.aux();
    aux.translate(surface)
        .or_else(|| aux.zh_variant(surface).and_then(|v| aux.translate(&v)))
}

/// Discrete features of `candidate` for `mention`. `similarity` is the
/// description cosine of the candidate against the mention's document.
pub fn extract_features(
    mention: &Mention,
    candidate: &Candidate,
    doc: &Document,
    index: &KbIndex,
    similarity: f64,
) -> Result<FeatureInput> {
    let mention_words = terms(&mention.surface);
    let entity_type = EntityType::ALL
        .iter()
        .position(|t| *t == mention.entity_type)
        .unwrap_or(0);
    let category = Category::ALL.iter().position(|c| *c == doc.category).unwrap_or(0);
    let Candidate::Kb(id) = candidate else {
        return Ok(FeatureInput {
            mention_words,
            name_words: None,
            entity_type,
            category,
            hot: 0,
            edit: BINS - 1,
            cosine: 0,
            translation: BINS - 1,
        });
    };
    let entity = index
        .entity(id)
        .ok_or_else(|| LinkError::UnknownCandidate(id.clone()))?;
    let english = entity.english_name.as_deref().unwrap_or(&entity.canonical_name);
    let translation = match translate(index, &mention.surface, doc.language) {
        Some(t) => edit_bin(word_edit_distance(&t, english)),
        None => BINS - 1,
    };
    Ok(FeatureInput {
        mention_words,
        name_words: Some(terms(&entity.canonical_name)),
        entity_type,
        category,
        hot: hot_bin(entity.links_count),
        edit: edit_bin(word_edit_distance(&mention.surface, &entity.canonical_name)),
        cosine: cosine_bin(similarity),
        translation,
    })
}
