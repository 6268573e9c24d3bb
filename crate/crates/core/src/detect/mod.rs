//! Mention detection: a convolutional encoder shared by two decoders.
//!
//! * [`CrnnLm`] tags every token with one of 21 flat BIO tags, each step
//!   conditioned on the whole sentence (through the encoder output at that
//!   position) and on all previous tags (through a GRU over tag embeddings).
//! * [`Seq2Seq`] emits the bracketed placeholder sequence of
//!   [`crate::codec`] with a GRU decoder attending over the encoder output,
//!   so nested mentions are recovered.
//!
//! Both are decoded with beam search and can be combined into ensembles.

mod beam;
mod crnnlm;
mod encoder;
mod merge;
mod seq2seq;
mod system;
mod train;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{CodecError, NestedLabeling, Span};
use crate::corpus::{Document, GoldLink, Token};
use crate::neural::NeuralError;

pub use beam::{beam_decode_flat, beam_decode_seq2seq, Decoded, Ensemble, StepModel};
pub use crnnlm::{CrnnLm, DecoderState};
pub use encoder::{Encoder, EncoderOutput};
pub use merge::merge_systems;
pub use seq2seq::{AttentionContext, Seq2Seq};
pub use system::{detect_document, DetectorEnsemble, MentionModels};
pub use train::{ensemble_decode, train, TrainReport, TrainedModel};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("step {step} outside a sentence of {len} tokens")]
    StepOutOfRange { step: usize, len: usize },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("ensemble members disagree on alphabet or configuration")]
    AlphabetMismatch,
    #[error("invalid tagger configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

pub type Result<T> = std::result::Result<T, DetectError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Crnnlm,
    Seq2Seq,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Crnnlm => "crnnlm",
            ModelKind::Seq2Seq => "seq2seq",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "crnnlm" => Ok(ModelKind::Crnnlm),
            "seq2seq" => Ok(ModelKind::Seq2Seq),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaggerConfig {
    pub conv_layers: usize,
    pub filter_size: usize,
    pub feature_maps: usize,
    pub embed_dim: usize,
    pub gru_dim: usize,
    /// Hidden width of the attention scorer.
    pub attn_dim: usize,
    /// Hidden width of the seq2seq output perceptron.
    pub mlp_dim: usize,
    pub beam_width: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TaggerConfig {
    /// Desk-scale configuration.
    fn default() -> Self {
        TaggerConfig {
            conv_layers: 2,
            filter_size: 3,
            feature_maps: 32,
            embed_dim: 32,
            gru_dim: 64,
            attn_dim: 32,
            mlp_dim: 64,
            beam_width: 10,
            max_epochs: 200,
            patience: 10,
            batch_size: 1,
            seed: 1,
        }
    }
}

impl TaggerConfig {
    /// Five 512-map convolutional layers with filter width 3.
    pub fn full_scale() -> Self {
        TaggerConfig {
            conv_layers: 5,
            filter_size: 3,
            feature_maps: 512,
            embed_dim: 128,
            gru_dim: 512,
            attn_dim: 256,
            mlp_dim: 512,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DetectError::InvalidConfig(m.to_string()));
        if self.filter_size.is_multiple_of(2) {
            return bad("filter_size must be odd");
        }
        if self.beam_width == 0 {
            return bad("beam_width must be at least 1");
        }
        if self.conv_layers == 0 {
            return bad("conv_layers must be at least 1");
        }
        if [
            self.feature_maps,
            self.embed_dim,
            self.gru_dim,
            self.attn_dim,
            self.mlp_dim,
        ]
        .contains(&0)
        {
            return bad("layer widths must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("conv_layers", self.conv_layers.to_string()),
            ("filter_size", self.filter_size.to_string()),
            ("feature_maps", self.feature_maps.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("gru_dim", self.gru_dim.to_string()),
            ("attn_dim", self.attn_dim.to_string()),
            ("mlp_dim", self.mlp_dim.to_string()),
            ("beam_width", self.beam_width.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| DetectError::InvalidConfig(format!("{key}: `{v}` is not a count")))
        };
        match key {
            "conv_layers" => self.conv_layers = parse(value)?,
            "filter_size" => self.filter_size = parse(value)?,
            "feature_maps" => self.feature_maps = parse(value)?,
            "embed_dim" => self.embed_dim = parse(value)?,
            "gru_dim" => self.gru_dim = parse(value)?,
            "attn_dim" => self.attn_dim = parse(value)?,
            "mlp_dim" => self.mlp_dim = parse(value)?,
            "beam_width" => self.beam_width = parse(value)?,
            "max_epochs" => self.max_epochs = parse(value)?,
            "patience" => self.patience = parse(value)?,
            "batch_size" => self.batch_size = parse(value)?,
            "seed" => self.seed = parse(value)? as u64,
            other => return Err(DetectError::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Hex SHA-256 over the shape-relevant fields.
    pub fn shape_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.to_pairs() {
            if matches!(k, "beam_width" | "max_epochs" | "patience" | "batch_size" | "seed") {
                continue;
            }
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Token vocabulary with a reserved unknown-word id 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const UNK: usize = 0;
    const UNK_WORD: &'static str = "<unk>";

    pub fn normalize(word: &str) -> String {
        word.to_lowercase()
    }

    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut all: Vec<String> = words.into_iter().map(Self::normalize).collect();
        all.sort();
        all.dedup();
        Self::from_words(all)
    }

    fn from_words(words: Vec<String>) -> Self {
        let mut v = Vocab {
            words: vec![Self::UNK_WORD.to_string()],
            index: HashMap::new(),
        };
        for w in words {
            if w != Self::UNK_WORD && !v.index.contains_key(&w) {
                v.index.insert(w.clone(), v.words.len());
                v.words.push(w);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(&Self::normalize(word)).copied().unwrap_or(Self::UNK)
    }

    pub fn ids<S: AsRef<str>>(&self, words: &[S]) -> Vec<usize> {
        words.iter().map(|w| self.id(w.as_ref())).collect()
    }

    /// One word per line, without the reserved entry.
    pub fn to_text(&self) -> String {
        self.words[1..].iter().map(|w| format!("{w}\n")).collect()
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_words(text.lines().filter(|l| !l.is_empty()).map(String::from).collect())
    }
}

/// One tokenized sentence with its nested mention spans.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub labeling: NestedLabeling,
}

/// Turns documents plus gold mentions into labeled sentences. Mentions that
/// do not align to token boundaries inside one sentence, or that would cross
/// an already accepted mention, are skipped.
pub fn labeled_sentences(docs: &[Document], gold: &[GoldLink]) -> Vec<LabeledSentence> {
    let mut out = Vec::new();
    for doc in docs {
        let mentions: Vec<_> = gold
            .iter()
            .filter(|g| g.mention.doc_id == doc.doc_id)
            .map(|g| &g.mention)
            .collect();
        for tokens in doc.sentences() {
            let mut spans: Vec<Span> = Vec::new();
            for m in &mentions {
                let Some((s, e)) = token_span(&tokens, m.char_start, m.char_end) else {
                    continue;
                };
                let span = Span::new(s, e, m.entity_type, m.kind);
                if NestedLabeling::new(spans.iter().copied().chain([span])).is_ok() {
                    spans.push(span);
                }
            }
            out.push(LabeledSentence {
                tokens: tokens.iter().map(|t| t.surface.clone()).collect(),
                labeling: NestedLabeling::new(spans).expect("checked incrementally"),
            });
        }
    }
    out
}

/// Token index range covering exactly `[char_start, char_end)`.
pub fn token_span(tokens: &[Token], char_start: usize, char_end: usize) -> Option<(usize, usize)> {
    let s = tokens.iter().position(|t| t.char_start == char_start)?;
    let e = tokens.iter().position(|t| t.char_end == char_end)?;
    (s <= e).then_some((s, e + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_reserves_unknown() {
        let v = Vocab::build(["Bush", "bush", "George"]);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("BUSH"), v.id("bush"));
        assert_eq!(v.id("Obama"), Vocab::UNK);
        assert_eq!(Vocab::from_text(&v.to_text()), v);
    }

    #[test]
    fn config_validation() {
        assert!(TaggerConfig::default().validate().is_ok());
        let mut c = TaggerConfig::default();
        c.set("filter_size", "4").unwrap();
        assert!(c.validate().is_err());
        let mut c = TaggerConfig {
            beam_width: 0,
            ..TaggerConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(c.set("nope", "1").is_err());
        assert_eq!(TaggerConfig::full_scale().feature_maps, 512);
        assert_eq!(TaggerConfig::full_scale().conv_layers, 5);
    }
}
