use rayon::prelude::*;

use super::merge::merge_systems;
use super::train::{ensemble_decode, TrainedModel};
use super::{DetectError, ModelKind, Result};
use crate::corpus::{Document, Mention};

/// Members of one tagger ensemble, all of the same kind and shape.
#[derive(Clone, Debug)]
pub struct DetectorEnsemble {
    members: Vec<TrainedModel>,
}

impl DetectorEnsemble {
    pub fn new(members: Vec<TrainedModel>) -> Result<Self> {
        let first = members.first().ok_or(DetectError::AlphabetMismatch)?;
        let (kind, shape, vocab) = (first.kind(), first.config().shape_hash(), first.vocab());
        if members
            .iter()
            .any(|m| m.kind() != kind || m.config().shape_hash() != shape || m.vocab() != vocab)
        {
            return Err(DetectError::AlphabetMismatch);
        }
        Ok(DetectorEnsemble { members })
    }

    pub fn kind(&self) -> ModelKind {
        self.members[0].kind()
    }

    pub fn members(&self) -> &[TrainedModel] {
        &self.members
    }

    pub fn decode(
        &self,
        tokens: &[String],
        beam_width: usize,
        allow_nominal: bool,
    ) -> Result<Vec<(crate::codec::Span, f64)>> {
        let refs: Vec<&TrainedModel> = self.members.iter().collect();
        ensemble_decode(&refs, tokens, beam_width, allow_nominal)
    }
}

/// The detectors run over every sentence. When both are present their
/// outputs are fused with [`merge_systems`], the flat tagger as first system.
#[derive(Clone, Debug)]
pub struct MentionModels {
    pub crnnlm: Option<DetectorEnsemble>,
    pub seq2seq: Option<DetectorEnsemble>,
    pub beam_width: usize,
}

fn run(ensemble: &DetectorEnsemble, doc: &Document, beam_width: usize, allow_nominal: bool) -> Result<Vec<Mention>> {
    let sentences = doc.sentences();
    let per_sentence: Vec<Vec<Mention>> = sentences
        .par_iter()
        .map(|tokens| {
            let words: Vec<String> = tokens.iter().map(|t| t.surface.clone()).collect();
            let spans = ensemble.decode(&words, beam_width, allow_nominal)?;
            Ok(spans
                .into_iter()
                .map(|(span, confidence)| {
                    let char_start = tokens[span.start].char_start;
                    let char_end = tokens[span.end - 1].char_end;
                    Mention {
                        doc_id: doc.doc_id.clone(),
                        char_start,
                        char_end,
                        surface: doc.slice(char_start, char_end),
                        entity_type: span.label.entity_type,
                        kind: span.label.kind,
                        confidence,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_sentence.into_iter().flatten().collect())
}

/// Mentions of `doc` in character offsets. Nominal labels are masked out of
/// decoding unless `allow_nominal`.
pub fn detect_document(models: &MentionModels, doc: &Document, allow_nominal: bool) -> Result<Vec<Mention>> {
    let a = match &models.crnnlm {
        Some(e) => run(e, doc, models.beam_width, allow_nominal)?,
        None => Vec::new(),
    };
    let b = match &models.seq2seq {
        Some(e) => run(e, doc, models.beam_width, allow_nominal)?,
        None => Vec::new(),
    };
    Ok(merge_systems(&a, &b))
}
