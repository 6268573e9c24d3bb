use rand::seq::SliceRandom;

use super::beam::{beam_decode_flat, beam_decode_seq2seq, Decoded, Ensemble};
use super::crnnlm::CrnnLm;
use super::seq2seq::Seq2Seq;
use super::{DetectError, LabeledSentence, ModelKind, Result, TaggerConfig, Vocab};
use crate::codec::{bio_to_spans, flatten_to_bio, linearize, repair_positions, FlatTag, Label, Span, Symbol};
use crate::neural::{seeded_rng, AdaDeltaState, ParameterStore};

/// A trained tagger of either kind.
#[derive(Clone, Debug)]
pub enum TrainedModel {
    Crnnlm(CrnnLm),
    Seq2Seq(Seq2Seq),
}

impl TrainedModel {
    pub fn new(kind: ModelKind, config: TaggerConfig, vocab: Vocab) -> Result<Self> {
        Ok(match kind {
            ModelKind::Crnnlm => TrainedModel::Crnnlm(CrnnLm::new(config, vocab)?),
            ModelKind::Seq2Seq => TrainedModel::Seq2Seq(Seq2Seq::new(config, vocab)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Crnnlm(_) => ModelKind::Crnnlm,
            TrainedModel::Seq2Seq(_) => ModelKind::Seq2Seq,
        }
    }

    pub fn config(&self) -> &TaggerConfig {
        match self {
            TrainedModel::Crnnlm(m) => &m.config,
            TrainedModel::Seq2Seq(m) => &m.config,
        }
    }

    pub fn vocab(&self) -> &Vocab {
        match self {
            TrainedModel::Crnnlm(m) => &m.vocab,
            TrainedModel::Seq2Seq(m) => &m.vocab,
        }
    }

    pub fn params(&self) -> &ParameterStore {
        match self {
            TrainedModel::Crnnlm(m) => &m.params,
            TrainedModel::Seq2Seq(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        match self {
            TrainedModel::Crnnlm(m) => &mut m.params,
            TrainedModel::Seq2Seq(m) => &mut m.params,
        }
    }

    /// Output ids the model is trained to emit for `sentence`.
    pub fn targets(&self, sentence: &LabeledSentence) -> Result<Vec<usize>> {
        let n = sentence.tokens.len();
        Ok(match self {
            TrainedModel::Crnnlm(_) => flatten_to_bio(n, &sentence.labeling)
                .into_iter()
                .map(FlatTag::id)
                .collect(),
            TrainedModel::Seq2Seq(_) => linearize(n, &sentence.labeling)?.into_iter().map(Symbol::id).collect(),
        })
    }

    pub fn loss(&self, token_ids: &[usize], targets: &[usize]) -> Result<f64> {
        match self {
            TrainedModel::Crnnlm(m) => m.loss(token_ids, targets),
            TrainedModel::Seq2Seq(m) => m.loss(token_ids, targets),
        }
    }

    /// Loss evaluated with `params` in place of the model's own values.
    pub fn loss_with(&self, params: &ParameterStore, token_ids: &[usize], targets: &[usize]) -> Result<f64> {
        match self {
            TrainedModel::Crnnlm(m) => m.loss_with(params, token_ids, targets),
            TrainedModel::Seq2Seq(m) => m.loss_with(params, token_ids, targets),
        }
    }

    pub fn loss_and_grad(&mut self, token_ids: &[usize], targets: &[usize]) -> Result<f64> {
        match self {
            TrainedModel::Crnnlm(m) => m.loss_and_grad(token_ids, targets),
            TrainedModel::Seq2Seq(m) => m.loss_and_grad(token_ids, targets),
        }
    }

    /// Summed loss over a labeled set.
    pub fn dataset_loss(&self, set: &[LabeledSentence]) -> Result<f64> {
        set.iter()
            .map(|s| self.loss(&self.vocab().ids(&s.tokens), &self.targets(s)?))
            .sum()
    }

    /// Beam-decodes one sentence; see [`ensemble_decode`].
    pub fn decode(&self, tokens: &[String], allow_nominal: bool) -> Result<Vec<(Span, f64)>> {
        ensemble_decode(&[self], tokens, self.config().beam_width, allow_nominal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub train_losses: Vec<f64>,
    pub dev_losses: Vec<f64>,
    /// Zero-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_dev_loss: f64,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.train_losses.len()
    }
}

/// Trains with AdaDelta on mean mini-batch cross-entropy. After every epoch
/// the dev loss is measured (the training loss stands in when `dev_set` is
/// empty); training stops once it has not improved for `patience` epochs or
/// after `max_epochs`, and the best-dev parameters are returned.
pub fn train(
    kind: ModelKind,
    train_set: &[LabeledSentence],
    dev_set: &[LabeledSentence],
    config: &TaggerConfig,
    vocab: &Vocab,
) -> Result<(TrainedModel, TrainReport)> {
    if train_set.iter().all(|s| s.tokens.is_empty()) {
        return Err(DetectError::EmptyTrainingSet);
    }
    let mut model = TrainedModel::new(kind, config.clone(), vocab.clone())?;
    let examples: Vec<(Vec<usize>, Vec<usize>)> = train_set
        .iter()
        .filter(|s| !s.tokens.is_empty())
        .map(|s| Ok((vocab.ids(&s.tokens), model.targets(s)?)))
        .collect::<Result<_>>()?;
    let dev: Vec<LabeledSentence> = dev_set.iter().filter(|s| !s.tokens.is_empty()).cloned().collect();

    let mut rng = seeded_rng(config.seed.wrapping_add(1));
    let mut state = AdaDeltaState::new(model.params());
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut best = model.params().clone();
    let mut report = TrainReport {
        train_losses: Vec::new(),
        dev_losses: Vec::new(),
        best_epoch: 0,
        best_dev_loss: f64::INFINITY,
    };
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            model.params_mut().zero_grads();
            for &i in batch {
                let (ids, targets) = &examples[i];
                epoch_loss += model.loss_and_grad(ids, targets)?;
            }
            let params = model.params_mut();
            params.scale_grads(1.0 / batch.len() as f64);
            state.step(params)?;
        }
        if !epoch_loss.is_finite() {
            return Err(crate::neural::NeuralError::NonFiniteLoss.into());
        }
        let dev_loss = if dev.is_empty() {
            epoch_loss
        } else {
            model.dataset_loss(&dev)?
        };
        report.train_losses.push(epoch_loss);
        report.dev_losses.push(dev_loss);
        if dev_loss < report.best_dev_loss {
            report.best_dev_loss = dev_loss;
            report.best_epoch = epoch;
            best = model.params().clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    model.params_mut().copy_values_from(&best)?;
    Ok((model, report))
}

/// Decodes `tokens` with the members' averaged per-step log-probabilities.
/// Members must be of one kind and share configuration shape and vocabulary.
/// Each span comes with `exp` of the mean log-probability of the steps that
/// produced it.
pub fn ensemble_decode(
    models: &[&TrainedModel],
    tokens: &[String],
    beam_width: usize,
    allow_nominal: bool,
) -> Result<Vec<(Span, f64)>> {
    let first = models.first().ok_or(DetectError::AlphabetMismatch)?;
    if tokens.is_empty() {
        return Err(DetectError::EmptySentence);
    }
    match first.kind() {
        ModelKind::Crnnlm => {
            let members = models
                .iter()
                .map(|m| match m {
                    TrainedModel::Crnnlm(c) => Ok(c),
                    _ => Err(DetectError::AlphabetMismatch),
                })
                .collect::<Result<Vec<_>>>()?;
            let decoded = beam_decode_flat(&Ensemble::new(members)?, tokens, beam_width, allow_nominal)?;
            Ok(flat_spans(&decoded))
        }
        ModelKind::Seq2Seq => {
            let members = models
                .iter()
                .map(|m| match m {
                    TrainedModel::Seq2Seq(s) => Ok(s),
                    _ => Err(DetectError::AlphabetMismatch),
                })
                .collect::<Result<Vec<_>>>()?;
            let decoded = beam_decode_seq2seq(&Ensemble::new(members)?, tokens, beam_width, allow_nominal)?;
            Ok(bracket_spans(&decoded))
        }
    }
}

fn mean_confidence(log_probs: &[f64]) -> f64 {
    if log_probs.is_empty() {
        return 0.0;
    }
    (log_probs.iter().sum::<f64>() / log_probs.len() as f64).exp()
}

fn flat_spans(decoded: &Decoded) -> Vec<(Span, f64)> {
    let tags: Vec<FlatTag> = decoded.outputs.iter().map(|&t| FlatTag::from_id(t)).collect();
    bio_to_spans(&tags)
        .spans()
        .map(|s| (*s, mean_confidence(&decoded.step_log_probs[s.start..s.end])))
        .collect()
}

/// Spans of the repaired bracket sequence; confidence covers the steps from
/// the opening to the closing bracket.
fn bracket_spans(decoded: &Decoded) -> Vec<(Span, f64)> {
    let symbols: Vec<Symbol> = decoded.outputs.iter().map(|&s| Symbol::from_id(s)).collect();
    let (kept, _) = repair_positions(&symbols);
    let mut stack: Vec<(Label, usize, usize)> = Vec::new();
    let mut pos = 0;
    let mut out = Vec::new();
    for i in kept {
        match symbols[i] {
            Symbol::Open(l) => stack.push((l, pos, i)),
            Symbol::Close(_) => {
                let (label, start, opened) = stack.pop().expect("repaired sequence is balanced");
                out.push((
                    Span { start, end: pos, label },
                    mean_confidence(&decoded.step_log_probs[opened..=i]),
                ));
            }
            Symbol::Placeholder => pos += 1,
            Symbol::EndOfSequence => {}
        }
    }
    out.sort_by_key(|a| a.0);
    out
}
