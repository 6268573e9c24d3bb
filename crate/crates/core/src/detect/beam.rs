use std::cmp::Ordering;

use super::{DetectError, Result};
use crate::codec::{FlatTag, Label, Symbol};
use crate::corpus::MentionKind;
use crate::neural::log_softmax;

/// A left-to-right scorer over a fixed output alphabet.
pub trait StepModel {
    type State: Clone;

    fn classes(&self) -> usize;

    /// Encodes the sentence and returns the decoder's initial state.
    fn start(&self, tokens: &[String]) -> Result<Self::State>;

    /// Log-probabilities of the next output after `prev` (`None` at the
    /// first step), and the state to extend.
    fn next(&self, state: &Self::State, prev: Option<usize>) -> (Vec<f64>, Self::State);

    /// Parameter-layout fingerprint; ensemble members must agree.
    fn signature(&self) -> String;
}

impl<M: StepModel> StepModel for &M {
    type State = M::State;

    fn classes(&self) -> usize {
        (**self).classes()
    }

    fn start(&self, tokens: &[String]) -> Result<Self::State> {
        (**self).start(tokens)
    }

    fn next(&self, state: &Self::State, prev: Option<usize>) -> (Vec<f64>, Self::State) {
        (**self).next(state, prev)
    }

    fn signature(&self) -> String {
        (**self).signature()
    }
}

/// Members whose per-step log-probabilities are averaged and renormalized.
pub struct Ensemble<'a, M> {
    members: Vec<&'a M>,
}

impl<'a, M: StepModel> Ensemble<'a, M> {
    pub fn new(members: Vec<&'a M>) -> Result<Self> {
        let first = members.first().ok_or(DetectError::AlphabetMismatch)?;
        let sig = first.signature();
        let classes = first.classes();
        if members.iter().any(|m| m.signature() != sig || m.classes() != classes) {
            return Err(DetectError::AlphabetMismatch);
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[&'a M] {
        &self.members
    }
}

impl<M: StepModel> StepModel for Ensemble<'_, M> {
    type State = Vec<M::State>;

    fn classes(&self) -> usize {
        self.members[0].classes()
    }

    fn start(&self, tokens: &[String]) -> Result<Self::State> {
        self.members.iter().map(|m| m.start(tokens)).collect()
    }

    fn next(&self, state: &Self::State, prev: Option<usize>) -> (Vec<f64>, Self::State) {
        let k = self.members.len() as f64;
        let mut mean = vec![0.0; self.classes()];
        let mut next_states = Vec::with_capacity(state.len());
        for (m, s) in self.members.iter().zip(state) {
            let (lp, ns) = m.next(s, prev);
            for (a, b) in mean.iter_mut().zip(&lp) {
                *a += b;
            }
            next_states.push(ns);
        }
        mean.iter_mut().for_each(|v| *v /= k);
        (log_softmax(&mean), next_states)
    }

    fn signature(&self) -> String {
        self.members[0].signature()
    }
}

/// Best path found by beam search.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub outputs: Vec<usize>,
    pub step_log_probs: Vec<f64>,
    pub score: f64,
}

#[derive(Clone)]
struct Hyp<S> {
    outputs: Vec<usize>,
    step_log_probs: Vec<f64>,
    score: f64,
    state: S,
    finished: bool,
    placeholders: usize,
}

fn order<S>(a: &Hyp<S>, b: &Hyp<S>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.outputs.cmp(&b.outputs))
}

fn nominal_allowed(label: Option<Label>, allow_nominal: bool) -> bool {
    allow_nominal || label.is_none_or(|l| l.kind != MentionKind::Nom)
}

/// Beam search over flat tags. `I-x` after anything but `B-x`/`I-x` is
/// masked, as are nominal tags when `allow_nominal` is false.
pub fn beam_decode_flat<M: StepModel>(
    model: &M,
    tokens: &[String],
    beam_width: usize,
    allow_nominal: bool,
) -> Result<Decoded> {
    let beam_width = beam_width.max(1);
    let mut beam = vec![Hyp {
        outputs: Vec::new(),
        step_log_probs: Vec::new(),
        score: 0.0,
        state: model.start(tokens)?,
        finished: false,
        placeholders: 0,
    }];
    for _ in 0..tokens.len() {
        let mut candidates = Vec::with_capacity(beam.len() * FlatTag::COUNT);
        for hyp in &beam {
            let prev = hyp.outputs.last().copied();
            let (lp, next_state) = model.next(&hyp.state, prev);
            let prev_tag = prev.map(FlatTag::from_id);
            for (tag_id, &l) in lp.iter().enumerate() {
                let tag = FlatTag::from_id(tag_id);
                if !tag.may_follow(prev_tag) || !nominal_allowed(tag.label(), allow_nominal) {
                    continue;
                }
                let mut outputs = hyp.outputs.clone();
                outputs.push(tag_id);
                let mut steps = hyp.step_log_probs.clone();
                steps.push(l);
                candidates.push(Hyp {
                    outputs,
                    step_log_probs: steps,
                    score: hyp.score + l,
                    state: next_state.clone(),
                    finished: false,
                    placeholders: 0,
                });
            }
        }
        candidates.sort_by(order);
        candidates.truncate(beam_width);
        beam = candidates;
    }
    let best = beam.into_iter().next().expect("outside tag is never masked");
    Ok(Decoded {
        outputs: best.outputs,
        step_log_probs: best.step_log_probs,
        score: best.score,
    })
}

/// Longest symbol sequence the seq2seq decoder may emit for `n` tokens.
pub fn seq2seq_step_cap(n: usize) -> usize {
    3 * n + 1
}

/// Constrained beam search over bracket symbols: exactly `tokens.len()`
/// placeholders, end-of-sequence only once all are emitted, and brackets only
/// while the remaining step budget still fits the outstanding placeholders.
pub fn beam_decode_seq2seq<M: StepModel>(
    model: &M,
    tokens: &[String],
    beam_width: usize,
    allow_nominal: bool,
) -> Result<Decoded> {
    let n = tokens.len();
    let cap = seq2seq_step_cap(n);
    let beam_width = beam_width.max(1);
    let mut beam = vec![Hyp {
        outputs: Vec::new(),
        step_log_probs: Vec::new(),
        score: 0.0,
        state: model.start(tokens)?,
        finished: false,
        placeholders: 0,
    }];
    for t in 0..cap {
        if beam.iter().all(|h| h.finished) {
            break;
        }
        let remaining_after = cap - t - 1;
        let mut candidates = Vec::with_capacity(beam.len() * Symbol::ALPHABET);
        for hyp in &beam {
            if hyp.finished {
                candidates.push(hyp.clone());
                continue;
            }
            let (lp, next_state) = model.next(&hyp.state, hyp.outputs.last().copied());
            let c = hyp.placeholders;
            for (sym_id, &l) in lp.iter().enumerate() {
                let allowed = match Symbol::from_id(sym_id) {
                    Symbol::Placeholder => c < n,
                    Symbol::EndOfSequence => c == n,
                    Symbol::Open(label) | Symbol::Close(label) => {
                        remaining_after > n - c && nominal_allowed(Some(label), allow_nominal)
                    }
                };
                if !allowed {
                    continue;
                }
                let mut outputs = hyp.outputs.clone();
                outputs.push(sym_id);
                let mut steps = hyp.step_log_probs.clone();
                steps.push(l);
                candidates.push(Hyp {
                    outputs,
                    step_log_probs: steps,
                    score: hyp.score + l,
                    state: next_state.clone(),
                    finished: sym_id == Symbol::END_ID,
                    placeholders: c + usize::from(sym_id == Symbol::PLACEHOLDER_ID),
                });
            }
        }
        candidates.sort_by(order);
        candidates.truncate(beam_width);
        beam = candidates;
    }
    let best = beam
        .into_iter()
        .find(|h| h.finished)
        .expect("step budget always leaves room to finish");
    Ok(Decoded {
        outputs: best.outputs,
        step_log_probs: best.step_log_probs,
        score: best.score,
    })
}
