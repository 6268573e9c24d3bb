use std::sync::Arc;

use super::beam::StepModel;
use super::encoder::{Encoder, EncoderOutput};
use super::{DetectError, Result, TaggerConfig, Vocab};
use crate::codec::FlatTag;
use crate::neural::{
    log_softmax, seeded_rng, softmax, Activation, DenseLayer, Embedding, GruLayer, ParameterStore, Tensor,
};

/// Recurrent decoder state before step `step`: `s` is the GRU state after
/// the previous step and `prev_output` the previous tag (`None` at the start).
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub s: Vec<f64>,
    pub prev_output: Option<usize>,
    pub step: usize,
}

/// Conditional RNN language model over flat tags.
///
/// `P(Y | X) = Π_i P(y_i | X, y_1..y_{i-1})`: step `i` feeds
/// `[tag_embedding(y_{i-1}) ∥ h_i]` to a GRU and reads a softmax over the
/// 21 tags from its state.
#[derive(Clone, Debug)]
pub struct CrnnLm {
    pub config: TaggerConfig,
    pub vocab: Vocab,
    pub params: ParameterStore,
    encoder: Encoder,
    tag_embed: Embedding,
    gru: GruLayer,
    out: DenseLayer,
}

/// Row of the tag embedding used before the first tag.
const START_TAG: usize = FlatTag::COUNT;

impl CrnnLm {
    pub fn new(config: TaggerConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let mut params = ParameterStore::new();
        let encoder = Encoder::new(&mut params, vocab.len(), &config, &mut rng)?;
        let tag_embed = Embedding::new(
            &mut params,
            "dec.tag_embed",
            FlatTag::COUNT + 1,
            config.embed_dim,
            &mut rng,
        )?;
        let gru = GruLayer::new(
            &mut params,
            "dec.gru",
            config.embed_dim + config.feature_maps,
            config.gru_dim,
            &mut rng,
        )?;
        let out = DenseLayer::new(
            &mut params,
            "dec.out",
            config.gru_dim,
            FlatTag::COUNT,
            Activation::Identity,
            &mut rng,
        )?;
        Ok(CrnnLm {
            config,
            vocab,
            params,
            encoder,
            tag_embed,
            gru,
            out,
        })
    }

    pub fn encode(&self, tokens: &[String]) -> Result<EncoderOutput> {
        let ids = self.vocab.ids(tokens);
        Ok(self.encoder.forward(self.params.values(), &ids)?.0)
    }

    pub fn initial_state(&self) -> DecoderState {
        DecoderState {
            s: vec![0.0; self.config.gru_dim],
            prev_output: None,
            step: 0,
        }
    }

    /// Distribution over the 21 tags at `state.step` given
    /// `state.prev_output`, and the advanced state. The caller records the
    /// chosen tag in the returned state's `prev_output`.
    pub fn crnnlm_step(&self, state: &DecoderState, h: &EncoderOutput) -> Result<(Vec<f64>, DecoderState)> {
        if state.step >= h.len() {
            return Err(DetectError::StepOutOfRange {
                step: state.step,
                len: h.len(),
            });
        }
        let p = self.params.values();
        let x = gru_input(&self.tag_embed, p, state.prev_output, h.h.row(state.step));
        let s = self.gru.step(p, &state.s, &x);
        let logits = self.out.forward(p, &s);
        Ok((
            softmax(&logits),
            DecoderState {
                s,
                prev_output: None,
                step: state.step + 1,
            },
        ))
    }

    /// Sum over positions of `−log P(tag_i | …)` under teacher forcing.
    pub fn loss(&self, token_ids: &[usize], tags: &[usize]) -> Result<f64> {
        self.loss_with(&self.params, token_ids, tags)
    }

    pub fn loss_with(&self, params: &ParameterStore, token_ids: &[usize], tags: &[usize]) -> Result<f64> {
        let p = params.values();
        let (enc, _) = self.encoder.forward(p, token_ids)?;
        let mut s = vec![0.0; self.config.gru_dim];
        let mut loss = 0.0;
        for (i, &y) in tags.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| tags[j]);
            let x = gru_input(&self.tag_embed, p, prev, enc.h.row(i));
            s = self.gru.step(p, &s, &x);
            loss -= log_softmax(&self.out.forward(p, &s))[y];
        }
        Ok(loss)
    }

    /// Loss of one sentence; gradients are accumulated into `self.params`.
    pub fn loss_and_grad(&mut self, token_ids: &[usize], tags: &[usize]) -> Result<f64> {
        let (p, g) = self.params.split_mut();
        let (enc, enc_cache) = self.encoder.forward(p, token_ids)?;
        let n = tags.len();
        let mut s = vec![0.0; self.config.gru_dim];
        let mut caches = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        let mut logits = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        let mut loss = 0.0;
        for (i, &y) in tags.iter().enumerate() {
            let prev = i.checked_sub(1).map(|j| tags[j]);
            let x = gru_input(&self.tag_embed, p, prev, enc.h.row(i));
            let (s_next, cache) = self.gru.forward(p, &s, &x);
            let z = self.out.forward(p, &s_next);
            let prob = softmax(&z);
            loss -= log_softmax(&z)[y];
            logits.push(z);
            caches.push(cache);
            states.push(s_next.clone());
            probs.push(prob);
            s = s_next;
        }
        let e = self.config.embed_dim;
        let mut dh = Tensor::zeros(&[n, self.config.feature_maps]);
        let mut ds_next = vec![0.0; self.config.gru_dim];
        for i in (0..n).rev() {
            let mut dlogits = probs[i].clone();
            dlogits[tags[i]] -= 1.0;
            let mut ds = self.out.backward(p, g, &states[i], &logits[i], &dlogits);
            for (a, b) in ds.iter_mut().zip(&ds_next) {
                *a += b;
            }
            let (ds_prev, dx) = self.gru.backward(p, g, &caches[i], &ds);
            let prev = i.checked_sub(1).map(|j| tags[j]).unwrap_or(START_TAG);
            self.tag_embed.backward(g, prev, &dx[..e]);
            dh.row_mut(i).copy_from_slice(&dx[e..]);
            ds_next = ds_prev;
        }
        self.encoder.backward(p, g, &enc_cache, dh);
        Ok(loss)
    }
}

fn gru_input(tag_embed: &Embedding, p: &[Tensor], prev: Option<usize>, h_i: &[f64]) -> Vec<f64> {
    let mut x = tag_embed.lookup(p, prev.unwrap_or(START_TAG)).to_vec();
    x.extend_from_slice(h_i);
    x
}

/// Decoding state shared by beam hypotheses.
#[derive(Clone, Debug)]
pub struct CrnnBeamState {
    enc: Arc<EncoderOutput>,
    state: DecoderState,
}

impl StepModel for CrnnLm {
    type State = CrnnBeamState;

    fn classes(&self) -> usize {
        FlatTag::COUNT
    }

    fn start(&self, tokens: &[String]) -> Result<Self::State> {
        Ok(CrnnBeamState {
            enc: Arc::new(self.encode(tokens)?),
            state: self.initial_state(),
        })
    }

    fn next(&self, st: &Self::State, prev: Option<usize>) -> (Vec<f64>, Self::State) {
        let p = self.params.values();
        let x = gru_input(&self.tag_embed, p, prev, st.enc.h.row(st.state.step));
        let s = self.gru.step(p, &st.state.s, &x);
        let lp = log_softmax(&self.out.forward(p, &s));
        (
            lp,
            CrnnBeamState {
                enc: Arc::clone(&st.enc),
                state: DecoderState {
                    s,
                    prev_output: None,
                    step: st.state.step + 1,
                },
            },
        )
    }

    fn signature(&self) -> String {
        format!("crnnlm:{}:{}", self.config.shape_hash(), self.vocab.len())
    }
}
