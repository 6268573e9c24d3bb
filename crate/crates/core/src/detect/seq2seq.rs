use std::sync::Arc;

use super::beam::StepModel;
use super::crnnlm::DecoderState;
use super::encoder::{Encoder, EncoderOutput};
use super::{Result, TaggerConfig, Vocab};
use crate::codec::Symbol;
use crate::neural::{
    add_assign, log_softmax, matvec_acc, matvec_t_acc, outer_acc, seeded_rng, softmax, Activation, DenseLayer,
    Embedding, GruCache, GruLayer, NeuralError, ParamId, ParameterStore, Tensor,
};

/// Row of the symbol embedding fed at the first step.
const BEGIN_SYMBOL: usize = Symbol::ALPHABET;

/// Attention weights over the input positions and the weighted sum of their
/// encoder rows.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionContext {
    pub c: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Attention encoder-decoder over bracket symbols.
///
/// At step `t` the scorer `e_i = v · tanh(Ws s + Wh h_i + b)` over the
/// previous decoder state gives `α = softmax(e)` and `c = Σ α_i h_i`. The GRU
/// consumes `[embedding(y_{t-1}) ∥ c]`, and a one-hidden-layer perceptron over
/// `[embedding(y_{t-1}) ∥ s_t ∥ c]` yields the distribution over 22 symbols.
#[derive(Clone, Debug)]
pub struct Seq2Seq {
    pub config: TaggerConfig,
    pub vocab: Vocab,
    pub params: ParameterStore,
    encoder: Encoder,
    sym_embed: Embedding,
    attn_s: ParamId,
    attn_h: ParamId,
    attn_b: ParamId,
    attn_v: ParamId,
    gru: GruLayer,
    hidden: DenseLayer,
    out: DenseLayer,
}

struct AttnCache {
    u: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

struct StepCache {
    prev: usize,
    s_prev: Vec<f64>,
    attn: AttnCache,
    gru: GruCache,
    g_in: Vec<f64>,
    m: Vec<f64>,
    logits: Vec<f64>,
}

impl Seq2Seq {
    pub fn new(config: TaggerConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let mut params = ParameterStore::new();
        let (e, f, g, a) = (config.embed_dim, config.feature_maps, config.gru_dim, config.attn_dim);
        let encoder = Encoder::new(&mut params, vocab.len(), &config, &mut rng)?;
        let sym_embed = Embedding::new(&mut params, "dec.sym_embed", Symbol::ALPHABET + 1, e, &mut rng)?;
        let attn_s = params.add_glorot("dec.attn.ws", &[a, g], g, a, &mut rng)?;
        let attn_h = params.add_glorot("dec.attn.wh", &[a, f], f, a, &mut rng)?;
        let attn_b = params.add_zeros("dec.attn.b", &[a])?;
        let attn_v = params.add_glorot("dec.attn.v", &[a], a, 1, &mut rng)?;
        let gru = GruLayer::new(&mut params, "dec.gru", e + f, g, &mut rng)?;
        let hidden = DenseLayer::new(
            &mut params,
            "dec.hidden",
            e + g + f,
            config.mlp_dim,
            Activation::Tanh,
            &mut rng,
        )?;
        let out = DenseLayer::new(
            &mut params,
            "dec.out",
            config.mlp_dim,
            Symbol::ALPHABET,
            Activation::Identity,
            &mut rng,
        )?;
        Ok(Seq2Seq {
            config,
            vocab,
            params,
            encoder,
            sym_embed,
            attn_s,
            attn_h,
            attn_b,
            attn_v,
            gru,
            hidden,
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

    /// `Wh h_i` for every row; reused across decoder steps.
    fn project(&self, p: &[Tensor], h: &Tensor) -> Tensor {
        let a = self.config.attn_dim;
        let mut out = Tensor::zeros(&[h.rows(), a]);
        for i in 0..h.rows() {
            matvec_acc(p[self.attn_h.0].data(), h.row_len(), h.row(i), out.row_mut(i));
        }
        out
    }

    fn attend(&self, p: &[Tensor], s_prev: &[f64], h: &Tensor, hp: &Tensor) -> (AttentionContext, AttnCache) {
        let mut base = p[self.attn_b.0].data().to_vec();
        matvec_acc(p[self.attn_s.0].data(), s_prev.len(), s_prev, &mut base);
        let v = p[self.attn_v.0].data();
        let mut u = Vec::with_capacity(h.rows());
        let mut e = Vec::with_capacity(h.rows());
        for i in 0..h.rows() {
            let ui: Vec<f64> = base.iter().zip(hp.row(i)).map(|(a, b)| (a + b).tanh()).collect();
            e.push(ui.iter().zip(v).map(|(a, b)| a * b).sum::<f64>());
            u.push(ui);
        }
        let alpha = softmax(&e);
        let mut c = vec![0.0; h.row_len()];
        for (i, &w) in alpha.iter().enumerate() {
            for (ck, hk) in c.iter_mut().zip(h.row(i)) {
                *ck += w * hk;
            }
        }
        (
            AttentionContext {
                c,
                alpha: alpha.clone(),
            },
            AttnCache { u, alpha },
        )
    }

    /// Accumulates attention gradients given `dL/dc`; adds into `ds_prev`,
    /// `dh` and the projected-input gradient `dhp`.
    #[allow(clippy::too_many_arguments)]
    fn attend_backward(
        &self,
        p: &[Tensor],
        g: &mut [Tensor],
        s_prev: &[f64],
        h: &Tensor,
        cache: &AttnCache,
        dc: &[f64],
        ds_prev: &mut [f64],
        dh: &mut Tensor,
        dhp: &mut Tensor,
    ) {
        let alpha = &cache.alpha;
        let dalpha: Vec<f64> = (0..h.rows())
            .map(|i| h.row(i).iter().zip(dc).map(|(a, b)| a * b).sum())
            .collect();
        for (i, &w) in alpha.iter().enumerate() {
            for (d, c) in dh.row_mut(i).iter_mut().zip(dc) {
                *d += w * c;
            }
        }
        let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        let v = p[self.attn_v.0].data();
        let mut da_sum = vec![0.0; self.config.attn_dim];
        for i in 0..h.rows() {
            let de = alpha[i] * (dalpha[i] - mean);
            if de == 0.0 {
                continue;
            }
            let ui = &cache.u[i];
            for (gv, uk) in g[self.attn_v.0].data_mut().iter_mut().zip(ui) {
                *gv += de * uk;
            }
            for (k, (vk, uk)) in v.iter().zip(ui).enumerate() {
                let da = de * vk * (1.0 - uk * uk);
                da_sum[k] += da;
                dhp.row_mut(i)[k] += da;
            }
        }
        outer_acc(g[self.attn_s.0].data_mut(), &da_sum, s_prev);
        add_assign(g[self.attn_b.0].data_mut(), &da_sum);
        matvec_t_acc(p[self.attn_s.0].data(), s_prev.len(), &da_sum, ds_prev);
    }

    /// Attention over `h` from the previous decoder state.
    pub fn attn_context(&self, s_prev: &[f64], h: &EncoderOutput) -> Result<AttentionContext> {
        if s_prev.len() != self.config.gru_dim || h.width() != self.config.feature_maps {
            return Err(NeuralError::ShapeMismatch(format!(
                "state {} / encoder width {} for decoder {} / {}",
                s_prev.len(),
                h.width(),
                self.config.gru_dim,
                self.config.feature_maps
            ))
            .into());
        }
        let p = self.params.values();
        let hp = self.project(p, &h.h);
        Ok(self.attend(p, s_prev, &h.h, &hp).0)
    }

    fn decoder_step(
        &self,
        p: &[Tensor],
        s_prev: &[f64],
        prev: usize,
        c: &[f64],
    ) -> (Vec<f64>, GruCache, Vec<f64>, Vec<f64>, Vec<f64>) {
        let emb = self.sym_embed.lookup(p, prev);
        let mut x = emb.to_vec();
        x.extend_from_slice(c);
        let (s, gru_cache) = self.gru.forward(p, s_prev, &x);
        let mut g_in = emb.to_vec();
        g_in.extend_from_slice(&s);
        g_in.extend_from_slice(c);
        let m = self.hidden.forward(p, &g_in);
        let logits = self.out.forward(p, &m);
        (s, gru_cache, g_in, m, logits)
    }

    /// Distribution over the 22 symbols after `state.prev_output`, given the
    /// context computed from `state.s`. The caller records the chosen symbol
    /// in the returned state's `prev_output`.
    pub fn seq2seq_step(&self, state: &DecoderState, context: &AttentionContext) -> Result<(Vec<f64>, DecoderState)> {
        if state.s.len() != self.config.gru_dim || context.c.len() != self.config.feature_maps {
            return Err(
                NeuralError::ShapeMismatch(format!("state {} / context {}", state.s.len(), context.c.len())).into(),
            );
        }
        let p = self.params.values();
        let prev = state.prev_output.unwrap_or(BEGIN_SYMBOL);
        let (s, _, _, _, logits) = self.decoder_step(p, &state.s, prev, &context.c);
        Ok((
            softmax(&logits),
            DecoderState {
                s,
                prev_output: None,
                step: state.step + 1,
            },
        ))
    }

    /// Sum over symbols (including the final end marker) of
    /// `−log P(y_t | …)` under teacher forcing.
    pub fn loss(&self, token_ids: &[usize], symbols: &[usize]) -> Result<f64> {
        self.loss_with(&self.params, token_ids, symbols)
    }

    pub fn loss_with(&self, params: &ParameterStore, token_ids: &[usize], symbols: &[usize]) -> Result<f64> {
        let p = params.values();
        let (enc, _) = self.encoder.forward(p, token_ids)?;
        let hp = self.project(p, &enc.h);
        let mut s = vec![0.0; self.config.gru_dim];
        let mut loss = 0.0;
        for (t, &y) in symbols.iter().enumerate() {
            let prev = t.checked_sub(1).map_or(BEGIN_SYMBOL, |j| symbols[j]);
            let (ctx, _) = self.attend(p, &s, &enc.h, &hp);
            let (s_next, _, _, _, logits) = self.decoder_step(p, &s, prev, &ctx.c);
            loss -= log_softmax(&logits)[y];
            s = s_next;
        }
        Ok(loss)
    }

    /// Loss of one sentence; gradients are accumulated into `self.params`.
    pub fn loss_and_grad(&mut self, token_ids: &[usize], symbols: &[usize]) -> Result<f64> {
        let mut params = std::mem::replace(&mut self.params, ParameterStore::new());
        let result = self.accumulate_grad(&mut params, token_ids, symbols);
        self.params = params;
        result
    }

    fn accumulate_grad(&self, params: &mut ParameterStore, token_ids: &[usize], symbols: &[usize]) -> Result<f64> {
        let (p, g) = params.split_mut();
        let (enc, enc_cache) = self.encoder.forward(p, token_ids)?;
        let h = &enc.h;
        let hp = self.project(p, h);
        let mut s = vec![0.0; self.config.gru_dim];
        let mut steps = Vec::with_capacity(symbols.len());
        let mut loss = 0.0;
        for (t, &y) in symbols.iter().enumerate() {
            let prev = t.checked_sub(1).map_or(BEGIN_SYMBOL, |j| symbols[j]);
            let (ctx, attn) = self.attend(p, &s, h, &hp);
            let (s_next, gru, g_in, m, logits) = self.decoder_step(p, &s, prev, &ctx.c);
            loss -= log_softmax(&logits)[y];
            steps.push(StepCache {
                prev,
                s_prev: std::mem::replace(&mut s, s_next),
                attn,
                gru,
                g_in,
                m,
                logits,
            });
        }
        let (e, gd) = (self.config.embed_dim, self.config.gru_dim);
        let mut dh = Tensor::zeros(&[h.rows(), h.row_len()]);
        let mut dhp = Tensor::zeros(&[h.rows(), self.config.attn_dim]);
        let mut ds_next = vec![0.0; gd];
        for (t, st) in steps.iter().enumerate().rev() {
            let mut dlogits = softmax(&st.logits);
            dlogits[symbols[t]] -= 1.0;
            let dm = self.out.backward(p, g, &st.m, &st.logits, &dlogits);
            let dg_in = self.hidden.backward(p, g, &st.g_in, &st.m, &dm);
            let mut demb = dg_in[..e].to_vec();
            let mut ds = dg_in[e..e + gd].to_vec();
            add_assign(&mut ds, &ds_next);
            let mut dc = dg_in[e + gd..].to_vec();
            let (mut ds_prev, dx) = self.gru.backward(p, g, &st.gru, &ds);
            add_assign(&mut demb, &dx[..e]);
            add_assign(&mut dc, &dx[e..]);
            self.sym_embed.backward(g, st.prev, &demb);
            self.attend_backward(p, g, &st.s_prev, h, &st.attn, &dc, &mut ds_prev, &mut dh, &mut dhp);
            ds_next = ds_prev;
        }
        let wh = self.attn_h.0;
        for i in 0..h.rows() {
            outer_acc(g[wh].data_mut(), dhp.row(i), h.row(i));
            matvec_t_acc(p[wh].data(), h.row_len(), dhp.row(i), dh.row_mut(i));
        }
        self.encoder.backward(p, g, &enc_cache, dh);
        Ok(loss)
    }
}

/// Decoding state shared by beam hypotheses.
#[derive(Clone, Debug)]
pub struct Seq2SeqBeamState {
    enc: Arc<(EncoderOutput, Tensor)>,
    s: Vec<f64>,
}

impl StepModel for Seq2Seq {
    type State = Seq2SeqBeamState;

    fn classes(&self) -> usize {
        Symbol::ALPHABET
    }

    fn start(&self, tokens: &[String]) -> Result<Self::State> {
        let enc = self.encode(tokens)?;
        let hp = self.project(self.params.values(), &enc.h);
        Ok(Seq2SeqBeamState {
            enc: Arc::new((enc, hp)),
            s: vec![0.0; self.config.gru_dim],
        })
    }

    fn next(&self, st: &Self::State, prev: Option<usize>) -> (Vec<f64>, Self::State) {
        let p = self.params.values();
        let (enc, hp) = &*st.enc;
        let (ctx, _) = self.attend(p, &st.s, &enc.h, hp);
        let (s, _, _, _, logits) = self.decoder_step(p, &st.s, prev.unwrap_or(BEGIN_SYMBOL), &ctx.c);
        (
            log_softmax(&logits),
            Seq2SeqBeamState {
                enc: Arc::clone(&st.enc),
                s,
            },
        )
    }

    fn signature(&self) -> String {
        format!("seq2seq:{}:{}", self.config.shape_hash(), self.vocab.len())
    }
}
