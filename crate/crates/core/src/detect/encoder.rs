use rand::Rng;

use super::{DetectError, Result, TaggerConfig};
use crate::neural::{ConvLayer, Embedding, ParameterStore, Tensor};

/// Word embeddings followed by same-padded convolutions, `tanh` between
/// layers. The output has one row per input token.
#[derive(Clone, Debug)]
pub struct Encoder {
    embed: Embedding,
    convs: Vec<ConvLayer>,
}

/// Per-position representations `h_i`, one row per token.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    pub h: Tensor,
}

impl EncoderOutput {
    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.h.row_len()
    }
}

/// Layer inputs kept for the backward pass.
#[derive(Clone, Debug)]
pub(crate) struct EncoderCache {
    ids: Vec<usize>,
    /// `inputs[l]` is the input of conv layer `l`; `inputs[L]` is the output.
    inputs: Vec<Tensor>,
}

impl Encoder {
    pub fn new(
        store: &mut ParameterStore,
        vocab_size: usize,
        config: &TaggerConfig,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let embed = Embedding::new(store, "enc.embed", vocab_size, config.embed_dim, rng)?;
        let mut convs = Vec::with_capacity(config.conv_layers);
        let mut width = config.embed_dim;
        for l in 0..config.conv_layers {
            convs.push(ConvLayer::new(
                store,
                &format!("enc.conv{l}"),
                config.filter_size,
                width,
                config.feature_maps,
                rng,
            )?);
            width = config.feature_maps;
        }
        Ok(Encoder { embed, convs })
    }

    pub(crate) fn forward(&self, p: &[Tensor], ids: &[usize]) -> Result<(EncoderOutput, EncoderCache)> {
        if ids.is_empty() {
            return Err(DetectError::EmptySentence);
        }
        let rows: Vec<Vec<f64>> = ids.iter().map(|&i| self.embed.lookup(p, i).to_vec()).collect();
        let mut x = Tensor::from_rows(&rows)?;
        let mut inputs = Vec::with_capacity(self.convs.len() + 1);
        let last = self.convs.len() - 1;
        for (l, conv) in self.convs.iter().enumerate() {
            let mut y = conv.forward(p, &x);
            if l < last {
                y.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            }
            inputs.push(std::mem::replace(&mut x, y));
        }
        inputs.push(x.clone());
        Ok((
            EncoderOutput { h: x },
            EncoderCache {
                ids: ids.to_vec(),
                inputs,
            },
        ))
    }

    pub(crate) fn backward(&self, p: &[Tensor], g: &mut [Tensor], cache: &EncoderCache, dh: Tensor) {
        let last = self.convs.len() - 1;
        let mut dx = dh;
        for l in (0..self.convs.len()).rev() {
            if l < last {
                let out = &cache.inputs[l + 1];
                for (d, y) in dx.data_mut().iter_mut().zip(out.data()) {
                    *d *= 1.0 - y * y;
                }
            }
            dx = self.convs[l].backward(p, g, &cache.inputs[l], &dx);
        }
        for (t, &id) in cache.ids.iter().enumerate() {
            self.embed.backward(g, id, dx.row(t));
        }
    }
}
