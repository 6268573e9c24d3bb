//! Layers with hand-derived backward passes.
//!
//! Forward functions read parameter values from a `&[Tensor]` slice indexed
//! by [`ParamId`]; backward functions accumulate into the matching gradient
//! slice (see [`ParameterStore::split_mut`]).

use rand::Rng;

use super::params::{ParamId, ParameterStore};
use super::tensor::Tensor;
use super::{NeuralError, Result};

fn mismatch(msg: impl Into<String>) -> NeuralError {
    NeuralError::ShapeMismatch(msg.into())
}

/// `out += W x` for a row-major `rows × cols` matrix.
pub(crate) fn matvec_acc(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ y`.
pub(crate) fn matvec_t_acc(w: &[f64], cols: usize, y: &[f64], out: &mut [f64]) {
    for (yi, row) in y.iter().zip(w.chunks_exact(cols)) {
        if *yi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
}

/// `g += a bᵀ`.
pub(crate) fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (ai, row) in a.iter().zip(g.chunks_exact_mut(cols)) {
        if *ai == 0.0 {
            continue;
        }
        for (gij, bj) in row.iter_mut().zip(b) {
            *gij += ai * bj;
        }
    }
}

pub(crate) fn add_assign(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

/// Affine map followed by a pointwise activation. `weights` is `out × in`.
pub fn dense(input: &[f64], weights: &Tensor, bias: &Tensor, activation: Activation) -> Result<Vec<f64>> {
    let s = weights.shape();
    if s.len() != 2 || s[1] != input.len() || bias.shape() != [s[0]] {
        return Err(mismatch(format!(
            "dense: weights {:?}, bias {:?}, input {}",
            s,
            bias.shape(),
            input.len()
        )));
    }
    Ok(dense_unchecked(input, weights, bias, activation))
}

fn dense_unchecked(input: &[f64], w: &Tensor, b: &Tensor, act: Activation) -> Vec<f64> {
    let mut y = b.data().to_vec();
    matvec_acc(w.data(), input.len(), input, &mut y);
    y.iter_mut().for_each(|v| *v = act.apply(*v));
    y
}

#[derive(Clone, Copy, Debug)]
pub struct DenseLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub act: Activation,
    pub inputs: usize,
    pub outputs: usize,
}

impl DenseLayer {
    pub fn new(
        store: &mut ParameterStore,
        prefix: &str,
        inputs: usize,
        outputs: usize,
        act: Activation,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = store.add_glorot(&format!("{prefix}.w"), &[outputs, inputs], inputs, outputs, rng)?;
        let b = store.add_zeros(&format!("{prefix}.b"), &[outputs])?;
        Ok(DenseLayer {
            w,
            b,
            act,
            inputs,
            outputs,
        })
    }

    pub fn forward(&self, p: &[Tensor], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        dense_unchecked(x, &p[self.w.0], &p[self.b.0], self.act)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, p: &[Tensor], g: &mut [Tensor], x: &[f64], y: &[f64], dy: &[f64]) -> Vec<f64> {
        let da: Vec<f64> = dy.iter().zip(y).map(|(d, y)| d * self.act.derivative(*y)).collect();
        outer_acc(g[self.w.0].data_mut(), &da, x);
        add_assign(g[self.b.0].data_mut(), &da);
        let mut dx = vec![0.0; self.inputs];
        matvec_t_acc(p[self.w.0].data(), self.inputs, &da, &mut dx);
        dx
    }
}

/// Same-padded 1-D convolution: `input` is `T × D`, `kernel` is `w × D × F`
/// with odd `w`, `bias` has `F` entries; the output is `T × F`.
pub fn conv1d_same(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let ks = kernel.shape();
    let is = input.shape();
    if ks.len() != 3 || is.len() != 2 || ks[1] != is[1] || bias.shape() != [ks[2]] {
        return Err(mismatch(format!(
            "conv1d: input {:?}, kernel {:?}, bias {:?}",
            is,
            ks,
            bias.shape()
        )));
    }
    if ks[0].is_multiple_of(2) {
        return Err(mismatch(format!("conv1d: filter width {} must be odd", ks[0])));
    }
    Ok(conv_forward(input, kernel, bias))
}

fn conv_forward(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let (t_len, d) = (input.rows(), input.row_len());
    let (w, f) = (kernel.shape()[0], kernel.shape()[2]);
    let half = w / 2;
    let mut out = Tensor::zeros(&[t_len, f]);
    let k = kernel.data();
    for t in 0..t_len {
        let row = out.row_mut(t);
        row.copy_from_slice(bias.data());
        for j in 0..w {
            let src = t + j;
            if src < half || src - half >= t_len {
                continue;
            }
            let x = input.row(src - half);
            let kj = &k[j * d * f..(j + 1) * d * f];
            // kj is D × F; out[t] += x · kj
            for (xd, krow) in x.iter().zip(kj.chunks_exact(f)) {
                if *xd == 0.0 {
                    continue;
                }
                for (o, kv) in row.iter_mut().zip(krow) {
                    *o += xd * kv;
                }
            }
        }
    }
    out
}

/// Backward pass of [`conv1d_same`]; accumulates kernel and bias gradients
/// and returns the gradient with respect to the input.
pub fn conv1d_same_backward(
    input: &Tensor,
    kernel: &Tensor,
    dout: &Tensor,
    dkernel: &mut Tensor,
    dbias: &mut Tensor,
) -> Tensor {
    let (t_len, d) = (input.rows(), input.row_len());
    let (w, f) = (kernel.shape()[0], kernel.shape()[2]);
    let half = w / 2;
    let mut dinput = Tensor::zeros(&[t_len, d]);
    for t in 0..t_len {
        add_assign(dbias.data_mut(), dout.row(t));
    }
    let k = kernel.data();
    for t in 0..t_len {
        let dy = dout.row(t);
        for j in 0..w {
            let src = t + j;
            if src < half || src - half >= t_len {
                continue;
            }
            let x = input.row(src - half).to_vec();
            let dk = &mut dkernel.data_mut()[j * d * f..(j + 1) * d * f];
            outer_acc(dk, &x, dy);
            let kj = &k[j * d * f..(j + 1) * d * f];
            let dx = dinput.row_mut(src - half);
            // dx += kj · dy  (kj is D × F)
            matvec_acc(kj, f, dy, dx);
        }
    }
    dinput
}

#[derive(Clone, Copy, Debug)]
pub struct ConvLayer {
    pub kernel: ParamId,
    pub bias: ParamId,
}

impl ConvLayer {
    pub fn new(
        store: &mut ParameterStore,
        prefix: &str,
        width: usize,
        inputs: usize,
        outputs: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if width.is_multiple_of(2) {
            return Err(mismatch(format!("filter width {width} must be odd")));
        }
        let kernel = store.add_glorot(
            &format!("{prefix}.kernel"),
            &[width, inputs, outputs],
            width * inputs,
            width * outputs,
            rng,
        )?;
        let bias = store.add_zeros(&format!("{prefix}.bias"), &[outputs])?;
        Ok(ConvLayer { kernel, bias })
    }

    pub fn forward(&self, p: &[Tensor], input: &Tensor) -> Tensor {
        conv_forward(input, &p[self.kernel.0], &p[self.bias.0])
    }

    pub fn backward(&self, p: &[Tensor], g: &mut [Tensor], input: &Tensor, dout: &Tensor) -> Tensor {
        let mut dk = std::mem::replace(&mut g[self.kernel.0], Tensor::zeros(&[1]));
        let mut db = std::mem::replace(&mut g[self.bias.0], Tensor::zeros(&[1]));
        let dx = conv1d_same_backward(input, &p[self.kernel.0], dout, &mut dk, &mut db);
        g[self.kernel.0] = dk;
        g[self.bias.0] = db;
        dx
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub dim: usize,
}

impl Embedding {
    pub fn new(store: &mut ParameterStore, name: &str, rows: usize, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let table = store.add_uniform(name, &[rows, dim], 0.1, rng)?;
        Ok(Embedding { table, dim })
    }

    pub fn lookup<'a>(&self, p: &'a [Tensor], row: usize) -> &'a [f64] {
        p[self.table.0].row(row)
    }

    pub fn backward(&self, g: &mut [Tensor], row: usize, d: &[f64]) {
        add_assign(g[self.table.0].row_mut(row), d);
    }
}

/// Borrowed view of one GRU cell's weights. `w*` are `H × D`, `u*` are
/// `H × H`, biases have `H` entries; `n` is the candidate state.
#[derive(Clone, Copy, Debug)]
pub struct GruWeights<'a> {
    pub wz: &'a Tensor,
    pub uz: &'a Tensor,
    pub bz: &'a Tensor,
    pub wr: &'a Tensor,
    pub ur: &'a Tensor,
    pub br: &'a Tensor,
    pub wn: &'a Tensor,
    pub un: &'a Tensor,
    pub bn: &'a Tensor,
}

impl GruWeights<'_> {
    fn check(&self, hidden: usize, input: usize) -> Result<()> {
        let ok = [self.wz, self.wr, self.wn].iter().all(|w| w.shape() == [hidden, input])
            && [self.uz, self.ur, self.un]
                .iter()
                .all(|u| u.shape() == [hidden, hidden])
            && [self.bz, self.br, self.bn].iter().all(|b| b.shape() == [hidden]);
        if ok {
            Ok(())
        } else {
            Err(mismatch(format!(
                "gru: state {hidden}, input {input}, weights {:?}/{:?}",
                self.wz.shape(),
                self.uz.shape()
            )))
        }
    }
}

/// Intermediate values of one GRU step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

fn gru_forward(w: &GruWeights, h: &[f64], x: &[f64]) -> (Vec<f64>, GruCache) {
    let hidden = h.len();
    let d = x.len();
    let gate = |wm: &Tensor, um: &Tensor, b: &Tensor, hv: &[f64]| {
        let mut a = b.data().to_vec();
        matvec_acc(wm.data(), d, x, &mut a);
        matvec_acc(um.data(), hidden, hv, &mut a);
        a
    };
    let z: Vec<f64> = gate(w.wz, w.uz, w.bz, h).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = gate(w.wr, w.ur, w.br, h).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let n: Vec<f64> = gate(w.wn, w.un, w.bn, &rh).into_iter().map(f64::tanh).collect();
    let out = (0..hidden).map(|i| (1.0 - z[i]) * h[i] + z[i] * n[i]).collect();
    (
        out,
        GruCache {
            x: x.to_vec(),
            h: h.to_vec(),
            z,
            r,
            n,
            rh,
        },
    )
}

/// One GRU step:
/// `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
/// `n = tanh(Wn x + Un (r ⊙ h) + bn)`, `h' = (1 − z) ⊙ h + z ⊙ n`.
pub fn gru_step(state: &[f64], input: &[f64], weights: &GruWeights) -> Result<Vec<f64>> {
    weights.check(state.len(), input.len())?;
    Ok(gru_forward(weights, state, input).0)
}

#[derive(Clone, Copy, Debug)]
pub struct GruLayer {
    pub wz: ParamId,
    pub uz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub ur: ParamId,
    pub br: ParamId,
    pub wn: ParamId,
    pub un: ParamId,
    pub bn: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl GruLayer {
    pub fn new(
        store: &mut ParameterStore,
        prefix: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = |g: &str, store: &mut ParameterStore, rng: &mut _| {
            store.add_glorot(&format!("{prefix}.w{g}"), &[hidden, inputs], inputs, hidden, rng)
        };
        let wz = w("z", store, rng)?;
        let wr = w("r", store, rng)?;
        let wn = w("n", store, rng)?;
        let u = |g: &str, store: &mut ParameterStore, rng: &mut _| {
            store.add_glorot(&format!("{prefix}.u{g}"), &[hidden, hidden], hidden, hidden, rng)
        };
        let uz = u("z", store, rng)?;
        let ur = u("r", store, rng)?;
        let un = u("n", store, rng)?;
        let bz = store.add_zeros(&format!("{prefix}.bz"), &[hidden])?;
        let br = store.add_zeros(&format!("{prefix}.br"), &[hidden])?;
        let bn = store.add_zeros(&format!("{prefix}.bn"), &[hidden])?;
        Ok(GruLayer {
            wz,
            uz,
            bz,
            wr,
            ur,
            br,
            wn,
            un,
            bn,
            inputs,
            hidden,
        })
    }

    pub fn weights<'a>(&self, p: &'a [Tensor]) -> GruWeights<'a> {
        GruWeights {
            wz: &p[self.wz.0],
            uz: &p[self.uz.0],
            bz: &p[self.bz.0],
            wr: &p[self.wr.0],
            ur: &p[self.ur.0],
            br: &p[self.br.0],
            wn: &p[self.wn.0],
            un: &p[self.un.0],
            bn: &p[self.bn.0],
        }
    }

    pub fn forward(&self, p: &[Tensor], h: &[f64], x: &[f64]) -> (Vec<f64>, GruCache) {
        debug_assert_eq!(h.len(), self.hidden);
        debug_assert_eq!(x.len(), self.inputs);
        gru_forward(&self.weights(p), h, x)
    }

    pub fn step(&self, p: &[Tensor], h: &[f64], x: &[f64]) -> Vec<f64> {
        self.forward(p, h, x).0
    }

    /// Given `dL/dh'`, accumulates weight gradients and returns
    /// `(dL/dh, dL/dx)`.
    pub fn backward(&self, p: &[Tensor], g: &mut [Tensor], cache: &GruCache, dh_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hidden = self.hidden;
        let GruCache { x, h, z, r, n, rh } = cache;
        let mut dh: Vec<f64> = (0..hidden).map(|i| dh_out[i] * (1.0 - z[i])).collect();
        let mut dx = vec![0.0; self.inputs];

        let da_n: Vec<f64> = (0..hidden).map(|i| dh_out[i] * z[i] * (1.0 - n[i] * n[i])).collect();
        outer_acc(g[self.wn.0].data_mut(), &da_n, x);
        outer_acc(g[self.un.0].data_mut(), &da_n, rh);
        add_assign(g[self.bn.0].data_mut(), &da_n);
        matvec_t_acc(p[self.wn.0].data(), self.inputs, &da_n, &mut dx);
        let mut drh = vec![0.0; hidden];
        matvec_t_acc(p[self.un.0].data(), hidden, &da_n, &mut drh);

        let da_r: Vec<f64> = (0..hidden).map(|i| drh[i] * h[i] * r[i] * (1.0 - r[i])).collect();
        for i in 0..hidden {
            dh[i] += drh[i] * r[i];
        }
        let da_z: Vec<f64> = (0..hidden)
            .map(|i| dh_out[i] * (n[i] - h[i]) * z[i] * (1.0 - z[i]))
            .collect();

        for (da, w, u, b) in [(&da_r, self.wr, self.ur, self.br), (&da_z, self.wz, self.uz, self.bz)] {
            outer_acc(g[w.0].data_mut(), da, x);
            outer_acc(g[u.0].data_mut(), da, h);
            add_assign(g[b.0].data_mut(), da);
            matvec_t_acc(p[w.0].data(), self.inputs, da, &mut dx);
            matvec_t_acc(p[u.0].data(), hidden, da, &mut dh);
        }
        (dh, dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn conv_preserves_length_and_bias() {
        for t in 1..6 {
            let input = Tensor::from_vec(&[t, 2], (0..2 * t).map(|v| v as f64).collect()).unwrap();
            let kernel = Tensor::zeros(&[3, 2, 4]);
            let bias = Tensor::vector(vec![1.0, -2.0, 0.5, 3.0]);
            let out = conv1d_same(&input, &kernel, &bias).unwrap();
            assert_eq!(out.shape(), [t, 4]);
            for r in 0..t {
                assert_eq!(out.row(r), bias.data());
            }
        }
    }

    #[test]
    fn conv_center_tap_identity() {
        let input = Tensor::from_vec(&[1, 3], vec![0.3, -1.2, 2.0]).unwrap();
        let mut kernel = Tensor::zeros(&[3, 3, 3]);
        for d in 0..3 {
            kernel.data_mut()[9 + d * 3 + d] = 1.0;
        }
        let out = conv1d_same(&input, &kernel, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(out.row(0), input.row(0));
    }

    #[test]
    fn conv_rejects_bad_shapes() {
        let input = Tensor::zeros(&[4, 2]);
        assert!(conv1d_same(&input, &Tensor::zeros(&[3, 3, 4]), &Tensor::zeros(&[4])).is_err());
        assert!(conv1d_same(&input, &Tensor::zeros(&[2, 2, 4]), &Tensor::zeros(&[4])).is_err());
        assert!(conv1d_same(&input, &Tensor::zeros(&[3, 2, 4]), &Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (t, d, f, w) = (5, 3, 2, 3);
        let rand_t = |shape: &[usize], rng: &mut ChaCha8Rng| {
            let n = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        let input = rand_t(&[t, d], &mut rng);
        let kernel = rand_t(&[w, d, f], &mut rng);
        let bias = rand_t(&[f], &mut rng);
        let out = conv1d_same(&input, &kernel, &bias).unwrap();
        for ti in 0..t {
            for fi in 0..f {
                let mut s = bias.data()[fi];
                for j in 0..w {
                    let src = ti as isize + j as isize - 1;
                    if src < 0 || src >= t as isize {
                        continue;
                    }
                    for di in 0..d {
                        s += input.row(src as usize)[di] * kernel.data()[j * d * f + di * f + fi];
                    }
                }
                assert!(close(out.row(ti)[fi], s, 1e-12));
            }
        }
    }

    fn zero_gru(h: usize, d: usize) -> Vec<Tensor> {
        vec![
            Tensor::zeros(&[h, d]),
            Tensor::zeros(&[h, h]),
            Tensor::zeros(&[h]),
            Tensor::zeros(&[h, d]),
            Tensor::zeros(&[h, h]),
            Tensor::zeros(&[h]),
            Tensor::zeros(&[h, d]),
            Tensor::zeros(&[h, h]),
            Tensor::zeros(&[h]),
        ]
    }

    fn view(t: &[Tensor]) -> GruWeights<'_> {
        GruWeights {
            wz: &t[0],
            uz: &t[1],
            bz: &t[2],
            wr: &t[3],
            ur: &t[4],
            br: &t[5],
            wn: &t[6],
            un: &t[7],
            bn: &t[8],
        }
    }

    #[test]
    fn gru_zero_params_keep_zero_state() {
        let t = zero_gru(3, 2);
        let out = gru_step(&[0.0; 3], &[0.7, -0.4], &view(&t)).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn gru_closed_update_gate_copies_state() {
        let mut t = zero_gru(3, 2);
        t[2].fill(-50.0);
        t[8].fill(2.0);
        let h = [0.3, -0.8, 0.1];
        let out = gru_step(&h, &[1.0, 1.0], &view(&t)).unwrap();
        for (a, b) in out.iter().zip(h) {
            assert!(close(*a, b, 1e-15));
        }
    }

    #[test]
    fn gru_shape_mismatch() {
        let t = zero_gru(3, 2);
        assert!(gru_step(&[0.0; 2], &[0.0; 2], &view(&t)).is_err());
        assert!(gru_step(&[0.0; 3], &[0.0; 3], &view(&t)).is_err());
    }

    #[test]
    fn dense_cases() {
        let w = Tensor::zeros(&[3, 2]);
        let b = Tensor::zeros(&[3]);
        assert_eq!(dense(&[1.0, -2.0], &w, &b, Activation::Sigmoid).unwrap(), vec![0.5; 3]);
        let eye = Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let y = dense(&[0.25, -3.0], &eye, &Tensor::zeros(&[2]), Activation::Identity).unwrap();
        assert_eq!(y, vec![0.25, -3.0]);
        assert!(dense(&[1.0], &w, &b, Activation::Tanh).is_err());
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softmax(&[-7.3]), vec![1.0]);
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!(close(p[0], 1.0, 1e-12) && p[1] < 1e-300 + 1e-12);
        let lp = log_softmax(&[1000.0, 0.0]);
        assert!(close(lp[0], 0.0, 1e-12) && close(lp[1], -1000.0, 1e-9));
    }
}
