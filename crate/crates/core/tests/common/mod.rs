//! Reference implementations used as test oracles. Nothing here calls into
//! the library's layer code: forward passes are rewritten from the model
//! equations and can run in double-double precision, so central differences
//! stay far above the rounding floor.

#![allow(dead_code, clippy::needless_range_loop)]

use std::ops::{Add, Mul, Neg, Sub};

use edl_core::neural::ParameterStore;
use twofloat::TwoFloat;

pub trait Real:
    Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn of(x: f64) -> Self;
    fn recip(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn tanh(self) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn to_f64(self) -> f64 {
        self
    }
}

// twofloat's own transcendental functions stop near 1e-19 relative accuracy
// and its double-double division near 1e-17; these keep the full precision
// of its addition and its products with f64.
fn wide_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    // Long division by the leading digit, with remainders formed from
    // double-double times f64 products.
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::from(q1) + q2 + q3
}

fn wide_exp(x: TwoFloat) -> TwoFloat {
    let ln2 = TwoFloat::new_add(std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);
    let k = (x.hi() / std::f64::consts::LN_2).round();
    let r = (x - ln2 * k) / 256.0;
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for i in 1..=14 {
        term = term * r / i as f64;
        sum += term;
    }
    for _ in 0..8 {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

fn wide_ln(x: TwoFloat) -> TwoFloat {
    let mut y = TwoFloat::from(x.hi().ln());
    for _ in 0..2 {
        y = y + (x * wide_exp(-y) - 1.0);
    }
    y
}

fn wide_tanh(x: TwoFloat) -> TwoFloat {
    let negative = x.hi() < 0.0;
    let e = wide_exp(if negative { x * 2.0 } else { -x * 2.0 });
    let t = wide_div(TwoFloat::from(1.0) - e, TwoFloat::from(1.0) + e);
    if negative {
        -t
    } else {
        t
    }
}

impl Real for TwoFloat {
    fn of(x: f64) -> Self {
        TwoFloat::from(x)
    }
    fn recip(self) -> Self {
        wide_div(TwoFloat::from(1.0), self)
    }
    fn exp(self) -> Self {
        wide_exp(self)
    }
    fn ln(self) -> Self {
        wide_ln(self)
    }
    fn tanh(self) -> Self {
        wide_tanh(self)
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
}

pub type Wide = TwoFloat;

fn sigmoid<R: Real>(x: R) -> R {
    (R::of(1.0) + (-x).exp()).recip()
}

pub fn log_softmax<R: Real>(z: &[R]) -> Vec<R> {
    let mut m = z[0];
    for &v in z {
        if v > m {
            m = v;
        }
    }
    let mut total = R::of(0.0);
    for &v in z {
        total = total + (v - m).exp();
    }
    let lse = m + total.ln();
    z.iter().map(|&v| v - lse).collect()
}

/// A parameter tensor converted to `R`, with its shape.
pub struct Mat<R> {
    pub shape: Vec<usize>,
    pub data: Vec<R>,
}

impl<R: Real> Mat<R> {
    pub fn load(p: &ParameterStore, name: &str) -> Self {
        let t = p.value(p.id(name).unwrap_or_else(|| panic!("no parameter {name}")));
        Mat {
            shape: t.shape().to_vec(),
            data: t.data().iter().map(|&x| R::of(x)).collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[R] {
        let cols = self.data.len() / self.shape[0];
        &self.data[i * cols..(i + 1) * cols]
    }

    /// `self · x` for a rows × cols matrix.
    pub fn apply(&self, x: &[R]) -> Vec<R> {
        (0..self.shape[0]).map(|i| dot(self.row(i), x)).collect()
    }
}

pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    assert_eq!(a.len(), b.len());
    let mut s = R::of(0.0);
    for (x, y) in a.iter().zip(b) {
        s = s + *x * *y;
    }
    s
}

fn plus<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

fn concat<R: Real>(parts: &[&[R]]) -> Vec<R> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Embedding lookup followed by same-padded convolutions with `tanh`
/// between layers.
pub fn encode<R: Real>(p: &ParameterStore, ids: &[usize]) -> Vec<Vec<R>> {
    let embed = Mat::<R>::load(p, "enc.embed");
    let mut x: Vec<Vec<R>> = ids.iter().map(|&i| embed.row(i).to_vec()).collect();
    let layers = (0..)
        .take_while(|l| p.id(&format!("enc.conv{l}.kernel")).is_some())
        .count();
    for l in 0..layers {
        let k = Mat::<R>::load(p, &format!("enc.conv{l}.kernel"));
        let b = Mat::<R>::load(p, &format!("enc.conv{l}.bias"));
        let (w, d, f) = (k.shape[0], k.shape[1], k.shape[2]);
        let half = (w / 2) as isize;
        let n = x.len() as isize;
        let mut y = Vec::with_capacity(x.len());
        for t in 0..n {
            let mut out = b.data.clone();
            for j in 0..w {
                let src = t + j as isize - half;
                if src < 0 || src >= n {
                    continue;
                }
                for di in 0..d {
                    let xv = x[src as usize][di];
                    for fi in 0..f {
                        out[fi] = out[fi] + xv * k.data[(j * d + di) * f + fi];
                    }
                }
            }
            if l + 1 < layers {
                out = out.into_iter().map(R::tanh).collect();
            }
            y.push(out);
        }
        x = y;
    }
    x
}

/// `z = σ(Wz x + Uz h + bz)`, `r = σ(Wr x + Ur h + br)`,
/// `n = tanh(Wn x + Un (r ⊙ h) + bn)`, `h' = (1 − z) h + z n`.
pub fn gru<R: Real>(p: &ParameterStore, prefix: &str, h: &[R], x: &[R]) -> Vec<R> {
    let m = |n: &str| Mat::<R>::load(p, &format!("{prefix}.{n}"));
    let gate = |w: &str, u: &str, b: &str, hv: &[R]| -> Vec<R> {
        let a = plus(&m(w).apply(x), &m(u).apply(hv));
        plus(&a, &m(b).data)
    };
    let z: Vec<R> = gate("wz", "uz", "bz", h).into_iter().map(sigmoid).collect();
    let r: Vec<R> = gate("wr", "ur", "br", h).into_iter().map(sigmoid).collect();
    let rh: Vec<R> = r.iter().zip(h).map(|(a, b)| *a * *b).collect();
    let n: Vec<R> = gate("wn", "un", "bn", &rh).into_iter().map(R::tanh).collect();
    (0..h.len()).map(|i| (R::of(1.0) - z[i]) * h[i] + z[i] * n[i]).collect()
}

fn dense<R: Real>(p: &ParameterStore, prefix: &str, x: &[R]) -> Vec<R> {
    let w = Mat::<R>::load(p, &format!("{prefix}.w"));
    let b = Mat::<R>::load(p, &format!("{prefix}.b"));
    plus(&w.apply(x), &b.data)
}

/// Teacher-forced negative log-likelihood of flat tags.
pub fn crnnlm_loss<R: Real>(p: &ParameterStore, ids: &[usize], tags: &[usize]) -> R {
    let h = encode::<R>(p, ids);
    let tag_embed = Mat::<R>::load(p, "dec.tag_embed");
    let start = tag_embed.shape[0] - 1;
    let hidden = Mat::<R>::load(p, "dec.gru.uz").shape[0];
    let mut s = vec![R::of(0.0); hidden];
    let mut loss = R::of(0.0);
    for (i, &y) in tags.iter().enumerate() {
        let prev = if i == 0 { start } else { tags[i - 1] };
        let x = concat(&[tag_embed.row(prev), &h[i]]);
        s = gru(p, "dec.gru", &s, &x);
        loss = loss - log_softmax(&dense(p, "dec.out", &s))[y];
    }
    loss
}

/// Teacher-forced negative log-likelihood of a bracket-symbol sequence.
pub fn seq2seq_loss<R: Real>(p: &ParameterStore, ids: &[usize], symbols: &[usize]) -> R {
    let h = encode::<R>(p, ids);
    let embed = Mat::<R>::load(p, "dec.sym_embed");
    let begin = embed.shape[0] - 1;
    let ws = Mat::<R>::load(p, "dec.attn.ws");
    let wh = Mat::<R>::load(p, "dec.attn.wh");
    let b = Mat::<R>::load(p, "dec.attn.b");
    let v = Mat::<R>::load(p, "dec.attn.v");
    let hidden = Mat::<R>::load(p, "dec.gru.uz").shape[0];
    let mut s = vec![R::of(0.0); hidden];
    let mut loss = R::of(0.0);
    for (t, &y) in symbols.iter().enumerate() {
        let prev = if t == 0 { begin } else { symbols[t - 1] };
        let base = plus(&ws.apply(&s), &b.data);
        let e: Vec<R> = h
            .iter()
            .map(|hi| {
                let u: Vec<R> = plus(&base, &wh.apply(hi)).into_iter().map(R::tanh).collect();
                dot(&v.data, &u)
            })
            .collect();
        let alpha: Vec<R> = log_softmax(&e).into_iter().map(R::exp).collect();
        let mut c = vec![R::of(0.0); h[0].len()];
        for (a, hi) in alpha.iter().zip(&h) {
            for (ck, hk) in c.iter_mut().zip(hi) {
                *ck = *ck + *a * *hk;
            }
        }
        let emb = embed.row(prev);
        s = gru(p, "dec.gru", &s, &concat(&[emb, &c]));
        let m: Vec<R> = dense(p, "dec.hidden", &concat(&[emb, &s, &c]))
            .into_iter()
            .map(R::tanh)
            .collect();
        loss = loss - log_softmax(&dense(p, "dec.out", &m))[y];
    }
    loss
}

/// One candidate as word ids and projection rows (type, category, hot,
/// edit, cosine, translation). `name` is `None` for NIL.
pub struct RankInput {
    pub mention: Vec<usize>,
    pub name: Option<Vec<usize>>,
    pub rows: [usize; 6],
}

fn summed_rows<R: Real>(table: &Mat<R>, ids: &[usize]) -> Vec<R> {
    let mut sum = vec![R::of(0.0); table.shape[1]];
    for &i in ids {
        sum = plus(&sum, table.row(i));
    }
    sum
}

/// Score of one candidate: the concatenated features through two sigmoid
/// layers and a linear output.
pub fn ranker_score<R: Real>(p: &ParameterStore, input: &RankInput) -> R {
    let words = Mat::<R>::load(p, "rank.words");
    let mention = summed_rows(&words, &input.mention);
    let name = match &input.name {
        Some(ids) => summed_rows(&words, ids),
        None => Mat::<R>::load(p, "rank.nil_name").row(0).to_vec(),
    };
    let mut x = concat(&[&mention, &name]);
    for (table, &row) in ["type", "category", "hot", "edit", "cosine", "translation"]
        .iter()
        .zip(&input.rows)
    {
        let m = Mat::<R>::load(p, &format!("rank.proj.{table}"));
        x.extend_from_slice(m.row(row));
    }
    let a1: Vec<R> = dense(p, "rank.hidden1", &x).into_iter().map(sigmoid).collect();
    let a2: Vec<R> = dense(p, "rank.hidden2", &a1).into_iter().map(sigmoid).collect();
    dense(p, "rank.score", &a2)[0]
}

/// Negative log softmax probability of the gold candidate.
pub fn ranker_loss<R: Real>(p: &ParameterStore, inputs: &[RankInput], gold: usize) -> R {
    let scores: Vec<R> = inputs.iter().map(|i| ranker_score(p, i)).collect();
    -log_softmax(&scores)[gold]
}

/// Worst relative error between the analytic gradients stored in `params`
/// and wide-precision central differences of `loss`, over `coords` sampled
/// coordinates per tensor.
pub fn wide_grad_check(
    params: &ParameterStore,
    loss: impl Fn(&ParameterStore) -> Wide,
    step: f64,
    coords: usize,
    seed: u64,
) -> (f64, String) {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    let mut worst = (0.0, String::new());
    for name in params.names().to_vec() {
        let id = params.id(&name).unwrap();
        let n = params.value(id).len();
        let picked: Vec<usize> = if n <= coords {
            (0..n).collect()
        } else {
            sample(&mut rng, n, coords).into_vec()
        };
        for idx in picked {
            let analytic = params.grad(id).data()[idx];
            let orig = params.value(id).data()[idx];
            p.value_mut(id).data_mut()[idx] = orig + step;
            let plus = loss(&p);
            p.value_mut(id).data_mut()[idx] = orig - step;
            let minus = loss(&p);
            p.value_mut(id).data_mut()[idx] = orig;
            // The perturbed values are what the loss saw; their distance is
            // taken exactly.
            let width = TwoFloat::from(orig + step) - TwoFloat::from(orig - step);
            let numeric = wide_div(plus - minus, width).to_f64();
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{idx}] analytic {analytic:e} numeric {numeric:e}"));
            }
        }
    }
    worst
}

/// A random candidate list over `words` with the NIL candidate last, and
/// the same list in the oracle's id form.
pub fn random_rank_example(
    rng: &mut impl rand::Rng,
    ranker: &edl_core::link::Ranker,
    words: &[&str],
) -> (edl_core::link::RankExample, Vec<RankInput>) {
    use edl_core::link::{FeatureInput, RankExample};
    fn pick(rng: &mut impl rand::Rng, words: &[&str], n: usize) -> Vec<String> {
        (0..n)
            .map(|_| words[rng.gen_range(0..words.len())].to_string())
            .collect()
    }
    let mention_words = pick(rng, words, 2);
    let size = rng.gen_range(2..5);
    let mut inputs = Vec::new();
    for k in 0..size {
        let nil = k + 1 == size;
        let n = rng.gen_range(1..4);
        let name = pick(rng, words, n);
        inputs.push(FeatureInput {
            mention_words: mention_words.clone(),
            name_words: (!nil).then_some(name),
            entity_type: rng.gen_range(0..5),
            category: rng.gen_range(0..2),
            hot: rng.gen_range(0..10),
            edit: rng.gen_range(0..10),
            cosine: rng.gen_range(0..10),
            translation: rng.gen_range(0..10),
        });
    }
    let oracle = inputs
        .iter()
        .map(|i| RankInput {
            mention: i.mention_words.iter().map(|w| ranker.words.id(w)).collect(),
            name: i
                .name_words
                .as_ref()
                .map(|ws| ws.iter().map(|w| ranker.words.id(w)).collect()),
            rows: i.projection_rows(),
        })
        .collect();
    let gold = rng.gen_range(0..size);
    let candidates = (0..size)
        .map(|k| {
            if k + 1 == size {
                edl_core::link::Candidate::Nil
            } else {
                edl_core::link::Candidate::Kb(format!("m.{k}"))
            }
        })
        .collect();
    (
        RankExample {
            candidates,
            inputs,
            gold,
        },
        oracle,
    )
}

/// A random valid nested labeling over `n` tokens: disjoint top-level spans,
/// each possibly holding nested spans, up to four levels deep.
pub fn random_labeling(rng: &mut impl rand::Rng, n: usize) -> edl_core::codec::NestedLabeling {
    use edl_core::codec::{Label, NestedLabeling, Span};
    fn fill(rng: &mut impl rand::Rng, start: usize, end: usize, depth: usize, out: &mut Vec<Span>) {
        let mut pos = start;
        while pos < end {
            if rng.gen_bool(0.4) {
                let len = rng.gen_range(1..=end - pos);
                let label = Label::from_index(rng.gen_range(0..Label::COUNT));
                out.push(Span::new(pos, pos + len, label.entity_type, label.kind));
                if depth < 3 && rng.gen_bool(0.5) {
                    fill(rng, pos, pos + len, depth + 1, out);
                }
                pos += len;
            } else {
                pos += 1;
            }
        }
    }
    let mut spans = Vec::new();
    fill(rng, 0, n, 0, &mut spans);
    NestedLabeling::new(spans).expect("generated spans nest")
}

/// Best total weight of a one-to-one assignment, by trying every injective
/// map from the smaller side into the larger.
pub fn brute_force_assignment(weights: &[Vec<f64>]) -> f64 {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let w = |i: usize, j: usize| if rows <= cols { weights[i][j] } else { weights[j][i] };
    let (small, large) = (rows.min(cols), rows.max(cols));
    fn go(i: usize, small: usize, used: &mut Vec<bool>, w: &dyn Fn(usize, usize) -> f64) -> f64 {
        if i == small {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(w(i, j) + go(i + 1, small, used, w));
                used[j] = false;
            }
        }
        best
    }
    go(0, small, &mut vec![false; large], &w)
}

/// Precision and recall of the clustering score, computed from scratch:
/// clusters are mentions sharing a link target, a system and a gold cluster
/// agree on mentions with equal (doc, span, type, kind) only when both are
/// NIL or both carry the same KB id, and the alignment is found by brute
/// force.
pub fn brute_force_ceaf_plus(system: &[edl_core::corpus::GoldLink], gold: &[edl_core::corpus::GoldLink]) -> (f64, f64) {
    use edl_core::corpus::GoldLink;
    use std::collections::BTreeMap;
    fn group(links: &[GoldLink]) -> Vec<(String, Vec<String>)> {
        let mut by: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for l in links {
            let m = &l.mention;
            let key = format!(
                "{}|{}|{}|{}|{}",
                m.doc_id, m.char_start, m.char_end, m.entity_type, m.kind
            );
            let members = by.entry(l.target.as_str().to_string()).or_default();
            if !members.contains(&key) {
                members.push(key);
            }
        }
        by.into_iter().collect()
    }
    let (s, g) = (group(system), group(gold));
    let agree = |a: &str, b: &str| a == b || (a.starts_with("NIL") && b.starts_with("NIL"));
    let matrix: Vec<Vec<f64>> = g
        .iter()
        .map(|(gt, gm)| {
            s.iter()
                .map(|(st, sm)| {
                    if agree(gt, st) {
                        gm.iter().filter(|k| sm.contains(k)).count() as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let total = brute_force_assignment(&matrix);
    let size = |c: &[(String, Vec<String>)]| c.iter().map(|(_, m)| m.len()).sum::<usize>();
    let ratio = |n: usize| if n == 0 { 0.0 } else { total / n as f64 };
    (ratio(size(&s)), ratio(size(&g)))
}
