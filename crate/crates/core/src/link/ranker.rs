use std::collections::HashMap;

use rand::seq::SliceRandom;

use crate::corpus::{Document, GoldLink, LinkTarget};
use crate::detect::Vocab;
use crate::kb::KbIndex;
use crate::neural::{
    log_softmax, seeded_rng, softmax, Activation, AdaDeltaState, DenseLayer, Embedding, NeuralError, ParameterStore,
    Tensor,
};

use super::features::{extract_features, FeatureInput, BINS, FEATURE_DIM, PROJECTION_DIM, WORD_DIM};
use super::{generate_candidates, Candidate, CandidateSettings, DocumentContext, LinkError, Result};
use crate::corpus::{Category, EntityType, Language};

#[derive(Clone, Debug, PartialEq)]
pub struct RankerConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Words seen fewer times in training share the unknown-word vector.
    pub min_word_count: usize,
    pub seed: u64,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            hidden1: 32,
            hidden2: 16,
            batch_size: 8,
            max_epochs: 40,
            patience: 5,
            min_word_count: 2,
            seed: 1,
        }
    }
}

impl RankerConfig {
    pub fn full_scale() -> Self {
        RankerConfig {
            hidden1: 512,
            hidden2: 256,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(LinkError::InvalidConfig("hidden widths must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(LinkError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("hidden1", self.hidden1.to_string()),
            ("hidden2", self.hidden2.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("min_word_count", self.min_word_count.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let n: u64 = value
            .parse()
            .map_err(|_| LinkError::InvalidConfig(format!("{key}: `{value}` is not a count")))?;
        let slot = match key {
            "hidden1" => &mut self.hidden1,
            "hidden2" => &mut self.hidden2,
            "batch_size" => &mut self.batch_size,
            "max_epochs" => &mut self.max_epochs,
            "patience" => &mut self.patience,
            "min_word_count" => &mut self.min_word_count,
            "seed" => {
                self.seed = n;
                return Ok(());
            }
            other => return Err(LinkError::InvalidConfig(format!("unknown key `{other}`"))),
        };
        *slot = n as usize;
        Ok(())
    }
}

/// One mention's candidate list with features and the gold position.
#[derive(Clone, Debug, PartialEq)]
pub struct RankExample {
    pub candidates: Vec<Candidate>,
    pub inputs: Vec<FeatureInput>,
    pub gold: usize,
}

/// Generates candidates for every gold mention and keeps those whose list
/// contains the gold target (NIL mentions target the `Nil` candidate).
/// Returns the examples and the number of mentions skipped because their
/// target was missing.
pub fn rank_examples(
    docs: &[Document],
    gold: &[GoldLink],
    index: &KbIndex,
    settings: &dyn Fn(Language) -> CandidateSettings,
) -> Result<(Vec<RankExample>, usize)> {
    let mut examples = Vec::new();
    let mut skipped = 0;
    for doc in docs {
        let links: Vec<&GoldLink> = gold.iter().filter(|g| g.mention.doc_id == doc.doc_id).collect();
        if links.is_empty() {
            continue;
        }
        let mentions: Vec<_> = links.iter().map(|g| g.mention.clone()).collect();
        let s = settings(doc.language);
        let ctx = DocumentContext::new(doc, &mentions, index, &s);
        for link in links {
            let set = generate_candidates(&link.mention, &ctx, index, &s);
            let wanted = match &link.target {
                LinkTarget::KbId(id) => Candidate::Kb(id.clone()),
                LinkTarget::NilCluster(_) => Candidate::Nil,
            };
            let Some(gold) = set.candidates.iter().position(|c| *c == wanted) else {
                skipped += 1;
                continue;
            };
            let inputs = set
                .candidates
                .iter()
                .map(|c| {
                    let sim = c
                        .kb_id()
                        .and_then(|id| ctx.similarities.get(id))
                        .copied()
                        .unwrap_or(0.0);
                    extract_features(&link.mention, c, doc, index, sim)
                })
                .collect::<Result<Vec<_>>>()?;
            examples.push(RankExample {
                candidates: set.candidates,
                inputs,
                gold,
            });
        }
    }
    Ok((examples, skipped))
}

/// Row counts of the six projection tables.
fn projection_rows() -> [usize; 6] {
    [EntityType::ALL.len(), Category::ALL.len(), BINS, BINS, BINS, BINS]
}

const PROJECTION_NAMES: [&str; 6] = ["type", "category", "hot", "edit", "cosine", "translation"];

/// Feedforward scorer applied to every candidate, followed by a softmax over
/// the list.
#[derive(Clone, Debug)]
pub struct Ranker {
    pub config: RankerConfig,
    pub words: Vocab,
    pub params: ParameterStore,
    word_embed: Embedding,
    nil_name: Embedding,
    projections: [Embedding; 6],
    hidden1: DenseLayer,
    hidden2: DenseLayer,
    score: DenseLayer,
}

struct Activations {
    x: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    e: f64,
}

impl Ranker {
    pub fn new(config: RankerConfig, words: Vocab) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(config.seed);
        let mut params = ParameterStore::new();
        let word_embed = Embedding::new(&mut params, "rank.words", words.len(), WORD_DIM, &mut rng)?;
        let nil_name = Embedding::new(&mut params, "rank.nil_name", 1, WORD_DIM, &mut rng)?;
        let rows = projection_rows();
        let mut projections = Vec::with_capacity(6);
        for (name, r) in PROJECTION_NAMES.iter().zip(rows) {
            projections.push(Embedding::new(
                &mut params,
                &format!("rank.proj.{name}"),
                r,
                PROJECTION_DIM,
                &mut rng,
            )?);
        }
        let hidden1 = DenseLayer::new(
            &mut params,
            "rank.hidden1",
            FEATURE_DIM,
            config.hidden1,
            Activation::Sigmoid,
            &mut rng,
        )?;
        let hidden2 = DenseLayer::new(
            &mut params,
            "rank.hidden2",
            config.hidden1,
            config.hidden2,
            Activation::Sigmoid,
            &mut rng,
        )?;
        let score = DenseLayer::new(
            &mut params,
            "rank.score",
            config.hidden2,
            1,
            Activation::Identity,
            &mut rng,
        )?;
        Ok(Ranker {
            config,
            words,
            params,
            word_embed,
            nil_name,
            projections: projections.try_into().expect("six projections"),
            hidden1,
            hidden2,
            score,
        })
    }

    /// Rebuilds a ranker around stored parameter values.
    pub fn from_parts(config: RankerConfig, words: Vocab, params: ParameterStore) -> Result<Self> {
        let mut ranker = Ranker::new(config, words)?;
        if ranker.params.signature() != params.signature() {
            return Err(NeuralError::ShapeMismatch("ranker checkpoint does not match configuration".into()).into());
        }
        ranker.params.copy_values_from(&params)?;
        Ok(ranker)
    }

    /// Word vocabulary of a training set: mention and candidate-name words
    /// seen at least `min_count` times.
    pub fn vocabulary(examples: &[RankExample], min_count: usize) -> Vocab {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for ex in examples {
            if let Some(first) = ex.inputs.first() {
                for w in &first.mention_words {
                    *counts.entry(w).or_default() += 1;
                }
            }
            for input in &ex.inputs {
                for w in input.name_words.iter().flatten() {
                    *counts.entry(w).or_default() += 1;
                }
            }
        }
        Vocab::build(counts.into_iter().filter(|(_, c)| *c >= min_count).map(|(w, _)| w))
    }

    /// The dense 260-dimensional feature vector of one input.
    pub fn features(&self, input: &FeatureInput) -> Vec<f64> {
        self.features_with(self.params.values(), input)
    }

    fn features_with(&self, p: &[Tensor], input: &FeatureInput) -> Vec<f64> {
        let mut x = Vec::with_capacity(FEATURE_DIM);
        let mut sum = vec![0.0; WORD_DIM];
        for w in &input.mention_words {
            add(&mut sum, self.word_embed.lookup(p, self.words.id(w)));
        }
        x.extend_from_slice(&sum);
        match &input.name_words {
            Some(words) => {
                let mut sum = vec![0.0; WORD_DIM];
                for w in words {
                    add(&mut sum, self.word_embed.lookup(p, self.words.id(w)));
                }
                x.extend_from_slice(&sum);
            }
            None => x.extend_from_slice(self.nil_name.lookup(p, 0)),
        }
        for (proj, row) in self.projections.iter().zip(input.projection_rows()) {
            x.extend_from_slice(proj.lookup(p, row));
        }
        x
    }

    fn forward(&self, p: &[Tensor], input: &FeatureInput) -> Activations {
        let x = self.features_with(p, input);
        let a1 = self.hidden1.forward(p, &x);
        let a2 = self.hidden2.forward(p, &a1);
        let e = self.score.forward(p, &a2)[0];
        Activations { x, a1, a2, e }
    }

    /// Unnormalized score of every candidate.
    pub fn scores(&self, inputs: &[FeatureInput]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Err(LinkError::EmptyList);
        }
        Ok(inputs.iter().map(|i| self.forward(self.params.values(), i).e).collect())
    }

    /// Softmax of the scores across the list.
    pub fn posterior(&self, inputs: &[FeatureInput]) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(inputs)?))
    }

    /// Negative log posterior of the gold candidate.
    pub fn loss(&self, example: &RankExample) -> Result<f64> {
        self.loss_with(&self.params, example)
    }

    /// [`Ranker::loss`] evaluated with `params` in place of the ranker's own.
    pub fn loss_with(&self, params: &ParameterStore, example: &RankExample) -> Result<f64> {
        if example.inputs.is_empty() {
            return Err(LinkError::EmptyList);
        }
        let scores: Vec<f64> = example
            .inputs
            .iter()
            .map(|i| self.forward(params.values(), i).e)
            .collect();
        Ok(-log_softmax(&scores)[example.gold])
    }

    /// Adds the gradient of [`Ranker::loss`] to the stored gradients.
    pub fn loss_and_grad(&mut self, example: &RankExample) -> Result<f64> {
        let mut params = std::mem::take(&mut self.params);
        let out = self.accumulate_grad(&mut params, example);
        self.params = params;
        out
    }

    fn accumulate_grad(&self, params: &mut ParameterStore, example: &RankExample) -> Result<f64> {
        if example.inputs.is_empty() {
            return Err(LinkError::EmptyList);
        }
        let (p, g) = params.split_mut();
        let acts: Vec<Activations> = example.inputs.iter().map(|i| self.forward(p, i)).collect();
        let scores: Vec<f64> = acts.iter().map(|a| a.e).collect();
        let log_probs = log_softmax(&scores);
        for (k, (act, input)) in acts.iter().zip(&example.inputs).enumerate() {
            let de = log_probs[k].exp() - if k == example.gold { 1.0 } else { 0.0 };
            let da2 = self.score.backward(p, g, &act.a2, &[act.e], &[de]);
            let da1 = self.hidden2.backward(p, g, &act.a1, &act.a2, &da2);
            let dx = self.hidden1.backward(p, g, &act.x, &act.a1, &da1);
            let (dm, rest) = dx.split_at(WORD_DIM);
            let (dn, mut rest) = rest.split_at(WORD_DIM);
            for w in &input.mention_words {
                self.word_embed.backward(g, self.words.id(w), dm);
            }
            match &input.name_words {
                Some(words) => {
                    for w in words {
                        self.word_embed.backward(g, self.words.id(w), dn);
                    }
                }
                None => self.nil_name.backward(g, 0, dn),
            }
            for (proj, row) in self.projections.iter().zip(input.projection_rows()) {
                let (d, tail) = rest.split_at(PROJECTION_DIM);
                proj.backward(g, row, d);
                rest = tail;
            }
        }
        Ok(-log_probs[example.gold])
    }

    pub fn dataset_loss(&self, set: &[RankExample]) -> Result<f64> {
        set.iter().map(|ex| self.loss(ex)).sum()
    }

    /// Fraction of examples whose gold candidate gets the highest posterior
    /// (ties resolved by [`decide`]).
    pub fn accuracy(&self, set: &[RankExample]) -> Result<f64> {
        if set.is_empty() {
            return Ok(0.0);
        }
        let mut right = 0;
        for ex in set {
            let post = self.posterior(&ex.inputs)?;
            if decide(&ex.candidates, &ex.inputs, &post) == ex.gold {
                right += 1;
            }
        }
        Ok(right as f64 / set.len() as f64)
    }
}

fn add(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankerReport {
    pub initial_loss: f64,
    pub train_losses: Vec<f64>,
    pub dev_losses: Vec<f64>,
    pub best_epoch: usize,
}

/// Mini-batch AdaDelta on the list cross-entropy with early stopping on the
/// dev loss (the training loss when `dev` is empty); the best parameters
/// are returned. Projections and word vectors are trained with the scorer.
pub fn train_ranker(
    train: &[RankExample],
    dev: &[RankExample],
    config: &RankerConfig,
) -> Result<(Ranker, RankerReport)> {
    if train.is_empty() {
        return Err(LinkError::EmptyTrainingSet);
    }
    let words = Ranker::vocabulary(train, config.min_word_count);
    let mut ranker = Ranker::new(config.clone(), words)?;
    let mut state = AdaDeltaState::new(&ranker.params);
    let mut rng = seeded_rng(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = RankerReport {
        initial_loss: ranker.dataset_loss(train)?,
        train_losses: Vec::new(),
        dev_losses: Vec::new(),
        best_epoch: 0,
    };
    let mut best = ranker.params.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            ranker.params.zero_grads();
            for &i in batch {
                epoch_loss += ranker.loss_and_grad(&train[i])?;
            }
            ranker.params.scale_grads(1.0 / batch.len() as f64);
            state.step(&mut ranker.params)?;
        }
        if !epoch_loss.is_finite() {
            return Err(NeuralError::NonFiniteLoss.into());
        }
        let dev_loss = if dev.is_empty() {
            epoch_loss
        } else {
            ranker.dataset_loss(dev)?
        };
        report.train_losses.push(epoch_loss);
        report.dev_losses.push(dev_loss);
        if dev_loss < best_loss {
            best_loss = dev_loss;
            report.best_epoch = epoch;
            best = ranker.params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    ranker.params.copy_values_from(&best)?;
    Ok((ranker, report))
}

/// Element-wise mean of several posteriors over the same list.
pub fn ensemble_posterior(posteriors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = posteriors.first().ok_or(LinkError::IncompatibleModels)?;
    if first.is_empty() {
        return Err(LinkError::EmptyList);
    }
    if posteriors.iter().any(|p| p.len() != first.len()) {
        return Err(LinkError::IncompatibleModels);
    }
    let n = posteriors.len() as f64;
    Ok((0..first.len())
        .map(|k| posteriors.iter().map(|p| p[k]).sum::<f64>() / n)
        .collect())
}

/// Index of the winning candidate: highest posterior, then a KB node over
/// NIL, then the more popular node, then the smaller id.
pub fn decide(candidates: &[Candidate], inputs: &[FeatureInput], posterior: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..candidates.len() {
        let better = match posterior[k].partial_cmp(&posterior[best]) {
            Some(std::cmp::Ordering::Greater) => true,
            Some(std::cmp::Ordering::Less) => false,
            _ => match (&candidates[k], &candidates[best]) {
                (Candidate::Kb(_), Candidate::Nil) => true,
                (Candidate::Nil, _) => false,
                (Candidate::Kb(a), Candidate::Kb(b)) => {
                    (inputs[k].hot, std::cmp::Reverse(a)) > (inputs[best].hot, std::cmp::Reverse(b))
                }
            },
        };
        if better {
            best = k;
        }
    }
    best
}

impl Ranker {
    /// Ensemble decision for one candidate list: the averaged posterior of
    /// all `rankers` and the winning index.
    pub fn link(rankers: &[Ranker], candidates: &[Candidate], inputs: &[FeatureInput]) -> Result<(usize, Vec<f64>)> {
        if candidates.is_empty() || candidates.len() != inputs.len() {
            return Err(LinkError::EmptyList);
        }
        let posteriors = rankers
            .iter()
            .map(|r| r.posterior(inputs))
            .collect::<Result<Vec<_>>>()?;
        let mean = ensemble_posterior(&posteriors)?;
        Ok((decide(candidates, inputs, &mean), mean))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(edit: usize, nil: bool) -> FeatureInput {
        FeatureInput {
            mention_words: vec!["bush".into()],
            name_words: (!nil).then(|| vec!["george".into(), "bush".into()]),
            entity_type: 0,
            category: 0,
            hot: 3,
            edit,
            cosine: 0,
            translation: 0,
        }
    }

    fn ranker(seed: u64) -> Ranker {
        let config = RankerConfig {
            seed,
            ..RankerConfig::default()
        };
        Ranker::new(config, Vocab::build(["bush", "george"])).unwrap()
    }

    #[test]
    fn posterior_is_a_distribution() {
        let r = ranker(3);
        assert_eq!(r.posterior(&[input(0, true)]).unwrap(), vec![1.0]);
        let same = vec![input(2, false); 4];
        for p in r.posterior(&same).unwrap() {
            assert!((p - 0.25).abs() < 1e-12);
        }
        assert!(matches!(r.posterior(&[]), Err(LinkError::EmptyList)));
        assert_eq!(r.features(&input(0, false)).len(), 260);
    }

    #[test]
    fn decision_tie_breaks() {
        let cands = vec![Candidate::Nil, Candidate::Kb("b".into()), Candidate::Kb("a".into())];
        let inputs = vec![input(0, true), input(0, false), input(0, false)];
        assert_eq!(decide(&cands, &inputs, &[1.0 / 3.0; 3]), 2);
        let mut hot = inputs.clone();
        hot[1].hot = 9;
        assert_eq!(decide(&cands, &hot, &[1.0 / 3.0; 3]), 1);
        assert_eq!(decide(&cands, &inputs, &[0.5, 0.25, 0.25]), 0);
    }

    #[test]
    fn ensemble_of_copies_matches_single_model() {
        let r = ranker(5);
        let cands = vec![Candidate::Kb("a".into()), Candidate::Kb("b".into()), Candidate::Nil];
        let inputs = vec![input(0, false), input(4, false), input(9, true)];
        let (one, p1) = Ranker::link(std::slice::from_ref(&r), &cands, &inputs).unwrap();
        let (five, p5) = Ranker::link(&vec![r; 5], &cands, &inputs).unwrap();
        assert_eq!(one, five);
        for (a, b) in p1.iter().zip(&p5) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let examples: Vec<RankExample> = (0..24)
            .map(|i| {
                let gold = i % 3;
                let inputs = (0..3).map(|k| input(if k == gold { 0 } else { 5 }, false)).collect();
                RankExample {
                    candidates: (0..3).map(|k| Candidate::Kb(format!("m{k}"))).collect(),
                    inputs,
                    gold,
                }
            })
            .collect();
        let config = RankerConfig {
            max_epochs: 5,
            min_word_count: 1,
            ..RankerConfig::default()
        };
        let (a, report) = train_ranker(&examples, &[], &config).unwrap();
        assert!(report.train_losses[0] < report.initial_loss);
        let (b, _) = train_ranker(&examples, &[], &config).unwrap();
        assert_eq!(a.params.values(), b.params.values());
        assert!(matches!(
            train_ranker(&[], &[], &config),
            Err(LinkError::EmptyTrainingSet)
        ));
    }
}
