//! CBOW word2vec with negative sampling, trained on transcripts.

use crate::embeddings::{EmbeddingTable, Method, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, sigmoid, Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    /// Context radius on each side of the centre word.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Learning rate decays linearly from `lr` to `min_lr` over training.
    pub lr: f64,
    pub min_lr: f64,
    pub unigram_power: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 32,
            window: 2,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            min_lr: 1e-4,
            unigram_power: 0.75,
            seed: 42,
        }
    }
}

impl CbowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument(
                "dim, window, negatives and epochs must all be at least 1".into(),
            ));
        }
        if !(self.lr >= 0.0 && self.min_lr >= 0.0 && self.unigram_power >= 0.0) {
            return Err(Error::InvalidArgument("rates and power must be non-negative".into()));
        }
        Ok(())
    }
}

/// Noise distribution `count^power`; reserved ids get zero mass.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramTable {
    cumulative: Vec<f64>,
}

impl UnigramTable {
    pub fn new(vocab: &Vocabulary, power: f64) -> Result<Self> {
        let weights = (0..vocab.len()).map(|id| {
            if Vocabulary::is_reserved(id) || vocab.count(id) == 0 {
                0.0
            } else {
                (vocab.count(id) as f64).powf(power)
            }
        });
        Self::from_weights(weights)
    }

    pub fn from_weights(weights: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::InvalidArgument("noise distribution has no mass".into()));
        }
        Ok(UnigramTable { cumulative })
    }

    pub fn probability(&self, id: usize) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let prev = if id == 0 { 0.0 } else { self.cumulative[id - 1] };
        (self.cumulative[id] - prev) / total
    }
}

/// Draw a word id with probability proportional to its table weight.
pub fn negative_sample(table: &UnigramTable, rng: &mut Rng) -> usize {
    let total = *table.cumulative.last().unwrap();
    let u = rng.next_f64() * total;
    // first index whose cumulative weight exceeds u; zero-mass ids are never hit
    table.cumulative.partition_point(|&c| c <= u).min(table.cumulative.len() - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbowParams {
    /// Context ("input") vectors, one row per vocabulary id.
    pub input: Matrix,
    /// Prediction ("output") vectors.
    pub output: Matrix,
}

impl CbowParams {
    /// word2vec initialisation: inputs uniform in `±0.5/dim`, outputs zero.
    pub fn init(vocab_size: usize, dim: usize, rng: &mut Rng) -> Self {
        let data = (0..vocab_size * dim).map(|_| (rng.next_f64() - 0.5) / dim as f64).collect();
        CbowParams {
            input: Matrix::from_vec(vocab_size, dim, data).unwrap(),
            output: Matrix::zeros(vocab_size, dim),
        }
    }
}

fn context_mean(params: &CbowParams, context: &[usize]) -> Vec<f64> {
    let mut h = vec![0.0; params.input.cols()];
    for &c in context {
        axpy(1.0, params.input.row(c), &mut h);
    }
    h.iter_mut().for_each(|x| *x /= context.len() as f64);
    h
}

/// `−log σ(u_centre·h) − Σ_n log σ(−u_n·h)` with `h` the mean context vector.
pub fn cbow_loss(params: &CbowParams, center: usize, context: &[usize], negatives: &[usize]) -> f64 {
    let h = context_mean(params, context);
    let log_sig = |x: f64| -(-x).exp().ln_1p();
    let mut loss = -log_sig(dot(params.output.row(center), &h));
    for &n in negatives {
        loss -= log_sig(-dot(params.output.row(n), &h));
    }
    loss
}

/// One gradient step on [`cbow_loss`]; returns the loss before the step.
/// Every gradient is taken at the pre-step parameters, and each context
/// vector receives the exact gradient of the mean (`∂h/∂v = 1/|context|`).
/// An empty context is skipped and yields `None`.
pub fn cbow_step(params: &mut CbowParams, center: usize, context: &[usize], negatives: &[usize], lr: f64) -> Option<f64> {
    if context.is_empty() {
        return None;
    }
    let loss = cbow_loss(params, center, context, negatives);
    let h = context_mean(params, context);
    let mut dh = vec![0.0; h.len()];
    let mut updates: Vec<(usize, f64)> = Vec::with_capacity(negatives.len() + 1);
    for (id, label) in std::iter::once((center, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0))) {
        let g = sigmoid(dot(params.output.row(id), &h)) - label;
        axpy(g, params.output.row(id), &mut dh);
        updates.push((id, g));
    }
    for (id, g) in updates {
        axpy(-lr * g, &h, params.output.row_mut(id));
    }
    let scale = -lr / context.len() as f64;
    for &c in context {
        axpy(scale, &dh, params.input.row_mut(c));
    }
    Some(loss)
}

#[derive(Debug, Clone)]
pub struct CbowOutcome {
    pub table: EmbeddingTable,
    /// Loss of every update, in order.
    pub step_losses: Vec<f64>,
}

/// Train on tokenised sentences. Tokens outside the vocabulary are dropped
/// before windows are formed; windows are truncated at sentence edges.
pub fn train_cbow<S: AsRef<str>>(sentences: &[Vec<S>], vocab: &Vocabulary, config: &CbowConfig) -> Result<CbowOutcome> {
    config.validate()?;
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t.as_ref())).filter(|&id| !Vocabulary::is_reserved(id)).collect())
        .collect();
    let noise = UnigramTable::new(vocab, config.unigram_power)?;
    let mut rng = Rng::new(config.seed);
    let mut params = CbowParams::init(vocab.len(), config.dim, &mut rng);
    let total = (config.epochs * encoded.iter().map(Vec::len).sum::<usize>()).max(1);
    let mut done = 0usize;
    let mut step_losses = Vec::new();
    let mut negatives = Vec::with_capacity(config.negatives);
    let mut context = Vec::with_capacity(2 * config.window);
    for _ in 0..config.epochs {
        for sent in &encoded {
            for (i, &center) in sent.iter().enumerate() {
                let lr = config.lr - (config.lr - config.min_lr) * done as f64 / total as f64;
                done += 1;
                context.clear();
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window + 1).min(sent.len());
                context.extend((lo..hi).filter(|&j| j != i).map(|j| sent[j]));
                negatives.clear();
                while negatives.len() < config.negatives {
                    let n = negative_sample(&noise, &mut rng);
                    if n != center {
                        negatives.push(n);
                    } else if noise.probability(center) == 1.0 {
                        break;
                    }
                }
                if let Some(loss) = cbow_step(&mut params, center, &context, &negatives, lr) {
                    step_losses.push(loss);
                }
            }
        }
    }
    if !params.input.is_finite() {
        return Err(Error::Diverged("CBOW embeddings became non-finite".into()));
    }
    let mut table = EmbeddingTable::new(Method::Cbow, config.dim);
    for (id, w) in vocab.content_words() {
        table.insert(w, params.input.row(id).to_vec())?;
    }
    Ok(CbowOutcome { table, step_losses })
}
