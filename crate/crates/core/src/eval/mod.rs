//! Evaluation of word embeddings as features: similarity (Spearman),
//! sentence classification (logistic regression) and intent recognition
//! with a fine-tuned recurrent classifier.

mod logreg;
mod report;
pub mod slu;

pub use logreg::{logreg_loss_grad, train_logreg, LogRegConfig, LogRegModel};
pub use report::{format_report, parse_report_csv, report_csv, ReportTable};

use crate::corpus::{ClassificationTask, LabeledSentence, SimilarityTask};
use crate::embeddings::{EmbeddingTable, Method};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Spearman,
    Accuracy,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Spearman => "spearman",
            Metric::Accuracy => "accuracy",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spearman" => Ok(Metric::Spearman),
            "accuracy" => Ok(Metric::Accuracy),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: String,
    pub metric: Metric,
    pub value: f64,
    pub method: Method,
    /// Short hash of the settings that produced the value.
    pub config_digest: String,
    /// Sentences with no in-vocabulary word (embedded as zero vectors).
    pub all_oov_sentences: usize,
}

/// 64-bit FNV-1a of a settings description, as 16 hex digits.
pub fn digest(settings: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in settings.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding {
    pub vector: Vec<f64>,
    /// Number of tokens found in the table.
    pub in_vocab: usize,
}

/// Mean of the in-vocabulary word vectors; zero when none is found.
pub fn sentence_embedding<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> SentenceEmbedding {
    let mut acc = vec![0.0; table.dim()];
    let mut n = 0;
    for t in tokens {
        if let Some(v) = table.get(t.as_ref()) {
            acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
            n += 1;
        }
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    SentenceEmbedding { vector: acc, in_vocab: n }
}

/// Cosine similarity; zero if either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

/// Ranks from 1, tied values sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs two equal-length samples of size >= 2 (got {} and {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("correlation undefined for a constant sample".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("spearman: length mismatch".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Spearman correlation between gold scores and sentence-embedding cosines.
pub fn eval_similarity(task: &SimilarityTask, table: &EmbeddingTable) -> Result<EvalReport> {
    let mut predicted = Vec::with_capacity(task.pairs.len());
    let mut oov = 0;
    for p in &task.pairs {
        let (a, b) = (sentence_embedding(&p.a, table), sentence_embedding(&p.b, table));
        oov += usize::from(a.in_vocab == 0) + usize::from(b.in_vocab == 0);
        predicted.push(cosine(&a.vector, &b.vector));
    }
    let gold: Vec<f64> = task.pairs.iter().map(|p| p.score).collect();
    Ok(EvalReport {
        task: "similarity".into(),
        metric: Metric::Spearman,
        value: spearman(&predicted, &gold)?,
        method: table.method(),
        config_digest: digest(&format!("sim;pairs={}", task.pairs.len())),
        all_oov_sentences: oov,
    })
}

/// Sentence features: the mean embedding, or `[u, v, |u−v|, u∘v]` for pairs.
pub fn sentence_features(ex: &LabeledSentence, table: &EmbeddingTable) -> (Vec<f64>, usize) {
    let u = sentence_embedding(&ex.tokens, table);
    match &ex.pair {
        None => (u.vector, usize::from(u.in_vocab == 0)),
        Some(b) => {
            let v = sentence_embedding(b, table);
            let oov = usize::from(u.in_vocab == 0) + usize::from(v.in_vocab == 0);
            let mut f = u.vector.clone();
            f.extend_from_slice(&v.vector);
            f.extend(u.vector.iter().zip(&v.vector).map(|(a, b)| (a - b).abs()));
            f.extend(u.vector.iter().zip(&v.vector).map(|(a, b)| a * b));
            (f, oov)
        }
    }
}

/// Deterministic 80/20 split of `0..n` from `seed`.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut idx);
    let cut = (n * 4).div_ceil(5).min(n.saturating_sub(1));
    let test = idx.split_off(cut);
    (idx, test)
}

/// Accuracy of logistic regression on a held-out 20 % split. If a class
/// is missing from the training part, the split is redrawn with the next
/// seed, at most five times.
pub fn eval_classification(
    task: &ClassificationTask,
    table: &EmbeddingTable,
    split_seed: u64,
    config: &LogRegConfig,
) -> Result<EvalReport> {
    let classes = task.num_classes();
    for attempt in 0..5 {
        let seed = split_seed + attempt;
        let (train_idx, test_idx) = split_indices(task.examples.len(), seed);
        let mut present = vec![false; classes];
        train_idx.iter().for_each(|&i| present[task.examples[i].label] = true);
        if present.iter().all(|&p| p) {
            let pick = |idx: &[usize]| ClassificationTask {
                examples: idx.iter().map(|&i| task.examples[i].clone()).collect(),
            };
            let mut r = eval_classification_split(&pick(&train_idx), &pick(&test_idx), table, config)?;
            r.config_digest = digest(&format!("cls;split_seed={seed};{}", config.describe()));
            return Ok(r);
        }
    }
    Err(Error::InvalidArgument(
        "a class is missing from the training split after 5 attempts".into(),
    ))
}

/// Train on one task file and report accuracy on another.
pub fn eval_classification_split(
    train: &ClassificationTask,
    test: &ClassificationTask,
    table: &EmbeddingTable,
    config: &LogRegConfig,
) -> Result<EvalReport> {
    if test.examples.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let mut oov = 0;
    let mut feats = |t: &ClassificationTask| -> (Vec<Vec<f64>>, Vec<usize>) {
        t.examples
            .iter()
            .map(|e| {
                let (f, o) = sentence_features(e, table);
                oov += o;
                (f, e.label)
            })
            .unzip()
    };
    let (xtr, ytr) = feats(train);
    let (xte, yte) = feats(test);
    let classes = train.num_classes().max(test.num_classes());
    let model = train_logreg(&xtr, &ytr, classes, config)?;
    let correct = xte.iter().zip(&yte).filter(|(x, &y)| model.predict(x) == y).count();
    Ok(EvalReport {
        task: "classification".into(),
        metric: Metric::Accuracy,
        value: correct as f64 / yte.len() as f64,
        method: table.method(),
        config_digest: digest(&format!("cls;explicit;{}", config.describe())),
        all_oov_sentences: oov,
    })
}
