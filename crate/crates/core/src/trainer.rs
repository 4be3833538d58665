//! Teacher-forced training of the acoustic-to-word model and recognition
//! metrics.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::a2w::{checkpoint, AcousticFeatureSequence, ModelConfig, ModelParams, Transcript};
use crate::config::{parse_kv, Setting};
use crate::corpus::Corpus;
use crate::embeddings::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::{argmax, RmsPropState, Rng};

/// One training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: AcousticFeatureSequence,
    pub transcript: Transcript,
}

/// Encode a corpus against a vocabulary (out-of-vocabulary words map to the
/// unknown token).
pub fn examples(corpus: &Corpus, vocab: &Vocabulary) -> Vec<Example> {
    corpus
        .utterances
        .iter()
        .map(|u| Example {
            features: u.features.clone(),
            transcript: Transcript::new(vocab.encode(&u.tokens)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    /// Global gradient-norm clip threshold.
    pub clip_norm: f64,
    /// Seeds both initialisation and the per-epoch shuffles.
    pub seed: u64,
    /// Written after every epoch when set.
    pub checkpoint: Option<PathBuf>,
    /// `1` gives per-utterance updates. Larger values evaluate that many
    /// utterance gradients in parallel and apply their sum as one update,
    /// which changes the optimisation trajectory.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            learning_rate: 1e-3,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            clip_norm: 5.0,
            seed: 42,
            checkpoint: None,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub const KEYS: [&'static str; 8] = [
        "epochs",
        "lr",
        "rms_decay",
        "rms_epsilon",
        "clip",
        "seed",
        "checkpoint",
        "threads",
    ];

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rms_decay) || !(self.rms_epsilon > 0.0) {
            return Err(Error::InvalidArgument("rms_decay must be in [0, 1) and rms_epsilon > 0".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidArgument("clip threshold must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Apply settings over `self`; unknown keys are rejected.
    pub fn apply(&mut self, settings: &[Setting]) -> Result<()> {
        for s in settings {
            match s.key.as_str() {
                "epochs" => self.epochs = s.parse()?,
                "lr" => self.learning_rate = s.parse()?,
                "rms_decay" => self.rms_decay = s.parse()?,
                "rms_epsilon" => self.rms_epsilon = s.parse()?,
                "clip" => self.clip_norm = s.parse()?,
                "seed" => self.seed = s.parse()?,
                "checkpoint" => self.checkpoint = Some(PathBuf::from(&s.value)),
                "threads" => self.threads = s.parse()?,
                other => return Err(Error::format_at(s.line, format!("unknown key {other:?}"))),
            }
        }
        self.validate()
    }

    /// Defaults overridden by a `key = value` text.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        c.apply(&parse_kv(text)?)?;
        Ok(c)
    }
}

/// Scale `grad` so its global norm is at most `threshold`; returns the norm
/// before clipping.
pub fn clip_global_norm(grad: &mut ModelParams, threshold: f64) -> f64 {
    let norm = grad.global_norm();
    if norm > threshold {
        grad.scale(threshold / norm);
    }
    norm
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn train(data: &[Example], model: ModelConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(data, model, config, None, |_, _| {})
}

/// Training loop. `vocab`, when given, is stored in per-epoch checkpoints;
/// `on_epoch(epoch, mean_loss)` is called after each epoch.
pub fn train_with(
    data: &[Example],
    model: ModelConfig,
    config: &TrainConfig,
    vocab: Option<&Vocabulary>,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    train_from(data, ModelParams::init(model, config.seed)?, config, vocab, on_epoch)
}

/// [`train_with`] starting from given parameters.
pub fn train_from(
    data: &[Example],
    mut params: ModelParams,
    config: &TrainConfig,
    vocab: Option<&Vocabulary>,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty corpus".into()));
    }
    let mut opt: Vec<RmsPropState> = params
        .tensors()
        .iter()
        .map(|t| RmsPropState::new(t.data().len(), config.rms_decay, config.rms_epsilon))
        .collect();
    let mut rng = Rng::new(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    let diverged = |epoch: usize, utt: usize| {
        Error::Diverged(format!("non-finite loss or gradient in epoch {epoch} at utterance {utt}"))
    };
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(config.threads) {
            let (loss, mut grad) = if batch.len() == 1 {
                let ex = &data[batch[0]];
                params
                    .loss_and_grad(&ex.features, &ex.transcript)
                    .map_err(|e| match e {
                        Error::NonFinite(_) => diverged(epoch, ex.features.utterance_id),
                        e => e,
                    })?
            } else {
                let parts = batch
                    .par_iter()
                    .map(|&i| params.loss_and_grad(&data[i].features, &data[i].transcript))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| match e {
                        Error::NonFinite(_) => diverged(epoch, data[batch[0]].features.utterance_id),
                        e => e,
                    })?;
                // summed in batch order so the result does not depend on scheduling
                let mut it = parts.into_iter();
                let (mut loss, mut grad) = it.next().unwrap();
                for (l, g) in it {
                    loss += l;
                    grad.accumulate(&g)?;
                }
                (loss, grad)
            };
            if !loss.is_finite() || !grad.is_finite() {
                return Err(diverged(epoch, data[batch[0]].features.utterance_id));
            }
            total += loss;
            clip_global_norm(&mut grad, config.clip_norm);
            for ((p, g), st) in params.tensors_mut().into_iter().zip(grad.tensors()).zip(&mut opt) {
                st.apply(p.data_mut(), g.data(), config.learning_rate)?;
            }
        }
        let mean = total / data.len() as f64;
        epoch_losses.push(mean);
        on_epoch(epoch, mean);
        if let (Some(path), Some(v)) = (&config.checkpoint, vocab) {
            checkpoint::save(&params, v, path)?;
        }
    }
    Ok(TrainOutcome { params, epoch_losses })
}

/// Fraction of teacher-forced decoder steps (end marker included) whose
/// argmax logit is the reference token.
pub fn token_accuracy(params: &ModelParams, data: &[Example]) -> Result<f64> {
    let counts = data
        .par_iter()
        .map(|ex| {
            let (logits, _, _) = params.forward_teacher_forced(&ex.features, &ex.transcript)?;
            let hits = ex
                .transcript
                .targets()
                .iter()
                .enumerate()
                .filter(|&(l, &y)| argmax(logits.row(l)) == Some(y))
                .count();
            Ok((hits, logits.rows()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (hits, steps) = counts.iter().fold((0, 0), |(a, b), (h, s)| (a + h, b + s));
    Ok(if steps == 0 { 0.0 } else { hits as f64 / steps as f64 })
}

/// Levenshtein distance between token sequences (unit costs).
pub fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=reference.len()).collect();
    let mut cur = vec![0; reference.len() + 1];
    for (i, h) in hyp.iter().enumerate() {
        cur[0] = i + 1;
        for (j, r) in reference.iter().enumerate() {
            let sub = prev[j] + usize::from(h != r);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[reference.len()]
}

/// Word error rate: edit distance over reference length.
pub fn wer<T: PartialEq>(hyp: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::InvalidArgument("WER of an empty reference is undefined".into()));
    }
    Ok(edit_distance(hyp, reference) as f64 / reference.len() as f64)
}

/// Corpus WER of greedy decoding: total edits over total reference words.
/// Decoding is capped at one word per encoder frame.
pub fn corpus_wer(params: &ModelParams, data: &[Example]) -> Result<f64> {
    let s = params.config.subsample_factor();
    let counts = data
        .par_iter()
        .map(|ex| {
            let cap = ex.features.frames.rows().div_ceil(s).max(1);
            let hyp = params.greedy_decode(&ex.features, cap)?;
            Ok((edit_distance(&hyp, &ex.transcript.ids), ex.transcript.ids.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (edits, words) = counts.iter().fold((0, 0), |(a, b), (e, w)| (a + e, b + w));
    if words == 0 {
        return Err(Error::InvalidArgument("WER of an empty reference is undefined".into()));
    }
    Ok(edits as f64 / words as f64)
}

/// Save then reload a checkpoint.
pub fn checkpoint_roundtrip(params: &ModelParams, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<ModelParams> {
    checkpoint::save(params, vocab, &path)?;
    Ok(checkpoint::load(&path)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::numerics::Rng as SplitMix;
    use proptest::prelude::*;

    fn tiny_model(vocab: usize) -> ModelConfig {
        ModelConfig {
            input_dim: 4,
            enc_hidden: 6,
            enc_layers: 2,
            pyramid_stages: 1,
            dec_hidden: 8,
            embed_dim: 6,
            att_dim: 6,
            loc_kernels: 2,
            loc_width: 3,
            vocab_size: vocab,
        }
    }

    fn example(seed: u64, t: usize, ids: Vec<usize>) -> Example {
        let mut rng = SplitMix::new(seed);
        let data = (0..t * 4).map(|_| rng.gaussian()).collect();
        Example {
            features: AcousticFeatureSequence {
                utterance_id: seed as usize,
                frames: Matrix::from_vec(t, 4, data).unwrap(),
            },
            transcript: Transcript::new(ids),
        }
    }

    #[test]
    fn wer_examples() {
        assert_eq!(wer(&["a", "b"], &["a", "b"]).unwrap(), 0.0);
        assert_eq!(wer::<&str>(&[], &["a", "b", "c", "d"]).unwrap(), 1.0);
        assert_eq!(wer(&["a", "b", "c"], &["a", "x", "c", "d"]).unwrap(), 0.5);
        assert!(wer::<&str>(&["a"], &[]).is_err());
    }

    /// Exhaustive edit-distance oracle: recursion over the three operations.
    fn brute(h: &[u8], r: &[u8]) -> usize {
        match (h, r) {
            ([], _) => r.len(),
            (_, []) => h.len(),
            ([a, hs @ ..], [b, rs @ ..]) => (brute(hs, rs) + usize::from(a != b))
                .min(brute(hs, r) + 1)
                .min(brute(h, rs) + 1),
        }
    }

    proptest! {
        #[test]
        fn edit_distance_matches_recursion(
            h in proptest::collection::vec(0u8..3, 0..7),
            r in proptest::collection::vec(0u8..3, 0..7),
        ) {
            prop_assert_eq!(edit_distance(&h, &r), brute(&h, &r));
            prop_assert_eq!(edit_distance(&h, &r), edit_distance(&r, &h));
            prop_assert_eq!(edit_distance(&r, &r), 0);
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = ModelParams::init(tiny_model(7), 1).unwrap();
        g.scale(100.0);
        let before = clip_global_norm(&mut g, 5.0);
        assert!(before > 5.0);
        assert!(g.global_norm() <= 5.0 + 1e-12);
        let mut small = ModelParams::init(tiny_model(7), 1).unwrap();
        small.scale(1e-3);
        let n = small.global_norm();
        clip_global_norm(&mut small, 5.0);
        assert_eq!(small.global_norm(), n);
    }

    #[test]
    fn overfits_one_utterance() {
        let data = vec![example(3, 12, vec![3, 5, 4])];
        let config = TrainConfig {
            epochs: 300,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let out = train(&data, tiny_model(7), &config).unwrap();
        assert_eq!(token_accuracy(&out.params, &data).unwrap(), 1.0);
        assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0]);
        assert_eq!(corpus_wer(&out.params, &data).unwrap(), 0.0);
    }

    #[test]
    fn first_epoch_loss_near_log_vocab() {
        let v = 30;
        let data: Vec<Example> = (0..20)
            .map(|i| example(i, 10, vec![3 + (i as usize % 20), 4 + (i as usize % 7)]))
            .collect();
        let config = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let out = train(&data, tiny_model(v), &config).unwrap();
        let ln_v = (v as f64).ln();
        assert!((out.epoch_losses[0] - ln_v).abs() < 0.1 * ln_v, "{}", out.epoch_losses[0]);
        let untrained = ModelParams::init(tiny_model(v), 9).unwrap();
        let acc = token_accuracy(&untrained, &data).unwrap();
        assert!(acc < 0.2, "{acc}");
    }

    #[test]
    fn training_is_deterministic() {
        let data: Vec<Example> = (0..4).map(|i| example(i, 8, vec![3, 4])).collect();
        let config = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let a = train(&data, tiny_model(6), &config).unwrap();
        let b = train(&data, tiny_model(6), &config).unwrap();
        assert_eq!(a.params.to_flat(), b.params.to_flat());
        assert_eq!(a.epoch_losses, b.epoch_losses);
        let batched = TrainConfig { threads: 2, ..config };
        let c = train(&data, tiny_model(6), &batched).unwrap();
        let d = train(&data, tiny_model(6), &batched).unwrap();
        assert_eq!(c.params.to_flat(), d.params.to_flat());
    }

    #[test]
    fn divergence_is_reported() {
        let data = vec![example(1, 6, vec![3])];
        let mut params = ModelParams::init(tiny_model(5), 1).unwrap();
        params.output_bias.set(0, 0, f64::INFINITY);
        match train_from(&data, params, &TrainConfig::default(), None, |_, _| {}) {
            Err(Error::Diverged(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_text() {
        let c = TrainConfig::from_kv_text("epochs = 3\nlr = 0.01\nseed=7\n").unwrap();
        assert_eq!((c.epochs, c.learning_rate, c.seed), (3, 0.01, 7));
        assert_eq!(c.clip_norm, 5.0);
        assert!(TrainConfig::from_kv_text("epoch = 3\n").is_err());
        assert!(TrainConfig::from_kv_text("epochs = 0\n").is_err());
        assert!(TrainConfig::from_kv_text("lr = -1\n").is_err());
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let vocab = Vocabulary::build([["a", "b", "c", "d"].as_slice()], 1).unwrap();
        let params = ModelParams::init(tiny_model(vocab.len()), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let back = checkpoint_roundtrip(&params, &vocab, dir.path().join("m.a2wc")).unwrap();
        let bits = |p: &ModelParams| p.to_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&params));
    }
}
