//! Deterministic synthetic "speech" and the evaluation tasks built on it.
//!
//! Every word owns a short prototype frame sequence. Content words belong to
//! semantic clusters: their prototypes share a cluster component, and an
//! utterance draws most of its words from one topic cluster, so clusters
//! show up both acoustically and distributionally. Marker words carry no
//! cluster and drive the classification and SLU labels.

use crate::a2w::AcousticFeatureSequence;
use crate::corpus::{
    ClassificationTask, Corpus, LabeledSentence, SimilarityPair, SimilarityTask, SluTask, Span,
    Utterance,
};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct WordPrototype {
    pub word: String,
    /// `P × d` canonical frame sequence.
    pub prototype: Matrix,
    pub duration_range: (usize, usize),
    /// Semantic cluster; `None` for marker words.
    pub cluster: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub content_words: usize,
    pub clusters: usize,
    pub markers: usize,
    pub num_utts: usize,
    /// Content words per utterance, inclusive.
    pub len_range: (usize, usize),
    /// Frames per word realisation, inclusive.
    pub duration_range: (usize, usize),
    pub prototype_frames: usize,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    /// Share of prototype variance coming from the word's cluster.
    pub cluster_share: f64,
    /// Probability that a word is drawn from the utterance topic rather than
    /// uniformly from all content words. Zero gives uniform sampling.
    pub topic_prob: f64,
    /// Probability that an utterance has one word replaced by a marker.
    pub marker_prob: f64,
    /// Zipf (1/rank) word weights instead of uniform ones.
    pub zipf: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            content_words: 30,
            clusters: 5,
            markers: 5,
            num_utts: 2000,
            len_range: (3, 8),
            duration_range: (4, 10),
            prototype_frames: 6,
            feature_dim: 16,
            noise_sigma: 0.1,
            cluster_share: 0.5,
            topic_prob: 0.8,
            marker_prob: 0.3,
            zipf: false,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.content_words < 4 {
            return bad("need at least 4 content words");
        }
        if self.clusters == 0 || self.clusters > self.content_words {
            return bad("clusters must be in 1..=content_words");
        }
        if self.num_utts == 0 {
            return bad("num_utts must be positive");
        }
        let (lo, hi) = self.len_range;
        if lo == 0 || lo > hi {
            return bad("len_range must be a non-empty range of positive lengths");
        }
        let (lo, hi) = self.duration_range;
        if lo < 2 || lo > hi {
            return bad("duration_range must be non-empty with minimum at least 2");
        }
        if self.prototype_frames == 0 || self.feature_dim == 0 {
            return bad("prototype frames and feature dim must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        for (name, p) in [
            ("cluster_share", self.cluster_share),
            ("topic_prob", self.topic_prob),
            ("marker_prob", self.marker_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// The word inventory: content words `w00…` then markers `m0…`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub words: Vec<WordPrototype>,
    pub clusters: usize,
}

impl Lexicon {
    pub fn generate(config: &SynthConfig) -> Result<Lexicon> {
        config.validate()?;
        let (p, d) = (config.prototype_frames, config.feature_dim);
        // lexicon randomness is kept apart from utterance sampling
        let mut rng = Rng::new(config.seed ^ 0x6c65_7869_636f_6e00);
        let gauss = |rng: &mut Rng| -> Matrix {
            let data = (0..p * d).map(|_| rng.gaussian()).collect();
            Matrix::from_vec(p, d, data).unwrap()
        };
        let bases: Vec<Matrix> = (0..config.clusters).map(|_| gauss(&mut rng)).collect();
        let (a, b) = (config.cluster_share.sqrt(), (1.0 - config.cluster_share).sqrt());
        let mut words = Vec::new();
        for i in 0..config.content_words {
            let cluster = i * config.clusters / config.content_words;
            let own = gauss(&mut rng);
            let data = bases[cluster]
                .data()
                .iter()
                .zip(own.data())
                .map(|(x, y)| a * x + b * y)
                .collect();
            words.push(WordPrototype {
                word: format!("w{i:02}"),
                prototype: Matrix::from_vec(p, d, data)?,
                duration_range: config.duration_range,
                cluster: Some(cluster),
            });
        }
        for i in 0..config.markers {
            words.push(WordPrototype {
                word: format!("m{i}"),
                prototype: gauss(&mut rng),
                duration_range: config.duration_range,
                cluster: None,
            });
        }
        Ok(Lexicon {
            words,
            clusters: config.clusters,
        })
    }

    pub fn get(&self, word: &str) -> Option<&WordPrototype> {
        self.words.iter().find(|w| w.word == word)
    }

    pub fn cluster_of(&self, word: &str) -> Option<usize> {
        self.get(word).and_then(|w| w.cluster)
    }

    pub fn cluster_members(&self, cluster: usize) -> Vec<&str> {
        self.words
            .iter()
            .filter(|w| w.cluster == Some(cluster))
            .map(|w| w.word.as_str())
            .collect()
    }

    pub fn content_words(&self) -> Vec<&str> {
        self.words
            .iter()
            .filter(|w| w.cluster.is_some())
            .map(|w| w.word.as_str())
            .collect()
    }

    pub fn markers(&self) -> Vec<&str> {
        self.words
            .iter()
            .filter(|w| w.cluster.is_none())
            .map(|w| w.word.as_str())
            .collect()
    }

    /// `word<TAB>cluster` lines, `-` for markers.
    pub fn to_tsv(&self) -> String {
        self.words
            .iter()
            .map(|w| match w.cluster {
                Some(c) => format!("{}\t{c}\n", w.word),
                None => format!("{}\t-\n", w.word),
            })
            .collect()
    }
}

/// Nearest-neighbour time warp of `proto` to `duration` frames.
pub fn time_warp(proto: &Matrix, duration: usize) -> Matrix {
    let p = proto.rows();
    let mut out = Matrix::zeros(duration, proto.cols());
    for t in 0..duration {
        // centre of output frame t mapped onto the prototype axis
        let src = (((2 * t + 1) * p) / (2 * duration)).min(p - 1);
        out.row_mut(t).copy_from_slice(proto.row(src));
    }
    out
}

/// Realise a token sequence as features plus exact spans. Values are rounded
/// to `f32` so that a save/load cycle through the feature format is exact.
pub fn realize(
    lexicon: &Lexicon,
    tokens: &[String],
    noise_sigma: f64,
    utterance_id: usize,
    rng: &mut Rng,
) -> Result<Utterance> {
    let mut rows: Vec<f64> = Vec::new();
    let mut spans = Vec::with_capacity(tokens.len());
    let mut t = 0;
    let mut d = 0;
    for tok in tokens {
        let proto = lexicon
            .get(tok)
            .ok_or_else(|| Error::InvalidArgument(format!("word {tok:?} not in lexicon")))?;
        let (lo, hi) = proto.duration_range;
        let dur = rng.range_inclusive(lo, hi);
        let warped = time_warp(&proto.prototype, dur);
        d = warped.cols();
        for v in warped.data() {
            let x = v + noise_sigma * rng.gaussian();
            rows.push(x as f32 as f64);
        }
        spans.push(Span {
            start: t,
            end: t + dur,
        });
        t += dur;
    }
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("cannot realise an empty utterance".into()));
    }
    Ok(Utterance {
        features: AcousticFeatureSequence {
            utterance_id,
            frames: Matrix::from_vec(t, d, rows)?,
        },
        tokens: tokens.to_vec(),
        spans: Some(spans),
    })
}

fn word_weights(n: usize, zipf: bool) -> Vec<f64> {
    (0..n)
        .map(|r| if zipf { 1.0 / (r + 1) as f64 } else { 1.0 })
        .collect()
}

/// Sample token sequences (no acoustics) following the topic model.
pub fn sample_transcripts(config: &SynthConfig, lexicon: &Lexicon, rng: &mut Rng) -> Vec<Vec<String>> {
    let content = lexicon.content_words();
    let markers = lexicon.markers();
    let members: Vec<Vec<&str>> = (0..lexicon.clusters).map(|c| lexicon.cluster_members(c)).collect();
    let all_w = word_weights(content.len(), config.zipf);
    let member_w: Vec<Vec<f64>> = members.iter().map(|m| word_weights(m.len(), config.zipf)).collect();
    (0..config.num_utts)
        .map(|_| {
            let topic = rng.below(lexicon.clusters);
            let n = rng.range_inclusive(config.len_range.0, config.len_range.1);
            let mut toks: Vec<String> = (0..n)
                .map(|_| {
                    if rng.next_f64() < config.topic_prob {
                        members[topic][rng.weighted(&member_w[topic])].to_string()
                    } else {
                        content[rng.weighted(&all_w)].to_string()
                    }
                })
                .collect();
            if !markers.is_empty() && rng.next_f64() < config.marker_prob {
                let pos = rng.below(n);
                toks[pos] = markers[rng.below(markers.len())].to_string();
            }
            toks
        })
        .collect()
}

/// Generate the lexicon and a corpus; a pure function of the config.
pub fn gen_corpus_with(config: &SynthConfig) -> Result<(Lexicon, Corpus)> {
    let lexicon = Lexicon::generate(config)?;
    let mut rng = Rng::new(config.seed);
    let transcripts = sample_transcripts(config, &lexicon, &mut rng);
    let utterances = transcripts
        .iter()
        .enumerate()
        .map(|(i, toks)| realize(&lexicon, toks, config.noise_sigma, i, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok((lexicon, Corpus { utterances }))
}

/// Default corpus with the given size knobs.
pub fn gen_corpus(
    vocab_size: usize,
    num_utts: usize,
    len_range: (usize, usize),
    noise_sigma: f64,
    seed: u64,
) -> Result<Corpus> {
    let config = SynthConfig {
        content_words: vocab_size,
        clusters: SynthConfig::default().clusters.min(vocab_size / 2).max(1),
        num_utts,
        len_range,
        noise_sigma,
        seed,
        ..SynthConfig::default()
    };
    gen_corpus_with(&config).map(|(_, c)| c)
}

/// Gold similarity: `5 × matched / max(len)`, where `matched` counts tokens
/// pairable by equal cluster (multiset intersection of cluster labels).
/// Words without a cluster never match.
pub fn similarity_gold(lexicon: &Lexicon, a: &[String], b: &[String]) -> f64 {
    let n = a.len().max(b.len());
    if n == 0 {
        return 0.0;
    }
    let hist = |s: &[String]| {
        let mut h = vec![0usize; lexicon.clusters];
        for w in s {
            if let Some(c) = lexicon.cluster_of(w) {
                h[c] += 1;
            }
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    let matched: usize = ha.iter().zip(&hb).map(|(x, y)| x.min(y)).sum();
    5.0 * matched as f64 / n as f64
}

/// Sentence pairs whose gold score is the fraction of cluster-matched words.
///
/// Sentence A draws from one or two clusters. The first `k` words of B share
/// a cluster with the corresponding A word (half the time the same word);
/// the rest come from clusters absent from A. B is then shuffled.
pub fn gen_similarity_task(lexicon: &Lexicon, num_pairs: usize, seed: u64) -> Result<SimilarityTask> {
    if lexicon.clusters < 3 {
        return Err(Error::InvalidArgument(
            "similarity task needs at least 3 clusters".into(),
        ));
    }
    if num_pairs == 0 {
        return Err(Error::InvalidArgument("num_pairs must be positive".into()));
    }
    let mut rng = Rng::new(seed);
    let members: Vec<Vec<&str>> = (0..lexicon.clusters).map(|c| lexicon.cluster_members(c)).collect();
    let pick = |rng: &mut Rng, c: usize| members[c][rng.below(members[c].len())].to_string();
    let mut pairs = Vec::with_capacity(num_pairs);
    for _ in 0..num_pairs {
        let m = [4, 6][rng.below(2)];
        let c1 = rng.below(lexicon.clusters);
        let c2 = if rng.next_f64() < 0.5 {
            c1
        } else {
            (c1 + 1 + rng.below(lexicon.clusters - 1)) % lexicon.clusters
        };
        let a: Vec<String> = (0..m)
            .map(|_| {
                let c = if rng.next_f64() < 0.5 { c1 } else { c2 };
                pick(&mut rng, c)
            })
            .collect();
        let others: Vec<usize> = (0..lexicon.clusters).filter(|&c| c != c1 && c != c2).collect();
        let k = rng.range_inclusive(0, m);
        let mut b: Vec<String> = (0..m)
            .map(|i| {
                if i < k {
                    if rng.next_f64() < 0.5 {
                        a[i].clone()
                    } else {
                        pick(&mut rng, lexicon.cluster_of(&a[i]).unwrap())
                    }
                } else {
                    let c = others[rng.below(others.len())];
                    pick(&mut rng, c)
                }
            })
            .collect();
        rng.shuffle(&mut b);
        let score = similarity_gold(lexicon, &a, &b);
        pairs.push(SimilarityPair { a, b, score });
    }
    Ok(SimilarityTask { pairs })
}

/// Random content-word sentences, each with one marker inserted; the label
/// is the marker's index. With `random_labels` the label is drawn
/// independently of the marker (a chance-level control).
pub fn gen_cls_task(
    lexicon: &Lexicon,
    num_examples: usize,
    random_labels: bool,
    seed: u64,
) -> Result<ClassificationTask> {
    let content = lexicon.content_words();
    let markers = lexicon.markers();
    if markers.len() < 2 {
        return Err(Error::InvalidArgument("classification needs at least 2 markers".into()));
    }
    let mut rng = Rng::new(seed);
    let examples = (0..num_examples)
        .map(|_| {
            let n = rng.range_inclusive(3, 6);
            let mut tokens: Vec<String> = (0..n).map(|_| content[rng.below(content.len())].to_string()).collect();
            let marker = rng.below(markers.len());
            tokens.insert(rng.below(n + 1), markers[marker].to_string());
            let label = if random_labels {
                rng.below(markers.len())
            } else {
                marker
            };
            LabeledSentence {
                tokens,
                pair: None,
                label,
            }
        })
        .collect();
    Ok(ClassificationTask { examples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// A fixed marker word, by marker index.
    Marker(usize),
    /// Any word of the given cluster.
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub intent: &'static str,
    pub slots: Vec<Slot>,
}

pub const SLU_INTENTS: [&str; 5] = ["book", "cancel", "fare", "status", "info"];

/// Five intents. Trigger words are shared between intents, so telling e.g.
/// `book` from `cancel` needs the clusters of the slot fillers.
pub fn slu_templates() -> Vec<Template> {
    use Slot::*;
    let t = |intent, slots| Template { intent, slots };
    vec![
        t("book", vec![Marker(0), Cluster(0), Cluster(1)]),
        t("cancel", vec![Marker(0), Cluster(2), Cluster(3)]),
        t("fare", vec![Marker(1), Cluster(0), Cluster(4)]),
        t("status", vec![Marker(1), Cluster(2), Cluster(1)]),
        t("info", vec![Marker(2), Cluster(3), Cluster(4)]),
    ]
}

/// Realise a template, optionally behind up to `max_lead` random content
/// words.
pub fn realize_template(lexicon: &Lexicon, template: &Template, max_lead: usize, rng: &mut Rng) -> Result<Vec<String>> {
    let content = lexicon.content_words();
    let markers = lexicon.markers();
    let mut out: Vec<String> = (0..rng.range_inclusive(0, max_lead))
        .map(|_| content[rng.below(content.len())].to_string())
        .collect();
    for slot in &template.slots {
        let word = match *slot {
            Slot::Marker(i) => markers.get(i).map(|s| s.to_string()),
            Slot::Cluster(c) => {
                let m = lexicon.cluster_members(c);
                (!m.is_empty()).then(|| m[rng.below(m.len())].to_string())
            }
        };
        out.push(word.ok_or_else(|| {
            Error::InvalidArgument(format!("lexicon cannot realise slot {slot:?}"))
        })?);
    }
    Ok(out)
}

/// Intent dataset from [`slu_templates`]; labels index [`SLU_INTENTS`].
pub fn gen_slu_task(lexicon: &Lexicon, num_examples: usize, seed: u64) -> Result<SluTask> {
    let templates = slu_templates();
    let mut rng = Rng::new(seed);
    let examples = (0..num_examples)
        .map(|_| {
            let label = rng.below(templates.len());
            Ok(LabeledSentence {
                tokens: realize_template(lexicon, &templates[label], 1, &mut rng)?,
                pair: None,
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassificationTask { examples })
}

/// Transcripts in which word pairs `aN`/`bN` are interchangeable: wherever
/// one may occur the other is equally likely. Sentences draw from topics,
/// each topic owning a few plain words `tN_M` and a few pair slots.
/// Returns the transcripts and the interchangeable pairs.
pub fn gen_interchangeable_corpus(
    num_sentences: usize,
    seed: u64,
) -> (Vec<Vec<String>>, Vec<(String, String)>) {
    const TOPICS: usize = 5;
    const PLAIN: usize = 6;
    const PAIRS: usize = 2;
    let mut rng = Rng::new(seed);
    let pairs: Vec<(String, String)> = (0..TOPICS * PAIRS)
        .map(|i| (format!("a{i}"), format!("b{i}")))
        .collect();
    let sentences = (0..num_sentences)
        .map(|_| {
            let topic = rng.below(TOPICS);
            let n = rng.range_inclusive(5, 10);
            (0..n)
                .map(|_| {
                    let slot = rng.below(PLAIN + PAIRS);
                    if slot < PLAIN {
                        format!("t{topic}_{slot}")
                    } else {
                        let (a, b) = &pairs[topic * PAIRS + slot - PLAIN];
                        if rng.next_f64() < 0.5 { a.clone() } else { b.clone() }
                    }
                })
                .collect()
        })
        .collect();
    (sentences, pairs)
}
