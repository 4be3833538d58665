//! Utterance corpora and evaluation task files on disk.
//!
//! A corpus directory holds
//!
//! * `transcripts.txt`: one utterance per line, space-separated tokens; the
//!   line number (from 0) is the utterance id;
//! * `feats/NNNNNN.a2wf`: per-utterance features, `"A2WF"`, u32 version,
//!   u32 T, u32 d, then `T × d` little-endian `f32`;
//! * `spans.txt` (optional): `utt_id token_index start end` lines giving
//!   each token's half-open raw frame range.
//!
//! Task files are UTF-8 TSV: similarity rows are `sentA<TAB>sentB<TAB>score`,
//! classification and SLU rows are `sentence<TAB>label` (or
//! `sentA<TAB>sentB<TAB>label` for sentence-pair tasks).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::a2w::AcousticFeatureSequence;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"A2WF";
pub const FEATURE_VERSION: u32 = 1;

/// Half-open raw frame range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub features: AcousticFeatureSequence,
    pub tokens: Vec<String>,
    /// Ground-truth token spans, when known.
    pub spans: Option<Vec<Span>>,
}

impl Utterance {
    pub fn id(&self) -> usize {
        self.features.utterance_id
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn transcripts(&self) -> impl Iterator<Item = &[String]> {
        self.utterances.iter().map(|u| u.tokens.as_slice())
    }

    /// Split off the last `n` utterances (ids are kept).
    pub fn split_tail(mut self, n: usize) -> (Corpus, Corpus) {
        let keep = self.utterances.len().saturating_sub(n);
        let tail = self.utterances.split_off(keep);
        (self, Corpus { utterances: tail })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let feats = dir.join("feats");
        fs::create_dir_all(&feats).map_err(|e| Error::io(&feats, e))?;
        let mut transcripts = String::new();
        let mut spans = String::new();
        let mut any_spans = false;
        for (i, u) in self.utterances.iter().enumerate() {
            transcripts.push_str(&u.tokens.join(" "));
            transcripts.push('\n');
            if let Some(s) = &u.spans {
                any_spans = true;
                for (k, sp) in s.iter().enumerate() {
                    writeln!(spans, "{i} {k} {} {}", sp.start, sp.end).unwrap();
                }
            }
            let path = feature_path(dir, i);
            fs::write(&path, encode_features(&u.features.frames)).map_err(|e| Error::io(&path, e))?;
        }
        write_file(dir.join("transcripts.txt"), &transcripts)?;
        if any_spans {
            write_file(dir.join("spans.txt"), &spans)?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Corpus> {
        let dir = dir.as_ref();
        let tpath = dir.join("transcripts.txt");
        let text = fs::read_to_string(&tpath).map_err(|e| Error::io(&tpath, e))?;
        let mut utterances = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let tokens: Vec<String> = line.split_whitespace().map(String::from).collect();
            if tokens.is_empty() {
                return Err(Error::format_at(i + 1, "empty transcript").with_path(&tpath));
            }
            let fpath = feature_path(dir, i);
            let bytes = fs::read(&fpath).map_err(|e| Error::io(&fpath, e))?;
            let frames = decode_features(&bytes).map_err(|e| e.with_path(&fpath))?;
            utterances.push(Utterance {
                features: AcousticFeatureSequence {
                    utterance_id: i,
                    frames,
                },
                tokens,
                spans: None,
            });
        }
        let spath = dir.join("spans.txt");
        if spath.exists() {
            let text = fs::read_to_string(&spath).map_err(|e| Error::io(&spath, e))?;
            let mut spans: Vec<Vec<Span>> = vec![Vec::new(); utterances.len()];
            for (i, line) in text.lines().enumerate() {
                let f: Vec<usize> = line
                    .split_whitespace()
                    .map(|x| x.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::format_at(i + 1, "expected four integers").with_path(&spath))?;
                let [utt, tok, start, end] = f[..] else {
                    return Err(Error::format_at(i + 1, "expected four integers").with_path(&spath));
                };
                if utt >= spans.len() || tok != spans[utt].len() || start >= end {
                    return Err(Error::format_at(i + 1, "span out of order or range").with_path(&spath));
                }
                spans[utt].push(Span { start, end });
            }
            for (u, s) in utterances.iter_mut().zip(spans) {
                if s.len() != u.tokens.len() {
                    return Err(Error::format(format!(
                        "utterance {} has {} tokens but {} spans",
                        u.id(),
                        u.tokens.len(),
                        s.len()
                    ))
                    .with_path(&spath));
                }
                u.spans = Some(s);
            }
        }
        Ok(Corpus { utterances })
    }
}

fn write_file(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn feature_path(dir: &Path, id: usize) -> PathBuf {
    dir.join("feats").join(format!("{id:06}.a2wf"))
}

/// Features are stored as `f32`; values round-trip exactly when they are
/// already `f32`-representable.
pub fn encode_features(frames: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * frames.data().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(frames.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(frames.cols() as u32).to_le_bytes());
    for &v in frames.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 16 || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::format("not a feature file (bad magic)"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(Error::format(format!("unsupported feature file version {version}")));
    }
    let (t, d) = (word(8) as usize, word(12) as usize);
    if bytes.len() != 16 + 4 * t * d {
        return Err(Error::format(format!(
            "feature file should hold {t}x{d} values but has {} bytes of data",
            bytes.len() - 16
        )));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(t, d, data)
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilarityTask {
    pub pairs: Vec<SimilarityPair>,
}

impl SimilarityTask {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            writeln!(out, "{}\t{}\t{}", p.a.join(" "), p.b.join(" "), p.score).unwrap();
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [a, b, s] = cols[..] else {
                return Err(Error::format_at(i + 1, "expected sentA<TAB>sentB<TAB>score"));
            };
            let score: f64 = s
                .trim()
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| Error::format_at(i + 1, format!("bad score {s:?}")))?;
            pairs.push(SimilarityPair {
                a: tokens(a),
                b: tokens(b),
                score,
            });
        }
        if pairs.is_empty() {
            return Err(Error::format("similarity task has no pairs"));
        }
        Ok(SimilarityTask { pairs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text).map_err(|e| e.with_path(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref().to_path_buf(), &self.to_tsv())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    /// Second sentence for pair tasks (entailment, paraphrase).
    pub pair: Option<Vec<String>>,
    pub label: usize,
}

/// Sentence classification task; SLU intent files share the format.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationTask {
    pub examples: Vec<LabeledSentence>,
}

pub type SluTask = ClassificationTask;

impl ClassificationTask {
    pub fn num_classes(&self) -> usize {
        self.examples.iter().map(|e| e.label + 1).max().unwrap_or(0)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.examples {
            match &e.pair {
                Some(b) => writeln!(out, "{}\t{}\t{}", e.tokens.join(" "), b.join(" "), e.label),
                None => writeln!(out, "{}\t{}", e.tokens.join(" "), e.label),
            }
            .unwrap();
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut examples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let (a, b, l) = match cols[..] {
                [a, l] => (a, None, l),
                [a, b, l] => (a, Some(b), l),
                _ => return Err(Error::format_at(i + 1, "expected sentence<TAB>label")),
            };
            let label = l
                .trim()
                .parse()
                .map_err(|_| Error::format_at(i + 1, format!("bad label {l:?}")))?;
            examples.push(LabeledSentence {
                tokens: tokens(a),
                pair: b.map(tokens),
                label,
            });
        }
        if examples.is_empty() {
            return Err(Error::format("task has no examples"));
        }
        Ok(ClassificationTask { examples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text).map_err(|e| e.with_path(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref().to_path_buf(), &self.to_tsv())
    }
}
