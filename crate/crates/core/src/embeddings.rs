//! Vocabulary construction, embedding tables and word2vec text persistence.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const SOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
pub const RESERVED: [&str; 3] = ["<s>", "</s>", "<unk>"];

pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Word ↔ id map. Ids are dense from 0; the reserved tokens occupy 0..3 and
/// the remaining words are ordered by descending count, then by word.
/// Tokens are case-sensitive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    pub fn build<'a, I, S>(transcripts: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        if min_count == 0 {
            return Err(Error::InvalidArgument("min_count must be at least 1".into()));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut any = false;
        for tokens in transcripts {
            any = true;
            for t in tokens {
                *counts.entry(t.as_ref()).or_default() += 1;
            }
        }
        if !any {
            return Err(Error::InvalidArgument("empty transcript set".into()));
        }
        let mut kept: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && !RESERVED.contains(w))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let entries = RESERVED
            .iter()
            .map(|w| (w.to_string(), 0))
            .chain(kept.into_iter().map(|(w, c)| (w.to_string(), c)));
        Ok(Self::from_entries(entries, min_count))
    }

    /// Rebuild from `(word, count)` pairs already in id order, reserved
    /// tokens included.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, u64)>, min_count: u64) -> Self {
        let mut words = Vec::new();
        let mut counts = Vec::new();
        let mut index = HashMap::new();
        for (w, c) in entries {
            index.insert(w.clone(), words.len());
            words.push(w);
            counts.push(c);
        }
        Vocabulary {
            words,
            counts,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED.len()
    }

    /// Map tokens to ids; out-of-vocabulary tokens become `UNK`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    /// `(word, count)` pairs in id order, reserved tokens included.
    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(String::as_str).zip(self.counts.iter().copied())
    }

    /// Non-reserved words with their ids.
    pub fn content_words(&self) -> impl Iterator<Item = (usize, &str)> {
        self.words
            .iter()
            .enumerate()
            .skip(RESERVED.len())
            .map(|(i, w)| (i, w.as_str()))
    }
}

/// How an embedding table was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Uavg,
    CaweW,
    CaweM,
    Cbow,
    Concat,
}

impl Method {
    /// Column order used in comparison reports.
    pub const ALL: [Method; 5] = [
        Method::Uavg,
        Method::CaweW,
        Method::CaweM,
        Method::Cbow,
        Method::Concat,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Uavg => "U-AVG",
            Method::CaweW => "CAWE-W",
            Method::CaweM => "CAWE-M",
            Method::Cbow => "CBOW",
            Method::Concat => "CONCAT",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uavg" | "u-avg" => Ok(Method::Uavg),
            "cawe-w" | "cawew" => Ok(Method::CaweW),
            "cawe-m" | "cawem" => Ok(Method::CaweM),
            "cbow" => Ok(Method::Cbow),
            "concat" => Ok(Method::Concat),
            _ => Err(Error::InvalidArgument(format!("unknown embedding method {s:?}"))),
        }
    }
}

/// Word → vector map with a fixed dimension. Iteration follows insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    method: Method,
    dim: usize,
    words: Vec<String>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(method: Method, dim: usize) -> Self {
        EmbeddingTable {
            method,
            dim,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "vector for {word:?} has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(&word) {
            return Err(Error::InvalidArgument(format!("duplicate word {word:?}")));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn set_method(&mut self, method: Method) {
        self.method = method;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Exact, case-sensitive lookup. `None` means out of vocabulary.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index.get(word).map(|&i| self.vectors[i].as_slice())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.words
            .iter()
            .map(String::as_str)
            .zip(self.vectors.iter().map(Vec::as_slice))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (w, v) in self.iter() {
            out.push_str(w);
            for x in v {
                out.push(' ');
                out.push_str(&format_sig6(*x));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, method: Method) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format_at(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match fields.as_slice() {
            [v, d] => (
                v.parse::<usize>()
                    .map_err(|_| Error::format_at(1, format!("bad word count {v:?}")))?,
                d.parse::<usize>()
                    .map_err(|_| Error::format_at(1, format!("bad dimension {d:?}")))?,
            ),
            _ => return Err(Error::format_at(1, "header must be \"V D\"")),
        };
        if dim == 0 {
            return Err(Error::format_at(1, "dimension must be positive"));
        }
        let mut table = EmbeddingTable::new(method, dim);
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap_or_default();
            let values = parts
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::format_at(lineno, format!("bad value {s:?}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != dim {
                return Err(Error::format_at(
                    lineno,
                    format!("expected {dim} values for {word:?}, found {}", values.len()),
                ));
            }
            if table.contains(word) {
                return Err(Error::format_at(lineno, format!("duplicate word {word:?}")));
            }
            table.insert(word, values)?;
        }
        if table.len() != count {
            return Err(Error::format_at(
                1,
                format!("header declares {count} words, file has {}", table.len()),
            ));
        }
        Ok(table)
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load_text(path: impl AsRef<Path>, method: Method) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, method).map_err(|e| e.with_path(path))
    }
}

/// Six significant digits, fixed notation for ordinary magnitudes.
///
/// Formatting goes through `{:.5e}` so rounding never changes the digit
/// count, which makes `format(parse(format(x))) == format(x)`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..=15).contains(&exp) {
        return sci;
    }
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = digits.chars().filter(|c| *c != '.').collect();
    let body = if exp >= 0 {
        let split = exp as usize + 1;
        if split >= digits.len() {
            format!("{digits}{}", "0".repeat(split - digits.len()))
        } else {
            format!("{}.{}", &digits[..split], &digits[split..])
        }
    } else {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    };
    format!("{sign}{body}")
}

/// Concatenate two tables over their shared words, in `a`'s order.
pub fn concat_tables(a: &EmbeddingTable, b: &EmbeddingTable) -> Result<EmbeddingTable> {
    let mut out = EmbeddingTable::new(Method::Concat, a.dim() + b.dim());
    for (w, va) in a.iter() {
        if let Some(vb) = b.get(w) {
            let mut v = Vec::with_capacity(out.dim());
            v.extend_from_slice(va);
            v.extend_from_slice(vb);
            out.insert(w, v)?;
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(
            "tables share no words; concatenation is empty".into(),
        ));
    }
    Ok(out)
}
