//! Binary checkpoint format.
//!
//! ```text
//! "A2WC"                magic
//! u32                   format version (1)
//! u32 × 10              input_dim, enc_hidden, enc_layers, pyramid_stages,
//!                       dec_hidden, embed_dim, att_dim, loc_kernels,
//!                       loc_width, vocab_size
//! u64                   parameter count
//! f64 × count           parameters in `ModelParams::tensors` order
//! u64                   vocabulary min_count
//! u32                   vocabulary size (must equal vocab_size)
//! per word: u32 byte length, UTF-8 bytes, u64 count
//! ```
//!
//! All integers and reals are little-endian.

use std::fs;
use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::embeddings::Vocabulary;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"A2WC";
pub const VERSION: u32 = 1;

pub fn to_bytes(params: &ModelParams, vocab: &Vocabulary) -> Result<Vec<u8>> {
    let c = &params.config;
    if vocab.len() != c.vocab_size {
        return Err(Error::Shape(format!(
            "vocabulary has {} entries, model expects {}",
            vocab.len(),
            c.vocab_size
        )));
    }
    let mut out = Vec::with_capacity(64 + 8 * params.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in dims(c) {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.num_params() as u64).to_le_bytes());
    for m in params.tensors() {
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&vocab.min_count().to_le_bytes());
    out.extend_from_slice(&(vocab.len() as u32).to_le_bytes());
    for (w, count) in vocab.entries() {
        out.extend_from_slice(&(w.len() as u32).to_le_bytes());
        out.extend_from_slice(w.as_bytes());
        out.extend_from_slice(&count.to_le_bytes());
    }
    Ok(out)
}

fn dims(c: &ModelConfig) -> [usize; 10] {
    [
        c.input_dim,
        c.enc_hidden,
        c.enc_layers,
        c.pyramid_stages,
        c.dec_hidden,
        c.embed_dim,
        c.att_dim,
        c.loc_kernels,
        c.loc_width,
        c.vocab_size,
    ]
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(format!(
                "truncated checkpoint while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<(ModelParams, Vocabulary)> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let mut d = [0usize; 10];
    for v in d.iter_mut() {
        *v = r.u32("dimensions")? as usize;
    }
    let config = ModelConfig {
        input_dim: d[0],
        enc_hidden: d[1],
        enc_layers: d[2],
        pyramid_stages: d[3],
        dec_hidden: d[4],
        embed_dim: d[5],
        att_dim: d[6],
        loc_kernels: d[7],
        loc_width: d[8],
        vocab_size: d[9],
    };
    config
        .validate()
        .map_err(|e| Error::format(format!("bad dimensions header: {e}")))?;
    let mut params = ModelParams::zeros(config);
    let count = r.u64("parameter count")?;
    if count != params.num_params() as u64 {
        return Err(Error::format(format!(
            "dimensions header implies {} parameters, file declares {count}",
            params.num_params()
        )));
    }
    let raw = r.take(8 * count as usize, "parameters")?;
    let flat: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    params.set_flat(&flat)?;
    if !params.is_finite() {
        return Err(Error::format("checkpoint contains non-finite parameters"));
    }

    let min_count = r.u64("vocabulary min_count")?;
    let n = r.u32("vocabulary size")? as usize;
    if n != config.vocab_size {
        return Err(Error::format(format!(
            "vocabulary has {n} entries, dimensions header says {}",
            config.vocab_size
        )));
    }
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let len = r.u32("word length")? as usize;
        let bytes = r.take(len, "word")?;
        let word = std::str::from_utf8(bytes)
            .map_err(|_| Error::format("vocabulary word is not UTF-8"))?
            .to_string();
        let c = r.u64("word count")?;
        entries.push((word, c));
    }
    if r.pos != buf.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after checkpoint",
            buf.len() - r.pos
        )));
    }
    Ok((params, Vocabulary::from_entries(entries, min_count)))
}

pub fn save(params: &ModelParams, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(params, vocab)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(ModelParams, Vocabulary)> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&buf).map_err(|e| e.with_path(path))
}
