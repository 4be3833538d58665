//! Contextual acoustic word embeddings read out of the attention.
//!
//! Each ground-truth word is tied to the encoder frame its decoder step
//! attends to most; a word's embedding combines the encoder states at those
//! frames over all of its training occurrences.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::a2w::{ModelParams, Transcript};
use crate::corpus::{Span, Utterance};
use crate::embeddings::{EmbeddingTable, Method, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::argmax;

/// Index of the largest attention weight; ties go to the lowest index.
pub fn segment_step(attention_row: &[f64]) -> Result<usize> {
    argmax(attention_row).ok_or_else(|| Error::InvalidArgument("empty attention row".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordOccurrence {
    pub word: usize,
    pub utterance_id: usize,
    /// Decoder step, equal to the token index in the transcript.
    pub step: usize,
    /// Argmax encoder frame.
    pub frame: usize,
    pub alpha: f64,
    /// Encoder state at `frame`.
    pub vector: Vec<f64>,
}

/// Occurrences grouped by word, words in vocabulary-id order and each
/// word's occurrences in collection order (corpus order, then step).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccurrenceSet {
    pub words: Vec<(String, Vec<WordOccurrence>)>,
}

impl OccurrenceSet {
    pub fn get(&self, word: &str) -> Option<&[WordOccurrence]> {
        self.words.iter().find(|(w, _)| w == word).map(|(_, o)| o.as_slice())
    }

    pub fn dim(&self) -> usize {
        self.words
            .iter()
            .flat_map(|(_, o)| o.first())
            .map(|o| o.vector.len())
            .next()
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = &WordOccurrence> {
        self.words.iter().flat_map(|(_, o)| o.iter())
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|(_, o)| o.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Audit dump: `word utt_id step k alpha` lines; `alpha` is printed in
    /// shortest round-trip form.
    pub fn dump_tsv(&self) -> String {
        let mut out = String::new();
        for (w, occ) in &self.words {
            for o in occ {
                writeln!(out, "{w}\t{}\t{}\t{}\t{}", o.utterance_id, o.step, o.frame, o.alpha).unwrap();
            }
        }
        out
    }
}

/// A parsed line of [`OccurrenceSet::dump_tsv`].
#[derive(Debug, Clone, PartialEq)]
pub struct DumpRow {
    pub word: String,
    pub utterance_id: usize,
    pub step: usize,
    pub frame: usize,
    pub alpha: f64,
}

pub fn parse_dump(text: &str) -> Result<Vec<DumpRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::format_at(i + 1, "expected word, utt_id, step, k, alpha");
            let [w, u, s, k, a] = f[..] else { return Err(bad()) };
            Ok(DumpRow {
                word: w.to_string(),
                utterance_id: u.parse().map_err(|_| bad())?,
                step: s.parse().map_err(|_| bad())?,
                frame: k.parse().map_err(|_| bad())?,
                alpha: a.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Run the teacher-forced model over every utterance and record, for each
/// in-vocabulary word token, its argmax frame, weight and encoder state.
/// Start, end and unknown tokens are never recorded.
pub fn collect_occurrences(params: &ModelParams, utterances: &[Utterance], vocab: &Vocabulary) -> Result<OccurrenceSet> {
    let per_utt = utterances
        .par_iter()
        .map(|u| {
            let ids = vocab.encode(&u.tokens);
            let transcript = Transcript::new(ids.clone());
            let (_, att, enc) = params.forward_teacher_forced(&u.features, &transcript)?;
            let mut out = Vec::new();
            for (step, &w) in ids.iter().enumerate() {
                if Vocabulary::is_reserved(w) {
                    continue;
                }
                let row = att.row(step);
                let frame = segment_step(row)?;
                out.push(WordOccurrence {
                    word: w,
                    utterance_id: u.id(),
                    step,
                    frame,
                    alpha: row[frame],
                    vector: enc.states.row(frame).to_vec(),
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grouped: Vec<Vec<WordOccurrence>> = vec![Vec::new(); vocab.len()];
    for o in per_utt.into_iter().flatten() {
        let w = o.word;
        grouped[w].push(o);
    }
    Ok(OccurrenceSet {
        words: grouped
            .into_iter()
            .enumerate()
            .filter(|(_, o)| !o.is_empty())
            .map(|(id, o)| (vocab.word(id).unwrap().to_string(), o))
            .collect(),
    })
}

fn build(occ: &OccurrenceSet, method: Method, combine: impl Fn(&[WordOccurrence]) -> Vec<f64>) -> EmbeddingTable {
    let mut table = EmbeddingTable::new(method, occ.dim());
    for (w, o) in &occ.words {
        if !o.is_empty() {
            table.insert(w.clone(), combine(o)).expect("words are unique and share the dimension");
        }
    }
    table
}

fn weighted_sum(occ: &[WordOccurrence], weight: impl Fn(&WordOccurrence) -> f64, divisor: f64) -> Vec<f64> {
    let mut acc = vec![0.0; occ[0].vector.len()];
    for o in occ {
        let a = weight(o);
        for (x, v) in acc.iter_mut().zip(&o.vector) {
            *x += a * v;
        }
    }
    acc.iter_mut().for_each(|x| *x /= divisor);
    acc
}

/// Unweighted mean of the argmax-frame states.
pub fn build_uavg(occ: &OccurrenceSet) -> EmbeddingTable {
    build(occ, Method::Uavg, |o| weighted_sum(o, |_| 1.0, o.len() as f64))
}

/// Attention-weighted sum of the argmax-frame states divided by the number
/// of occurrences.
pub fn build_cawe_w(occ: &OccurrenceSet) -> EmbeddingTable {
    build_cawe_w_with(occ, false)
}

/// [`build_cawe_w`], optionally dividing by the sum of the weights instead
/// of the occurrence count.
pub fn build_cawe_w_with(occ: &OccurrenceSet, normalize_by_alpha: bool) -> EmbeddingTable {
    build(occ, Method::CaweW, |o| {
        let div = if normalize_by_alpha {
            o.iter().map(|x| x.alpha).sum()
        } else {
            o.len() as f64
        };
        weighted_sum(o, |x| x.alpha, div)
    })
}

/// State of the single occurrence with the highest weight; the earliest
/// collected wins ties.
pub fn build_cawe_m(occ: &OccurrenceSet) -> EmbeddingTable {
    build(occ, Method::CaweM, |o| {
        let mut best = &o[0];
        for x in &o[1..] {
            if x.alpha > best.alpha {
                best = x;
            }
        }
        best.vector.clone()
    })
}

pub fn build_table(occ: &OccurrenceSet, method: Method) -> Result<EmbeddingTable> {
    match method {
        Method::Uavg => Ok(build_uavg(occ)),
        Method::CaweW => Ok(build_cawe_w(occ)),
        Method::CaweM => Ok(build_cawe_m(occ)),
        m => Err(Error::InvalidArgument(format!("{m} is not an attention-derived method"))),
    }
}

/// Raw frames covered by encoder frame `k` at subsampling factor `s`.
pub fn map_encoder_frame_to_input_span(k: usize, s: usize) -> Span {
    Span {
        start: k * s,
        end: (k + 1) * s,
    }
}

/// Fraction of occurrences whose argmax frame, widened by `tolerance`
/// encoder frames on each side, overlaps the token's ground-truth span.
/// Utterances are looked up by id; those without spans are skipped.
pub fn boundary_hit_rate(occ: &OccurrenceSet, utterances: &[Utterance], s: usize, tolerance: usize) -> Result<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for o in occ.iter() {
        let u = utterances
            .iter()
            .find(|u| u.id() == o.utterance_id)
            .ok_or_else(|| Error::InvalidArgument(format!("no utterance {}", o.utterance_id)))?;
        let Some(spans) = &u.spans else { continue };
        let lo = map_encoder_frame_to_input_span(o.frame.saturating_sub(tolerance), s);
        let hi = map_encoder_frame_to_input_span(o.frame + tolerance, s);
        let widened = Span {
            start: lo.start,
            end: hi.end,
        };
        total += 1;
        if widened.overlaps(&spans[o.step]) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument("no occurrences with ground-truth spans".into()));
    }
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn occ(word: usize, alpha: f64, v: &[f64]) -> WordOccurrence {
        WordOccurrence {
            word,
            utterance_id: 0,
            step: 0,
            frame: 0,
            alpha,
            vector: v.to_vec(),
        }
    }

    fn set(words: Vec<(&str, Vec<WordOccurrence>)>) -> OccurrenceSet {
        OccurrenceSet {
            words: words.into_iter().map(|(w, o)| (w.to_string(), o)).collect(),
        }
    }

    #[test]
    fn segment_step_examples() {
        assert_eq!(segment_step(&[0.0, 0.0, 1.0, 0.0]).unwrap(), 2);
        assert_eq!(segment_step(&[0.5, 0.5]).unwrap(), 0);
        assert!(segment_step(&[]).is_err());
        let mut rng = Rng::new(1);
        for _ in 0..100 {
            let row: Vec<f64> = (0..1 + rng.below(20)).map(|_| (rng.below(5) as f64) / 4.0).collect();
            let mut best = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            assert_eq!(segment_step(&row).unwrap(), best);
        }
    }

    #[test]
    fn table_examples() {
        let one = set(vec![("a", vec![occ(3, 0.7, &[1.0, 2.0])])]);
        assert_eq!(build_uavg(&one).get("a").unwrap(), &[1.0, 2.0]);
        assert_eq!(build_cawe_m(&one).get("a").unwrap(), &[1.0, 2.0]);

        let two = set(vec![("a", vec![occ(3, 0.8, &[1.0, 0.0]), occ(3, 0.4, &[0.0, 1.0])])]);
        assert_eq!(build_uavg(&two).get("a").unwrap(), &[0.5, 0.5]);
        let w = build_cawe_w(&two);
        let v = w.get("a").unwrap();
        assert!((v[0] - 0.4).abs() < 1e-15 && (v[1] - 0.2).abs() < 1e-15);
        let n = build_cawe_w_with(&two, true);
        let v = n.get("a").unwrap();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-15 && (v[1] - 1.0 / 3.0).abs() < 1e-15);

        let m = set(vec![("a", vec![occ(3, 0.3, &[1.0]), occ(3, 0.9, &[2.0]), occ(3, 0.9, &[3.0])])]);
        assert_eq!(build_cawe_m(&m).get("a").unwrap(), &[2.0]);
        assert_eq!(build_cawe_m(&m).method(), Method::CaweM);
    }

    fn random_set(rng: &mut Rng, alpha_one: bool) -> OccurrenceSet {
        let words = (0..5)
            .map(|w| {
                let o = (0..1 + rng.below(10))
                    .map(|_| {
                        let v: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
                        let a = if alpha_one { 1.0 } else { 0.05 + 0.95 * rng.next_f64() };
                        occ(w + 3, a, &v)
                    })
                    .collect();
                (format!("w{w}"), o)
            })
            .collect();
        OccurrenceSet { words }
    }

    #[test]
    fn tables_match_brute_force() {
        let mut rng = Rng::new(8);
        for _ in 0..20 {
            let s = random_set(&mut rng, false);
            let (u, w, m) = (build_uavg(&s), build_cawe_w(&s), build_cawe_m(&s));
            for (word, o) in &s.words {
                for d in 0..4 {
                    let mean: f64 = o.iter().map(|x| x.vector[d]).sum::<f64>() / o.len() as f64;
                    let wsum: f64 = o.iter().map(|x| x.alpha * x.vector[d]).sum::<f64>() / o.len() as f64;
                    assert!((u.get(word).unwrap()[d] - mean).abs() < 1e-12);
                    assert!((w.get(word).unwrap()[d] - wsum).abs() < 1e-12);
                }
                let max = o.iter().map(|x| x.alpha).fold(f64::MIN, f64::max);
                let first = o.iter().find(|x| x.alpha == max).unwrap();
                assert_eq!(m.get(word).unwrap(), first.vector.as_slice());
            }
            let ones = random_set(&mut rng, true);
            let (u, w) = (build_uavg(&ones), build_cawe_w(&ones));
            for (word, _) in &ones.words {
                for (a, b) in u.get(word).unwrap().iter().zip(w.get(word).unwrap()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_alpha_scales_uavg() {
        let mut rng = Rng::new(2);
        let mut s = random_set(&mut rng, true);
        s.words.iter_mut().flat_map(|(_, o)| o.iter_mut()).for_each(|o| o.alpha = 0.25);
        let (u, w) = (build_uavg(&s), build_cawe_w(&s));
        for (word, uv) in u.iter() {
            for (a, b) in uv.iter().zip(w.get(word).unwrap()) {
                assert!((0.25 * a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn span_mapping() {
        assert_eq!(map_encoder_frame_to_input_span(0, 2), Span { start: 0, end: 2 });
        assert_eq!(map_encoder_frame_to_input_span(3, 2), Span { start: 6, end: 8 });
        assert_eq!(map_encoder_frame_to_input_span(5, 1), Span { start: 5, end: 6 });
    }

    #[test]
    fn dump_roundtrip() {
        let mut rng = Rng::new(3);
        let s = random_set(&mut rng, false);
        let rows = parse_dump(&s.dump_tsv()).unwrap();
        assert_eq!(rows.len(), s.len());
        for (r, o) in rows.iter().zip(s.iter()) {
            assert_eq!(r.alpha, o.alpha);
            assert_eq!(r.frame, o.frame);
        }
        assert!(parse_dump("a\t1\t2\n").is_err());
    }
}
