//! Scalar double-double re-implementation of the teacher-forced loss.
//!
//! Written directly from the model equations with plain index loops and no
//! shared code with the production forward pass, so finite differences of
//! it form an independent check on the analytic gradients. Its precision
//! puts the finite-difference rounding floor far below the gradients being
//! checked.

use super::{ModelParams, Transcript};
use crate::numerics::dd::Dd;
use crate::numerics::Matrix;

struct Tensor {
    cols: usize,
    data: Vec<Dd>,
}

impl Tensor {
    fn at(&self, r: usize, c: usize) -> Dd {
        self.data[r * self.cols + c]
    }
}

fn lstm(
    wx: &Tensor,
    wh: &Tensor,
    b: &Tensor,
    hidden: usize,
    xs: &[Vec<Dd>],
    reverse: bool,
) -> Vec<Vec<Dd>> {
    let mut h = vec![Dd::ZERO; hidden];
    let mut c = vec![Dd::ZERO; hidden];
    let mut out = vec![Vec::new(); xs.len()];
    let order: Vec<usize> = if reverse {
        (0..xs.len()).rev().collect()
    } else {
        (0..xs.len()).collect()
    };
    for t in order {
        let gate = |r: usize| {
            let mut acc = b.at(r, 0);
            for (j, x) in xs[t].iter().enumerate() {
                acc += wx.at(r, j) * *x;
            }
            for (j, hj) in h.iter().enumerate() {
                acc += wh.at(r, j) * *hj;
            }
            acc
        };
        let mut hn = vec![Dd::ZERO; hidden];
        for k in 0..hidden {
            let i = gate(k).sigmoid();
            let f = gate(hidden + k).sigmoid();
            let g = gate(2 * hidden + k).tanh();
            let o = gate(3 * hidden + k).sigmoid();
            c[k] = f * c[k] + i * g;
            hn[k] = o * c[k].tanh();
        }
        h = hn;
        out[t] = h.clone();
    }
    out
}

fn log_sum_exp(v: &[Dd]) -> Dd {
    let m = v.iter().copied().fold(v[0], |a, b| if b.hi > a.hi { b } else { a });
    let mut s = Dd::ZERO;
    for x in v {
        s += (*x - m).exp();
    }
    m + s.ln()
}

/// Loss with optional perturbation `(flat parameter index, delta)`; the
/// perturbed parameter is formed exactly as a double-double sum.
pub(crate) fn reference_loss(
    params: &ModelParams,
    frames: &Matrix,
    transcript: &Transcript,
    perturb: Option<(usize, f64)>,
) -> Dd {
    let cfg = params.config;
    let mut offset = 0;
    let tensors: Vec<Tensor> = params
        .tensors()
        .into_iter()
        .map(|m| {
            let mut data: Vec<Dd> = m.data().iter().map(|&x| Dd::new(x)).collect();
            if let Some((i, delta)) = perturb {
                if (offset..offset + data.len()).contains(&i) {
                    data[i - offset] = Dd::sum(m.data()[i - offset], delta);
                }
            }
            offset += data.len();
            Tensor {
                cols: m.cols(),
                data,
            }
        })
        .collect();

    let he = cfg.enc_hidden;
    let mut xs: Vec<Vec<Dd>> = (0..frames.rows())
        .map(|t| frames.row(t).iter().map(|&x| Dd::new(x)).collect())
        .collect();
    for layer in 0..cfg.enc_layers {
        let base = 6 * layer;
        let f = lstm(&tensors[base], &tensors[base + 1], &tensors[base + 2], he, &xs, false);
        let b = lstm(&tensors[base + 3], &tensors[base + 4], &tensors[base + 5], he, &xs, true);
        let mut out: Vec<Vec<Dd>> = (0..xs.len())
            .map(|t| f[t].iter().chain(&b[t]).copied().collect())
            .collect();
        if layer < cfg.pyramid_stages {
            let mut merged = Vec::new();
            for t in (0..out.len()).step_by(2) {
                let mut v = out[t].clone();
                if t + 1 < out.len() {
                    v.extend_from_slice(&out[t + 1]);
                } else {
                    v.extend(std::iter::repeat_n(Dd::ZERO, 2 * he));
                }
                merged.push(v);
            }
            out = merged;
        }
        xs = out;
    }
    let enc = xs;
    let n = enc.len();
    let hdim = 2 * he;

    let a0 = 6 * cfg.enc_layers;
    let (query, key, location, att_bias, score, kernels) = (
        &tensors[a0],
        &tensors[a0 + 1],
        &tensors[a0 + 2],
        &tensors[a0 + 3],
        &tensors[a0 + 4],
        &tensors[a0 + 5],
    );
    let (dec_wx, dec_wh, dec_b) = (&tensors[a0 + 6], &tensors[a0 + 7], &tensors[a0 + 8]);
    let (embedding, output, output_bias) = (&tensors[a0 + 9], &tensors[a0 + 10], &tensors[a0 + 11]);

    let hd = cfg.dec_hidden;
    let half = (cfg.loc_width / 2) as isize;
    let mut h = vec![Dd::ZERO; hd];
    let mut c = vec![Dd::ZERO; hd];
    let mut ctx = vec![Dd::ZERO; hdim];
    let mut prev = vec![Dd::ONE / Dd::new(n as f64); n];
    let mut total = Dd::ZERO;
    let targets = transcript.targets();
    for (&y_in, &y_out) in transcript.decoder_inputs().iter().zip(&targets) {
        let gate = |r: usize| {
            let mut acc = dec_b.at(r, 0);
            for k in 0..cfg.embed_dim {
                acc += dec_wx.at(r, k) * embedding.at(y_in, k);
            }
            for k in 0..hdim {
                acc += dec_wx.at(r, cfg.embed_dim + k) * ctx[k];
            }
            for k in 0..hd {
                acc += dec_wh.at(r, k) * h[k];
            }
            acc
        };
        let mut hn = vec![Dd::ZERO; hd];
        for k in 0..hd {
            let i = gate(k).sigmoid();
            let f = gate(hd + k).sigmoid();
            let g = gate(2 * hd + k).tanh();
            let o = gate(3 * hd + k).sigmoid();
            c[k] = f * c[k] + i * g;
            hn[k] = o * c[k].tanh();
        }
        h = hn;

        let mut scores = vec![Dd::ZERO; n];
        for (j, sj) in scores.iter_mut().enumerate() {
            let loc: Vec<Dd> = (0..cfg.loc_kernels)
                .map(|fi| {
                    let mut acc = Dd::ZERO;
                    for k in 0..cfg.loc_width {
                        let src = j as isize + k as isize - half;
                        if src >= 0 && (src as usize) < n {
                            acc += kernels.at(fi, k) * prev[src as usize];
                        }
                    }
                    acc
                })
                .collect();
            let mut e = Dd::ZERO;
            for a in 0..cfg.att_dim {
                let mut pre = att_bias.at(a, 0);
                for k in 0..hd {
                    pre += query.at(a, k) * h[k];
                }
                for k in 0..hdim {
                    pre += key.at(a, k) * enc[j][k];
                }
                for (fi, l) in loc.iter().enumerate() {
                    pre += location.at(a, fi) * *l;
                }
                e += score.at(0, a) * pre.tanh();
            }
            *sj = e;
        }
        let lse = log_sum_exp(&scores);
        let alpha: Vec<Dd> = scores.iter().map(|s| (*s - lse).exp()).collect();
        ctx = (0..hdim)
            .map(|k| {
                let mut acc = Dd::ZERO;
                for j in 0..n {
                    acc += alpha[j] * enc[j][k];
                }
                acc
            })
            .collect();
        prev = alpha;

        let logits: Vec<Dd> = (0..cfg.vocab_size)
            .map(|v| {
                let mut acc = output_bias.at(v, 0);
                for k in 0..hd {
                    acc += output.at(v, k) * h[k];
                }
                for k in 0..hdim {
                    acc += output.at(v, hd + k) * ctx[k];
                }
                acc
            })
            .collect();
        total += log_sum_exp(&logits) - logits[y_out];
    }
    total / Dd::new(targets.len() as f64)
}
