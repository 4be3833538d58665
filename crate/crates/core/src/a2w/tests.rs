use super::*;
use crate::embeddings::Vocabulary;

fn tiny_config() -> ModelConfig {
    ModelConfig {
        input_dim: 6,
        enc_hidden: 8,
        enc_layers: 2,
        pyramid_stages: 1,
        dec_hidden: 8,
        embed_dim: 8,
        att_dim: 8,
        loc_kernels: 2,
        loc_width: 5,
        vocab_size: 12,
    }
}

fn random_features(t: usize, d: usize, seed: u64) -> AcousticFeatureSequence {
    let mut rng = Rng::new(seed);
    let data = (0..t * d).map(|_| rng.gaussian()).collect();
    AcousticFeatureSequence {
        utterance_id: 0,
        frames: Matrix::from_vec(t, d, data).unwrap(),
    }
}

/// Give biases non-zero values so their gradients are exercised too.
fn jitter_biases(p: &mut ModelParams, seed: u64) {
    let mut rng = Rng::new(seed);
    for layer in &mut p.encoder {
        for l in [&mut layer.fwd, &mut layer.bwd] {
            l.bias.data_mut().iter_mut().for_each(|b| *b = 0.3 * rng.gaussian());
        }
    }
    p.decoder.bias.data_mut().iter_mut().for_each(|b| *b = 0.3 * rng.gaussian());
    p.attention.bias.data_mut().iter_mut().for_each(|b| *b = 0.3 * rng.gaussian());
    p.output_bias.data_mut().iter_mut().for_each(|b| *b = 0.3 * rng.gaussian());
}

// --- independent scalar encoder ------------------------------------------

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn scalar_lstm(p: &LstmParams, xs: &[Vec<f64>], reverse: bool) -> Vec<Vec<f64>> {
    let n = p.w_h.cols();
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut out = vec![vec![]; xs.len()];
    let idx: Vec<usize> = if reverse {
        (0..xs.len()).rev().collect()
    } else {
        (0..xs.len()).collect()
    };
    for t in idx {
        let mut gates = vec![0.0; 4 * n];
        for r in 0..4 * n {
            let mut acc = p.bias.get(r, 0);
            for j in 0..xs[t].len() {
                acc += p.w_x.get(r, j) * xs[t][j];
            }
            for j in 0..n {
                acc += p.w_h.get(r, j) * h[j];
            }
            gates[r] = acc;
        }
        let mut hn = vec![0.0; n];
        for k in 0..n {
            let i = sig(gates[k]);
            let f = sig(gates[n + k]);
            let g = gates[2 * n + k].tanh();
            let o = sig(gates[3 * n + k]);
            c[k] = f * c[k] + i * g;
            hn[k] = o * c[k].tanh();
        }
        h = hn;
        out[t] = h.clone();
    }
    out
}

fn scalar_encode(p: &ModelParams, frames: &Matrix) -> Vec<Vec<f64>> {
    let mut xs: Vec<Vec<f64>> = (0..frames.rows()).map(|t| frames.row(t).to_vec()).collect();
    for (li, layer) in p.encoder.iter().enumerate() {
        let f = scalar_lstm(&layer.fwd, &xs, false);
        let b = scalar_lstm(&layer.bwd, &xs, true);
        let mut out: Vec<Vec<f64>> = f.into_iter().zip(b).map(|(mut a, b)| {
            a.extend(b);
            a
        }).collect();
        if li < p.config.pyramid_stages {
            let width = out[0].len();
            let mut merged = Vec::new();
            let mut t = 0;
            while t < out.len() {
                let mut v = out[t].clone();
                if t + 1 < out.len() {
                    v.extend(out[t + 1].iter());
                } else {
                    v.extend(std::iter::repeat(0.0).take(width));
                }
                merged.push(v);
                t += 2;
            }
            out = merged;
        }
        xs = out;
    }
    xs
}

#[test]
fn encode_lengths() {
    let mut cfg = tiny_config();
    cfg.input_dim = 4;
    let p = ModelParams::init(cfg, 1).unwrap();
    let e = p.encode(&random_features(8, 4, 2)).unwrap();
    assert_eq!(e.states.shape(), (4, 16));
    assert_eq!(e.subsample_factor, 2);
    let e = p.encode(&random_features(9, 4, 2)).unwrap();
    assert_eq!(e.states.rows(), 5);
    let e = p.encode(&random_features(1, 4, 2)).unwrap();
    assert_eq!(e.states.rows(), 1);

    let empty = AcousticFeatureSequence {
        utterance_id: 0,
        frames: Matrix::zeros(0, 4),
    };
    assert!(p.encode(&empty).is_err());
    assert!(p.encode(&random_features(5, 3, 2)).is_err());
}

#[test]
fn encode_matches_scalar_reimplementation() {
    let mut p = ModelParams::init(tiny_config(), 4).unwrap();
    jitter_biases(&mut p, 5);
    let feats = random_features(11, 6, 6);
    let e = p.encode(&feats).unwrap();
    let reference = scalar_encode(&p, &feats.frames);
    assert_eq!(e.states.rows(), reference.len());
    for (j, r) in reference.iter().enumerate() {
        for (a, b) in e.states.row(j).iter().zip(r) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }
}

#[test]
fn attend_single_frame_and_zero_scores() {
    let p = ModelParams::init(tiny_config(), 7).unwrap();
    let enc = p.encode(&random_features(2, 6, 8)).unwrap();
    assert_eq!(enc.states.rows(), 1);
    let s = vec![0.3; 8];
    let (ctx, w) = p.attend(&s, &enc, &AttentionState::uniform(1, &p.attention)).unwrap();
    assert_eq!(w, vec![1.0]);
    for (a, b) in ctx.iter().zip(enc.states.row(0)) {
        assert!((a - b).abs() < 1e-15);
    }

    let mut z = p.clone();
    z.attention.score.fill(0.0);
    let enc = z.encode(&random_features(10, 6, 9)).unwrap();
    let n = enc.states.rows();
    let st = AttentionState::new(vec![0.0, 1.0, 0.0, 0.0, 0.0], &z.attention);
    let (ctx, w) = z.attend(&s, &enc, &st).unwrap();
    for x in &w {
        assert!((x - 1.0 / n as f64).abs() < 1e-15);
    }
    for k in 0..ctx.len() {
        let mean: f64 = (0..n).map(|j| enc.states.get(j, k)).sum::<f64>() / n as f64;
        assert!((ctx[k] - mean).abs() < 1e-14);
    }

    let bad = AttentionState::uniform(n + 1, &z.attention);
    assert!(z.attend(&s, &enc, &bad).is_err());
}

#[test]
fn attend_context_is_weighted_sum() {
    let p = ModelParams::init(tiny_config(), 10).unwrap();
    let enc = p.encode(&random_features(12, 6, 11)).unwrap();
    let mut rng = Rng::new(12);
    let s: Vec<f64> = (0..8).map(|_| rng.gaussian()).collect();
    let raw: Vec<f64> = (0..enc.states.rows()).map(|_| rng.next_f64()).collect();
    let total: f64 = raw.iter().sum();
    let prev: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let st = AttentionState::new(prev, &p.attention);
    assert_eq!(st.location_features.shape(), (enc.states.rows(), 2));
    let (ctx, w) = p.attend(&s, &enc, &st).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for k in 0..ctx.len() {
        let mut acc = 0.0;
        for j in 0..w.len() {
            acc += w[j] * enc.states.get(j, k);
        }
        assert!((ctx[k] - acc).abs() < 1e-14);
    }
}

#[test]
fn forward_shapes_and_distributions() {
    let p = ModelParams::init(tiny_config(), 13).unwrap();
    let feats = random_features(12, 6, 14);
    let (logits, attn, enc) = p.forward_teacher_forced(&feats, &Transcript::new(vec![5])).unwrap();
    assert_eq!(attn.steps(), 2, "one word plus the end marker");
    assert_eq!(logits.shape(), (2, 12));
    assert_eq!(attn.weights.cols(), enc.states.rows());

    let (_, attn, _) = p.forward_teacher_forced(&feats, &Transcript::new(vec![5, 6, 7])).unwrap();
    assert_eq!(attn.steps(), 4);
    for l in 0..attn.steps() {
        let row = attn.row(l);
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(row.iter().all(|&x| x >= 0.0));
    }
    assert!(p.forward_teacher_forced(&feats, &Transcript::new(vec![12])).is_err());
    assert!(p.forward_teacher_forced(&feats, &Transcript::new(vec![])).is_err());
}

#[test]
fn loss_examples() {
    let t = Transcript::new(vec![3, 4]);
    let uniform = Matrix::zeros(3, 10);
    assert!((loss_cross_entropy(&uniform, &t).unwrap() - 10f64.ln()).abs() < 1e-15);

    let mut sharp = Matrix::zeros(3, 10);
    for (l, y) in t.targets().into_iter().enumerate() {
        sharp.set(l, y, 200.0);
    }
    assert!(loss_cross_entropy(&sharp, &t).unwrap() < 1e-80);

    // logits rows [0.5, -1, 2], [1, 1, 0], [-2, 0, 3] with targets 0, 2, 1 (EOS):
    // per-row −log p computed with mpmath at 30 digits.
    let t = Transcript::new(vec![0, 2]);
    let logits = Matrix::from_rows(&[
        vec![0.5, -1.0, 2.0],
        vec![1.0, 1.0, 0.0],
        vec![-2.0, 0.0, 3.0],
    ])
    .unwrap();
    let expected = (1.741_311_296_657_157 + 1.861_994_804_058_251 + 3.054_985_235_377_147) / 3.0;
    assert!((loss_cross_entropy(&logits, &t).unwrap() - expected).abs() < 1e-14);

    assert!(loss_cross_entropy(&Matrix::zeros(2, 10), &Transcript::new(vec![1, 2])).is_err());
}

#[test]
fn gradient_matches_finite_differences() {
    let mut p = ModelParams::init(tiny_config(), 21).unwrap();
    jitter_biases(&mut p, 22);
    let feats = random_features(12, 6, 23);
    let t = Transcript::new(vec![4, 9, 6]);
    let err = grad_check(&p, &feats, &t, 1e-5).unwrap();
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn sign_flipped_gradient_is_caught() {
    let p = ModelParams::init(tiny_config(), 24).unwrap();
    let feats = random_features(12, 6, 25);
    let t = Transcript::new(vec![4, 9, 6]);
    let mut g = p.backward(&feats, &t).unwrap();
    g.scale(-1.0);
    let err = grad_check_against(&p, &feats, &t, 1e-5, &g).unwrap();
    assert!(err >= 1e-1);
    assert!(grad_check(&p, &feats, &t, 0.0).is_err());
}

#[test]
fn backward_is_pure() {
    let p = ModelParams::init(tiny_config(), 26).unwrap();
    let feats = random_features(9, 6, 27);
    let t = Transcript::new(vec![3, 3]);
    assert_eq!(p.backward(&feats, &t).unwrap(), p.backward(&feats, &t).unwrap());
}

#[test]
fn zero_loss_gives_near_zero_output_gradient() {
    let mut p = ModelParams::init(tiny_config(), 28).unwrap();
    p.output.fill(0.0);
    p.output_bias.fill(0.0);
    p.output_bias.set(EOS, 0, 60.0);
    let feats = random_features(6, 6, 29);
    // targets are [</s>, </s>], both predicted with overwhelming margin
    let t = Transcript::new(vec![EOS]);
    let (loss, g) = p.loss_and_grad(&feats, &t).unwrap();
    assert!(loss < 1e-20);
    assert!(g.output.data().iter().all(|x| x.abs() < 1e-20));
    assert!(g.output_bias.data().iter().all(|x| x.abs() < 1e-20));
}

#[test]
fn greedy_decode_terminates() {
    let p = ModelParams::init(tiny_config(), 30).unwrap();
    let feats = random_features(10, 6, 31);
    assert!(p.greedy_decode(&feats, 7).unwrap().len() <= 7);
    assert!(p.greedy_decode(&feats, 1).unwrap().len() <= 1);
    assert!(p.greedy_decode(&feats, 0).is_err());
    assert_eq!(p.greedy_decode(&feats, 7).unwrap(), p.greedy_decode(&feats, 7).unwrap());
}

fn tiny_vocab() -> Vocabulary {
    let words: Vec<Vec<String>> = vec![(0..9).map(|i| format!("w{i}")).collect()];
    Vocabulary::build(words.iter().map(Vec::as_slice), 1).unwrap()
}

#[test]
fn checkpoint_roundtrip_and_guards() {
    let p = ModelParams::init(tiny_config(), 32).unwrap();
    let v = tiny_vocab();
    assert_eq!(v.len(), 12);
    let bytes = checkpoint::to_bytes(&p, &v).unwrap();
    let (p2, v2) = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(p2.to_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
               p.to_flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    assert_eq!(p2.config, p.config);
    assert_eq!(v2, v);
    assert_eq!(checkpoint::to_bytes(&p2, &v2).unwrap(), bytes);

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::from_bytes(&bad).is_err());

    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(checkpoint::from_bytes(&bad).is_err());

    // enc_hidden 8 → 9: parameter count no longer matches
    let mut bad = bytes.clone();
    bad[12] = 9;
    assert!(checkpoint::from_bytes(&bad).is_err());

    assert!(checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(checkpoint::from_bytes(&bytes[..100]).is_err());
}

#[test]
fn reference_loss_agrees_with_forward() {
    let mut p = ModelParams::init(tiny_config(), 33).unwrap();
    jitter_biases(&mut p, 34);
    let feats = random_features(13, 6, 35);
    let t = Transcript::new(vec![4, 4, 11, 3]);
    let fast = p.loss(&feats, &t).unwrap();
    let slow = reference::reference_loss(&p, &feats.frames, &t, None).to_f64();
    assert!((fast - slow).abs() < 1e-13, "{fast} vs {slow}");
}
