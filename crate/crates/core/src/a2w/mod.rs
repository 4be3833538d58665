//! Attention-based acoustic-to-word sequence model.
//!
//! A pyramidal bidirectional LSTM encoder turns `T × d` frames into
//! `T′ × H` states (`T′ = ⌈T / s⌉`). An LSTM decoder, fed the previous word
//! embedding and the previous context vector, attends over those states with
//! location-aware attention and predicts the next word. All gradients are
//! derived by hand and verified against central differences.

mod attention;
pub mod checkpoint;
mod lstm;
mod reference;

pub use attention::{AttentionParams, AttentionState};
pub use lstm::LstmParams;

use crate::embeddings::{EOS, SOS};
use crate::error::{Error, Result};
use crate::numerics::{argmax, axpy, log_sum_exp, softmax_unchecked, Matrix, Rng};
use attention::AttendCache;
use lstm::LstmStep;
use crate::numerics::dd::Dd;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Hidden size of each encoder direction; encoder output is twice this.
    pub enc_hidden: usize,
    pub enc_layers: usize,
    /// Number of leading encoder layers whose outputs are merged pairwise.
    pub pyramid_stages: usize,
    pub dec_hidden: usize,
    pub embed_dim: usize,
    pub att_dim: usize,
    pub loc_kernels: usize,
    pub loc_width: usize,
    pub vocab_size: usize,
}

impl ModelConfig {
    /// Desk-scale defaults.
    pub fn desk(input_dim: usize, vocab_size: usize) -> Self {
        ModelConfig {
            input_dim,
            enc_hidden: 16,
            enc_layers: 2,
            pyramid_stages: 1,
            dec_hidden: 32,
            embed_dim: 32,
            att_dim: 32,
            loc_kernels: 4,
            loc_width: 5,
            vocab_size,
        }
    }

    /// Large preset with 300-dimensional encoder output.
    pub fn paper_scale(input_dim: usize, vocab_size: usize) -> Self {
        ModelConfig {
            input_dim,
            enc_hidden: 150,
            enc_layers: 4,
            pyramid_stages: 2,
            dec_hidden: 300,
            embed_dim: 300,
            att_dim: 300,
            loc_kernels: 10,
            loc_width: 101,
            vocab_size,
        }
    }

    pub fn enc_dim(&self) -> usize {
        2 * self.enc_hidden
    }

    pub fn subsample_factor(&self) -> usize {
        1 << self.pyramid_stages
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("enc_hidden", self.enc_hidden),
            ("enc_layers", self.enc_layers),
            ("dec_hidden", self.dec_hidden),
            ("embed_dim", self.embed_dim),
            ("att_dim", self.att_dim),
            ("loc_kernels", self.loc_kernels),
            ("loc_width", self.loc_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.pyramid_stages >= self.enc_layers {
            return Err(Error::InvalidArgument(format!(
                "{} pyramid stages need at least {} encoder layers",
                self.pyramid_stages,
                self.pyramid_stages + 1
            )));
        }
        if self.loc_width % 2 == 0 {
            return Err(Error::InvalidArgument("loc_width must be odd".into()));
        }
        if self.vocab_size < 4 {
            return Err(Error::InvalidArgument(
                "vocab_size must cover the reserved tokens and at least one word".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

/// All learned parameters. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub encoder: Vec<BiLstmParams>,
    pub attention: AttentionParams,
    pub decoder: LstmParams,
    /// `|V| × embed_dim` decoder input embeddings.
    pub embedding: Matrix,
    /// `|V| × (dec_hidden + H)`
    pub output: Matrix,
    pub output_bias: Matrix,
}

impl ModelParams {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        Ok(Self::build(config, |r, c| Matrix::xavier(r, c, &mut rng)))
    }

    pub fn zeros(config: ModelConfig) -> Self {
        Self::build(config, Matrix::zeros)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config)
    }

    fn build(config: ModelConfig, mut weight: impl FnMut(usize, usize) -> Matrix) -> Self {
        let c = config;
        let mut lstm = |input: usize, hidden: usize| LstmParams {
            w_x: weight(4 * hidden, input),
            w_h: weight(4 * hidden, hidden),
            bias: Matrix::zeros(4 * hidden, 1),
        };
        let mut encoder = Vec::with_capacity(c.enc_layers);
        for layer in 0..c.enc_layers {
            let input = if layer == 0 {
                c.input_dim
            } else if layer <= c.pyramid_stages {
                2 * c.enc_dim()
            } else {
                c.enc_dim()
            };
            encoder.push(BiLstmParams {
                fwd: lstm(input, c.enc_hidden),
                bwd: lstm(input, c.enc_hidden),
            });
        }
        let decoder = lstm(c.embed_dim + c.enc_dim(), c.dec_hidden);
        let attention = AttentionParams {
            query: weight(c.att_dim, c.dec_hidden),
            key: weight(c.att_dim, c.enc_dim()),
            location: weight(c.att_dim, c.loc_kernels),
            bias: Matrix::zeros(c.att_dim, 1),
            score: weight(1, c.att_dim),
            kernels: weight(c.loc_kernels, c.loc_width),
        };
        ModelParams {
            config,
            encoder,
            attention,
            decoder,
            embedding: weight(c.vocab_size, c.embed_dim),
            output: weight(c.vocab_size, c.dec_hidden + c.enc_dim()),
            output_bias: Matrix::zeros(c.vocab_size, 1),
        }
    }

    /// Parameter tensors in their canonical (checkpoint) order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out = Vec::new();
        for layer in &self.encoder {
            for l in [&layer.fwd, &layer.bwd] {
                out.extend([&l.w_x, &l.w_h, &l.bias]);
            }
        }
        let a = &self.attention;
        out.extend([&a.query, &a.key, &a.location, &a.bias, &a.score, &a.kernels]);
        let d = &self.decoder;
        out.extend([&d.w_x, &d.w_h, &d.bias]);
        out.extend([&self.embedding, &self.output, &self.output_bias]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for layer in &mut self.encoder {
            for l in [&mut layer.fwd, &mut layer.bwd] {
                out.extend([&mut l.w_x, &mut l.w_h, &mut l.bias]);
            }
        }
        let a = &mut self.attention;
        out.extend([
            &mut a.query,
            &mut a.key,
            &mut a.location,
            &mut a.bias,
            &mut a.score,
            &mut a.kernels,
        ]);
        let d = &mut self.decoder;
        out.extend([&mut d.w_x, &mut d.w_h, &mut d.bias]);
        out.extend([&mut self.embedding, &mut self.output, &mut self.output_bias]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|m| m.data().len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for m in self.tensors() {
            out.extend_from_slice(m.data());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_params()
            )));
        }
        let mut off = 0;
        for m in self.tensors_mut() {
            let n = m.data().len();
            m.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// Elementwise `self += other`.
    pub fn accumulate(&mut self, other: &ModelParams) -> Result<()> {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors().iter().map(|m| m.sum_squares()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for m in self.tensors_mut() {
            m.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }
}

/// One utterance of input frames.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFeatureSequence {
    pub utterance_id: usize,
    /// `T × d`, one row per frame.
    pub frames: Matrix,
}

/// Word ids of an utterance, without the start/end markers that frame it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub ids: Vec<usize>,
}

impl Transcript {
    pub fn new(ids: Vec<usize>) -> Self {
        Transcript { ids }
    }

    /// Decoder inputs: `<s> y_1 … y_L`.
    pub fn decoder_inputs(&self) -> Vec<usize> {
        std::iter::once(SOS).chain(self.ids.iter().copied()).collect()
    }

    /// Decoder targets: `y_1 … y_L </s>`.
    pub fn targets(&self) -> Vec<usize> {
        self.ids.iter().copied().chain(std::iter::once(EOS)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStates {
    /// `T′ × H`
    pub states: Matrix,
    pub subsample_factor: usize,
}

/// One attention distribution per decoder step, in step order.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix {
    pub weights: Matrix,
}

impl AttentionMatrix {
    pub fn steps(&self) -> usize {
        self.weights.rows()
    }

    pub fn row(&self, step: usize) -> &[f64] {
        self.weights.row(step)
    }
}

struct EncoderLayerCache {
    fwd: Vec<LstmStep>,
    bwd: Vec<LstmStep>,
    /// Sequence length entering this layer.
    len: usize,
    pyramidal: bool,
}

struct EncoderCache {
    layers: Vec<EncoderLayerCache>,
}

struct DecoderCache {
    inputs: Vec<usize>,
    targets: Vec<usize>,
    steps: Vec<LstmStep>,
    attends: Vec<AttendCache>,
    outs: Vec<Vec<f64>>,
    logits: Matrix,
}

impl ModelParams {
    fn check_features(&self, features: &AcousticFeatureSequence) -> Result<()> {
        let (t, d) = features.frames.shape();
        if t == 0 {
            return Err(Error::InvalidArgument("utterance has no frames".into()));
        }
        if d != self.config.input_dim {
            return Err(Error::Shape(format!(
                "feature dimension {d}, model expects {}",
                self.config.input_dim
            )));
        }
        if !features.frames.is_finite() {
            return Err(Error::NonFinite("input frames".into()));
        }
        Ok(())
    }

    fn check_transcript(&self, transcript: &Transcript) -> Result<()> {
        if transcript.ids.is_empty() {
            return Err(Error::InvalidArgument("empty transcript".into()));
        }
        if let Some(&bad) = transcript.ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Error::InvalidArgument(format!(
                "unknown token id {bad} (vocabulary size {})",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    fn encode_cached(&self, frames: &Matrix) -> (EncoderStates, EncoderCache) {
        let mut xs: Vec<Vec<f64>> = frames.iter_rows().map(<[f64]>::to_vec).collect();
        let mut layers = Vec::with_capacity(self.encoder.len());
        for (li, layer) in self.encoder.iter().enumerate() {
            let fwd = layer.fwd.run(&xs, false);
            let bwd = layer.bwd.run(&xs, true);
            let len = xs.len();
            let mut out: Vec<Vec<f64>> = fwd
                .iter()
                .zip(&bwd)
                .map(|(f, b)| [f.h.as_slice(), b.h.as_slice()].concat())
                .collect();
            let pyramidal = li < self.config.pyramid_stages;
            if pyramidal {
                out = pair_concat(&out);
            }
            layers.push(EncoderLayerCache {
                fwd,
                bwd,
                len,
                pyramidal,
            });
            xs = out;
        }
        let states = Matrix::from_rows(&xs).expect("uniform encoder rows");
        (
            EncoderStates {
                states,
                subsample_factor: self.config.subsample_factor(),
            },
            EncoderCache { layers },
        )
    }

    fn encode_backward(&self, cache: &EncoderCache, dstates: &Matrix, grad: &mut ModelParams) {
        let mut dout: Vec<Vec<f64>> = dstates.iter_rows().map(<[f64]>::to_vec).collect();
        let he = self.config.enc_hidden;
        for (li, lc) in cache.layers.iter().enumerate().rev() {
            if lc.pyramidal {
                dout = pair_split(&dout, lc.len);
            }
            let dfwd: Vec<Vec<f64>> = dout.iter().map(|d| d[..he].to_vec()).collect();
            let dbwd: Vec<Vec<f64>> = dout.iter().map(|d| d[he..].to_vec()).collect();
            let want_dx = li > 0;
            let layer = &self.encoder[li];
            let g = &mut grad.encoder[li];
            let dx_f = layer.fwd.run_backward(&lc.fwd, &dfwd, false, &mut g.fwd, want_dx);
            let dx_b = layer.bwd.run_backward(&lc.bwd, &dbwd, true, &mut g.bwd, want_dx);
            if want_dx {
                dout = dx_f
                    .into_iter()
                    .zip(dx_b)
                    .map(|(mut a, b)| {
                        axpy(1.0, &b, &mut a);
                        a
                    })
                    .collect();
            }
        }
    }

    /// Run the pyramidal BLSTM encoder.
    pub fn encode(&self, features: &AcousticFeatureSequence) -> Result<EncoderStates> {
        self.check_features(features)?;
        Ok(self.encode_cached(&features.frames).0)
    }

    /// One attention step: returns the context vector and the weights.
    pub fn attend(
        &self,
        decoder_state: &[f64],
        enc: &EncoderStates,
        att_state: &AttentionState,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = enc.states.rows();
        if att_state.prev_weights.len() != n {
            return Err(Error::Shape(format!(
                "previous attention has {} entries for {n} encoder frames",
                att_state.prev_weights.len()
            )));
        }
        if decoder_state.len() != self.config.dec_hidden || enc.states.cols() != self.config.enc_dim() {
            return Err(Error::Shape("decoder state or encoder width mismatch".into()));
        }
        let keys = self.attention.keys(&enc.states);
        let c = self
            .attention
            .forward(decoder_state, &enc.states, &keys, &att_state.prev_weights);
        Ok((c.context, c.alpha))
    }

    fn decode_teacher_forced(&self, enc: &EncoderStates, transcript: &Transcript) -> DecoderCache {
        let cfg = &self.config;
        let states = &enc.states;
        let n = states.rows();
        let keys = self.attention.keys(states);
        let inputs = transcript.decoder_inputs();
        let targets = transcript.targets();

        let mut h = vec![0.0; cfg.dec_hidden];
        let mut c = vec![0.0; cfg.dec_hidden];
        let mut ctx = vec![0.0; cfg.enc_dim()];
        let mut prev = vec![1.0 / n as f64; n];
        let mut steps = Vec::with_capacity(inputs.len());
        let mut attends = Vec::with_capacity(inputs.len());
        let mut outs = Vec::with_capacity(inputs.len());
        let mut logits = Matrix::zeros(inputs.len(), cfg.vocab_size);
        for (l, &y) in inputs.iter().enumerate() {
            let x = [self.embedding.row(y), ctx.as_slice()].concat();
            let st = self.decoder.step(&x, &h, &c);
            let att = self.attention.forward(&st.h, states, &keys, &prev);
            let out = [st.h.as_slice(), att.context.as_slice()].concat();
            let row = logits.row_mut(l);
            row.copy_from_slice(self.output_bias.data());
            self.output.matvec_acc(&out, row);
            h.clone_from(&st.h);
            c.clone_from(&st.c);
            ctx.clone_from(&att.context);
            prev.clone_from(&att.alpha);
            steps.push(st);
            attends.push(att);
            outs.push(out);
        }
        DecoderCache {
            inputs,
            targets,
            steps,
            attends,
            outs,
            logits,
        }
    }

    /// Teacher-forced forward pass. The decoder runs one step per target
    /// (`L` words plus the end marker), so `logits` and the attention matrix
    /// have `L + 1` rows.
    pub fn forward_teacher_forced(
        &self,
        features: &AcousticFeatureSequence,
        transcript: &Transcript,
    ) -> Result<(Matrix, AttentionMatrix, EncoderStates)> {
        self.check_features(features)?;
        self.check_transcript(transcript)?;
        let (enc, _) = self.encode_cached(&features.frames);
        let dc = self.decode_teacher_forced(&enc, transcript);
        let weights = Matrix::from_rows(&dc.attends.iter().map(|a| a.alpha.clone()).collect::<Vec<_>>())
            .expect("attention rows share T′");
        Ok((dc.logits, AttentionMatrix { weights }, enc))
    }

    pub fn loss(&self, features: &AcousticFeatureSequence, transcript: &Transcript) -> Result<f64> {
        let (logits, _, _) = self.forward_teacher_forced(features, transcript)?;
        loss_cross_entropy(&logits, transcript)
    }

    /// Loss and exact gradient of [`loss_cross_entropy`] with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        features: &AcousticFeatureSequence,
        transcript: &Transcript,
    ) -> Result<(f64, ModelParams)> {
        self.check_features(features)?;
        self.check_transcript(transcript)?;
        let cfg = self.config;
        let (enc, enc_cache) = self.encode_cached(&features.frames);
        let dc = self.decode_teacher_forced(&enc, transcript);
        let loss = loss_cross_entropy(&dc.logits, transcript)?;

        let mut grad = self.zeros_like();
        let steps = dc.targets.len();
        let inv = 1.0 / steps as f64;
        let n = enc.states.rows();
        let (dh_dim, e_dim) = (cfg.dec_hidden, cfg.embed_dim);

        let mut dstates = Matrix::zeros(n, cfg.enc_dim());
        let mut dkeys = Matrix::zeros(n, cfg.att_dim);
        let mut dh_next = vec![0.0; dh_dim];
        let mut dc_next = vec![0.0; dh_dim];
        let mut dctx_next = vec![0.0; cfg.enc_dim()];
        let mut dprev_next = vec![0.0; n];
        let mut dx = vec![0.0; e_dim + cfg.enc_dim()];

        for l in (0..steps).rev() {
            let mut dlogits = softmax_unchecked(dc.logits.row(l));
            dlogits[dc.targets[l]] -= 1.0;
            dlogits.iter_mut().for_each(|v| *v *= inv);
            grad.output.add_outer(&dlogits, &dc.outs[l]);
            axpy(1.0, &dlogits, grad.output_bias.data_mut());
            let mut dout = vec![0.0; dh_dim + cfg.enc_dim()];
            self.output.matvec_t_acc(&dlogits, &mut dout);

            let mut ds: Vec<f64> = dout[..dh_dim].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let dctx: Vec<f64> = dout[dh_dim..].iter().zip(&dctx_next).map(|(a, b)| a + b).collect();
            let st = &dc.steps[l];
            let dprev = self.attention.backward(
                &dc.attends[l],
                &st.h,
                &enc.states,
                &dctx,
                &dprev_next,
                &mut grad.attention,
                &mut dkeys,
                &mut dstates,
                &mut ds,
            );
            let (dhp, dcp) = self
                .decoder
                .step_backward(st, &ds, &dc_next, &mut grad.decoder, Some(&mut dx));
            axpy(1.0, &dx[..e_dim], grad.embedding.row_mut(dc.inputs[l]));
            dctx_next.copy_from_slice(&dx[e_dim..]);
            dprev_next = dprev;
            dh_next = dhp;
            dc_next = dcp;
        }

        // keys_j = V h_j
        for j in 0..n {
            grad.attention.key.add_outer(dkeys.row(j), enc.states.row(j));
            let mut dh = vec![0.0; cfg.enc_dim()];
            self.attention.key.matvec_t_acc(dkeys.row(j), &mut dh);
            axpy(1.0, &dh, dstates.row_mut(j));
        }
        self.encode_backward(&enc_cache, &dstates, &mut grad);
        Ok((loss, grad))
    }

    pub fn backward(&self, features: &AcousticFeatureSequence, transcript: &Transcript) -> Result<ModelParams> {
        Ok(self.loss_and_grad(features, transcript)?.1)
    }

    /// Greedy decoding: feed back the argmax word until the end marker or
    /// `max_len` words. The end marker is not included in the output.
    pub fn greedy_decode(&self, features: &AcousticFeatureSequence, max_len: usize) -> Result<Vec<usize>> {
        if max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be at least 1".into()));
        }
        self.check_features(features)?;
        let cfg = &self.config;
        let (enc, _) = self.encode_cached(&features.frames);
        let states = &enc.states;
        let n = states.rows();
        let keys = self.attention.keys(states);
        let mut h = vec![0.0; cfg.dec_hidden];
        let mut c = vec![0.0; cfg.dec_hidden];
        let mut ctx = vec![0.0; cfg.enc_dim()];
        let mut prev = vec![1.0 / n as f64; n];
        let mut y = SOS;
        let mut out = Vec::new();
        while out.len() < max_len {
            let x = [self.embedding.row(y), ctx.as_slice()].concat();
            let st = self.decoder.step(&x, &h, &c);
            let att = self.attention.forward(&st.h, states, &keys, &prev);
            let o = [st.h.as_slice(), att.context.as_slice()].concat();
            let mut logits = self.output_bias.data().to_vec();
            self.output.matvec_acc(&o, &mut logits);
            y = argmax(&logits).expect("non-empty vocabulary");
            if y == EOS {
                break;
            }
            out.push(y);
            h = st.h;
            c = st.c;
            ctx = att.context;
            prev = att.alpha;
        }
        Ok(out)
    }
}

fn pair_concat(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.chunks(2)
        .map(|pair| match pair {
            [a, b] => [a.as_slice(), b.as_slice()].concat(),
            [a] => {
                let mut v = a.clone();
                v.resize(2 * a.len(), 0.0);
                v
            }
            _ => unreachable!(),
        })
        .collect()
}

fn pair_split(rows: &[Vec<f64>], len: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    for r in rows {
        let half = r.len() / 2;
        out.push(r[..half].to_vec());
        if out.len() < len {
            out.push(r[half..].to_vec());
        }
    }
    out
}

/// Mean over decoder steps of `−log softmax(logits_l)[target_l]`, where the
/// targets are the transcript words followed by the end marker.
pub fn loss_cross_entropy(logits: &Matrix, transcript: &Transcript) -> Result<f64> {
    let targets = transcript.targets();
    if logits.rows() != targets.len() {
        return Err(Error::Shape(format!(
            "{} logit rows for {} targets",
            logits.rows(),
            targets.len()
        )));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= logits.cols()) {
        return Err(Error::Shape(format!("target {bad} outside {} logits", logits.cols())));
    }
    let total: f64 = targets
        .iter()
        .enumerate()
        .map(|(l, &y)| {
            let row = logits.row(l);
            log_sum_exp(row) - row[y]
        })
        .sum();
    let loss = total / targets.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    Ok(loss)
}

/// Largest relative error `|g_a − g_n| / max(|g_a|, |g_n|, 1e-8)` between
/// `analytic` and central differences with step `epsilon`.
///
/// The numeric side differentiates an independent double-double evaluation
/// of the loss, so its rounding noise sits far below the 1e-8 floor.
pub fn grad_check_against(
    params: &ModelParams,
    features: &AcousticFeatureSequence,
    transcript: &Transcript,
    epsilon: f64,
    analytic: &ModelParams,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {epsilon}"
        )));
    }
    params.check_features(features)?;
    params.check_transcript(transcript)?;
    let g = analytic.to_flat();
    if g.len() != params.num_params() {
        return Err(Error::Shape("gradient and parameters differ in size".into()));
    }
    let frames = &features.frames;
    let worst = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let up = reference::reference_loss(params, frames, transcript, Some((i, epsilon)));
            let down = reference::reference_loss(params, frames, transcript, Some((i, -epsilon)));
            let numeric = ((up - down) / Dd::new(2.0 * epsilon)).to_f64();
            let denom = g[i].abs().max(numeric.abs()).max(1e-8);
            (g[i] - numeric).abs() / denom
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Compare [`ModelParams::backward`] against central differences.
pub fn grad_check(
    params: &ModelParams,
    features: &AcousticFeatureSequence,
    transcript: &Transcript,
    epsilon: f64,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {epsilon}"
        )));
    }
    let analytic = params.backward(features, transcript)?;
    grad_check_against(params, features, transcript, epsilon, &analytic)
}

#[cfg(test)]
mod tests;
