//! Location-aware attention.
//!
//! The previous step's weights are convolved with `F` learned kernels; the
//! resulting per-frame features enter the additive score
//! `e_j = wᵀ tanh(W s + V h_j + U f_j + b)`.

use crate::numerics::{axpy, conv1d_same_unchecked, dot, softmax_unchecked, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// `A × decoder_hidden`
    pub query: Matrix,
    /// `A × H`
    pub key: Matrix,
    /// `A × F`
    pub location: Matrix,
    /// `A × 1`
    pub bias: Matrix,
    /// `1 × A`
    pub score: Matrix,
    /// `F × width`
    pub kernels: Matrix,
}

impl AttentionParams {
    /// `T′ × F` location features of a previous attention vector.
    pub fn location_features(&self, prev: &[f64]) -> Matrix {
        let f = self.kernels.rows();
        let mut out = Matrix::zeros(prev.len(), f);
        for (fi, kernel) in self.kernels.iter_rows().enumerate() {
            for (t, v) in conv1d_same_unchecked(prev, kernel).into_iter().enumerate() {
                out.set(t, fi, v);
            }
        }
        out
    }

    /// `T′ × A` key projections `V h_j`, shared by every decoder step.
    pub(crate) fn keys(&self, states: &Matrix) -> Matrix {
        let a = self.key.rows();
        let mut keys = Matrix::zeros(states.rows(), a);
        for (j, h) in states.iter_rows().enumerate() {
            self.key.matvec_acc(h, keys.row_mut(j));
        }
        keys
    }

    pub(crate) fn forward(&self, s: &[f64], states: &Matrix, keys: &Matrix, prev: &[f64]) -> AttendCache {
        let loc = self.location_features(prev);
        let mut q = self.bias.data().to_vec();
        self.query.matvec_acc(s, &mut q);
        let n = states.rows();
        let a = q.len();
        let w = self.score.data();
        let mut tanh = Matrix::zeros(n, a);
        let mut scores = vec![0.0; n];
        for j in 0..n {
            let row = tanh.row_mut(j);
            row.copy_from_slice(&q);
            axpy(1.0, keys.row(j), row);
            self.location.matvec_acc(loc.row(j), row);
            row.iter_mut().for_each(|v| *v = v.tanh());
            scores[j] = dot(w, row);
        }
        let alpha = softmax_unchecked(&scores);
        let mut context = vec![0.0; states.cols()];
        for (aj, h) in alpha.iter().zip(states.iter_rows()) {
            axpy(*aj, h, &mut context);
        }
        AttendCache {
            prev: prev.to_vec(),
            loc,
            tanh,
            alpha,
            context,
        }
    }

    /// Backward through one attention step. `dalpha_ext` is gradient on the
    /// weights from later use (the next step's location features). Key and
    /// state gradients are accumulated into `dkeys` / `dstates`, the decoder
    /// state gradient into `ds`. Returns the gradient on `prev`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward(
        &self,
        cache: &AttendCache,
        s: &[f64],
        states: &Matrix,
        dcontext: &[f64],
        dalpha_ext: &[f64],
        grad: &mut AttentionParams,
        dkeys: &mut Matrix,
        dstates: &mut Matrix,
        ds: &mut [f64],
    ) -> Vec<f64> {
        let n = states.rows();
        let a = self.query.rows();
        let alpha = &cache.alpha;

        let mut dalpha = dalpha_ext.to_vec();
        for j in 0..n {
            dalpha[j] += dot(dcontext, states.row(j));
            axpy(alpha[j], dcontext, dstates.row_mut(j));
        }
        let inner = dot(alpha, &dalpha);
        let de: Vec<f64> = (0..n).map(|j| alpha[j] * (dalpha[j] - inner)).collect();

        let w = self.score.data();
        let mut dq = vec![0.0; a];
        let mut dloc = Matrix::zeros(n, self.location.cols());
        let mut dpre = vec![0.0; a];
        for j in 0..n {
            let t = cache.tanh.row(j);
            axpy(de[j], t, grad.score.data_mut());
            for k in 0..a {
                dpre[k] = de[j] * w[k] * (1.0 - t[k] * t[k]);
            }
            axpy(1.0, &dpre, &mut dq);
            axpy(1.0, &dpre, dkeys.row_mut(j));
            grad.location.add_outer(&dpre, cache.loc.row(j));
            self.location.matvec_t_acc(&dpre, dloc.row_mut(j));
        }

        // location features: loc[t][f] = Σ_k kernel[f][k] · prev[t + k − half]
        let mut dprev = vec![0.0; n];
        let width = self.kernels.cols();
        let half = (width / 2) as isize;
        for f in 0..self.kernels.rows() {
            let kernel = self.kernels.row(f);
            let gk = grad.kernels.row_mut(f);
            for t in 0..n {
                let g = dloc.get(t, f);
                if g == 0.0 {
                    continue;
                }
                for k in 0..width {
                    let src = t as isize + k as isize - half;
                    if src >= 0 && (src as usize) < n {
                        gk[k] += g * cache.prev[src as usize];
                        dprev[src as usize] += g * kernel[k];
                    }
                }
            }
        }

        grad.query.add_outer(&dq, s);
        axpy(1.0, &dq, grad.bias.data_mut());
        self.query.matvec_t_acc(&dq, ds);
        dprev
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AttendCache {
    pub prev: Vec<f64>,
    pub loc: Matrix,
    pub tanh: Matrix,
    pub alpha: Vec<f64>,
    pub context: Vec<f64>,
}

/// Attention carried between decoder steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    pub prev_weights: Vec<f64>,
    pub location_features: Matrix,
}

impl AttentionState {
    pub fn new(prev_weights: Vec<f64>, params: &AttentionParams) -> Self {
        let location_features = params.location_features(&prev_weights);
        AttentionState {
            prev_weights,
            location_features,
        }
    }

    pub fn uniform(frames: usize, params: &AttentionParams) -> Self {
        Self::new(vec![1.0 / frames as f64; frames], params)
    }
}
