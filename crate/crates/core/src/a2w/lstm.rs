use crate::numerics::{sigmoid, Matrix, Rng};

/// Standard LSTM cell without peepholes. Gate rows are stacked as
/// input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub bias: Matrix,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub(crate) struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmParams {
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        LstmParams {
            w_x: Matrix::xavier(4 * hidden, input, rng),
            w_h: Matrix::xavier(4 * hidden, hidden, rng),
            bias: Matrix::zeros(4 * hidden, 1),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Matrix::zeros(4 * hidden, input),
            w_h: Matrix::zeros(4 * hidden, hidden),
            bias: Matrix::zeros(4 * hidden, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    pub(crate) fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        let n = self.hidden();
        let mut z = self.bias.data().to_vec();
        self.w_x.matvec_acc(x, &mut z);
        self.w_h.matvec_acc(h_prev, &mut z);

        let i: Vec<f64> = z[..n].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[n..2 * n].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * n..3 * n].iter().map(|v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * n..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..n).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..n).map(|k| o[k] * tanh_c[k]).collect();
        LstmStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
            c,
            h,
        }
    }

    /// Backpropagate through one step. `dh` and `dc` are the total
    /// gradients reaching this step's outputs. Parameter gradients are
    /// accumulated into `grad`; `dx` is overwritten. Returns `(dh_prev, dc_prev)`.
    pub(crate) fn step_backward(
        &self,
        st: &LstmStep,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmParams,
        dx: Option<&mut [f64]>,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden();
        let mut dz = vec![0.0; 4 * n];
        let mut dc_prev = vec![0.0; n];
        for k in 0..n {
            let dck = dc[k] + dh[k] * st.o[k] * (1.0 - st.tanh_c[k] * st.tanh_c[k]);
            let d_o = dh[k] * st.tanh_c[k];
            let d_i = dck * st.g[k];
            let d_g = dck * st.i[k];
            let d_f = dck * st.c_prev[k];
            dc_prev[k] = dck * st.f[k];
            dz[k] = d_i * st.i[k] * (1.0 - st.i[k]);
            dz[n + k] = d_f * st.f[k] * (1.0 - st.f[k]);
            dz[2 * n + k] = d_g * (1.0 - st.g[k] * st.g[k]);
            dz[3 * n + k] = d_o * st.o[k] * (1.0 - st.o[k]);
        }
        grad.w_x.add_outer(&dz, &st.x);
        grad.w_h.add_outer(&dz, &st.h_prev);
        crate::numerics::axpy(1.0, &dz, grad.bias.data_mut());
        if let Some(dx) = dx {
            dx.iter_mut().for_each(|v| *v = 0.0);
            self.w_x.matvec_t_acc(&dz, dx);
        }
        let mut dh_prev = vec![0.0; n];
        self.w_h.matvec_t_acc(&dz, &mut dh_prev);
        (dh_prev, dc_prev)
    }

    /// Run over `xs` from zero state. With `reverse`, time runs backwards;
    /// the returned steps are indexed by time either way.
    pub(crate) fn run(&self, xs: &[Vec<f64>], reverse: bool) -> Vec<LstmStep> {
        let n = self.hidden();
        let mut h = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut steps: Vec<Option<LstmStep>> = vec![None; xs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..xs.len()).rev())
        } else {
            Box::new(0..xs.len())
        };
        for t in order {
            let st = self.step(&xs[t], &h, &c);
            h.clone_from(&st.h);
            c.clone_from(&st.c);
            steps[t] = Some(st);
        }
        steps.into_iter().map(|s| s.expect("every step visited")).collect()
    }

    /// Backward through a full run. `dhs[t]` is the external gradient on
    /// the output at time `t`. Returns the input gradients by time when
    /// `want_dx` is set.
    pub(crate) fn run_backward(
        &self,
        steps: &[LstmStep],
        dhs: &[Vec<f64>],
        reverse: bool,
        grad: &mut LstmParams,
        want_dx: bool,
    ) -> Vec<Vec<f64>> {
        let n = self.hidden();
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut dxs = if want_dx {
            vec![vec![0.0; self.input()]; steps.len()]
        } else {
            Vec::new()
        };
        // backward visits time in the opposite order of the forward run
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new(0..steps.len())
        } else {
            Box::new((0..steps.len()).rev())
        };
        for t in order {
            let dh: Vec<f64> = dhs[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let dx = if want_dx {
                Some(dxs[t].as_mut_slice())
            } else {
                None
            };
            let (dhp, dcp) = self.step_backward(&steps[t], &dh, &dc_next, grad, dx);
            dh_next = dhp;
            dc_next = dcp;
        }
        dxs
    }
}
