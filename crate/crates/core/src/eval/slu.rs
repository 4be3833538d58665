//! Intent classification with a single recurrent layer whose embedding
//! layer starts from a word-embedding table and is fine-tuned.

use std::collections::HashMap;

use super::split_indices;
use crate::corpus::SluTask;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::{argmax, axpy, log_sum_exp, sigmoid, softmax_unchecked, Matrix, RmsPropState, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    /// `h' = tanh(Wx·x + Wh·h + b)`.
    Rnn,
    /// `z, r = σ(·)`, `n = tanh(Wx_n·x + Wh_n·(r∘h) + b_n)`,
    /// `h' = z∘h + (1−z)∘n`.
    Gru,
}

impl std::str::FromStr for Cell {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(Cell::Rnn),
            "gru" => Ok(Cell::Gru),
            _ => Err(Error::InvalidArgument(format!("unknown cell {s:?} (expected rnn or gru)"))),
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Cell::Rnn => "rnn",
            Cell::Gru => "gru",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SluConfig {
    pub cell: Cell,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    /// Runs use seeds `seed, seed+1, …`.
    pub seed: u64,
    pub runs: usize,
}

impl Default for SluConfig {
    fn default() -> Self {
        SluConfig {
            cell: Cell::Gru,
            hidden: 32,
            epochs: 10,
            learning_rate: 1e-3,
            rms_decay: 0.9,
            rms_epsilon: 1e-8,
            seed: 0,
            runs: 3,
        }
    }
}

impl SluConfig {
    pub fn describe(&self) -> String {
        format!(
            "slu;cell={};hidden={};epochs={};lr={};seed={};runs={}",
            self.cell, self.hidden, self.epochs, self.learning_rate, self.seed, self.runs
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SluModel {
    pub cell: Cell,
    /// Word → embedding row; the last row is the shared unknown vector.
    pub index: HashMap<String, usize>,
    pub embedding: Matrix,
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub bias: Matrix,
    pub dense: Matrix,
    pub dense_bias: Matrix,
}

impl SluModel {
    pub fn new(table: &EmbeddingTable, cell: Cell, hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument("intent classification needs at least two intents".into()));
        }
        if hidden == 0 || table.dim() == 0 {
            return Err(Error::InvalidArgument("hidden size and embedding dimension must be positive".into()));
        }
        let d = table.dim();
        let mut embedding = Matrix::zeros(table.len() + 1, d);
        let mut index = HashMap::new();
        for (i, (w, v)) in table.iter().enumerate() {
            embedding.row_mut(i).copy_from_slice(v);
            index.insert(w.to_string(), i);
        }
        let gates = match cell {
            Cell::Rnn => 1,
            Cell::Gru => 3,
        };
        let mut rng = Rng::new(seed);
        Ok(SluModel {
            cell,
            index,
            embedding,
            w_x: Matrix::xavier(gates * hidden, d, &mut rng),
            w_h: Matrix::xavier(gates * hidden, hidden, &mut rng),
            bias: Matrix::zeros(gates * hidden, 1),
            dense: Matrix::xavier(classes, hidden, &mut rng),
            dense_bias: Matrix::zeros(classes, 1),
        })
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    fn tensors(&self) -> [&Matrix; 6] {
        [&self.embedding, &self.w_x, &self.w_h, &self.bias, &self.dense, &self.dense_bias]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.embedding,
            &mut self.w_x,
            &mut self.w_h,
            &mut self.bias,
            &mut self.dense,
            &mut self.dense_bias,
        ]
    }

    fn zeros_like(&self) -> SluModel {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        SluModel {
            cell: self.cell,
            index: HashMap::new(),
            embedding: z(&self.embedding),
            w_x: z(&self.w_x),
            w_h: z(&self.w_h),
            bias: z(&self.bias),
            dense: z(&self.dense),
            dense_bias: z(&self.dense_bias),
        }
    }

    pub fn rows<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let unk = self.embedding.rows() - 1;
        tokens.iter().map(|t| *self.index.get(t.as_ref()).unwrap_or(&unk)).collect()
    }

    fn forward(&self, rows: &[usize]) -> (Vec<StepCache>, Vec<f64>) {
        let hd = self.hidden();
        let mut h = vec![0.0; hd];
        let mut steps = Vec::with_capacity(rows.len());
        for &r in rows {
            let x = self.embedding.row(r);
            let mut ax = self.bias.data().to_vec();
            self.w_x.matvec_acc(x, &mut ax);
            let st = match self.cell {
                Cell::Rnn => {
                    self.w_h.matvec_acc(&h, &mut ax);
                    let hn: Vec<f64> = ax.iter().map(|a| a.tanh()).collect();
                    StepCache { h_prev: h, gates: Vec::new(), h: hn }
                }
                Cell::Gru => {
                    let mut ah = vec![0.0; 2 * hd];
                    let wh = self.w_h.data();
                    for (k, a) in ah.iter_mut().enumerate() {
                        *a = crate::numerics::dot(&wh[k * hd..(k + 1) * hd], &h);
                    }
                    let z: Vec<f64> = (0..hd).map(|k| sigmoid(ax[k] + ah[k])).collect();
                    let rg: Vec<f64> = (0..hd).map(|k| sigmoid(ax[hd + k] + ah[hd + k])).collect();
                    let rh: Vec<f64> = rg.iter().zip(&h).map(|(a, b)| a * b).collect();
                    let n: Vec<f64> = (0..hd)
                        .map(|k| (ax[2 * hd + k] + crate::numerics::dot(&wh[(2 * hd + k) * hd..(2 * hd + k + 1) * hd], &rh)).tanh())
                        .collect();
                    let hn: Vec<f64> = (0..hd).map(|k| z[k] * h[k] + (1.0 - z[k]) * n[k]).collect();
                    StepCache {
                        h_prev: h,
                        gates: [z, rg, n].concat(),
                        h: hn,
                    }
                }
            };
            h = st.h.clone();
            steps.push(st);
        }
        let mut logits = self.dense_bias.data().to_vec();
        self.dense.matvec_acc(&h, &mut logits);
        (steps, logits)
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> usize {
        argmax(&self.forward(&self.rows(tokens)).1).unwrap_or(0)
    }

    pub fn loss<S: AsRef<str>>(&self, tokens: &[S], label: usize) -> f64 {
        let (_, logits) = self.forward(&self.rows(tokens));
        log_sum_exp(&logits) - logits[label]
    }

    /// Cross-entropy of one example and its gradient.
    pub fn loss_and_grad<S: AsRef<str>>(&self, tokens: &[S], label: usize) -> (f64, SluModel) {
        let rows = self.rows(tokens);
        let (steps, logits) = self.forward(&rows);
        let hd = self.hidden();
        let mut g = self.zeros_like();
        let loss = log_sum_exp(&logits) - logits[label];
        let mut dl = softmax_unchecked(&logits);
        dl[label] -= 1.0;
        let h_last = steps.last().map(|s| s.h.clone()).unwrap_or_else(|| vec![0.0; hd]);
        g.dense.add_outer(&dl, &h_last);
        axpy(1.0, &dl, g.dense_bias.data_mut());
        let mut dh = vec![0.0; hd];
        self.dense.matvec_t_acc(&dl, &mut dh);

        for (st, &r) in steps.iter().zip(&rows).rev() {
            let x = self.embedding.row(r);
            let mut dh_prev = vec![0.0; hd];
            let da = match self.cell {
                Cell::Rnn => {
                    let da: Vec<f64> = dh.iter().zip(&st.h).map(|(d, h)| d * (1.0 - h * h)).collect();
                    g.w_h.add_outer(&da, &st.h_prev);
                    self.w_h.matvec_t_acc(&da, &mut dh_prev);
                    da
                }
                Cell::Gru => {
                    let (z, rg, n) = (&st.gates[..hd], &st.gates[hd..2 * hd], &st.gates[2 * hd..]);
                    let hp = &st.h_prev;
                    let mut da = vec![0.0; 3 * hd];
                    for k in 0..hd {
                        dh_prev[k] = dh[k] * z[k];
                        da[k] = dh[k] * (hp[k] - n[k]) * z[k] * (1.0 - z[k]);
                        da[2 * hd + k] = dh[k] * (1.0 - z[k]) * (1.0 - n[k] * n[k]);
                    }
                    let rh: Vec<f64> = rg.iter().zip(hp).map(|(a, b)| a * b).collect();
                    let wh = self.w_h.data();
                    let mut drh = vec![0.0; hd];
                    for k in 0..hd {
                        let dan = da[2 * hd + k];
                        axpy(dan, &wh[(2 * hd + k) * hd..(2 * hd + k + 1) * hd], &mut drh);
                        axpy(dan, &rh, g.w_h.row_mut(2 * hd + k));
                    }
                    for k in 0..hd {
                        dh_prev[k] += drh[k] * rg[k];
                        da[hd + k] = drh[k] * hp[k] * rg[k] * (1.0 - rg[k]);
                    }
                    for k in 0..2 * hd {
                        axpy(da[k], hp, g.w_h.row_mut(k));
                        axpy(da[k], &wh[k * hd..(k + 1) * hd], &mut dh_prev);
                    }
                    da
                }
            };
            g.w_x.add_outer(&da, x);
            axpy(1.0, &da, g.bias.data_mut());
            let mut dx = vec![0.0; x.len()];
            self.w_x.matvec_t_acc(&da, &mut dx);
            axpy(1.0, &dx, g.embedding.row_mut(r));
            dh = dh_prev;
        }
        (loss, g)
    }
}

struct StepCache {
    h_prev: Vec<f64>,
    /// GRU only: `[z; r; n]`.
    gates: Vec<f64>,
    h: Vec<f64>,
}

/// Train one model with per-example RMSProp updates and shuffled epochs.
pub fn train_slu(task: &SluTask, table: &EmbeddingTable, config: &SluConfig, seed: u64) -> Result<SluModel> {
    if task.examples.is_empty() {
        return Err(Error::InvalidArgument("empty SLU training set".into()));
    }
    let mut model = SluModel::new(table, config.cell, config.hidden, task.num_classes(), seed)?;
    let mut opt: Vec<RmsPropState> = model
        .tensors()
        .iter()
        .map(|t| RmsPropState::new(t.data().len(), config.rms_decay, config.rms_epsilon))
        .collect();
    let mut rng = Rng::new(seed ^ 0x0073_6c75);
    let mut order: Vec<usize> = (0..task.examples.len()).collect();
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let ex = &task.examples[i];
            let (loss, g) = model.loss_and_grad(&ex.tokens, ex.label);
            if !loss.is_finite() {
                return Err(Error::Diverged("SLU training loss is not finite".into()));
            }
            for ((p, gt), st) in model.tensors_mut().into_iter().zip(g.tensors()).zip(&mut opt) {
                st.apply(p.data_mut(), gt.data(), config.learning_rate)?;
            }
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SluResult {
    pub per_seed: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Train with seeds `seed, seed+1, …` and average test accuracy.
pub fn slu_train_eval(train: &SluTask, test: &SluTask, table: &EmbeddingTable, config: &SluConfig) -> Result<SluResult> {
    if train.num_classes() < 2 {
        return Err(Error::InvalidArgument("intent classification needs at least two intents".into()));
    }
    if test.examples.is_empty() || config.runs == 0 {
        return Err(Error::InvalidArgument("empty test set or zero runs".into()));
    }
    let per_seed = (0..config.runs as u64)
        .map(|k| {
            let model = train_slu(train, table, config, config.seed + k)?;
            let correct = test
                .examples
                .iter()
                .filter(|e| model.predict(&e.tokens) == e.label)
                .count();
            Ok(correct as f64 / test.examples.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_accuracy = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    Ok(SluResult { per_seed, mean_accuracy })
}

/// [`slu_train_eval`] on a deterministic 80/20 split of one task file.
pub fn slu_split_eval(task: &SluTask, table: &EmbeddingTable, config: &SluConfig, split_seed: u64) -> Result<SluResult> {
    let (tr, te) = split_indices(task.examples.len(), split_seed);
    let pick = |idx: &[usize]| SluTask {
        examples: idx.iter().map(|&i| task.examples[i].clone()).collect(),
    };
    slu_train_eval(&pick(&tr), &pick(&te), table, config)
}
