use crate::error::{Error, Result};
use crate::numerics::{argmax, log_sum_exp, softmax_unchecked, Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Seeds the small random initial weights.
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            epochs: 200,
            learning_rate: 0.5,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl LogRegConfig {
    pub fn describe(&self) -> String {
        format!(
            "logreg;epochs={};lr={};l2={};seed={}",
            self.epochs, self.learning_rate, self.l2, self.seed
        )
    }
}

/// Multinomial logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    /// `classes × features`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub l2: f64,
    /// Objective after each epoch.
    pub loss_history: Vec<f64>,
}

impl LogRegModel {
    pub fn zeros(classes: usize, dim: usize, l2: f64) -> Self {
        LogRegModel {
            weights: Matrix::zeros(classes, dim),
            bias: vec![0.0; classes],
            l2,
            loss_history: Vec::new(),
        }
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.bias.clone();
        self.weights.matvec_acc(x, &mut s);
        s
    }

    /// Highest-scoring class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x)).unwrap_or(0)
    }
}

/// Objective `mean(−log p(y|x)) + (l2/2)‖W‖²` (bias unregularised) and its
/// gradient with respect to the weights and the bias.
pub fn logreg_loss_grad(model: &LogRegModel, xs: &[Vec<f64>], ys: &[usize], l2: f64) -> (f64, Matrix, Vec<f64>) {
    let (c, d) = model.weights.shape();
    let mut gw = Matrix::zeros(c, d);
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    let inv = 1.0 / xs.len() as f64;
    for (x, &y) in xs.iter().zip(ys) {
        let s = model.scores(x);
        loss += log_sum_exp(&s) - s[y];
        let mut p = softmax_unchecked(&s);
        p[y] -= 1.0;
        p.iter_mut().for_each(|v| *v *= inv);
        gw.add_outer(&p, x);
        gb.iter_mut().zip(&p).for_each(|(g, v)| *g += v);
    }
    loss = loss * inv + 0.5 * l2 * model.weights.sum_squares();
    for (g, w) in gw.data_mut().iter_mut().zip(model.weights.data()) {
        *g += l2 * w;
    }
    (loss, gw, gb)
}

/// Full-batch gradient descent. The L2 term is applied as an exact
/// proximal shrink, `W ← (W − lr·∇data) / (1 + lr·l2)`, which has the same
/// fixed point as plain gradient descent and stays stable for any `l2`.
pub fn train_logreg(xs: &[Vec<f64>], ys: &[usize], classes: usize, config: &LogRegConfig) -> Result<LogRegModel> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument("need equally many feature rows and labels".into()));
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(Error::Shape("feature rows differ in length".into()));
    }
    if ys.iter().any(|&y| y >= classes) {
        return Err(Error::InvalidArgument("label outside the class range".into()));
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::InvalidArgument("logistic regression needs at least two classes".into()));
    }
    if !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive and l2 non-negative".into()));
    }
    let mut model = LogRegModel::zeros(classes, d, config.l2);
    let mut rng = Rng::new(config.seed);
    model.weights.data_mut().iter_mut().for_each(|w| *w = 1e-3 * rng.gaussian());
    let shrink = 1.0 / (1.0 + config.learning_rate * config.l2);
    for _ in 0..config.epochs {
        let (_, gw, gb) = logreg_loss_grad(&model, xs, ys, 0.0);
        for (w, g) in model.weights.data_mut().iter_mut().zip(gw.data()) {
            *w = (*w - config.learning_rate * g) * shrink;
        }
        model.bias.iter_mut().zip(&gb).for_each(|(b, g)| *b -= config.learning_rate * g);
        let (loss, _, _) = logreg_loss_grad(&model, xs, ys, config.l2);
        if !loss.is_finite() {
            return Err(Error::Diverged("logistic regression loss is not finite".into()));
        }
        model.loss_history.push(loss);
    }
    Ok(model)
}
