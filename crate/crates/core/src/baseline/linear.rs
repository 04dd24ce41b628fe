use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::loss::{sigmoid, HeadProbabilities, LossConfig};
use crate::corpus::{Attribute, Characteristics};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub l2: f64,
    /// `None` trains full-batch with step halving, which never increases
    /// the training loss; `Some(k)` runs shuffled minibatches of size `k`.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossConfig::Default,
            epochs: 200,
            learning_rate: 1.0,
            seed: 0,
            l2: 0.0,
            batch_size: None,
        }
    }
}

/// Sparse logistic model over hashed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub dim: u32,
    pub bias: f64,
    pub weights: BTreeMap<u32, f64>,
}

impl LinearModel {
    pub fn zeros(dim: u32) -> Self {
        LinearModel { dim, bias: 0.0, weights: BTreeMap::new() }
    }

    pub fn logit(&self, x: &FeatureVector) -> f64 {
        self.bias
            + x.entries
                .iter()
                .filter_map(|(i, v)| self.weights.get(i).map(|w| w * v))
                .sum::<f64>()
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.logit(x))
    }
}

/// Feature columns actually used by a batch, remapped to `0..m`.
pub(crate) struct Compact {
    pub columns: Vec<u32>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Compact {
    pub fn new(xs: &[FeatureVector]) -> Self {
        let mut columns: Vec<u32> = xs.iter().flat_map(|x| x.entries.iter().map(|e| e.0)).collect();
        columns.sort_unstable();
        columns.dedup();
        let rows = xs
            .iter()
            .map(|x| {
                x.entries
                    .iter()
                    .map(|(i, v)| (columns.binary_search(i).expect("column present"), *v))
                    .collect()
            })
            .collect();
        Compact { columns, rows }
    }

    fn dot(&self, row: usize, params: &[f64], offset: usize, bias: f64) -> f64 {
        bias + self.rows[row].iter().map(|(j, v)| params[offset + j] * v).sum::<f64>()
    }
}

pub(crate) trait Objective {
    fn n_params(&self) -> usize;
    fn n_rows(&self) -> usize;
    fn value_grad(&self, params: &[f64], rows: &[usize], want_grad: bool) -> (f64, Vec<f64>);

    fn value(&self, params: &[f64], rows: &[usize]) -> f64 {
        self.value_grad(params, rows, false).0
    }
}

pub(crate) struct BinaryObjective<'a> {
    pub data: &'a Compact,
    pub labels: &'a [bool],
    pub loss: LossConfig,
    pub l2: f64,
}

impl Objective for BinaryObjective<'_> {
    fn n_params(&self) -> usize {
        self.data.columns.len() + 1
    }

    fn n_rows(&self) -> usize {
        self.labels.len()
    }

    fn value_grad(&self, params: &[f64], rows: &[usize], want_grad: bool) -> (f64, Vec<f64>) {
        let m = self.data.columns.len();
        let n = rows.len() as f64;
        let mut grad = if want_grad { vec![0.0; m + 1] } else { Vec::new() };
        let mut total = 0.0;
        for &r in rows {
            let z = self.data.dot(r, params, 0, params[m]);
            let (l, dz) = self.loss.value_and_dz(z, self.labels[r]);
            total += l;
            if want_grad {
                for (j, v) in &self.data.rows[r] {
                    grad[*j] += dz * v / n;
                }
                grad[m] += dz / n;
            }
        }
        let mut value = total / n;
        if self.l2 > 0.0 {
            value += 0.5 * self.l2 * params[..m].iter().map(|w| w * w).sum::<f64>();
            if want_grad {
                for j in 0..m {
                    grad[j] += self.l2 * params[j];
                }
            }
        }
        (value, grad)
    }
}

/// Six sigmoid heads and one three-way softmax head sharing the features.
/// Parameters are laid out head by head, each as `m` weights then a bias.
pub(crate) struct MultiTaskObjective<'a> {
    pub data: &'a Compact,
    pub gold: &'a [Characteristics],
    pub l2: f64,
}

pub(crate) const N_HEADS: usize = 9;

impl Objective for MultiTaskObjective<'_> {
    fn n_params(&self) -> usize {
        N_HEADS * (self.data.columns.len() + 1)
    }

    fn n_rows(&self) -> usize {
        self.gold.len()
    }

    fn value_grad(&self, params: &[f64], rows: &[usize], want_grad: bool) -> (f64, Vec<f64>) {
        let m = self.data.columns.len();
        let stride = m + 1;
        let n = rows.len() as f64;
        let mut grad = if want_grad { vec![0.0; self.n_params()] } else { Vec::new() };
        let mut total = 0.0;
        let mut dzs = [0.0; N_HEADS];
        for &r in rows {
            let gold = &self.gold[r];
            let mut z = [0.0; N_HEADS];
            for (h, zh) in z.iter_mut().enumerate() {
                *zh = self.data.dot(r, params, h * stride, params[h * stride + m]);
            }
            let mut row_loss = 0.0;
            for (h, a) in Attribute::ALL.iter().enumerate() {
                let (l, dz) = LossConfig::Default.value_and_dz(z[h], gold.get(*a));
                row_loss += l;
                dzs[h] = dz;
            }
            let logits = &z[6..9];
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let k = gold.intensity as usize;
            row_loss += lse - logits[k];
            for c in 0..3 {
                dzs[6 + c] = (logits[c] - lse).exp() - if c == k { 1.0 } else { 0.0 };
            }
            total += row_loss / 7.0;
            if want_grad {
                for (h, dz) in dzs.iter().enumerate() {
                    let g = dz / 7.0 / n;
                    for (j, v) in &self.data.rows[r] {
                        grad[h * stride + j] += g * v;
                    }
                    grad[h * stride + m] += g;
                }
            }
        }
        let mut value = total / n;
        if self.l2 > 0.0 {
            for h in 0..N_HEADS {
                for j in 0..m {
                    let w = params[h * stride + j];
                    value += 0.5 * self.l2 * w * w;
                    if want_grad {
                        grad[h * stride + j] += self.l2 * w;
                    }
                }
            }
        }
        (value, grad)
    }
}

/// Gradient descent from `params`; returns the training-loss history
/// (initial value first, then one entry per epoch).
pub(crate) fn descend(obj: &dyn Objective, params: &mut Vec<f64>, cfg: &TrainConfig) -> Vec<f64> {
    let all: Vec<usize> = (0..obj.n_rows()).collect();
    let (mut value, mut grad) = obj.value_grad(params, &all, true);
    let mut history = vec![value];
    match cfg.batch_size {
        None => {
            for _ in 0..cfg.epochs {
                let mut lr = cfg.learning_rate;
                let mut moved = false;
                for _ in 0..50 {
                    let cand: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - lr * g).collect();
                    let v = obj.value(&cand, &all);
                    if v <= value {
                        *params = cand;
                        moved = true;
                        break;
                    }
                    lr *= 0.5;
                }
                if !moved {
                    break;
                }
                (value, grad) = obj.value_grad(params, &all, true);
                history.push(value);
            }
        }
        Some(k) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut order = all.clone();
            for _ in 0..cfg.epochs {
                order.shuffle(&mut rng);
                for chunk in order.chunks(k.max(1)) {
                    let (_, g) = obj.value_grad(params, chunk, true);
                    for (p, gi) in params.iter_mut().zip(&g) {
                        *p -= cfg.learning_rate * gi;
                    }
                }
                history.push(obj.value(params, &all));
            }
        }
    }
    history
}

/// Largest coordinate-wise relative gap between `obj`'s analytic gradient
/// at `params` and central differences with step 1e-5.
pub(crate) fn gradient_deviation(obj: &dyn Objective, params: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let all: Vec<usize> = (0..obj.n_rows()).collect();
    let (_, analytic) = obj.value_grad(params, &all, true);
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        p[i] = params[i] + H;
        let up = obj.value(&p, &all);
        p[i] = params[i] - H;
        let down = obj.value(&p, &all);
        p[i] = params[i];
        let numeric = (up - down) / (2.0 * H);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

fn check_batch(n_x: usize, n_y: usize) -> Result<()> {
    if n_x != n_y {
        return Err(Error::LengthMismatch { left: n_x, right: n_y });
    }
    if n_x == 0 {
        return Err(Error::Degenerate("empty training set".into()));
    }
    Ok(())
}

fn batch_dim(xs: &[FeatureVector]) -> Result<u32> {
    let dim = xs[0].dim;
    if xs.iter().any(|x| x.dim != dim) {
        return Err(Error::invalid("features", "mixed feature dimensions"));
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLinear {
    pub model: LinearModel,
    /// The loss actually optimized, with class weights filled in.
    pub loss: LossConfig,
    pub loss_history: Vec<f64>,
}

pub fn train_linear(xs: &[FeatureVector], ys: &[bool], cfg: &TrainConfig) -> Result<TrainedLinear> {
    check_batch(xs.len(), ys.len())?;
    if ys.iter().all(|y| *y) || ys.iter().all(|y| !*y) {
        return Err(Error::Degenerate("training labels contain a single class".into()));
    }
    if cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 {
        return Err(Error::invalid("learning_rate", "must be positive"));
    }
    let dim = batch_dim(xs)?;
    let loss = cfg.loss.resolve(ys)?;
    let data = Compact::new(xs);
    let obj = BinaryObjective { data: &data, labels: ys, loss, l2: cfg.l2 };
    let mut params = vec![0.0; obj.n_params()];
    let loss_history = descend(&obj, &mut params, cfg);
    let m = data.columns.len();
    let weights = data
        .columns
        .iter()
        .zip(&params)
        .filter(|(_, w)| **w != 0.0)
        .map(|(c, w)| (*c, *w))
        .collect();
    Ok(TrainedLinear { model: LinearModel { dim, bias: params[m], weights }, loss, loss_history })
}

/// Analytic versus finite-difference gradient of `loss` for `model` on the
/// batch, over the bias and every feature the batch touches.
pub fn grad_check(model: &LinearModel, xs: &[FeatureVector], ys: &[bool], loss: &LossConfig) -> Result<f64> {
    check_batch(xs.len(), ys.len())?;
    let loss = loss.resolve(ys)?;
    let data = Compact::new(xs);
    let mut params: Vec<f64> = data.columns.iter().map(|c| model.weights.get(c).copied().unwrap_or(0.0)).collect();
    params.push(model.bias);
    let obj = BinaryObjective { data: &data, labels: ys, loss, l2: 0.0 };
    Ok(gradient_deviation(&obj, &params))
}

/// Analytic gradient of the mean loss at `model` (weights in batch column
/// order, then bias). Exposed for closed-form checks.
pub fn linear_gradient(model: &LinearModel, xs: &[FeatureVector], ys: &[bool], loss: &LossConfig) -> Result<(Vec<u32>, Vec<f64>)> {
    check_batch(xs.len(), ys.len())?;
    let loss = loss.resolve(ys)?;
    let data = Compact::new(xs);
    let mut params: Vec<f64> = data.columns.iter().map(|c| model.weights.get(c).copied().unwrap_or(0.0)).collect();
    params.push(model.bias);
    let obj = BinaryObjective { data: &data, labels: ys, loss, l2: 0.0 };
    let all: Vec<usize> = (0..ys.len()).collect();
    let (_, grad) = obj.value_grad(&params, &all, true);
    Ok((data.columns.clone(), grad))
}

/// One linear head per attribute plus three intensity logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskModel {
    pub dim: u32,
    /// Heads in [`Attribute::ALL`] order followed by intensity 0, 1, 2.
    pub heads: Vec<LinearModel>,
}

impl MultiTaskModel {
    pub fn zeros(dim: u32) -> Self {
        MultiTaskModel { dim, heads: (0..N_HEADS).map(|_| LinearModel::zeros(dim)).collect() }
    }

    pub fn predict(&self, x: &FeatureVector) -> HeadProbabilities {
        let z: Vec<f64> = self.heads.iter().map(|h| h.logit(x)).collect();
        let binary = z[..6].iter().map(|v| sigmoid(*v)).collect();
        let max = z[6..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z[6..].iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let intensity = z[6..].iter().map(|v| (v - lse).exp()).collect();
        HeadProbabilities { binary, intensity }
    }

    fn params(&self, data: &Compact) -> Vec<f64> {
        let mut p = Vec::with_capacity(N_HEADS * (data.columns.len() + 1));
        for h in &self.heads {
            p.extend(data.columns.iter().map(|c| h.weights.get(c).copied().unwrap_or(0.0)));
            p.push(h.bias);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMultiTask {
    pub model: MultiTaskModel,
    pub loss_history: Vec<f64>,
}

pub fn train_multitask(xs: &[FeatureVector], gold: &[Characteristics], cfg: &TrainConfig) -> Result<TrainedMultiTask> {
    check_batch(xs.len(), gold.len())?;
    if let Some(c) = gold.iter().find(|c| c.intensity > 2) {
        return Err(Error::Domain(format!("gold intensity {} outside 0..=2", c.intensity)));
    }
    let dim = batch_dim(xs)?;
    let data = Compact::new(xs);
    let obj = MultiTaskObjective { data: &data, gold, l2: cfg.l2 };
    let mut params = vec![0.0; obj.n_params()];
    let loss_history = descend(&obj, &mut params, cfg);
    let m = data.columns.len();
    let heads = params
        .chunks(m + 1)
        .map(|chunk| LinearModel {
            dim,
            bias: chunk[m],
            weights: data
                .columns
                .iter()
                .zip(chunk)
                .filter(|(_, w)| **w != 0.0)
                .map(|(c, w)| (*c, *w))
                .collect(),
        })
        .collect();
    Ok(TrainedMultiTask { model: MultiTaskModel { dim, heads }, loss_history })
}

pub fn grad_check_multitask(model: &MultiTaskModel, xs: &[FeatureVector], gold: &[Characteristics]) -> Result<f64> {
    check_batch(xs.len(), gold.len())?;
    let data = Compact::new(xs);
    let params = model.params(&data);
    let obj = MultiTaskObjective { data: &data, gold, l2: 0.0 };
    Ok(gradient_deviation(&obj, &params))
}
