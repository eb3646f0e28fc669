use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::alpha::{image_to_input, AlphaMode};
use super::layers::softmax_rows;
use super::network::{Gradients, Mode, Network};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::label::Label;
use crate::spectral::FeatureImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Loss is always mean softmax cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub train_fraction: f64,
    pub alpha_mode: AlphaMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            seed: 0,
            train_fraction: 0.8,
            alpha_mode: AlphaMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            ));
        }
        out
    }
}

/// Stratified split: per class, `round(fraction * count)` examples (in a
/// seeded shuffle order) go to training, the rest to validation. Every
/// class needs at least two training and one validation example.
pub fn stratified_split(labels: &[Label], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in Label::CLASSES {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_train = (train_fraction * idx.len() as f64).round() as usize;
        if n_train < 2 || n_train >= idx.len() {
            return Err(Error::ClassStarvation(format!(
                "class {class}: {} examples split into {n_train} train / {} validation",
                idx.len(),
                idx.len().saturating_sub(n_train)
            )));
        }
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..]);
    }
    if labels.iter().any(|l| *l == Label::Unknown) {
        return Err(Error::invalid("unlabeled example in training data"));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> (f64, Tensor) {
    let probs = softmax_rows(logits);
    let k = logits.shape[1];
    let n = targets.len() as f64;
    let mut grad = probs.clone();
    let mut loss = 0.0;
    for (s, &t) in targets.iter().enumerate() {
        loss -= probs.data[s * k + t].max(f64::MIN_POSITIVE).ln();
        grad.data[s * k + t] -= 1.0;
    }
    grad.data.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-parameter optimizer state.
pub struct OptimizerState {
    kind: Optimizer,
    step: u64,
    first: Vec<Vec<Vec<f64>>>,
    second: Vec<Vec<Vec<f64>>>,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, net: &Network) -> Self {
        let zeros = || -> Vec<Vec<Vec<f64>>> {
            net.nodes
                .iter()
                .map(|n| n.params.iter().map(|p| vec![0.0; p.len()]).collect())
                .collect()
        };
        let needs_first = !matches!(kind, Optimizer::Sgd);
        let needs_second = matches!(kind, Optimizer::Adam { .. });
        OptimizerState {
            kind,
            step: 0,
            first: if needs_first { zeros() } else { Vec::new() },
            second: if needs_second { zeros() } else { Vec::new() },
        }
    }

    /// Applies one update with learning rate `lr`.
    pub fn apply(&mut self, net: &mut Network, grads: &Gradients, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        for (id, node) in net.nodes.iter_mut().enumerate() {
            for (p, param) in node.params.iter_mut().enumerate() {
                let g = &grads.params[id][p].data;
                match self.kind {
                    Optimizer::Sgd => {
                        for (w, gv) in param.data.iter_mut().zip(g) {
                            *w -= lr * gv;
                        }
                    }
                    Optimizer::SgdMomentum { momentum } => {
                        let v = &mut self.first[id][p];
                        for ((w, gv), vv) in param.data.iter_mut().zip(g).zip(v.iter_mut()) {
                            *vv = momentum * *vv + gv;
                            *w -= lr * *vv;
                        }
                    }
                    Optimizer::Adam { beta1, beta2, epsilon } => {
                        let m = &mut self.first[id][p];
                        let v = &mut self.second[id][p];
                        let c1 = 1.0 - beta1.powi(t);
                        let c2 = 1.0 - beta2.powi(t);
                        for (((w, gv), mv), vv) in param.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                            *mv = beta1 * *mv + (1.0 - beta1) * gv;
                            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                            *w -= lr * (*mv / c1) / ((*vv / c2).sqrt() + epsilon);
                        }
                    }
                }
            }
        }
    }
}

/// Loss and accuracy of the network on a set of inputs, inference mode.
pub fn evaluate_set(net: &Network, inputs: &[Tensor], targets: &[usize], batch_size: usize) -> Result<(f64, f64)> {
    if inputs.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for (xs, ts) in inputs.chunks(batch_size).zip(targets.chunks(batch_size)) {
        let batch = Tensor::stack(&xs.iter().collect::<Vec<_>>())?;
        let pass = net.forward(&batch, Mode::Infer)?;
        let logits = &pass.outputs[net.taps.logits];
        let (loss, _) = cross_entropy(logits, ts);
        loss_sum += loss * ts.len() as f64;
        for (row, &t) in logits.data.chunks_exact(net.n_classes).zip(ts) {
            if argmax(row) == t {
                correct += 1;
            }
        }
    }
    Ok((loss_sum / inputs.len() as f64, correct as f64 / inputs.len() as f64))
}

/// Mini-batch training with a seeded shuffle and a stratified validation
/// hold-out. History holds inference-mode loss/accuracy after each epoch.
pub fn train(net: &Network, examples: &[(FeatureImage, Label)], cfg: &TrainConfig) -> Result<(Network, History)> {
    cfg.validate()?;
    let labels: Vec<Label> = examples.iter().map(|(_, l)| *l).collect();
    for class in Label::CLASSES {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < 2 {
            return Err(Error::ClassStarvation(format!("class {class} has {n} examples; need at least 2")));
        }
    }
    let (train_idx, val_idx) = stratified_split(&labels, cfg.train_fraction, cfg.seed)?;
    let inputs: Vec<Tensor> = examples
        .iter()
        .map(|(img, _)| image_to_input(img, &net.input_shape, cfg.alpha_mode))
        .collect::<Result<_>>()?;
    let targets: Vec<usize> = labels.iter().map(|l| l.index().expect("labeled")).collect();
    let pick = |idx: &[usize]| -> (Vec<Tensor>, Vec<usize>) {
        (idx.iter().map(|&i| inputs[i].clone()).collect(), idx.iter().map(|&i| targets[i]).collect())
    };
    let (train_x, train_t) = pick(&train_idx);
    let (val_x, val_t) = pick(&val_idx);

    let mut net = net.clone();
    let mut opt = OptimizerState::new(cfg.optimizer, &net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = History::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = Tensor::stack(&chunk.iter().map(|&i| &train_x[i]).collect::<Vec<_>>())?;
            let ts: Vec<usize> = chunk.iter().map(|&i| train_t[i]).collect();
            let pass = net.forward(&batch, Mode::Train)?;
            let (loss, dlogits) = cross_entropy(&pass.outputs[net.taps.logits], &ts);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, batch {b}")));
            }
            let grads = net.backward(&pass, &[(net.taps.logits, dlogits)], true)?;
            opt.apply(&mut net, &grads, cfg.learning_rate);
            net.update_running_stats(&pass);
        }
        let (train_loss, train_accuracy) = evaluate_set(&net, &train_x, &train_t, cfg.batch_size)?;
        let (val_loss, val_accuracy) = evaluate_set(&net, &val_x, &val_t, cfg.batch_size)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss after epoch {epoch}")));
        }
        log::info!(
            "epoch {:>3}: train loss {train_loss:.4} acc {train_accuracy:.3} | val loss {val_loss:.4} acc {val_accuracy:.3}",
            epoch + 1
        );
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pd: usize, hc: usize) -> Vec<Label> {
        std::iter::repeat(Label::Pd).take(pd).chain(std::iter::repeat(Label::Hc).take(hc)).collect()
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let l = labels(100, 100);
        let (tr, va) = stratified_split(&l, 0.8, 7).unwrap();
        assert_eq!(tr.len(), 160);
        assert_eq!(va.len(), 40);
        assert_eq!(va.iter().filter(|&&i| l[i] == Label::Pd).count(), 20);
        assert_eq!(stratified_split(&l, 0.8, 7).unwrap(), (tr.clone(), va));
        assert_ne!(stratified_split(&l, 0.8, 8).unwrap().0, tr);
    }

    #[test]
    fn extreme_fraction_starves_validation() {
        let l = labels(10, 10);
        assert!(matches!(stratified_split(&l, 0.999, 0), Err(Error::ClassStarvation(_))));
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_onehot() {
        let logits = Tensor::new(vec![2, 2], vec![0.0, 0.0, 1.0, -1.0]).unwrap();
        let (loss, g) = cross_entropy(&logits, &[0, 1]);
        let p = 1.0 / (1.0 + (-2.0f64).exp());
        let expected = (2f64.ln() - (1.0 - p).ln()) / 2.0;
        assert!((loss - expected).abs() < 1e-12);
        assert!((g.data[0] - (0.5 - 1.0) / 2.0).abs() < 1e-12);
        assert!((g.data[3] - ((1.0 - p) - 1.0) / 2.0).abs() < 1e-12);
    }
}
