//! Gradient-boosted decision trees with logistic loss, trained on CNN
//! embeddings. A plain numeric GBDT stands in for CatBoost: every feature
//! is continuous, so ordered boosting and categorical target statistics
//! have nothing to act on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::custnet::{image_to_input, AlphaMode, Mode, Network, Tensor};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::spectral::FeatureImage;

/// CNN pooled features followed by the softmax probabilities (HC, PD).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub source_id: String,
    pub features: Vec<f64>,
    pub label: Label,
}

/// Runs the frozen network over each image and captures the pooled feature
/// vector and the class probabilities.
pub fn extract_embeddings(
    net: &Network,
    images: &[(FeatureImage, Label, String)],
    alpha: AlphaMode,
) -> Result<Vec<EmbeddingRow>> {
    let features_id = net
        .taps
        .features
        .ok_or_else(|| Error::invalid("network has no feature tap"))?;
    let mut rows = Vec::with_capacity(images.len());
    for chunk in images.chunks(16) {
        let inputs = chunk
            .iter()
            .map(|(img, _, _)| image_to_input(img, &net.input_shape, alpha))
            .collect::<Result<Vec<Tensor>>>()?;
        let x = Tensor::stack(&inputs.iter().collect::<Vec<_>>())?;
        let pass = net.forward(&x, Mode::Infer)?;
        let feats = pass.output(features_id);
        let probs = crate::custnet::layers::softmax_rows(pass.output(net.taps.logits));
        let f = feats.len() / chunk.len();
        for (s, (_, label, id)) in chunk.iter().enumerate() {
            let mut v = feats.data[s * f..(s + 1) * f].to_vec();
            v.extend_from_slice(&probs.data[s * net.n_classes..(s + 1) * net.n_classes]);
            rows.push(EmbeddingRow {
                source_id: id.clone(),
                features: v,
                label: *label,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Recorded with the model. Split search is exhaustive, so training
    /// draws no random numbers.
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 2,
            seed: 0,
        }
    }
}

/// Regression tree; a sample goes left when `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    /// Log-odds of the PD prior in the training set.
    pub base_score: f64,
    pub n_rounds: usize,
    pub feature_len: usize,
    pub params: GbdtParams,
    /// Mean training log-loss before the first round and after each round.
    pub train_log_loss: Vec<f64>,
    /// Fingerprint of the network whose embeddings trained this model.
    pub net_fingerprint: String,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn log_loss(y: &[f64], f: &[f64]) -> f64 {
    // -[y ln p + (1 - y) ln(1 - p)] with p = sigmoid(f), written stably.
    let total: f64 = y
        .iter()
        .zip(f)
        .map(|(&y, &f)| f.max(0.0) - f * y + (-f.abs()).exp().ln_1p())
        .sum();
    total / y.len() as f64
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    residual: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let sum: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        TreeNode::Leaf {
            value: sum / idx.len() as f64,
        }
    }

    /// Best split by squared-error reduction; ties keep the lowest feature,
    /// then the lowest threshold.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let n_features = self.x[idx[0]].len();
        let mut order = idx.to_vec();
        for f in 0..n_features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.residual[order[k]];
                let (a, b) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - parent;
                if gain > 0.0 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, a + (b - a) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&self, idx: &[usize], depth: usize) -> TreeNode {
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        TreeNode::Split {
            feature,
            threshold,
            left: Box::new(self.grow(&l, depth + 1)),
            right: Box::new(self.grow(&r, depth + 1)),
        }
    }
}

/// Fits `n_rounds` depth-limited regression trees to the residual `y - p`
/// of the logistic loss. Leaves hold the mean residual; a step of at most
/// `lr <= 8` times that mean cannot raise the loss (its curvature is at
/// most 1/4), and the loss is checked after every round.
pub fn gbdt_train(rows: &[EmbeddingRow], params: &GbdtParams) -> Result<GbdtModel> {
    if params.n_rounds == 0 {
        return Err(Error::invalid("n_rounds must be at least 1"));
    }
    if params.max_depth == 0 || params.min_samples_leaf == 0 {
        return Err(Error::invalid("max_depth and min_samples_leaf must be positive"));
    }
    if !(0.0..=8.0).contains(&params.learning_rate) {
        return Err(Error::invalid(format!(
            "learning_rate {} outside [0, 8]",
            params.learning_rate
        )));
    }
    let Some(first) = rows.first() else {
        return Err(Error::invalid("no training rows"));
    };
    let feature_len = first.features.len();
    let mut y = Vec::with_capacity(rows.len());
    for r in rows {
        if r.features.len() != feature_len {
            return Err(Error::Shape(format!(
                "row {} has {} features, expected {feature_len}",
                r.source_id,
                r.features.len()
            )));
        }
        if let Some(bad) = r.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("row {}: feature {bad}", r.source_id)));
        }
        y.push(match r.label {
            Label::Pd => 1.0,
            Label::Hc => 0.0,
            Label::Unknown => return Err(Error::invalid(format!("row {} is unlabeled", r.source_id))),
        });
    }
    let n_pos: f64 = y.iter().sum();
    if n_pos == 0.0 || n_pos == y.len() as f64 {
        return Err(Error::ClassStarvation("boosting needs both classes".into()));
    }
    let prior = n_pos / y.len() as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let idx: Vec<usize> = (0..rows.len()).collect();

    let mut f = vec![base_score; rows.len()];
    let mut losses = vec![log_loss(&y, &f)];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for round in 0..params.n_rounds {
        let residual: Vec<f64> = y.iter().zip(&f).map(|(y, f)| y - sigmoid(*f)).collect();
        let tree = Builder {
            x: &x,
            residual: &residual,
            max_depth: params.max_depth,
            min_leaf: params.min_samples_leaf,
        }
        .grow(&idx, 0);
        for (fi, xi) in f.iter_mut().zip(&x) {
            *fi += params.learning_rate * tree.predict(xi);
        }
        let loss = log_loss(&y, &f);
        let prev = *losses.last().unwrap();
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("boosting log-loss at round {}", round + 1)));
        }
        if loss > prev + 1e-12 * prev.max(1.0) {
            return Err(Error::NonFinite(format!(
                "boosting log-loss rose from {prev} to {loss} at round {}",
                round + 1
            )));
        }
        losses.push(loss);
        trees.push(tree);
    }
    Ok(GbdtModel {
        trees,
        learning_rate: params.learning_rate,
        base_score,
        n_rounds: params.n_rounds,
        feature_len,
        params: params.clone(),
        train_log_loss: losses,
        net_fingerprint: String::new(),
    })
}

impl GbdtModel {
    /// Probability of PD for one embedding.
    pub fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_len {
            return Err(Error::Shape(format!(
                "{} features given, model expects {} (wrong network/model pairing?)",
                features.len(),
                self.feature_len
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        Ok(sigmoid(self.base_score + self.learning_rate * sum))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// PD when the probability reaches the threshold (ties go to PD).
pub fn label_for(probability: f64, threshold: f64) -> Label {
    if probability >= threshold {
        Label::Pd
    } else {
        Label::Hc
    }
}

/// Final prediction for one image: CNN embedding, then the boosted trees.
/// Refuses a model trained on another network's embeddings.
pub fn predict_boosted(
    net: &Network,
    model: &GbdtModel,
    img: &FeatureImage,
    alpha: AlphaMode,
    threshold: f64,
) -> Result<(Label, f64)> {
    if !model.net_fingerprint.is_empty() && model.net_fingerprint != crate::custnet::network_fingerprint(net) {
        return Err(Error::invalid("boost model was trained against a different network"));
    }
    let row = extract_embeddings(net, &[(img.clone(), Label::Unknown, String::new())], alpha)?;
    let p = model.predict_proba(&row[0].features)?;
    Ok((label_for(p, threshold), p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn row(features: Vec<f64>, label: Label) -> EmbeddingRow {
        EmbeddingRow {
            source_id: String::new(),
            features,
            label,
        }
    }

    fn random_rows(seed: u64, n: usize, d: usize) -> Vec<EmbeddingRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let f = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                row(f, if i % 3 == 0 { Label::Pd } else { Label::Hc })
            })
            .collect()
    }

    #[test]
    fn separable_feature_is_learned_within_ten_rounds() {
        let rows: Vec<_> = (0..20)
            .map(|i| row(vec![i as f64], if i < 8 { Label::Hc } else { Label::Pd }))
            .collect();
        let p = GbdtParams {
            n_rounds: 10,
            max_depth: 1,
            ..GbdtParams::default()
        };
        let m = gbdt_train(&rows, &p).unwrap();
        for r in &rows {
            assert_eq!(label_for(m.predict_proba(&r.features).unwrap(), 0.5), r.label);
        }
        assert_eq!(m.trees[0].depth(), 1);
    }

    #[test]
    fn loss_never_increases_on_random_data() {
        for seed in 0..5 {
            let m = gbdt_train(&random_rows(seed, 80, 4), &GbdtParams::default()).unwrap();
            assert_eq!(m.train_log_loss.len(), 101);
            for w in m.train_log_loss.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn zero_learning_rate_predicts_the_prior() {
        let rows = random_rows(1, 30, 2);
        let p = GbdtParams {
            n_rounds: 1,
            learning_rate: 0.0,
            ..GbdtParams::default()
        };
        let m = gbdt_train(&rows, &p).unwrap();
        let prior = rows.iter().filter(|r| r.label == Label::Pd).count() as f64 / 30.0;
        for r in &rows {
            let q = m.predict_proba(&r.features).unwrap();
            assert!((q - prior).abs() < 1e-12);
            assert_eq!(label_for(q, 0.5), Label::Hc);
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let one_class: Vec<_> = (0..5).map(|i| row(vec![i as f64], Label::Pd)).collect();
        assert!(gbdt_train(&one_class, &GbdtParams::default()).is_err());
        let p = GbdtParams {
            n_rounds: 0,
            ..GbdtParams::default()
        };
        assert!(gbdt_train(&random_rows(0, 10, 2), &p).is_err());
        let m = gbdt_train(&random_rows(0, 10, 2), &GbdtParams::default()).unwrap();
        assert!(m.predict_proba(&[0.0]).is_err());
    }

    #[test]
    fn constant_features_give_constant_stumps() {
        let rows: Vec<_> = (0..10)
            .map(|i| row(vec![1.0, 1.0], if i < 5 { Label::Hc } else { Label::Pd }))
            .collect();
        let m = gbdt_train(&rows, &GbdtParams::default()).unwrap();
        assert!(m.trees.iter().all(|t| matches!(t, TreeNode::Leaf { .. })));
    }

    #[test]
    fn training_is_deterministic_and_tie_at_threshold_is_pd() {
        let rows = random_rows(3, 40, 3);
        assert_eq!(
            gbdt_train(&rows, &GbdtParams::default()).unwrap(),
            gbdt_train(&rows, &GbdtParams::default()).unwrap()
        );
        assert_eq!(label_for(0.5, 0.5), Label::Pd);
        assert_eq!(label_for(0.4999, 0.5), Label::Hc);
    }

    #[test]
    fn json_round_trip() {
        let m = gbdt_train(&random_rows(4, 30, 2), &GbdtParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("boost.json");
        m.save(&p).unwrap();
        assert_eq!(GbdtModel::load(&p).unwrap(), m);
    }
}
