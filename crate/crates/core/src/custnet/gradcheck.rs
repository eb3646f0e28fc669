//! Central finite-difference checks of the hand-written backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{LayerSpec, Padding};
use super::network::{Mode, Network, NetworkBuilder, NodeId, Taps};
use super::tensor::Tensor;
use crate::error::Result;

/// Outcome of one check: the worst relative error over every checked entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
}

/// `|a - b| / max(|a|, |b|, 1e-6)`; the floor keeps entries whose true
/// gradient is zero from dividing by rounding noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Fixed random projection of one node's output: `L = sum r * y`.
fn loss(net: &Network, x: &Tensor, mode: Mode, target: NodeId, r: &[f64]) -> Result<f64> {
    let pass = net.forward(x, mode)?;
    let y = &pass.outputs[target];
    Ok(y.data.iter().zip(r).map(|(a, b)| a * b).sum())
}

/// Compares backprop gradients of a random projection of node `target`
/// against central differences with step `eps`, for the input and for
/// every parameter. `max_per_tensor` subsamples large tensors.
pub fn check_network(
    name: &str,
    net: &Network,
    target: NodeId,
    x: &Tensor,
    mode: Mode,
    eps: f64,
    max_per_tensor: Option<usize>,
    seed: u64,
) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pass = net.forward(x, mode)?;
    let out_len = pass.outputs[target].len();
    let r: Vec<f64> = (0..out_len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let seed_grad = Tensor::new(pass.outputs[target].shape.clone(), r.clone())?;
    let grads = net.backward(&pass, &[(target, seed_grad)], true)?;

    let mut worst = 0.0f64;
    let mut checked = 0;
    let pick = |len: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        match max_per_tensor {
            Some(k) if k < len => (0..k).map(|_| rng.random_range(0..len)).collect(),
            _ => (0..len).collect(),
        }
    };

    let dx = grads.activations[0].clone().unwrap_or_else(|| Tensor::zeros(&x.shape));
    for i in pick(x.len(), &mut rng) {
        let mut xp = x.clone();
        xp.data[i] += eps;
        let lp = loss(net, &xp, mode, target, &r)?;
        xp.data[i] -= 2.0 * eps;
        let lm = loss(net, &xp, mode, target, &r)?;
        worst = worst.max(relative_error(dx.data[i], (lp - lm) / (2.0 * eps)));
        checked += 1;
    }

    let mut probe = net.clone();
    for id in 0..net.nodes.len() {
        for p in 0..net.nodes[id].params.len() {
            for i in pick(net.nodes[id].params[p].len(), &mut rng) {
                let orig = probe.nodes[id].params[p].data[i];
                probe.nodes[id].params[p].data[i] = orig + eps;
                let lp = loss(&probe, x, mode, target, &r)?;
                probe.nodes[id].params[p].data[i] = orig - eps;
                let lm = loss(&probe, x, mode, target, &r)?;
                probe.nodes[id].params[p].data[i] = orig;
                let analytic = grads.params[id][p].data[i];
                worst = worst.max(relative_error(analytic, (lp - lm) / (2.0 * eps)));
                checked += 1;
            }
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_error: worst,
        checked,
    })
}

fn randomize(net: &mut Network, rng: &mut ChaCha8Rng) {
    for node in &mut net.nodes {
        let is_bn = matches!(node.spec, LayerSpec::BatchNorm { .. });
        for (i, p) in node.params.iter_mut().enumerate() {
            for v in &mut p.data {
                *v = if is_bn && i == 0 {
                    rng.random_range(0.5..1.5)
                } else {
                    rng.random_range(-1.0..1.0)
                };
            }
        }
        for (i, s) in node.state.iter_mut().enumerate() {
            for v in &mut s.data {
                *v = if i == 0 { rng.random_range(-0.5..0.5) } else { rng.random_range(0.5..2.0) };
            }
        }
    }
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor {
        shape: shape.to_vec(),
        data: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// A toy network exercising one layer kind, the node whose output the
/// check projects, the mode to run in, and an input batch of three.
pub struct ToyCase {
    pub name: String,
    pub net: Network,
    pub target: NodeId,
    pub mode: Mode,
    pub input: Tensor,
}

impl ToyCase {
    pub fn check(&self, eps: f64, seed: u64) -> Result<GradCheck> {
        check_network(&self.name, &self.net, self.target, &self.input, self.mode, eps, None, seed)
    }
}

/// One small randomly-initialized network per layer kind, plus variants for
/// padding, stride, bias and batch-norm mode. Each network is
/// `input -> layer [-> pool] -> dense`; the check targets the layer itself.
pub fn layer_kind_cases(seed: u64) -> Result<Vec<ToyCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spatial = [5usize, 6, 3];
    let flat = [5usize];
    let conv = |filters, k, stride, padding| LayerSpec::Conv2D {
        filters,
        kernel: [k, k],
        stride,
        padding,
    };
    let specs: Vec<(&str, &[usize], LayerSpec, Mode)> = vec![
        ("conv2d_same_s1", &spatial, conv(4, 3, 1, Padding::Same), Mode::Infer),
        ("conv2d_same_s2", &spatial, conv(2, 3, 2, Padding::Same), Mode::Infer),
        ("conv2d_valid", &spatial, conv(2, 2, 1, Padding::Valid), Mode::Infer),
        (
            "depthwise_conv2d",
            &spatial,
            LayerSpec::DepthwiseConv2D {
                kernel: [3, 3],
                stride: 2,
                padding: Padding::Same,
            },
            Mode::Infer,
        ),
        ("pointwise_conv2d", &spatial, LayerSpec::PointwiseConv2D { filters: 4 }, Mode::Infer),
        ("batch_norm_train", &spatial, LayerSpec::batch_norm(), Mode::Train),
        ("batch_norm_infer", &spatial, LayerSpec::batch_norm(), Mode::Infer),
        ("relu", &spatial, LayerSpec::ReLU, Mode::Infer),
        (
            "max_pool2d",
            &spatial,
            LayerSpec::MaxPool2D {
                pool: [3, 3],
                stride: 2,
                padding: Padding::Same,
            },
            Mode::Infer,
        ),
        ("global_average_pool", &spatial, LayerSpec::GlobalAveragePool, Mode::Infer),
        ("dense_bias", &flat, LayerSpec::Dense { units: 3, use_bias: true }, Mode::Infer),
        ("dense_no_bias", &flat, LayerSpec::Dense { units: 3, use_bias: false }, Mode::Infer),
        ("softmax", &flat, LayerSpec::Softmax, Mode::Infer),
        ("residual_add", &spatial, conv(3, 3, 1, Padding::Same), Mode::Infer),
    ];
    let mut cases = Vec::new();
    for (name, shape, spec, mode) in specs {
        let mut b = NetworkBuilder::new(shape, seed);
        let mut target = b.push(name, spec, &[NetworkBuilder::INPUT])?;
        if name == "residual_add" {
            let junction = LayerSpec::ResidualAdd { junction: "toy".into() };
            target = b.push("add", junction, &[NetworkBuilder::INPUT, target])?;
        }
        let mut tail = target;
        if b.shape(tail).len() == 3 {
            tail = b.push("pool", LayerSpec::GlobalAveragePool, &[tail])?;
        }
        let logits = b.push("logits", LayerSpec::Dense { units: 2, use_bias: false }, &[tail])?;
        let mut net = b.finish(Taps {
            logits,
            probabilities: None,
            gradcam: None,
            features: None,
        })?;
        randomize(&mut net, &mut rng);
        let input = random_tensor(&[&[3usize][..], shape].concat(), &mut rng);
        cases.push(ToyCase {
            name: name.to_string(),
            net,
            target,
            mode,
            input,
        });
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_layer_kind_passes_finite_differences() {
        for case in layer_kind_cases(11).unwrap() {
            let r = case.check(1e-5, 3).unwrap();
            assert!(r.max_rel_error < 1e-4, "{}: {}", r.name, r.max_rel_error);
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
        assert!(relative_error(1e-9, 0.0) <= 1e-3);
    }
}
