use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{self, BnCache, LayerSpec, Window2d};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub type NodeId = usize;

/// One vertex of the network graph. Nodes are stored in topological order;
/// node 0 is always the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub spec: LayerSpec,
    pub inputs: Vec<NodeId>,
    /// Per-sample output shape.
    pub out_shape: Vec<usize>,
    pub params: Vec<Tensor>,
    pub state: Vec<Tensor>,
}

/// Nodes that callers look up by role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taps {
    pub logits: NodeId,
    pub probabilities: Option<NodeId>,
    /// Activation used for Grad-CAM (last convolutional activation).
    pub gradcam: Option<NodeId>,
    /// Pooled feature vector feeding the classifier.
    pub features: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<Node>,
    pub input_shape: Vec<usize>,
    pub n_classes: usize,
    pub rng_seed: u64,
    pub taps: Taps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch-norm uses batch statistics.
    Train,
    /// Batch-norm uses running statistics.
    Infer,
}

#[derive(Debug, Clone)]
pub(crate) enum Cache {
    None,
    BatchNorm(BnCache),
    MaxPool(Vec<usize>),
}

/// Every node's output for one batch, plus what backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub outputs: Vec<Tensor>,
    pub(crate) caches: Vec<Cache>,
    pub mode: Mode,
}

impl ForwardPass {
    pub fn output(&self, id: NodeId) -> &Tensor {
        &self.outputs[id]
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// Per node, gradients matching `Node::params`.
    pub params: Vec<Vec<Tensor>>,
    /// Per node, gradient with respect to its output (`None` if unreached).
    pub activations: Vec<Option<Tensor>>,
}

pub struct NetworkBuilder {
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl NetworkBuilder {
    pub fn new(input_shape: &[usize], seed: u64) -> Self {
        NetworkBuilder {
            nodes: vec![Node {
                name: "input".into(),
                spec: LayerSpec::Input {
                    shape: input_shape.to_vec(),
                },
                inputs: Vec::new(),
                out_shape: input_shape.to_vec(),
                params: Vec::new(),
                state: Vec::new(),
            }],
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub const INPUT: NodeId = 0;

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].out_shape
    }

    /// Appends a layer. Weights draw from `U(-l, l)` with `l = sqrt(6 / fan_in)`;
    /// biases and batch-norm shift start at zero, scale and running variance at one.
    pub fn push(&mut self, name: impl Into<String>, spec: LayerSpec, inputs: &[NodeId]) -> Result<NodeId> {
        let name = name.into();
        if let Some(&bad) = inputs.iter().find(|&&i| i >= self.nodes.len()) {
            return Err(Error::invalid(format!("{name}: unknown input node {bad}")));
        }
        let in_shapes: Vec<&[usize]> = inputs.iter().map(|&i| self.nodes[i].out_shape.as_slice()).collect();
        let out_shape = spec
            .output_shape(&in_shapes)
            .map_err(|e| Error::Shape(format!("{name}: {e}")))?;
        let first = in_shapes.first().copied().unwrap_or(&[]);
        let limit = (6.0 / spec.fan_in(first).max(1) as f64).sqrt();
        let params = spec
            .param_shapes(first)
            .into_iter()
            .enumerate()
            .map(|(i, shape)| match (&spec, i) {
                (LayerSpec::BatchNorm { .. }, 0) => Tensor::filled(&shape, 1.0),
                (LayerSpec::BatchNorm { .. }, _) | (_, 1) => Tensor::zeros(&shape),
                _ => {
                    let n: usize = shape.iter().product();
                    let data = (0..n).map(|_| self.rng.random_range(-limit..limit)).collect();
                    Tensor { shape, data }
                }
            })
            .collect();
        let state = spec
            .state_shapes(first)
            .into_iter()
            .enumerate()
            .map(|(i, shape)| Tensor::filled(&shape, if i == 0 { 0.0 } else { 1.0 }))
            .collect();
        self.nodes.push(Node {
            name,
            spec,
            inputs: inputs.to_vec(),
            out_shape,
            params,
            state,
        });
        Ok(self.nodes.len() - 1)
    }

    pub fn finish(self, taps: Taps) -> Result<Network> {
        let input_shape = self.nodes[0].out_shape.clone();
        let n_classes = match self.nodes.get(taps.logits).map(|n| n.out_shape.as_slice()) {
            Some([k]) => *k,
            _ => return Err(Error::Shape("logits node must be a flat vector".into())),
        };
        let net = Network {
            nodes: self.nodes,
            input_shape,
            n_classes,
            rng_seed: self.seed,
            taps,
        };
        net.check_shapes()?;
        Ok(net)
    }
}

impl Network {
    /// Re-derives every node's output shape from its spec and inputs.
    pub fn check_shapes(&self) -> Result<()> {
        if !matches!(self.nodes.first().map(|n| &n.spec), Some(LayerSpec::Input { .. })) {
            return Err(Error::Shape("node 0 must be the input".into()));
        }
        for (id, node) in self.nodes.iter().enumerate().skip(1) {
            if node.inputs.iter().any(|&i| i >= id) {
                return Err(Error::Shape(format!("{}: inputs must precede the node", node.name)));
            }
            let in_shapes: Vec<&[usize]> = node.inputs.iter().map(|&i| self.nodes[i].out_shape.as_slice()).collect();
            let shape = node
                .spec
                .output_shape(&in_shapes)
                .map_err(|e| Error::Shape(format!("{}: {e}", node.name)))?;
            if shape != node.out_shape {
                return Err(Error::Shape(format!(
                    "{}: recorded shape {:?}, derived {shape:?}",
                    node.name, node.out_shape
                )));
            }
            let first = in_shapes.first().copied().unwrap_or(&[]);
            let expected: Vec<Vec<usize>> = node.spec.param_shapes(first);
            let actual: Vec<Vec<usize>> = node.params.iter().map(|t| t.shape.clone()).collect();
            if expected != actual {
                return Err(Error::Shape(format!("{}: parameter shapes {actual:?}, expected {expected:?}", node.name)));
            }
        }
        for id in [Some(self.taps.logits), self.taps.probabilities, self.taps.gradcam, self.taps.features]
            .into_iter()
            .flatten()
        {
            if id >= self.nodes.len() {
                return Err(Error::Shape(format!("tap refers to missing node {id}")));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.nodes.iter().flat_map(|n| &n.params).map(Tensor::len).sum()
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Adds a batch axis to a single sample shaped like `input_shape`.
    pub fn batch_of_one(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape != self.input_shape {
            return Err(Error::Shape(format!("input {:?}, network expects {:?}", x.shape, self.input_shape)));
        }
        Tensor::stack(&[x])
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<ForwardPass> {
        if x.shape.len() != self.input_shape.len() + 1 || x.shape[1..] != self.input_shape[..] || x.shape[0] == 0 {
            return Err(Error::Shape(format!(
                "batch {:?} does not match input shape {:?}",
                x.shape, self.input_shape
            )));
        }
        x.check_finite("network input")?;
        let mut outputs: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        let mut caches = Vec::with_capacity(self.nodes.len());
        outputs.push(x.clone());
        caches.push(Cache::None);
        for node in &self.nodes[1..] {
            let input = &outputs[node.inputs[0]];
            let (out, cache) = match &node.spec {
                LayerSpec::Input { .. } => unreachable!("input is node 0"),
                LayerSpec::Conv2D {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    let g = Window2d::new(&input.shape, *kernel, *stride, *padding)?;
                    let out = layers::conv_forward(input, &node.params[0].data, &node.params[1].data, &g, *filters);
                    (out, Cache::None)
                }
                LayerSpec::PointwiseConv2D { filters } => {
                    let g = Window2d::new(&input.shape, [1, 1], 1, layers::Padding::Valid)?;
                    let out = layers::conv_forward(input, &node.params[0].data, &node.params[1].data, &g, *filters);
                    (out, Cache::None)
                }
                LayerSpec::DepthwiseConv2D { kernel, stride, padding } => {
                    let g = Window2d::new(&input.shape, *kernel, *stride, *padding)?;
                    let out = layers::depthwise_forward(input, &node.params[0].data, &node.params[1].data, &g);
                    (out, Cache::None)
                }
                LayerSpec::BatchNorm { epsilon, .. } => {
                    let (out, cache) = layers::batchnorm_forward(
                        input,
                        &node.params[0].data,
                        &node.params[1].data,
                        &node.state[0].data,
                        &node.state[1].data,
                        *epsilon,
                        mode == Mode::Train,
                    );
                    (out, Cache::BatchNorm(cache))
                }
                LayerSpec::ReLU => {
                    let mut out = input.clone();
                    out.data.iter_mut().for_each(|v| *v = v.max(0.0));
                    (out, Cache::None)
                }
                LayerSpec::MaxPool2D { pool, stride, padding } => {
                    let g = Window2d::new(&input.shape, *pool, *stride, *padding)?;
                    let (out, arg) = layers::maxpool_forward(input, &g);
                    (out, Cache::MaxPool(arg))
                }
                LayerSpec::GlobalAveragePool => (layers::global_avg_pool_forward(input), Cache::None),
                LayerSpec::Dense { units, use_bias } => {
                    let bias = if *use_bias { Some(node.params[1].data.as_slice()) } else { None };
                    (layers::dense_forward(input, &node.params[0].data, bias, *units), Cache::None)
                }
                LayerSpec::Softmax => (layers::softmax_rows(input), Cache::None),
                LayerSpec::ResidualAdd { .. } => {
                    let mut out = input.clone();
                    out.add_assign(&outputs[node.inputs[1]]);
                    (out, Cache::None)
                }
            };
            out.check_finite(&format!("activation of `{}`", node.name))?;
            outputs.push(out);
            caches.push(cache);
        }
        Ok(ForwardPass { outputs, caches, mode })
    }

    /// Back-propagates the given output gradients through the graph.
    ///
    /// `seeds` pairs node ids with `dL/d(output)`. When `with_params` is
    /// false only activation gradients are computed.
    pub fn backward(&self, pass: &ForwardPass, seeds: &[(NodeId, Tensor)], with_params: bool) -> Result<Gradients> {
        let mut act: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for (id, g) in seeds {
            if g.shape != pass.outputs[*id].shape {
                return Err(Error::Shape(format!(
                    "seed for `{}` has shape {:?}, output is {:?}",
                    self.nodes[*id].name, g.shape, pass.outputs[*id].shape
                )));
            }
            accumulate(&mut act[*id], g.clone());
        }
        let mut params: Vec<Vec<Tensor>> = self
            .nodes
            .iter()
            .map(|n| if with_params { n.params.iter().map(|p| Tensor::zeros(&p.shape)).collect() } else { Vec::new() })
            .collect();

        for id in (1..self.nodes.len()).rev() {
            let Some(dy) = act[id].clone() else { continue };
            let node = &self.nodes[id];
            let x = &pass.outputs[node.inputs[0]];
            let mut set_params = |grads: Vec<Vec<f64>>| {
                if with_params {
                    for (slot, g) in params[id].iter_mut().zip(grads) {
                        slot.data = g;
                    }
                }
            };
            let dx = match &node.spec {
                LayerSpec::Input { .. } => unreachable!(),
                LayerSpec::Conv2D {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    let g = Window2d::new(&x.shape, *kernel, *stride, *padding)?;
                    let (dx, dw, db) = layers::conv_backward(x, &node.params[0].data, &dy, &g, *filters);
                    set_params(vec![dw, db]);
                    dx
                }
                LayerSpec::PointwiseConv2D { filters } => {
                    let g = Window2d::new(&x.shape, [1, 1], 1, layers::Padding::Valid)?;
                    let (dx, dw, db) = layers::conv_backward(x, &node.params[0].data, &dy, &g, *filters);
                    set_params(vec![dw, db]);
                    dx
                }
                LayerSpec::DepthwiseConv2D { kernel, stride, padding } => {
                    let g = Window2d::new(&x.shape, *kernel, *stride, *padding)?;
                    let (dx, dw, db) = layers::depthwise_backward(x, &node.params[0].data, &dy, &g);
                    set_params(vec![dw, db]);
                    dx
                }
                LayerSpec::BatchNorm { .. } => {
                    let Cache::BatchNorm(cache) = &pass.caches[id] else {
                        return Err(Error::invalid("batch-norm cache missing"));
                    };
                    let (dx, dgamma, dbeta) = layers::batchnorm_backward(&dy, &node.params[0].data, cache);
                    set_params(vec![dgamma, dbeta]);
                    dx
                }
                LayerSpec::ReLU => {
                    let mut dx = dy;
                    for (d, &v) in dx.data.iter_mut().zip(&x.data) {
                        if v <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    dx
                }
                LayerSpec::MaxPool2D { .. } => {
                    let Cache::MaxPool(arg) = &pass.caches[id] else {
                        return Err(Error::invalid("max-pool cache missing"));
                    };
                    layers::maxpool_backward(&x.shape, arg, &dy)
                }
                LayerSpec::GlobalAveragePool => layers::global_avg_pool_backward(&x.shape, &dy),
                LayerSpec::Dense { units, use_bias } => {
                    let (dx, dw, db) = layers::dense_backward(x, &node.params[0].data, &dy, *units);
                    set_params(if *use_bias { vec![dw, db] } else { vec![dw] });
                    dx
                }
                LayerSpec::Softmax => layers::softmax_backward(&pass.outputs[id], &dy),
                LayerSpec::ResidualAdd { .. } => {
                    accumulate(&mut act[node.inputs[1]], dy.clone());
                    dy
                }
            };
            accumulate(&mut act[node.inputs[0]], dx);
        }

        for (node, g) in self.nodes.iter().zip(&act) {
            if let Some(g) = g {
                g.check_finite(&format!("gradient at `{}`", node.name))?;
            }
        }
        for (node, gs) in self.nodes.iter().zip(&params) {
            for g in gs {
                g.check_finite(&format!("parameter gradient of `{}`", node.name))?;
            }
        }
        Ok(Gradients { params, activations: act })
    }

    /// Gradients of the pre-softmax score of `class_index`, summed over the
    /// batch, evaluated in inference mode.
    pub fn class_score_gradients(&self, x: &Tensor, class_index: usize, with_params: bool) -> Result<(ForwardPass, Gradients)> {
        if class_index >= self.n_classes {
            return Err(Error::invalid(format!("class {class_index} out of range for {} classes", self.n_classes)));
        }
        let pass = self.forward(x, Mode::Infer)?;
        let logits = &pass.outputs[self.taps.logits];
        let mut seed = Tensor::zeros(&logits.shape);
        for row in seed.data.chunks_exact_mut(self.n_classes) {
            row[class_index] = 1.0;
        }
        let grads = self.backward(&pass, &[(self.taps.logits, seed)], with_params)?;
        Ok((pass, grads))
    }

    /// Folds the batch statistics of a training pass into running averages:
    /// `running = momentum * running + (1 - momentum) * batch`.
    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        for (node, cache) in self.nodes.iter_mut().zip(&pass.caches) {
            if let (LayerSpec::BatchNorm { momentum, .. }, Cache::BatchNorm(c)) = (&node.spec, cache) {
                if !c.training {
                    continue;
                }
                let m = *momentum;
                for (r, b) in node.state[0].data.iter_mut().zip(&c.mean) {
                    *r = m * *r + (1.0 - m) * b;
                }
                for (r, b) in node.state[1].data.iter_mut().zip(&c.var) {
                    *r = m * *r + (1.0 - m) * b;
                }
            }
        }
    }

    /// Class probabilities for a batch (inference mode).
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        let pass = self.forward(x, Mode::Infer)?;
        Ok(layers::softmax_rows(&pass.outputs[self.taps.logits]))
    }

    /// Weight matrix `[features, classes]` of the final dense layer.
    pub fn classifier_weights(&self) -> Option<&Tensor> {
        let node = &self.nodes[self.taps.logits];
        match node.spec {
            LayerSpec::Dense { .. } => node.params.first(),
            _ => None,
        }
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(t) => t.add_assign(&g),
        None => *slot = Some(g),
    }
}

/// Pre-softmax score of one class: `sum_i features[i] * weights[i, class]`.
///
/// `dense_weights` is `[features, classes]`.
pub fn class_score(features: &[f64], dense_weights: &Tensor, class_index: usize) -> Result<f64> {
    let [rows, classes] = dense_weights.shape[..] else {
        return Err(Error::Shape(format!("dense weights must be 2-D, got {:?}", dense_weights.shape)));
    };
    if rows != features.len() {
        return Err(Error::Shape(format!("{} features for {rows} weight rows", features.len())));
    }
    if class_index >= classes {
        return Err(Error::invalid(format!("class {class_index} out of range for {classes} classes")));
    }
    Ok(features
        .iter()
        .enumerate()
        .map(|(i, o)| o * dense_weights.data[i * classes + class_index])
        .sum())
}
