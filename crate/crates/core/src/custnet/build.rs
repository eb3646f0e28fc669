use serde::{Deserialize, Serialize};

use super::layers::{LayerSpec, Padding};
use super::network::{Network, NetworkBuilder, NodeId, Taps};
use crate::error::{Error, Result};

/// Widths and depth of the Xception-style classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CustNetConfig {
    /// `[H, W, C]` after alpha stripping.
    pub input_shape: [usize; 3],
    pub n_classes: usize,
    pub num_middle_blocks: usize,
    /// Filters of the two entry convolutions.
    pub entry_filters: [usize; 2],
    pub middle_filters: usize,
    /// Filters of the strided 1x1 convolution on the exit-flow residual branch.
    pub exit_residual_filters: usize,
    /// Separable-conv widths of the two exit stages.
    pub exit_filters: [usize; 2],
    pub seed: u64,
}

impl Default for CustNetConfig {
    fn default() -> Self {
        CustNetConfig {
            input_shape: [244, 244, 3],
            n_classes: 2,
            num_middle_blocks: 4,
            entry_filters: [32, 64],
            middle_filters: 128,
            exit_residual_filters: 1024,
            exit_filters: [256, 728],
            seed: 0,
        }
    }
}

impl CustNetConfig {
    /// Same topology with every width divided by `divisor` (at least 1
    /// filter each) and the given square input size.
    pub fn scaled(size: usize, divisor: usize, num_middle_blocks: usize) -> Self {
        let d = divisor.max(1);
        let s = |w: usize| (w / d).max(1);
        let base = CustNetConfig::default();
        CustNetConfig {
            input_shape: [size, size, 3],
            num_middle_blocks,
            entry_filters: [s(base.entry_filters[0]), s(base.entry_filters[1])],
            middle_filters: s(base.middle_filters),
            exit_residual_filters: s(base.exit_residual_filters),
            exit_filters: [s(base.exit_filters[0]), s(base.exit_filters[1])],
            ..base
        }
    }
}

struct Assembler {
    b: NetworkBuilder,
    counter: usize,
}

impl Assembler {
    fn name(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}_{}", self.counter)
    }

    fn layer(&mut self, prefix: &str, spec: LayerSpec, input: NodeId) -> Result<NodeId> {
        let name = self.name(prefix);
        self.b.push(name, spec, &[input])
    }

    fn conv_bn(&mut self, x: NodeId, filters: usize, kernel: usize, stride: usize, relu: bool) -> Result<NodeId> {
        let spec = LayerSpec::Conv2D {
            filters,
            kernel: [kernel, kernel],
            stride,
            padding: Padding::Same,
        };
        let x = self.layer("conv", spec, x)?;
        let x = self.layer("bn", LayerSpec::batch_norm(), x)?;
        if relu {
            self.layer("relu", LayerSpec::ReLU, x)
        } else {
            Ok(x)
        }
    }

    /// Depthwise 3x3 -> BN -> ReLU -> pointwise -> BN -> ReLU.
    fn separable(&mut self, x: NodeId, filters: usize) -> Result<NodeId> {
        let spec = LayerSpec::DepthwiseConv2D {
            kernel: [3, 3],
            stride: 1,
            padding: Padding::Same,
        };
        let x = self.layer("dwconv", spec, x)?;
        let x = self.layer("bn", LayerSpec::batch_norm(), x)?;
        let x = self.layer("relu", LayerSpec::ReLU, x)?;
        let x = self.layer("pwconv", LayerSpec::PointwiseConv2D { filters }, x)?;
        let x = self.layer("bn", LayerSpec::batch_norm(), x)?;
        self.layer("sep_relu", LayerSpec::ReLU, x)
    }

    fn max_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let spec = LayerSpec::MaxPool2D {
            pool: [3, 3],
            stride: 2,
            padding: Padding::Same,
        };
        self.layer("maxpool", spec, x)
    }

    /// Adds `residual` to `x`, first routing the residual through a strided
    /// 1x1 convolution + BN when the two shapes differ.
    fn residual_add(&mut self, residual: NodeId, x: NodeId, junction: &str) -> Result<NodeId> {
        let target = self.b.shape(x).to_vec();
        let mut residual = residual;
        if self.b.shape(residual) != target.as_slice() {
            let from = self.b.shape(residual).to_vec();
            let stride = from[0].div_ceil(target[0]).max(1);
            residual = self.conv_bn(residual, target[2], 1, stride, false)?;
            if self.b.shape(residual) != target.as_slice() {
                return Err(Error::Shape(format!(
                    "junction `{junction}`: cannot project {from:?} onto {target:?}"
                )));
            }
        }
        self.b.push(
            junction.to_string(),
            LayerSpec::ResidualAdd {
                junction: junction.to_string(),
            },
            &[residual, x],
        )
    }
}

/// Entry flow (two convolutions), `num_middle_blocks` residual blocks of
/// three separable convolutions, a two-stage exit flow, global average
/// pooling and a bias-free dense classifier followed by softmax.
pub fn build_custnet(cfg: &CustNetConfig) -> Result<Network> {
    if cfg.num_middle_blocks == 0 {
        return Err(Error::invalid("num_middle_blocks must be at least 1"));
    }
    if cfg.n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    let mut a = Assembler {
        b: NetworkBuilder::new(&cfg.input_shape, cfg.seed),
        counter: 0,
    };
    let mut x = NetworkBuilder::INPUT;
    x = a.conv_bn(x, cfg.entry_filters[0], 3, 2, true)?;
    x = a.conv_bn(x, cfg.entry_filters[1], 3, 1, true)?;

    for block in 0..cfg.num_middle_blocks {
        let residual = x;
        for _ in 0..3 {
            x = a.separable(x, cfg.middle_filters)?;
        }
        x = a.residual_add(residual, x, &format!("middle_add_{block}"))?;
    }

    let residual = a.conv_bn(x, cfg.exit_residual_filters, 1, 2, false)?;
    x = a.separable(x, cfg.exit_filters[0])?;
    x = a.separable(x, cfg.exit_filters[0])?;
    x = a.max_pool(x)?;
    x = a.residual_add(residual, x, "exit_add_0")?;

    x = a.separable(x, cfg.exit_filters[1])?;
    x = a.separable(x, cfg.exit_filters[1])?;
    let gradcam = x;
    x = a.max_pool(x)?;
    x = a.residual_add(residual, x, "exit_add_1")?;

    let features = a.b.push("global_pool", LayerSpec::GlobalAveragePool, &[x])?;
    let logits = a.b.push(
        "logits",
        LayerSpec::Dense {
            units: cfg.n_classes,
            use_bias: false,
        },
        &[features],
    )?;
    let probabilities = a.b.push("softmax", LayerSpec::Softmax, &[logits])?;
    a.b.finish(Taps {
        logits,
        probabilities: Some(probabilities),
        gradcam: Some(gradcam),
        features: Some(features),
    })
}
