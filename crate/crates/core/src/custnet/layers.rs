//! Layer descriptions and their forward/backward kernels.
//!
//! Spatial activations are `[N, H, W, C]`; flat ones are `[N, F]`.
//! Convolution weights are `[kh, kw, c_in, c_out]`, depthwise weights
//! `[kh, kw, c]`, dense weights `[in, out]`.

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    /// Output length and leading pad along one axis. `Same` pads so the
    /// output is `ceil(input / stride)`, putting the odd pixel at the end.
    pub fn resolve(self, input: usize, kernel: usize, stride: usize) -> Result<(usize, usize)> {
        match self {
            Padding::Same => {
                let out = input.div_ceil(stride);
                let total = ((out - 1) * stride + kernel).saturating_sub(input);
                Ok((out, total / 2))
            }
            Padding::Valid => {
                if input < kernel {
                    return Err(Error::Shape(format!("valid {kernel}-kernel on {input}-pixel axis")));
                }
                Ok(((input - kernel) / stride + 1, 0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerSpec {
    Input {
        shape: Vec<usize>,
    },
    Conv2D {
        filters: usize,
        kernel: [usize; 2],
        stride: usize,
        padding: Padding,
    },
    DepthwiseConv2D {
        kernel: [usize; 2],
        stride: usize,
        padding: Padding,
    },
    PointwiseConv2D {
        filters: usize,
    },
    BatchNorm {
        momentum: f64,
        epsilon: f64,
    },
    ReLU,
    MaxPool2D {
        pool: [usize; 2],
        stride: usize,
        padding: Padding,
    },
    GlobalAveragePool,
    Dense {
        units: usize,
        use_bias: bool,
    },
    Softmax,
    ResidualAdd {
        junction: String,
    },
}

impl LayerSpec {
    pub fn batch_norm() -> Self {
        LayerSpec::BatchNorm {
            momentum: 0.9,
            epsilon: 1e-3,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Input { .. } => "input",
            LayerSpec::Conv2D { .. } => "conv2d",
            LayerSpec::DepthwiseConv2D { .. } => "depthwise_conv2d",
            LayerSpec::PointwiseConv2D { .. } => "pointwise_conv2d",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::ReLU => "relu",
            LayerSpec::MaxPool2D { .. } => "max_pool2d",
            LayerSpec::GlobalAveragePool => "global_average_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Softmax => "softmax",
            LayerSpec::ResidualAdd { .. } => "residual_add",
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            LayerSpec::Input { .. } => 0,
            LayerSpec::ResidualAdd { .. } => 2,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("{}: {m}", self.kind_name())));
        match self {
            LayerSpec::Conv2D { filters, kernel, stride, .. } => {
                if *filters == 0 || kernel[0] == 0 || kernel[1] == 0 || *stride == 0 {
                    return bad("filters, kernel and stride must be positive".into());
                }
            }
            LayerSpec::DepthwiseConv2D { kernel, stride, .. } | LayerSpec::MaxPool2D { pool: kernel, stride, .. } => {
                if kernel[0] == 0 || kernel[1] == 0 || *stride == 0 {
                    return bad("kernel and stride must be positive".into());
                }
            }
            LayerSpec::PointwiseConv2D { filters } | LayerSpec::Dense { units: filters, .. } => {
                if *filters == 0 {
                    return bad("unit count must be positive".into());
                }
            }
            LayerSpec::BatchNorm { momentum, epsilon } => {
                if !(0.0..1.0).contains(momentum) || !(*epsilon >= 0.0) {
                    return bad(format!("momentum {momentum} / epsilon {epsilon}"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Per-sample output shape for the given per-sample input shapes.
    pub fn output_shape(&self, inputs: &[&[usize]]) -> Result<Vec<usize>> {
        self.validate()?;
        if inputs.len() != self.n_inputs() {
            return Err(Error::Shape(format!(
                "{} takes {} inputs, got {}",
                self.kind_name(),
                self.n_inputs(),
                inputs.len()
            )));
        }
        let spatial = |s: &[usize]| -> Result<(usize, usize, usize)> {
            match s {
                [h, w, c] => Ok((*h, *w, *c)),
                other => Err(Error::Shape(format!("{} needs [H, W, C], got {other:?}", self.kind_name()))),
            }
        };
        Ok(match self {
            LayerSpec::Input { shape } => shape.clone(),
            LayerSpec::Conv2D {
                filters,
                kernel,
                stride,
                padding,
            } => {
                let (h, w, _) = spatial(inputs[0])?;
                let (ho, _) = padding.resolve(h, kernel[0], *stride)?;
                let (wo, _) = padding.resolve(w, kernel[1], *stride)?;
                vec![ho, wo, *filters]
            }
            LayerSpec::DepthwiseConv2D { kernel, stride, padding }
            | LayerSpec::MaxPool2D {
                pool: kernel,
                stride,
                padding,
            } => {
                let (h, w, c) = spatial(inputs[0])?;
                let (ho, _) = padding.resolve(h, kernel[0], *stride)?;
                let (wo, _) = padding.resolve(w, kernel[1], *stride)?;
                vec![ho, wo, c]
            }
            LayerSpec::PointwiseConv2D { filters } => {
                let (h, w, _) = spatial(inputs[0])?;
                vec![h, w, *filters]
            }
            LayerSpec::GlobalAveragePool => {
                let (_, _, c) = spatial(inputs[0])?;
                vec![c]
            }
            LayerSpec::Dense { units, .. } => match inputs[0] {
                [_] => vec![*units],
                other => return Err(Error::Shape(format!("dense needs a flat input, got {other:?}"))),
            },
            LayerSpec::BatchNorm { .. } | LayerSpec::ReLU => inputs[0].to_vec(),
            LayerSpec::Softmax => match inputs[0] {
                [_] => inputs[0].to_vec(),
                other => return Err(Error::Shape(format!("softmax needs a flat input, got {other:?}"))),
            },
            LayerSpec::ResidualAdd { junction } => {
                if inputs[0] != inputs[1] {
                    return Err(Error::Shape(format!(
                        "residual junction `{junction}` joins {:?} and {:?}",
                        inputs[0], inputs[1]
                    )));
                }
                inputs[0].to_vec()
            }
        })
    }

    /// Shapes of the trainable tensors, in storage order.
    pub fn param_shapes(&self, input: &[usize]) -> Vec<Vec<usize>> {
        let last = input.last().copied().unwrap_or(0);
        match self {
            LayerSpec::Conv2D { filters, kernel, .. } => {
                vec![vec![kernel[0], kernel[1], last, *filters], vec![*filters]]
            }
            LayerSpec::DepthwiseConv2D { kernel, .. } => vec![vec![kernel[0], kernel[1], last], vec![last]],
            LayerSpec::PointwiseConv2D { filters } => vec![vec![1, 1, last, *filters], vec![*filters]],
            LayerSpec::BatchNorm { .. } => vec![vec![last], vec![last]],
            LayerSpec::Dense { units, use_bias } => {
                let mut v = vec![vec![last, *units]];
                if *use_bias {
                    v.push(vec![*units]);
                }
                v
            }
            _ => Vec::new(),
        }
    }

    /// Non-trainable state (batch-norm running mean and variance).
    pub fn state_shapes(&self, input: &[usize]) -> Vec<Vec<usize>> {
        match self {
            LayerSpec::BatchNorm { .. } => {
                let c = input.last().copied().unwrap_or(0);
                vec![vec![c], vec![c]]
            }
            _ => Vec::new(),
        }
    }

    /// Fan-in of the weight tensor, used for initialization.
    pub fn fan_in(&self, input: &[usize]) -> usize {
        let last = input.last().copied().unwrap_or(1);
        match self {
            LayerSpec::Conv2D { kernel, .. } => kernel[0] * kernel[1] * last,
            LayerSpec::DepthwiseConv2D { kernel, .. } => kernel[0] * kernel[1],
            _ => last,
        }
    }
}

/// Geometry of a strided 2-D window sweep.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window2d {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub ho: usize,
    pub wo: usize,
}

impl Window2d {
    pub fn new(x_shape: &[usize], kernel: [usize; 2], stride: usize, padding: Padding) -> Result<Self> {
        let (n, h, w, c) = match x_shape {
            [n, h, w, c] => (*n, *h, *w, *c),
            other => return Err(Error::Shape(format!("expected [N, H, W, C], got {other:?}"))),
        };
        let (ho, pad_top) = padding.resolve(h, kernel[0], stride)?;
        let (wo, pad_left) = padding.resolve(w, kernel[1], stride)?;
        Ok(Window2d {
            n,
            h,
            w,
            c,
            kh: kernel[0],
            kw: kernel[1],
            stride,
            pad_top,
            pad_left,
            ho,
            wo,
        })
    }

    /// Input row for output row `oy` and kernel row `ky`, if inside the image.
    #[inline]
    fn in_y(&self, oy: usize, ky: usize) -> Option<usize> {
        (oy * self.stride + ky).checked_sub(self.pad_top).filter(|&y| y < self.h)
    }

    #[inline]
    fn in_x(&self, ox: usize, kx: usize) -> Option<usize> {
        (ox * self.stride + kx).checked_sub(self.pad_left).filter(|&x| x < self.w)
    }
}

pub(crate) fn conv_forward(x: &Tensor, weight: &[f64], bias: &[f64], g: &Window2d, co: usize) -> Tensor {
    let ci = g.c;
    let mut out = vec![0.0; g.n * g.ho * g.wo * co];
    for n in 0..g.n {
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let ob = ((n * g.ho + oy) * g.wo + ox) * co;
                let orow = &mut out[ob..ob + co];
                orow.copy_from_slice(bias);
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let xb = ((n * g.h + iy) * g.w + ix) * ci;
                        let wb = (ky * g.kw + kx) * ci * co;
                        for c in 0..ci {
                            let xv = x.data[xb + c];
                            if xv == 0.0 {
                                continue;
                            }
                            let wrow = &weight[wb + c * co..wb + (c + 1) * co];
                            for (o, wv) in orow.iter_mut().zip(wrow) {
                                *o += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor {
        shape: vec![g.n, g.ho, g.wo, co],
        data: out,
    }
}

/// Returns `(dx, dweight, dbias)`.
pub(crate) fn conv_backward(x: &Tensor, weight: &[f64], dy: &Tensor, g: &Window2d, co: usize) -> (Tensor, Vec<f64>, Vec<f64>) {
    let ci = g.c;
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; weight.len()];
    let mut db = vec![0.0; co];
    for n in 0..g.n {
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let ob = ((n * g.ho + oy) * g.wo + ox) * co;
                let dyrow = &dy.data[ob..ob + co];
                for (d, v) in db.iter_mut().zip(dyrow) {
                    *d += v;
                }
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let xb = ((n * g.h + iy) * g.w + ix) * ci;
                        let wb = (ky * g.kw + kx) * ci * co;
                        for c in 0..ci {
                            let xv = x.data[xb + c];
                            let wrow = &weight[wb + c * co..wb + (c + 1) * co];
                            let dwrow = &mut dw[wb + c * co..wb + (c + 1) * co];
                            let mut acc = 0.0;
                            for ((dwv, wv), dyv) in dwrow.iter_mut().zip(wrow).zip(dyrow) {
                                *dwv += xv * dyv;
                                acc += wv * dyv;
                            }
                            dx[xb + c] += acc;
                        }
                    }
                }
            }
        }
    }
    (
        Tensor {
            shape: x.shape.clone(),
            data: dx,
        },
        dw,
        db,
    )
}

pub(crate) fn depthwise_forward(x: &Tensor, weight: &[f64], bias: &[f64], g: &Window2d) -> Tensor {
    let c = g.c;
    let mut out = vec![0.0; g.n * g.ho * g.wo * c];
    for n in 0..g.n {
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let ob = ((n * g.ho + oy) * g.wo + ox) * c;
                let orow = &mut out[ob..ob + c];
                orow.copy_from_slice(bias);
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let xb = ((n * g.h + iy) * g.w + ix) * c;
                        let wb = (ky * g.kw + kx) * c;
                        for ((o, xv), wv) in orow.iter_mut().zip(&x.data[xb..xb + c]).zip(&weight[wb..wb + c]) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
    }
    Tensor {
        shape: vec![g.n, g.ho, g.wo, c],
        data: out,
    }
}

pub(crate) fn depthwise_backward(x: &Tensor, weight: &[f64], dy: &Tensor, g: &Window2d) -> (Tensor, Vec<f64>, Vec<f64>) {
    let c = g.c;
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; weight.len()];
    let mut db = vec![0.0; c];
    for n in 0..g.n {
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let ob = ((n * g.ho + oy) * g.wo + ox) * c;
                let dyrow = &dy.data[ob..ob + c];
                for (d, v) in db.iter_mut().zip(dyrow) {
                    *d += v;
                }
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let xb = ((n * g.h + iy) * g.w + ix) * c;
                        let wb = (ky * g.kw + kx) * c;
                        for ch in 0..c {
                            dw[wb + ch] += x.data[xb + ch] * dyrow[ch];
                            dx[xb + ch] += weight[wb + ch] * dyrow[ch];
                        }
                    }
                }
            }
        }
    }
    (
        Tensor {
            shape: x.shape.clone(),
            data: dx,
        },
        dw,
        db,
    )
}

/// Max pooling; padded positions never win. Returns the output and, for
/// every output element, the flat input index it was taken from.
pub(crate) fn maxpool_forward(x: &Tensor, g: &Window2d) -> (Tensor, Vec<usize>) {
    let c = g.c;
    let total = g.n * g.ho * g.wo * c;
    let mut out = vec![f64::NEG_INFINITY; total];
    let mut arg = vec![0usize; total];
    for n in 0..g.n {
        for oy in 0..g.ho {
            for ox in 0..g.wo {
                let ob = ((n * g.ho + oy) * g.wo + ox) * c;
                for ky in 0..g.kh {
                    let Some(iy) = g.in_y(oy, ky) else { continue };
                    for kx in 0..g.kw {
                        let Some(ix) = g.in_x(ox, kx) else { continue };
                        let xb = ((n * g.h + iy) * g.w + ix) * c;
                        for ch in 0..c {
                            let v = x.data[xb + ch];
                            if v > out[ob + ch] {
                                out[ob + ch] = v;
                                arg[ob + ch] = xb + ch;
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor {
            shape: vec![g.n, g.ho, g.wo, c],
            data: out,
        },
        arg,
    )
}

pub(crate) fn maxpool_backward(x_shape: &[usize], argmax: &[usize], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(x_shape);
    for (&src, &g) in argmax.iter().zip(&dy.data) {
        dx.data[src] += g;
    }
    dx
}

pub(crate) fn global_avg_pool_forward(x: &Tensor) -> Tensor {
    let (n, h, w, c) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let area = (h * w) as f64;
    let mut out = vec![0.0; n * c];
    for s in 0..n {
        let orow = &mut out[s * c..(s + 1) * c];
        for px in x.sample(s).chunks_exact(c) {
            for (o, v) in orow.iter_mut().zip(px) {
                *o += v;
            }
        }
        orow.iter_mut().for_each(|o| *o /= area);
    }
    Tensor {
        shape: vec![n, c],
        data: out,
    }
}

pub(crate) fn global_avg_pool_backward(x_shape: &[usize], dy: &Tensor) -> Tensor {
    let (n, h, w, c) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
    let area = (h * w) as f64;
    let mut dx = Tensor::zeros(x_shape);
    for s in 0..n {
        let g = &dy.data[s * c..(s + 1) * c];
        for px in dx.data[s * h * w * c..(s + 1) * h * w * c].chunks_exact_mut(c) {
            for (d, gv) in px.iter_mut().zip(g) {
                *d = gv / area;
            }
        }
    }
    dx
}

pub(crate) fn dense_forward(x: &Tensor, weight: &[f64], bias: Option<&[f64]>, units: usize) -> Tensor {
    let (n, f) = (x.shape[0], x.shape[1]);
    let mut out = vec![0.0; n * units];
    for s in 0..n {
        let orow = &mut out[s * units..(s + 1) * units];
        if let Some(b) = bias {
            orow.copy_from_slice(b);
        }
        for i in 0..f {
            let xv = x.data[s * f + i];
            for (o, wv) in orow.iter_mut().zip(&weight[i * units..(i + 1) * units]) {
                *o += xv * wv;
            }
        }
    }
    Tensor {
        shape: vec![n, units],
        data: out,
    }
}

/// Returns `(dx, dweight, dbias)`.
pub(crate) fn dense_backward(x: &Tensor, weight: &[f64], dy: &Tensor, units: usize) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (n, f) = (x.shape[0], x.shape[1]);
    let mut dx = vec![0.0; n * f];
    let mut dw = vec![0.0; weight.len()];
    let mut db = vec![0.0; units];
    for s in 0..n {
        let g = &dy.data[s * units..(s + 1) * units];
        for (d, v) in db.iter_mut().zip(g) {
            *d += v;
        }
        for i in 0..f {
            let xv = x.data[s * f + i];
            let wrow = &weight[i * units..(i + 1) * units];
            let dwrow = &mut dw[i * units..(i + 1) * units];
            let mut acc = 0.0;
            for ((dwv, wv), gv) in dwrow.iter_mut().zip(wrow).zip(g) {
                *dwv += xv * gv;
                acc += wv * gv;
            }
            dx[s * f + i] = acc;
        }
    }
    (
        Tensor {
            shape: x.shape.clone(),
            data: dx,
        },
        dw,
        db,
    )
}

/// Row-wise softmax over the last axis.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let k = *x.shape.last().unwrap();
    let mut out = x.data.clone();
    for row in out.chunks_exact_mut(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    Tensor {
        shape: x.shape.clone(),
        data: out,
    }
}

pub(crate) fn softmax_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let k = *y.shape.last().unwrap();
    let mut dx = vec![0.0; y.len()];
    for ((drow, yrow), grow) in dx.chunks_exact_mut(k).zip(y.data.chunks_exact(k)).zip(dy.data.chunks_exact(k)) {
        let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
        for ((d, yv), gv) in drow.iter_mut().zip(yrow).zip(grow) {
            *d = yv * (gv - dot);
        }
    }
    Tensor {
        shape: y.shape.clone(),
        data: dx,
    }
}

/// Batch statistics saved by a training-mode batch-norm forward.
#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub training: bool,
}

pub(crate) fn batchnorm_forward(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    epsilon: f64,
    training: bool,
) -> (Tensor, BnCache) {
    let c = gamma.len();
    let m = x.len() / c;
    let (mean, var) = if training {
        let mut mean = vec![0.0; c];
        for px in x.data.chunks_exact(c) {
            for (a, v) in mean.iter_mut().zip(px) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= m as f64);
        let mut var = vec![0.0; c];
        for px in x.data.chunks_exact(c) {
            for ((a, v), mu) in var.iter_mut().zip(px).zip(&mean) {
                *a += (v - mu) * (v - mu);
            }
        }
        var.iter_mut().for_each(|a| *a /= m as f64);
        (mean, var)
    } else {
        (running_mean.to_vec(), running_var.to_vec())
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for ((px, hx), o) in x
        .data
        .chunks_exact(c)
        .zip(xhat.chunks_exact_mut(c))
        .zip(out.chunks_exact_mut(c))
    {
        for ch in 0..c {
            hx[ch] = (px[ch] - mean[ch]) * inv_std[ch];
            o[ch] = gamma[ch] * hx[ch] + beta[ch];
        }
    }
    (
        Tensor {
            shape: x.shape.clone(),
            data: out,
        },
        BnCache {
            xhat,
            inv_std,
            mean,
            var,
            training,
        },
    )
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn batchnorm_backward(dy: &Tensor, gamma: &[f64], cache: &BnCache) -> (Tensor, Vec<f64>, Vec<f64>) {
    let c = gamma.len();
    let m = dy.len() / c;
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for (g, hx) in dy.data.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for ch in 0..c {
            dgamma[ch] += g[ch] * hx[ch];
            dbeta[ch] += g[ch];
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for ((d, g), hx) in dx
        .chunks_exact_mut(c)
        .zip(dy.data.chunks_exact(c))
        .zip(cache.xhat.chunks_exact(c))
    {
        for ch in 0..c {
            let scale = gamma[ch] * cache.inv_std[ch];
            d[ch] = if cache.training {
                scale * (g[ch] - dbeta[ch] / m as f64 - hx[ch] * dgamma[ch] / m as f64)
            } else {
                scale * g[ch]
            };
        }
    }
    (
        Tensor {
            shape: dy.shape.clone(),
            data: dx,
        },
        dgamma,
        dbeta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_matches_ceil() {
        assert_eq!(Padding::Same.resolve(244, 3, 2).unwrap(), (122, 0));
        assert_eq!(Padding::Same.resolve(5, 3, 1).unwrap(), (5, 1));
        assert_eq!(Padding::Same.resolve(61, 3, 2).unwrap(), (31, 1));
        assert_eq!(Padding::Valid.resolve(4, 3, 1).unwrap(), (2, 0));
        assert!(Padding::Valid.resolve(2, 3, 1).is_err());
    }

    #[test]
    fn residual_shapes_must_agree() {
        let add = LayerSpec::ResidualAdd { junction: "j".into() };
        assert!(add.output_shape(&[&[4, 4, 8], &[4, 4, 16]]).is_err());
        assert_eq!(add.output_shape(&[&[4, 4, 8], &[4, 4, 8]]).unwrap(), vec![4, 4, 8]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let conv = LayerSpec::Conv2D {
            filters: 0,
            kernel: [3, 3],
            stride: 1,
            padding: Padding::Same,
        };
        assert!(conv.output_shape(&[&[4, 4, 1]]).is_err());
        let dense = LayerSpec::Dense { units: 2, use_bias: true };
        assert!(dense.output_shape(&[&[4, 4, 1]]).is_err());
    }
}
