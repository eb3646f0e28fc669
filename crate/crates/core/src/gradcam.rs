//! Gradient-weighted class activation maps.

use serde::{Deserialize, Serialize};

use crate::custnet::{image_to_input, AlphaMode, Network, Tensor};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spectral::{colormap, FeatureImage};

/// Default blend strength for [`overlay`].
pub const DEFAULT_OPACITY: f64 = 0.5;

/// Non-negative localization map over the spatial grid of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCamMap {
    pub values: Matrix,
    pub class_index: usize,
    pub source_layer: String,
}

fn spatial(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape[..] {
        [h, w, k] if h * w * k > 0 => Ok((h, w, k)),
        _ => Err(Error::Shape(format!("{what} must be a non-empty [H, W, K] tensor, got {:?}", t.shape))),
    }
}

/// Channel weights: the spatial mean of each channel's gradient.
pub fn importance_weights(grads: &Tensor) -> Result<Vec<f64>> {
    let (h, w, k) = spatial(grads, "gradient")?;
    grads.check_finite("Grad-CAM gradient")?;
    let mut sums = vec![0.0; k];
    for px in grads.data.chunks_exact(k) {
        for (s, g) in sums.iter_mut().zip(px) {
            *s += g;
        }
    }
    let n = (h * w) as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// `sum_k weights[k] * A_k(i, j)` before the final ReLU.
pub fn weighted_sum(weights: &[f64], activations: &Tensor) -> Result<Matrix> {
    let (h, w, k) = spatial(activations, "activation")?;
    if weights.len() != k {
        return Err(Error::Shape(format!("{} weights for {k} activation channels", weights.len())));
    }
    let data = activations
        .data
        .chunks_exact(k)
        .map(|px| px.iter().zip(weights).map(|(a, w)| a * w).sum())
        .collect();
    Ok(Matrix::from_vec(h, w, data))
}

pub fn heatmap(weights: &[f64], activations: &Tensor, class_index: usize, source_layer: &str) -> Result<GradCamMap> {
    let values = weighted_sum(weights, activations)?.map(|v| v.max(0.0));
    Ok(GradCamMap {
        values,
        class_index,
        source_layer: source_layer.to_string(),
    })
}

/// Grad-CAM of `class_index` for one image at the network's Grad-CAM layer.
/// The score differentiated is the pre-softmax logit.
pub fn explain(net: &Network, img: &FeatureImage, class_index: usize, alpha: AlphaMode) -> Result<GradCamMap> {
    let layer = net
        .taps
        .gradcam
        .ok_or_else(|| Error::invalid("network has no Grad-CAM layer"))?;
    let x = net.batch_of_one(&image_to_input(img, &net.input_shape, alpha)?)?;
    let (pass, grads) = net.class_score_gradients(&x, class_index, false)?;
    let unbatch = |t: &Tensor| Tensor::new(t.shape[1..].to_vec(), t.data.clone());
    let acts = unbatch(pass.output(layer))?;
    let g = match &grads.activations[layer] {
        Some(g) => unbatch(g)?,
        None => Tensor::zeros(&acts.shape),
    };
    let weights = importance_weights(&g)?;
    heatmap(&weights, &acts, class_index, &net.nodes[layer].name)
}

/// Min-max normalization used only for display. An all-zero map stays
/// zero; a constant positive map becomes all ones.
pub fn normalize_for_display(values: &Matrix) -> Matrix {
    let (lo, hi) = values.min_max();
    if hi <= 0.0 {
        return Matrix::zeros(values.rows, values.cols);
    }
    if hi == lo {
        return values.map(|_| 1.0);
    }
    values.map(|v| (v - lo) / (hi - lo))
}

/// Blends the colormapped heat map over `base`:
/// `(1 - opacity * m) * base + opacity * m * colormap(m)` on R, G, B, with
/// `m` the normalized map upsampled bilinearly to the image size. For RGBA
/// images alpha becomes `max(alpha, opacity * m)` so the heat shows on
/// transparent background.
pub fn overlay(map: &GradCamMap, base: &FeatureImage, opacity: f64) -> Result<FeatureImage> {
    if !(0.0..=1.0).contains(&opacity) {
        return Err(Error::invalid(format!("opacity {opacity} outside [0, 1]")));
    }
    let m = normalize_for_display(&map.values).resize_bilinear(base.height, base.width);
    let mut out = base.clone();
    for y in 0..base.height {
        for x in 0..base.width {
            let v = m.get(y, x).clamp(0.0, 1.0);
            let t = opacity * v;
            if t == 0.0 {
                continue;
            }
            let color = colormap(v);
            for (c, &col) in color.iter().enumerate() {
                out.set(y, x, c, (1.0 - t) * base.get(y, x, c) + t * col);
            }
            if base.channels == 4 {
                out.set(y, x, 3, base.get(y, x, 3).max(t));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor(h: usize, w: usize, k: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(vec![h, w, k], data).unwrap()
    }

    #[test]
    fn importance_weight_examples() {
        assert_eq!(importance_weights(&tensor(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0])).unwrap(), vec![2.5]);
        assert_eq!(importance_weights(&tensor(3, 2, 1, vec![0.75; 6])).unwrap(), vec![0.75]);
        assert!(importance_weights(&tensor(1, 1, 1, vec![f64::NAN])).is_err());
    }

    #[test]
    fn heatmap_examples() {
        let a = tensor(1, 1, 2, vec![3.0, -1.0]);
        assert_eq!(heatmap(&[1.0, 2.0], &a, 0, "l").unwrap().values.data, vec![1.0]);
        assert_eq!(heatmap(&[0.0, 0.0], &a, 0, "l").unwrap().values.data, vec![0.0]);
        let pos = tensor(2, 2, 1, vec![0.5, 1.0, 2.0, 3.0]);
        assert!(heatmap(&[-1.0], &pos, 0, "l").unwrap().values.data.iter().all(|&v| v == 0.0));
        assert!(heatmap(&[1.0], &a, 0, "l").is_err());
    }

    proptest! {
        #[test]
        fn weights_match_double_loop(h in 1usize..16, w in 1usize..16, k in 1usize..8, seed in any::<u64>()) {
            let mut s = seed;
            let data: Vec<f64> = (0..h * w * k)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let g = tensor(h, w, k, data);
            let got = importance_weights(&g).unwrap();
            for (c, wc) in got.iter().enumerate() {
                let mut total = 0.0;
                for i in 0..h {
                    for j in 0..w {
                        total += g.data[(i * w + j) * k + c];
                    }
                }
                prop_assert!((wc - total / (h * w) as f64).abs() < 1e-12);
            }
        }

        #[test]
        fn pre_relu_map_is_linear(a in prop::collection::vec(-1.0f64..1.0, 12), b in prop::collection::vec(-1.0f64..1.0, 12), w in prop::collection::vec(-2.0f64..2.0, 3)) {
            let ta = tensor(2, 2, 3, a.clone());
            let tb = tensor(2, 2, 3, b.clone());
            let tab = tensor(2, 2, 3, a.iter().zip(&b).map(|(x, y)| x + y).collect());
            let sa = weighted_sum(&w, &ta).unwrap();
            let sb = weighted_sum(&w, &tb).unwrap();
            let sab = weighted_sum(&w, &tab).unwrap();
            for i in 0..4 {
                prop_assert!((sab.data[i] - sa.data[i] - sb.data[i]).abs() < 1e-9);
            }
        }
    }
}
