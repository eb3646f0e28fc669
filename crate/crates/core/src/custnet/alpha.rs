use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::spectral::FeatureImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `C + (255 - C) * A / 255` per channel (A acts as transparency over white).
    #[default]
    AsPrinted,
    /// Conventional compositing over white: `C * A / 255 + 255 - A`.
    OverWhite,
}

/// Folds the alpha channel into R, G, B and drops it.
pub fn strip_alpha(img: &FeatureImage, mode: AlphaMode) -> Result<FeatureImage> {
    if img.channels != 4 {
        return Err(Error::Shape(format!("strip_alpha needs 4 channels, got {}", img.channels)));
    }
    let mut pixels = Vec::with_capacity(img.height * img.width * 3);
    for px in img.pixels.chunks_exact(4) {
        let a = px[3] * 255.0;
        for &c in &px[..3] {
            let c = c * 255.0;
            let v = match mode {
                AlphaMode::AsPrinted => c + ((255.0 - c) * a) / 255.0,
                AlphaMode::OverWhite => c * a / 255.0 + (255.0 - a),
            };
            pixels.push((v / 255.0).clamp(0.0, 1.0));
        }
    }
    FeatureImage::new(img.height, img.width, 3, pixels, img.provenance)
}

/// Converts an image to a `[H, W, 3]` network input: alpha stripped,
/// resized bilinearly when the size differs.
pub fn image_to_input(img: &FeatureImage, input_shape: &[usize], mode: AlphaMode) -> Result<Tensor> {
    let [h, w, 3] = input_shape[..] else {
        return Err(Error::Shape(format!("network input {input_shape:?} is not [H, W, 3]")));
    };
    let rgb = if img.channels == 4 { strip_alpha(img, mode)? } else { img.clone() };
    let rgb = if (rgb.height, rgb.width) != (h, w) {
        log::info!("resizing {}x{} image to {h}x{w}", rgb.height, rgb.width);
        rgb.resize(h, w)
    } else {
        rgb
    };
    Tensor::new(vec![h, w, 3], rgb.pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Provenance;

    fn rgba(c: f64, a: f64) -> FeatureImage {
        FeatureImage::new(1, 1, 4, vec![c, c, c, a], Provenance::SlopePlot).unwrap()
    }

    #[test]
    fn formula_examples() {
        let out = strip_alpha(&rgba(100.0 / 255.0, 0.0), AlphaMode::AsPrinted).unwrap();
        assert!((out.pixels[0] * 255.0 - 100.0).abs() < 1e-9);
        for a in [0.0, 0.3, 1.0] {
            let out = strip_alpha(&rgba(1.0, a), AlphaMode::AsPrinted).unwrap();
            assert!((out.pixels[0] - 1.0).abs() < 1e-12);
        }
        let out = strip_alpha(&rgba(0.0, 1.0), AlphaMode::AsPrinted).unwrap();
        assert_eq!(out.pixels, vec![1.0; 3]);
        assert_eq!(out.channels, 3);
    }

    #[test]
    fn over_white_keeps_opaque_colour() {
        let out = strip_alpha(&rgba(0.2, 1.0), AlphaMode::OverWhite).unwrap();
        assert!((out.pixels[0] - 0.2).abs() < 1e-12);
        let out = strip_alpha(&rgba(0.2, 0.0), AlphaMode::OverWhite).unwrap();
        assert!((out.pixels[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transparent_image_is_identity_on_rgb() {
        let pixels: Vec<f64> = (0..16 * 4).map(|i| if i % 4 == 3 { 0.0 } else { (i % 7) as f64 / 7.0 }).collect();
        let img = FeatureImage::new(4, 4, 4, pixels.clone(), Provenance::SlopePlot).unwrap();
        let out = strip_alpha(&img, AlphaMode::AsPrinted).unwrap();
        for (i, px) in pixels.chunks_exact(4).enumerate() {
            for c in 0..3 {
                assert!((out.pixels[i * 3 + c] - px[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_rgb() {
        let img = FeatureImage::new(1, 1, 3, vec![0.0; 3], Provenance::LmHP).unwrap();
        assert!(strip_alpha(&img, AlphaMode::AsPrinted).is_err());
    }
}
