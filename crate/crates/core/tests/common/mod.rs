//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use custnetgc::custnet::{LayerSpec, Network, NetworkBuilder, Padding, Taps};
use custnetgc::pipeline::RunConfig;
use custnetgc::synth::{write_dataset, SynthConfig};
use custnetgc::spectral::{FeatureImage, Provenance};
use custnetgc::Label;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// 6x6x3 input -> 3x3 valid conv (2 filters reading channel 0 only) -> ReLU
/// -> global average pool -> bias-free dense with weights W.
pub fn tiny_net(w: [f64; 4]) -> Network {
    let mut b = NetworkBuilder::new(&[6, 6, 3], 0);
    let conv = b
        .push(
            "conv",
            LayerSpec::Conv2D {
                filters: 2,
                kernel: [3, 3],
                stride: 1,
                padding: Padding::Valid,
            },
            &[0],
        )
        .unwrap();
    let relu = b.push("relu", LayerSpec::ReLU, &[conv]).unwrap();
    let pool = b.push("pool", LayerSpec::GlobalAveragePool, &[relu]).unwrap();
    let logits = b.push("logits", LayerSpec::Dense { units: 2, use_bias: false }, &[pool]).unwrap();
    let mut net = b
        .finish(Taps {
            logits,
            probabilities: None,
            gradcam: Some(relu),
            features: Some(pool),
        })
        .unwrap();
    // Weight layout [ky, kx, c_in, c_out]: centre tap (ky = kx = 1), channel 0.
    let mut k = vec![0.0; 3 * 3 * 3 * 2];
    let centre = (3 + 1) * 3 * 2;
    k[centre] = 1.0;
    k[centre + 1] = -1.0;
    net.nodes[conv].params[0].data = k;
    net.nodes[conv].params[1].data = vec![0.0, 0.5];
    net.nodes[logits].params[0].data = w.to_vec();
    net
}

/// Grey image with x(r, c) = ((r + 2c) mod 8) / 8.
pub fn ramp_image() -> FeatureImage {
    let mut px = Vec::new();
    for r in 0..6 {
        for c in 0..6 {
            let v = ((r + 2 * c) % 8) as f64 / 8.0;
            px.extend_from_slice(&[v, v, v]);
        }
    }
    FeatureImage::new(6, 6, 3, px, Provenance::LmHP).unwrap()
}

// Worked by hand. With v = x(i+1, j+1) the activations are A0 = v and
// A1 = max(0, 1/2 - v). S_c = sum_k W[k][c] * mean(A_k), so every
// dS_c/dA_k(i, j) = W[k][c] / 16 and w_k = W[k][c] / 16.
// W = [[1, -1], [1/2, 2]] (rows = features, columns = classes).
// Class 0: map = relu(v/16 + A1/32). Class 1: map = relu(-v/16 + A1/8).
// Interior v values (rows i = 0..3): [3 5 7 1] [4 6 0 2] [5 7 1 3] [6 0 2 4] / 8.
pub const W: [f64; 4] = [1.0, -1.0, 0.5, 2.0];
pub const GOLDEN_0: [f64; 16] = [
    7.0 / 256.0, 5.0 / 128.0, 7.0 / 128.0, 5.0 / 256.0,
    1.0 / 32.0, 3.0 / 64.0, 1.0 / 64.0, 3.0 / 128.0,
    5.0 / 128.0, 7.0 / 128.0, 5.0 / 256.0, 7.0 / 256.0,
    3.0 / 64.0, 1.0 / 64.0, 3.0 / 128.0, 1.0 / 32.0,
];
pub const GOLDEN_1: [f64; 16] = [
    0.0, 0.0, 0.0, 5.0 / 128.0,
    0.0, 0.0, 1.0 / 16.0, 1.0 / 64.0,
    0.0, 0.0, 5.0 / 128.0, 0.0,
    0.0, 1.0 / 16.0, 1.0 / 64.0, 0.0,
];

pub fn random_set(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> (Vec<f64>, Vec<Label>) {
    loop {
        let truths: Vec<Label> = (0..n).map(|_| if rng.random_bool(0.5) { Label::Pd } else { Label::Hc }).collect();
        if truths.contains(&Label::Pd) && truths.contains(&Label::Hc) {
            let scores = (0..n)
                .map(|_| {
                    if ties {
                        rng.random_range(0..10) as f64 / 10.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            return (scores, truths);
        }
    }
}

pub fn mann_whitney(scores: &[f64], truths: &[Label], positive: Label) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if truths[i] != positive {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truths[j] == positive {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Accuracy, precision, recall, specificity, F1 and FPR by counting each
/// sample, with 0 for an empty denominator.
pub fn brute_metrics(preds: &[Label], truths: &[Label]) -> [f64; 6] {
    let count = |p: Label, t: Label| preds.iter().zip(truths).filter(|&(&a, &b)| a == p && b == t).count() as f64;
    let tp = count(Label::Pd, Label::Pd);
    let tn = count(Label::Hc, Label::Hc);
    let fp = count(Label::Pd, Label::Hc);
    let fn_ = count(Label::Hc, Label::Pd);
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let f1 = if tp == 0.0 { 0.0 } else { div(2.0 * tp, 2.0 * tp + fp + fn_) };
    [div(tp + tn, truths.len() as f64), precision, recall, div(tn, tn + fp), f1, div(fp, fp + tn)]
}

/// Writes `n_clips` synthetic clips under `dir/data` and returns a config
/// for a small network on `size` x `size` slope plots, writing to `dir/out`.
pub fn synthetic_run(dir: &Path, n_clips: usize, size: usize, epochs: usize) -> RunConfig {
    let manifest = write_dataset(
        &dir.join("data"),
        &SynthConfig {
            n_clips,
            ..SynthConfig::default()
        },
    )
    .unwrap();
    let mut cfg = RunConfig::default();
    cfg.manifest = manifest;
    cfg.out_dir = dir.join("out");
    cfg.image.size = [size, size];
    cfg.net.num_middle_blocks = 1;
    cfg.net.width_divisor = 8;
    cfg.net.train.epochs = epochs;
    cfg
}
