mod common;

use common::{ramp_image, tiny_net, GOLDEN_0, GOLDEN_1, W};
use custnetgc::custnet::AlphaMode;
use custnetgc::gradcam::{explain, overlay, weighted_sum, GradCamMap};
use custnetgc::matrix::Matrix;
use custnetgc::spectral::{colormap, FeatureImage, Provenance};

#[test]
fn tiny_network_matches_hand_computed_maps_exactly() {
    let net = tiny_net(W);
    let m0 = explain(&net, &ramp_image(), 0, AlphaMode::AsPrinted).unwrap();
    let m1 = explain(&net, &ramp_image(), 1, AlphaMode::AsPrinted).unwrap();
    assert_eq!((m0.values.rows, m0.values.cols), (4, 4));
    assert_eq!(m0.values.data, GOLDEN_0.to_vec());
    assert_eq!(m1.values.data, GOLDEN_1.to_vec());
    assert_eq!(m0.source_layer, "relu");
    assert_eq!(m1.class_index, 1);
}

#[test]
fn opposite_class_weights_clip_complementary_regions() {
    // Columns W and -W: the two pre-ReLU maps are negatives of each other.
    let net = tiny_net([0.7, -0.7, -0.3, 0.3]);
    let img = ramp_image();
    let x = custnetgc::custnet::image_to_input(&img, &net.input_shape, AlphaMode::AsPrinted).unwrap();
    let acts = {
        let pass = net.forward(&net.batch_of_one(&x).unwrap(), custnetgc::custnet::Mode::Infer).unwrap();
        let t = pass.output(2);
        custnetgc::custnet::Tensor::new(t.shape[1..].to_vec(), t.data.clone()).unwrap()
    };
    let w0 = [0.7 / 16.0, -0.3 / 16.0];
    let w1 = [-0.7 / 16.0, 0.3 / 16.0];
    let p0 = weighted_sum(&w0, &acts).unwrap();
    let p1 = weighted_sum(&w1, &acts).unwrap();
    for (a, b) in p0.data.iter().zip(&p1.data) {
        assert!(a.min(*b) <= 0.0);
    }
    let m0 = explain(&net, &img, 0, AlphaMode::AsPrinted).unwrap();
    let m1 = explain(&net, &img, 1, AlphaMode::AsPrinted).unwrap();
    for (a, b) in m0.values.data.iter().zip(&m1.values.data) {
        assert!(*a == 0.0 || *b == 0.0);
    }
}

#[test]
fn maps_are_non_negative_on_random_inputs() {
    let net = custnetgc::custnet::build_custnet(&custnetgc::custnet::CustNetConfig::scaled(16, 16, 1)).unwrap();
    let mut s = 17u64;
    for _ in 0..20 {
        let px: Vec<f64> = (0..16 * 16 * 4)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let img = FeatureImage::new(16, 16, 4, px, Provenance::SlopePlot).unwrap();
        for c in 0..2 {
            let m = explain(&net, &img, c, AlphaMode::OverWhite).unwrap();
            assert!(m.values.data.iter().all(|&v| v >= 0.0 && v.is_finite()));
        }
    }
}

fn map(values: Vec<f64>, rows: usize, cols: usize) -> GradCamMap {
    GradCamMap {
        values: Matrix::from_vec(rows, cols, values),
        class_index: 1,
        source_layer: "l".into(),
    }
}

#[test]
fn overlay_degenerate_cases_leave_base_unchanged() {
    let base = ramp_image();
    let m = map(vec![0.0, 1.0, 2.0, 3.0], 2, 2);
    assert_eq!(overlay(&m, &base, 0.0).unwrap(), base);
    let zero = map(vec![0.0; 4], 2, 2);
    assert_eq!(overlay(&zero, &base, 1.0).unwrap(), base);
    assert_eq!(overlay(&zero, &overlay(&zero, &base, 1.0).unwrap(), 1.0).unwrap(), base);
    assert!(overlay(&m, &base, 1.5).is_err());
}

#[test]
fn peak_cell_at_full_opacity_is_pure_colormap() {
    let base = ramp_image();
    // Same size as the image, so no interpolation touches the peak.
    let mut v = vec![0.0; 36];
    v[7] = 5.0;
    let out = overlay(&map(v, 6, 6), &base, 1.0).unwrap();
    let top = colormap(1.0);
    for c in 0..3 {
        assert_eq!(out.get(1, 1, c), top[c]);
    }
    assert_eq!(out.get(0, 0, 0), base.get(0, 0, 0));
}
