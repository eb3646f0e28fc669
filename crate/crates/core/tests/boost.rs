use custnetgc::boost::{extract_embeddings, gbdt_train, label_for, predict_boosted, EmbeddingRow, GbdtParams};
use custnetgc::custnet::{build_custnet, network_fingerprint, AlphaMode, CustNetConfig};
use custnetgc::spectral::{FeatureImage, Provenance};
use custnetgc::Label;

fn image(seed: u64) -> FeatureImage {
    let mut s = seed;
    let px = (0..16 * 16 * 4)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    FeatureImage::new(16, 16, 4, px, Provenance::SlopePlot).unwrap()
}

#[test]
fn embeddings_have_fixed_length_and_normalized_probabilities() {
    let cfg = CustNetConfig::scaled(16, 16, 1);
    let net = build_custnet(&cfg).unwrap();
    let imgs = vec![
        (image(1), Label::Pd, "a".to_string()),
        (image(1), Label::Pd, "b".to_string()),
        (image(2), Label::Hc, "c".to_string()),
    ];
    let rows = extract_embeddings(&net, &imgs, AlphaMode::AsPrinted).unwrap();
    assert_eq!(rows[0].features, rows[1].features);
    for r in &rows {
        assert_eq!(r.features.len(), cfg.exit_filters[1] + 2);
        let p = &r.features[r.features.len() - 2..];
        assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
    }
    assert_eq!(rows[2].source_id, "c");
}

#[test]
fn boosted_prediction_checks_network_pairing() {
    let net = build_custnet(&CustNetConfig::scaled(16, 16, 1)).unwrap();
    let imgs: Vec<_> = (0..8)
        .map(|i| (image(i), if i % 2 == 0 { Label::Pd } else { Label::Hc }, i.to_string()))
        .collect();
    let rows = extract_embeddings(&net, &imgs, AlphaMode::AsPrinted).unwrap();
    let mut model = gbdt_train(&rows, &GbdtParams { min_samples_leaf: 1, ..GbdtParams::default() }).unwrap();
    model.net_fingerprint = network_fingerprint(&net);
    let (label, p) = predict_boosted(&net, &model, &imgs[0].0, AlphaMode::AsPrinted, 0.5).unwrap();
    assert!(p > 0.0 && p < 1.0);
    assert_eq!(label, label_for(p, 0.5));

    let other = build_custnet(&CustNetConfig {
        seed: 99,
        ..CustNetConfig::scaled(16, 16, 1)
    })
    .unwrap();
    assert!(predict_boosted(&other, &model, &imgs[0].0, AlphaMode::AsPrinted, 0.5).is_err());
}

#[test]
fn boosting_matches_or_beats_a_separating_probability_feature() {
    // Last two columns play the CNN probabilities; PD probability alone
    // separates the classes, the noise column does not.
    let rows: Vec<EmbeddingRow> = (0..40)
        .map(|i| {
            let pd = i % 2 == 0;
            let p_pd = if pd { 0.55 + (i % 7) as f64 * 0.05 } else { 0.1 + (i % 5) as f64 * 0.07 };
            EmbeddingRow {
                source_id: i.to_string(),
                features: vec![((i * 37) % 11) as f64, 1.0 - p_pd, p_pd],
                label: if pd { Label::Pd } else { Label::Hc },
            }
        })
        .collect();
    let cnn_acc = rows.iter().filter(|r| label_for(r.features[2], 0.5) == r.label).count();
    let model = gbdt_train(&rows, &GbdtParams::default()).unwrap();
    let boosted_acc = rows
        .iter()
        .filter(|r| label_for(model.predict_proba(&r.features).unwrap(), 0.5) == r.label)
        .count();
    assert!(boosted_acc >= cnn_acc);

    let forward: Vec<f64> = rows.iter().map(|r| model.predict_proba(&r.features).unwrap()).collect();
    let backward: Vec<f64> = rows.iter().rev().map(|r| model.predict_proba(&r.features).unwrap()).collect();
    assert!(forward.iter().eq(backward.iter().rev()));
    assert!(forward.iter().all(|&p| p > 0.0 && p < 1.0));
}
