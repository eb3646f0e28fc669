//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::{brute_metrics, mann_whitney, ramp_image, synthetic_run, tiny_net, GOLDEN_0, GOLDEN_1, W};
use custnetgc::boost::{gbdt_train, label_for, EmbeddingRow, GbdtParams};
use custnetgc::custnet::gradcheck::layer_kind_cases;
use custnetgc::custnet::AlphaMode;
use custnetgc::evalkit::{auc, confusion, roc_curve, scalar_metrics, ConfusionMatrix, EvalReport};
use custnetgc::gradcam::explain;
use custnetgc::ingest::AudioClip;
use custnetgc::pipeline::{run_all, RunConfig, CHECKPOINT_FILE};
use custnetgc::spectral::{hpss, hz_to_mel, stft, FeatureImage, Provenance, Window};
use custnetgc::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit_s: f64) -> Result<f64, String> {
    let t = start.elapsed().as_secs_f64();
    ensure(t < limit_s, || format!("took {t:.1} s, limit {limit_s} s"))?;
    Ok(t)
}

/// O(n^2) DFT of one frame: (re, im) for bins 0..=n/2.
fn naive_dft(frame: &[f64]) -> Vec<(f64, f64)> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            frame.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, &v)| {
                let ang = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                (re + v * ang.cos(), im + v * ang.sin())
            })
        })
        .collect()
}

fn stft_matches_naive_dft() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(16..=256);
        let sizes: Vec<usize> = [16, 32, 64, 128, 256].into_iter().filter(|&n| n <= len).collect();
        let n_fft = sizes[rng.random_range(0..sizes.len())];
        let hop = rng.random_range(1..=n_fft);
        let window = [Window::Hann, Window::Hamming, Window::Rect][rng.random_range(0..3)];
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = stft(&AudioClip::new("r", x.clone(), 8000).unwrap(), n_fft, hop, window).map_err(|e| e.to_string())?;
        let win = window.coefficients(n_fft);
        ensure(spec.n_frames == (len - n_fft) / hop + 1, || "frame count".into())?;
        for t in 0..spec.n_frames {
            let frame: Vec<f64> = (0..n_fft).map(|i| x[t * hop + i] * win[i]).collect();
            let want = naive_dft(&frame);
            let scale = want.iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            for (k, &(re, im)) in want.iter().enumerate() {
                let got = spec.get(k, t);
                worst = worst.max((got.re - re).hypot(got.im - im) / scale);
            }
        }
    }
    ensure(worst < 1e-9, || format!("max relative error {worst:e}"))?;
    let t = within_time(start, 5.0)?;
    Ok(format!("max relative error {worst:.1e}, {t:.2} s"))
}

// 2595 * log10(2) evaluated to 40 significant digits with Python's decimal module.
const MEL_700: f64 = 781.172_838_748_031_201_579_652_431_810_059_404_463_5;

fn mel_scale_checks() -> Outcome {
    let zero = hz_to_mel(0.0).map_err(|e| e.to_string())?;
    ensure(zero == 0.0, || format!("hz_to_mel(0) = {zero}"))?;
    let m = hz_to_mel(700.0).map_err(|e| e.to_string())?;
    let six = |v: f64| format!("{v:.5e}");
    ensure(six(m) == six(MEL_700), || format!("hz_to_mel(700) = {m}, expected {MEL_700}"))?;
    let grid: Vec<f64> = (0..10_000).map(|i| i as f64 * 2.5).collect();
    let mels = grid.iter().map(|&f| hz_to_mel(f)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    ensure(mels.windows(2).all(|w| w[1] > w[0]), || "not strictly increasing".into())?;
    Ok(format!("hz_to_mel(700) = {m:.9}, off by {:.1e}", (m - MEL_700).abs()))
}

fn harmonic_fraction(samples: Vec<f64>) -> Result<(f64, f64), String> {
    let clip = AudioClip::new("h", samples, 8000).map_err(|e| e.to_string())?;
    let spec = stft(&clip, 512, 128, Window::Hann).map_err(|e| e.to_string())?;
    let (h, p) = hpss(&spec, 31, 31, 2.0).map_err(|e| e.to_string())?;
    let mut worst_sum: f64 = 0.0;
    for k in 0..spec.n_bins {
        for t in 0..spec.n_frames {
            let m = spec.magnitude(k, t);
            if m > 0.0 {
                let s = h.values.get(k, t) / m + p.values.get(k, t) / m;
                worst_sum = worst_sum.max((s - 1.0).abs());
            }
        }
    }
    let e = |v: &custnetgc::matrix::Matrix| v.data.iter().map(|x| x * x).sum::<f64>();
    let (eh, ep) = (e(&h.values), e(&p.values));
    Ok((eh / (eh + ep), worst_sum))
}

fn hpss_separates_tone_and_clicks() -> Outcome {
    let start = Instant::now();
    let n = 24_000;
    let tone: Vec<f64> = (0..n).map(|i| (2.0 * PI * 440.0 * i as f64 / 8000.0).sin()).collect();
    let clicks: Vec<f64> = (0..n).map(|i| if i % 800 == 400 { 1.0 } else { 0.0 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (tone_h, s1) = harmonic_fraction(tone)?;
    let (click_h, s2) = harmonic_fraction(clicks)?;
    let (_, s3) = harmonic_fraction(noise)?;
    let mask_err = s1.max(s2).max(s3);
    ensure(mask_err < 1e-6, || format!("masks sum off by {mask_err:e}"))?;
    ensure(tone_h >= 0.9, || format!("tone harmonic share {tone_h:.4}"))?;
    ensure(1.0 - click_h >= 0.9, || format!("click percussive share {:.4}", 1.0 - click_h))?;
    let t = within_time(start, 10.0)?;
    Ok(format!(
        "tone {:.1}% harmonic, clicks {:.1}% percussive, mask error {mask_err:.1e}, {t:.2} s",
        100.0 * tone_h,
        100.0 * (1.0 - click_h)
    ))
}

fn gradients_match_finite_differences() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0, String::new());
    let mut n_cases = 0;
    for seed in 0..3 {
        for case in layer_kind_cases(seed).map_err(|e| e.to_string())? {
            let g = case.check(1e-5, seed).map_err(|e| e.to_string())?;
            ensure(g.max_rel_error < 1e-4, || format!("{}: relative error {:e}", g.name, g.max_rel_error))?;
            if g.max_rel_error >= worst.0 {
                worst = (g.max_rel_error, g.name);
            }
            n_cases += 1;
        }
    }
    let t = within_time(start, 60.0)?;
    Ok(format!("{n_cases} cases, worst {:.1e} ({}), {t:.2} s", worst.0, worst.1))
}

fn gradcam_golden_and_non_negative() -> Outcome {
    let net = tiny_net(W);
    for (class, golden) in [(0, GOLDEN_0), (1, GOLDEN_1)] {
        let m = explain(&net, &ramp_image(), class, AlphaMode::AsPrinted).map_err(|e| e.to_string())?;
        ensure(m.values.data == golden, || format!("class {class} map {:?}", m.values.data))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100 {
        let px = (0..6 * 6 * 3).map(|_| rng.random::<f64>()).collect();
        let img = FeatureImage::new(6, 6, 3, px, Provenance::LmHP).unwrap();
        let m = explain(&net, &img, i % 2, AlphaMode::AsPrinted).map_err(|e| e.to_string())?;
        ensure(m.values.data.iter().all(|&v| v >= 0.0), || format!("negative value on input {i}"))?;
    }
    Ok("golden maps bit-exact, 100 random maps non-negative".into())
}

fn metrics_match_counting_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_auc: f64 = 0.0;
    for i in 0..1000 {
        let n = rng.random_range(2..=200);
        let pick = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { Label::Pd } else { Label::Hc };
        let mut truths: Vec<Label> = (0..n).map(|_| pick(&mut rng)).collect();
        truths[0] = Label::Pd;
        truths[1] = Label::Hc;
        let preds: Vec<Label> = (0..n).map(|_| pick(&mut rng)).collect();
        let s = scalar_metrics(&confusion(&preds, &truths).unwrap()).unwrap();
        let [acc, prec, rec, spec, f1, fpr] = brute_metrics(&preds, &truths);
        let got = [s.accuracy, s.precision, s.recall, s.specificity, s.f1];
        ensure(got == [acc, prec, rec, spec, f1], || format!("set {i}: {got:?} vs {:?}", [acc, prec, rec, spec, f1]))?;
        // FPR is stored as 1 - specificity; it agrees with FP / (FP + TN) to rounding.
        ensure((s.fpr - fpr).abs() <= f64::EPSILON, || format!("set {i}: fpr {} vs {fpr}", s.fpr))?;
        ensure(s.fpr + s.specificity == 1.0, || format!("set {i}: fpr + specificity != 1"))?;

        let scores: Vec<f64> = (0..n)
            .map(|_| if i % 2 == 0 { rng.random_range(0..20) as f64 / 20.0 } else { rng.random() })
            .collect();
        let a = auc(&roc_curve(&scores, &truths, Label::Pd).unwrap()).unwrap();
        worst_auc = worst_auc.max((a - mann_whitney(&scores, &truths, Label::Pd)).abs());
    }
    ensure(worst_auc < 1e-9, || format!("AUC off by {worst_auc:e}"))?;
    Ok(format!("1000 sets exact, AUC within {worst_auc:.1e} of Mann-Whitney"))
}

fn source_confusion_matrix() -> Outcome {
    let mut report = EvalReport::from_matrix(ConfusionMatrix {
        tp: 80,
        tn: 78,
        fp: 4,
        fn_: 0,
    })
    .map_err(|e| e.to_string())?;
    let m = &report.summary.metrics;
    ensure(m.accuracy == 158.0 / 162.0, || format!("accuracy {}", m.accuracy))?;
    ensure(m.precision == 80.0 / 84.0, || format!("precision {}", m.precision))?;
    ensure(m.recall == 1.0, || format!("recall {}", m.recall))?;
    ensure(m.specificity == 78.0 / 82.0, || format!("specificity {}", m.specificity))?;
    // F1 as 2TP / (2TP + FP + FN).
    ensure((m.f1 - 160.0 / 164.0).abs() < 1e-12, || format!("f1 {}", m.f1))?;
    let rounded = [m.accuracy, m.precision, m.specificity, m.f1].map(|v| format!("{v:.4}"));
    ensure(rounded == ["0.9753", "0.9524", "0.9512", "0.9756"], || format!("{rounded:?}"))?;

    report.reported_by_source.insert("precision".into(), 0.9583);
    report.reported_by_source.insert("f1".into(), 0.8459);
    let text = report.text();
    for (name, value) in [("precision", "0.9583"), ("f1", "0.8459")] {
        let line = text
            .lines()
            .find(|l| l.contains(name) && l.contains(value))
            .ok_or_else(|| format!("no {name} {value} line in the report"))?;
        ensure(line.contains("reported by source, inconsistent with its matrix"), || line.to_string())?;
    }
    Ok(format!("accuracy {}, precision {}, f1 {}; source figures flagged", rounded[0], rounded[1], rounded[3]))
}

fn gbdt_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows: Vec<EmbeddingRow> = (0..200)
        .map(|i| EmbeddingRow {
            source_id: i.to_string(),
            features: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
            label: if rng.random_bool(0.5) { Label::Pd } else { Label::Hc },
        })
        .collect();
    let model = gbdt_train(&rows, &GbdtParams::default()).map_err(|e| e.to_string())?;
    ensure(model.train_log_loss.len() == 101, || "expected 100 rounds".into())?;
    ensure(model.train_log_loss.windows(2).all(|w| w[1] <= w[0]), || "log-loss rose".into())?;

    let sep: Vec<EmbeddingRow> = (0..40)
        .map(|i| EmbeddingRow {
            source_id: i.to_string(),
            features: vec![i as f64],
            label: if i < 20 { Label::Hc } else { Label::Pd },
        })
        .collect();
    let params = GbdtParams {
        n_rounds: 10,
        ..GbdtParams::default()
    };
    let model = gbdt_train(&sep, &params).map_err(|e| e.to_string())?;
    for r in &sep {
        let p = model.predict_proba(&r.features).map_err(|e| e.to_string())?;
        ensure(label_for(p, 0.5) == r.label, || format!("sample {} misclassified (p = {p})", r.source_id))?;
    }
    let first = model.train_log_loss[0];
    let last = model.train_log_loss[model.train_log_loss.len() - 1];
    Ok(format!("random-data loss non-increasing; separable set perfect in 10 rounds (loss {first:.3} -> {last:.3})"))
}

fn synthetic_config(dir: &Path) -> RunConfig {
    synthetic_run(dir, 200, 64, 8)
}

fn synthetic_experiment(first: &TempDir) -> Outcome {
    let start = Instant::now();
    let cfg = synthetic_config(first.path());
    let report = run_all(&cfg, false).map_err(|e| e.to_string())?;
    let t = within_time(start, 900.0)?;
    let acc = report.summary.metrics.accuracy;
    let auc_pd = report.summary.auc["PD"];
    let auc_hc = report.summary.auc["HC"];
    ensure(acc >= 0.95, || format!("held-out accuracy {acc:.4}"))?;
    ensure(auc_pd >= 0.95 && auc_hc >= 0.95, || format!("AUC PD {auc_pd:.4}, HC {auc_hc:.4}"))?;
    Ok(format!(
        "{} held-out clips: accuracy {acc:.4}, AUC PD {auc_pd:.4}, HC {auc_hc:.4}, {t:.0} s",
        report.n_samples
    ))
}

fn reproducible_runs(first: &TempDir) -> Outcome {
    let a = synthetic_config(first.path());
    if !a.eval_dir().join("metrics.json").exists() {
        run_all(&a, false).map_err(|e| e.to_string())?;
    }
    let second = TempDir::new().unwrap();
    let b = synthetic_config(second.path());
    run_all(&b, false).map_err(|e| e.to_string())?;
    let read = |p: std::path::PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    let (ma, mb) = (read(a.eval_dir().join("metrics.json"))?, read(b.eval_dir().join("metrics.json"))?);
    ensure(ma == mb, || "metrics.json differs".into())?;
    let (ca, cb) = (read(a.model_dir().join(CHECKPOINT_FILE))?, read(b.model_dir().join(CHECKPOINT_FILE))?);
    ensure(ca == cb, || "checkpoints differ".into())?;
    Ok(format!("metrics.json ({} bytes) and checkpoint ({} bytes) identical", ma.len(), ca.len()))
}

fn report(line: &str) {
    // Written past the test harness capture so the lines always show.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn acceptance_criteria() {
    let run_dir = TempDir::new().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("STFT vs naive DFT", Box::new(stft_matches_naive_dft)),
        ("mel scale", Box::new(mel_scale_checks)),
        ("HPSS masks and separation", Box::new(hpss_separates_tone_and_clicks)),
        ("finite-difference gradients", Box::new(gradients_match_finite_differences)),
        ("Grad-CAM golden map", Box::new(gradcam_golden_and_non_negative)),
        ("metrics vs counting oracle", Box::new(metrics_match_counting_oracle)),
        ("80/78/4/0 confusion matrix", Box::new(source_confusion_matrix)),
        ("GBDT loss and separable set", Box::new(gbdt_checks)),
        ("synthetic end-to-end run", Box::new(|| synthetic_experiment(&run_dir))),
        ("reproducible reruns", Box::new(|| reproducible_runs(&run_dir))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => report(&format!("criterion {:>2} PASS  {name}: {detail}", i + 1)),
            Err(why) => {
                report(&format!("criterion {:>2} FAIL  {name}: {why}", i + 1));
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
