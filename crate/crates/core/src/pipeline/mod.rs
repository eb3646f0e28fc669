//! The end-to-end pipeline behind the CLI: preprocess, featurize, train,
//! explain and evaluate. Each stage reads the previous stage's directory
//! under `out_dir`, stamps its own directory with the hash of the config
//! sections it depends on, and refuses to mix outputs from different
//! configs unless forced.

mod config;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    EvalParams, EvalSubset, ExplainParams, HpssParams, ImageKind, ImageParams, MelParams, NetParams, RunConfig,
    SplitParams, Stage, StftParams, CONFIG_SCHEMA, OUT_DIR_ENV,
};

use crate::boost::{extract_embeddings, gbdt_train, GbdtModel};
use crate::custnet::{
    build_custnet, image_to_input, network_fingerprint, stratified_split, train, Checkpoint, EpochRecord,
    History, Mode, Network,
};
use crate::error::{Error, Result};
use crate::evalkit::{emit_report, EvalReport, StageSummary};
use crate::gradcam::{explain, overlay};
use crate::ingest::{load_audio, preprocess, read_manifest, write_manifest, write_wav, ManifestEntry};
use crate::label::Label;
use crate::spectral::image::{read_png, render_spectrogram, write_png};
use crate::spectral::{
    compress_component, hpss, log_mel, mel_filterbank, render_slope_plot, spectral_slopes, stack_lmhp, stft,
    FeatureImage, PlotAxes, SlopeSeries,
};

pub const STAMP_FILE: &str = "RUN_STAMP.json";
pub const CHECKPOINT_FILE: &str = "custnet.ckpt";
pub const BOOST_FILE: &str = "boost.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const SPLIT_FILE: &str = "split.json";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const AXES_FILE: &str = "plot_axes.json";

/// Image kinds written per clip, in file-name tag form.
pub const FEATURE_TAGS: [&str; 5] = ["logmel", "harmonic", "percussive", "slope", "lmhp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStamp {
    pub schema: String,
    pub stage: Stage,
    pub config_hash: String,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    io(path, std::fs::write(path, s))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = io(path, std::fs::read_to_string(path))?;
    Ok(serde_json::from_str(&text)?)
}

fn read_stamp(dir: &Path) -> Result<Option<RunStamp>> {
    let p = dir.join(STAMP_FILE);
    if !p.exists() {
        return Ok(None);
    }
    read_json(&p).map(Some)
}

/// Checks that `dir` holds outputs of `stage` made with `hash`.
fn check_upstream(dir: &Path, stage: Stage, hash: &str, force: bool) -> Result<()> {
    match read_stamp(dir)? {
        None => Err(Error::Manifest(format!(
            "{} has no {STAMP_FILE}; run `{}` first",
            dir.display(),
            stage.name()
        ))),
        Some(s) if s.config_hash == hash => Ok(()),
        Some(s) if force => {
            log::warn!("{}: using {} outputs from config {} (--force)", dir.display(), stage.name(), s.config_hash);
            Ok(())
        }
        Some(s) => Err(Error::Config(format!(
            "{} was produced by `{}` with config hash {}, current config hashes to {hash}; rerun that stage or pass --force",
            dir.display(),
            stage.name(),
            s.config_hash
        ))),
    }
}

/// Readies an output directory. A directory holding outputs of another
/// config (or unstamped files) is refused, or cleared under `force`.
fn prepare_output(dir: &Path, stage: Stage, hash: &str, force: bool) -> Result<()> {
    if dir.exists() {
        let stamp = read_stamp(dir).ok().flatten();
        let matches = stamp.as_ref().is_some_and(|s| s.config_hash == hash && s.stage == stage);
        let empty = io(dir, std::fs::read_dir(dir))?.next().is_none();
        if !matches && !empty {
            if !force {
                let found = stamp.map_or_else(|| "no stamp".to_string(), |s| format!("config hash {}", s.config_hash));
                return Err(Error::Config(format!(
                    "{} holds outputs with {found}, current config hashes to {hash}; pass --force to replace them",
                    dir.display()
                )));
            }
            io(dir, std::fs::remove_dir_all(dir))?;
        }
    }
    io(dir, std::fs::create_dir_all(dir))?;
    write_json(
        &dir.join(STAMP_FILE),
        &RunStamp {
            schema: CONFIG_SCHEMA.into(),
            stage,
            config_hash: hash.into(),
        },
    )
}

/// One input that failed while the rest of a stage went ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub dir: PathBuf,
    pub succeeded: Vec<String>,
    pub failures: Vec<Failure>,
}

/// Preprocesses every clip of the manifest into `out_dir/processed` and
/// writes a manifest of the clips that succeeded.
pub fn cmd_preprocess(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate()?;
    let entries = read_manifest(&cfg.manifest)?;
    if entries.is_empty() {
        return Err(Error::Manifest(format!("{} lists no clips", cfg.manifest.display())));
    }
    let dir = cfg.processed_dir();
    prepare_output(&dir, Stage::Preprocess, &cfg.stage_hash(Stage::Preprocess)?, force)?;

    let results: Vec<Result<ManifestEntry>> = entries
        .par_iter()
        .map(|e| {
            let mut clip = load_audio(&e.path)?.with_label(e.label);
            clip.id = e.sample_id.clone();
            let out = preprocess(&clip, &cfg.preprocess)?;
            let name = format!("{}.wav", e.sample_id);
            write_wav(&dir.join(&name), &out)?;
            Ok(ManifestEntry {
                path: PathBuf::from(name),
                ..e.clone()
            })
        })
        .collect();

    let mut kept = Vec::new();
    let mut outcome = StageOutcome {
        dir: dir.clone(),
        succeeded: Vec::new(),
        failures: Vec::new(),
    };
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(entry) => {
                println!("processed: {}", e.path.display());
                outcome.succeeded.push(entry.sample_id.clone());
                kept.push(entry);
            }
            Err(err) => {
                println!("failed: {}: {err}", e.path.display());
                outcome.failures.push(Failure {
                    id: e.sample_id.clone(),
                    message: err.to_string(),
                });
            }
        }
    }
    write_manifest(&dir.join(MANIFEST_FILE), &kept)?;
    Ok(outcome)
}

/// One row of the feature manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub source_id: String,
    pub label: Label,
    pub kind: String,
    /// File name inside the features directory.
    pub path: String,
}

/// Sidecar JSON written next to every feature image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub source_id: String,
    pub label: Label,
    pub kind: String,
    pub params_hash: String,
    pub height: usize,
    pub width: usize,
}

fn feature_name(id: &str, tag: &str) -> String {
    format!("{id}.{tag}.png")
}

fn write_feature(dir: &Path, id: &str, label: Label, tag: &str, img: &FeatureImage, hash: &str) -> Result<()> {
    let name = feature_name(id, tag);
    write_png(
        &dir.join(&name),
        img,
        &[("config_hash", hash), ("source_id", id), ("kind", tag)],
    )?;
    write_json(
        &dir.join(format!("{id}.{tag}.json")),
        &Sidecar {
            source_id: id.into(),
            label,
            kind: tag.into(),
            params_hash: hash.into(),
            height: img.height,
            width: img.width,
        },
    )
}

/// Renders the four spectrogram-based images of one clip and returns its
/// slope series for the dataset-wide slope plots.
fn featurize_clip(cfg: &RunConfig, dir: &Path, e: &ManifestEntry, hash: &str) -> Result<SlopeSeries> {
    let clip = load_audio(&e.path)?;
    let spec = stft(&clip, cfg.stft.n_fft, cfg.stft.hop, cfg.stft.window)?;
    let sr = clip.sample_rate_hz;
    let fb = mel_filterbank(
        cfg.mel.n_mels,
        cfg.stft.n_fft,
        sr,
        cfg.mel.f_min_hz,
        cfg.mel.f_max_hz.unwrap_or(sr as f64 / 2.0),
    )?;
    let lm = log_mel(&spec, &fb, cfg.mel.floor)?;
    let (h, p) = hpss(&spec, cfg.hpss.h_kernel, cfg.hpss.p_kernel, cfg.hpss.power)?;
    let h = compress_component(&h, cfg.hpss.alpha)?;
    let p = compress_component(&p, cfg.hpss.alpha)?;
    let size = (cfg.image.size[0], cfg.image.size[1]);
    let (lmhp, warnings) = stack_lmhp(&lm, &h, &p, size)?;
    for w in warnings {
        log::warn!("{}: {w}", e.sample_id);
    }
    for (tag, img) in [
        ("logmel", render_spectrogram(&lm, size)?),
        ("harmonic", render_spectrogram(&h, size)?),
        ("percussive", render_spectrogram(&p, size)?),
        ("lmhp", lmhp),
    ] {
        write_feature(dir, &e.sample_id, e.label, tag, &img, hash)?;
    }
    spectral_slopes(&spec, cfg.slope)
}

/// Writes five images (log-Mel, harmonic, percussive, slope plot, L-mHP)
/// with sidecars for every processed clip. Slope plots share axes fitted to
/// the whole dataset unless the config fixes them.
pub fn cmd_featurize(cfg: &RunConfig, force: bool) -> Result<StageOutcome> {
    cfg.validate()?;
    let src = cfg.processed_dir();
    check_upstream(&src, Stage::Preprocess, &cfg.stage_hash(Stage::Preprocess)?, force)?;
    let entries = read_manifest(&src.join(MANIFEST_FILE))?;
    if entries.is_empty() {
        return Err(Error::Manifest(format!("{} lists no clips", src.display())));
    }
    let hash = cfg.stage_hash(Stage::Featurize)?;
    let dir = cfg.features_dir();
    prepare_output(&dir, Stage::Featurize, &hash, force)?;

    let results: Vec<Result<SlopeSeries>> = entries.par_iter().map(|e| featurize_clip(cfg, &dir, e, &hash)).collect();
    let mut done = Vec::new();
    let mut outcome = StageOutcome {
        dir: dir.clone(),
        succeeded: Vec::new(),
        failures: Vec::new(),
    };
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(s) => done.push((e, s)),
            Err(err) => {
                println!("failed: {}: {err}", e.sample_id);
                outcome.failures.push(Failure {
                    id: e.sample_id.clone(),
                    message: err.to_string(),
                });
            }
        }
    }

    let axes = cfg
        .image
        .axes
        .unwrap_or_else(|| PlotAxes::covering(done.iter().map(|(_, s)| s)));
    write_json(&dir.join(AXES_FILE), &axes)?;
    let [height, width] = cfg.image.size;
    let plots: Vec<Result<()>> = done
        .par_iter()
        .map(|(e, s)| {
            let img = render_slope_plot(s, width, height, &axes)?;
            write_feature(&dir, &e.sample_id, e.label, "slope", &img, &hash)
        })
        .collect();

    let mut rows = Vec::new();
    for ((e, _), r) in done.iter().zip(plots) {
        if let Err(err) = r {
            println!("failed: {}: {err}", e.sample_id);
            outcome.failures.push(Failure {
                id: e.sample_id.clone(),
                message: err.to_string(),
            });
            continue;
        }
        for tag in FEATURE_TAGS {
            rows.push(FeatureRow {
                source_id: e.sample_id.clone(),
                label: e.label,
                kind: tag.into(),
                path: feature_name(&e.sample_id, tag),
            });
        }
        println!("featurized: {}", e.sample_id);
        outcome.succeeded.push(e.sample_id.clone());
    }
    write_feature_manifest(&dir.join(MANIFEST_FILE), &rows)?;
    Ok(outcome)
}

fn write_feature_manifest(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    }
    io(path, w.flush())
}

pub fn read_feature_manifest(path: &Path) -> Result<Vec<FeatureRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<FeatureRow>, _>>()
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
}

/// Training images of the configured kind: `(image, label, source id)`.
fn load_feature_set(cfg: &RunConfig) -> Result<Vec<(FeatureImage, Label, String)>> {
    let dir = cfg.features_dir();
    let rows: Vec<FeatureRow> = read_feature_manifest(&dir.join(MANIFEST_FILE))?
        .into_iter()
        .filter(|r| r.kind == cfg.image.kind.tag())
        .collect();
    if rows.is_empty() {
        return Err(Error::Manifest(format!("{} has no `{}` images", dir.display(), cfg.image.kind.tag())));
    }
    rows.par_iter()
        .map(|r| Ok((read_png(&dir.join(&r.path))?, r.label, r.source_id.clone())))
        .collect()
}

/// Source ids on each side of the train/validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub train_fraction: f64,
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub history: History,
    pub split: SplitRecord,
    pub boost: GbdtModel,
}

/// Trains the CNN on the configured image kind, then the boosted trees on
/// the CNN embeddings of the training split.
pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_upstream(&cfg.features_dir(), Stage::Featurize, &cfg.stage_hash(Stage::Featurize)?, force)?;
    let data = load_feature_set(cfg)?;
    let tcfg = cfg.train_config();
    let labels: Vec<Label> = data.iter().map(|d| d.1).collect();
    let (train_idx, val_idx) = stratified_split(&labels, tcfg.train_fraction, tcfg.seed)?;
    let net = build_custnet(&cfg.net_config())?;

    let hash = cfg.stage_hash(Stage::Train)?;
    let dir = cfg.model_dir();
    prepare_output(&dir, Stage::Train, &hash, force)?;

    let examples: Vec<(FeatureImage, Label)> = data.iter().map(|(img, l, _)| (img.clone(), *l)).collect();
    let (net, history) = train(&net, &examples, &tcfg)?;
    let train_toml = toml::to_string(&tcfg).map_err(|e| Error::Config(e.to_string()))?;
    Checkpoint {
        network: net.clone(),
        train_config_hash: config::sha256_hex(train_toml.as_bytes()),
        run_config_hash: hash,
    }
    .save(&dir.join(CHECKPOINT_FILE))?;

    let train_set: Vec<_> = train_idx.iter().map(|&i| data[i].clone()).collect();
    let rows = extract_embeddings(&net, &train_set, tcfg.alpha_mode)?;
    let mut boost = gbdt_train(&rows, &cfg.boost)?;
    boost.net_fingerprint = network_fingerprint(&net);
    boost.save(&dir.join(BOOST_FILE))?;

    let hist_path = dir.join(HISTORY_FILE);
    io(&hist_path, std::fs::write(&hist_path, history.to_csv()))?;
    let split = SplitRecord {
        train_fraction: tcfg.train_fraction,
        seed: tcfg.seed,
        train: train_idx.iter().map(|&i| data[i].2.clone()).collect(),
        validation: val_idx.iter().map(|&i| data[i].2.clone()).collect(),
    };
    write_json(&dir.join(SPLIT_FILE), &split)?;
    Ok(TrainOutcome {
        dir,
        history,
        split,
        boost,
    })
}

fn load_checkpoint(cfg: &RunConfig, force: bool) -> Result<Network> {
    let dir = cfg.model_dir();
    check_upstream(&dir, Stage::Train, &cfg.stage_hash(Stage::Train)?, force)?;
    let ckpt = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    let hash = cfg.stage_hash(Stage::Train)?;
    if ckpt.run_config_hash != hash && !force {
        return Err(Error::Config(format!(
            "checkpoint was trained under config hash {}, current config hashes to {hash}; pass --force to use it anyway",
            ckpt.run_config_hash
        )));
    }
    Ok(ckpt.network)
}

/// Overlay path for a source image: `a/b.slope.png` -> `a/b.slope.gradcam.png`.
pub fn gradcam_path(src: &Path, ext: &str) -> PathBuf {
    let stem = src.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    src.with_file_name(format!("{stem}.gradcam.{ext}"))
}

/// Writes a Grad-CAM overlay (and optionally the raw map as CSV) next to
/// each image. With no images given, explains every training-kind image in
/// the features directory. Returns the overlay paths.
pub fn cmd_explain(cfg: &RunConfig, images: &[PathBuf], force: bool) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let net = load_checkpoint(cfg, force)?;
    let images: Vec<PathBuf> = if images.is_empty() {
        let dir = cfg.features_dir();
        read_feature_manifest(&dir.join(MANIFEST_FILE))?
            .into_iter()
            .filter(|r| r.kind == cfg.image.kind.tag())
            .map(|r| dir.join(r.path))
            .collect()
    } else {
        images.to_vec()
    };
    let loaded = images
        .iter()
        .map(|p| read_png(p))
        .collect::<Result<Vec<FeatureImage>>>()?;
    let alpha = cfg.net.train.alpha_mode;
    let hash = cfg.stage_hash(Stage::Explain)?;

    images
        .par_iter()
        .zip(loaded.par_iter())
        .map(|(path, img)| {
            if (img.height, img.width) != (net.input_shape[0], net.input_shape[1]) {
                log::info!(
                    "{}: {}x{} image resized to the network input {}x{}",
                    path.display(),
                    img.height,
                    img.width,
                    net.input_shape[0],
                    net.input_shape[1]
                );
            }
            let class = match cfg.explain.class {
                Some(l) => l.index().ok_or_else(|| Error::Config("explain.class must be PD or HC".into()))?,
                None => predicted_class(&net, img, alpha)?,
            };
            let map = explain(&net, img, class, alpha)?;
            let out = gradcam_path(path, "png");
            let class_name = Label::from_index(class).map_or("", Label::as_str);
            write_png(
                &out,
                &overlay(&map, img, cfg.explain.opacity)?,
                &[("config_hash", &hash), ("class", class_name), ("layer", &map.source_layer)],
            )?;
            if cfg.explain.write_csv {
                let csv_path = gradcam_path(path, "csv");
                io(&csv_path, std::fs::write(&csv_path, map.values.to_csv()))?;
            }
            Ok(out)
        })
        .collect()
}

fn predicted_class(net: &Network, img: &FeatureImage, alpha: crate::custnet::AlphaMode) -> Result<usize> {
    let x = net.batch_of_one(&image_to_input(img, &net.input_shape, alpha)?)?;
    let pass = net.forward(&x, Mode::Infer)?;
    let scores = &pass.output(net.taps.logits).data[..net.n_classes];
    Ok((0..scores.len()).fold(0, |best, c| if scores[c] > scores[best] { c } else { best }))
}

/// Scores the chosen subset with the CNN and the boosted model and writes
/// the report files to `out_dir/eval`.
pub fn cmd_evaluate(cfg: &RunConfig, force: bool) -> Result<EvalReport> {
    cfg.validate()?;
    let net = load_checkpoint(cfg, force)?;
    let model_dir = cfg.model_dir();
    let boost = GbdtModel::load(&model_dir.join(BOOST_FILE))?;
    if boost.net_fingerprint != network_fingerprint(&net) {
        return Err(Error::Format(format!(
            "{} was trained against a different network than {}",
            BOOST_FILE, CHECKPOINT_FILE
        )));
    }
    let split: SplitRecord = read_json(&model_dir.join(SPLIT_FILE))?;
    let history = read_history(&model_dir.join(HISTORY_FILE))?;
    let data = load_feature_set(cfg)?;
    let keep: std::collections::HashSet<String> = match cfg.eval.subset {
        EvalSubset::Validation => split.validation.iter().cloned().collect(),
        EvalSubset::Train => split.train.iter().cloned().collect(),
        EvalSubset::All => data.iter().map(|d| d.2.clone()).collect(),
    };
    let subset: Vec<_> = data.into_iter().filter(|d| keep.contains(&d.2)).collect();
    if subset.len() != keep.len() {
        return Err(Error::Manifest(format!(
            "{} of {} evaluation images are missing from the features directory",
            keep.len() - subset.len(),
            keep.len()
        )));
    }

    let rows = extract_embeddings(&net, &subset, cfg.net.train.alpha_mode)?;
    let truths: Vec<Label> = rows.iter().map(|r| r.label).collect();
    let pd = rows
        .iter()
        .map(|r| boost.predict_proba(&r.features))
        .collect::<Result<Vec<f64>>>()?;
    let hc: Vec<f64> = pd.iter().map(|p| 1.0 - p).collect();
    // The embedding ends with the softmax probabilities (HC, PD).
    let cnn_pd: Vec<f64> = rows.iter().map(|r| r.features[r.features.len() - 1]).collect();
    let cnn_hc: Vec<f64> = rows.iter().map(|r| r.features[r.features.len() - 2]).collect();

    let mut report = EvalReport::from_scores(&pd, &hc, &truths, cfg.eval.threshold)?;
    report.cnn = Some(StageSummary::from_scores(&cnn_pd, &cnn_hc, &truths, cfg.eval.threshold)?);
    report.reported_by_source = cfg.eval.reported_by_source.clone();
    report.config_hash = Some(cfg.stage_hash(Stage::Evaluate)?);
    report.history = Some(history);

    let dir = cfg.eval_dir();
    prepare_output(&dir, Stage::Evaluate, report.config_hash.as_deref().unwrap_or_default(), force)?;
    emit_report(&report, &dir)?;
    let mut preds = String::from("source_id,label,boosted_pd,cnn_pd,prediction\n");
    for (i, r) in rows.iter().enumerate() {
        let label = crate::boost::label_for(pd[i], cfg.eval.threshold);
        preds.push_str(&format!("{},{},{},{},{}\n", r.source_id, r.label, pd[i], cnn_pd[i], label));
    }
    let p = dir.join("predictions.csv");
    io(&p, std::fs::write(&p, preds))?;
    Ok(report)
}

fn read_history(path: &Path) -> Result<History> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let epochs = r
        .deserialize::<EpochRecord>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok(History { epochs })
}

/// Runs preprocess, featurize, train and evaluate in order.
pub fn run_all(cfg: &RunConfig, force: bool) -> Result<EvalReport> {
    let pre = cmd_preprocess(cfg, force)?;
    if !pre.failures.is_empty() {
        return Err(partial(Stage::Preprocess, &pre));
    }
    let feat = cmd_featurize(cfg, force)?;
    if !feat.failures.is_empty() {
        return Err(partial(Stage::Featurize, &feat));
    }
    cmd_train(cfg, force)?;
    cmd_evaluate(cfg, force)
}

fn partial(stage: Stage, o: &StageOutcome) -> Error {
    Error::Manifest(format!(
        "{}: {} of {} inputs failed (first: {}: {})",
        stage.name(),
        o.failures.len(),
        o.failures.len() + o.succeeded.len(),
        o.failures[0].id,
        o.failures[0].message
    ))
}
