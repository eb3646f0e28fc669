use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boost::GbdtParams;
use crate::custnet::{CustNetConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::evalkit::ReferenceFigures;
use crate::ingest::PreprocessConfig;
use crate::label::Label;
use crate::spectral::{PlotAxes, SlopeBand, Window};

pub const CONFIG_SCHEMA: &str = "custnetgc.run/1";

/// Overrides `out_dir` when set.
pub const OUT_DIR_ENV: &str = "CUSTNETGC_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftParams {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftParams {
    fn default() -> Self {
        StftParams {
            n_fft: 512,
            hop: 128,
            window: Window::Hann,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelParams {
    pub n_mels: usize,
    pub f_min_hz: f64,
    /// Nyquist when absent.
    pub f_max_hz: Option<f64>,
    pub floor: f64,
}

impl Default for MelParams {
    fn default() -> Self {
        MelParams {
            n_mels: 64,
            f_min_hz: 0.0,
            f_max_hz: None,
            floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpssParams {
    pub h_kernel: usize,
    pub p_kernel: usize,
    pub power: f64,
    /// Gain inside `log(1 + alpha * m)` applied to both components.
    pub alpha: f64,
}

impl Default for HpssParams {
    fn default() -> Self {
        HpssParams {
            h_kernel: 31,
            p_kernel: 31,
            power: 2.0,
            alpha: 1.0,
        }
    }
}

/// Which feature image the network is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    SlopePlot,
    Lmhp,
}

impl ImageKind {
    /// File-name tag of this kind's images.
    pub fn tag(self) -> &'static str {
        match self {
            ImageKind::SlopePlot => "slope",
            ImageKind::Lmhp => "lmhp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageParams {
    pub kind: ImageKind,
    /// `[height, width]` of every rendered image.
    pub size: [usize; 2],
    /// Fixed slope-plot axes. Derived from the whole dataset when absent.
    pub axes: Option<PlotAxes>,
}

impl Default for ImageParams {
    fn default() -> Self {
        ImageParams {
            kind: ImageKind::SlopePlot,
            size: [244, 244],
            axes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetParams {
    pub num_middle_blocks: usize,
    /// Divides every layer width; 1 keeps the full network.
    pub width_divisor: usize,
    /// Weight initialization seed.
    pub seed: u64,
    /// `train_fraction` and `seed` here are replaced by the `[split]` values.
    pub train: TrainConfig,
}

impl Default for NetParams {
    fn default() -> Self {
        NetParams {
            num_middle_blocks: 4,
            width_divisor: 1,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainParams {
    pub opacity: f64,
    /// Class to explain; the network's prediction when absent.
    pub class: Option<Label>,
    /// Also write the raw map as CSV.
    pub write_csv: bool,
}

impl Default for ExplainParams {
    fn default() -> Self {
        ExplainParams {
            opacity: crate::gradcam::DEFAULT_OPACITY,
            class: None,
            write_csv: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSubset {
    Validation,
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub threshold: f64,
    pub subset: EvalSubset,
    /// Published figures printed beside the computed ones.
    pub reported_by_source: ReferenceFigures,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            threshold: 0.5,
            subset: EvalSubset::Validation,
            reported_by_source: ReferenceFigures::new(),
        }
    }
}

/// Everything a pipeline run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    /// Input manifest for `preprocess`.
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub preprocess: PreprocessConfig,
    pub stft: StftParams,
    pub mel: MelParams,
    pub hpss: HpssParams,
    pub slope: SlopeBand,
    pub image: ImageParams,
    pub net: NetParams,
    pub boost: GbdtParams,
    pub split: SplitParams,
    pub explain: ExplainParams,
    pub eval: EvalParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: CONFIG_SCHEMA.into(),
            manifest: PathBuf::from("manifest.csv"),
            out_dir: PathBuf::from("out"),
            preprocess: PreprocessConfig::default(),
            stft: StftParams::default(),
            mel: MelParams::default(),
            hpss: HpssParams::default(),
            slope: SlopeBand::default(),
            image: ImageParams::default(),
            net: NetParams::default(),
            boost: GbdtParams::default(),
            split: SplitParams::default(),
            explain: ExplainParams::default(),
            eval: EvalParams::default(),
        }
    }
}

/// Pipeline stages; each one's outputs depend on its own config sections
/// and those of the stages before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Preprocess,
    Featurize,
    Train,
    Explain,
    Evaluate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Evaluate => "evaluate",
        }
    }

    fn sections(self) -> &'static [&'static str] {
        const PRE: &[&str] = &["schema", "preprocess"];
        const FEAT: &[&str] = &["schema", "preprocess", "stft", "mel", "hpss", "slope", "image"];
        const TRAIN: &[&str] = &["schema", "preprocess", "stft", "mel", "hpss", "slope", "image", "net", "boost", "split"];
        const EXPL: &[&str] = &[
            "schema", "preprocess", "stft", "mel", "hpss", "slope", "image", "net", "boost", "split", "explain",
        ];
        const EVAL: &[&str] = &[
            "schema", "preprocess", "stft", "mel", "hpss", "slope", "image", "net", "boost", "split", "eval",
        ];
        match self {
            Stage::Preprocess => PRE,
            Stage::Featurize => FEAT,
            Stage::Train => TRAIN,
            Stage::Explain => EXPL,
            Stage::Evaluate => EVAL,
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    crate::custnet::checkpoint::hex(&Sha256::digest(bytes))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "schema `{}` is not supported (expected `{CONFIG_SCHEMA}`)",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative `manifest` and `out_dir` paths resolve
    /// against the file's directory; `CUSTNETGC_OUT_DIR` replaces `out_dir`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if cfg.manifest.is_relative() {
            cfg.manifest = base.join(&cfg.manifest);
        }
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
            cfg.out_dir = PathBuf::from(dir);
        } else if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    /// Applies one seed to the split, the weight init, training and boosting.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self.net.seed = seed;
        self.net.train.seed = seed;
        self.boost.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.train_config().validate()?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.stft.n_fft < 2 || self.stft.hop == 0 {
            return bad("stft needs n_fft >= 2 and hop >= 1");
        }
        if self.mel.n_mels == 0 || !(self.mel.floor > 0.0) {
            return bad("mel needs n_mels >= 1 and a positive floor");
        }
        for k in [self.hpss.h_kernel, self.hpss.p_kernel] {
            if k < 3 || k % 2 == 0 {
                return bad("hpss kernels must be odd and at least 3");
            }
        }
        if !(self.hpss.power >= 1.0) || !(self.hpss.alpha > 0.0) {
            return bad("hpss needs power >= 1 and alpha > 0");
        }
        if self.image.size.contains(&0) {
            return bad("image size must be positive");
        }
        if self.net.num_middle_blocks == 0 || self.net.width_divisor == 0 {
            return bad("net needs at least one middle block and a positive width divisor");
        }
        if !(0.0..=1.0).contains(&self.explain.opacity) {
            return bad("explain.opacity must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.eval.threshold) {
            return bad("eval.threshold must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn net_config(&self) -> CustNetConfig {
        let [h, w] = self.image.size;
        CustNetConfig {
            input_shape: [h, w, 3],
            seed: self.net.seed,
            ..CustNetConfig::scaled(h, self.net.width_divisor, self.net.num_middle_blocks)
        }
    }

    /// Training settings with the split taken from `[split]`.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            train_fraction: self.split.train_fraction,
            seed: self.split.seed,
            ..self.net.train.clone()
        }
    }

    /// Hash of the sections that determine a stage's outputs. Paths are
    /// never part of it.
    pub fn stage_hash(&self, stage: Stage) -> Result<String> {
        let value = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let toml::Value::Table(mut table) = value else {
            return Err(Error::Config("config did not serialize to a table".into()));
        };
        table.retain(|k, _| stage.sections().iter().any(|s| *s == k));
        let text = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
        Ok(sha256_hex(text.as_bytes()))
    }

    /// Hash over every section except the paths.
    pub fn config_hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.manifest = PathBuf::new();
        c.out_dir = PathBuf::new();
        Ok(sha256_hex(c.to_toml()?.as_bytes()))
    }

    pub fn processed_dir(&self) -> PathBuf {
        self.out_dir.join("processed")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.out_dir.join("features")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.out_dir.join("model")
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.out_dir.join("eval")
    }
}
