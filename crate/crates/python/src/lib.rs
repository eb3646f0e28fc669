//! Python bindings: audio preprocessing, spectral features, metrics, run
//! configs, pipeline stages and trained models.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use custnetgc::boost::{extract_embeddings, GbdtModel};
use custnetgc::custnet::{image_to_input, AlphaMode, Checkpoint, Network};
use custnetgc::evalkit::{auc, roc_curve, scalar_metrics, ConfusionMatrix};
use custnetgc::ingest::{preprocess, AudioClip, PreprocessConfig};
use custnetgc::pipeline::{self, RunConfig};
use custnetgc::spectral::image::read_png;
use custnetgc::spectral::{self as sp, Window};
use custnetgc::{Error, Label};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::NonFinite(_) | Error::Shape(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn label(s: &str) -> PyResult<Label> {
    s.parse().map_err(py_err)
}

fn window(name: &str) -> PyResult<Window> {
    match name {
        "hann" => Ok(Window::Hann),
        "hamming" => Ok(Window::Hamming),
        "rect" => Ok(Window::Rect),
        _ => Err(PyValueError::new_err(format!("unknown window `{name}`"))),
    }
}

fn clip(samples: Vec<f64>, sample_rate_hz: u32) -> PyResult<AudioClip> {
    AudioClip::new("py", samples, sample_rate_hz).map_err(py_err)
}

fn rows(m: &custnetgc::matrix::Matrix) -> Vec<Vec<f64>> {
    (0..m.rows).map(|r| m.row(r).to_vec()).collect()
}

/// Resamples to `target_sample_rate_hz`, fits to `target_duration_s` and
/// peak-normalizes. Returns the new samples.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate_hz, target_duration_s=3.0, target_sample_rate_hz=8000, peak_level=0.99))]
fn preprocess_audio(
    samples: Vec<f64>,
    sample_rate_hz: u32,
    target_duration_s: f64,
    target_sample_rate_hz: u32,
    peak_level: f64,
) -> PyResult<Vec<f64>> {
    let cfg = PreprocessConfig {
        target_duration_s,
        target_sample_rate_hz,
        peak_level,
        ..PreprocessConfig::default()
    };
    cfg.validate().map_err(py_err)?;
    Ok(preprocess(&clip(samples, sample_rate_hz)?, &cfg).map_err(py_err)?.samples)
}

#[pyfunction]
fn hz_to_mel(f_hz: f64) -> PyResult<f64> {
    sp::hz_to_mel(f_hz).map_err(py_err)
}

#[pyfunction]
fn mel_to_hz(mel: f64) -> f64 {
    sp::mel_to_hz(mel)
}

/// STFT magnitudes as `[bin][frame]`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate_hz, n_fft=512, hop=128, window_name="hann"))]
fn stft_magnitude(samples: Vec<f64>, sample_rate_hz: u32, n_fft: usize, hop: usize, window_name: &str) -> PyResult<Vec<Vec<f64>>> {
    let spec = sp::stft(&clip(samples, sample_rate_hz)?, n_fft, hop, window(window_name)?).map_err(py_err)?;
    Ok((0..spec.n_bins)
        .map(|k| (0..spec.n_frames).map(|t| spec.magnitude(k, t)).collect())
        .collect())
}

/// Log-Mel spectrogram as `[mel band][frame]`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate_hz, n_fft=512, hop=128, n_mels=64, f_min_hz=0.0, f_max_hz=None, floor=1e-10))]
#[allow(clippy::too_many_arguments)]
fn log_mel(
    samples: Vec<f64>,
    sample_rate_hz: u32,
    n_fft: usize,
    hop: usize,
    n_mels: usize,
    f_min_hz: f64,
    f_max_hz: Option<f64>,
    floor: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let spec = sp::stft(&clip(samples, sample_rate_hz)?, n_fft, hop, Window::Hann).map_err(py_err)?;
    let fmax = f_max_hz.unwrap_or(sample_rate_hz as f64 / 2.0);
    let fb = sp::mel_filterbank(n_mels, n_fft, sample_rate_hz, f_min_hz, fmax).map_err(py_err)?;
    Ok(rows(&sp::log_mel(&spec, &fb, floor).map_err(py_err)?.values))
}

/// Harmonic and percussive magnitude spectrograms, each `[bin][frame]`.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate_hz, n_fft=512, hop=128, h_kernel=31, p_kernel=31, power=2.0))]
fn hpss(
    samples: Vec<f64>,
    sample_rate_hz: u32,
    n_fft: usize,
    hop: usize,
    h_kernel: usize,
    p_kernel: usize,
    power: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let spec = sp::stft(&clip(samples, sample_rate_hz)?, n_fft, hop, Window::Hann).map_err(py_err)?;
    let (h, p) = sp::hpss(&spec, h_kernel, p_kernel, power).map_err(py_err)?;
    Ok((rows(&h.values), rows(&p.values)))
}

/// Scalar metrics of a confusion matrix, PD positive.
#[pyfunction]
fn confusion_metrics(tp: u64, tn: u64, fp: u64, fn_count: u64) -> PyResult<BTreeMap<String, f64>> {
    let m = scalar_metrics(&ConfusionMatrix { tp, tn, fp, fn_: fn_count }).map_err(py_err)?;
    Ok(BTreeMap::from([
        ("accuracy".to_string(), m.accuracy),
        ("precision".to_string(), m.precision),
        ("recall".to_string(), m.recall),
        ("specificity".to_string(), m.specificity),
        ("f1".to_string(), m.f1),
        ("fpr".to_string(), m.fpr),
    ]))
}

/// Trapezoidal ROC AUC with `positive` ("PD" or "HC") as the positive class.
#[pyfunction]
#[pyo3(signature = (scores, labels, positive="PD"))]
fn roc_auc(scores: Vec<f64>, labels: Vec<String>, positive: &str) -> PyResult<f64> {
    let truths = labels.iter().map(|l| label(l)).collect::<PyResult<Vec<_>>>()?;
    auc(&roc_curve(&scores, &truths, label(positive)?).map_err(py_err)?).map_err(py_err)
}

/// A pipeline run configuration.
#[pyclass(name = "RunConfig", module = "custnetgc_py", skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    fn new() -> Self {
        PyRunConfig {
            inner: RunConfig::default(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyRunConfig {
            inner: RunConfig::from_toml(text).map_err(py_err)?,
        })
    }

    /// Reads a config file, resolving paths against its directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyRunConfig {
            inner: RunConfig::load(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    fn with_seed(&self, seed: u64) -> Self {
        PyRunConfig {
            inner: self.inner.clone().with_seed(seed),
        }
    }

    fn config_hash(&self) -> PyResult<String> {
        self.inner.config_hash().map_err(py_err)
    }

    #[getter]
    fn out_dir(&self) -> PathBuf {
        self.inner.out_dir.clone()
    }

    #[setter]
    fn set_out_dir(&mut self, dir: PathBuf) {
        self.inner.out_dir = dir;
    }

    #[getter]
    fn manifest(&self) -> PathBuf {
        self.inner.manifest.clone()
    }

    #[setter]
    fn set_manifest(&mut self, path: PathBuf) {
        self.inner.manifest = path;
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(out_dir={:?})", self.inner.out_dir)
    }
}

/// Runs one stage by name ("preprocess", "featurize", "train", "explain",
/// "evaluate") and returns the ids of inputs that failed.
#[pyfunction]
#[pyo3(signature = (config, stage, force=false))]
fn run_stage(py: Python<'_>, config: &PyRunConfig, stage: &str, force: bool) -> PyResult<Vec<String>> {
    let cfg = config.inner.clone();
    let failed = |o: pipeline::StageOutcome| o.failures.into_iter().map(|f| f.id).collect::<Vec<_>>();
    let stage = stage.to_string();
    py.detach(move || -> custnetgc::Result<Vec<String>> {
        match stage.as_str() {
            "preprocess" => Ok(failed(pipeline::cmd_preprocess(&cfg, force)?)),
            "featurize" => Ok(failed(pipeline::cmd_featurize(&cfg, force)?)),
            "train" => pipeline::cmd_train(&cfg, force).map(|_| Vec::new()),
            "explain" => pipeline::cmd_explain(&cfg, &[], force).map(|_| Vec::new()),
            "evaluate" => pipeline::cmd_evaluate(&cfg, force).map(|_| Vec::new()),
            other => Err(Error::InvalidArgument(format!("unknown stage `{other}`"))),
        }
    })
    .map_err(py_err)
}

/// Runs every stage and returns the metrics as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, force=false))]
fn run_all(py: Python<'_>, config: &PyRunConfig, force: bool) -> PyResult<String> {
    let cfg = config.inner.clone();
    py.detach(move || pipeline::run_all(&cfg, force)?.metrics_json())
        .map_err(py_err)
}

/// A trained CNN loaded from a checkpoint file.
#[pyclass(name = "Network", module = "custnetgc_py")]
struct PyNetwork {
    inner: Network,
    alpha: AlphaMode,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: Checkpoint::load(&path).map_err(py_err)?.network,
            alpha: AlphaMode::default(),
        })
    }

    #[getter]
    fn input_shape(&self) -> Vec<usize> {
        self.inner.input_shape.clone()
    }

    fn parameter_count(&self) -> usize {
        self.inner.param_count()
    }

    /// Class probabilities `[HC, PD]` for a PNG feature image.
    fn predict(&self, py: Python<'_>, image_path: PathBuf) -> PyResult<Vec<f64>> {
        py.detach(|| {
            let img = read_png(&image_path)?;
            let x = self.inner.batch_of_one(&image_to_input(&img, &self.inner.input_shape, self.alpha)?)?;
            Ok(self.inner.predict_proba(&x)?.data)
        })
        .map_err(py_err)
    }

    /// Grad-CAM map `[row][col]` of `class_name` for a PNG feature image.
    fn gradcam(&self, py: Python<'_>, image_path: PathBuf, class_name: &str) -> PyResult<Vec<Vec<f64>>> {
        let class = label(class_name)?
            .index()
            .ok_or_else(|| PyValueError::new_err("class must be PD or HC"))?;
        py.detach(|| {
            let img = read_png(&image_path)?;
            custnetgc::gradcam::explain(&self.inner, &img, class, self.alpha)
        })
        .map(|m| rows(&m.values))
        .map_err(py_err)
    }

    /// Pooled CNN features followed by the class probabilities.
    fn embedding(&self, image_path: PathBuf) -> PyResult<Vec<f64>> {
        let img = read_png(&image_path).map_err(py_err)?;
        let rows = extract_embeddings(&self.inner, &[(img, Label::Unknown, String::new())], self.alpha).map_err(py_err)?;
        Ok(rows.into_iter().next().map(|r| r.features).unwrap_or_default())
    }
}

/// A boosted-tree model loaded from `boost.json`.
#[pyclass(name = "BoostModel", module = "custnetgc_py")]
struct PyBoostModel {
    inner: GbdtModel,
}

#[pymethods]
impl PyBoostModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyBoostModel {
            inner: GbdtModel::load(&path).map_err(py_err)?,
        })
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }

    /// Probability of PD for one embedding.
    fn predict_proba(&self, features: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_proba(&features).map_err(py_err)
    }
}

/// Writes a seeded synthetic two-class dataset and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, n_clips=200, seed=0))]
fn write_synthetic_dataset(out_dir: PathBuf, n_clips: usize, seed: u64) -> PyResult<PathBuf> {
    let cfg = custnetgc::synth::SynthConfig {
        n_clips,
        seed,
        ..Default::default()
    };
    custnetgc::synth::write_dataset(&out_dir, &cfg).map_err(py_err)
}

#[pymodule]
fn custnetgc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(preprocess_audio, m)?)?;
    m.add_function(wrap_pyfunction!(hz_to_mel, m)?)?;
    m.add_function(wrap_pyfunction!(mel_to_hz, m)?)?;
    m.add_function(wrap_pyfunction!(stft_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(log_mel, m)?)?;
    m.add_function(wrap_pyfunction!(hpss, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(run_stage, m)?)?;
    m.add_function(wrap_pyfunction!(run_all, m)?)?;
    m.add_function(wrap_pyfunction!(write_synthetic_dataset, m)?)?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyBoostModel>()?;
    Ok(())
}
