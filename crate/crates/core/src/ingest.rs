//! Audio ingestion: WAV decoding, the dataset manifest, and duration /
//! sample-rate normalization of every clip.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// A labeled mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub label: Label,
}

impl AudioClip {
    pub fn new(id: impl Into<String>, samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(AudioClip {
            id: id.into(),
            samples,
            sample_rate_hz,
            label: Label::Unknown,
        })
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    fn with_samples(&self, samples: Vec<f64>) -> AudioClip {
        AudioClip {
            id: self.id.clone(),
            samples,
            sample_rate_hz: self.sample_rate_hz,
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub label: Label,
    pub age: u32,
    pub sex: Sex,
    pub path: PathBuf,
}

#[derive(Debug, Deserialize, Serialize)]
struct ManifestRow {
    sample_id: String,
    label: String,
    age: u32,
    sex: Sex,
    path: String,
}

/// Reads a `sample_id,label,age,sex,path` CSV. Relative paths resolve
/// against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (line, row) in reader.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let label: Label = row.label.parse()?;
        if !seen.insert(row.sample_id.clone()) {
            return Err(Error::Manifest(format!(
                "{}: duplicate sample_id `{}` on row {}",
                path.display(),
                row.sample_id,
                line + 2
            )));
        }
        let p = PathBuf::from(&row.path);
        entries.push(ManifestEntry {
            sample_id: row.sample_id,
            label,
            age: row.age,
            sex: row.sex,
            path: if p.is_absolute() { p } else { base.join(p) },
        });
    }
    Ok(entries)
}

/// Writes a manifest; paths are written as given.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    for e in entries {
        writer
            .serialize(ManifestRow {
                sample_id: e.sample_id.clone(),
                label: e.label.as_str().to_string(),
                age: e.age,
                sex: e.sex,
                path: e.path.to_string_lossy().into_owned(),
            })
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Decodes a PCM (8/16/24/32-bit) or IEEE float WAV into a mono clip.
///
/// Integer samples are scaled by `1 / 2^(bits-1)`, so int16 full scale
/// 32767 maps to 32767/32768. Channels are averaged.
pub fn load_audio(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            msg: "unsupported WAV variant".into(),
        },
        other => Error::UnreadableAudio {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            msg: format!("{channels} channels"),
        });
    }
    let bad = |e: hound::Error| Error::UnreadableAudio {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(bad)?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<Result<_, _>>()
                .map_err(bad)?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.to_path_buf(),
                msg: format!("{fmt:?} {bits}-bit"),
            })
        }
    };
    if interleaved.len() < channels {
        return Err(Error::EmptyAudio {
            path: path.to_path_buf(),
        });
    }
    let samples = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioClip::new(id, samples, spec.sample_rate)
}

/// Writes a clip as 16-bit PCM mono. Samples are clamped to the int16 range.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnreadableAudio {
            path: path.to_path_buf(),
            msg: other.to_string(),
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &clip.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleKernel {
    /// Blackman-windowed sinc, band-limited to the lower of the two Nyquist rates.
    Sinc,
    /// Linear interpolation; fast, no anti-aliasing.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub target_duration_s: f64,
    pub target_sample_rate_hz: u32,
    pub peak_level: f64,
    pub kernel: ResampleKernel,
    /// Stretch each clip to the target duration by changing playback speed
    /// before resampling. Shifts pitch; off by default.
    pub tempo_adjust: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_duration_s: 3.0,
            target_sample_rate_hz: 8000,
            peak_level: 0.99,
            kernel: ResampleKernel::Sinc,
            tempo_adjust: false,
        }
    }
}

impl PreprocessConfig {
    /// Rate presets: 8000 Hz is derived from the recordings themselves,
    /// 1000 Hz and 256 Hz are alternative target rates.
    pub const RATE_PRESETS: [u32; 3] = [8000, 1000, 256];

    pub fn validate(&self) -> Result<()> {
        if !(self.target_duration_s > 0.0) || !self.target_duration_s.is_finite() {
            return Err(Error::Config("target_duration_s must be positive".into()));
        }
        if self.target_sample_rate_hz == 0 {
            return Err(Error::Config("target_sample_rate_hz must be positive".into()));
        }
        if !(self.peak_level > 0.0 && self.peak_level <= 1.0) {
            return Err(Error::Config("peak_level must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn target_len(&self) -> usize {
        (self.target_duration_s * self.target_sample_rate_hz as f64).round() as usize
    }
}

/// Ratio of target to current duration.
pub fn speed_ratio(target_duration_s: f64, current_duration_s: f64) -> Result<f64> {
    if !(target_duration_s > 0.0 && current_duration_s > 0.0) {
        return Err(Error::invalid(format!(
            "durations must be positive (target {target_duration_s}, current {current_duration_s})"
        )));
    }
    Ok(target_duration_s / current_duration_s)
}

/// Changes playback speed so the clip lasts `target_duration_s` at its
/// current sample rate. Pitch shifts by the inverse of the speed ratio.
pub fn tempo_adjust(clip: &AudioClip, target_duration_s: f64, kernel: ResampleKernel) -> Result<AudioClip> {
    let ratio = speed_ratio(target_duration_s, clip.duration_s())?;
    let n_out = (clip.len() as f64 * ratio).round() as usize;
    Ok(clip.with_samples(interpolate(&clip.samples, ratio, n_out, kernel)))
}

/// Keeps the first `target_len` samples.
pub fn truncate(clip: &AudioClip, target_len: usize) -> Result<AudioClip> {
    if target_len > clip.len() {
        return Err(Error::invalid(format!(
            "cannot truncate {} samples to {target_len}; pad instead",
            clip.len()
        )));
    }
    Ok(clip.with_samples(clip.samples[..target_len].to_vec()))
}

/// Appends `target_len - len` zeros.
pub fn pad(clip: &AudioClip, target_len: usize) -> Result<AudioClip> {
    if target_len < clip.len() {
        return Err(Error::invalid(format!(
            "cannot pad {} samples to {target_len}; truncate instead",
            clip.len()
        )));
    }
    let mut samples = Vec::with_capacity(target_len);
    samples.extend_from_slice(&clip.samples);
    samples.resize(target_len, 0.0);
    Ok(clip.with_samples(samples))
}

/// Pads or truncates to exactly `target_len`.
pub fn fit_length(clip: &AudioClip, target_len: usize) -> Result<AudioClip> {
    if clip.len() >= target_len {
        truncate(clip, target_len)
    } else {
        pad(clip, target_len)
    }
}

/// Resamples with the windowed-sinc kernel.
pub fn resample(clip: &AudioClip, target_sr_hz: u32) -> Result<AudioClip> {
    resample_with(clip, target_sr_hz, ResampleKernel::Sinc)
}

/// Output length is `round(len * target / source)`. Resampling to the
/// clip's own rate returns the samples untouched.
pub fn resample_with(clip: &AudioClip, target_sr_hz: u32, kernel: ResampleKernel) -> Result<AudioClip> {
    if target_sr_hz == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    if target_sr_hz == clip.sample_rate_hz {
        return Ok(clip.clone());
    }
    let src = clip.sample_rate_hz as u128;
    let dst = target_sr_hz as u128;
    let n_out = ((clip.len() as u128 * dst + src / 2) / src) as usize;
    let ratio = target_sr_hz as f64 / clip.sample_rate_hz as f64;
    Ok(AudioClip {
        id: clip.id.clone(),
        samples: interpolate(&clip.samples, ratio, n_out, kernel),
        sample_rate_hz: target_sr_hz,
        label: clip.label,
    })
}

const SINC_ZERO_CROSSINGS: f64 = 32.0;

/// Evaluates the band-limited signal at positions `m / ratio` (in input
/// samples) for `m in 0..n_out`.
fn interpolate(x: &[f64], ratio: f64, n_out: usize, kernel: ResampleKernel) -> Vec<f64> {
    if x.is_empty() {
        return vec![0.0; n_out];
    }
    let step = 1.0 / ratio;
    match kernel {
        ResampleKernel::Linear => (0..n_out)
            .map(|m| {
                let u = m as f64 * step;
                let i = u.floor() as usize;
                if i + 1 >= x.len() {
                    return x[x.len() - 1];
                }
                let frac = u - i as f64;
                x[i] * (1.0 - frac) + x[i + 1] * frac
            })
            .collect(),
        ResampleKernel::Sinc => {
            let cutoff = ratio.min(1.0);
            let half_width = SINC_ZERO_CROSSINGS / cutoff;
            (0..n_out)
                .map(|m| {
                    let u = m as f64 * step;
                    let lo = (u - half_width).ceil().max(0.0) as usize;
                    let hi = ((u + half_width).floor() as usize).min(x.len() - 1);
                    let mut acc = 0.0;
                    for (k, &xk) in x.iter().enumerate().take(hi + 1).skip(lo) {
                        let d = u - k as f64;
                        acc += xk * cutoff * sinc(cutoff * d) * blackman(d / half_width);
                    }
                    acc
                })
                .collect()
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Blackman window on `t` in [-1, 1], zero outside.
fn blackman(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let phase = PI * (t + 1.0);
    0.42 - 0.5 * phase.cos() + 0.08 * (2.0 * phase).cos()
}

/// Scales the clip by one constant so that `max |x| == peak_level`.
///
/// An all-zero clip yields [`Error::SilentClip`]; the input is untouched.
pub fn normalize_peak(clip: &AudioClip, peak_level: f64) -> Result<AudioClip> {
    if !(peak_level > 0.0 && peak_level <= 1.0) {
        return Err(Error::invalid(format!("peak level {peak_level} outside (0, 1]")));
    }
    let peak = clip.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return Err(Error::SilentClip(clip.id.clone()));
    }
    let gain = peak_level / peak;
    Ok(clip.with_samples(clip.samples.iter().map(|s| s * gain).collect()))
}

/// resample, then pad or truncate, then peak-normalize.
pub fn preprocess(clip: &AudioClip, cfg: &PreprocessConfig) -> Result<AudioClip> {
    cfg.validate()?;
    let staged;
    let clip = if cfg.tempo_adjust && !clip.is_empty() {
        staged = tempo_adjust(clip, cfg.target_duration_s, cfg.kernel)?;
        &staged
    } else {
        clip
    };
    let resampled = resample_with(clip, cfg.target_sample_rate_hz, cfg.kernel)?;
    let fitted = fit_length(&resampled, cfg.target_len())?;
    match normalize_peak(&fitted, cfg.peak_level) {
        Ok(c) => Ok(c),
        Err(Error::SilentClip(id)) => {
            log::warn!("clip `{id}` is silent; left unnormalized");
            Ok(fitted)
        }
        Err(e) => Err(e),
    }
}
