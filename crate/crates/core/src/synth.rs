//! Seeded synthetic voice dataset for end-to-end checks.
//!
//! HC clips are a steady harmonic vowel-like tone with a constant envelope.
//! PD clips carry the same kind of tone with a low-amplitude stretch in the
//! middle of the utterance and a 4-7 Hz amplitude tremor.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_manifest, write_wav, AudioClip, ManifestEntry, Sex};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Total clips; classes alternate so the split is balanced.
    pub n_clips: usize,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_clips: 200,
            duration_s: 3.0,
            sample_rate_hz: 8000,
            seed: 0,
        }
    }
}

/// Smooth 0 -> 1 ramp over `width` seconds starting at `t0`.
fn ramp(t: f64, t0: f64, width: f64) -> f64 {
    let x = ((t - t0) / width).clamp(0.0, 1.0);
    0.5 - 0.5 * (PI * x).cos()
}

fn voice(rng: &mut ChaCha8Rng, id: String, label: Label, cfg: &SynthConfig) -> AudioClip {
    let sr = cfg.sample_rate_hz as f64;
    let n = (cfg.duration_s * sr).round() as usize;
    let f0 = rng.random_range(100.0..220.0);
    let vibrato_hz = rng.random_range(4.5..6.0);
    let vibrato_depth = rng.random_range(0.002..0.006);
    let harmonics: Vec<(f64, f64)> = (1..=8)
        .map(|k| (k as f64, rng.random_range(0.6..1.0) / k as f64))
        .collect();
    let level = rng.random_range(0.5..0.9);
    let noise = rng.random_range(0.005..0.02);

    // PD-only modulation parameters.
    let dip_center = rng.random_range(0.45..0.55) * cfg.duration_s;
    let dip_width = rng.random_range(0.35..0.6);
    let dip_floor = rng.random_range(0.05..0.2);
    let tremor_hz = rng.random_range(4.0..7.0);
    let tremor_depth = rng.random_range(0.3..0.5);
    let tremor_phase = rng.random_range(0.0..2.0 * PI);

    let mut phase = 0.0;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let f = f0 * (1.0 + vibrato_depth * (2.0 * PI * vibrato_hz * t).sin());
            phase += 2.0 * PI * f / sr;
            let tone: f64 = harmonics.iter().map(|&(k, a)| a * (k * phase).sin()).sum();
            let fade = ramp(t, 0.0, 0.02) * (1.0 - ramp(t, cfg.duration_s - 0.02, 0.02));
            let mut env = level * fade;
            if label == Label::Pd {
                let d0 = dip_center - dip_width / 2.0;
                let into_dip = ramp(t, d0 - 0.1, 0.1) * (1.0 - ramp(t, d0 + dip_width, 0.1));
                env *= 1.0 - (1.0 - dip_floor) * into_dip;
                env *= 1.0 - tremor_depth * 0.5 * (1.0 + (2.0 * PI * tremor_hz * t + tremor_phase).sin());
            }
            env * tone / 2.0 + noise * rng.random_range(-1.0..1.0)
        })
        .collect();
    AudioClip {
        id,
        samples,
        sample_rate_hz: cfg.sample_rate_hz,
        label,
    }
}

/// Generates `n_clips` labeled clips, alternating PD and HC.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<AudioClip>> {
    if cfg.n_clips == 0 || !(cfg.duration_s > 0.0) || cfg.sample_rate_hz == 0 {
        return Err(Error::invalid("synthetic dataset needs clips, a duration and a sample rate"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.n_clips)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Pd } else { Label::Hc };
            voice(&mut rng, format!("syn_{i:04}"), label, cfg)
        })
        .collect())
}

/// Writes the clips as 16-bit WAVs plus `manifest.csv` into `dir` and
/// returns the manifest path.
pub fn write_dataset(dir: &Path, cfg: &SynthConfig) -> Result<PathBuf> {
    let clips = generate(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa9e);
    let mut entries = Vec::with_capacity(clips.len());
    for clip in &clips {
        let name = format!("{}.wav", clip.id);
        write_wav(&dir.join(&name), clip)?;
        entries.push(ManifestEntry {
            sample_id: clip.id.clone(),
            label: clip.label,
            age: rng.random_range(45..85),
            sex: if rng.random_bool(0.5) { Sex::M } else { Sex::F },
            path: PathBuf::from(name),
        });
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn classes_alternate_and_generation_is_seeded() {
        let cfg = SynthConfig {
            n_clips: 4,
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        assert_eq!(a[0].label, Label::Pd);
        assert_eq!(a[1].label, Label::Hc);
        assert_eq!(a[0].len(), 24000);
        assert!(a.iter().all(|c| c.samples.iter().all(|s| s.abs() < 1.0)));
    }

    #[test]
    fn pd_clips_dip_mid_utterance() {
        let clips = generate(&SynthConfig {
            n_clips: 2,
            ..SynthConfig::default()
        })
        .unwrap();
        let sr = 8000;
        // Quietest 0.2 s window in the middle second versus the opening.
        let mid = |c: &AudioClip| {
            (sr..2 * sr - sr / 5)
                .step_by(sr / 20)
                .map(|s| rms(&c.samples[s..s + sr / 5]))
                .fold(f64::INFINITY, f64::min)
        };
        let edge = |c: &AudioClip| rms(&c.samples[sr / 4..sr / 2]);
        assert!(mid(&clips[0]) < 0.5 * edge(&clips[0]));
        assert!(mid(&clips[1]) > 0.7 * edge(&clips[1]));
    }
}
