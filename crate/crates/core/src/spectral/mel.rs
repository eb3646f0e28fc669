use serde::{Deserialize, Serialize};

use super::stft::ComplexSpectrogram;
use super::{Spectrogram, SpectrogramKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// O'Shaughnessy mel scale: `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(f_hz: f64) -> Result<f64> {
    if !(f_hz >= 0.0) {
        return Err(Error::invalid(format!("negative frequency {f_hz}")));
    }
    Ok(2595.0 * (1.0 + f_hz / 700.0).log10())
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with mel-equispaced centers, each row scaled so its
/// largest weight is exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterbank {
    pub weights: Matrix,
    pub n_mels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_fft: usize,
    pub sample_rate_hz: u32,
    /// Peak frequency of each filter.
    pub center_hz: Vec<f64>,
}

pub fn mel_filterbank(n_mels: usize, n_fft: usize, sr_hz: u32, f_min_hz: f64, f_max_hz: f64) -> Result<MelFilterbank> {
    if n_mels < 2 {
        return Err(Error::invalid("n_mels must be at least 2"));
    }
    let nyquist = sr_hz as f64 / 2.0;
    if !(f_min_hz >= 0.0 && f_min_hz < f_max_hz && f_max_hz <= nyquist) {
        return Err(Error::invalid(format!(
            "band edges must satisfy 0 <= {f_min_hz} < {f_max_hz} <= {nyquist}"
        )));
    }
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(f_min_hz)?;
    let mel_hi = hz_to_mel(f_max_hz)?;
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * sr_hz as f64 / n_fft as f64;

    let mut weights = Matrix::zeros(n_mels, n_bins);
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = bin_hz(k);
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            weights.set(m, k, rising.min(falling).max(0.0));
        }
        let peak = weights.row(m).iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            for k in 0..n_bins {
                let v = weights.get(m, k) / peak;
                weights.set(m, k, v);
            }
        } else {
            log::warn!("mel filter {m} ({center:.1} Hz) covers no FFT bin; increase n_fft or lower n_mels");
        }
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        f_min_hz,
        f_max_hz,
        n_fft,
        sample_rate_hz: sr_hz,
        center_hz: edges[1..=n_mels].to_vec(),
    })
}

/// Mel-weighted STFT magnitudes, natural log, clamped below at `floor`.
pub fn log_mel(spec: &ComplexSpectrogram, fb: &MelFilterbank, floor: f64) -> Result<Spectrogram> {
    if fb.weights.cols != spec.n_bins || fb.n_fft != spec.n_fft || fb.sample_rate_hz != spec.sample_rate_hz {
        return Err(Error::Shape(format!(
            "filterbank built for n_fft {} @ {} Hz, spectrogram has n_fft {} @ {} Hz",
            fb.n_fft, fb.sample_rate_hz, spec.n_fft, spec.sample_rate_hz
        )));
    }
    if !(floor > 0.0) {
        return Err(Error::invalid("log floor must be positive"));
    }
    let mut values = Matrix::zeros(fb.n_mels, spec.n_frames);
    for m in 0..fb.n_mels {
        let w = fb.weights.row(m);
        for t in 0..spec.n_frames {
            let energy: f64 = w
                .iter()
                .enumerate()
                .filter(|(_, &wk)| wk > 0.0)
                .map(|(k, &wk)| wk * spec.magnitude(k, t))
                .sum();
            values.set(m, t, energy.max(floor).ln());
        }
    }
    Ok(Spectrogram {
        values,
        kind: SpectrogramKind::LogMel,
        row_frequencies: fb.center_hz.iter().map(|&f| hz_to_mel(f).unwrap_or(0.0)).collect(),
        frame_times_s: spec.frame_times_s(),
        component: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AudioClip;
    use crate::spectral::stft::{stft, Window};
    use std::f64::consts::PI;

    /// Inverse mel by bisection, independent of `mel_to_hz`.
    fn invert_mel(target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hz_to_mel(mid).unwrap() < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn mel_reference_points() {
        assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
        assert!((hz_to_mel(700.0).unwrap() - 781.172_838_748).abs() < 1e-5);
        assert!((hz_to_mel(1000.0).unwrap() - 999.985_537_140).abs() < 1e-5);
        assert!(hz_to_mel(-1.0).is_err());
        for f in [0.0, 55.0, 700.0, 4000.0, 19999.0] {
            assert!((mel_to_hz(hz_to_mel(f).unwrap()) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn two_filter_bank_peak_location() {
        let fb = mel_filterbank(2, 512, 8000, 0.0, 4000.0).unwrap();
        let expected = invert_mel(hz_to_mel(4000.0).unwrap() / 3.0);
        assert!((fb.center_hz[0] - expected).abs() < 1e-6);
    }

    #[test]
    fn filters_are_unit_peak_unimodal_and_cover_the_band() {
        let fb = mel_filterbank(64, 512, 8000, 0.0, 4000.0).unwrap();
        for m in 0..fb.n_mels {
            let row = fb.weights.row(m);
            assert!(row.iter().all(|&w| w >= 0.0));
            let peak = row.iter().cloned().fold(0.0, f64::max);
            assert_eq!(peak, 1.0);
            let argmax = row.iter().position(|&w| w == peak).unwrap();
            assert!(row[..=argmax].windows(2).all(|p| p[0] <= p[1]));
            assert!(row[argmax..].windows(2).all(|p| p[0] >= p[1]));
        }
        for k in 1..fb.weights.cols - 1 {
            let col: f64 = (0..fb.n_mels).map(|m| fb.weights.get(m, k)).sum();
            assert!(col > 0.0, "bin {k} uncovered");
        }
    }

    #[test]
    fn adjacent_supports_overlap_between_centers() {
        let fb = mel_filterbank(8, 1024, 8000, 0.0, 4000.0).unwrap();
        for m in 0..fb.n_mels - 1 {
            for k in 0..fb.weights.cols {
                let f = k as f64 * 8000.0 / 1024.0;
                let a = fb.weights.get(m, k);
                let b = fb.weights.get(m + 1, k);
                let between = f > fb.center_hz[m] && f < fb.center_hz[m + 1];
                assert_eq!(a > 0.0 && b > 0.0, between, "filters {m},{} at {f} Hz", m + 1);
            }
        }
    }

    #[test]
    fn bad_band_edges() {
        assert!(mel_filterbank(1, 512, 8000, 0.0, 4000.0).is_err());
        assert!(mel_filterbank(8, 512, 8000, 100.0, 100.0).is_err());
        assert!(mel_filterbank(8, 512, 8000, 0.0, 4001.0).is_err());
    }

    fn tone(freq: f64, n: usize) -> AudioClip {
        let x = (0..n).map(|i| (2.0 * PI * freq * i as f64 / 8000.0).sin()).collect();
        AudioClip::new("tone", x, 8000).unwrap()
    }

    #[test]
    fn zero_input_hits_floor_and_scaling_shifts_by_log() {
        let fb = mel_filterbank(32, 256, 8000, 0.0, 4000.0).unwrap();
        let silent = AudioClip::new("z", vec![0.0; 2048], 8000).unwrap();
        let s = stft(&silent, 256, 128, Window::Hann).unwrap();
        let lm = log_mel(&s, &fb, 1e-10).unwrap();
        assert!(lm.values.data.iter().all(|&v| v == 1e-10f64.ln()));

        let a = tone(600.0, 4096);
        let mut b = a.clone();
        b.samples.iter_mut().for_each(|v| *v *= 2.0);
        let la = log_mel(&stft(&a, 256, 128, Window::Hann).unwrap(), &fb, 1e-30).unwrap();
        let lb = log_mel(&stft(&b, 256, 128, Window::Hann).unwrap(), &fb, 1e-30).unwrap();
        for (x, y) in la.values.data.iter().zip(&lb.values.data) {
            assert!((y - x - 2f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn single_tone_lands_in_its_mel_row() {
        let fb = mel_filterbank(40, 512, 8000, 0.0, 4000.0).unwrap();
        let spec = stft(&tone(1000.0, 8000), 512, 128, Window::Hann).unwrap();
        let lm = log_mel(&spec, &fb, 1e-10).unwrap();
        let mel = hz_to_mel(1000.0).unwrap();
        let nearest = fb
            .center_hz
            .iter()
            .map(|&c| (hz_to_mel(c).unwrap() - mel).abs())
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        for t in 0..lm.values.cols {
            let argmax = (0..lm.values.rows)
                .max_by(|&a, &b| lm.values.get(a, t).total_cmp(&lm.values.get(b, t)))
                .unwrap();
            assert!(argmax.abs_diff(nearest) <= 1, "frame {t}: {argmax} vs {nearest}");
        }
    }

    #[test]
    fn mismatched_filterbank() {
        let fb = mel_filterbank(8, 256, 8000, 0.0, 4000.0).unwrap();
        let s = stft(&tone(440.0, 2048), 512, 128, Window::Hann).unwrap();
        assert!(matches!(log_mel(&s, &fb, 1e-10), Err(Error::Shape(_))));
    }
}
