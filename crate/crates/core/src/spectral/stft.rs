use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Hann,
    Hamming,
    Rect,
}

impl Window {
    /// Periodic window of length `n` (the DFT-even form).
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / n as f64;
                match self {
                    Window::Hann => 0.5 - 0.5 * phase.cos(),
                    Window::Hamming => 0.54 - 0.46 * phase.cos(),
                    Window::Rect => 1.0,
                }
            })
            .collect()
    }
}

/// Complex STFT stored bin-major: `bins[k * n_frames + t]`.
///
/// Frames are not centered or padded: frame `t` covers samples
/// `[t * hop, t * hop + n_fft)`, so `n_frames = (len - n_fft) / hop + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub bins: Vec<Complex64>,
    pub n_bins: usize,
    pub n_frames: usize,
    pub sample_rate_hz: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
}

impl ComplexSpectrogram {
    /// Builds a spectrogram from bin-major values, checking the bin count
    /// against `n_fft`.
    pub fn from_parts(
        bins: Vec<Complex64>,
        n_frames: usize,
        sample_rate_hz: u32,
        n_fft: usize,
        hop: usize,
        window: Window,
    ) -> Result<Self> {
        let n_bins = n_fft / 2 + 1;
        if bins.len() != n_bins * n_frames {
            return Err(Error::Shape(format!(
                "{} values for {n_bins} bins x {n_frames} frames",
                bins.len()
            )));
        }
        Ok(ComplexSpectrogram {
            bins,
            n_bins,
            n_frames,
            sample_rate_hz,
            n_fft,
            hop,
            window,
        })
    }

    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.bins[bin * self.n_frames + frame]
    }

    pub fn magnitude(&self, bin: usize, frame: usize) -> f64 {
        self.get(bin, frame).norm()
    }

    pub fn bin_frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate_hz as f64 / self.n_fft as f64
    }

    pub fn bin_frequencies_hz(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.bin_frequency_hz(k)).collect()
    }

    pub fn frame_times_s(&self) -> Vec<f64> {
        (0..self.n_frames)
            .map(|t| (t * self.hop) as f64 / self.sample_rate_hz as f64)
            .collect()
    }
}

pub fn stft(clip: &AudioClip, n_fft: usize, hop: usize, window: Window) -> Result<ComplexSpectrogram> {
    if n_fft < 16 || !n_fft.is_power_of_two() {
        return Err(Error::invalid(format!("n_fft {n_fft} must be a power of two >= 16")));
    }
    if hop == 0 || hop > n_fft {
        return Err(Error::invalid(format!("hop {hop} must lie in 1..={n_fft}")));
    }
    let x = &clip.samples;
    if x.len() < n_fft {
        return Err(Error::invalid(format!(
            "clip `{}` has {} samples, shorter than one {n_fft}-sample frame",
            clip.id,
            x.len()
        )));
    }
    let n_frames = (x.len() - n_fft) / hop + 1;
    let n_bins = n_fft / 2 + 1;
    let win = window.coefficients(n_fft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut bins = vec![Complex64::new(0.0, 0.0); n_bins * n_frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = t * hop;
        for (b, (s, w)) in buf.iter_mut().zip(x[start..start + n_fft].iter().zip(&win)) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..n_bins {
            bins[k * n_frames + t] = buf[k];
        }
    }
    ComplexSpectrogram::from_parts(bins, n_frames, clip.sample_rate_hz, n_fft, hop, window)
}
