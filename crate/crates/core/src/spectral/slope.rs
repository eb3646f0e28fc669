use serde::{Deserialize, Serialize};

use super::stft::ComplexSpectrogram;
use crate::error::{Error, Result};

/// Per-frame spectral slope and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSeries {
    /// Log-magnitude units per Hz.
    pub slopes: Vec<f64>,
    pub energies: Vec<f64>,
    pub frame_times_s: Vec<f64>,
}

impl SlopeSeries {
    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_times_s.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeBand {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub floor: f64,
}

impl Default for SlopeBand {
    fn default() -> Self {
        SlopeBand {
            f_min_hz: 0.0,
            f_max_hz: f64::INFINITY,
            floor: 1e-10,
        }
    }
}

/// For each frame: the least-squares slope of `log(|X| + floor)` against
/// bin frequency over the band, and the total squared magnitude.
pub fn spectral_slopes(spec: &ComplexSpectrogram, band: SlopeBand) -> Result<SlopeSeries> {
    if spec.n_frames == 0 {
        return Err(Error::invalid("empty spectrogram"));
    }
    let freqs = spec.bin_frequencies_hz();
    let in_band: Vec<usize> = (0..spec.n_bins)
        .filter(|&k| freqs[k] >= band.f_min_hz && freqs[k] <= band.f_max_hz)
        .collect();
    if in_band.len() < 2 {
        return Err(Error::invalid(format!(
            "{} bins in [{}, {}] Hz; slope needs at least 2",
            in_band.len(),
            band.f_min_hz,
            band.f_max_hz
        )));
    }
    let n = in_band.len() as f64;
    let f_mean = in_band.iter().map(|&k| freqs[k]).sum::<f64>() / n;
    let sxx: f64 = in_band.iter().map(|&k| (freqs[k] - f_mean).powi(2)).sum();

    let mut slopes = Vec::with_capacity(spec.n_frames);
    let mut energies = Vec::with_capacity(spec.n_frames);
    for t in 0..spec.n_frames {
        let logs: Vec<f64> = in_band
            .iter()
            .map(|&k| (spec.magnitude(k, t) + band.floor).ln())
            .collect();
        let y_mean = logs.iter().sum::<f64>() / n;
        let sxy: f64 = in_band
            .iter()
            .zip(&logs)
            .map(|(&k, &y)| (freqs[k] - f_mean) * (y - y_mean))
            .sum();
        slopes.push(sxy / sxx);
        energies.push((0..spec.n_bins).map(|k| spec.get(k, t).norm_sqr()).sum());
    }
    Ok(SlopeSeries {
        slopes,
        energies,
        frame_times_s: spec.frame_times_s(),
    })
}
