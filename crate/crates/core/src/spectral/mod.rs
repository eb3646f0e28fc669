//! Time-frequency features: STFT, log-Mel, harmonic/percussive separation,
//! per-frame spectral slopes, and the images fed to the network.

pub mod hpss;
pub mod image;
pub mod mel;
pub mod slope;
pub mod stft;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub use hpss::{compress_component, hpss};
pub use image::{colormap, render_slope_plot, stack_lmhp, FeatureImage, PlotAxes, Provenance};
pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_to_hz, MelFilterbank};
pub use slope::{spectral_slopes, SlopeBand, SlopeSeries};
pub use stft::{stft, ComplexSpectrogram, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrogramKind {
    Magnitude,
    LogMel,
    Harmonic,
    Percussive,
}

/// Which part of an HPSS split a magnitude spectrogram came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    Harmonic,
    Percussive,
}

/// Real time-frequency matrix, `[rows x frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Matrix,
    pub kind: SpectrogramKind,
    /// Hz for magnitude rows, mel for log-Mel rows.
    pub row_frequencies: Vec<f64>,
    pub frame_times_s: Vec<f64>,
    pub component: Option<Component>,
}

impl Spectrogram {
    pub fn magnitude(spec: &ComplexSpectrogram) -> Spectrogram {
        Spectrogram {
            values: Matrix::from_fn(spec.n_bins, spec.n_frames, |k, t| spec.magnitude(k, t)),
            kind: SpectrogramKind::Magnitude,
            row_frequencies: spec.bin_frequencies_hz(),
            frame_times_s: spec.frame_times_s(),
            component: None,
        }
    }
}
