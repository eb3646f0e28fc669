use super::stft::ComplexSpectrogram;
use super::{Component, Spectrogram, SpectrogramKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Half-sample symmetric reflection of an out-of-range index.
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn median_of(buf: &mut [f64]) -> f64 {
    let mid = buf.len() / 2;
    let (_, m, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Running median along each row (time axis) with window `kernel`.
fn median_rows(m: &Matrix, kernel: usize) -> Matrix {
    let half = (kernel / 2) as isize;
    let mut buf = vec![0.0; kernel];
    let mut out = Matrix::zeros(m.rows, m.cols);
    for r in 0..m.rows {
        let row = m.row(r);
        for c in 0..m.cols {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = row[reflect(c as isize + j as isize - half, m.cols)];
            }
            out.set(r, c, median_of(&mut buf));
        }
    }
    out
}

/// Running median along each column (frequency axis).
fn median_cols(m: &Matrix, kernel: usize) -> Matrix {
    let half = (kernel / 2) as isize;
    let mut buf = vec![0.0; kernel];
    let mut out = Matrix::zeros(m.rows, m.cols);
    for c in 0..m.cols {
        for r in 0..m.rows {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = m.get(reflect(r as isize + j as isize - half, m.rows), c);
            }
            out.set(r, c, median_of(&mut buf));
        }
    }
    out
}

/// Soft harmonic mask `H^p / (H^p + P^p)`, 0.5 where both are zero.
pub fn harmonic_mask(h_med: f64, p_med: f64, power: f64) -> f64 {
    let h = h_med.powf(power);
    let p = p_med.powf(power);
    let denom = h + p;
    if denom == 0.0 {
        0.5
    } else {
        h / denom
    }
}

/// Median-filter harmonic/percussive separation of `|X|`.
///
/// Returns `(harmonic, percussive)` magnitude spectrograms whose sum is `|X|`.
pub fn hpss(spec: &ComplexSpectrogram, h_kernel: usize, p_kernel: usize, power: f64) -> Result<(Spectrogram, Spectrogram)> {
    for (name, k) in [("h_kernel", h_kernel), ("p_kernel", p_kernel)] {
        if k < 3 || k % 2 == 0 {
            return Err(Error::invalid(format!("{name} = {k} must be odd and >= 3")));
        }
    }
    if !(power >= 1.0) {
        return Err(Error::invalid(format!("mask power {power} must be >= 1")));
    }
    if spec.n_frames == 0 || spec.n_bins == 0 {
        return Err(Error::invalid("empty spectrogram"));
    }
    let mag = Matrix::from_fn(spec.n_bins, spec.n_frames, |k, t| spec.magnitude(k, t));
    let h_med = median_rows(&mag, h_kernel);
    let p_med = median_cols(&mag, p_kernel);

    let mut harmonic = Matrix::zeros(mag.rows, mag.cols);
    let mut percussive = Matrix::zeros(mag.rows, mag.cols);
    for i in 0..mag.data.len() {
        let mh = harmonic_mask(h_med.data[i], p_med.data[i], power);
        harmonic.data[i] = mh * mag.data[i];
        percussive.data[i] = (1.0 - mh) * mag.data[i];
    }
    let freqs = spec.bin_frequencies_hz();
    let times = spec.frame_times_s();
    let wrap = |values, component| Spectrogram {
        values,
        kind: SpectrogramKind::Magnitude,
        row_frequencies: freqs.clone(),
        frame_times_s: times.clone(),
        component: Some(component),
    };
    Ok((wrap(harmonic, Component::Harmonic), wrap(percussive, Component::Percussive)))
}

/// `log(1 + alpha * m)`, tagged Harmonic or Percussive after the input's origin.
pub fn compress_component(mag: &Spectrogram, alpha: f64) -> Result<Spectrogram> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha {alpha} must be positive")));
    }
    if mag.kind != SpectrogramKind::Magnitude {
        return Err(Error::invalid(format!("expected a magnitude spectrogram, got {:?}", mag.kind)));
    }
    let kind = match mag.component {
        Some(Component::Percussive) => SpectrogramKind::Percussive,
        _ => SpectrogramKind::Harmonic,
    };
    Ok(Spectrogram {
        values: mag.values.map(|m| (alpha * m).ln_1p()),
        kind,
        row_frequencies: mag.row_frequencies.clone(),
        frame_times_s: mag.frame_times_s.clone(),
        component: mag.component,
    })
}
