use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::slope::SlopeSeries;
use super::Spectrogram;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    SlopePlot,
    LmHP,
    Spectrogram,
}

/// `height x width x channels` raster in HWC order, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<f64>,
    pub provenance: Provenance,
}

impl FeatureImage {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if !(channels == 3 || channels == 4) {
            return Err(Error::Shape(format!("{channels} channels; expected 3 or 4")));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{} pixels for {height}x{width}x{channels}",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(FeatureImage {
            height,
            width,
            channels,
            pixels,
            provenance,
        })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.pixels[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn channel(&self, c: usize) -> Matrix {
        Matrix::from_fn(self.height, self.width, |y, x| self.get(y, x, c))
    }

    pub fn from_channels(channels: &[Matrix], provenance: Provenance) -> Result<Self> {
        let (h, w) = (channels[0].rows, channels[0].cols);
        let n = channels.len();
        let mut pixels = vec![0.0; h * w * n];
        for (c, m) in channels.iter().enumerate() {
            if (m.rows, m.cols) != (h, w) {
                return Err(Error::Shape("channel sizes differ".into()));
            }
            for (i, &v) in m.data.iter().enumerate() {
                pixels[i * n + c] = v;
            }
        }
        FeatureImage::new(h, w, n, pixels, provenance)
    }

    /// Bilinear resize of every channel; values stay within [0, 1].
    pub fn resize(&self, height: usize, width: usize) -> FeatureImage {
        if (height, width) == (self.height, self.width) {
            return self.clone();
        }
        let chans: Vec<Matrix> = (0..self.channels)
            .map(|c| self.channel(c).resize_bilinear(height, width).map(|v| v.clamp(0.0, 1.0)))
            .collect();
        FeatureImage::from_channels(&chans, self.provenance).expect("resize keeps channel shapes")
    }

    /// 8-bit quantized bytes, interleaved.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|&v| (v * 255.0).round() as u8).collect()
    }

    pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8], provenance: Provenance) -> Result<Self> {
        let pixels = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        FeatureImage::new(height, width, channels, pixels, provenance)
    }
}

/// Fixed plot ranges shared by every render of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotAxes {
    pub t_max_s: f64,
    pub energy_min: f64,
    pub energy_max: f64,
}

impl PlotAxes {
    /// Time span and energy range covering every series.
    pub fn covering<'a>(series: impl IntoIterator<Item = &'a SlopeSeries>) -> PlotAxes {
        let mut axes = PlotAxes {
            t_max_s: 0.0,
            energy_min: f64::INFINITY,
            energy_max: f64::NEG_INFINITY,
        };
        for s in series {
            axes.t_max_s = axes.t_max_s.max(s.duration_s());
            for &e in &s.energies {
                axes.energy_min = axes.energy_min.min(e);
                axes.energy_max = axes.energy_max.max(e);
            }
        }
        if !axes.energy_min.is_finite() {
            axes.energy_min = 0.0;
            axes.energy_max = 0.0;
        }
        axes
    }
}

/// Curve colour of slope plots (opaque).
pub const PLOT_INK: [f64; 3] = [31.0 / 255.0, 119.0 / 255.0, 180.0 / 255.0];

/// Energy envelope against time on a transparent black canvas.
///
/// Each column samples the envelope (linear interpolation between frames)
/// and is joined to the previous column by a vertical run, so the curve is
/// connected. Stroke thickness grows with the canvas height.
pub fn render_slope_plot(series: &SlopeSeries, width: usize, height: usize, axes: &PlotAxes) -> Result<FeatureImage> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("zero-sized canvas"));
    }
    if series.is_empty() {
        return Err(Error::invalid("empty slope series"));
    }
    let range = axes.energy_max - axes.energy_min;
    let row_of = |e: f64| -> usize {
        let norm = if range > 0.0 {
            ((e - axes.energy_min) / range).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (height - 1) - (norm * (height - 1) as f64).round() as usize
    };
    let envelope_at = |t: f64| -> f64 {
        let times = &series.frame_times_s;
        let e = &series.energies;
        match times.iter().position(|&ft| ft >= t) {
            None => *e.last().unwrap(),
            Some(0) => e[0],
            Some(i) => {
                let span = times[i] - times[i - 1];
                let f = if span > 0.0 { (t - times[i - 1]) / span } else { 1.0 };
                e[i - 1] * (1.0 - f) + e[i] * f
            }
        }
    };
    let half = height / 128;
    let mut img = FeatureImage::new(height, width, 4, vec![0.0; height * width * 4], Provenance::SlopePlot)?;
    let mut prev: Option<usize> = None;
    for x in 0..width {
        let t = if width > 1 {
            axes.t_max_s * x as f64 / (width - 1) as f64
        } else {
            0.0
        };
        let y = row_of(envelope_at(t));
        let (lo, hi) = match prev {
            Some(p) => (p.min(y), p.max(y)),
            None => (y, y),
        };
        let lo = lo.saturating_sub(half);
        let hi = (hi + half).min(height - 1);
        for row in lo..=hi {
            for (c, &v) in PLOT_INK.iter().enumerate() {
                img.set(row, x, c, v);
            }
            img.set(row, x, 3, 1.0);
        }
        prev = Some(y);
    }
    Ok(img)
}

/// Min-max normalizes into [0, 1]; `None` when the matrix is constant.
fn min_max_normalize(m: &Matrix) -> Option<Matrix> {
    let (lo, hi) = m.min_max();
    if !(hi > lo) {
        return None;
    }
    Some(m.map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)))
}

/// Flips rows so the highest frequency row ends up at the top of the image.
fn flip_rows(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows, m.cols, |r, c| m.get(m.rows - 1 - r, c))
}

/// Stacks log-Mel, harmonic and percussive spectrograms as the three
/// channels of one image. Each channel is resized to `size` and min-max
/// normalized on its own. Constant inputs become all-zero channels and are
/// listed in the returned warnings.
pub fn stack_lmhp(
    logmel: &Spectrogram,
    harmonic: &Spectrogram,
    percussive: &Spectrogram,
    size: (usize, usize),
) -> Result<(FeatureImage, Vec<String>)> {
    let (h, w) = size;
    if h == 0 || w == 0 {
        return Err(Error::invalid("zero-sized output"));
    }
    let mut warnings = Vec::new();
    let mut chans = Vec::with_capacity(3);
    for (name, s) in [("log-mel", logmel), ("harmonic", harmonic), ("percussive", percussive)] {
        if s.values.is_empty() {
            return Err(Error::invalid(format!("{name} spectrogram is empty")));
        }
        let resized = flip_rows(&s.values).resize_bilinear(h, w);
        match min_max_normalize(&resized) {
            Some(m) => chans.push(m),
            None => {
                log::warn!("{name} channel is constant; written as zeros");
                warnings.push(format!("{name} channel is constant"));
                chans.push(Matrix::zeros(h, w));
            }
        }
    }
    Ok((FeatureImage::from_channels(&chans, Provenance::LmHP)?, warnings))
}

/// Blue, cyan, green, yellow, red at equal spacing on [0, 1].
pub fn colormap(v: f64) -> [f64; 3] {
    const STOPS: [[f64; 3]; 5] = [
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
    ];
    let v = v.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (v.floor() as usize).min(STOPS.len() - 2);
    let f = v - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    [
        a[0] + (b[0] - a[0]) * f,
        a[1] + (b[1] - a[1]) * f,
        a[2] + (b[2] - a[2]) * f,
    ]
}

/// Colour-mapped RGB rendering of one spectrogram, low frequencies at the bottom.
pub fn render_spectrogram(spec: &Spectrogram, size: (usize, usize)) -> Result<FeatureImage> {
    let resized = flip_rows(&spec.values).resize_bilinear(size.0, size.1);
    let norm = min_max_normalize(&resized).unwrap_or_else(|| Matrix::zeros(size.0, size.1));
    let mut pixels = Vec::with_capacity(size.0 * size.1 * 3);
    for &v in &norm.data {
        pixels.extend_from_slice(&colormap(v));
    }
    FeatureImage::new(size.0, size.1, 3, pixels, Provenance::Spectrogram)
}

/// Writes an 8-bit RGB or RGBA PNG with optional `tEXt` entries.
pub fn write_png(path: &Path, img: &FeatureImage, text: &[(&str, &str)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(if img.channels == 4 {
        png::ColorType::Rgba
    } else {
        png::ColorType::Rgb
    });
    enc.set_depth(png::BitDepth::Eight);
    enc.set_compression(png::Compression::Balanced);
    for (k, v) in text {
        enc.add_text_chunk(k.to_string(), v.to_string())
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    let fmt = |e: png::EncodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut writer = enc.write_header().map_err(fmt)?;
    writer.write_image_data(&img.to_bytes()).map_err(fmt)?;
    writer.finish().map_err(fmt)
}

/// Reads an 8-bit RGB/RGBA PNG. Four-channel images are tagged as slope
/// plots, three-channel ones as L-mHP stacks.
pub fn read_png(path: &Path) -> Result<FeatureImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let fmt = |e: png::DecodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut reader = png::Decoder::new(std::io::BufReader::new(file)).read_info().map_err(fmt)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(fmt)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!("{}: only 8-bit PNG is supported", path.display())));
    }
    let (channels, provenance) = match info.color_type {
        png::ColorType::Rgba => (4, Provenance::SlopePlot),
        png::ColorType::Rgb => (3, Provenance::LmHP),
        other => {
            return Err(Error::Format(format!("{}: unsupported colour type {other:?}", path.display())))
        }
    };
    FeatureImage::from_bytes(
        info.height as usize,
        info.width as usize,
        channels,
        &buf[..info.buffer_size()],
        provenance,
    )
}
