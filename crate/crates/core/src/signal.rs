//! Sliding-window segmentation and per-window feature extraction.
//!
//! Each analysis window yields 16 features: the root-mean-square of each of
//! the 8 channels followed by the median power frequency of each channel.
//! The periodogram is one-sided, rectangular-windowed, DC bin included, and
//! scaled so its sum equals the signal energy.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of electrode channels in a canonical recording.
pub const CHANNELS: usize = 8;

/// Features per window: RMS and median power frequency per channel.
pub const FEATURE_DIM: usize = 2 * CHANNELS;

/// One analysis window of multi-channel signal.
///
/// `samples[ch]` holds the `T` samples of channel `ch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgWindow {
    pub samples: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

impl EmgWindow {
    pub fn new(samples: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("window has no channels".into()));
        }
        let t = samples[0].len();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "window length {t} is below the 2-sample minimum"
            )));
        }
        if samples.iter().any(|ch| ch.len() != t) {
            return Err(Error::InvalidInput("channels have unequal lengths".into()));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn channel_count(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples[0].is_empty()
    }
}

/// A 16-dimensional feature vector: `[rms ch0..ch7, mpf ch0..ch7]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_DIM]) -> Self {
        Self { values }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != FEATURE_DIM {
            return Err(Error::InvalidInput(format!(
                "expected {FEATURE_DIM} features, got {}",
                values.len()
            )));
        }
        let mut out = [0.0; FEATURE_DIM];
        out.copy_from_slice(values);
        Ok(Self { values: out })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.to_vec()
    }

    pub fn rms(&self) -> &[f64] {
        &self.values[..CHANNELS]
    }

    pub fn mpf(&self) -> &[f64] {
        &self.values[CHANNELS..]
    }
}

/// Window and step sizes in samples for the given durations.
///
/// Non-integer sizes floor to samples, erring toward shorter windows.
pub fn window_sizes(sample_rate: f64, window_ms: f64, step_ms: f64) -> Result<(usize, usize)> {
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidInput("sample rate must be positive".into()));
    }
    if !(step_ms > 0.0) || window_ms < step_ms {
        return Err(Error::InvalidInput(format!(
            "require window_ms >= step_ms > 0, got window {window_ms} ms, step {step_ms} ms"
        )));
    }
    let w = (window_ms * sample_rate / 1000.0).floor() as usize;
    let s = (step_ms * sample_rate / 1000.0).floor() as usize;
    if w < 2 || s == 0 {
        return Err(Error::InvalidInput(format!(
            "window of {w} samples / step of {s} samples is too small at {sample_rate} Hz"
        )));
    }
    Ok((w, s))
}

/// Cut a multi-channel signal into complete overlapping windows.
///
/// Windows start at offsets `0, S, 2S, ...`; a trailing partial window is
/// dropped. A signal shorter than one window is reported as
/// [`Error::SignalTooShort`], distinct from malformed input.
pub fn sliding_windows(
    signal: &[Vec<f64>],
    sample_rate: f64,
    window_ms: f64,
    step_ms: f64,
) -> Result<Vec<EmgWindow>> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("signal has no channels".into()));
    }
    let n = signal[0].len();
    if signal.iter().any(|ch| ch.len() != n) {
        return Err(Error::InvalidInput("channels have unequal lengths".into()));
    }
    let (w, s) = window_sizes(sample_rate, window_ms, step_ms)?;
    if n < w {
        return Err(Error::SignalTooShort(format!(
            "{n} samples < one window of {w}"
        )));
    }
    let count = (n - w) / s + 1;
    let mut windows = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * s;
        let samples: Vec<Vec<f64>> = signal.iter().map(|ch| ch[start..start + w].to_vec()).collect();
        windows.push(EmgWindow::new(samples, sample_rate)?);
    }
    Ok(windows)
}

/// Root-mean-square of a sample vector.
pub fn rms(channel_samples: &[f64]) -> Result<f64> {
    if channel_samples.is_empty() {
        return Err(Error::InvalidInput("rms of empty signal".into()));
    }
    let sum_sq: f64 = channel_samples.iter().map(|&x| x * x).sum();
    Ok((sum_sq / channel_samples.len() as f64).sqrt())
}

/// One-sided periodogram of a sample vector.
///
/// Bin `k` covers frequency `k * fs / T`; the sum over bins equals the
/// signal energy `sum(x^2)`.
pub fn periodogram(channel_samples: &[f64]) -> Result<Vec<f64>> {
    let t = channel_samples.len();
    if t < 2 {
        return Err(Error::InvalidInput(
            "periodogram needs at least 2 samples".into(),
        ));
    }
    let mut buf: Vec<Complex<f64>> = channel_samples
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buf);

    let half = t / 2;
    let tf = t as f64;
    let mut psd = Vec::with_capacity(half + 1);
    for (k, value) in buf.iter().take(half + 1).enumerate() {
        let mag_sq = value.norm_sqr() / tf;
        // DC and (for even T) Nyquist bins have no mirror image.
        let one_sided = if k == 0 || (t % 2 == 0 && k == half) {
            mag_sq
        } else {
            2.0 * mag_sq
        };
        psd.push(one_sided);
    }
    Ok(psd)
}

/// Median power frequency: the smallest bin frequency whose cumulative PSD
/// reaches half the total. An all-zero signal returns 0 Hz by definition.
pub fn median_power_frequency(channel_samples: &[f64], sample_rate: f64) -> Result<f64> {
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidInput("sample rate must be positive".into()));
    }
    let psd = periodogram(channel_samples)?;
    let total: f64 = psd.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    // The >=-half rule with the tie broken toward the lower bin. The slack
    // absorbs FFT rounding so an exact half-mass tie is still detected.
    let half_total = total / 2.0 * (1.0 - 1e-12);
    let bin_width = sample_rate / channel_samples.len() as f64;
    let mut cumulative = 0.0;
    for (k, &p) in psd.iter().enumerate() {
        cumulative += p;
        if cumulative >= half_total {
            return Ok(k as f64 * bin_width);
        }
    }
    // Rounding can leave the last cumulative marginally below half_total.
    Ok((psd.len() - 1) as f64 * bin_width)
}

/// Extract the 16 features of one window: per-channel RMS then per-channel
/// median power frequency, in channel order.
pub fn featurize_window(window: &EmgWindow) -> Result<FeatureVector> {
    if window.channel_count() != CHANNELS {
        return Err(Error::InvalidInput(format!(
            "expected {CHANNELS} channels, got {}",
            window.channel_count()
        )));
    }
    let mut values = [0.0; FEATURE_DIM];
    for (c, ch) in window.samples.iter().enumerate() {
        values[c] = rms(ch)?;
        values[CHANNELS + c] = median_power_frequency(ch, window.sample_rate)?;
    }
    Ok(FeatureVector::new(values))
}
