//! Arrival-time picking, TDOA/sign vectors and time–frequency analysis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::regions::{pair_count, pairs, CharacteristicVector};
use crate::synth::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToaMethod {
    Threshold,
    EnvelopeMax,
}

impl ToaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Threshold => "threshold",
            Self::EnvelopeMax => "envelope_max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToaEstimate {
    /// Seconds, on the waveform's time axis.
    pub time: f64,
    pub method: ToaMethod,
    pub threshold_used: Option<f64>,
}

/// Detection level, either absolute or relative to the trace's own peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Threshold {
    Absolute(f64),
    FractionOfPeak(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Self::FractionOfPeak(0.1)
    }
}

impl Threshold {
    pub fn level_for(&self, w: &Waveform) -> f64 {
        match *self {
            Self::Absolute(v) => v,
            Self::FractionOfPeak(f) => f * w.peak().1,
        }
    }
}

/// Time of the first sample with `|u| > delta`.
pub fn detect_toa(w: &Waveform, delta: f64) -> Result<ToaEstimate> {
    ensure_positive("delta", delta)?;
    let k = w
        .samples
        .iter()
        .position(|v| v.abs() > delta)
        .ok_or(Error::NoOnset { threshold: delta })?;
    Ok(ToaEstimate {
        time: w.time(k),
        method: ToaMethod::Threshold,
        threshold_used: Some(delta),
    })
}

/// First crossing of `|u| = delta`, placed by linear interpolation between
/// the last sample below and the first sample above the level.
pub fn detect_toa_interpolated(w: &Waveform, delta: f64) -> Result<ToaEstimate> {
    ensure_positive("delta", delta)?;
    let k = w
        .samples
        .iter()
        .position(|v| v.abs() > delta)
        .ok_or(Error::NoOnset { threshold: delta })?;
    let time = if k == 0 {
        w.time(0)
    } else {
        let (a, b) = (w.samples[k - 1].abs(), w.samples[k].abs());
        w.time(k - 1) + (delta - a) / (b - a) / w.sample_rate
    };
    Ok(ToaEstimate {
        time,
        method: ToaMethod::Threshold,
        threshold_used: Some(delta),
    })
}

pub fn detect_toa_with(w: &Waveform, threshold: Threshold) -> Result<ToaEstimate> {
    detect_toa(w, threshold.level_for(w))
}

/// Time of the largest-magnitude sample.
pub fn detect_envelope_max(w: &Waveform) -> ToaEstimate {
    ToaEstimate {
        time: w.time(w.peak().0),
        method: ToaMethod::EnvelopeMax,
        threshold_used: None,
    }
}

/// Time differences `t_i − t_j` over canonical pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TdoaVector {
    values: Vec<f64>,
    sensors: usize,
}

impl TdoaVector {
    pub fn new(values: Vec<f64>, sensors: usize) -> Result<Self> {
        if values.len() != pair_count(sensors) {
            return Err(Error::LengthMismatch {
                expected: pair_count(sensors),
                actual: values.len(),
            });
        }
        Ok(Self { values, sensors })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Vec<f64> {
        self.values.iter().map(|v| v * factor).collect()
    }
}

pub fn tdoa_from_toas(toas: &[f64]) -> Result<TdoaVector> {
    if toas.len() < 2 {
        return Err(Error::LengthMismatch {
            expected: 2,
            actual: toas.len(),
        });
    }
    let values = pairs(toas.len()).map(|(i, j)| toas[i] - toas[j]).collect();
    Ok(TdoaVector {
        values,
        sensors: toas.len(),
    })
}

/// `sgn(τ)` entrywise, with `sgn(0) = +1`.
pub fn sign_vector(tau: &TdoaVector) -> CharacteristicVector {
    CharacteristicVector::from_differences(tau.values.iter().copied())
}

/// Velocity estimates `d_i / (t_i − t_ref)` relative to a reference sensor
/// placed at the source.
pub fn relative_velocities(distances: &[f64], toas: &[f64], reference_toa: f64) -> Result<Vec<f64>> {
    if distances.len() != toas.len() {
        return Err(Error::LengthMismatch {
            expected: distances.len(),
            actual: toas.len(),
        });
    }
    Ok(distances
        .iter()
        .zip(toas)
        .map(|(d, t)| d / (t - reference_toa))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    pub window_len: usize,
    pub overlap: usize,
    pub fft_len: usize,
}

impl Default for StftParams {
    /// 128-sample Hamming window, 126-sample overlap, 128-point FFT.
    fn default() -> Self {
        Self {
            window_len: 128,
            overlap: 126,
            fft_len: 128,
        }
    }
}

impl StftParams {
    pub fn hop(&self) -> usize {
        self.window_len - self.overlap
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.overlap >= self.window_len || self.window_len > self.fft_len {
            return Err(Error::InvalidParameter {
                name: "stft",
                reason: format!(
                    "need overlap < window_len <= fft_len, got {}/{}/{}",
                    self.overlap, self.window_len, self.fft_len
                ),
            });
        }
        Ok(())
    }
}

/// Symmetric Hamming window `0.54 − 0.46 cos(2πn/(N−1))`.
pub fn hamming_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let m = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / m).cos())
        .collect()
}

/// One-sided magnitude STFT.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// `frames[f][b]`: magnitude of bin `b` in frame `f`.
    frames: Vec<Vec<f64>>,
    /// Window-centre time of each frame, s.
    pub frame_times: Vec<f64>,
    /// Bin centre frequencies, Hz.
    pub bin_freqs: Vec<f64>,
}

impl Spectrogram {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn bin_count(&self) -> usize {
        self.bin_freqs.len()
    }

    pub fn magnitude(&self, bin: usize, frame: usize) -> f64 {
        self.frames[frame][bin]
    }

    pub fn frame(&self, frame: usize) -> &[f64] {
        &self.frames[frame]
    }

    /// Bin of largest magnitude in `frame` (lowest bin on ties).
    pub fn peak_bin(&self, frame: usize) -> usize {
        self.frames[frame]
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, (b, &m)| if m > best.1 { (b, m) } else { best },
            )
            .0
    }

    pub fn peak_frequency(&self, frame: usize) -> f64 {
        self.bin_freqs[self.peak_bin(frame)]
    }

    pub fn frame_energy(&self, frame: usize) -> f64 {
        self.frames[frame].iter().map(|m| m * m).sum()
    }

    /// Sum of squared magnitudes over the full (two-sided) spectrum.
    pub fn total_energy(&self, fft_len: usize) -> f64 {
        let nyquist = fft_len.is_multiple_of(2);
        self.frames
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(b, m)| {
                        let edge = b == 0 || (nyquist && b == frame.len() - 1);
                        if edge {
                            m * m
                        } else {
                            2.0 * m * m
                        }
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Short-time Fourier transform. Frames that would run past the end of the
/// signal are dropped.
pub fn stft(w: &Waveform, params: StftParams) -> Result<Spectrogram> {
    params.validate()?;
    let StftParams {
        window_len, fft_len, ..
    } = params;
    if w.len() < window_len {
        return Err(Error::InsufficientSamples {
            needed: window_len,
            available: w.len(),
        });
    }
    let hop = params.hop();
    let n_frames = (w.len() - window_len) / hop + 1;
    let n_bins = fft_len / 2 + 1;
    let window = hamming_window(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_len);
    let mut buffer = vec![Complex64::new(0.0, 0.0); fft_len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let mut frames = Vec::with_capacity(n_frames);
    let mut frame_times = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * hop;
        buffer.fill(Complex64::new(0.0, 0.0));
        for (slot, (x, wv)) in buffer
            .iter_mut()
            .zip(w.samples[start..start + window_len].iter().zip(&window))
        {
            *slot = Complex64::new(x * wv, 0.0);
        }
        fft.process_with_scratch(&mut buffer, &mut scratch);
        frames.push(buffer[..n_bins].iter().map(|c| c.norm()).collect());
        frame_times.push(w.t0 + (start as f64 + 0.5 * window_len as f64) / w.sample_rate);
    }
    let bin_freqs = (0..n_bins)
        .map(|b| b as f64 * w.sample_rate / fft_len as f64)
        .collect();
    Ok(Spectrogram {
        frames,
        frame_times,
        bin_freqs,
    })
}
