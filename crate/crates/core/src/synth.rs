//! Discrete-sum synthesis of the propagated flexural packet.
//!
//! The field at distance `d` is the truncated Fourier sum
//!
//! ```text
//! u(d,t) = (ω_m/n) Σ_{i<n} w(ω_i) e^{−k_I(ω_i) d} cos(k_R(ω_i) d − ω_i t + π/4),   ω_i = i ω_m / n
//! ```
//!
//! Writing `C_i = w(ω_i) e^{−k_I d} e^{j(k_R d + π/4)}` turns each sample into
//! `Re Σ C_i z^i` with `z = e^{−jΔω t}`, which is evaluated by Horner's rule.
//! The modulus of the same complex sum is the quadrature envelope of the
//! trace.
//!
//! A bounded rectangular plate is modelled by image sources: each mirrored
//! source contributes `R_pq · u(d_pq, t) / √d_pq`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::geometry::{Point, RoomGeometry};
use crate::plate::{wavenumber, PlateConstants, Pulse, PulseKind, LOW_LOSS_LIMIT};

/// Below this distance the truncated sum misses the dominant high-frequency
/// content and the thin-plate model breaks down.
pub const MIN_VALID_DISTANCE: f64 = 3.0;

/// Relative tolerance on sample spacing when checking a time grid.
const GRID_TOLERANCE: f64 = 1e-6;

/// Uniformly sampled time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    sample_rate: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, sample_rate: f64, len: usize) -> Result<Self> {
        ensure_positive("sample_rate", sample_rate)?;
        if !t0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t0",
                reason: "must be finite".into(),
            });
        }
        if len == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { t0, sample_rate, len })
    }

    /// Validates an explicit list of sample times.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        match times {
            [] => Err(Error::EmptyGrid),
            [_] => Err(Error::NonUniformGrid { index: 0 }),
            [first, second, ..] => {
                let dt = second - first;
                if !(dt > 0.0) {
                    return Err(Error::NonUniformGrid { index: 1 });
                }
                for (k, &t) in times.iter().enumerate() {
                    let expected = first + k as f64 * dt;
                    if (t - expected).abs() > GRID_TOLERANCE * dt.max(expected.abs() * f64::EPSILON) {
                        return Err(Error::NonUniformGrid { index: k });
                    }
                }
                Self::new(*first, 1.0 / dt, times.len())
            }
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|k| self.time(k))
    }
}

/// A uniformly sampled transversal-displacement trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: f64,
    /// Time of the first sample, s.
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_rate: f64, t0: f64, samples: Vec<f64>) -> Result<Self> {
        ensure_positive("sample_rate", sample_rate)?;
        if samples.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "samples",
                reason: format!("sample {k} is not finite"),
            });
        }
        Ok(Self {
            sample_rate,
            t0,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.sample_rate
    }

    /// Index and absolute value of the largest-magnitude sample.
    pub fn peak(&self) -> (usize, f64) {
        self.samples
            .iter()
            .map(|v| v.abs())
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, (k, v)| if v > best.1 { (k, v) } else { best },
            )
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            t0: self.t0,
            sample_rate: self.sample_rate,
            len: self.samples.len(),
        }
    }
}

/// Spectral weighting `w(ω)` of the discrete sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpectralWeight {
    /// `|α| ω^{1/2}`: far-field response to the derivative pulse in the
    /// short-pulse limit.
    OmegaHalf,
    /// Unit weight, as in the bounded-plate time-frequency study.
    Flat,
    /// `|α| ω^{−3/2} f̂(ω)` for the derivative pulse of duration `duration`,
    /// normalised by `−8π/(3T²)` so that it tends to `OmegaHalf` as `T → 0`.
    PulseF1Derivative { duration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisParams {
    /// Upper frequency of the sum, Hz.
    pub f_max: f64,
    pub n_terms: usize,
    pub spectral_weight: SpectralWeight,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            f_max: 10_000.0,
            n_terms: 2048,
            spectral_weight: SpectralWeight::OmegaHalf,
        }
    }
}

impl SynthesisParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("synthesis.f_max", self.f_max)?;
        if self.n_terms < 16 {
            return Err(Error::InvalidParameter {
                name: "synthesis.n_terms",
                reason: format!("must be at least 16, got {}", self.n_terms),
            });
        }
        if let SpectralWeight::PulseF1Derivative { duration } = self.spectral_weight {
            ensure_positive("synthesis.spectral_weight.duration", duration)?;
        }
        Ok(())
    }

    pub fn omega_max(&self) -> f64 {
        2.0 * PI * self.f_max
    }

    pub fn omega_step(&self) -> f64 {
        self.omega_max() / self.n_terms as f64
    }

    fn weight(&self, omega: f64, c: &PlateConstants) -> Complex64 {
        match self.spectral_weight {
            SpectralWeight::OmegaHalf => Complex64::from(c.alpha_magnitude * omega.sqrt()),
            SpectralWeight::Flat => Complex64::from(1.0),
            SpectralWeight::PulseF1Derivative { duration } => {
                if omega == 0.0 {
                    return Complex64::from(0.0);
                }
                let pulse = Pulse {
                    kind: PulseKind::F1Derivative,
                    duration,
                };
                let norm = -8.0 * PI / (3.0 * duration * duration);
                pulse.spectrum(omega) * (c.alpha_magnitude * omega.powf(-1.5) * norm)
            }
        }
    }
}

/// Whether `d` is below the distance where the truncated sum is meaningful.
pub fn is_short_distance(d: f64) -> bool {
    d < MIN_VALID_DISTANCE
}

/// Per-distance coefficients `C_i` of the complex sum.
fn coefficients(d: f64, c: &PlateConstants, theta: f64, p: &SynthesisParams) -> Vec<Complex64> {
    let step = p.omega_step();
    (0..p.n_terms)
        .map(|i| {
            let omega = i as f64 * step;
            let k = wavenumber(omega, c, theta);
            p.weight(omega, c) * Complex64::from_polar((-k.imag * d).exp(), k.real * d + FRAC_PI_4)
        })
        .collect()
}

#[inline]
fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn check_inputs(d: f64, theta: f64, p: &SynthesisParams) -> Result<()> {
    p.validate()?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::NonPositiveDistance(d));
    }
    if !(theta >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("must be >= 0, got {theta}"),
        });
    }
    if is_short_distance(d) {
        log::warn!(
            "distance {d} m is below {MIN_VALID_DISTANCE} m; the synthesized trace is not reliable there"
        );
    }
    if theta * p.omega_max() >= LOW_LOSS_LIMIT {
        log::debug!(
            "loss factor reaches {:.3} at the top of the band (low-loss limit {LOW_LOSS_LIMIT})",
            theta * p.omega_max()
        );
    }
    Ok(())
}

/// Complex (analytic) trace: the real part is the synthesized field, the
/// modulus its quadrature envelope.
pub fn synth_free_analytic(
    d: f64,
    grid: &TimeGrid,
    c: &PlateConstants,
    theta: f64,
    p: &SynthesisParams,
) -> Result<Vec<Complex64>> {
    check_inputs(d, theta, p)?;
    let coeffs = coefficients(d, c, theta, p);
    let step = p.omega_step();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| horner(&coeffs, Complex64::from_polar(1.0, -step * grid.time(k))) * step)
        .collect())
}

/// Free-field trace at source–sensor distance `d`.
pub fn synth_free(
    d: f64,
    grid: &TimeGrid,
    c: &PlateConstants,
    theta: f64,
    p: &SynthesisParams,
) -> Result<Waveform> {
    let trace = synth_free_analytic(d, grid, c, theta, p)?;
    Waveform::new(
        grid.sample_rate(),
        grid.t0(),
        trace.iter().map(|z| z.re).collect(),
    )
}

/// Quadrature envelope of [`synth_free`].
pub fn synth_free_envelope(
    d: f64,
    grid: &TimeGrid,
    c: &PlateConstants,
    theta: f64,
    p: &SynthesisParams,
) -> Result<Waveform> {
    let trace = synth_free_analytic(d, grid, c, theta, p)?;
    Waveform::new(
        grid.sample_rate(),
        grid.t0(),
        trace.iter().map(|z| z.norm()).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Point,
    /// Reflection sign `R_pq`, ±1.
    pub sign: i8,
    /// Image order along x and y.
    pub order: (i32, i32),
    /// Per-axis branch signs `(s_x, s_y)`; `sign` is their product.
    pub branch: (i8, i8),
}

impl ImageSource {
    pub fn is_direct(&self) -> bool {
        self.order == (0, 0) && self.branch == (1, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSourceSet {
    pub entries: Vec<ImageSource>,
}

impl ImageSourceSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn distances_to(&self, sensor: Point) -> Vec<f64> {
        self.entries.iter().map(|e| e.position.distance(sensor)).collect()
    }

    /// Keeps only the direct path.
    pub fn direct_only(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(ImageSource::is_direct)
                .collect(),
        }
    }
}

/// Image sources of a rectangular plate with sign-flipping edges.
///
/// Along x the images sit at `x_e + 2p·l_x` (sign +1) and `−x_e + 2p·l_x`
/// (sign −1), `|p| ≤ p_max`; y is analogous. A corner image carries the
/// product of its two axis signs, one flip per edge reflection.
pub fn image_positions(room: &RoomGeometry, source: Point, p_max: u32, q_max: u32) -> Result<ImageSourceSet> {
    room.validate()?;
    room.require_inside(source)?;
    let (p_max, q_max) = (p_max as i32, q_max as i32);
    let mut entries = Vec::with_capacity(((2 * p_max + 1) * (2 * q_max + 1) * 4) as usize);
    for p in -p_max..=p_max {
        let shift_x = 2.0 * p as f64 * room.lx;
        for (sx, x) in [(1_i8, source.x + shift_x), (-1, -source.x + shift_x)] {
            for q in -q_max..=q_max {
                let shift_y = 2.0 * q as f64 * room.ly;
                for (sy, y) in [(1_i8, source.y + shift_y), (-1, -source.y + shift_y)] {
                    entries.push(ImageSource {
                        position: Point::new(x, y),
                        sign: sx * sy,
                        order: (p, q),
                        branch: (sx, sy),
                    });
                }
            }
        }
    }
    Ok(ImageSourceSet { entries })
}

/// Superposes `R · u(d, t) / √d` over the given image sources, at `sensor`.
pub fn synth_images(
    images: &ImageSourceSet,
    sensor: Point,
    grid: &TimeGrid,
    c: &PlateConstants,
    theta: f64,
    p: &SynthesisParams,
) -> Result<Vec<Complex64>> {
    p.validate()?;
    let terms = images
        .entries
        .iter()
        .map(|img| {
            let d = img.position.distance(sensor);
            if !(d > 0.0) {
                return Err(Error::NonPositiveDistance(d));
            }
            Ok((f64::from(img.sign), d.sqrt(), coefficients(d, c, theta, p)))
        })
        .collect::<Result<Vec<_>>>()?;
    let step = p.omega_step();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| {
            let z = Complex64::from_polar(1.0, -step * grid.time(k));
            terms
                .iter()
                .fold(Complex64::new(0.0, 0.0), |acc, (sign, root_d, coeffs)| {
                    acc + (horner(coeffs, z) * step / *root_d) * *sign
                })
        })
        .collect())
}

/// Trace received at `sensor` on a bounded plate.
#[allow(clippy::too_many_arguments)]
pub fn synth_bounded(
    room: &RoomGeometry,
    source: Point,
    sensor: Point,
    grid: &TimeGrid,
    c: &PlateConstants,
    theta: f64,
    p: &SynthesisParams,
    p_max: u32,
    q_max: u32,
) -> Result<Waveform> {
    room.require_inside(sensor)?;
    if source == sensor {
        return Err(Error::SourceOnSensor { sensor: 0 });
    }
    let images = image_positions(room, source, p_max, q_max)?;
    if is_short_distance(source.distance(sensor)) {
        log::warn!("direct path is shorter than {MIN_VALID_DISTANCE} m");
    }
    let trace = synth_images(&images, sensor, grid, c, theta, p)?;
    Waveform::new(
        grid.sample_rate(),
        grid.t0(),
        trace.iter().map(|z| z.re).collect(),
    )
}
