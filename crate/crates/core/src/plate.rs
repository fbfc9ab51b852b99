//! Closed-form physics of a thin Kelvin–Voigt damped plate.
//!
//! Flexural waves obey `ρh ∂²u/∂t² + D(1 + ϑ ∂/∂t)∇⁴u = f`. In the low-loss
//! regime (`ϑω ≪ 1`) the wavenumber is `k ≈ √(ω/a)(1 + jϑω/4)` with
//! `a = √(D/ρh)`. Evaluating the Fourier integral of the propagated packet by
//! stationary phase gives a closed-form envelope `A(d, t)`, whose maximum
//! travels with a distance-dependent "perceived" velocity
//! `c_p(d) = (16a²/(ϑd))^{1/3}`.
//!
//! Amplitudes are in arbitrary units throughout.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// Largest loss factor `ϑω` for which the first-order wavenumber expansion is
/// treated as valid.
pub const LOW_LOSS_LIMIT: f64 = 0.1;

/// Physical parameters of the slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateMaterial {
    /// Young's modulus, Pa.
    pub youngs_modulus: f64,
    /// Mass density, kg/m³.
    pub density: f64,
    /// Poisson ratio.
    pub poisson: f64,
    /// Thickness, m.
    pub thickness: f64,
    /// Kelvin–Voigt retardation time ϑ, s.
    pub damping_theta: f64,
}

impl PlateMaterial {
    /// 20 cm concrete slab: E = 24 GPa, ρ = 2500 kg/m³, σ = 0.2, ϑ = 1e-5 s.
    pub const fn concrete_slab() -> Self {
        Self {
            youngs_modulus: 24e9,
            density: 2500.0,
            poisson: 0.2,
            thickness: 0.2,
            damping_theta: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("material.youngs_modulus", self.youngs_modulus)?;
        ensure_positive("material.density", self.density)?;
        ensure_positive("material.thickness", self.thickness)?;
        ensure_positive("material.damping_theta", self.damping_theta)?;
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(Error::InvalidParameter {
                name: "material.poisson",
                reason: format!("must lie in (0, 0.5), got {}", self.poisson),
            });
        }
        Ok(())
    }

    /// Mass per unit area `ρh`, kg/m².
    pub fn areal_density(&self) -> f64 {
        self.density * self.thickness
    }

    /// Whether the loss factor stays below [`LOW_LOSS_LIMIT`] up to `omega_max`.
    pub fn is_low_loss(&self, omega_max: f64) -> bool {
        self.damping_theta * omega_max < LOW_LOSS_LIMIT
    }
}

impl Default for PlateMaterial {
    fn default() -> Self {
        Self::concrete_slab()
    }
}

/// Constants derived from a [`PlateMaterial`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateConstants {
    /// Bending stiffness `D = Eh³/(12(1−σ²))`, N·m.
    pub bending_stiffness: f64,
    /// Dispersion constant `a = √(D/ρh)`, m²/s.
    pub dispersion_a: f64,
    /// Attenuation constant `γ = ϑ/(4√a)`, s^(3/2).
    pub loss_gamma: f64,
    /// `|α| = π a^(3/2) / (2D)`.
    pub alpha_magnitude: f64,
}

impl PlateConstants {
    /// Builds the constants from `a` directly, with `D = a²·ρh`.
    pub fn from_dispersion(dispersion_a: f64, areal_density: f64, theta: f64) -> Result<Self> {
        ensure_positive("dispersion_a", dispersion_a)?;
        ensure_positive("areal_density", areal_density)?;
        let d = dispersion_a * dispersion_a * areal_density;
        Self::assemble(d, dispersion_a, theta)
    }

    fn assemble(d: f64, a: f64, theta: f64) -> Result<Self> {
        let gamma = theta / (4.0 * a.sqrt());
        let alpha = PI * a.powf(1.5) / (2.0 * d);
        for (name, v) in [
            ("bending_stiffness", d),
            ("dispersion_a", a),
            ("alpha_magnitude", alpha),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::NonPhysical(name));
            }
        }
        // zero damping is allowed
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::NonPhysical("loss_gamma"));
        }
        Ok(Self {
            bending_stiffness: d,
            dispersion_a: a,
            loss_gamma: gamma,
            alpha_magnitude: alpha,
        })
    }
}

pub fn derive_constants(m: &PlateMaterial) -> Result<PlateConstants> {
    m.validate()?;
    let h = m.thickness;
    let d = m.youngs_modulus * h * h * h / (12.0 * (1.0 - m.poisson * m.poisson));
    let a = (d / m.areal_density()).sqrt();
    PlateConstants::assemble(d, a, m.damping_theta)
}

/// Complex wavenumber `k_R + j k_I`, 1/m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber {
    pub real: f64,
    pub imag: f64,
    /// `ϑω`
    pub loss_factor: f64,
}

impl Wavenumber {
    pub fn is_low_loss(&self) -> bool {
        self.loss_factor < LOW_LOSS_LIMIT
    }
}

/// First-order low-loss wavenumber: `k_R = √(ω/a)`, `k_I = (ϑω/4)·k_R`.
pub fn wavenumber(omega: f64, c: &PlateConstants, theta: f64) -> Wavenumber {
    let real = (omega / c.dispersion_a).sqrt();
    let loss_factor = theta * omega;
    Wavenumber {
        real,
        imag: 0.25 * loss_factor * real,
        loss_factor,
    }
}

/// Like [`wavenumber`], but refuses frequencies outside the low-loss regime.
pub fn checked_wavenumber(omega: f64, c: &PlateConstants, theta: f64) -> Result<Wavenumber> {
    let k = wavenumber(omega, c, theta);
    if k.is_low_loss() {
        Ok(k)
    } else {
        Err(Error::LossFactorTooLarge {
            loss_factor: k.loss_factor,
            limit: LOW_LOSS_LIMIT,
        })
    }
}

/// Group velocity `c_g = ∂ω/∂k_R = 2√(aω)`.
pub fn group_velocity(omega: f64, c: &PlateConstants) -> f64 {
    2.0 * (c.dispersion_a * omega).sqrt()
}

/// Stationary-phase frequency `ω₀ = (d / (2√a t))²` of the packet at `(d, t)`.
pub fn stationary_frequency(d: f64, t: f64, c: &PlateConstants) -> f64 {
    let r = d / (2.0 * c.dispersion_a.sqrt() * t);
    r * r
}

/// Stationary-phase envelope
/// `A(d,t) = |α|a/(2√2) · d² t^(−5/2) · exp(−ϑ d⁴ / (32 a² t³))`.
pub fn envelope(d: f64, t: f64, c: &PlateConstants, theta: f64) -> f64 {
    let a = c.dispersion_a;
    let prefactor = c.alpha_magnitude * a / (2.0 * SQRT_2);
    let d2 = d * d;
    prefactor * d2 * t.powf(-2.5) * (-theta * d2 * d2 / (32.0 * a * a * t * t * t)).exp()
}

/// Arrival time of the envelope maximum at distance `d`:
/// the `t` for which `∂A/∂d = 0` holds at `d`, `t = (ϑd⁴/(16a²))^(1/3)`.
pub fn envelope_max_toa(d: f64, c: &PlateConstants, theta: f64) -> Result<f64> {
    check_locus_args(d, theta)?;
    let a = c.dispersion_a;
    Ok((theta * d.powi(4) / (16.0 * a * a)).cbrt())
}

/// Distance of the envelope maximum at time `t`, `d = (16a²t³/ϑ)^(1/4)`.
pub fn envelope_max_distance(t: f64, c: &PlateConstants, theta: f64) -> Result<f64> {
    if theta == 0.0 {
        return Err(Error::ZeroDamping);
    }
    ensure_positive("t", t)?;
    let a = c.dispersion_a;
    Ok((16.0 * a * a * t.powi(3) / theta).powf(0.25))
}

/// Perceived propagation velocity `c_p = d / t = (16a²/(ϑd))^(1/3)`.
pub fn perceived_velocity(d: f64, c: &PlateConstants, theta: f64) -> Result<f64> {
    check_locus_args(d, theta)?;
    let a = c.dispersion_a;
    Ok((16.0 * a * a / (theta * d)).cbrt())
}

fn check_locus_args(d: f64, theta: f64) -> Result<()> {
    if theta == 0.0 {
        return Err(Error::ZeroDamping);
    }
    ensure_positive("theta", theta)?;
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(())
}

/// Time at which the envelope peaks for a sensor held at fixed distance `d`
/// (`∂A/∂t = 0`): `t = (3ϑd⁴/(80a²))^(1/3)`. Earlier than
/// [`envelope_max_toa`] by the factor `0.6^(1/3)`.
pub fn envelope_peak_time(d: f64, c: &PlateConstants, theta: f64) -> Result<f64> {
    check_locus_args(d, theta)?;
    let a = c.dispersion_a;
    Ok((3.0 * theta * d.powi(4) / (80.0 * a * a)).cbrt())
}

/// Earliest time at which `A(d, ·)` reaches `level`, or `None` if the
/// envelope at `d` never gets that high.
///
/// `A(d, ·)` rises monotonically up to [`envelope_peak_time`], so the onset is
/// bracketed on `(0, t_peak]` and found by bisection.
pub fn envelope_threshold_toa(d: f64, level: f64, c: &PlateConstants, theta: f64) -> Result<Option<f64>> {
    ensure_positive("level", level)?;
    let t_peak = envelope_peak_time(d, c, theta)?;
    if envelope(d, t_peak, c, theta) < level {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0_f64, t_peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if envelope(d, mid, c, theta) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    /// `f₁(t) = sin(2πt/T) − ½ sin(4πt/T)` on `[0, T]`.
    F1,
    /// `df₁/dt`.
    F1Derivative,
}

/// Excitation pulse of duration `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub kind: PulseKind,
    pub duration: f64,
}

impl Pulse {
    pub fn new(kind: PulseKind, duration: f64) -> Result<Self> {
        ensure_positive("pulse.duration", duration)?;
        Ok(Self { kind, duration })
    }

    pub fn value(&self, t: f64) -> f64 {
        let period = self.duration;
        if !(0.0..=period).contains(&t) {
            return 0.0;
        }
        let w = 2.0 * PI / period;
        match self.kind {
            PulseKind::F1 => (w * t).sin() - 0.5 * (2.0 * w * t).sin(),
            PulseKind::F1Derivative => w * ((w * t).cos() - (2.0 * w * t).cos()),
        }
    }

    /// Spectrum `∫ f(t) e^{+jωt} dt`, the forward transform paired with
    /// synthesis kernels of the form `e^{j(kx − ωt)}`.
    pub fn spectrum(&self, omega: f64) -> Complex64 {
        let f1 = f1_spectrum(omega, self.duration);
        match self.kind {
            PulseKind::F1 => f1,
            // f(0) = f(T) = 0, so integration by parts gives −jω f̂₁.
            PulseKind::F1Derivative => Complex64::new(0.0, -omega) * f1,
        }
    }
}

/// `f̂₁(ω) = −(3jT/4π) e^{jωT/2} sin(ωT/2) / ([1 − (ωT/2π)²][1 − (ωT/4π)²])`.
///
/// The poles at `ωT = ±2π, ±4π` are removable; their limits are
/// `±jT/2` and `∓jT/4`.
fn f1_spectrum(omega: f64, period: f64) -> Complex64 {
    const SNAP: f64 = 1e-7;
    let x = omega * period;
    let j = Complex64::i();
    if (x.abs() - 2.0 * PI).abs() < SNAP {
        return j * (0.5 * period * x.signum());
    }
    if (x.abs() - 4.0 * PI).abs() < SNAP {
        return j * (-0.25 * period * x.signum());
    }
    let r1 = x / (2.0 * PI);
    let r2 = x / (4.0 * PI);
    let denom = (1.0 - r1 * r1) * (1.0 - r2 * r2);
    let scale = -3.0 * period / (4.0 * PI) * (0.5 * x).sin() / denom;
    j * Complex64::from_polar(scale, 0.5 * x)
}
