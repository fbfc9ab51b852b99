use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use slabloc::arrival::StftParams;
use slabloc::harness::VelocityProfile;
use slabloc::plate::{derive_constants, PlateMaterial};
use slabloc::regions::SensorArray;
use slabloc::synth::SynthesisParams;
use slabloc::{Point, RoomGeometry};

use crate::CliError;

/// Everything a run needs. Every key is optional; omitted keys take the
/// concrete-slab defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub sensors: SensorArray,
    pub material: PlateMaterial,
    pub room: RoomGeometry,
    pub synthesis: SynthesisConfig,
    pub profile: VelocityProfile,
    pub velocity_curve: VelocityCurveConfig,
    pub localization: LocalizationConfig,
    pub monte_carlo: MonteCarloSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub f_max: f64,
    pub n_terms: usize,
    pub sample_rate: f64,
    /// Free-field trace length, s.
    pub duration: f64,
    /// Free-field source–sensor distances, m.
    pub distances: Vec<f64>,
    pub spectral_weight: slabloc::synth::SpectralWeight,
    pub stft: StftParams,
    pub bounded: BoundedConfig,
}

/// The bounded-plate pair used for the spectrogram study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundedConfig {
    pub room: RoomGeometry,
    pub source: Point,
    pub sensor: Point,
    pub p_max: u32,
    pub q_max: u32,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VelocityCurveConfig {
    pub d_min: f64,
    pub d_max: f64,
    pub d_step: f64,
    /// Threshold level as a fraction of the envelope maximum at `reference_distance`.
    pub level_fraction: f64,
    pub reference_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationConfig {
    pub grid: (usize, usize),
    pub region_grid: (usize, usize),
    pub c_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub source: Point,
    pub sigma_t_list: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    /// Extra hyperbolic sweep over assumed speeds, m/s.
    pub c_hat_sweep: Vec<f64>,
    pub keep_runs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let material = PlateMaterial::concrete_slab();
        let room = RoomGeometry { lx: 10.0, ly: 10.0 };
        let a = derive_constants(&material)
            .map(|c| c.dispersion_a)
            .unwrap_or(183.0);
        Self {
            output_dir: PathBuf::from("out"),
            sensors: SensorArray::lattice(&room, 3, 3, 1.0).expect("valid default layout"),
            material,
            room,
            synthesis: SynthesisConfig::default(),
            profile: VelocityProfile::PowerLaw {
                a,
                theta: material.damping_theta,
            },
            velocity_curve: VelocityCurveConfig::default(),
            localization: LocalizationConfig::default(),
            monte_carlo: MonteCarloSection::default(),
        }
    }
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        let p = SynthesisParams::default();
        Self {
            f_max: p.f_max,
            n_terms: p.n_terms,
            sample_rate: 20_000.0,
            duration: 0.03,
            distances: vec![5.0, 10.0, 15.0, 20.0],
            spectral_weight: p.spectral_weight,
            stft: StftParams::default(),
            bounded: BoundedConfig::default(),
        }
    }
}

impl Default for BoundedConfig {
    fn default() -> Self {
        Self {
            room: RoomGeometry { lx: 3.6, ly: 5.4 },
            source: Point::new(0.9, 1.35),
            sensor: Point::new(0.2, 5.2),
            p_max: 4,
            q_max: 4,
            duration: 0.07,
        }
    }
}

impl Default for VelocityCurveConfig {
    fn default() -> Self {
        Self {
            d_min: 5.0,
            d_max: 20.0,
            d_step: 0.5,
            level_fraction: 0.1,
            reference_distance: 5.0,
        }
    }
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        Self {
            grid: (25, 25),
            region_grid: (200, 200),
            c_hat: 1000.0,
        }
    }
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            source: Point::new(1.0, 3.0),
            sigma_t_list: vec![0.0, 0.25e-3, 0.5e-3, 0.75e-3, 1e-3],
            runs: 500,
            seed: 1,
            c_hat_sweep: vec![500.0, 1000.0, 2000.0],
            keep_runs: false,
        }
    }
}

impl SynthesisConfig {
    pub fn params(&self) -> SynthesisParams {
        SynthesisParams {
            f_max: self.f_max,
            n_terms: self.n_terms,
            spectral_weight: self.spectral_weight,
        }
    }

    pub fn samples(&self, duration: f64) -> usize {
        (duration * self.sample_rate).round() as usize
    }
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {reason}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let lib = |e: slabloc::Error| CliError::Config(e.to_string());
        self.material.validate().map_err(lib)?;
        self.room.validate().map_err(lib)?;
        self.sensors.require_inside(&self.room).map_err(lib)?;
        self.synthesis.params().validate().map_err(lib)?;
        self.synthesis.stft.validate().map_err(lib)?;
        self.profile.validate().map_err(lib)?;
        let s = &self.synthesis;
        if !(s.sample_rate > 0.0) {
            return Err(invalid("synthesis.sample_rate", "must be positive"));
        }
        for (key, d) in [
            ("synthesis.duration", s.duration),
            ("synthesis.bounded.duration", s.bounded.duration),
        ] {
            if s.samples(d) == 0 {
                return Err(invalid(key, "yields no samples"));
            }
        }
        if let Some(d) = s.distances.iter().find(|d| !(**d > 0.0)) {
            return Err(invalid(
                "synthesis.distances",
                format!("must be positive, got {d}"),
            ));
        }
        let b = &s.bounded;
        b.room.validate().map_err(lib)?;
        b.room.require_inside(b.source).map_err(lib)?;
        b.room.require_inside(b.sensor).map_err(lib)?;
        let v = &self.velocity_curve;
        if !(v.d_min > 0.0 && v.d_max >= v.d_min && v.d_step > 0.0) {
            return Err(invalid(
                "velocity_curve",
                "need 0 < d_min <= d_max and d_step > 0",
            ));
        }
        if !(v.level_fraction > 0.0 && v.reference_distance > 0.0) {
            return Err(invalid(
                "velocity_curve",
                "level_fraction and reference_distance must be positive",
            ));
        }
        if !(self.localization.c_hat > 0.0) {
            return Err(invalid("localization.c_hat", "must be positive"));
        }
        if let Some(c) = self.monte_carlo.c_hat_sweep.iter().find(|c| !(**c > 0.0)) {
            return Err(invalid(
                "monte_carlo.c_hat_sweep",
                format!("must be positive, got {c}"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&text).unwrap().to_toml(), text);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[room]\nlx = 4.0\nly = 4.0\nwidth = 3.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("width"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn sensors_outside_room_rejected() {
        let err = RunConfig::parse("sensors = [[1.0, 1.0], [12.0, 1.0]]\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn default_profile_uses_slab_constants() {
        let VelocityProfile::PowerLaw { a, theta } = RunConfig::default().profile else {
            panic!("expected power law");
        };
        assert!((a - 182.57).abs() < 0.01);
        assert_eq!(theta, 1e-5);
    }
}
