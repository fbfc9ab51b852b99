//! Monte Carlo comparison of SO-TDOA against the hyperbolic baseline.
//!
//! A world is a velocity profile `c(d)`; arrival times are `t_i = d_i/c(d_i)`
//! plus zero-mean Gaussian noise. Every run draws its noise from its own
//! ChaCha8 stream (`key = seed`, `stream = run index`), so results do not
//! depend on evaluation order and the same draws are reused across noise
//! levels and profiles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrival::tdoa_from_toas;
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::{Point, RoomGeometry};
use crate::localize::{localize_so_tdoa, Algorithm, PreparedGrid};
use crate::regions::{enumerate_regions, RegionMap, SensorArray};

/// Recorded in every report so runs can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9); key=seed_from_u64(seed); stream=run_index";

/// Perceived propagation velocity as a function of source–sensor distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum VelocityProfile {
    Constant {
        c0: f64,
    },
    /// `(16a²/(ϑd))^(1/3)`, the envelope-maximum law of a damped plate.
    PowerLaw {
        a: f64,
        theta: f64,
    },
    /// `c_far + (c_near − c_far) / (1 + (d/d_knee)²)`.
    ClampedDecay {
        c_near: f64,
        c_far: f64,
        d_knee: f64,
    },
}

impl VelocityProfile {
    pub const fn default_clamped_decay() -> Self {
        Self::ClampedDecay {
            c_near: 2000.0,
            c_far: 500.0,
            d_knee: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant { c0 } => ensure_positive("profile.c0", c0),
            Self::PowerLaw { a, theta } => {
                ensure_positive("profile.a", a)?;
                ensure_positive("profile.theta", theta)
            }
            Self::ClampedDecay {
                c_near,
                c_far,
                d_knee,
            } => {
                ensure_positive("profile.c_near", c_near)?;
                ensure_positive("profile.c_far", c_far)?;
                ensure_positive("profile.d_knee", d_knee)?;
                if c_near < c_far {
                    return Err(Error::InvalidParameter {
                        name: "profile.c_near",
                        reason: format!("must be >= c_far ({c_far}), got {c_near}"),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::PowerLaw { .. } => "power_law",
            Self::ClampedDecay { .. } => "clamped_decay",
        }
    }

    pub fn speed(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::NonPositiveDistance(d));
        }
        Ok(match *self {
            Self::Constant { c0 } => c0,
            Self::PowerLaw { a, theta } => (16.0 * a * a / (theta * d)).cbrt(),
            Self::ClampedDecay {
                c_near,
                c_far,
                d_knee,
            } => {
                let r = d / d_knee;
                c_far + (c_near - c_far) / (1.0 + r * r)
            }
        })
    }
}

pub fn profile_speed(p: &VelocityProfile, d: f64) -> Result<f64> {
    p.speed(d)
}

/// `t_i = d_i / c(d_i)` for every sensor.
pub fn simulate_toas(source: Point, sensors: &SensorArray, p: &VelocityProfile) -> Result<Vec<f64>> {
    sensors
        .distances(source)
        .into_iter()
        .enumerate()
        .map(|(k, d)| {
            if d == 0.0 {
                Err(Error::SourceOnSensor { sensor: k + 1 })
            } else {
                Ok(d / p.speed(d)?)
            }
        })
        .collect()
}

/// Adds independent `N(0, σ²)` noise to each arrival time.
pub fn add_toa_noise<R: rand::Rng + ?Sized>(toas: &[f64], sigma_t: f64, rng: &mut R) -> Vec<f64> {
    toas.iter()
        .map(|t| {
            let z: f64 = StandardNormal.sample(rng);
            t + sigma_t * z
        })
        .collect()
}

/// Generator for run `run` of an experiment seeded with `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub room: RoomGeometry,
    pub sensors: SensorArray,
    pub source: Point,
    pub profile: VelocityProfile,
    /// Noise standard deviations, s.
    pub sigma_t_list: Vec<f64>,
    pub runs: usize,
    /// Localization lattice (walls included).
    pub grid: (usize, usize),
    /// Cell grid used to enumerate regions for the region decoder.
    pub region_grid: (usize, usize),
    /// Speed assumed by the hyperbolic algorithm, m/s.
    pub c_hat: f64,
    pub rng_seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Keep per-run estimates in the report.
    pub keep_runs: bool,
}

impl MonteCarloConfig {
    /// 9 sensors on a 3×3 lattice with 1 m margins in a 10 m × 10 m room,
    /// source at (1, 3) m, 25×25 search grid, 500 runs.
    pub fn reference(profile: VelocityProfile) -> Self {
        let room = RoomGeometry { lx: 10.0, ly: 10.0 };
        let sensors = SensorArray::lattice(&room, 3, 3, 1.0).expect("valid reference layout");
        Self {
            room,
            sensors,
            source: Point::new(1.0, 3.0),
            profile,
            sigma_t_list: vec![0.0, 0.25e-3, 0.5e-3, 0.75e-3, 1e-3],
            runs: 500,
            grid: (25, 25),
            region_grid: (200, 200),
            c_hat: 1000.0,
            rng_seed: 1,
            algorithms: Algorithm::ALL.to_vec(),
            keep_runs: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.profile.validate()?;
        self.sensors.require_inside(&self.room)?;
        if !self.room.covers(self.source) {
            return Err(Error::SourceOutsideRoom {
                x: self.source.x,
                y: self.source.y,
            });
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter {
                name: "monte_carlo.runs",
                reason: "must be at least 1".into(),
            });
        }
        if let Some(s) = self.sigma_t_list.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "monte_carlo.sigma_t",
                reason: format!("must be finite and >= 0, got {s}"),
            });
        }
        if self.algorithms.contains(&Algorithm::Hyperbolic) {
            ensure_positive("monte_carlo.c_hat", self.c_hat)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseEntry {
    pub algorithm: Algorithm,
    pub sigma_t: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub sigma_t: f64,
    pub run: usize,
    pub estimate: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub rng: String,
    pub seed: u64,
    pub runs: usize,
    pub profile: String,
    pub entries: Vec<RmseEntry>,
    pub per_run: Vec<RunRecord>,
}

impl MonteCarloReport {
    pub fn rmse(&self, algorithm: Algorithm, sigma_t: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.algorithm == algorithm && e.sigma_t == sigma_t)
            .map(|e| e.rmse)
    }
}

/// Precomputed localizers shared by every run.
pub struct Localizers {
    grid: PreparedGrid,
    map: Option<RegionMap>,
}

impl Localizers {
    pub fn new(cfg: &MonteCarloConfig) -> Result<Self> {
        let grid = PreparedGrid::new(&cfg.sensors, cfg.room.lattice(cfg.grid.0, cfg.grid.1)?)?;
        let map = if cfg.algorithms.contains(&Algorithm::SoTdoaRegion) {
            Some(enumerate_regions(&cfg.room, &cfg.sensors, cfg.region_grid)?)
        } else {
            None
        };
        Ok(Self { grid, map })
    }

    pub fn region_map(&self) -> Option<&RegionMap> {
        self.map.as_ref()
    }

    pub fn estimate(&self, algorithm: Algorithm, toas: &[f64], c_hat: f64) -> Result<Point> {
        let tau = tdoa_from_toas(toas)?;
        let result = match algorithm {
            Algorithm::SoTdoaRegion => localize_so_tdoa(&tau, self.map.as_ref().ok_or(Error::EmptyMap)?)?,
            Algorithm::SoTdoaGrid => self.grid.so_tdoa(&tau)?,
            Algorithm::Hyperbolic => self.grid.hyperbolic(&tau, c_hat)?,
        };
        Ok(result.estimate)
    }
}

pub fn run_monte_carlo(cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let localizers = Localizers::new(cfg)?;
    run_monte_carlo_with(cfg, &localizers)
}

/// As [`run_monte_carlo`], reusing localizers built for the same layout.
pub fn run_monte_carlo_with(cfg: &MonteCarloConfig, localizers: &Localizers) -> Result<MonteCarloReport> {
    cfg.validate()?;
    let clean = simulate_toas(cfg.source, &cfg.sensors, &cfg.profile)?;

    // estimates[run][sigma][algorithm]
    let estimates: Vec<Vec<Vec<Point>>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            cfg.sigma_t_list
                .iter()
                .map(|&sigma| {
                    let noisy = add_toa_noise(&clean, sigma, &mut run_rng(cfg.rng_seed, run as u64));
                    cfg.algorithms
                        .iter()
                        .map(|&alg| localizers.estimate(alg, &noisy, cfg.c_hat))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::new();
    let mut per_run = Vec::new();
    for (si, &sigma) in cfg.sigma_t_list.iter().enumerate() {
        for (ai, &algorithm) in cfg.algorithms.iter().enumerate() {
            let mut sum_sq = 0.0;
            for (run, per_sigma) in estimates.iter().enumerate() {
                let est = per_sigma[si][ai];
                sum_sq += cfg.source.distance_squared(est);
                if cfg.keep_runs {
                    per_run.push(RunRecord {
                        algorithm,
                        sigma_t: sigma,
                        run,
                        estimate: est,
                    });
                }
            }
            entries.push(RmseEntry {
                algorithm,
                sigma_t: sigma,
                rmse: (sum_sq / cfg.runs as f64).sqrt(),
            });
        }
    }
    Ok(MonteCarloReport {
        rng: RNG_ALGORITHM.to_string(),
        seed: cfg.rng_seed,
        runs: cfg.runs,
        profile: cfg.profile.name().to_string(),
        entries,
        per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_values() {
        let c = VelocityProfile::Constant { c0: 1000.0 };
        assert_eq!(c.speed(0.3).unwrap(), 1000.0);
        assert_eq!(c.speed(30.0).unwrap(), 1000.0);
        let p = VelocityProfile::PowerLaw {
            a: 183.0,
            theta: 1e-5,
        };
        assert!((p.speed(10.0).unwrap() - 1751.0).abs() / 1751.0 < 1e-3);
        assert!(matches!(p.speed(0.0), Err(Error::NonPositiveDistance(_))));
        let k = VelocityProfile::default_clamped_decay();
        assert!((k.speed(3.0).unwrap() - 1250.0).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for i in 1..2000 {
            let v = k.speed(i as f64 * 0.01).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn profile_validation() {
        assert!(VelocityProfile::Constant { c0: 0.0 }.validate().is_err());
        assert!(VelocityProfile::ClampedDecay {
            c_near: 100.0,
            c_far: 500.0,
            d_knee: 3.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn toas_constant_speed_and_errors() {
        let s = SensorArray::new(vec![Point::new(0.0, 0.0), Point::new(3.0, 4.0)]).unwrap();
        let t = simulate_toas(Point::new(0.0, 4.0), &s, &VelocityProfile::Constant { c0: 500.0 }).unwrap();
        assert_eq!(t, vec![4.0 / 500.0, 3.0 / 500.0]);
        assert!(matches!(
            simulate_toas(Point::new(3.0, 4.0), &s, &VelocityProfile::Constant { c0: 500.0 }),
            Err(Error::SourceOnSensor { sensor: 2 })
        ));
    }

    #[test]
    fn zero_noise_is_identity_and_seeded_noise_repeats() {
        let toas = [1e-3, 2e-3, 3.5e-3];
        assert_eq!(add_toa_noise(&toas, 0.0, &mut run_rng(7, 0)), toas.to_vec());
        let a = add_toa_noise(&toas, 1e-3, &mut run_rng(7, 3));
        let b = add_toa_noise(&toas, 1e-3, &mut run_rng(7, 3));
        let c = add_toa_noise(&toas, 1e-3, &mut run_rng(7, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let sigma = 0.5e-3;
        let mut rng = run_rng(11, 0);
        let zeros = vec![0.0; 100_000];
        let x = add_toa_noise(&zeros, sigma, &mut rng);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert!(
            (var / (sigma * sigma) - 1.0).abs() < 0.03,
            "var ratio {}",
            var / (sigma * sigma)
        );
    }

    #[test]
    fn noiseless_runs_are_constant() {
        let mut cfg = MonteCarloConfig::reference(VelocityProfile::PowerLaw {
            a: 183.0,
            theta: 1e-5,
        });
        cfg.runs = 20;
        cfg.sigma_t_list = vec![0.0];
        cfg.region_grid = (60, 60);
        cfg.keep_runs = true;
        let report = run_monte_carlo(&cfg).unwrap();
        for alg in Algorithm::ALL {
            let first = report
                .per_run
                .iter()
                .find(|r| r.algorithm == alg)
                .unwrap()
                .estimate;
            assert!(report
                .per_run
                .iter()
                .filter(|r| r.algorithm == alg)
                .all(|r| r.estimate == first));
            let err = cfg.source.distance(first);
            assert!((report.rmse(alg, 0.0).unwrap() - err).abs() < 1e-12);
        }
    }

    #[test]
    fn report_is_reproducible() {
        let mut cfg = MonteCarloConfig::reference(VelocityProfile::default_clamped_decay());
        cfg.runs = 40;
        cfg.region_grid = (50, 50);
        let a = run_monte_carlo(&cfg).unwrap();
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.rng_seed = 2;
        let c = run_monte_carlo(&cfg).unwrap();
        assert_ne!(a.entries, c.entries);
    }

    #[test]
    fn config_validation() {
        let mut cfg = MonteCarloConfig::reference(VelocityProfile::Constant { c0: 1000.0 });
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = MonteCarloConfig::reference(VelocityProfile::Constant { c0: 1000.0 });
        cfg.sigma_t_list = vec![-1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = MonteCarloConfig::reference(VelocityProfile::Constant { c0: 1000.0 });
        cfg.source = Point::new(11.0, 1.0);
        assert!(cfg.validate().is_err());
    }
}
