//! Source-position estimators.
//!
//! * `SoTdoaRegion` decodes the sign vector of the measured TDOAs against a
//!   [`RegionMap`] and averages the centroids of every minimal-distance region.
//! * `SoTdoaGrid` returns the grid point whose characteristic vector is
//!   closest in Hamming distance.
//! * `Hyperbolic` converts TDOAs to range differences with an assumed speed
//!   `ĉ` and returns the grid point with the smallest L2 residual.
//!
//! Grid ties resolve to the lowest row-major index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arrival::{sign_vector, TdoaVector};
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::Point;
use crate::regions::{characteristic_vector, pairs, CharacteristicVector, RegionMap, SensorArray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SoTdoaRegion,
    SoTdoaGrid,
    Hyperbolic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Self::SoTdoaRegion, Self::SoTdoaGrid, Self::Hyperbolic];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SoTdoaRegion => "so-tdoa",
            Self::SoTdoaGrid => "so-tdoa-grid",
            Self::Hyperbolic => "hyperbolic",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "so-tdoa" | "so-tdoa-region" => Ok(Self::SoTdoaRegion),
            "so-tdoa-grid" => Ok(Self::SoTdoaGrid),
            "hyperbolic" => Ok(Self::Hyperbolic),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub estimate: Point,
    pub algorithm: Algorithm,
    /// Minimal-distance region ids; empty for the grid algorithms.
    pub tied_regions: Vec<usize>,
    /// Hamming distance (SO-TDOA) or L2 residual in metres (hyperbolic).
    pub cost: f64,
}

fn check_width(tau: &TdoaVector, sensors: &SensorArray) -> Result<()> {
    if tau.sensor_count() != sensors.len() {
        return Err(Error::LengthMismatch {
            expected: sensors.pair_count(),
            actual: tau.len(),
        });
    }
    Ok(())
}

pub fn localize_so_tdoa(tau: &TdoaVector, map: &RegionMap) -> Result<LocalizationResult> {
    if map.is_empty() {
        return Err(Error::EmptyMap);
    }
    check_width(tau, map.sensors())?;
    let decoded = map.decode(&sign_vector(tau))?;
    let n = decoded.region_ids.len() as f64;
    let (sx, sy) = decoded.region_ids.iter().fold((0.0, 0.0), |(sx, sy), &id| {
        let c = map.regions()[id].centroid;
        (sx + c.x, sy + c.y)
    });
    Ok(LocalizationResult {
        estimate: Point::new(sx / n, sy / n),
        algorithm: Algorithm::SoTdoaRegion,
        tied_regions: decoded.region_ids,
        cost: decoded.distance as f64,
    })
}

/// Search grid with per-point codewords and range-difference vectors
/// precomputed, for repeated localization against one sensor layout.
#[derive(Debug, Clone)]
pub struct PreparedGrid {
    sensors: SensorArray,
    points: Vec<Point>,
    codewords: Vec<CharacteristicVector>,
    /// Row `k` holds `d_pi − d_pj` over canonical pairs for point `k`.
    range_diffs: Vec<Vec<f64>>,
}

impl PreparedGrid {
    pub fn new(sensors: &SensorArray, points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let n = sensors.len();
        let range_diffs = points
            .iter()
            .map(|&p| {
                let d = sensors.distances(p);
                pairs(n).map(|(i, j)| d[i] - d[j]).collect()
            })
            .collect();
        let codewords = points
            .iter()
            .map(|&p| characteristic_vector(p, sensors))
            .collect();
        Ok(Self {
            sensors: sensors.clone(),
            points,
            codewords,
            range_diffs,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn sensors(&self) -> &SensorArray {
        &self.sensors
    }

    pub fn codeword(&self, k: usize) -> &CharacteristicVector {
        &self.codewords[k]
    }

    pub fn so_tdoa(&self, tau: &TdoaVector) -> Result<LocalizationResult> {
        check_width(tau, &self.sensors)?;
        let z = sign_vector(tau);
        let (best, cost) = argmin(self.codewords.iter().map(|c| c.hamming(&z).map(|h| h as f64)))?;
        Ok(LocalizationResult {
            estimate: self.points[best],
            algorithm: Algorithm::SoTdoaGrid,
            tied_regions: Vec::new(),
            cost,
        })
    }

    /// Squared-residual surface `‖ĉτ − d_p‖²` over the grid.
    pub fn hyperbolic_residuals(&self, tau: &TdoaVector, c_hat: f64) -> Result<Vec<f64>> {
        ensure_positive("c_hat", c_hat)?;
        check_width(tau, &self.sensors)?;
        let ranges = tau.scaled(c_hat);
        Ok(self
            .range_diffs
            .iter()
            .map(|row| row.iter().zip(&ranges).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect())
    }

    pub fn hyperbolic(&self, tau: &TdoaVector, c_hat: f64) -> Result<LocalizationResult> {
        let residuals = self.hyperbolic_residuals(tau, c_hat)?;
        let (best, sq) = argmin(residuals.into_iter().map(Ok))?;
        Ok(LocalizationResult {
            estimate: self.points[best],
            algorithm: Algorithm::Hyperbolic,
            tied_regions: Vec::new(),
            cost: sq.sqrt(),
        })
    }
}

/// First index of the minimum.
fn argmin<I: Iterator<Item = Result<f64>>>(values: I) -> Result<(usize, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    for (k, v) in values.enumerate() {
        let v = v?;
        if v < best.1 {
            best = (k, v);
        }
    }
    if best.0 == usize::MAX {
        return Err(Error::EmptyGrid);
    }
    Ok(best)
}

pub fn localize_so_tdoa_grid(
    tau: &TdoaVector,
    sensors: &SensorArray,
    grid_points: &[Point],
) -> Result<LocalizationResult> {
    PreparedGrid::new(sensors, grid_points.to_vec())?.so_tdoa(tau)
}

pub fn localize_hyperbolic(
    tau: &TdoaVector,
    c_hat: f64,
    sensors: &SensorArray,
    grid_points: &[Point],
) -> Result<LocalizationResult> {
    PreparedGrid::new(sensors, grid_points.to_vec())?.hyperbolic(tau, c_hat)
}
