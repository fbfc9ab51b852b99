//! The SO-TDOA codebook.
//!
//! Every pair of sensors `(i, j)` splits the plane along the perpendicular
//! bisector of `g_i g_j`. A point's *characteristic vector* records, for each
//! pair in canonical order `(1,2), (1,3), (2,3), (1,4), …`, the sign of
//! `‖p − g_i‖ − ‖p − g_j‖`. Points sharing a vector form a region; the room
//! is partitioned into regions by sampling it on a regular grid.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, RoomGeometry};

/// Smallest grid side accepted by [`enumerate_regions`].
pub const MIN_REGION_GRID: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct SensorArray {
    positions: Vec<Point>,
}

impl SensorArray {
    /// At least two pairwise-distinct sensors.
    pub fn new(positions: Vec<Point>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "sensors",
                reason: format!("need at least 2 sensors, got {}", positions.len()),
            });
        }
        for (j, b) in positions.iter().enumerate() {
            if !(b.x.is_finite() && b.y.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "sensors",
                    reason: format!("sensor {} has a non-finite coordinate", j + 1),
                });
            }
            if let Some(i) = positions[..j].iter().position(|a| a == b) {
                return Err(Error::InvalidParameter {
                    name: "sensors",
                    reason: format!("sensors {} and {} coincide", i + 1, j + 1),
                });
            }
        }
        Ok(Self { positions })
    }

    /// Regular `nx x ny` layout with the given margin from the walls.
    pub fn lattice(room: &RoomGeometry, nx: usize, ny: usize, margin: f64) -> Result<Self> {
        let inner = RoomGeometry::new(room.lx - 2.0 * margin, room.ly - 2.0 * margin)?;
        let points = inner
            .lattice(nx, ny)?
            .into_iter()
            .map(|p| Point::new(p.x + margin, p.y + margin))
            .collect();
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn pair_count(&self) -> usize {
        pair_count(self.len())
    }

    pub fn require_inside(&self, room: &RoomGeometry) -> Result<()> {
        for p in &self.positions {
            if !room.covers(*p) {
                return Err(Error::SourceOutsideRoom { x: p.x, y: p.y });
            }
        }
        Ok(())
    }

    pub fn distances(&self, p: Point) -> Vec<f64> {
        self.positions.iter().map(|g| g.distance(p)).collect()
    }
}

impl TryFrom<Vec<Point>> for SensorArray {
    type Error = Error;

    fn try_from(positions: Vec<Point>) -> Result<Self> {
        Self::new(positions)
    }
}

impl From<SensorArray> for Vec<Point> {
    fn from(s: SensorArray) -> Self {
        s.positions
    }
}

pub const fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Canonical index `l = (j−2)(j−1)/2 + i` of the 1-based pair `i < j`.
pub fn pair_index(i: usize, j: usize, n: usize) -> Result<usize> {
    if i == 0 || i >= j || j > n {
        return Err(Error::BadPair { i, j, n });
    }
    Ok((j - 2) * (j - 1) / 2 + i)
}

/// 0-based pairs `(i, j)` in canonical order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..n).flat_map(|j| (0..j).map(move |i| (i, j)))
}

/// A ±1 codeword of length `N(N−1)/2`, packed one bit per pair
/// (bit set ⇔ entry is −1).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CharacteristicVector {
    len: usize,
    words: Vec<u64>,
}

impl CharacteristicVector {
    fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    /// Builds the codeword from per-pair values through `sgn`, with
    /// `sgn(0) = +1`.
    pub fn from_differences<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let mut z = Self::zeros(values.len());
        for (l, v) in values.iter().enumerate() {
            if *v < 0.0 {
                z.words[l / 64] |= 1 << (l % 64);
            }
        }
        z
    }

    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let mut z = Self::zeros(signs.len());
        for (l, &s) in signs.iter().enumerate() {
            match s {
                1 => {}
                -1 => z.words[l / 64] |= 1 << (l % 64),
                other => {
                    return Err(Error::Parse(format!(
                        "codeword entry {l} is {other}, expected ±1"
                    )))
                }
            }
        }
        Ok(z)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Entry `l` (0-based) as ±1.
    pub fn get(&self, l: usize) -> i8 {
        assert!(
            l < self.len,
            "index {l} out of range for codeword of length {}",
            self.len
        );
        if self.words[l / 64] >> (l % 64) & 1 == 1 {
            -1
        } else {
            1
        }
    }

    pub fn signs(&self) -> Vec<i8> {
        (0..self.len).map(|l| self.get(l)).collect()
    }

    /// Flips entry `l`.
    pub fn flip(&mut self, l: usize) {
        assert!(l < self.len);
        self.words[l / 64] ^= 1 << (l % 64);
    }

    pub fn negated(&self) -> Self {
        let mut z = self.clone();
        for l in 0..self.len {
            z.flip(l);
        }
        z
    }

    pub fn hamming(&self, other: &Self) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    fn hamming_unchecked(&self, other: &Self) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }
}

impl fmt::Display for CharacteristicVector {
    /// One character per entry: `+` or `-`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in 0..self.len {
            f.write_str(if self.get(l) > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for CharacteristicVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .map(|ch| match ch {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("unexpected codeword character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::from_signs(&signs)
    }
}

pub fn hamming(z1: &CharacteristicVector, z2: &CharacteristicVector) -> Result<usize> {
    z1.hamming(z2)
}

/// `z(l) = sgn(‖p − g_i‖ − ‖p − g_j‖)` over canonical pairs.
pub fn characteristic_vector(p: Point, sensors: &SensorArray) -> CharacteristicVector {
    let d = sensors.distances(p);
    CharacteristicVector::from_differences(pairs(sensors.len()).map(|(i, j)| d[i] - d[j]))
}

/// Region count of `N(N−1)/2` lines in general position:
/// `(N⁴ − 2N³ + 3N² − 2N)/8 + 1`.
pub fn region_upper_bound(n: usize) -> u64 {
    let n = n as u64;
    (n.pow(4) - 2 * n.pow(3) + 3 * n * n - 2 * n) / 8 + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: usize,
    pub codeword: CharacteristicVector,
    pub centroid: Point,
    pub cell_count: usize,
}

/// Result of matching a measured codeword against the codebook.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    /// Ids of every region at minimal Hamming distance, ascending.
    pub region_ids: Vec<usize>,
    pub distance: usize,
}

/// The enumerated regions of a sensor layout in a room.
#[derive(Debug, Clone)]
pub struct RegionMap {
    regions: Vec<Region>,
    grid: (usize, usize),
    room: RoomGeometry,
    sensors: SensorArray,
    /// Region id of each grid cell, row-major; empty when loaded from disk.
    labels: Vec<u32>,
}

impl RegionMap {
    /// Reassembles a map from stored regions. Ids must be `0..len` in order.
    pub fn from_parts(
        regions: Vec<Region>,
        grid: (usize, usize),
        room: RoomGeometry,
        sensors: SensorArray,
    ) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::EmptyMap);
        }
        let width = sensors.pair_count();
        let mut seen = HashMap::with_capacity(regions.len());
        for (k, r) in regions.iter().enumerate() {
            if r.id != k {
                return Err(Error::Parse(format!(
                    "region ids must be 0..n in order, found {} at {k}",
                    r.id
                )));
            }
            if r.codeword.len() != width {
                return Err(Error::LengthMismatch {
                    expected: width,
                    actual: r.codeword.len(),
                });
            }
            if seen.insert(r.codeword.clone(), k).is_some() {
                return Err(Error::Parse(format!("duplicate codeword for region {k}")));
            }
        }
        Ok(Self {
            regions,
            grid,
            room,
            sensors,
            labels: Vec::new(),
        })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn grid_resolution(&self) -> (usize, usize) {
        self.grid
    }

    pub fn room(&self) -> &RoomGeometry {
        &self.room
    }

    pub fn sensors(&self) -> &SensorArray {
        &self.sensors
    }

    /// Per-cell region ids (row-major), if the map was enumerated in-process.
    pub fn cell_labels(&self) -> Option<&[u32]> {
        (!self.labels.is_empty()).then_some(self.labels.as_slice())
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        self.room.cell_center(self.grid.0, self.grid.1, ix, iy)
    }

    /// Region whose codeword equals `p`'s characteristic vector.
    pub fn region_containing(&self, p: Point) -> Option<usize> {
        let z = characteristic_vector(p, &self.sensors);
        self.regions.iter().position(|r| r.codeword == z)
    }

    pub fn decode(&self, z: &CharacteristicVector) -> Result<Decoded> {
        let first = self.regions.first().ok_or(Error::EmptyMap)?;
        if z.len() != first.codeword.len() {
            return Err(Error::LengthMismatch {
                expected: first.codeword.len(),
                actual: z.len(),
            });
        }
        let mut best = usize::MAX;
        let mut ids = Vec::new();
        for r in &self.regions {
            let h = r.codeword.hamming_unchecked(z);
            if h < best {
                best = h;
                ids.clear();
            }
            if h == best {
                ids.push(r.id);
            }
        }
        Ok(Decoded {
            region_ids: ids,
            distance: best,
        })
    }
}

/// `M_r`: every region at minimal Hamming distance from `z_s`.
pub fn decode(z_s: &CharacteristicVector, map: &RegionMap) -> Result<Vec<usize>> {
    map.decode(z_s).map(|d| d.region_ids)
}

/// Classifies the centre of every cell of an `nx x ny` partition of the room
/// and groups cells by codeword. Region ids follow first appearance in
/// row-major order; centroids are cell-centre means.
pub fn enumerate_regions(
    room: &RoomGeometry,
    sensors: &SensorArray,
    grid: (usize, usize),
) -> Result<RegionMap> {
    let (nx, ny) = grid;
    if nx < MIN_REGION_GRID || ny < MIN_REGION_GRID {
        return Err(Error::DegenerateGrid {
            nx,
            ny,
            min: MIN_REGION_GRID,
        });
    }
    room.validate()?;
    sensors.require_inside(room)?;

    let rows: Vec<Vec<CharacteristicVector>> = (0..ny)
        .into_par_iter()
        .map(|iy| {
            (0..nx)
                .map(|ix| characteristic_vector(room.cell_center(nx, ny, ix, iy), sensors))
                .collect()
        })
        .collect();

    let mut index: HashMap<CharacteristicVector, u32> = HashMap::new();
    let mut sums: Vec<(f64, f64, usize)> = Vec::new();
    let mut codewords = Vec::new();
    let mut labels = Vec::with_capacity(nx * ny);
    for (iy, row) in rows.into_iter().enumerate() {
        for (ix, z) in row.into_iter().enumerate() {
            let next = codewords.len() as u32;
            let id = *index.entry(z.clone()).or_insert_with(|| {
                codewords.push(z);
                sums.push((0.0, 0.0, 0));
                next
            });
            let c = room.cell_center(nx, ny, ix, iy);
            let s = &mut sums[id as usize];
            s.0 += c.x;
            s.1 += c.y;
            s.2 += 1;
            labels.push(id);
        }
    }

    let regions = codewords
        .into_iter()
        .zip(sums)
        .enumerate()
        .map(|(id, (codeword, (sx, sy, n)))| Region {
            id,
            codeword,
            centroid: Point::new(sx / n as f64, sy / n as f64),
            cell_count: n,
        })
        .collect();

    Ok(RegionMap {
        regions,
        grid,
        room: *room,
        sensors: sensors.clone(),
        labels,
    })
}
