use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};

/// A position on the plate, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Rectangular room `[0, lx] x [0, ly]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomGeometry {
    pub lx: f64,
    pub ly: f64,
}

impl RoomGeometry {
    pub fn new(lx: f64, ly: f64) -> Result<Self> {
        let room = Self { lx, ly };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("room.lx", self.lx)?;
        ensure_positive("room.ly", self.ly)
    }

    /// Strict interior test.
    pub fn contains(&self, p: Point) -> bool {
        p.x > 0.0 && p.x < self.lx && p.y > 0.0 && p.y < self.ly
    }

    /// Closed bounding-box test (boundary included).
    pub fn covers(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.lx && p.y >= 0.0 && p.y <= self.ly
    }

    pub fn require_inside(&self, p: Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::SourceOutsideRoom { x: p.x, y: p.y })
        }
    }

    /// Regular lattice including the walls, row-major from the origin
    /// (`index = iy * nx + ix`). This is the search grid of the localizers.
    pub fn lattice(&self, nx: usize, ny: usize) -> Result<Vec<Point>> {
        if nx < 2 || ny < 2 {
            return Err(Error::DegenerateGrid { nx, ny, min: 2 });
        }
        let sx = self.lx / (nx - 1) as f64;
        let sy = self.ly / (ny - 1) as f64;
        Ok((0..ny)
            .flat_map(|iy| (0..nx).map(move |ix| Point::new(ix as f64 * sx, iy as f64 * sy)))
            .collect())
    }

    /// Centre of cell `(ix, iy)` when the room is cut into `nx x ny` cells.
    pub fn cell_center(&self, nx: usize, ny: usize, ix: usize, iy: usize) -> Point {
        Point::new(
            (ix as f64 + 0.5) * self.lx / nx as f64,
            (iy as f64 + 0.5) * self.ly / ny as f64,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_spacing_matches_room_over_intervals() {
        let room = RoomGeometry::new(10.0, 10.0).unwrap();
        let grid = room.lattice(25, 25).unwrap();
        assert_eq!(grid.len(), 625);
        assert_eq!(grid[0], Point::new(0.0, 0.0));
        assert!((grid[1].x - 10.0 / 24.0).abs() < 1e-12);
        assert!((grid[624].x - 10.0).abs() < 1e-12 && (grid[624].y - 10.0).abs() < 1e-12);
        // row-major: second row starts at index nx
        assert_eq!(grid[25].x, 0.0);
        assert!(grid[25].y > 0.0);
    }

    #[test]
    fn interior_is_strict() {
        let room = RoomGeometry::new(3.6, 5.4).unwrap();
        assert!(room.contains(Point::new(0.9, 1.35)));
        assert!(!room.contains(Point::new(0.0, 1.0)));
        assert!(room.covers(Point::new(0.0, 1.0)));
        assert!(matches!(
            room.require_inside(Point::new(4.0, 1.0)),
            Err(Error::SourceOutsideRoom { .. })
        ));
    }

    #[test]
    fn rejects_non_positive_room() {
        assert!(RoomGeometry::new(0.0, 1.0).is_err());
        assert!(RoomGeometry::new(1.0, f64::NAN).is_err());
    }
}
