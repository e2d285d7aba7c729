use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Point, Real};

/// Uniform Cartesian grid; cell `(i, j)` is
/// `[ox + i dx, ox + (i+1) dx) × [oy + j dy, oy + (j+1) dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
    /// Lower-left corner of cell `(0, 0)`.
    pub origin: Point<T>,
}

impl<T: Real> Grid2D<T> {
    pub fn new(nx: usize, ny: usize, dx: T, dy: T, origin: Point<T>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("grid needs at least one cell per axis".into()));
        }
        if !(dx > T::zero() && dy > T::zero()) || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cell sizes must be positive, got dx={dx}, dy={dy}"
            )));
        }
        Ok(Grid2D { nx, ny, dx, dy, origin })
    }

    /// Square cells of side `h` covering `[lo, hi]²` (rounded up to whole cells).
    pub fn square_box(lo: T, hi: T, h: T) -> Result<Self> {
        let n = ((hi - lo) / h - T::lit(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
        Self::new(n, n, h, h, [lo, lo])
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point<T> {
        let half = T::lit(0.5);
        [
            self.origin[0] + (T::from_usize(i).unwrap() + half) * self.dx,
            self.origin[1] + (T::from_usize(j).unwrap() + half) * self.dy,
        ]
    }

    /// Cell bounds `(x0, x1, y0, y1)`.
    pub fn bounds(&self, i: usize, j: usize) -> (T, T, T, T) {
        let x0 = self.origin[0] + T::from_usize(i).unwrap() * self.dx;
        let y0 = self.origin[1] + T::from_usize(j).unwrap() * self.dy;
        (x0, x0 + self.dx, y0, y0 + self.dy)
    }

    /// Cell containing `x`, with half-open cells.
    pub fn locate(&self, x: Point<T>) -> Option<(usize, usize)> {
        let fi = ((x[0] - self.origin[0]) / self.dx).floor();
        let fj = ((x[1] - self.origin[1]) / self.dy).floor();
        if fi < T::zero() || fj < T::zero() {
            return None;
        }
        let (i, j) = (fi.to_usize()?, fj.to_usize()?);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Upper-right corner of the computational box.
    pub fn upper(&self) -> Point<T> {
        [
            self.origin[0] + T::from_usize(self.nx).unwrap() * self.dx,
            self.origin[1] + T::from_usize(self.ny).unwrap() * self.dy,
        ]
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.dx == other.dx
            && self.dy == other.dy
            && self.origin == other.origin
    }
}

/// Serialized grid in run configs and snapshot sidecars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn build<T: Real>(&self) -> Result<Grid2D<T>> {
        Grid2D::new(
            self.nx,
            self.ny,
            T::lit(self.dx),
            T::lit(self.dy),
            [T::lit(self.origin[0]), T::lit(self.origin[1])],
        )
        .map_err(|e| Error::config("grid", e.to_string()))
    }

    pub fn from_grid<T: Real>(g: &Grid2D<T>) -> Self {
        GridSpec {
            nx: g.nx,
            ny: g.ny,
            dx: g.dx.to_f64_lossy(),
            dy: g.dy.to_f64_lossy(),
            origin: [g.origin[0].to_f64_lossy(), g.origin[1].to_f64_lossy()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_is_half_open() {
        let g = Grid2D::new(4, 2, 0.5, 1.0, [0.0, 0.0]).unwrap();
        assert_eq!(g.locate([0.0, 0.0]), Some((0, 0)));
        assert_eq!(g.locate([0.49, 0.99]), Some((0, 0)));
        assert_eq!(g.locate([0.5, 1.0]), Some((1, 1)));
        assert_eq!(g.locate([2.0, 0.5]), None);
        assert_eq!(g.locate([-1e-12, 0.5]), None);
        assert_eq!(g.center(3, 1), [1.75, 1.5]);
    }

    #[test]
    fn square_box_covers_interval() {
        let g = Grid2D::square_box(-0.5, 1.5, 0.01).unwrap();
        assert_eq!((g.nx, g.ny), (200, 200));
        assert!(Grid2D::<f64>::new(0, 1, 1.0, 1.0, [0.0, 0.0]).is_err());
        assert!(Grid2D::<f64>::new(1, 1, 0.0, 1.0, [0.0, 0.0]).is_err());
    }
}
