//! Uniform Cartesian grids with two or three active axes.
//!
//! A 2D grid is a 3D grid with a single node along `z`, so positions and
//! increments are always [`Vec3`] and the same stencil code serves both
//! dimensions.

use crate::error::{Error, Result};
use crate::Vec3;

/// Axis-aligned box, used for domain bounds and blow-up guards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub min: Vec3,
    pub max: Vec3,
}

impl Box3 {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Box3 { min, max }
    }

    /// Containment test that ignores the `z` axis when `dim == 2`.
    pub fn contains(&self, x: &Vec3, dim: usize) -> bool {
        let mut ok = x.x >= self.min.x && x.x <= self.max.x && x.y >= self.min.y && x.y <= self.max.y;
        if dim == 3 {
            ok = ok && x.z >= self.min.z && x.z <= self.max.z;
        }
        ok
    }

    /// Box scaled about its center by `factor` per active axis.
    pub fn inflate(&self, factor: f64, dim: usize) -> Box3 {
        let c = (self.min + self.max) * 0.5;
        let mut half = (self.max - self.min) * (0.5 * factor);
        if dim == 2 {
            half.z = 0.0;
        }
        Box3 { min: c - half, max: c + half }
    }

    pub fn widths(&self) -> Vec3 {
        self.max - self.min
    }
}

/// Uniform node-centered grid. `n[2] == 1` marks a 2D grid; the spacing is
/// the same along every active axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub origin: Vec3,
    pub h: f64,
    pub n: [usize; 3],
}

/// Widest stencil in the crate needs this many nodes per axis.
pub const MIN_NODES: usize = 4;

impl Grid {
    pub fn new(dim: usize, origin: Vec3, h: f64, n: [usize; 3]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::BadDimension(dim));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::NotPositive { what: "grid spacing", value: h });
        }
        let n = if dim == 2 { [n[0], n[1], 1] } else { n };
        for ax in 0..dim {
            if n[ax] < MIN_NODES {
                return Err(Error::GridTooSmall { min: MIN_NODES, got: n[ax] });
            }
        }
        let mut origin = origin;
        if dim == 2 {
            origin.z = 0.0;
        }
        Ok(Grid { dim, origin, h, n })
    }

    pub fn new_2d(origin: [f64; 2], h: f64, nx: usize, ny: usize) -> Result<Self> {
        Grid::new(2, Vec3::new(origin[0], origin[1], 0.0), h, [nx, ny, 1])
    }

    pub fn new_3d(origin: [f64; 3], h: f64, n: [usize; 3]) -> Result<Self> {
        Grid::new(3, Vec3::new(origin[0], origin[1], origin[2]), h, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index, `x` fastest.
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.n[1] + j) * self.n[0] + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let j = (idx / self.n[0]) % self.n[1];
        let k = idx / (self.n[0] * self.n[1]);
        [i, j, k]
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin.x + self.h * i as f64,
            self.origin.y + self.h * j as f64,
            self.origin.z + self.h * k as f64,
        )
    }

    pub fn bounds(&self) -> Box3 {
        let max = self.node(self.n[0] - 1, self.n[1] - 1, self.n[2] - 1);
        Box3 { min: self.origin, max }
    }

    /// True when `(i, j, k)` touches the domain boundary along an active axis.
    pub fn on_boundary(&self, i: usize, j: usize, k: usize) -> bool {
        let mut edge = i == 0 || i + 1 == self.n[0] || j == 0 || j + 1 == self.n[1];
        if self.dim == 3 {
            edge = edge || k == 0 || k + 1 == self.n[2];
        }
        edge
    }

    /// Cell containing `x` plus the interpolation fractions inside it, with
    /// the top faces mapped into the last cell so the domain boundary is
    /// still interpolable.
    pub fn cell_of(&self, x: &Vec3) -> Result<([usize; 3], [f64; 3])> {
        if !self.bounds().contains(x, self.dim) {
            return Err(Error::OutOfDomain { x: *x });
        }
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let rel = (x - self.origin) / self.h;
        let r = [rel.x, rel.y, rel.z];
        for ax in 0..self.dim {
            let top = self.n[ax] - 1;
            let mut c = r[ax].floor() as isize;
            if c < 0 {
                c = 0;
            }
            let mut c = c as usize;
            if c >= top {
                c = top - 1;
            }
            base[ax] = c;
            frac[ax] = (r[ax] - c as f64).clamp(0.0, 1.0);
        }
        Ok((base, frac))
    }

    /// Nearest node to `x` (clamped into the domain).
    pub fn nearest_node(&self, x: &Vec3) -> [usize; 3] {
        let rel = (x - self.origin) / self.h;
        let r = [rel.x, rel.y, rel.z];
        let mut out = [0usize; 3];
        for ax in 0..self.dim {
            let c = r[ax].round();
            out[ax] = c.clamp(0.0, (self.n[ax] - 1) as f64) as usize;
        }
        out
    }
}
