//! Uniform grids, circle-valued angle fields and their finite differences.
//!
//! Angles are stored as arbitrary real representatives of classes in
//! `R / 2πZ`. Every difference between two stored values goes through
//! [`wrapped_diff`], so derived quantities never see a branch cut.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Sym2, Vec2};

/// Representative of `a` in `(-π, π]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Shortest signed arc from `b` to `a`, in `(-π, π]`.
#[inline]
pub fn wrapped_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Distance between two unoriented directions, in `[0, π/2]`.
#[inline]
pub fn wrapped_diff_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// The moving frame `V1 = (cos θ, sin θ)`, `V2 = J V1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub v1: Vec2,
    pub v2: Vec2,
}

#[inline]
pub fn frame_at(theta: f64) -> Frame {
    let v1 = Vec2::from_angle(theta);
    Frame {
        v1,
        v2: v1.rotate90(),
    }
}

/// Uniform square-cell grid; node `(i, j)` sits at `origin + (i h, j h)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    origin: Vec2,
    h: f64,
    nx: usize,
    ny: usize,
}

impl Grid2D {
    pub fn new(origin: Vec2, h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::Config(format!(
                "grid needs at least 3x3 nodes, got {nx}x{ny}"
            )));
        }
        if !origin.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Grid covering `[xmin, xmax] x [ymin, ymax]` with spacing `h`. Both
    /// extents must be whole multiples of `h`.
    pub fn from_window(xmin: f64, xmax: f64, ymin: f64, ymax: f64, h: f64) -> Result<Self> {
        let cells = |lo: f64, hi: f64| -> Result<usize> {
            let n = (hi - lo) / h;
            let r = n.round();
            if r < 2.0 || (n - r).abs() > 1e-9 * r.max(1.0) {
                return Err(Error::Config(format!(
                    "window [{lo}, {hi}] is not a whole number (>= 2) of cells of size {h}"
                )));
            }
            Ok(r as usize)
        };
        let nx = cells(xmin, xmax)? + 1;
        let ny = cells(ymin, ymax)? + 1;
        Self::new(Vec2::new(xmin, ymin), h, nx, ny)
    }

    #[inline]
    pub fn origin(&self) -> Vec2 {
        self.origin
    }
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }
    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + i as f64 * self.h,
            self.origin.y + j as f64 * self.h,
        )
    }

    pub fn max_corner(&self) -> Vec2 {
        self.node(self.nx - 1, self.ny - 1)
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && i + 1 < self.nx && j + 1 < self.ny
    }

    /// True if `p` lies inside the bounding box shrunk by `margin` on every side.
    pub fn contains(&self, p: Vec2, margin: f64) -> bool {
        let hi = self.max_corner();
        p.x >= self.origin.x + margin
            && p.x <= hi.x - margin
            && p.y >= self.origin.y + margin
            && p.y <= hi.y - margin
    }

    /// Cell containing `p` and the local coordinates `(ξ, η) ∈ [0,1]²`.
    pub fn locate(&self, p: Vec2) -> Result<(usize, usize, f64, f64)> {
        let fx = (p.x - self.origin.x) / self.h;
        let fy = (p.y - self.origin.y) / self.h;
        let lim_x = (self.nx - 1) as f64;
        let lim_y = (self.ny - 1) as f64;
        let slack = 1e-9;
        if !(fx >= -slack && fx <= lim_x + slack && fy >= -slack && fy <= lim_y + slack) {
            return Err(Error::out_of_domain(p));
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 2);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 2);
        Ok((i, j, (fx - i as f64).clamp(0.0, 1.0), (fy - j as f64).clamp(0.0, 1.0)))
    }

    /// Nearest node to `p` (clamped to the grid).
    pub fn nearest_node(&self, p: Vec2) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.h).round();
        let fy = ((p.y - self.origin.y) / self.h).round();
        (
            (fx.max(0.0) as usize).min(self.nx - 1),
            (fy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Iterator over all `(i, j)` in row-major order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| (i, j)))
    }
}

/// How stencils treat the grid edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Indexing {
    /// Only interior nodes have a stencil.
    Interior,
    /// Indices wrap around in both directions.
    Periodic,
}

/// The 3x3 block of values around a node, row-major from the south-west.
#[derive(Clone, Copy, Debug)]
pub struct Stencil3 {
    v: [f64; 9],
    h: f64,
}

impl Stencil3 {
    #[inline]
    pub fn center(&self) -> f64 {
        self.v[4]
    }

    /// `((θ_e ⊖ θ_w) / 2h, (θ_n ⊖ θ_s) / 2h)`.
    #[inline]
    pub fn gradient(&self) -> Vec2 {
        let v = &self.v;
        Vec2::new(
            wrapped_diff(v[5], v[3]) / (2.0 * self.h),
            wrapped_diff(v[7], v[1]) / (2.0 * self.h),
        )
    }

    /// Second differences, every neighbour lifted against the center value.
    #[inline]
    pub fn hessian(&self) -> Sym2 {
        let v = &self.v;
        let c = v[4];
        let d = |k: usize| wrapped_diff(v[k], c);
        let h2 = self.h * self.h;
        Sym2 {
            xx: (d(5) + d(3)) / h2,
            yy: (d(7) + d(1)) / h2,
            xy: (d(8) - d(2) - d(6) + d(0)) / (4.0 * h2),
        }
    }
}

/// A circle-valued function on the nodes of a [`Grid2D`] at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleField {
    grid: Grid2D,
    values: Vec<f64>,
    time: f64,
}

impl AngleField {
    pub fn new(grid: Grid2D, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, time })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid2D, time: f64, f: impl Fn(Vec2) -> f64) -> Self {
        let values = grid.nodes().map(|(i, j)| f(grid.node(i, j))).collect();
        Self { grid, values, time }
    }

    /// Fallible variant of [`AngleField::from_fn`].
    pub fn try_from_fn(grid: Grid2D, time: f64, f: impl Fn(Vec2) -> Result<f64>) -> Result<Self> {
        let values = grid
            .nodes()
            .map(|(i, j)| f(grid.node(i, j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid, values, time })
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Same classes, every value replaced by its `(-π, π]` representative.
    pub fn renormalized(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&a| wrap_angle(a)).collect(),
            time: self.time,
        }
    }

    /// Adds `shift` to every value.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&a| a + shift).collect(),
            time: self.time,
        }
    }

    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().enumerate().map(|(k, &a)| f(k, a)).collect(),
            time: self.time,
        }
    }

    pub fn stencil(&self, i: usize, j: usize, indexing: Indexing) -> Result<Stencil3> {
        let g = &self.grid;
        if i >= g.nx || j >= g.ny {
            return Err(Error::BoundaryNode { i, j });
        }
        let mut v = [0.0; 9];
        match indexing {
            Indexing::Interior => {
                if !g.is_interior(i, j) {
                    return Err(Error::BoundaryNode { i, j });
                }
                for dj in 0..3 {
                    for di in 0..3 {
                        v[dj * 3 + di] = self.value(i + di - 1, j + dj - 1);
                    }
                }
            }
            Indexing::Periodic => {
                for dj in 0..3 {
                    let jj = (j + g.ny + dj - 1) % g.ny;
                    for di in 0..3 {
                        let ii = (i + g.nx + di - 1) % g.nx;
                        v[dj * 3 + di] = self.value(ii, jj);
                    }
                }
            }
        }
        Ok(Stencil3 { v, h: g.h })
    }

    /// Central-difference gradient at an interior node.
    pub fn central_gradient(&self, i: usize, j: usize) -> Result<Vec2> {
        Ok(self.stencil(i, j, Indexing::Interior)?.gradient())
    }

    /// Central-difference Hessian `(θ11, θ12, θ22)` at an interior node.
    pub fn central_hessian(&self, i: usize, j: usize) -> Result<Sym2> {
        Ok(self.stencil(i, j, Indexing::Interior)?.hessian())
    }

    /// Gradient at any node: central where possible, second-order one-sided
    /// on the edges.
    pub fn nodal_gradient(&self, i: usize, j: usize) -> Vec2 {
        let g = &self.grid;
        let c = self.value(i, j);
        let d = |ii: usize, jj: usize| wrapped_diff(self.value(ii, jj), c);
        let h2 = 2.0 * g.h;
        let gx = if i == 0 {
            (4.0 * d(1, j) - d(2, j)) / h2
        } else if i + 1 == g.nx {
            -(4.0 * d(i - 1, j) - d(i - 2, j)) / h2
        } else {
            wrapped_diff(self.value(i + 1, j), self.value(i - 1, j)) / h2
        };
        let gy = if j == 0 {
            (4.0 * d(i, 1) - d(i, 2)) / h2
        } else if j + 1 == g.ny {
            -(4.0 * d(i, j - 1) - d(i, j - 2)) / h2
        } else {
            wrapped_diff(self.value(i, j + 1), self.value(i, j - 1)) / h2
        };
        Vec2::new(gx, gy)
    }

    /// Nodal gradients of the whole field, indexed like the values.
    pub fn gradient_field(&self) -> Vec<Vec2> {
        self.grid
            .nodes()
            .map(|(i, j)| self.nodal_gradient(i, j))
            .collect()
    }

    /// Bilinear interpolation in a local lift anchored at the cell's
    /// lower-left corner; result in `(-π, π]`.
    pub fn interp_angle(&self, p: Vec2) -> Result<f64> {
        let (i, j, xi, eta) = self.grid.locate(p)?;
        let a00 = self.value(i, j);
        let a10 = a00 + wrapped_diff(self.value(i + 1, j), a00);
        let a01 = a00 + wrapped_diff(self.value(i, j + 1), a00);
        let a11 = a00 + wrapped_diff(self.value(i + 1, j + 1), a00);
        let v = (1.0 - xi) * (1.0 - eta) * a00
            + xi * (1.0 - eta) * a10
            + (1.0 - xi) * eta * a01
            + xi * eta * a11;
        Ok(wrap_angle(v))
    }

    /// Bilinear interpolation of the nodal gradients.
    pub fn interp_gradient(&self, p: Vec2) -> Result<Vec2> {
        let (i, j, xi, eta) = self.grid.locate(p)?;
        Ok(bilinear_vec(
            [
                self.nodal_gradient(i, j),
                self.nodal_gradient(i + 1, j),
                self.nodal_gradient(i, j + 1),
                self.nodal_gradient(i + 1, j + 1),
            ],
            xi,
            eta,
        ))
    }
}

/// Bilinear blend of corner vectors `[00, 10, 01, 11]`.
#[inline]
pub(crate) fn bilinear_vec(c: [Vec2; 4], xi: f64, eta: f64) -> Vec2 {
    c[0] * ((1.0 - xi) * (1.0 - eta))
        + c[1] * (xi * (1.0 - eta))
        + c[2] * ((1.0 - xi) * eta)
        + c[3] * (xi * eta)
}
