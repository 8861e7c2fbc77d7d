//! Off-grid access to angle fields, exact or sampled.

use crate::catalog::CatalogSolution;
use crate::error::{Error, Result};
use crate::field::{bilinear_vec, wrap_angle, wrapped_diff, AngleField};
use crate::geom::{Vec2, Window};

/// Ratio of the safe tracing margin to the grid spacing.
pub const SAFE_MARGIN_CELLS: f64 = 2.0;

/// Something that can report `θ(p, t)` and its spatial gradient anywhere in
/// its domain.
pub trait AngleSource: Sync {
    fn angle(&self, p: Vec2, t: f64) -> Result<f64>;

    fn gradient(&self, p: Vec2, t: f64) -> Result<Vec2>;

    /// `∂θ/∂t` at fixed `p`.
    fn time_derivative(&self, _p: Vec2, _t: f64) -> Result<f64> {
        Ok(0.0)
    }

    /// Whether `p` lies in the region where trajectories may continue.
    fn inside(&self, p: Vec2) -> bool;

    /// `∇θ · V1`, the curvature of the leaf through `p`.
    fn leaf_curvature(&self, p: Vec2, t: f64) -> Result<f64> {
        let th = self.angle(p, t)?;
        Ok(self.gradient(p, t)?.dot(Vec2::from_angle(th)))
    }
}

impl AngleSource for CatalogSolution {
    fn angle(&self, p: Vec2, t: f64) -> Result<f64> {
        self.eval_angle(p, t)
    }

    fn gradient(&self, p: Vec2, _t: f64) -> Result<Vec2> {
        CatalogSolution::gradient(self, p)
    }

    fn inside(&self, p: Vec2) -> bool {
        match self {
            CatalogSolution::Polar { .. } => p.is_finite() && p.norm() > 1e-6,
            _ => p.is_finite(),
        }
    }
}

/// An exact source restricted to a window.
#[derive(Clone, Copy, Debug)]
pub struct Clipped<S> {
    pub inner: S,
    pub window: Window,
}

impl<S: AngleSource> AngleSource for Clipped<S> {
    fn angle(&self, p: Vec2, t: f64) -> Result<f64> {
        if !self.window.contains(p, 0.0) {
            return Err(Error::out_of_domain(p));
        }
        self.inner.angle(p, t)
    }

    fn gradient(&self, p: Vec2, t: f64) -> Result<Vec2> {
        if !self.window.contains(p, 0.0) {
            return Err(Error::out_of_domain(p));
        }
        self.inner.gradient(p, t)
    }

    fn time_derivative(&self, p: Vec2, t: f64) -> Result<f64> {
        self.inner.time_derivative(p, t)
    }

    fn inside(&self, p: Vec2) -> bool {
        self.window.contains(p, 0.0) && self.inner.inside(p)
    }
}

impl AngleSource for AngleField {
    fn angle(&self, p: Vec2, _t: f64) -> Result<f64> {
        self.interp_angle(p)
    }

    fn gradient(&self, p: Vec2, _t: f64) -> Result<Vec2> {
        self.interp_gradient(p)
    }

    fn inside(&self, p: Vec2) -> bool {
        self.grid().contains(p, SAFE_MARGIN_CELLS * self.grid().spacing())
    }
}

/// Time series of snapshots on one grid, linearly interpolated in time.
#[derive(Clone, Debug)]
pub struct FieldSeries {
    fields: Vec<AngleField>,
    gradients: Vec<Vec<Vec2>>,
}

impl FieldSeries {
    pub fn new(fields: Vec<AngleField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Config("empty field series".into()));
        }
        let grid = *fields[0].grid();
        for w in fields.windows(2) {
            if w[1].grid() != &grid {
                return Err(Error::Config("snapshots live on different grids".into()));
            }
            if w[1].time() <= w[0].time() {
                return Err(Error::Config("snapshot times must increase".into()));
            }
        }
        let gradients = fields.iter().map(AngleField::gradient_field).collect();
        Ok(Self { fields, gradients })
    }

    /// A stationary field repeated at the given times.
    pub fn stationary(field: &AngleField, times: &[f64]) -> Result<Self> {
        Self::new(times.iter().map(|&t| field.clone().with_time(t)).collect())
    }

    pub fn fields(&self) -> &[AngleField] {
        &self.fields
    }

    pub fn times(&self) -> Vec<f64> {
        self.fields.iter().map(AngleField::time).collect()
    }

    pub fn t_start(&self) -> f64 {
        self.fields[0].time()
    }

    pub fn t_end(&self) -> f64 {
        self.fields[self.fields.len() - 1].time()
    }

    /// Bracketing snapshot index `k` and weight `w` with `t = (1-w) t_k + w t_{k+1}`.
    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let n = self.fields.len();
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-9 * (t1 - t0).abs().max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::Config(format!(
                "time {t} outside the snapshot range [{t0}, {t1}]"
            )));
        }
        if n == 1 {
            return Ok((0, 0.0));
        }
        let k = self
            .fields
            .partition_point(|f| f.time() <= t)
            .saturating_sub(1)
            .min(n - 2);
        let (ta, tb) = (self.fields[k].time(), self.fields[k + 1].time());
        Ok((k, ((t - ta) / (tb - ta)).clamp(0.0, 1.0)))
    }

    fn angle_at(&self, k: usize, p: Vec2) -> Result<f64> {
        self.fields[k].interp_angle(p)
    }

    fn gradient_at(&self, k: usize, p: Vec2) -> Result<Vec2> {
        let f = &self.fields[k];
        let g = f.grid();
        let (i, j, xi, eta) = g.locate(p)?;
        let gr = &self.gradients[k];
        Ok(bilinear_vec(
            [
                gr[g.index(i, j)],
                gr[g.index(i + 1, j)],
                gr[g.index(i, j + 1)],
                gr[g.index(i + 1, j + 1)],
            ],
            xi,
            eta,
        ))
    }
}

impl AngleSource for FieldSeries {
    fn angle(&self, p: Vec2, t: f64) -> Result<f64> {
        let (k, w) = self.bracket(t)?;
        let a = self.angle_at(k, p)?;
        if w == 0.0 {
            return Ok(a);
        }
        let b = self.angle_at(k + 1, p)?;
        Ok(wrap_angle(a + w * wrapped_diff(b, a)))
    }

    fn gradient(&self, p: Vec2, t: f64) -> Result<Vec2> {
        let (k, w) = self.bracket(t)?;
        let a = self.gradient_at(k, p)?;
        if w == 0.0 {
            return Ok(a);
        }
        Ok(a.lerp(self.gradient_at(k + 1, p)?, w))
    }

    fn time_derivative(&self, p: Vec2, t: f64) -> Result<f64> {
        if self.fields.len() < 2 {
            return Ok(0.0);
        }
        let (k, _) = self.bracket(t)?;
        let a = self.angle_at(k, p)?;
        let b = self.angle_at(k + 1, p)?;
        Ok(wrapped_diff(b, a) / (self.fields[k + 1].time() - self.fields[k].time()))
    }

    fn inside(&self, p: Vec2) -> bool {
        let g = self.fields[0].grid();
        g.contains(p, SAFE_MARGIN_CELLS * g.spacing())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid2D;

    #[test]
    fn series_interpolates_in_time() {
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 0.125).unwrap();
        let f0 = AngleField::from_fn(g, 0.0, |p| p.x);
        let f1 = AngleField::from_fn(g, 1.0, |p| p.x + 0.5);
        let s = FieldSeries::new(vec![f0, f1]).unwrap();
        let p = Vec2::new(0.3, -0.2);
        assert!((s.angle(p, 0.5).unwrap() - 0.55).abs() < 1e-13);
        assert!((s.time_derivative(p, 0.2).unwrap() - 0.5).abs() < 1e-13);
        assert!((s.gradient(p, 0.7).unwrap() - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert!(s.angle(p, 1.5).is_err());
        assert!(s.inside(Vec2::new(0.7, 0.7)));
        assert!(!s.inside(Vec2::new(0.9, 0.0)));
    }

    #[test]
    fn series_rejects_unordered_snapshots() {
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 0.125).unwrap();
        let f = AngleField::from_fn(g, 0.0, |p| p.x);
        assert!(FieldSeries::new(vec![f.clone(), f]).is_err());
    }
}
