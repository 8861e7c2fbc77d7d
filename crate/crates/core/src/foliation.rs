//! Reconstruction of the moving leaves from an angle field.
//!
//! A base curve solves `α' = (∇_{V1}θ) V2` from a seed; at every time sample
//! the leaf through `α(t)` is traced as an integral curve of `V1`. Along the
//! resulting sheet `X(s, t)` the normal velocity `⟨X_t, V2⟩` should equal the
//! leaf curvature `θ_s`; [`sheet_diagnostics`] measures the defect.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::field::{frame_at, wrapped_diff, AngleField};
use crate::geom::Vec2;
use crate::pde::stationary_residual_masked;
use crate::source::AngleSource;

/// `α(t)` sampled at increasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseCurve {
    pub samples: Vec<(f64, Vec2)>,
    /// The trajectory left the safe region before `t_max`.
    pub truncated: bool,
}

impl BaseCurve {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn last(&self) -> (f64, Vec2) {
        self.samples[self.samples.len() - 1]
    }
}

fn base_velocity<S: AngleSource + ?Sized>(src: &S, p: Vec2, t: f64) -> Result<Vec2> {
    if !src.inside(p) {
        return Err(Error::out_of_domain(p));
    }
    let th = src.angle(p, t)?;
    let fr = frame_at(th);
    Ok(fr.v2 * src.gradient(p, t)?.dot(fr.v1))
}

/// RK4 for `α' = (∇_{V1}θ) V2`, `α(t0) = y`, with step `dt` (the last step
/// is shortened to end at `t_max`). Stops early, flagged, once a stage
/// leaves the source's safe region.
pub fn integrate_base_curve<S: AngleSource + ?Sized>(
    src: &S,
    y: Vec2,
    t0: f64,
    t_max: f64,
    dt: f64,
) -> Result<BaseCurve> {
    if !src.inside(y) {
        return Err(Error::out_of_domain(y));
    }
    if !(dt > 0.0) || !(t_max >= t0) {
        return Err(Error::Config(format!(
            "base curve needs dt > 0 and t_max >= t0 (dt = {dt}, t0 = {t0}, t_max = {t_max})"
        )));
    }
    let n = if t_max == t0 { 0 } else { ((t_max - t0) / dt - 1e-9).ceil() as usize };
    let mut samples = vec![(t0, y)];
    let mut p = y;
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let t_next = if k + 1 == n { t_max } else { t0 + (k + 1) as f64 * dt };
        let h = t_next - t;
        let step = || -> Result<Vec2> {
            let k1 = base_velocity(src, p, t)?;
            let k2 = base_velocity(src, p + k1 * (0.5 * h), t + 0.5 * h)?;
            let k3 = base_velocity(src, p + k2 * (0.5 * h), t + 0.5 * h)?;
            let k4 = base_velocity(src, p + k3 * h, t_next)?;
            let q = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if src.inside(q) {
                Ok(q)
            } else {
                Err(Error::out_of_domain(q))
            }
        };
        match step() {
            Ok(q) => {
                p = q;
                samples.push((t_next, p));
            }
            Err(Error::OutOfDomain { .. } | Error::Domain(_)) => {
                return Ok(BaseCurve { samples, truncated: true });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(BaseCurve { samples, truncated: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafOptions {
    /// Trace `s ∈ [-s_extent, s_extent]`.
    pub s_extent: f64,
    /// RK4 step and output spacing in `s`.
    pub ds: f64,
    /// Also integrate at `ds / 2` for a Richardson error estimate.
    pub estimate_error: bool,
}

impl LeafOptions {
    pub fn new(s_extent: f64, ds: f64) -> Self {
        Self { s_extent, ds, estimate_error: false }
    }
}

/// An integral curve of `V1` sampled at `s = k ds`, `k = first, first+1, ...`;
/// `s = 0` is the start point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub time: f64,
    pub ds: f64,
    pub first: isize,
    pub points: Vec<Vec2>,
    /// The domain margin cut the leaf short of `±s_extent`.
    pub truncated: bool,
    /// Largest `|X_s - V1(X)|` over the samples, `X_s` from central differences.
    pub tangent_error: f64,
    /// Richardson estimate of the RK4 position error.
    pub ode_error: Option<f64>,
}

impl Leaf {
    pub fn last(&self) -> isize {
        self.first + self.points.len() as isize - 1
    }

    pub fn s_at(&self, k: isize) -> f64 {
        k as f64 * self.ds
    }

    pub fn get(&self, k: isize) -> Option<Vec2> {
        if k < self.first {
            return None;
        }
        self.points.get((k - self.first) as usize).copied()
    }

    pub fn anchor(&self) -> Vec2 {
        self.get(0).expect("leaf contains its anchor")
    }

    pub fn s_values(&self) -> Vec<f64> {
        (self.first..=self.last()).map(|k| self.s_at(k)).collect()
    }

    pub fn curve(&self) -> Result<Curve> {
        Curve::new(self.points.clone(), false)
    }
}

fn leaf_direction<S: AngleSource + ?Sized>(src: &S, p: Vec2, t: f64, sign: f64) -> Result<Vec2> {
    if !src.inside(p) {
        return Err(Error::out_of_domain(p));
    }
    Ok(Vec2::from_angle(src.angle(p, t)?) * sign)
}

/// Traces one direction; returns the points after `start` and whether it was cut short.
fn trace<S: AngleSource + ?Sized>(src: &S, t: f64, start: Vec2, ds: f64, n: usize, sign: f64) -> Result<(Vec<Vec2>, bool)> {
    let mut out = Vec::with_capacity(n);
    let mut p = start;
    for _ in 0..n {
        let step = || -> Result<Vec2> {
            let k1 = leaf_direction(src, p, t, sign)?;
            let k2 = leaf_direction(src, p + k1 * (0.5 * ds), t, sign)?;
            let k3 = leaf_direction(src, p + k2 * (0.5 * ds), t, sign)?;
            let k4 = leaf_direction(src, p + k3 * ds, t, sign)?;
            let q = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0);
            if src.inside(q) {
                Ok(q)
            } else {
                Err(Error::out_of_domain(q))
            }
        };
        match step() {
            Ok(q) => {
                p = q;
                out.push(q);
            }
            Err(Error::OutOfDomain { .. } | Error::Domain(_)) => return Ok((out, true)),
            Err(e) => return Err(e),
        }
    }
    Ok((out, false))
}

fn trace_both<S: AngleSource + ?Sized>(src: &S, t: f64, start: Vec2, ds: f64, n: usize) -> Result<(isize, Vec<Vec2>, bool)> {
    let (fwd, tf) = trace(src, t, start, ds, n, 1.0)?;
    let (back, tb) = trace(src, t, start, ds, n, -1.0)?;
    let first = -(back.len() as isize);
    let mut pts: Vec<Vec2> = back.into_iter().rev().collect();
    pts.push(start);
    pts.extend(fwd);
    Ok((first, pts, tf || tb))
}

/// The integral curve of `V1(·, t)` through `start`, traced with RK4 in both
/// directions. Leaving the safe region truncates the leaf instead of failing.
pub fn integrate_leaf<S: AngleSource + ?Sized>(src: &S, t: f64, start: Vec2, opts: LeafOptions) -> Result<Leaf> {
    if !src.inside(start) {
        return Err(Error::out_of_domain(start));
    }
    if !(opts.ds > 0.0 && opts.s_extent >= 0.0) {
        return Err(Error::Config(format!(
            "leaf tracing needs ds > 0 and s_extent >= 0 (ds = {}, s_extent = {})",
            opts.ds, opts.s_extent
        )));
    }
    let n = (opts.s_extent / opts.ds + 1e-9).floor() as usize;
    let (first, points, truncated) = trace_both(src, t, start, opts.ds, n)?;

    let mut tangent_error: f64 = 0.0;
    for k in 1..points.len().saturating_sub(1) {
        let xs = (points[k + 1] - points[k - 1]) / (2.0 * opts.ds);
        let v1 = Vec2::from_angle(src.angle(points[k], t)?);
        tangent_error = tangent_error.max((xs - v1).norm());
    }

    let ode_error = if opts.estimate_error {
        let (f2, fine, _) = trace_both(src, t, start, 0.5 * opts.ds, 2 * n)?;
        let mut err: f64 = 0.0;
        for (m, p) in points.iter().enumerate() {
            let k = first + m as isize;
            let idx = 2 * k - f2;
            if idx >= 0 && (idx as usize) < fine.len() {
                err = err.max(p.dist(fine[idx as usize]) / 15.0);
            }
        }
        Some(err)
    } else {
        None
    };

    Ok(Leaf {
        time: t,
        ds: opts.ds,
        first,
        points,
        truncated,
        tangent_error,
        ode_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetOptions {
    pub s_extent: f64,
    pub ds: f64,
    /// Base-curve step, also the spacing of the leaf time samples.
    pub dt: f64,
    pub t_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoliationSheet {
    pub seed: Vec2,
    pub base: BaseCurve,
    /// One leaf per base-curve sample, on the shared grid `s = k ds`.
    pub leaves: Vec<Leaf>,
    pub s_extent: f64,
}

impl FoliationSheet {
    pub fn times(&self) -> Vec<f64> {
        self.base.times()
    }

    pub fn truncated(&self) -> bool {
        self.base.truncated || self.leaves.iter().any(|l| l.truncated)
    }
}

/// Base curve from `y`, then one leaf through each `α(t)`.
pub fn build_sheet<S: AngleSource + ?Sized>(src: &S, y: Vec2, t0: f64, opts: SheetOptions) -> Result<FoliationSheet> {
    let base = integrate_base_curve(src, y, t0, opts.t_max, opts.dt)?;
    let leaf_opts = LeafOptions::new(opts.s_extent, opts.ds);
    let leaves = base
        .samples
        .par_iter()
        .map(|&(t, p)| integrate_leaf(src, t, p, leaf_opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(FoliationSheet {
        seed: y,
        base,
        leaves,
        s_extent: opts.s_extent,
    })
}

/// Where `θ_s` in the defect comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureMode {
    /// `∇θ · V1` evaluated from the source at the leaf point.
    #[default]
    Field,
    /// Turning rate of the traced polyline.
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagSample {
    pub t: f64,
    pub s: f64,
    pub point: Vec2,
    /// `⟨X_t, V2⟩ - θ_s`.
    pub d: f64,
    /// `∂θ/∂t - θ_ss + (∇_{V2}θ) θ_s`, where `θ_ss` is available.
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetDiagnostics {
    pub samples: Vec<DiagSample>,
    pub max_d: f64,
    pub max_residual: f64,
    /// `max |D(0, t)|` along the base curve.
    pub base_d: f64,
}

impl SheetDiagnostics {
    /// `max |D|` over the samples accepted by `keep`.
    pub fn max_d_where(&self, keep: impl Fn(&DiagSample) -> bool) -> f64 {
        self.samples.iter().filter(|s| keep(s)).map(|s| s.d.abs()).fold(0.0, f64::max)
    }

    pub fn max_residual_where(&self, keep: impl Fn(&DiagSample) -> bool) -> f64 {
        self.samples
            .iter()
            .filter(|s| keep(s))
            .filter_map(|s| s.residual.map(f64::abs))
            .fold(0.0, f64::max)
    }
}

/// Derivative at the middle of three samples at `t0 < t1 < t2`.
fn three_point_slope(t: [f64; 3], x: [Vec2; 3]) -> Vec2 {
    let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
    (x[2] * (h1 / (h2 * (h1 + h2))) - x[0] * (h2 / (h1 * (h1 + h2)))) + x[1] * ((h2 - h1) / (h1 * h2))
}

/// Tabulates the normal-velocity defect and the along-leaf heat residual at
/// every interior time sample. `X_t` comes from central differences in `t`
/// at fixed `s`, `V2` from the leaf polyline.
pub fn sheet_diagnostics<S: AngleSource + ?Sized>(
    sheet: &FoliationSheet,
    src: &S,
    mode: CurvatureMode,
) -> Result<SheetDiagnostics> {
    let nt = sheet.leaves.len();
    if nt < 3 {
        return Err(Error::Config(format!("sheet has {nt} time samples, need at least 3")));
    }
    if sheet.leaves.iter().any(|l| l.points.len() < 5) {
        return Err(Error::Config("every leaf needs at least 5 samples".into()));
    }
    let per_time: Vec<Vec<DiagSample>> = (1..nt - 1)
        .into_par_iter()
        .map(|n| -> Result<Vec<DiagSample>> {
            let (prev, leaf, next) = (&sheet.leaves[n - 1], &sheet.leaves[n], &sheet.leaves[n + 1]);
            let t = leaf.time;
            let ds = leaf.ds;
            let m = leaf.points.len();
            // polyline tangent angles and curvature at interior samples
            let mut tau = vec![f64::NAN; m];
            for i in 1..m - 1 {
                tau[i] = (leaf.points[i + 1] - leaf.points[i - 1]).angle();
            }
            let mut theta_s = vec![f64::NAN; m];
            for i in 1..m - 1 {
                theta_s[i] = match mode {
                    CurvatureMode::Field => src.leaf_curvature(leaf.points[i], t)?,
                    CurvatureMode::Geometric if i >= 2 && i + 2 < m => {
                        wrapped_diff(tau[i + 1], tau[i - 1]) / (2.0 * ds)
                    }
                    CurvatureMode::Geometric => f64::NAN,
                };
            }
            let mut out = Vec::new();
            for i in 1..m - 1 {
                if theta_s[i].is_nan() {
                    continue;
                }
                let k = leaf.first + i as isize;
                let (Some(a), Some(c)) = (prev.get(k), next.get(k)) else { continue };
                let p = leaf.points[i];
                let xt = three_point_slope([prev.time, t, next.time], [a, p, c]);
                let v2 = Vec2::from_angle(tau[i]).rotate90();
                let d = xt.dot(v2) - theta_s[i];
                let residual = if i >= 2 && i + 2 < m && !theta_s[i - 1].is_nan() && !theta_s[i + 1].is_nan() {
                    let theta_ss = (theta_s[i + 1] - theta_s[i - 1]) / (2.0 * ds);
                    let grad = src.gradient(p, t)?;
                    Some(src.time_derivative(p, t)? - theta_ss + grad.dot(v2) * theta_s[i])
                } else {
                    None
                };
                out.push(DiagSample { t, s: leaf.s_at(k), point: p, d, residual });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let samples: Vec<DiagSample> = per_time.into_iter().flatten().collect();
    let max_d = samples.iter().map(|s| s.d.abs()).fold(0.0, f64::max);
    let max_residual = samples.iter().filter_map(|s| s.residual.map(f64::abs)).fold(0.0, f64::max);
    let base_d = samples.iter().filter(|s| s.s == 0.0).map(|s| s.d.abs()).fold(0.0, f64::max);
    Ok(SheetDiagnostics {
        samples,
        max_d,
        max_residual,
        base_d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StraightnessOptions {
    pub s_extent: f64,
    pub ds: f64,
    /// Largest `|∇_{V1}θ(y)|` for which the check applies.
    pub tol_curv: f64,
    /// Largest accepted distance from the chord.
    pub tol_dev: f64,
    /// Largest accepted stationary residual near the leaf.
    pub residual_threshold: f64,
}

impl Default for StraightnessOptions {
    fn default() -> Self {
        Self {
            s_extent: 0.4,
            ds: 1e-3,
            tol_curv: 1e-8,
            tol_dev: 1e-6,
            residual_threshold: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Straightness {
    Pass { deviation: f64 },
    Fail { deviation: f64 },
    Inapplicable { reason: String },
}

impl Straightness {
    pub fn passed(&self) -> bool {
        matches!(self, Straightness::Pass { .. })
    }
}

/// On a stationary field, a leaf whose curvature vanishes at `y` should be a
/// straight segment. `stationary_residual` is the caller's measurement of
/// the stationary residual near the leaf, if any.
pub fn straightness_check<S: AngleSource + ?Sized>(
    src: &S,
    y: Vec2,
    stationary_residual: Option<f64>,
    opts: StraightnessOptions,
) -> Result<Straightness> {
    if let Some(r) = stationary_residual {
        if !(r <= opts.residual_threshold) {
            return Ok(Straightness::Inapplicable {
                reason: format!("field is not stationary: residual {r} > {}", opts.residual_threshold),
            });
        }
    }
    let curv = src.leaf_curvature(y, 0.0)?;
    if curv.abs() > opts.tol_curv {
        return Ok(Straightness::Inapplicable {
            reason: format!("leaf curvature at the seed is {curv}, above {}", opts.tol_curv),
        });
    }
    let leaf = integrate_leaf(src, 0.0, y, LeafOptions::new(opts.s_extent, opts.ds))?;
    let (a, b) = (leaf.points[0], leaf.points[leaf.points.len() - 1]);
    let chord = b - a;
    let len = chord.norm();
    let deviation = leaf
        .points
        .iter()
        .map(|&p| if len > 0.0 { chord.cross(p - a).abs() / len } else { p.dist(a) })
        .fold(0.0, f64::max);
    Ok(if deviation <= opts.tol_dev {
        Straightness::Pass { deviation }
    } else {
        Straightness::Fail { deviation }
    })
}

/// [`straightness_check`] on a sampled field, measuring the stationary
/// residual on the nodes within reach of the leaf.
pub fn straightness_check_field(field: &AngleField, y: Vec2, opts: StraightnessOptions) -> Result<Straightness> {
    let reach = opts.s_extent + 2.0 * field.grid().spacing();
    let res = stationary_residual_masked(field, |p| p.dist(y) <= reach);
    straightness_check(field, y, Some(res.max), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CatalogSolution;
    use crate::field::Grid2D;
    use crate::source::FieldSeries;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn constant_field_base_curve_stays_put() {
        let src = CatalogSolution::Constant { c: FRAC_PI_2 };
        let y = Vec2::new(0.3, -0.2);
        let b = integrate_base_curve(&src, y, 0.0, 0.5, 0.01).unwrap();
        assert!(!b.truncated);
        assert!(b.samples.iter().all(|(_, p)| *p == y));
        assert_eq!(b.last().0, 0.5);
    }

    #[test]
    fn reaper_base_curve_rises() {
        let src = CatalogSolution::linear(1.0, 0.0, 0.0);
        let b = integrate_base_curve(&src, Vec2::ZERO, 0.0, 0.5, 0.01).unwrap();
        for (t, p) in &b.samples {
            assert!(p.dist(Vec2::new(0.0, *t)) < 1e-12);
        }
    }

    #[test]
    fn circle_base_curve_shrinks() {
        let src = CatalogSolution::polar(FRAC_PI_2);
        let b = integrate_base_curve(&src, Vec2::new(1.0, 0.0), 0.0, 0.3, 1e-3).unwrap();
        for (t, p) in &b.samples {
            assert!((p.norm() - (1.0 - 2.0 * t).sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn base_curve_truncates_at_margin() {
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 1.0 / 32.0).unwrap();
        let f = AngleField::from_fn(g, 0.0, |p| p.x);
        let series = FieldSeries::stationary(&f, &[0.0, 2.0]).unwrap();
        let b = integrate_base_curve(&series, Vec2::new(0.0, 0.5), 0.0, 2.0, 0.01).unwrap();
        assert!(b.truncated);
        let (t, p) = b.last();
        assert!(t < 2.0 && p.y <= 1.0 - 2.0 / 32.0);
        assert!(integrate_base_curve(&series, Vec2::new(0.99, 0.0), 0.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn horizontal_leaf() {
        let src = CatalogSolution::Constant { c: 0.0 };
        let leaf = integrate_leaf(&src, 0.0, Vec2::ZERO, LeafOptions::new(1.0, 0.01)).unwrap();
        assert_eq!(leaf.first, -100);
        assert_eq!(leaf.points.len(), 201);
        assert!(leaf.points[0].dist(Vec2::new(-1.0, 0.0)) < 1e-12);
        assert!(leaf.points[200].dist(Vec2::new(1.0, 0.0)) < 1e-12);
        assert!(leaf.tangent_error < 1e-12);
    }

    #[test]
    fn reaper_leaf_is_log_cos_graph() {
        let src = CatalogSolution::linear(1.0, 0.0, 0.0);
        let opts = LeafOptions { s_extent: 1.7, ds: 1e-3, estimate_error: true };
        let leaf = integrate_leaf(&src, 0.0, Vec2::ZERO, opts).unwrap();
        let dev = leaf
            .points
            .iter()
            .filter(|p| p.x.abs() <= 1.2)
            .map(|p| (p.y + p.x.cos().ln()).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
        assert!(leaf.ode_error.unwrap() < 1e-12);
        assert!(leaf.points.iter().any(|p| p.x > 1.2) && leaf.points.iter().any(|p| p.x < -1.2));
    }

    #[test]
    fn ray_leaf_is_straight() {
        let src = CatalogSolution::polar(0.0);
        let leaf = integrate_leaf(&src, 0.0, Vec2::new(1.0, 0.0), LeafOptions::new(0.5, 0.01)).unwrap();
        assert!(leaf.points.iter().all(|p| p.y.abs() < 1e-14));
        assert!((leaf.points[0].x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn leaf_truncates_at_grid_margin() {
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 0.0625).unwrap();
        let f = AngleField::from_fn(g, 0.0, |_| 0.0);
        let leaf = integrate_leaf(&f, 0.0, Vec2::ZERO, LeafOptions::new(3.0, 0.01)).unwrap();
        assert!(leaf.truncated);
        assert!(leaf.points.iter().all(|p| p.x.abs() <= 1.0 - 0.125 + 1e-12));
    }

    #[test]
    fn reaper_sheet_translates() {
        let src = CatalogSolution::linear(1.0, 0.0, 0.0);
        let opts = SheetOptions { s_extent: 1.0, ds: 0.01, dt: 0.01, t_max: 0.5 };
        let sheet = build_sheet(&src, Vec2::ZERO, 0.0, opts).unwrap();
        let c0 = sheet.leaves[0].curve().unwrap();
        for leaf in &sheet.leaves {
            assert_eq!(leaf.anchor(), sheet.base.samples.iter().find(|s| s.0 == leaf.time).unwrap().1);
            let shifted = Curve::new(leaf.points.iter().map(|p| *p - Vec2::new(0.0, leaf.time)).collect(), false).unwrap();
            assert!(shifted.hausdorff(&c0) < 1e-3);
        }
        let diag = sheet_diagnostics(&sheet, &src, CurvatureMode::Field).unwrap();
        assert!(diag.max_d < 1e-3, "{}", diag.max_d);
        assert!(diag.base_d < 1e-6);
        assert!(diag.max_residual < 1e-3, "{}", diag.max_residual);
    }

    #[test]
    fn constant_sheet_has_no_defect() {
        let src = CatalogSolution::Constant { c: 0.7 };
        let opts = SheetOptions { s_extent: 0.5, ds: 0.05, dt: 0.1, t_max: 0.3 };
        let sheet = build_sheet(&src, Vec2::new(0.1, 0.2), 0.0, opts).unwrap();
        for mode in [CurvatureMode::Field, CurvatureMode::Geometric] {
            let d = sheet_diagnostics(&sheet, &src, mode).unwrap();
            assert!(d.max_d < 1e-12 && d.max_residual < 1e-10);
        }
        let short = SheetOptions { t_max: 0.1, ..opts };
        let sheet = build_sheet(&src, Vec2::ZERO, 0.0, short).unwrap();
        assert!(matches!(sheet_diagnostics(&sheet, &src, CurvatureMode::Field), Err(Error::Config(_))));
    }

    #[test]
    fn straightness_verdicts() {
        let opts = StraightnessOptions::default();
        let ray = straightness_check(&CatalogSolution::polar(0.0), Vec2::new(1.0, 0.0), None, opts).unwrap();
        assert!(ray.passed(), "{ray:?}");
        let circle = straightness_check(&CatalogSolution::polar(FRAC_PI_2), Vec2::new(1.0, 0.0), None, opts).unwrap();
        assert!(matches!(circle, Straightness::Inapplicable { .. }));
        let g = Grid2D::from_window(-2.0, 2.0, -2.0, 2.0, 1.0 / 32.0).unwrap();
        let f = AngleField::from_fn(g, 0.0, |p| p.y.atan2(p.x));
        let on_grid = straightness_check_field(&f, Vec2::new(1.0, 0.0), StraightnessOptions { residual_threshold: 10.0 / 1024.0, ..opts })
            .unwrap();
        assert!(on_grid.passed(), "{on_grid:?}");
    }
}
