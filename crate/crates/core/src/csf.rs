//! Parametric curve shortening flow: points move with velocity `κ N` and are
//! redistributed by arclength after every step.
//!
//! Also extracts an ambient angle field from a family of flowed leaves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::field::{wrap_angle, wrapped_diff, AngleField, Grid2D};
use crate::geom::Vec2;

/// Largest accepted `dt / (min segment)²` for a single explicit step.
pub const MAX_STEP_FRACTION: f64 = 0.25;
/// Substep size used by [`advance`], as a fraction of `(min segment)²`.
pub const SUBSTEP_FRACTION: f64 = 0.2;
/// A curve shorter than this many target spacings is considered extinct.
pub const EXTINCTION_SPACINGS: f64 = 4.0;

const MIN_POINTS_CLOSED: usize = 8;
const MIN_POINTS_OPEN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EndCondition {
    Closed,
    /// Endpoints move with their own (extrapolated) curvature.
    Free,
    /// Endpoints follow `initial + velocity · (t - t0)`.
    Pinned { velocity: Vec2 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowingCurve {
    curve: Curve,
    time: f64,
    ends: EndCondition,
    anchors: (Vec2, Vec2),
    anchor_time: f64,
    target_spacing: f64,
}

impl FlowingCurve {
    /// Resamples `curve` to the spacing closest to `target_spacing`.
    pub fn new(curve: Curve, time: f64, ends: EndCondition, target_spacing: f64) -> Result<Self> {
        if curve.is_closed() != matches!(ends, EndCondition::Closed) {
            return Err(Error::Config(format!(
                "end condition {ends:?} does not match a {} curve",
                if curve.is_closed() { "closed" } else { "open" }
            )));
        }
        if !(target_spacing > 0.0 && target_spacing.is_finite()) {
            return Err(Error::Config(format!("target spacing must be positive, got {target_spacing}")));
        }
        let curve = resample_to(&curve, point_count(&curve, target_spacing))?;
        let pts = curve.points();
        let anchors = (pts[0], pts[pts.len() - 1]);
        Ok(Self {
            curve,
            time,
            ends,
            anchors,
            anchor_time: time,
            target_spacing,
        })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn ends(&self) -> EndCondition {
        self.ends
    }
    pub fn target_spacing(&self) -> f64 {
        self.target_spacing
    }
    pub fn mean_spacing(&self) -> f64 {
        self.curve.length() / self.curve.segment_count() as f64
    }

    fn pinned_ends(&self, t: f64) -> Option<(Vec2, Vec2)> {
        match self.ends {
            EndCondition::Pinned { velocity } => {
                let shift = velocity * (t - self.anchor_time);
                Some((self.anchors.0 + shift, self.anchors.1 + shift))
            }
            _ => None,
        }
    }
}

fn point_count(curve: &Curve, spacing: f64) -> usize {
    let segs = (curve.length() / spacing).round() as usize;
    if curve.is_closed() {
        segs.max(MIN_POINTS_CLOSED)
    } else {
        (segs + 1).max(MIN_POINTS_OPEN)
    }
}

fn resample_to(curve: &Curve, n: usize) -> Result<Curve> {
    curve.resample(n)
}

/// One explicit step: every sample moves by `dt κ N`, then the curve is
/// redistributed uniformly in arclength. The point count only changes when
/// the spacing would leave `[0.5, 2]` times the target.
pub fn csf_step(fc: &FlowingCurve, dt: f64) -> Result<FlowingCurve> {
    let min_seg = fc.curve.min_segment();
    if !(dt > 0.0) || dt > MAX_STEP_FRACTION * min_seg * min_seg * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "step {dt} violates dt <= {MAX_STEP_FRACTION}·(min segment)² = {}",
            MAX_STEP_FRACTION * min_seg * min_seg
        )));
    }
    let t = fc.time + dt;
    let kappa = fc.curve.curvature();
    let normals = fc.curve.normals();
    let mut pts: Vec<Vec2> = fc
        .curve
        .points()
        .iter()
        .zip(kappa.iter().zip(&normals))
        .map(|(&p, (&k, &n))| p + n * (dt * k))
        .collect();
    if let Some((a, b)) = fc.pinned_ends(t) {
        let m = pts.len();
        pts[0] = a;
        pts[m - 1] = b;
    }
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidCurve(format!("non-finite point at t = {t}")));
    }
    let moved = Curve::new(pts, fc.curve.is_closed()).map_err(|_| Error::Extinction { t })?;
    let length = moved.length();
    if length < EXTINCTION_SPACINGS * fc.target_spacing {
        return Err(Error::Extinction { t });
    }
    let m = moved.len();
    let segs = moved.segment_count() as f64;
    let spacing = length / segs;
    let n = if spacing < 0.5 * fc.target_spacing || spacing > 2.0 * fc.target_spacing {
        point_count(&moved, fc.target_spacing)
    } else {
        m
    };
    let curve = resample_to(&moved, n).map_err(|_| Error::Extinction { t })?;
    Ok(FlowingCurve {
        curve,
        time: t,
        ..fc.clone()
    })
}

/// Advances by `dt`, splitting into substeps of at most
/// `0.2 (min segment)²` so any requested `dt` is stable.
pub fn advance(fc: &FlowingCurve, dt: f64) -> Result<FlowingCurve> {
    let t_end = fc.time + dt;
    let mut cur = fc.clone();
    loop {
        let remaining = t_end - cur.time;
        if remaining <= 1e-12 * dt.abs().max(1e-300) {
            break;
        }
        let min_seg = cur.curve.min_segment();
        let cap = SUBSTEP_FRACTION * min_seg * min_seg;
        let n = (remaining / cap).ceil().max(1.0);
        cur = csf_step(&cur, remaining / n)?;
    }
    cur.time = t_end;
    Ok(cur)
}

/// Evolves to `t_final` in steps of `dt`, recording the initial curve, every
/// `cadence`-th step and the final curve.
pub fn evolve_curve(fc: &FlowingCurve, t_final: f64, dt: f64, cadence: usize) -> Result<Vec<FlowingCurve>> {
    let times = snapshot_times(fc.time, t_final, dt, cadence)?;
    let mut out = vec![fc.clone()];
    let mut cur = fc.clone();
    for w in times.windows(2) {
        cur = march(&cur, w[1], dt)?;
        out.push(cur.clone());
    }
    Ok(out)
}

fn march(fc: &FlowingCurve, t_to: f64, dt: f64) -> Result<FlowingCurve> {
    let mut cur = fc.clone();
    while t_to - cur.time > 1e-9 * dt {
        let h = (t_to - cur.time).min(dt);
        let h = if t_to - cur.time - h < 1e-9 * dt { t_to - cur.time } else { h };
        cur = advance(&cur, h)?;
    }
    cur.time = t_to;
    Ok(cur)
}

fn snapshot_times(t0: f64, t_final: f64, dt: f64, cadence: usize) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_final >= t0) {
        return Err(Error::Config(format!(
            "flow needs dt > 0 and t_final >= t0 (dt = {dt}, t0 = {t0}, t_final = {t_final})"
        )));
    }
    let n = ((t_final - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let every = cadence.max(1);
    let mut times = vec![t0];
    for k in (every..n).step_by(every) {
        times.push(t0 + k as f64 * dt);
    }
    if t_final > t0 {
        times.push(t_final);
    }
    Ok(times)
}

/// `θ_t - θ_ss` along a flowing curve with `θ_t` taken at fixed normal-flow
/// particle, i.e. corrected by the tangential velocity of the resampled
/// parametrization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatResidual {
    /// `(t, s, residual)` at interior samples of interior snapshots.
    pub values: Vec<(f64, f64, f64)>,
    pub max: f64,
}

/// Samples this close to an open end are excluded from the residual.
pub const END_EXCLUSION: usize = 3;

pub fn heat_residual_along_curve(history: &[FlowingCurve]) -> Result<HeatResidual> {
    if history.len() < 3 {
        return Err(Error::Config(format!(
            "heat residual needs at least 3 snapshots, got {}",
            history.len()
        )));
    }
    let per: Vec<Vec<(f64, f64, f64)>> = (1..history.len() - 1)
        .into_par_iter()
        .map(|n| -> Result<Vec<(f64, f64, f64)>> {
            let mid = &history[n].curve;
            let m = mid.len();
            let same = |c: &Curve| -> Result<Curve> {
                if c.len() == m {
                    Ok(c.clone())
                } else {
                    c.resample(m)
                }
            };
            let (a, c) = (same(&history[n - 1].curve)?, same(&history[n + 1].curve)?);
            let (ta, tb, tc) = (history[n - 1].time, history[n].time, history[n + 1].time);
            let (h1, h2) = (tb - ta, tc - tb);
            let wa = -h2 / (h1 * (h1 + h2));
            let wb = (h2 - h1) / (h1 * h2);
            let wc = h1 / (h2 * (h1 + h2));
            let tha = a.tangent_angles();
            let thb = mid.tangent_angles();
            let thc = c.tangent_angles();
            let kappa = mid.curvature();
            let s = mid.arclength();
            let total = mid.length();
            let closed = mid.is_closed();
            let mut out = Vec::new();
            let range: Vec<usize> = if closed {
                (0..m).collect()
            } else {
                (END_EXCLUSION..m.saturating_sub(END_EXCLUSION)).collect()
            };
            for i in range {
                let (ip, im) = ((i + 1) % m, (i + m - 1) % m);
                let mut ds = s[ip] - s[im];
                if ds <= 0.0 {
                    ds += total;
                }
                let theta_ss = (kappa[ip] - kappa[im]) / ds;
                let theta_t = wa * wrapped_diff(tha[i], thb[i]) + wc * wrapped_diff(thc[i], thb[i]);
                let xt = a.points()[i] * wa + mid.points()[i] * wb + c.points()[i] * wc;
                let v_tan = xt.dot(Vec2::from_angle(thb[i]));
                out.push((tb, s[i], theta_t - v_tan * kappa[i] - theta_ss));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let values: Vec<(f64, f64, f64)> = per.into_iter().flatten().collect();
    let max = values.iter().map(|v| v.2.abs()).fold(0.0, f64::max);
    Ok(HeatResidual { values, max })
}

/// Leaves flowing together, labelled by their position in the original family.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveFamily {
    pub time: f64,
    pub curves: Vec<FlowingCurve>,
    pub labels: Vec<usize>,
}

impl CurveFamily {
    pub fn new(curves: Vec<FlowingCurve>) -> Result<Self> {
        let time = curves.first().map(FlowingCurve::time).unwrap_or(0.0);
        if curves.iter().any(|c| c.time() != time) {
            return Err(Error::Config("family members must share a time".into()));
        }
        let labels = (0..curves.len()).collect();
        Ok(Self { time, curves, labels })
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Smallest distance between samples of label-adjacent leaves.
    pub fn min_adjacent_distance(&self) -> f64 {
        (1..self.curves.len())
            .into_par_iter()
            .map(|k| {
                let a = self.curves[k - 1].curve.points();
                let b = self.curves[k].curve.points();
                a.iter()
                    .flat_map(|p| b.iter().map(move |q| p.dist(*q)))
                    .fold(f64::INFINITY, f64::min)
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Median over leaves of the distance from the leaf's middle sample to
    /// the nearest other leaf.
    pub fn inter_leaf_spacing(&self) -> f64 {
        if self.curves.len() < 2 {
            return f64::INFINITY;
        }
        let mut d: Vec<f64> = (0..self.curves.len())
            .into_par_iter()
            .map(|k| {
                let pts = self.curves[k].curve.points();
                let p = pts[pts.len() / 2];
                self.curves
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, c)| c.curve.distance_to(p))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedLeaf {
    pub label: usize,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyEvolution {
    pub snapshots: Vec<CurveFamily>,
    pub dropped: Vec<DroppedLeaf>,
    /// `(t, min_adjacent_distance)` per snapshot.
    pub min_distance: Vec<(f64, f64)>,
}

/// Evolves every leaf independently; extinct leaves are dropped from later
/// snapshots and reported.
pub fn evolve_family(fam: &CurveFamily, t_final: f64, dt: f64, cadence: usize) -> Result<FamilyEvolution> {
    let times = snapshot_times(fam.time, t_final, dt, cadence)?;
    let runs: Vec<(Vec<FlowingCurve>, Option<f64>)> = fam
        .curves
        .par_iter()
        .map(|c| -> Result<(Vec<FlowingCurve>, Option<f64>)> {
            let mut hist = vec![c.clone()];
            let mut cur = c.clone();
            for w in times.windows(2) {
                match march(&cur, w[1], dt) {
                    Ok(next) => {
                        cur = next;
                        hist.push(cur.clone());
                    }
                    Err(Error::Extinction { t }) => return Ok((hist, Some(t))),
                    Err(e) => return Err(e),
                }
            }
            Ok((hist, None))
        })
        .collect::<Result<_>>()?;
    let mut snapshots = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mut curves = Vec::new();
        let mut labels = Vec::new();
        for (run, &label) in runs.iter().zip(&fam.labels) {
            if let Some(c) = run.0.get(k) {
                curves.push(c.clone());
                labels.push(label);
            }
        }
        snapshots.push(CurveFamily { time: t, curves, labels });
    }
    let dropped = runs
        .iter()
        .zip(&fam.labels)
        .filter_map(|(r, &label)| r.1.map(|time| DroppedLeaf { label, time }))
        .collect();
    let min_distance = snapshots.iter().map(|s| (s.time, s.min_adjacent_distance())).collect();
    Ok(FamilyEvolution {
        snapshots,
        dropped,
        min_distance,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Nodes farther than this from every leaf are masked out.
    pub max_distance: f64,
    /// Interpolate across the gap to the nearest leaf on the opposite side
    /// of the node.
    pub blend: bool,
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub field: AngleField,
    pub mask: Vec<bool>,
    pub coverage: f64,
}

struct SegmentHash {
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<(u32, u32)>>,
}

impl SegmentHash {
    fn build(fam: &CurveFamily, origin: Vec2, cell: f64, nx: usize, ny: usize) -> Self {
        let mut buckets = vec![Vec::new(); nx * ny];
        for (l, fc) in fam.curves.iter().enumerate() {
            let c = &fc.curve;
            for k in 0..c.segment_count() {
                let a = c.points()[k];
                let b = c.points()[(k + 1) % c.len()];
                let lo = Vec2::new(a.x.min(b.x), a.y.min(b.y));
                let hi = Vec2::new(a.x.max(b.x), a.y.max(b.y));
                let (Some((i0, j0)), Some((i1, j1))) = (
                    Self::cell_of(origin, cell, nx, ny, lo, false),
                    Self::cell_of(origin, cell, nx, ny, hi, true),
                ) else {
                    continue;
                };
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        buckets[j * nx + i].push((l as u32, k as u32));
                    }
                }
            }
        }
        Self { origin, cell, nx, ny, buckets }
    }

    /// Clamped cell, or `None` when `p` lies beyond the hashed box on the
    /// given side (`upper` for the top-right corner of a bounding box).
    fn cell_of(origin: Vec2, cell: f64, nx: usize, ny: usize, p: Vec2, upper: bool) -> Option<(usize, usize)> {
        let fx = ((p.x - origin.x) / cell).floor();
        let fy = ((p.y - origin.y) / cell).floor();
        let outside = if upper { fx < 0.0 || fy < 0.0 } else { fx >= nx as f64 || fy >= ny as f64 };
        if outside {
            return None;
        }
        Some((fx.clamp(0.0, (nx - 1) as f64) as usize, fy.clamp(0.0, (ny - 1) as f64) as usize))
    }
}

#[derive(Clone, Copy)]
struct Hit {
    dist: f64,
    proj: Vec2,
    angle: f64,
}

/// Samples the tangent angle of a flowed family onto `grid`. Each node takes
/// the interpolated tangent angle at its projection onto the nearest leaf;
/// with `blend`, it is interpolated linearly in distance toward the nearest
/// leaf on the other side (angles aligned mod π).
pub fn extract_angle_field(fam: &CurveFamily, grid: &Grid2D, opts: ExtractOptions) -> Result<Extraction> {
    if fam.is_empty() {
        return Err(Error::Config("cannot extract a field from an empty family".into()));
    }
    let h = grid.spacing();
    let pad = opts.max_distance + h;
    let origin = grid.origin() - Vec2::new(pad, pad);
    let span = grid.max_corner() - grid.origin();
    let cell = h.max(opts.max_distance / 4.0);
    let nx = ((span.x + 2.0 * pad) / cell).ceil() as usize + 1;
    let ny = ((span.y + 2.0 * pad) / cell).ceil() as usize + 1;
    let hash = SegmentHash::build(fam, origin, cell, nx, ny);
    let angles: Vec<Vec<f64>> = fam.curves.par_iter().map(|c| c.curve.tangent_angles()).collect();
    let reach = (opts.max_distance / cell).ceil() as isize;

    let nodes: Vec<(f64, bool)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = grid.node(idx % grid.nx(), idx / grid.nx());
            let ci = ((p.x - hash.origin.x) / hash.cell).floor() as isize;
            let cj = ((p.y - hash.origin.y) / hash.cell).floor() as isize;
            let mut best: Vec<Option<Hit>> = vec![None; fam.len()];
            for j in (cj - reach).max(0)..=(cj + reach).min(hash.ny as isize - 1) {
                for i in (ci - reach).max(0)..=(ci + reach).min(hash.nx as isize - 1) {
                    for &(l, k) in &hash.buckets[j as usize * hash.nx + i as usize] {
                        let (l, k) = (l as usize, k as usize);
                        let c = &fam.curves[l].curve;
                        let m = c.len();
                        let a = c.points()[k];
                        let d = c.points()[(k + 1) % m] - a;
                        let u = ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
                        let proj = a + d * u;
                        let dist = proj.dist(p);
                        if dist > opts.max_distance {
                            continue;
                        }
                        if best[l].map_or(true, |b| dist < b.dist) {
                            let (t0, t1) = (angles[l][k], angles[l][(k + 1) % m]);
                            let angle = t0 + u * wrapped_diff(t1, t0);
                            best[l] = Some(Hit { dist, proj, angle });
                        }
                    }
                }
            }
            let mut hits: Vec<Hit> = best.into_iter().flatten().collect();
            // stable order for deterministic tie breaking
            hits.sort_by(|a, b| a.dist.total_cmp(&b.dist));
            let Some(near) = hits.first().copied() else {
                return (0.0, false);
            };
            if !opts.blend || near.dist == 0.0 {
                return (wrap_angle(near.angle), true);
            }
            let to_near = near.proj - p;
            let other = hits.iter().skip(1).find(|h| (h.proj - p).dot(to_near) < 0.0);
            let value = match other {
                Some(o) => {
                    // align the other leaf's orientation to the nearest one
                    let mut diff = wrapped_diff(o.angle, near.angle);
                    if diff > std::f64::consts::FRAC_PI_2 {
                        diff -= std::f64::consts::PI;
                    } else if diff < -std::f64::consts::FRAC_PI_2 {
                        diff += std::f64::consts::PI;
                    }
                    near.angle + diff * near.dist / (near.dist + o.dist)
                }
                None => near.angle,
            };
            (wrap_angle(value), true)
        })
        .collect();
    let mask: Vec<bool> = nodes.iter().map(|n| n.1).collect();
    let covered = mask.iter().filter(|m| **m).count();
    if covered == 0 {
        return Err(Error::Config("no grid node lies within reach of the family".into()));
    }
    let field = AngleField::new(*grid, nodes.iter().map(|n| n.0).collect(), fam.time)?;
    Ok(Extraction {
        field,
        mask,
        coverage: covered as f64 / grid.len() as f64,
    })
}
