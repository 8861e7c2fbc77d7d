//! Polyline samples of plane curves.

use crate::error::{Error, Result};
use crate::field::frame_at;
use crate::geom::Vec2;

/// Segments shorter than this count as repeated points.
const MIN_SEGMENT: f64 = 1e-13;

/// An ordered polyline sample of a plane curve, open or closed.
///
/// Closed curves do not repeat their first point; the wraparound segment is
/// implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    points: Vec<Vec2>,
    closed: bool,
}

impl Curve {
    pub fn new(points: Vec<Vec2>, closed: bool) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidCurve(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite point {p:?}")));
        }
        let c = Self { points, closed };
        for k in 0..c.segment_count() {
            if c.segment(k).norm() <= MIN_SEGMENT {
                return Err(Error::InvalidCurve(format!("degenerate segment at index {k}")));
            }
        }
        Ok(c)
    }

    /// Samples `f` at `n` evenly spaced parameters on `[a, b]` (closed: `b` excluded).
    pub fn from_param(
        f: impl Fn(f64) -> Vec2,
        a: f64,
        b: f64,
        n: usize,
        closed: bool,
    ) -> Result<Self> {
        let denom = if closed { n } else { n.saturating_sub(1).max(1) } as f64;
        let pts = (0..n).map(|k| f(a + (b - a) * k as f64 / denom)).collect();
        Self::new(pts, closed)
    }

    #[inline]
    pub fn points(&self) -> &[Vec2] {
        &self.points
    }
    #[inline]
    pub fn is_closed(&self) -> bool {
        self.closed
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn into_points(self) -> Vec<Vec2> {
        self.points
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    /// Vector from point `k` to point `k + 1` (wrapping for closed curves).
    #[inline]
    pub fn segment(&self, k: usize) -> Vec2 {
        let n = self.points.len();
        self.points[(k + 1) % n] - self.points[k]
    }

    pub fn segment_lengths(&self) -> Vec<f64> {
        (0..self.segment_count()).map(|k| self.segment(k).norm()).collect()
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    pub fn min_segment(&self) -> f64 {
        self.segment_lengths().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_segment(&self) -> f64 {
        self.segment_lengths().into_iter().fold(0.0, f64::max)
    }

    /// Cumulative chord length at every sample, starting from 0.
    pub fn arclength(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        s.push(0.0);
        for k in 0..self.points.len() - 1 {
            acc += self.segment(k).norm();
            s.push(acc);
        }
        s
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self {
            points,
            closed: self.closed,
        }
    }

    /// Tangent angle at every sample from three-point derivatives weighted by
    /// the adjacent chord lengths (one-sided at the ends of open curves).
    pub fn tangent_angles(&self) -> Vec<f64> {
        let n = self.points.len();
        let p = &self.points;
        (0..n)
            .map(|i| {
                let d = if self.closed || (i > 0 && i + 1 < n) {
                    let a = p[(i + n - 1) % n];
                    let c = p[(i + 1) % n];
                    three_point_derivative(a, p[i], c)
                } else if i == 0 {
                    one_sided_derivative(p[0], p[1], p[2])
                } else {
                    -one_sided_derivative(p[n - 1], p[n - 2], p[n - 3])
                };
                d.angle()
            })
            .collect()
    }

    /// Signed curvature; positive when the curve bends toward `J T`.
    ///
    /// Interior samples use the circle through three consecutive points.
    /// Open ends are extrapolated linearly from the two nearest interior values.
    pub fn curvature(&self) -> Vec<f64> {
        let n = self.points.len();
        let p = &self.points;
        let menger = |a: Vec2, b: Vec2, c: Vec2| {
            2.0 * (b - a).cross(c - b) / ((b - a).norm() * (c - b).norm() * (c - a).norm())
        };
        if self.closed {
            return (0..n)
                .map(|i| menger(p[(i + n - 1) % n], p[i], p[(i + 1) % n]))
                .collect();
        }
        let mut k: Vec<f64> = (0..n)
            .map(|i| if i > 0 && i + 1 < n { menger(p[i - 1], p[i], p[i + 1]) } else { 0.0 })
            .collect();
        if n >= 4 {
            let s = self.arclength();
            let ext = |a: usize, b: usize, e: usize, k: &[f64]| {
                k[a] + (k[b] - k[a]) * (s[e] - s[a]) / (s[b] - s[a])
            };
            k[0] = ext(1, 2, 0, &k);
            k[n - 1] = ext(n - 2, n - 3, n - 1, &k);
        } else {
            k[0] = k[1];
            k[n - 1] = k[1];
        }
        k
    }

    /// Unit normals `J T` at every sample.
    pub fn normals(&self) -> Vec<Vec2> {
        self.tangent_angles().into_iter().map(|t| frame_at(t).v2).collect()
    }

    /// Resamples to `n` points evenly spaced in chord length using local
    /// cubic interpolation. Open curves keep both endpoints; closed curves
    /// keep the first point.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidCurve(format!("cannot resample to {n} points")));
        }
        let m = self.points.len();
        let s = self.arclength();
        let total = self.length();
        let segs = if self.closed { n } else { n - 1 };
        let step = total / segs as f64;
        // parameter of point k, extended periodically for closed curves
        let param = |k: isize| -> f64 {
            if self.closed {
                let mi = m as isize;
                let wraps = k.div_euclid(mi);
                s[k.rem_euclid(mi) as usize] + wraps as f64 * total
            } else {
                s[k as usize]
            }
        };
        let point = |k: isize| -> Vec2 {
            if self.closed {
                self.points[k.rem_euclid(m as isize) as usize]
            } else {
                self.points[k as usize]
            }
        };
        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        for k in 0..n {
            if !self.closed && k == n - 1 {
                out.push(self.points[m - 1]);
                break;
            }
            let target = k as f64 * step;
            let last_seg = if self.closed { m - 1 } else { m - 2 };
            while seg < last_seg && param(seg as isize + 1) < target {
                seg += 1;
            }
            // four-point stencil around [seg, seg+1], shifted inward at open ends
            let mut lo = seg as isize - 1;
            if !self.closed {
                lo = lo.clamp(0, m as isize - 4);
            }
            if m < 4 && !self.closed {
                let u = (target - s[seg]) / (s[seg + 1] - s[seg]);
                out.push(self.points[seg].lerp(self.points[seg + 1], u));
                continue;
            }
            let ts = [param(lo), param(lo + 1), param(lo + 2), param(lo + 3)];
            let ps = [point(lo), point(lo + 1), point(lo + 2), point(lo + 3)];
            out.push(lagrange4(&ts, &ps, target));
        }
        Self::new(out, self.closed)
    }

    /// Resamples to the point count whose spacing is closest to `spacing`.
    pub fn resample_spacing(&self, spacing: f64) -> Result<Self> {
        let segs = (self.length() / spacing).round().max(2.0) as usize;
        self.resample(if self.closed { segs.max(3) } else { segs + 1 })
    }

    /// Symmetric Hausdorff distance between the sample sets (vertex-to-polyline).
    pub fn hausdorff(&self, other: &Curve) -> f64 {
        let one_way = |a: &Curve, b: &Curve| {
            a.points
                .iter()
                .map(|&p| b.distance_to(p))
                .fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }

    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        (0..self.segment_count())
            .map(|k| {
                let a = self.points[k];
                let d = self.segment(k);
                let u = ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
                (a + d * u).dist(p)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Derivative at `b` of the quadratic through `a, b, c`, parametrised by
/// chord length.
#[inline]
fn three_point_derivative(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    let hm = (b - a).norm();
    let hp = (c - b).norm();
    ((c - b) * (hm * hm) + (b - a) * (hp * hp)) / (hm * hp * (hm + hp))
}

/// Derivative at `a` of the quadratic through `a, b, c` (one-sided).
#[inline]
fn one_sided_derivative(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    let h1 = (b - a).norm();
    let h2 = h1 + (c - b).norm();
    ((b - a) * (h2 * h2) - (c - a) * (h1 * h1)) / (h1 * h2 * (h2 - h1))
}

#[inline]
fn lagrange4(ts: &[f64; 4], ps: &[Vec2; 4], t: f64) -> Vec2 {
    let mut acc = Vec2::ZERO;
    for k in 0..4 {
        let mut w = 1.0;
        for m in 0..4 {
            if m != k {
                w *= (t - ts[m]) / (ts[k] - ts[m]);
            }
        }
        acc += ps[k] * w;
    }
    acc
}
