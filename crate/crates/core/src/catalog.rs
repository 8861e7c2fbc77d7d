//! Closed-form stationary angle fields and the exact motion of their leaves.
//!
//! * `constant(c)`: parallel lines at angle `c`.
//! * `linear(a, b, c)`: `θ = a x + b y + c`; after a rigid motion this is the
//!   translating grim-reaper foliation.
//! * `polar(c)`: `θ = atan2(y, x) + c` on the punctured plane. Only
//!   `c ∈ {0, π/2, π, 3π/2}` are stationary (rays and concentric circles);
//!   other values are kept as negative controls.
//! * `grim-reaper(a, C)`: `θ = a x`, leaves `y = a t - ln cos(a x) / a + C`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::field::{wrap_angle, wrapped_diff};
use crate::geom::{Sym2, Vec2};

/// Closest approach to the origin at which polar solutions are evaluated.
pub const POLAR_SINGULAR_RADIUS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CatalogSolution {
    Constant { c: f64 },
    Linear { a: f64, b: f64, c: f64 },
    Polar { c: f64 },
    GrimReaper { a: f64, #[serde(rename = "C")] offset: f64 },
}

/// Descriptive facts about a catalog entry.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionInfo {
    pub stationary: bool,
    pub singular_locus: String,
    pub validity: String,
    /// For linear fields: the rigid motion taking the field to grim-reaper form.
    pub reduction: Option<RigidReduction>,
}

/// `θ = a x + b y + c` equals `k ξ` in the frame rotated by `rotation` and
/// shifted by `offset` along the rotated first axis, with `k = |(a, b)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidReduction {
    pub speed: f64,
    pub rotation: f64,
    pub offset: f64,
}

impl RigidReduction {
    /// Frame coordinates `(ξ, η)` of a plane point.
    pub fn to_frame(&self, p: Vec2) -> Vec2 {
        let q = p.rotate(-self.rotation);
        Vec2::new(q.x - self.offset, q.y)
    }

    pub fn from_frame(&self, q: Vec2) -> Vec2 {
        Vec2::new(q.x + self.offset, q.y).rotate(self.rotation)
    }
}

/// Hessian of `atan2(y, x) + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarHessian {
    /// Components in the coordinate basis `{∂r, ∂φ}`: `[[0, -1/r], [-1/r, 0]]`.
    pub polar: Sym2,
    /// Cartesian components obtained from `polar` by change of basis.
    pub cartesian: Sym2,
}

/// How densely and how far [`CatalogSolution::eval_leaf`] samples a leaf.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafSampling {
    pub spacing: f64,
    /// Arclength on each side of the seed for open leaves.
    pub half_length: f64,
}

impl CatalogSolution {
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        Self::Linear { a, b, c }
    }

    pub fn polar(c: f64) -> Self {
        Self::Polar { c }
    }

    pub fn grim_reaper(a: f64, offset: f64) -> Self {
        Self::GrimReaper { a, offset }
    }

    pub fn id(&self) -> String {
        match *self {
            Self::Constant { c } => format!("constant({c})"),
            Self::Linear { a, b, c } => format!("linear({a},{b},{c})"),
            Self::Polar { c } => format!("polar({c})"),
            Self::GrimReaper { a, offset } => format!("grim-reaper({a},{offset})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            Self::Constant { c } | Self::Polar { c } => c.is_finite(),
            Self::Linear { a, b, c } => a.is_finite() && b.is_finite() && c.is_finite(),
            Self::GrimReaper { a, offset } => a.is_finite() && offset.is_finite(),
        };
        if !finite {
            return Err(Error::Config(format!("non-finite parameter in {}", self.id())));
        }
        if let Self::GrimReaper { a, .. } = *self {
            if a <= 0.0 {
                return Err(Error::Config(format!("grim-reaper needs a > 0, got {a}")));
            }
        }
        Ok(())
    }

    pub fn info(&self) -> SolutionInfo {
        match *self {
            Self::Constant { .. } => SolutionInfo {
                stationary: true,
                singular_locus: "none".into(),
                validity: "whole plane".into(),
                reduction: None,
            },
            Self::Linear { .. } => SolutionInfo {
                stationary: true,
                singular_locus: "none (leaves: grim reapers between parallel straight lines)".into(),
                validity: "whole plane".into(),
                reduction: self.rigid_reduction(),
            },
            Self::Polar { c } => SolutionInfo {
                stationary: is_quarter_turn(c),
                singular_locus: "origin".into(),
                validity: "plane minus the origin".into(),
                reduction: None,
            },
            Self::GrimReaper { a, .. } => SolutionInfo {
                stationary: true,
                singular_locus: format!("leaf graphs undefined on x = π/(2·{a}) + mπ/{a}"),
                validity: "whole plane (field); |a x| < π/2 per graph window".into(),
                reduction: self.rigid_reduction(),
            },
        }
    }

    /// Velocity of every leaf when the leaves move by pure translation
    /// (zero for straight leaves); `None` for shrinking circles and the
    /// non-stationary polar fields.
    pub fn translation_velocity(&self) -> Option<Vec2> {
        match *self {
            Self::Constant { .. } => Some(Vec2::ZERO),
            Self::Linear { a, b, .. } => Some(Vec2::new(-b, a)),
            Self::GrimReaper { a, .. } => Some(Vec2::new(0.0, a)),
            Self::Polar { c } if is_multiple_of(c, PI) => Some(Vec2::ZERO),
            Self::Polar { .. } => None,
        }
    }

    fn rigid_reduction(&self) -> Option<RigidReduction> {
        let (a, b, c) = match *self {
            Self::Linear { a, b, c } => (a, b, c),
            Self::GrimReaper { a, .. } => (a, 0.0, 0.0),
            _ => return None,
        };
        let speed = a.hypot(b);
        if speed == 0.0 {
            return None;
        }
        let rotation = b.atan2(a);
        // in the rotated frame the field is speed·ξ + c - rotation
        Some(RigidReduction {
            speed,
            rotation,
            offset: -(c - rotation) / speed,
        })
    }

    fn check_domain(&self, p: Vec2) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::out_of_domain(p));
        }
        if let Self::Polar { .. } = self {
            if p.norm() < POLAR_SINGULAR_RADIUS {
                return Err(Error::Domain(format!(
                    "polar solution evaluated at the origin ({}, {})",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    /// Angle at `p`. Every catalog field is independent of `t`.
    pub fn eval_angle(&self, p: Vec2, _t: f64) -> Result<f64> {
        self.check_domain(p)?;
        Ok(match *self {
            Self::Constant { c } => c,
            Self::Linear { a, b, c } => a * p.x + b * p.y + c,
            Self::Polar { c } => p.y.atan2(p.x) + c,
            Self::GrimReaper { a, .. } => a * p.x,
        })
    }

    pub fn gradient(&self, p: Vec2) -> Result<Vec2> {
        self.check_domain(p)?;
        Ok(match *self {
            Self::Constant { .. } => Vec2::ZERO,
            Self::Linear { a, b, .. } => Vec2::new(a, b),
            Self::Polar { .. } => Vec2::new(-p.y, p.x) / p.norm_sq(),
            Self::GrimReaper { a, .. } => Vec2::new(a, 0.0),
        })
    }

    /// Cartesian Hessian from the closed form.
    pub fn hessian(&self, p: Vec2) -> Result<Sym2> {
        self.check_domain(p)?;
        Ok(match *self {
            Self::Polar { .. } => {
                let r4 = p.norm_sq() * p.norm_sq();
                Sym2::new(
                    2.0 * p.x * p.y / r4,
                    (p.y * p.y - p.x * p.x) / r4,
                    -2.0 * p.x * p.y / r4,
                )
            }
            _ => Sym2::default(),
        })
    }

    /// The exact leaf through `seed` at time `t`, oriented along `V1`.
    pub fn eval_leaf(&self, seed: Vec2, t: f64, sampling: LeafSampling) -> Result<Curve> {
        self.check_domain(seed)?;
        let LeafSampling {
            spacing,
            half_length,
        } = sampling;
        if !(spacing > 0.0 && half_length > 0.0) {
            return Err(Error::Config("leaf sampling needs positive spacing and length".into()));
        }
        let n_open = ((2.0 * half_length / spacing).round() as usize).max(2) + 1;
        match *self {
            Self::Constant { c } => straight_leaf(seed, c, half_length, n_open),
            Self::Linear { .. } | Self::GrimReaper { .. } => match self.rigid_reduction() {
                None => {
                    let c = self.eval_angle(seed, t)?;
                    straight_leaf(seed, c, half_length, n_open)
                }
                Some(red) => reaper_leaf(&red, seed, t, half_length, n_open),
            },
            Self::Polar { c } => {
                let theta = wrap_angle(c);
                let r0 = seed.norm();
                let phi0 = seed.angle();
                if is_multiple_of(theta, PI) {
                    // rays: outward for c = 0, inward for c = π
                    let dir = Vec2::from_angle(phi0 + theta);
                    let back = half_length.min(r0 - POLAR_SINGULAR_RADIUS.sqrt());
                    let pts = (0..n_open)
                        .map(|k| {
                            let u = k as f64 / (n_open - 1) as f64;
                            seed + dir * (-back + u * (back + half_length))
                        })
                        .collect();
                    Curve::new(pts, false)
                } else if is_quarter_turn(theta) {
                    let r2 = r0 * r0 - 2.0 * t;
                    if r2 <= 0.0 {
                        return Err(Error::Extinction { t });
                    }
                    let r = r2.sqrt();
                    let n = ((TAU * r / spacing).round() as usize).max(8);
                    let ccw = wrapped_diff(theta, FRAC_PI_2).abs() < 1e-9;
                    let c = Curve::from_param(
                        |u| Vec2::from_angle(phi0 + u) * r,
                        0.0,
                        TAU,
                        n,
                        true,
                    )?;
                    Ok(if ccw { c } else { c.reversed() })
                } else if t == 0.0 {
                    // logarithmic spiral r = r0 exp((φ - φ0) cot c)
                    let (s, co) = theta.sin_cos();
                    let pts = (0..n_open)
                        .map(|k| {
                            let sig = -half_length + 2.0 * half_length * k as f64 / (n_open - 1) as f64;
                            // arclength σ along the spiral from the seed: r = r0 + σ cos c
                            let r = (r0 + sig * co).max(POLAR_SINGULAR_RADIUS.sqrt());
                            let phi = if co.abs() < 1e-12 {
                                phi0 + sig / r0
                            } else {
                                phi0 + (r / r0).ln() * s / co
                            };
                            Vec2::from_angle(phi) * r
                        })
                        .collect();
                    Curve::new(pts, false)
                } else {
                    Err(Error::Domain(format!(
                        "{} is not stationary; no closed-form leaf for t > 0",
                        self.id()
                    )))
                }
            }
        }
    }
}

/// `θ ≡ c mod π/2`.
fn is_quarter_turn(c: f64) -> bool {
    is_multiple_of(c, FRAC_PI_2)
}

fn is_multiple_of(c: f64, period: f64) -> bool {
    let r = c.rem_euclid(period);
    r < 1e-9 || period - r < 1e-9
}

fn straight_leaf(seed: Vec2, angle: f64, half: f64, n: usize) -> Result<Curve> {
    let dir = Vec2::from_angle(angle);
    let pts = (0..n)
        .map(|k| seed + dir * (-half + 2.0 * half * k as f64 / (n - 1) as f64))
        .collect();
    Curve::new(pts, false)
}

/// Translating grim reaper of speed `k` in the reduced frame, through the
/// seed at `t = 0`, then moved back to the plane.
fn reaper_leaf(red: &RigidReduction, seed: Vec2, t: f64, half: f64, n: usize) -> Result<Curve> {
    let k = red.speed;
    let q = red.to_frame(seed);
    // graph window m containing the seed: |k ξ - mπ| < π/2
    let m = (k * q.x / PI).round();
    let xi_c = m * PI / k;
    let u = k * (q.x - xi_c);
    if u.abs() >= FRAC_PI_2 - 1e-12 {
        return Err(Error::Domain(format!(
            "seed ({}, {}) sits on a straight leaf between grim-reaper windows",
            seed.x, seed.y
        )));
    }
    let eta0 = q.y + u.cos().ln() / k;
    // arclength from the vertex: k σ = asinh(tan(k ξ))
    let sigma_seed = u.tan().asinh() / k;
    let flip = (m as i64).rem_euclid(2) == 1;
    let pts: Vec<Vec2> = (0..n)
        .map(|j| {
            let sig = sigma_seed - half + 2.0 * half * j as f64 / (n - 1) as f64;
            let xi = xi_c + (k * sig).sinh().atan() / k;
            let eta = eta0 + (k * sig).cosh().ln() / k + k * t;
            red.from_frame(Vec2::new(xi, eta))
        })
        .collect();
    let c = Curve::new(pts, false)?;
    // odd windows carry θ = kξ ≡ π at their vertex: traverse in -ξ
    Ok(if flip { c.reversed() } else { c })
}

impl PolarHessian {
    pub fn at(p: Vec2) -> Result<Self> {
        let r = p.norm();
        if r < POLAR_SINGULAR_RADIUS {
            return Err(Error::Domain("polar Hessian at the origin".into()));
        }
        let polar = Sym2::new(0.0, -1.0 / r, 0.0);
        // orthonormal frame {e_r, e_φ} = {∂r, ∂φ / r}
        let orth = Sym2::new(polar.xx, polar.xy / r, polar.yy / (r * r));
        let er = p / r;
        let ep = er.rotate90();
        let cart = |u: Vec2, v: Vec2| {
            orth.xx * u.dot(er) * v.dot(er)
                + orth.xy * (u.dot(er) * v.dot(ep) + u.dot(ep) * v.dot(er))
                + orth.yy * u.dot(ep) * v.dot(ep)
        };
        let ex = Vec2::new(1.0, 0.0);
        let ey = Vec2::new(0.0, 1.0);
        Ok(Self {
            polar,
            cartesian: Sym2::new(cart(ex, ex), cart(ex, ey), cart(ey, ey)),
        })
    }
}

/// Hessian of the polar field in both bases.
pub fn exact_hessian_polar(p: Vec2) -> Result<PolarHessian> {
    PolarHessian::at(p)
}
