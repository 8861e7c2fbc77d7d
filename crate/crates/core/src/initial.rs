//! Initial angle fields: a catalog solution, optionally plus a perturbation
//! supported inside a window.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogSolution;
use crate::error::{Error, Result};
use crate::geom::{Vec2, Window};
use crate::source::AngleSource;

/// Perturbation profiles. Both vanish on and outside the support window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bump {
    /// `sin(2π(x - xmin)/Lx) · sin(2π(y - ymin)/Ly)`; on `[-1, 1]²` this is
    /// `sin(πx) sin(πy)`.
    SinSin,
    /// `exp(1 - 1/(1 - ρ²))` on the inscribed ellipse, peak value 1.
    Smooth,
}

impl Bump {
    pub fn value_and_gradient(&self, w: &Window, p: Vec2) -> (f64, Vec2) {
        if !w.contains(p, 0.0) {
            return (0.0, Vec2::ZERO);
        }
        match self {
            Bump::SinSin => {
                let kx = TAU / w.width();
                let ky = TAU / w.height();
                let (sx, cx) = (kx * (p.x - w.xmin)).sin_cos();
                let (sy, cy) = (ky * (p.y - w.ymin)).sin_cos();
                (sx * sy, Vec2::new(kx * cx * sy, ky * sx * cy))
            }
            Bump::Smooth => {
                let c = w.center();
                let ax = 0.5 * w.width();
                let ay = 0.5 * w.height();
                let u = Vec2::new((p.x - c.x) / ax, (p.y - c.y) / ay);
                let rho2 = u.norm_sq();
                if rho2 >= 1.0 {
                    return (0.0, Vec2::ZERO);
                }
                let q = 1.0 - rho2;
                let v = (1.0 - 1.0 / q).exp();
                // d/dρ² of exp(1 - 1/q) = -v / q²
                let dv = -v / (q * q);
                (v, Vec2::new(dv * 2.0 * u.x / ax, dv * 2.0 * u.y / ay))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Catalog {
        solution: CatalogSolution,
    },
    Perturbed {
        base: CatalogSolution,
        amplitude: f64,
        bump: Bump,
        support: Window,
    },
}

impl InitialCondition {
    pub fn base(&self) -> CatalogSolution {
        match *self {
            InitialCondition::Catalog { solution } => solution,
            InitialCondition::Perturbed { base, .. } => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base().validate()?;
        if let InitialCondition::Perturbed {
            amplitude, support, ..
        } = *self
        {
            if !(amplitude >= 0.0 && amplitude.is_finite()) {
                return Err(Error::Config(format!(
                    "perturbation amplitude must be finite and >= 0, got {amplitude}"
                )));
            }
            if !support.is_valid() {
                return Err(Error::Config("perturbation support window is empty".into()));
            }
        }
        Ok(())
    }
}

impl AngleSource for InitialCondition {
    fn angle(&self, p: Vec2, t: f64) -> Result<f64> {
        let base = self.base().eval_angle(p, t)?;
        Ok(match *self {
            InitialCondition::Catalog { .. } => base,
            InitialCondition::Perturbed {
                amplitude,
                bump,
                support,
                ..
            } => base + amplitude * bump.value_and_gradient(&support, p).0,
        })
    }

    fn gradient(&self, p: Vec2, _t: f64) -> Result<Vec2> {
        let base = self.base().gradient(p)?;
        Ok(match *self {
            InitialCondition::Catalog { .. } => base,
            InitialCondition::Perturbed {
                amplitude,
                bump,
                support,
                ..
            } => base + bump.value_and_gradient(&support, p).1 * amplitude,
        })
    }

    fn inside(&self, p: Vec2) -> bool {
        self.base().inside(p)
    }
}
