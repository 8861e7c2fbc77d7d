//! The JSON run configuration shared by every command except `plot`.

use std::path::{Path, PathBuf};

use foliflow_core::crossval::CrossTolerances;
use foliflow_core::foliation::CurvatureMode;
use foliflow_core::initial::InitialCondition;
use foliflow_core::pde::{BoundaryCondition, Cadence};
use foliflow_core::{Grid2D, Vec2, Window};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// Edge nodes hold the base catalog solution of the initial condition.
    #[default]
    DirichletExact,
    Periodic,
}

/// Where `residual` and `reconstruct` get their angle field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSource {
    /// The initial condition itself, evaluated in closed form.
    #[default]
    Exact,
    /// Snapshots of the explicit scheme run to `t_final`.
    Pde,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest accepted Richardson estimate of a leaf's RK4 error.
    pub ode_tol: f64,
    /// Stationary residual threshold; `null` means `10 h²`.
    pub residual: Option<f64>,
    /// Largest accepted normal-velocity defect on a sheet.
    pub defect: f64,
    pub cross: CrossTolerances,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode_tol: 1e-6,
            residual: None,
            defect: 5e-3,
            cross: CrossTolerances::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSettings {
    /// Leaf step; `null` means `h / 2`.
    pub ds: Option<f64>,
    /// Base-curve step and leaf time spacing.
    pub dt: f64,
    /// Last sheet time; `null` means `t_final`.
    pub t_max: Option<f64>,
    pub curvature: CurvatureMode,
}

impl Default for ReconstructSettings {
    fn default() -> Self {
        Self {
            ds: None,
            dt: 1e-3,
            t_max: None,
            curvature: CurvatureMode::Field,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LeafOrigin {
    /// Closed-form leaves of the base catalog solution.
    #[default]
    Catalog,
    /// RK4 integral curves of the initial condition.
    Traced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OpenEnds {
    #[default]
    Free,
    /// Ends translate with the catalog solution's leaf velocity.
    Pinned,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub leaves: LeafOrigin,
    pub ends: OpenEnds,
    /// Snapshot step; each step is substepped for stability.
    pub dt: f64,
    /// Target sample spacing; `null` means `h`.
    pub spacing: Option<f64>,
    /// Record every n-th step.
    pub every: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            leaves: LeafOrigin::Catalog,
            ends: OpenEnds::Free,
            dt: 1e-4,
            spacing: None,
            every: 100,
        }
    }
}

/// `count` seeds evenly spaced from `from` to `to`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedLine {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub count: usize,
}

impl SeedLine {
    pub fn points(&self) -> Vec<Vec2> {
        let a = Vec2::new(self.from[0], self.from[1]);
        let b = Vec2::new(self.to[0], self.to[1]);
        let n = self.count;
        (0..n)
            .map(|k| a.lerp(b, if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 }))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossSettings {
    /// Seeds of pipeline B. They may lie outside the window since leaves
    /// are traced from the closed-form initial condition. `null` falls back
    /// to `seeds`.
    pub seed_line: Option<SeedLine>,
    /// Leaf step; `null` means `h / 4`.
    pub leaf_ds: Option<f64>,
    pub flow_dt: f64,
    /// `null` means `h`.
    pub target_spacing: Option<f64>,
    /// Pipeline A runs on the window grown by this much on every side.
    pub pde_padding: f64,
    pub compare_window: Option<Window>,
}

impl Default for CrossSettings {
    fn default() -> Self {
        Self {
            seed_line: None,
            leaf_ds: None,
            flow_dt: 1e-3,
            target_spacing: None,
            pde_padding: 1.0,
            compare_window: None,
        }
    }
}

fn default_s_extent() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub window: Window,
    /// Cell counts; `h = (xmax - xmin) / nx` must equal `(ymax - ymin) / ny`.
    pub nx: usize,
    pub ny: usize,
    pub initial: InitialCondition,
    #[serde(default)]
    pub boundary: BoundaryKind,
    pub t_final: f64,
    /// PDE step; `null` means `0.2 h²`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub seeds: Vec<[f64; 2]>,
    #[serde(default = "default_s_extent")]
    pub s_extent: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// PDE snapshot every n steps; `null` means about ten snapshots.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Restrict residuals and comparisons to `r_min <= |p| <= r_max`.
    #[serde(default)]
    pub annulus: Option<[f64; 2]>,
    #[serde(default)]
    pub field_source: FieldSource,
    #[serde(default)]
    pub reconstruct: ReconstructSettings,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub cross_validation: CrossSettings,
}

/// Line of the first occurrence of `"key"` in `text`, 1-based.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|n| n + 1)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate().map_err(|(key, msg)| match line_of(text, key) {
            Some(line) => CliError::Config(format!("line {line} (\"{key}\"): {msg}")),
            None => CliError::Config(msg),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn h(&self) -> f64 {
        self.window.width() / self.nx as f64
    }

    pub fn grid(&self) -> Result<Grid2D, CliError> {
        let w = self.window;
        Ok(Grid2D::from_window(w.xmin, w.xmax, w.ymin, w.ymax, self.h())?)
    }

    pub fn seed_points(&self) -> Vec<Vec2> {
        self.seeds.iter().map(|s| Vec2::new(s[0], s[1])).collect()
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        match self.boundary {
            BoundaryKind::DirichletExact => BoundaryCondition::DirichletExact {
                solution: self.initial.base(),
            },
            BoundaryKind::Periodic => BoundaryCondition::Periodic,
        }
    }

    pub fn cadence(&self) -> Cadence {
        self.snapshot_every.map_or(Cadence::Auto, Cadence::Every)
    }

    pub fn residual_threshold(&self) -> f64 {
        let h = self.h();
        self.tolerances.residual.unwrap_or(10.0 * h * h)
    }

    pub fn in_annulus(&self, p: Vec2) -> bool {
        self.annulus.map_or(true, |[r0, r1]| {
            let r = p.norm();
            r >= r0 && r <= r1
        })
    }

    /// Checks the semantic invariants; errors name the offending key.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let w = self.window;
        if !w.is_valid() {
            return Err(("window", "window must be finite with xmin < xmax and ymin < ymax".into()));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(("nx", format!("need at least 2 cells per axis, got {}x{}", self.nx, self.ny)));
        }
        let h = self.h();
        let hy = w.height() / self.ny as f64;
        if (h - hy).abs() > 1e-9 * h {
            return Err(("ny", format!("cells must be square: width/nx = {h} but height/ny = {hy}")));
        }
        self.initial.validate().map_err(|e| ("initial", e.to_string()))?;
        if let InitialCondition::Perturbed { support, .. } = self.initial {
            if !(support.xmin >= w.xmin && support.xmax <= w.xmax && support.ymin >= w.ymin && support.ymax <= w.ymax) {
                return Err(("support", "perturbation support must lie inside the window".into()));
            }
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(("t_final", format!("t_final must be finite and >= 0, got {}", self.t_final)));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(("dt", format!("dt must be positive, got {dt}")));
            }
        }
        for (k, p) in self.seed_points().into_iter().enumerate() {
            if !w.contains(p, 2.0 * h) {
                return Err((
                    "seeds",
                    format!("seed {k} at ({}, {}) is not inside the window with a 2h = {} margin", p.x, p.y, 2.0 * h),
                ));
            }
        }
        if !(self.s_extent > 0.0 && self.s_extent.is_finite()) {
            return Err(("s_extent", format!("s_extent must be positive, got {}", self.s_extent)));
        }
        if self.snapshot_every == Some(0) {
            return Err(("snapshot_every", "snapshot_every must be at least 1".into()));
        }
        let t = &self.tolerances;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(t.ode_tol) || !positive(t.defect) || !t.residual.map_or(true, positive) {
            return Err(("tolerances", "tolerances must be positive".into()));
        }
        if !(positive(t.cross.max) && positive(t.cross.l2) && (0.0..=1.0).contains(&t.cross.coverage)) {
            return Err(("cross", "cross tolerances need max, l2 > 0 and coverage in [0, 1]".into()));
        }
        if let Some([r0, r1]) = self.annulus {
            if !(r0 >= 0.0 && r1 > r0) {
                return Err(("annulus", format!("annulus needs 0 <= r_min < r_max, got [{r0}, {r1}]")));
            }
        }
        let r = &self.reconstruct;
        if !positive(r.dt) || !r.ds.map_or(true, positive) || !r.t_max.map_or(true, |v| v >= 0.0) {
            return Err(("reconstruct", "reconstruct needs dt > 0, ds > 0 and t_max >= 0".into()));
        }
        let f = &self.flow;
        if !positive(f.dt) || !f.spacing.map_or(true, positive) || f.every == 0 {
            return Err(("flow", "flow needs dt > 0, spacing > 0 and every >= 1".into()));
        }
        let c = &self.cross_validation;
        if !positive(c.flow_dt)
            || !c.leaf_ds.map_or(true, positive)
            || !c.target_spacing.map_or(true, positive)
            || !(c.pde_padding >= 0.0 && c.pde_padding.is_finite())
        {
            return Err((
                "cross_validation",
                "cross_validation needs flow_dt, leaf_ds, target_spacing > 0 and pde_padding >= 0".into(),
            ));
        }
        if let Some(line) = c.seed_line {
            if line.count < 2 {
                return Err(("seed_line", format!("seed_line needs at least 2 seeds, got {}", line.count)));
            }
        }
        if let Some(cw) = c.compare_window {
            if !cw.is_valid() {
                return Err(("compare_window", "compare_window is empty".into()));
            }
        }
        Ok(())
    }
}
