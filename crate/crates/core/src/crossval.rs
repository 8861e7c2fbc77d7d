//! Cross-validation of the angle equation against the curve flow.
//!
//! Pipeline A evolves `θ₀` with the explicit scheme. Pipeline B traces leaves
//! of `θ₀`, flows each by curve shortening, and samples their tangent angle
//! back onto the grid. The two fields are compared mod π.

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogSolution;
use crate::csf::{evolve_family, extract_angle_field, CurveFamily, EndCondition, ExtractOptions, FlowingCurve};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::field::{wrapped_diff_mod_pi, AngleField, Grid2D};
use crate::foliation::{integrate_leaf, Leaf, LeafOptions};
use crate::geom::{Vec2, Window};
use crate::initial::InitialCondition;
use crate::pde::{evolve, BoundaryCondition, Cadence, PdeState};
use crate::source::AngleSource;

/// Outcome of a thresholded check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossTolerances {
    pub max: f64,
    pub l2: f64,
    /// Minimum covered fraction of the comparison nodes.
    pub coverage: f64,
}

impl Default for CrossTolerances {
    fn default() -> Self {
        Self { max: 1e-2, l2: 3e-3, coverage: 0.8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValidation {
    pub initial: InitialCondition,
    pub window: Window,
    pub h: f64,
    pub t_final: f64,
    /// PDE step; defaults to `0.2 h²`.
    pub dt: Option<f64>,
    /// Dirichlet data for pipeline A.
    pub boundary: CatalogSolution,
    /// Pipeline A runs on `window` grown by this much on every side.
    pub pde_padding: f64,
    pub seeds: Vec<Vec2>,
    pub s_extent: f64,
    pub leaf_ds: f64,
    /// Snapshot step of the curve flow (substepped internally).
    pub flow_dt: f64,
    pub target_spacing: f64,
    pub compare_window: Option<Window>,
    /// Compare only where `r_min <= |p| <= r_max`.
    pub annulus: Option<(f64, f64)>,
    pub tolerances: CrossTolerances,
}

#[derive(Clone, Debug)]
pub struct CrossReport {
    pub grid: Grid2D,
    pub pde_field: AngleField,
    pub flow_field: AngleField,
    /// Nodes within the extraction distance of some final leaf.
    pub flow_mask: Vec<bool>,
    /// Node-wise `|A - B|` mod π where compared.
    pub error: Vec<Option<f64>>,
    pub max_error: f64,
    pub l2_error: f64,
    pub coverage: f64,
    pub compared: usize,
    pub verdict: Verdict,
    pub pde_steps: usize,
    pub leaf_count: usize,
    pub dropped: usize,
    pub final_family: CurveFamily,
    pub initial_family: CurveFamily,
    pub max_distance: f64,
}

/// Samples `src` at every node; nodes where it is undefined get 0 and are
/// flagged.
pub fn sample_source<S: AngleSource + ?Sized>(src: &S, grid: Grid2D, t: f64) -> Result<(AngleField, Vec<bool>)> {
    let mut singular = vec![false; grid.len()];
    let mut values = vec![0.0; grid.len()];
    for (i, j) in grid.nodes() {
        let k = grid.index(i, j);
        match src.angle(grid.node(i, j), t) {
            Ok(v) => values[k] = v,
            Err(Error::Domain(_)) => singular[k] = true,
            Err(e) => return Err(e),
        }
    }
    Ok((AngleField::new(grid, values, t)?, singular))
}

/// Turns a traced leaf into a curve, closing it if the forward trace comes
/// back around to the start.
pub fn leaf_to_curve(leaf: &Leaf) -> Result<Curve> {
    let start = leaf.anchor();
    let a = (-leaf.first) as usize;
    let min_steps = 8;
    let mut travelled = 0.0;
    for k in a + 1..leaf.points.len() {
        travelled += leaf.points[k].dist(leaf.points[k - 1]);
        if k - a >= min_steps && travelled > 4.0 * leaf.ds && leaf.points[k].dist(start) < 0.75 * leaf.ds {
            return Curve::new(leaf.points[a..k].to_vec(), true);
        }
    }
    leaf.curve()
}

impl CrossValidation {
    pub fn grid(&self) -> Result<Grid2D> {
        let w = self.window;
        Grid2D::from_window(w.xmin, w.xmax, w.ymin, w.ymax, self.h)
    }

    /// Pipeline A: the explicit scheme on the padded window, restricted to
    /// the comparison grid. Also returns the step count and singular nodes.
    pub fn pipeline_a(&self) -> Result<(AngleField, usize, Vec<bool>)> {
        let grid = self.grid()?;
        let pad_cells = (self.pde_padding / self.h).round().max(0.0) as usize;
        let pad = pad_cells as f64 * self.h;
        let w = self.window;
        let big = Grid2D::from_window(w.xmin - pad, w.xmax + pad, w.ymin - pad, w.ymax + pad, self.h)?;
        let (f0, singular_big) = sample_source(&self.initial, big, 0.0)?;
        let state = PdeState::new(f0, self.dt, BoundaryCondition::DirichletExact { solution: self.boundary })?;
        let ev = evolve(state, self.t_final, Cadence::Auto)?;
        let steps = ev.state.step_count();
        let fb = ev.state.into_field();
        let mut values = Vec::with_capacity(grid.len());
        let mut singular = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let k = big.index(i + pad_cells, j + pad_cells);
                values.push(fb.values()[k]);
                singular.push(singular_big[k]);
            }
        }
        Ok((AngleField::new(grid, values, self.t_final)?, steps, singular))
    }

    /// The `t = 0` leaves of pipeline B.
    pub fn initial_family(&self) -> Result<CurveFamily> {
        let opts = LeafOptions::new(self.s_extent, self.leaf_ds);
        let curves = self
            .seeds
            .iter()
            .enumerate()
            .map(|(n, &seed)| {
                let leaf = integrate_leaf(&self.initial, 0.0, seed, opts)
                    .map_err(|e| Error::Config(format!("seed {n} at ({}, {}): {e}", seed.x, seed.y)))?;
                let curve = leaf_to_curve(&leaf)?;
                let ends = if curve.is_closed() { EndCondition::Closed } else { EndCondition::Free };
                FlowingCurve::new(curve, 0.0, ends, self.target_spacing)
            })
            .collect::<Result<Vec<_>>>()?;
        CurveFamily::new(curves)
    }

    pub fn run(&self) -> Result<CrossReport> {
        if self.seeds.len() < 2 {
            return Err(Error::Config("cross-validation needs at least two seeds".into()));
        }
        let grid = self.grid()?;
        let (pde_field, pde_steps, singular) = self.pipeline_a()?;

        let initial_family = self.initial_family()?;
        let max_distance = 2.0 * initial_family.inter_leaf_spacing();
        let ev = evolve_family(&initial_family, self.t_final, self.flow_dt, usize::MAX)?;
        let final_family = ev.snapshots.last().cloned().expect("evolution keeps the initial snapshot");
        let ex = extract_angle_field(&final_family, &grid, ExtractOptions { max_distance, blend: true })?;

        let cw = self.compare_window.unwrap_or(self.window);
        let mut error = vec![None; grid.len()];
        let (mut eligible, mut compared) = (0usize, 0usize);
        let (mut max_error, mut sum): (f64, f64) = (0.0, 0.0);
        for (i, j) in grid.nodes() {
            let k = grid.index(i, j);
            let p = grid.node(i, j);
            if !cw.contains(p, -1e-12) || singular[k] {
                continue;
            }
            if let Some((r0, r1)) = self.annulus {
                let r = p.norm();
                if r < r0 || r > r1 {
                    continue;
                }
            }
            eligible += 1;
            if !ex.mask[k] {
                continue;
            }
            let e = wrapped_diff_mod_pi(pde_field.values()[k], ex.field.values()[k]);
            error[k] = Some(e);
            compared += 1;
            max_error = max_error.max(e);
            sum += e * e;
        }
        if eligible == 0 {
            return Err(Error::Config("the comparison region contains no grid nodes".into()));
        }
        let coverage = compared as f64 / eligible as f64;
        let l2_error = if compared > 0 { (sum / compared as f64).sqrt() } else { 0.0 };
        let tol = self.tolerances;
        let verdict = if coverage < tol.coverage {
            Verdict::Inconclusive
        } else if max_error <= tol.max && l2_error <= tol.l2 {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Ok(CrossReport {
            grid,
            pde_field,
            flow_field: ex.field,
            flow_mask: ex.mask,
            error,
            max_error,
            l2_error,
            coverage,
            compared,
            verdict,
            pde_steps,
            leaf_count: initial_family.len(),
            dropped: ev.dropped.len(),
            final_family,
            initial_family,
            max_distance,
        })
    }
}
