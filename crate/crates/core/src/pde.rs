//! The degenerate angle evolution equation
//!
//! ```text
//! θ_t = θ11 cos²θ + 2 θ12 sinθ cosθ + θ22 sin²θ
//! ```
//!
//! i.e. the second derivative of `θ` along its own leaf direction `V1`.
//! Stepping uses the Cartesian form with explicit Euler. A second evaluator
//! builds the same quantity from nested first differences along the moving
//! frame, `∇_{V1}(∇θ·V1) - (∇θ·V1)(∇θ·V2)`, and is used only for
//! verification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::CatalogSolution;
use crate::error::{Error, Result};
use crate::field::{frame_at, wrap_angle, AngleField, Indexing};
use crate::geom::Vec2;

/// Largest accepted `dt / h²`.
pub const MAX_CFL_FRACTION: f64 = 0.25;
/// Default `dt / h²`.
pub const DEFAULT_CFL_FRACTION: f64 = 0.2;

/// Boundary treatment for [`step_euler`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundaryCondition {
    /// Edge nodes pinned to a catalog solution.
    DirichletExact { solution: CatalogSolution },
    /// Indices wrap in both directions; every node is updated.
    Periodic,
}

impl BoundaryCondition {
    fn indexing(&self) -> Indexing {
        match self {
            BoundaryCondition::DirichletExact { .. } => Indexing::Interior,
            BoundaryCondition::Periodic => Indexing::Periodic,
        }
    }
}

#[inline]
fn contract(theta: f64, h: crate::geom::Sym2) -> f64 {
    let (s, c) = theta.sin_cos();
    h.xx * c * c + 2.0 * h.xy * s * c + h.yy * s * s
}

/// `θ11 cos²θ + 2θ12 sinθ cosθ + θ22 sin²θ` at an interior node.
pub fn rhs_cartesian(field: &AngleField, i: usize, j: usize) -> Result<f64> {
    let st = field.stencil(i, j, Indexing::Interior)?;
    Ok(contract(st.center(), st.hessian()))
}

/// The frame form `∇_{V1}(∇θ·V1) - (∇θ·V1)(∇θ·V2)` from nested central
/// differences. Needs a two-node margin.
pub fn rhs_frame(field: &AngleField, i: usize, j: usize) -> Result<f64> {
    let g = field.grid();
    if i < 2 || j < 2 || i + 2 >= g.nx() || j + 2 >= g.ny() {
        return Err(Error::BoundaryNode { i, j });
    }
    // directional derivative along each node's own V1
    let q = |ii: usize, jj: usize| -> Result<f64> {
        let grad = field.central_gradient(ii, jj)?;
        Ok(grad.dot(frame_at(field.value(ii, jj)).v1))
    };
    let h2 = 2.0 * g.spacing();
    let dq = Vec2::new(
        (q(i + 1, j)? - q(i - 1, j)?) / h2,
        (q(i, j + 1)? - q(i, j - 1)?) / h2,
    );
    let frame = frame_at(field.value(i, j));
    let grad = field.central_gradient(i, j)?;
    Ok(dq.dot(frame.v1) - grad.dot(frame.v1) * grad.dot(frame.v2))
}

/// `|rhs_cartesian|` at the interior nodes accepted by a mask.
#[derive(Clone, Debug)]
pub struct Residual {
    /// One entry per grid node; `None` for edge or masked-out nodes.
    pub values: Vec<Option<f64>>,
    pub max: f64,
    /// Root mean square over the evaluated nodes.
    pub l2: f64,
    pub count: usize,
}

/// Residual of the stationary equation at every interior node.
pub fn stationary_residual(field: &AngleField) -> Residual {
    stationary_residual_masked(field, |_| true)
}

/// Residual of the stationary equation at interior nodes where `mask` holds.
pub fn stationary_residual_masked(field: &AngleField, mask: impl Fn(Vec2) -> bool + Sync) -> Residual {
    let g = *field.grid();
    let values: Vec<Option<f64>> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % g.nx(), k / g.nx());
            if !g.is_interior(i, j) || !mask(g.node(i, j)) {
                return None;
            }
            rhs_cartesian(field, i, j).ok().map(f64::abs)
        })
        .collect();
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    let mut count = 0;
    for v in values.iter().flatten() {
        max = max.max(*v);
        sum += v * v;
        count += 1;
    }
    Residual {
        values,
        max,
        l2: if count > 0 { (sum / count as f64).sqrt() } else { 0.0 },
        count,
    }
}

/// One instant of an explicit-Euler run.
#[derive(Clone, Debug)]
pub struct PdeState {
    field: AngleField,
    step_count: usize,
    dt: f64,
    boundary: BoundaryCondition,
    initial_time: f64,
}

impl PdeState {
    /// `dt` defaults to `0.2 h²`; anything above `0.25 h²` is refused.
    pub fn new(field: AngleField, dt: Option<f64>, boundary: BoundaryCondition) -> Result<Self> {
        let h = field.grid().spacing();
        let dt = dt.unwrap_or(DEFAULT_CFL_FRACTION * h * h);
        check_cfl(dt, h)?;
        if let BoundaryCondition::DirichletExact { solution } = boundary {
            let g = *field.grid();
            for (i, j) in g.nodes().filter(|&(i, j)| !g.is_interior(i, j)) {
                solution.eval_angle(g.node(i, j), field.time()).map_err(|e| {
                    Error::Config(format!(
                        "boundary solution {} undefined at node ({i}, {j}): {e}",
                        solution.id()
                    ))
                })?;
            }
        }
        let initial_time = field.time();
        Ok(Self {
            field: field.renormalized(),
            step_count: 0,
            dt,
            boundary,
            initial_time,
        })
    }

    pub fn field(&self) -> &AngleField {
        &self.field
    }
    pub fn into_field(self) -> AngleField {
        self.field
    }
    pub fn step_count(&self) -> usize {
        self.step_count
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }
    pub fn initial_time(&self) -> f64 {
        self.initial_time
    }
    pub fn time(&self) -> f64 {
        self.field.time()
    }
    /// `dt / h²`.
    pub fn cfl_number(&self) -> f64 {
        let h = self.field.grid().spacing();
        self.dt / (h * h)
    }

    fn advance(&self, dt: f64) -> Result<PdeState> {
        check_cfl(dt, self.field.grid().spacing())?;
        let g = *self.field.grid();
        let nx = g.nx();
        let time = if dt == self.dt {
            self.initial_time + (self.step_count + 1) as f64 * self.dt
        } else {
            self.field.time() + dt
        };
        let indexing = self.boundary.indexing();
        let src = &self.field;
        let boundary = self.boundary;
        let mut values = vec![0.0; g.len()];
        values
            .par_chunks_mut(nx)
            .enumerate()
            .try_for_each(|(j, row)| -> Result<()> {
                for (i, out) in row.iter_mut().enumerate() {
                    let old = src.value(i, j);
                    *out = match (indexing, g.is_interior(i, j), boundary) {
                        (Indexing::Interior, false, BoundaryCondition::DirichletExact { solution }) => {
                            solution.eval_angle(g.node(i, j), time)?
                        }
                        _ => {
                            let st = src.stencil(i, j, indexing)?;
                            old + dt * contract(st.center(), st.hessian())
                        }
                    };
                }
                Ok(())
            })?;
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                i: k % nx,
                j: k / nx,
                step: self.step_count + 1,
                snapshot: Box::new(AngleField::new(g, values, time)?),
            });
        }
        for v in values.iter_mut() {
            *v = wrap_angle(*v);
        }
        Ok(PdeState {
            field: AngleField::new(g, values, time)?,
            step_count: self.step_count + 1,
            dt: self.dt,
            boundary: self.boundary,
            initial_time: self.initial_time,
        })
    }
}

fn check_cfl(dt: f64, h: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    if dt > MAX_CFL_FRACTION * h * h * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "time step {dt} exceeds the stability bound {MAX_CFL_FRACTION}·h² = {}",
            MAX_CFL_FRACTION * h * h
        )));
    }
    Ok(())
}

/// One explicit Euler step of the Cartesian equation.
pub fn step_euler(state: &PdeState) -> Result<PdeState> {
    state.advance(state.dt)
}

/// When [`evolve`] records snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Cadence {
    /// Every `⌈T / (10 dt)⌉` steps.
    #[default]
    Auto,
    Every(usize),
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub state: PdeState,
    /// Initial field, periodic snapshots, and the final field.
    pub snapshots: Vec<AngleField>,
}

/// Steps until `t_final`; the last step is shortened to land on it exactly.
pub fn evolve(state: PdeState, t_final: f64, cadence: Cadence) -> Result<Evolution> {
    let t0 = state.time();
    if !(t_final >= t0) {
        return Err(Error::Config(format!(
            "final time {t_final} precedes the current time {t0}"
        )));
    }
    let span = t_final - t0;
    let dt = state.dt;
    let n_steps = if span == 0.0 { 0 } else { ((span / dt) - 1e-9).ceil().max(1.0) as usize };
    let every = match cadence {
        Cadence::Auto => ((span / (10.0 * dt)).ceil() as usize).max(1),
        Cadence::Every(n) => n.max(1),
    };
    let mut snapshots = vec![state.field.clone()];
    let mut state = state;
    for k in 1..=n_steps {
        state = if k == n_steps {
            let last = t_final - state.time();
            let mut s = if (last - dt).abs() <= 1e-12 * dt { state.advance(dt)? } else { state.advance(last)? };
            s.field = s.field.with_time(t_final);
            s
        } else {
            step_euler(&state)?
        };
        if k % every == 0 || k == n_steps {
            snapshots.push(state.field.clone());
        }
    }
    Ok(Evolution { state, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{wrapped_diff, Grid2D};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    fn annulus_grid(h: f64) -> Grid2D {
        Grid2D::from_window(-2.0, 2.0, -2.0, 2.0, h).unwrap()
    }

    fn polar(c: f64, g: Grid2D) -> AngleField {
        AngleField::from_fn(g, 0.0, |p| p.y.atan2(p.x) + c)
    }

    #[test]
    fn linear_fields_have_zero_rhs() {
        let g = annulus_grid(1.0 / 16.0);
        let f = AngleField::from_fn(g, 0.0, |p| 1.3 * p.x - 2.1 * p.y + 0.4);
        for (i, j) in g.nodes().filter(|&(i, j)| g.is_interior(i, j)) {
            assert!(rhs_cartesian(&f, i, j).unwrap().abs() < 1e-10);
        }
        assert!(rhs_cartesian(&f, 0, 5).is_err());
    }

    #[test]
    fn polar_rhs_values_at_unit_point() {
        let h = 1.0 / 64.0;
        let g = annulus_grid(h);
        let (i, j) = g.nearest_node(Vec2::new(1.0, 0.0));
        let circles = polar(FRAC_PI_2, g);
        assert!(rhs_cartesian(&circles, i, j).unwrap().abs() < 10.0 * h * h);
        let spiral = polar(FRAC_PI_4, g);
        let v = rhs_cartesian(&spiral, i, j).unwrap();
        assert!((v + 1.0).abs() < 4.0 * h * h, "{v}");
        let vf = rhs_frame(&spiral, i, j).unwrap();
        assert!((vf + 1.0).abs() < 4.0 * h, "{vf}");
        assert!(rhs_frame(&spiral, 1, 5).is_err());
    }

    #[test]
    fn rhs_invariant_under_representative_changes() {
        let g = annulus_grid(1.0 / 32.0);
        let f = polar(0.3, g);
        let shifted = f.shifted(PI);
        let (i, j) = g.nearest_node(Vec2::new(0.7, -0.9));
        let base_c = rhs_cartesian(&f, i, j).unwrap();
        let base_f = rhs_frame(&f, i, j).unwrap();
        assert!((rhs_cartesian(&shifted, i, j).unwrap() - base_c).abs() < 1e-9);
        assert!((rhs_frame(&shifted, i, j).unwrap() - base_f).abs() < 1e-9);
        for (di, dj) in [(0, 0), (1, 0), (-1, 1), (2, -2)] {
            let k = g.index((i as isize + di) as usize, (j as isize + dj) as usize);
            let bumped = f.map_values(|m, v| if m == k { v + TAU } else { v });
            assert!((rhs_cartesian(&bumped, i, j).unwrap() - base_c).abs() < 1e-9);
            assert!((rhs_frame(&bumped, i, j).unwrap() - base_f).abs() < 1e-9);
        }
    }

    #[test]
    fn cfl_violation_is_refused() {
        let g = annulus_grid(0.125);
        let f = AngleField::from_fn(g, 0.0, |p| p.x);
        let bc = BoundaryCondition::DirichletExact {
            solution: CatalogSolution::linear(1.0, 0.0, 0.0),
        };
        assert!(matches!(PdeState::new(f.clone(), Some(0.3 * 0.125 * 0.125), bc), Err(Error::Config(_))));
        let g = Grid2D::from_window(0.0, 2.0, -1.0, 1.0, 0.125).unwrap();
        let f = AngleField::from_fn(g, 0.0, |p| p.x);
        let bc = BoundaryCondition::DirichletExact { solution: CatalogSolution::polar(0.0) };
        assert!(PdeState::new(f, None, bc).is_err(), "polar boundary through the origin");
    }

    #[test]
    fn linear_field_is_fixed_by_stepping() {
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 1.0 / 32.0).unwrap();
        let sol = CatalogSolution::linear(2.0, -1.5, 0.3);
        let f = AngleField::from_fn(g, 0.0, |p| sol.eval_angle(p, 0.0).unwrap());
        let mut st = PdeState::new(f.clone(), None, BoundaryCondition::DirichletExact { solution: sol }).unwrap();
        for n in 1..=20 {
            st = step_euler(&st).unwrap();
            let drift = f
                .values()
                .iter()
                .zip(st.field().values())
                .map(|(a, b)| wrapped_diff(*a, *b).abs())
                .fold(0.0, f64::max);
            assert!(drift <= 1e-12 * n as f64, "step {n}: drift {drift}");
        }
        assert_eq!(st.step_count(), 20);
        assert!((st.time() - 20.0 * st.dt()).abs() < 1e-15);
    }

    #[test]
    fn periodic_linear_field_is_fixed() {
        // θ = 2πx on a unit period is continuous across the seam mod 2π
        let h = 1.0 / 32.0;
        let g = Grid2D::new(Vec2::ZERO, h, 32, 32).unwrap();
        let f = AngleField::from_fn(g, 0.0, |p| TAU * p.x + 0.2);
        let mut st = PdeState::new(f.clone(), None, BoundaryCondition::Periodic).unwrap();
        for _ in 0..10 {
            st = step_euler(&st).unwrap();
        }
        for (a, b) in f.values().iter().zip(st.field().values()) {
            assert!(wrapped_diff(*a, *b).abs() < 1e-11);
        }
    }

    #[test]
    fn evolve_lands_on_final_time() {
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 0.125).unwrap();
        let sol = CatalogSolution::linear(1.0, 0.0, 0.0);
        let f = AngleField::from_fn(g, 0.0, |p| p.x + 0.05 * (PI * p.x).sin() * (PI * p.y).sin());
        let st = PdeState::new(f.clone(), None, BoundaryCondition::DirichletExact { solution: sol }).unwrap();
        let same = evolve(st.clone(), 0.0, Cadence::Auto).unwrap();
        assert_eq!(same.snapshots.len(), 1);
        assert_eq!(same.state.field(), &f);
        let ev = evolve(st, 0.01, Cadence::Auto).unwrap();
        assert_eq!(ev.state.time(), 0.01);
        assert_eq!(ev.snapshots.last().unwrap().time(), 0.01);
        // 4 steps of 0.2·h², one snapshot each
        assert_eq!(ev.snapshots.len(), 5);
    }

    #[test]
    fn perturbation_stays_bounded() {
        let h = 1.0 / 32.0;
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, h).unwrap();
        let sol = CatalogSolution::linear(1.0, 0.0, 0.0);
        let f = AngleField::from_fn(g, 0.0, |p| p.x + 0.1 * (PI * p.x).sin() * (PI * p.y).sin());
        let dev = |f: &AngleField| {
            g.nodes()
                .map(|(i, j)| wrapped_diff(f.value(i, j), g.node(i, j).x).abs())
                .fold(0.0, f64::max)
        };
        let d0 = dev(&f);
        let st = PdeState::new(f, None, BoundaryCondition::DirichletExact { solution: sol }).unwrap();
        let ev = evolve(st, 0.1, Cadence::Auto).unwrap();
        for s in &ev.snapshots {
            assert!(s.values().iter().all(|v| v.is_finite()));
            assert!(dev(s) <= 1.1 * d0);
        }
    }
}
