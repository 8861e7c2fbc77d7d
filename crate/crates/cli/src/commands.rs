//! The five config-driven pipelines.

use foliflow_core::catalog::LeafSampling;
use foliflow_core::crossval::{leaf_to_curve, sample_source, CrossValidation, Verdict};
use foliflow_core::csf::{evolve_family, CurveFamily, EndCondition, FlowingCurve};
use foliflow_core::field::Grid2D;
use foliflow_core::foliation::{build_sheet, integrate_leaf, sheet_diagnostics, LeafOptions, SheetOptions};
use foliflow_core::pde::{evolve, stationary_residual_masked, Evolution, PdeState};
use foliflow_core::source::{Clipped, FieldSeries};
use foliflow_core::{AngleSource, Vec2};
use serde::Serialize;

use crate::config::{BoundaryKind, FieldSource, LeafOrigin, OpenEnds, RunConfig};
use crate::error::{CliError, Outcome};
use crate::output::{curves_table, field_table, num, OutDir, Table};

/// Prints progress lines unless quiet.
#[derive(Clone, Copy, Debug, Default)]
pub struct Log {
    pub quiet: bool,
}

impl Log {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

#[derive(Serialize)]
struct Details<'a, S> {
    config: &'a RunConfig,
    summary: &'a S,
}

fn finish<S: Serialize>(out: &mut OutDir, command: &str, cfg: &RunConfig, summary: &S) -> Result<(), CliError> {
    out.write_json("summary.json", summary)?;
    out.write_manifest(command, &Details { config: cfg, summary })
}

fn run_pde(cfg: &RunConfig) -> Result<Evolution, CliError> {
    let (f0, _) = sample_source(&cfg.initial, cfg.grid()?, 0.0)?;
    let state = PdeState::new(f0, cfg.dt, cfg.boundary_condition())?;
    Ok(evolve(state, cfg.t_final, cfg.cadence())?)
}

/// True at nodes whose 3x3 neighbourhood avoids every singular node.
fn clear_of(grid: &Grid2D, singular: &[bool]) -> Vec<bool> {
    let mut ok = vec![true; grid.len()];
    for (i, j) in grid.nodes() {
        if !singular[grid.index(i, j)] {
            continue;
        }
        for jj in j.saturating_sub(1)..=(j + 1).min(grid.ny() - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(grid.nx() - 1) {
                ok[grid.index(ii, jj)] = false;
            }
        }
    }
    ok
}

#[derive(Serialize)]
struct ResidualSummary {
    field_source: FieldSource,
    time: f64,
    max: f64,
    l2: f64,
    count: usize,
    threshold: f64,
    verdict: &'static str,
}

pub fn residual(cfg: &RunConfig, out: &mut OutDir, log: Log) -> Result<Outcome, CliError> {
    let grid = cfg.grid()?;
    let (_, singular) = sample_source(&cfg.initial, grid, 0.0)?;
    let field = match cfg.field_source {
        FieldSource::Exact => sample_source(&cfg.initial, grid, 0.0)?.0,
        FieldSource::Pde => run_pde(cfg)?.state.into_field(),
    };
    let clear = clear_of(&grid, &singular);
    let res = stationary_residual_masked(&field, |p| {
        let (i, j) = grid.nearest_node(p);
        clear[grid.index(i, j)] && cfg.in_annulus(p)
    });
    let mut t = Table::new(&["x", "y", "residual"])?;
    for (i, j) in grid.nodes() {
        if let Some(r) = res.values[grid.index(i, j)] {
            let p = grid.node(i, j);
            t.row(&[num(p.x), num(p.y), num(r)])?;
        }
    }
    out.write_csv("residual.csv", t)?;
    let threshold = cfg.residual_threshold();
    let outcome = if res.count == 0 {
        Outcome::Inconclusive
    } else if res.max <= threshold {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    let summary = ResidualSummary {
        field_source: cfg.field_source,
        time: field.time(),
        max: res.max,
        l2: res.l2,
        count: res.count,
        threshold,
        verdict: outcome.label(),
    };
    log.say(format!(
        "residual: max {:.3e}, L2 {:.3e} over {} nodes (threshold {:.3e}): {}",
        res.max,
        res.l2,
        res.count,
        threshold,
        outcome.label()
    ));
    finish(out, "residual", cfg, &summary)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct SnapshotEntry {
    file: String,
    t: f64,
}

#[derive(Serialize)]
struct PdeSummary {
    steps: usize,
    dt: f64,
    cfl_number: f64,
    t_final: f64,
    snapshots: Vec<SnapshotEntry>,
}

pub fn solve_pde(cfg: &RunConfig, out: &mut OutDir, log: Log) -> Result<Outcome, CliError> {
    let ev = run_pde(cfg)?;
    let mut snapshots = Vec::new();
    for (k, f) in ev.snapshots.iter().enumerate() {
        let file = format!("snapshot_{k:04}.csv");
        out.write_csv(&file, field_table(f, None)?)?;
        snapshots.push(SnapshotEntry { file, t: f.time() });
    }
    let summary = PdeSummary {
        steps: ev.state.step_count(),
        dt: ev.state.dt(),
        cfl_number: ev.state.cfl_number(),
        t_final: ev.state.time(),
        snapshots,
    };
    log.say(format!(
        "solve-pde: {} steps of dt = {:.3e} (CFL {:.3}), {} snapshots",
        summary.steps,
        summary.dt,
        summary.cfl_number,
        summary.snapshots.len()
    ));
    finish(out, "solve-pde", cfg, &summary)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct SheetSummary {
    seed: [f64; 2],
    leaves: usize,
    truncated: bool,
    max_d: f64,
    max_heat_residual: f64,
    base_d: f64,
    ode_error: Option<f64>,
}

#[derive(Serialize)]
struct ReconstructSummary {
    field_source: FieldSource,
    t_max: f64,
    defect_tolerance: f64,
    ode_tolerance: f64,
    sheets: Vec<SheetSummary>,
    verdict: &'static str,
}

fn require_seeds(cfg: &RunConfig, command: &str) -> Result<Vec<Vec2>, CliError> {
    let seeds = cfg.seed_points();
    if seeds.is_empty() {
        return Err(CliError::Config(format!("{command} needs at least one seed (config \"seeds\" or --seed)")));
    }
    Ok(seeds)
}

fn reconstruct_with<S: AngleSource>(
    cfg: &RunConfig,
    src: &S,
    t_max: f64,
    out: &mut OutDir,
    log: Log,
) -> Result<Outcome, CliError> {
    let seeds = require_seeds(cfg, "reconstruct")?;
    let h = cfg.h();
    let r = cfg.reconstruct;
    let ds = r.ds.unwrap_or(0.5 * h);
    let opts = SheetOptions { s_extent: cfg.s_extent, ds, dt: r.dt, t_max };
    let tol = cfg.tolerances;
    let mut sheets = Vec::new();
    let mut ok = true;
    for (k, &seed) in seeds.iter().enumerate() {
        let ctx = format!("seed {k} at ({}, {}): ", seed.x, seed.y);
        let sheet = build_sheet(src, seed, 0.0, opts).map_err(|e| CliError::core(ctx.clone(), e))?;
        let diag = sheet_diagnostics(&sheet, src, r.curvature).map_err(|e| CliError::core(ctx.clone(), e))?;
        let probe = integrate_leaf(src, 0.0, seed, LeafOptions { estimate_error: true, ..LeafOptions::new(cfg.s_extent, ds) })
            .map_err(|e| CliError::core(ctx.clone(), e))?;

        let mut t = Table::new(&["t", "s", "x", "y"])?;
        for leaf in &sheet.leaves {
            for (n, p) in leaf.points.iter().enumerate() {
                t.row(&[num(leaf.time), num(leaf.s_at(leaf.first + n as isize)), num(p.x), num(p.y)])?;
            }
        }
        out.write_csv(&format!("sheet_{k:03}_leaves.csv"), t)?;
        let mut t = Table::new(&["t", "x", "y"])?;
        for (tt, p) in &sheet.base.samples {
            t.row(&[num(*tt), num(p.x), num(p.y)])?;
        }
        out.write_csv(&format!("sheet_{k:03}_base.csv"), t)?;
        let mut t = Table::new(&["t", "s", "D", "heat_residual"])?;
        for d in &diag.samples {
            t.row(&[num(d.t), num(d.s), num(d.d), d.residual.map(num).unwrap_or_default()])?;
        }
        out.write_csv(&format!("sheet_{k:03}_diagnostics.csv"), t)?;

        let sheet_ok = diag.max_d <= tol.defect && probe.ode_error.map_or(true, |e| e <= tol.ode_tol);
        ok &= sheet_ok;
        log.say(format!(
            "reconstruct: seed {k}: {} leaves, max |D| {:.3e}, max heat residual {:.3e}{}",
            sheet.leaves.len(),
            diag.max_d,
            diag.max_residual,
            if sheet.truncated() { " (truncated at the domain margin)" } else { "" }
        ));
        sheets.push(SheetSummary {
            seed: [seed.x, seed.y],
            leaves: sheet.leaves.len(),
            truncated: sheet.truncated(),
            max_d: diag.max_d,
            max_heat_residual: diag.max_residual,
            base_d: diag.base_d,
            ode_error: probe.ode_error,
        });
    }
    let outcome = if ok { Outcome::Pass } else { Outcome::Fail };
    let summary = ReconstructSummary {
        field_source: cfg.field_source,
        t_max,
        defect_tolerance: tol.defect,
        ode_tolerance: tol.ode_tol,
        sheets,
        verdict: outcome.label(),
    };
    finish(out, "reconstruct", cfg, &summary)?;
    Ok(outcome)
}

pub fn reconstruct(cfg: &RunConfig, out: &mut OutDir, log: Log) -> Result<Outcome, CliError> {
    let t_max = cfg.reconstruct.t_max.unwrap_or(cfg.t_final);
    match cfg.field_source {
        FieldSource::Exact => {
            let src = Clipped { inner: cfg.initial, window: cfg.window };
            reconstruct_with(cfg, &src, t_max, out, log)
        }
        FieldSource::Pde => {
            if t_max > cfg.t_final {
                return Err(CliError::Config(format!(
                    "reconstruct t_max {t_max} exceeds the PDE run length {}",
                    cfg.t_final
                )));
            }
            let src = FieldSeries::new(run_pde(cfg)?.snapshots)?;
            reconstruct_with(cfg, &src, t_max, out, log)
        }
    }
}

#[derive(Serialize)]
struct FlowSummary {
    leaves: usize,
    snapshots: usize,
    dropped: Vec<foliflow_core::csf::DroppedLeaf>,
    final_min_distance: f64,
}

fn centroid(pts: &[Vec2]) -> Vec2 {
    let s = pts.iter().fold(Vec2::ZERO, |a, p| a + *p);
    s * (1.0 / pts.len() as f64)
}

pub fn flow_curves(cfg: &RunConfig, out: &mut OutDir, log: Log) -> Result<Outcome, CliError> {
    let seeds = require_seeds(cfg, "flow-curves")?;
    let f = cfg.flow;
    let spacing = f.spacing.unwrap_or(cfg.h());
    let base = cfg.initial.base();
    let mut curves = Vec::with_capacity(seeds.len());
    for (k, &seed) in seeds.iter().enumerate() {
        let ctx = format!("seed {k} at ({}, {}): ", seed.x, seed.y);
        let curve = match f.leaves {
            LeafOrigin::Catalog => base.eval_leaf(seed, 0.0, LeafSampling { spacing, half_length: cfg.s_extent }),
            LeafOrigin::Traced => integrate_leaf(&cfg.initial, 0.0, seed, LeafOptions::new(cfg.s_extent, 0.25 * spacing))
                .and_then(|l| leaf_to_curve(&l)),
        }
        .map_err(|e| CliError::core(ctx.clone(), e))?;
        let ends = if curve.is_closed() {
            EndCondition::Closed
        } else {
            match f.ends {
                OpenEnds::Free => EndCondition::Free,
                OpenEnds::Pinned => EndCondition::Pinned {
                    velocity: base.translation_velocity().ok_or_else(|| {
                        CliError::Config(format!("{ctx}{} has no translating leaves to pin ends to", base.id()))
                    })?,
                },
            }
        };
        curves.push(FlowingCurve::new(curve, 0.0, ends, spacing).map_err(|e| CliError::core(ctx, e))?);
    }
    let family = CurveFamily::new(curves)?;
    let ev = evolve_family(&family, cfg.t_final, f.dt, f.every)?;

    out.write_csv("curves.csv", curves_table(&ev.snapshots)?)?;
    let mut t = Table::new(&["t", "leaf", "length", "cx", "cy", "radius"])?;
    for fam in &ev.snapshots {
        for (c, label) in fam.curves.iter().zip(&fam.labels) {
            let pts = c.curve().points();
            let m = centroid(pts);
            let radius = pts.iter().map(|p| p.dist(m)).sum::<f64>() / pts.len() as f64;
            t.row(&[num(fam.time), label.to_string(), num(c.curve().length()), num(m.x), num(m.y), num(radius)])?;
        }
    }
    out.write_csv("leaves.csv", t)?;
    let mut t = Table::new(&["t", "min_distance"])?;
    for &(tt, d) in &ev.min_distance {
        t.row(&[num(tt), if d.is_finite() { num(d) } else { String::new() }])?;
    }
    out.write_csv("distances.csv", t)?;

    for d in &ev.dropped {
        log.say(format!("flow-curves: leaf {} became extinct at t = {}", d.label, d.time));
    }
    let summary = FlowSummary {
        leaves: family.len(),
        snapshots: ev.snapshots.len(),
        dropped: ev.dropped.clone(),
        final_min_distance: ev.min_distance.last().map_or(f64::INFINITY, |m| m.1),
    };
    log.say(format!(
        "flow-curves: {} leaves to t = {}, {} snapshots, {} extinct",
        summary.leaves,
        cfg.t_final,
        summary.snapshots,
        summary.dropped.len()
    ));
    finish(out, "flow-curves", cfg, &summary)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct CrossSummary {
    max_error: f64,
    l2_error: f64,
    coverage: f64,
    compared: usize,
    tolerances: foliflow_core::crossval::CrossTolerances,
    pde_steps: usize,
    leaf_count: usize,
    dropped: usize,
    max_distance: f64,
    verdict: Verdict,
}

/// The cross-validation problem described by `cfg`.
pub fn cross_problem(cfg: &RunConfig) -> Result<CrossValidation, CliError> {
    if cfg.boundary != BoundaryKind::DirichletExact {
        return Err(CliError::Config("cross-validate needs the dirichlet-exact boundary".into()));
    }
    let c = cfg.cross_validation;
    let seeds = match c.seed_line {
        Some(line) => line.points(),
        None => cfg.seed_points(),
    };
    let h = cfg.h();
    Ok(CrossValidation {
        initial: cfg.initial,
        window: cfg.window,
        h,
        t_final: cfg.t_final,
        dt: cfg.dt,
        boundary: cfg.initial.base(),
        pde_padding: c.pde_padding,
        seeds,
        s_extent: cfg.s_extent,
        leaf_ds: c.leaf_ds.unwrap_or(0.25 * h),
        flow_dt: c.flow_dt,
        target_spacing: c.target_spacing.unwrap_or(h),
        compare_window: c.compare_window,
        annulus: cfg.annulus.map(|[a, b]| (a, b)),
        tolerances: cfg.tolerances.cross,
    })
}

pub fn cross_validate(cfg: &RunConfig, out: &mut OutDir, log: Log) -> Result<Outcome, CliError> {
    let report = cross_problem(cfg)?.run()?;
    out.write_csv("pde_field.csv", field_table(&report.pde_field, None)?)?;
    out.write_csv("flow_field.csv", field_table(&report.flow_field, Some(&report.flow_mask))?)?;
    let g = report.grid;
    let mut t = Table::new(&["x", "y", "error"])?;
    for (i, j) in g.nodes() {
        if let Some(e) = report.error[g.index(i, j)] {
            let p = g.node(i, j);
            t.row(&[num(p.x), num(p.y), num(e)])?;
        }
    }
    out.write_csv("error.csv", t)?;
    out.write_csv("curves.csv", curves_table([&report.initial_family, &report.final_family])?)?;
    let outcome = match report.verdict {
        Verdict::Pass => Outcome::Pass,
        Verdict::Fail => Outcome::Fail,
        Verdict::Inconclusive => Outcome::Inconclusive,
    };
    let summary = CrossSummary {
        max_error: report.max_error,
        l2_error: report.l2_error,
        coverage: report.coverage,
        compared: report.compared,
        tolerances: cfg.tolerances.cross,
        pde_steps: report.pde_steps,
        leaf_count: report.leaf_count,
        dropped: report.dropped,
        max_distance: report.max_distance,
        verdict: report.verdict,
    };
    log.say(format!(
        "cross-validate: max {:.3e}, L2 {:.3e}, coverage {:.1}% over {} nodes: {}",
        report.max_error,
        report.l2_error,
        100.0 * report.coverage,
        report.compared,
        outcome.label()
    ));
    finish(out, "cross-validate", cfg, &summary)?;
    Ok(outcome)
}
