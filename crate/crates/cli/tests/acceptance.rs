//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Pass criterion numbers as arguments to run a subset.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use foliflow_cli::{run, Cli, Outcome};
use foliflow_core::crossval::{CrossTolerances, CrossValidation, Verdict};
use foliflow_core::csf::{csf_step, evolve_curve, heat_residual_along_curve, EndCondition, FlowingCurve};
use foliflow_core::foliation::{
    build_sheet, integrate_base_curve, integrate_leaf, sheet_diagnostics, straightness_check, CurvatureMode,
    LeafOptions, SheetOptions, Straightness, StraightnessOptions,
};
use foliflow_core::initial::{Bump, InitialCondition};
use foliflow_core::pde::{rhs_cartesian, rhs_frame, stationary_residual_masked, step_euler, BoundaryCondition, PdeState};
use foliflow_core::source::FieldSeries;
use foliflow_core::{AngleField, CatalogSolution, Curve, Grid2D, Vec2, Window};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Samples a catalog field; the polar singularity gets 0.
fn sampled(sol: CatalogSolution, g: Grid2D) -> AngleField {
    AngleField::from_fn(g, 0.0, |p| sol.eval_angle(p, 0.0).unwrap_or(0.0))
}

fn annulus(p: Vec2) -> bool {
    let r = p.norm();
    (0.5..=2.0).contains(&r)
}

fn c1_stationary() -> Check {
    let h = 1.0 / 64.0;
    let g = Grid2D::from_window(-2.0, 2.0, -2.0, 2.0, h).unwrap();
    let tol = 10.0 * h * h;
    let mut lines = Vec::new();
    let mut ok = true;
    let lin = stationary_residual_masked(&sampled(CatalogSolution::linear(1.0, 0.5, 0.2), g), annulus);
    ok &= lin.max <= 1e-10;
    lines.push(format!("linear {:.1e}", lin.max));
    for (name, c) in [("0", 0.0), ("π/2", FRAC_PI_2), ("π", PI), ("3π/2", 1.5 * PI)] {
        let r = stationary_residual_masked(&sampled(CatalogSolution::polar(c), g), annulus);
        ok &= r.max <= tol && r.count > 0;
        lines.push(format!("polar({name}) {:.2e}", r.max));
    }
    let neg = stationary_residual_masked(&sampled(CatalogSolution::polar(FRAC_PI_4), g), annulus);
    ok &= neg.max >= 0.2;
    lines.push(format!("polar(π/4) {:.2} (needs >= 0.2)", neg.max));
    ensure(ok, format!("max <= {tol:.2e}: {}", lines.join(", ")))
}

fn frame_gap(h: f64) -> f64 {
    let g = Grid2D::from_window(-2.0, 2.0, -2.0, 2.0, h).unwrap();
    let f = sampled(CatalogSolution::polar(FRAC_PI_4), g);
    g.nodes()
        .filter(|&(i, j)| annulus(g.node(i, j)))
        .filter_map(|(i, j)| Some((rhs_cartesian(&f, i, j).ok()? - rhs_frame(&f, i, j).ok()?).abs()))
        .fold(0.0, f64::max)
}

fn c2_frame_equivalence() -> Check {
    let coarse = frame_gap(1.0 / 32.0);
    let fine = frame_gap(1.0 / 64.0);
    let ratio = coarse / fine;
    ensure(
        ratio >= 1.8 && fine <= 0.1,
        format!("max gap {coarse:.3e} (h=1/32) -> {fine:.3e} (h=1/64), ratio {ratio:.2} (needs >= 1.8, fine <= 0.1)"),
    )
}

fn c3_reaper_leaf() -> Check {
    let sol = CatalogSolution::linear(1.0, 0.0, 0.0);
    let leaf = integrate_leaf(&sol, 0.0, Vec2::ZERO, LeafOptions::new(1.8, 1e-3)).map_err(|e| e.to_string())?;
    let inside: Vec<Vec2> = leaf.points.iter().copied().filter(|p| p.x.abs() <= 1.2).collect();
    let reach = inside.iter().map(|p| p.x.abs()).fold(0.0, f64::max);
    let dev = inside.iter().map(|p| (p.y + p.x.cos().ln()).abs()).fold(0.0, f64::max);
    ensure(
        dev <= 1e-4 && reach > 1.19,
        format!("max deviation {dev:.2e} over |x| <= 1.2 (needs <= 1e-4), {} samples", inside.len()),
    )
}

/// Reaper `y = -ln cos(a x) / a` for `|x| <= half_x`, sampled by arclength.
fn reaper(a: f64, half_x: f64, spacing: f64) -> FlowingCurve {
    let smax = (half_x * a).tan().asinh() / a;
    let n = (2.0 * smax / spacing).round() as usize + 1;
    let c = Curve::from_param(|s| Vec2::new((a * s).sinh().atan() / a, (a * s).cosh().ln() / a), -smax, smax, n, false)
        .unwrap();
    FlowingCurve::new(c, 0.0, EndCondition::Pinned { velocity: Vec2::new(0.0, a) }, spacing).unwrap()
}

fn c4_reaper_soliton() -> Check {
    let t = 0.5;
    let last = evolve_curve(&reaper(1.0, 1.2, 1e-2), t, 1e-4, usize::MAX).map_err(|e| e.to_string())?;
    let c = last.last().unwrap().curve();
    let dev = c
        .points()
        .iter()
        .filter(|p| p.x.abs() <= 1.0)
        .map(|p| (p.y - (t - p.x.cos().ln())).abs())
        .fold(0.0, f64::max);
    let mut ok = dev <= 1e-3;
    let mut speeds = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        let hist = evolve_curve(&reaper(a, 1.2 / a, 1e-2), t, 1e-4, usize::MAX).map_err(|e| e.to_string())?;
        let vertex = hist.last().unwrap().curve().points().iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let rel = (vertex / t - a).abs() / a;
        ok &= rel <= 0.01;
        speeds.push(format!("a={a}: {:.5} ({rel:.1e})", vertex / t));
    }
    ensure(ok, format!("deviation {dev:.2e} (needs <= 1e-3); speeds {}", speeds.join(", ")))
}

fn c5_circles() -> Check {
    let c = Curve::from_param(|u| Vec2::from_angle(u), 0.0, TAU, 628, true).unwrap();
    let fc = FlowingCurve::new(c, 0.0, EndCondition::Closed, 1e-2).unwrap();
    let hist = evolve_curve(&fc, 0.3, 1e-4, usize::MAX).map_err(|e| e.to_string())?;
    let pts = hist.last().unwrap().curve().points();
    let r = pts.iter().map(|p| p.norm()).sum::<f64>() / pts.len() as f64;
    let exact = 0.4f64.sqrt();
    let rel = (r - exact).abs() / exact;
    let base = integrate_base_curve(&CatalogSolution::polar(FRAC_PI_2), Vec2::new(1.0, 0.0), 0.0, 0.3, 1e-3)
        .map_err(|e| e.to_string())?;
    let base_err = base
        .samples
        .iter()
        .map(|(t, p)| (p.norm() - (1.0 - 2.0 * t).sqrt()).abs())
        .fold(0.0, f64::max);
    let reached = base.last().0;
    ensure(
        rel <= 1e-3 && base_err <= 2e-3 && (reached - 0.3).abs() < 1e-9,
        format!("flowed radius {r:.6} vs {exact:.6} (rel {rel:.1e}); base curve max |r - sqrt(1-2t)| {base_err:.1e} to t = {reached}"),
    )
}

fn sheet_defect(sol: CatalogSolution, win: f64, h: f64, dt: f64, t_max: f64, seed: Vec2, keep_r: Option<(f64, f64)>) -> Result<f64, String> {
    let g = Grid2D::from_window(-win, win, -win, win, h).map_err(|e| e.to_string())?;
    // stationary, so two identical snapshots carry the whole time series
    let series = FieldSeries::stationary(&sampled(sol, g), &[0.0, t_max]).map_err(|e| e.to_string())?;
    let opts = SheetOptions { s_extent: 1.0, ds: 0.5 * h, dt, t_max };
    let sheet = build_sheet(&series, seed, 0.0, opts).map_err(|e| e.to_string())?;
    if sheet.truncated() {
        return Err(format!("sheet through ({}, {}) was truncated", seed.x, seed.y));
    }
    let diag = sheet_diagnostics(&sheet, &series, CurvatureMode::Field).map_err(|e| e.to_string())?;
    Ok(diag.max_d_where(|s| {
        s.s.abs() <= 1.0 + 1e-12
            && keep_r.map_or(true, |(r0, r1)| {
                let r = s.point.norm();
                r >= r0 && r <= r1
            })
    }))
}

fn c6_sheet_defect() -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, sol, win, t_max, seed, keep) in [
        ("reaper", CatalogSolution::linear(1.0, 0.0, 0.0), 1.5, 0.5, Vec2::ZERO, None),
        ("circle", CatalogSolution::polar(FRAC_PI_2), 2.0, 0.2, Vec2::new(1.0, 0.0), Some((0.6, 1.4))),
    ] {
        let coarse = sheet_defect(sol, win, 1.0 / 64.0, 1e-3, t_max, seed, keep)?;
        let fine = sheet_defect(sol, win, 1.0 / 128.0, 5e-4, t_max, seed, keep)?;
        let ratio = coarse / fine;
        ok &= coarse <= 5e-3 && ratio >= 3.0;
        lines.push(format!("{name} {coarse:.2e} -> {fine:.2e} (x{ratio:.2})"));
    }
    ensure(ok, format!("max |D| <= 5e-3, refinement >= 3x: {}", lines.join(", ")))
}

fn circle(r: f64, ds: f64) -> FlowingCurve {
    let n = (TAU * r / ds).round() as usize;
    let c = Curve::from_param(|u| Vec2::from_angle(u) * r, 0.0, TAU, n, true).unwrap();
    FlowingCurve::new(c, 0.0, EndCondition::Closed, ds).unwrap()
}

fn heat_max(fc: &FlowingCurve) -> Result<f64, String> {
    let hist = evolve_curve(fc, 0.01, 1e-4, 1).map_err(|e| e.to_string())?;
    Ok(heat_residual_along_curve(&hist).map_err(|e| e.to_string())?.max)
}

fn c7_heat_residual() -> Check {
    let mut ok = true;
    let mut lines = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        let coarse = heat_max(&reaper(a, 1.2 / a, 0.02))?;
        let fine = heat_max(&reaper(a, 1.2 / a, 0.01))?;
        ok &= coarse <= 2e-2 && fine <= 0.5 * coarse;
        lines.push(format!("reaper a={a} {coarse:.1e} -> {fine:.1e}"));
    }
    for r in [0.5, 1.0, 1.5] {
        let coarse = heat_max(&circle(r, 0.02))?;
        let fine = heat_max(&circle(r, 0.01))?;
        ok &= coarse <= 2e-2 && fine <= 1e-6;
        lines.push(format!("circle r={r} {coarse:.1e} -> {fine:.1e}"));
    }
    ensure(
        ok,
        format!("<= 2e-2 at ds 0.02; reapers halve, circles stay below 1e-6 at ds 0.01: {}", lines.join(", ")),
    )
}

fn c8_cross_validation() -> Check {
    let h = 1.0 / 64.0;
    let base = CatalogSolution::linear(1.0, 0.0, 0.0);
    let square = Window::new(-1.0, 1.0, -1.0, 1.0);
    let cv = CrossValidation {
        initial: InitialCondition::Perturbed { base, amplitude: 0.1, bump: Bump::SinSin, support: square },
        window: square,
        h,
        t_final: 0.05,
        dt: None,
        boundary: base,
        pde_padding: 1.0,
        seeds: (0..50).map(|k| Vec2::new(0.0, -1.68 + 2.68 * k as f64 / 49.0)).collect(),
        s_extent: 2.2,
        leaf_ds: 0.25 * h,
        flow_dt: 1e-3,
        target_spacing: h,
        compare_window: None,
        annulus: None,
        tolerances: CrossTolerances::default(),
    };
    let start = Instant::now();
    let r = cv.run().map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(
        r.verdict == Verdict::Pass
            && r.max_error <= 1e-2
            && r.l2_error <= 3e-3
            && r.coverage >= 0.8
            && took <= Duration::from_secs(300),
        format!(
            "max {:.2e} (<= 1e-2), L2 {:.2e} (<= 3e-3), coverage {:.1}% (>= 80%), {} leaves, {:.1}s",
            r.max_error,
            r.l2_error,
            100.0 * r.coverage,
            r.leaf_count,
            took.as_secs_f64()
        ),
    )
}

fn c9_straightness() -> Check {
    let y = Vec2::new(1.0, 0.0);
    let opts = StraightnessOptions::default();
    let rays = straightness_check(&CatalogSolution::polar(0.0), y, None, opts).map_err(|e| e.to_string())?;
    let circles = straightness_check(&CatalogSolution::polar(FRAC_PI_2), y, None, opts).map_err(|e| e.to_string())?;
    let ok = matches!(rays, Straightness::Pass { deviation } if deviation <= 1e-6)
        && matches!(circles, Straightness::Inapplicable { .. });
    ensure(ok, format!("polar(0): {rays:?}; polar(π/2): {circles:?}"))
}

fn c10_micro_suite() -> Check {
    let mut lines = Vec::new();
    // linear fields are fixed points of the explicit step
    let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 1.0 / 32.0).unwrap();
    let mut drift: f64 = 0.0;
    for sol in [CatalogSolution::linear(1.3, -0.7, 0.2), CatalogSolution::Constant { c: 0.4 }, CatalogSolution::linear(0.0, 2.0, -3.0)] {
        let mut st = PdeState::new(sampled(sol, g), None, BoundaryCondition::DirichletExact { solution: sol })
            .map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let next = step_euler(&st).map_err(|e| e.to_string())?;
            let d = next
                .field()
                .values()
                .iter()
                .zip(st.field().values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            drift = drift.max(d);
            st = next;
        }
    }
    let drift_ok = drift <= 1e-12;
    lines.push(format!("linear per-step drift {drift:.1e}"));

    // representative changes: a π shift of the field, a 2π jump at single nodes
    let h = 1.0 / 32.0;
    let g = Grid2D::from_window(-2.0, 2.0, -2.0, 2.0, h).unwrap();
    let fields = [
        sampled(CatalogSolution::polar(FRAC_PI_4), g),
        sampled(CatalogSolution::linear(0.8, -0.3, 0.1), g),
        AngleField::from_fn(g, 0.0, |p| p.x + 0.3 * (2.0 * p.y).sin() * p.x.cos()),
    ];
    let mut worst_rel: f64 = 0.0;
    for f in &fields {
        let theta_max = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // rounding of θ + 2π, amplified by the 1/h² of the second differences
        let tol = 64.0 * f64::EPSILON * (theta_max + TAU) / (h * h);
        let variants = [f.shifted(PI), f.shifted(-PI), f.shifted(TAU), f.map_values(|k, v| if k % 3 == 0 { v + TAU } else { v - (k % 2) as f64 * TAU })];
        for (i, j) in g.nodes().filter(|&(i, j)| annulus(g.node(i, j))) {
            let (Ok(c0), Ok(f0)) = (rhs_cartesian(f, i, j), rhs_frame(f, i, j)) else { continue };
            for v in &variants {
                let dc = (rhs_cartesian(v, i, j).unwrap() - c0).abs();
                let df = (rhs_frame(v, i, j).unwrap() - f0).abs();
                worst_rel = worst_rel.max(dc.max(df) / tol);
            }
        }
    }
    let repr_ok = worst_rel <= 1.0;
    lines.push(format!("representative changes at {:.2} of 64 eps (|θ|+2π)/h²", worst_rel));

    // length decreases at every explicit step of the unit circle
    let mut fc = circle(1.0, 1e-2);
    let mut steps_ok = true;
    let mut worst_drop = f64::INFINITY;
    for _ in 0..500 {
        let dt = 0.2 * fc.curve().min_segment().powi(2);
        let next = csf_step(&fc, dt).map_err(|e| e.to_string())?;
        let drop = fc.curve().length() - next.curve().length();
        steps_ok &= drop > 0.0;
        worst_drop = worst_drop.min(drop);
        fc = next;
    }
    lines.push(format!("smallest length drop over 500 steps {worst_drop:.2e}"));
    ensure(drift_ok && repr_ok && steps_ok, lines.join("; "))
}

fn run_cli(args: &[&str], threads: usize) -> Result<Outcome, String> {
    let cli = Cli::try_parse_from(std::iter::once("foliflow").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    pool.install(|| run(&cli)).map_err(|e| e.to_string())
}

/// Every file in `dir` except the timestamped manifest, sorted by name.
fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn c11_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("cross.json");
    fs::write(
        &cfg,
        r#"{
  "window": {"xmin": -1, "xmax": 1, "ymin": -1, "ymax": 1},
  "nx": 32, "ny": 32,
  "initial": {"kind": "perturbed", "base": {"kind": "linear", "a": 1, "b": 0, "c": 0},
              "amplitude": 0.1, "bump": "sin-sin", "support": {"xmin": -1, "xmax": 1, "ymin": -1, "ymax": 1}},
  "t_final": 0.02,
  "s_extent": 2.2,
  "cross_validation": {"seed_line": {"from": [0, -1.68], "to": [0, 1.0], "count": 25}, "pde_padding": 0.5}
}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (k, threads) in [1, 1, 4].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let o = run_cli(
            &["cross-validate", "--quiet", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            threads,
        )?;
        let csvs: Vec<String> = ["pde_field.csv", "flow_field.csv", "curves.csv"]
            .iter()
            .map(|f| out.join(f).to_string_lossy().into_owned())
            .collect();
        let plots = out.join("plots");
        let mut args = vec!["plot", "--quiet", "--out", plots.to_str().unwrap()];
        args.extend(csvs.iter().map(String::as_str));
        run_cli(&args, threads)?;
        runs.push((o, data_files(&out), data_files(&plots)));
    }
    let files = runs[0].1.len() + runs[0].2.len();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    let differing: Vec<String> = runs[0]
        .1
        .iter()
        .chain(&runs[0].2)
        .filter(|(name, bytes)| {
            runs[1..].iter().any(|r| r.1.iter().chain(&r.2).find(|(n, _)| n == name).map(|x| &x.1) != Some(bytes))
        })
        .map(|(n, _)| n.clone())
        .collect();
    ensure(
        same && files >= 8,
        format!(
            "{files} data and plot files compared over runs with 1, 1 and 4 workers (verdict {:?}){}",
            runs[0].0,
            if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 11] = [
        (1, "stationary catalog solutions", c1_stationary),
        (2, "cartesian and frame forms agree", c2_frame_equivalence),
        (3, "grim reaper integral curve", c3_reaper_leaf),
        (4, "grim reaper soliton under the flow", c4_reaper_soliton),
        (5, "shrinking circles", c5_circles),
        (6, "normal-velocity defect on sheets", c6_sheet_defect),
        (7, "along-curve heat residual", c7_heat_residual),
        (8, "cross-validation of the two directions", c8_cross_validation),
        (9, "straightness of flat leaves", c9_straightness),
        (10, "conservation and exactness", c10_micro_suite),
        (11, "determinism", c11_determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {n:>2} {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
