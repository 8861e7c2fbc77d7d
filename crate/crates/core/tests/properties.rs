use std::f64::consts::{FRAC_PI_2, PI, TAU};

use foliflow_core::csf::{csf_step, EndCondition, FlowingCurve};
use foliflow_core::field::{frame_at, wrapped_diff_mod_pi};
use foliflow_core::foliation::{integrate_leaf, LeafOptions};
use foliflow_core::pde::{rhs_cartesian, rhs_frame, stationary_residual};
use foliflow_core::{wrap_angle, wrapped_diff, AngleField, CatalogSolution, Curve, Grid2D, Vec2};
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -50.0f64..50.0
}

/// `a x + b y + c + e sin(k x) cos(m y)` on `[-1, 1]²`.
fn smooth_field(h: f64) -> impl Strategy<Value = AngleField> {
    (-2.0f64..2.0, -2.0f64..2.0, -4.0f64..4.0, -0.5f64..0.5, 0.5f64..3.0, 0.5f64..3.0).prop_map(move |(a, b, c, e, k, m)| {
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, h).unwrap();
        AngleField::from_fn(g, 0.0, |p| a * p.x + b * p.y + c + e * (k * p.x).sin() * (m * p.y).cos())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wrapped_diff_range_and_identity(a in angle(), b in angle()) {
        let d = wrapped_diff(a, b);
        prop_assert!(d > -PI && d <= PI);
        prop_assert_eq!(wrapped_diff(a, a), 0.0);
    }

    #[test]
    fn wrapped_diff_ignores_representatives(a in -10.0f64..10.0, b in -10.0f64..10.0, k in -6i32..6, m in -6i32..6) {
        let d0 = wrapped_diff(a, b);
        let d1 = wrapped_diff(a + TAU * k as f64, b + TAU * m as f64);
        // a difference of exactly π may land on either end
        let gap = (d1 - d0).abs();
        prop_assert!(gap < 1e-12 || (TAU - gap).abs() < 1e-12, "{} vs {}", d0, d1);
    }

    #[test]
    fn wrap_angle_is_a_canonical_representative(a in angle()) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        prop_assert_eq!(wrap_angle(w), w);
        prop_assert!(wrapped_diff(w, a).abs() < 1e-12);
    }

    #[test]
    fn mod_pi_difference_is_a_line_distance(a in angle(), b in angle()) {
        let d = wrapped_diff_mod_pi(a, b);
        prop_assert!((0.0..=FRAC_PI_2 + 1e-15).contains(&d));
        prop_assert!((d - wrapped_diff_mod_pi(b, a)).abs() < 1e-12);
        prop_assert!((d - wrapped_diff_mod_pi(a + PI, b)).abs() < 1e-12);
    }

    #[test]
    fn frame_is_a_quarter_turn(t in angle()) {
        let f = frame_at(t);
        prop_assert_eq!(f.v2, f.v1.rotate90());
    }

    #[test]
    fn derivatives_ignore_a_pi_shift(f in smooth_field(1.0 / 16.0)) {
        let shifted = f.shifted(PI);
        let g = *f.grid();
        for (i, j) in g.nodes().filter(|&(i, j)| g.is_interior(i, j)) {
            let (g0, g1) = (f.central_gradient(i, j).unwrap(), shifted.central_gradient(i, j).unwrap());
            let (h0, h1) = (f.central_hessian(i, j).unwrap(), shifted.central_hessian(i, j).unwrap());
            prop_assert!((g0 - g1).norm() < 1e-11);
            prop_assert!(h0.max_abs_diff(&h1) < 1e-9);
        }
    }

    #[test]
    fn rhs_ignores_representatives(f in smooth_field(1.0 / 16.0), node in 0usize..10_000, k in -3i32..3) {
        let g = *f.grid();
        let idx = node % g.len();
        let bumped = f.map_values(|m, v| if m == idx { v + TAU * k as f64 } else { v });
        let shifted = f.shifted(PI);
        for (i, j) in g.nodes() {
            if let (Ok(c), Ok(r)) = (rhs_cartesian(&f, i, j), rhs_frame(&f, i, j)) {
                for v in [&bumped, &shifted] {
                    prop_assert!((rhs_cartesian(v, i, j).unwrap() - c).abs() < 1e-9);
                    prop_assert!((rhs_frame(v, i, j).unwrap() - r).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rotated_linear_fields_stay_stationary(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -3.0f64..3.0, phi in -PI..PI) {
        // θ'(p) = θ(R₋φ p) + φ
        let (s, co) = phi.sin_cos();
        let rotated = CatalogSolution::linear(a * co - b * s, a * s + b * co, c + phi);
        let g = Grid2D::from_window(-1.0, 1.0, -1.0, 1.0, 1.0 / 16.0).unwrap();
        let f = AngleField::from_fn(g, 0.0, |p| rotated.eval_angle(p, 0.0).unwrap());
        prop_assert!(stationary_residual(&f).max < 1e-10);

        let y = Vec2::new(0.3, -0.2);
        let opts = LeafOptions::new(0.8, 1e-2);
        let l0 = integrate_leaf(&CatalogSolution::linear(a, b, c), 0.0, y, opts).unwrap();
        let l1 = integrate_leaf(&rotated, 0.0, y.rotate(phi), opts).unwrap();
        prop_assert_eq!(l0.points.len(), l1.points.len());
        for (p, q) in l0.points.iter().zip(&l1.points) {
            prop_assert!(p.rotate(phi).dist(*q) < 1e-9);
        }
    }

    #[test]
    fn leaves_do_not_depend_on_the_start_point(r in 0.6f64..1.8, phi in -PI..PI, a in -2.0f64..2.0, circles in any::<bool>()) {
        let sol = if circles { CatalogSolution::polar(FRAC_PI_2) } else { CatalogSolution::linear(a, 1.0, 0.0) };
        let y = Vec2::from_angle(phi) * r;
        let ds = 1e-2;
        let half = 40isize;
        let opts = LeafOptions::new(2.0 * half as f64 * ds, ds);
        let forward = integrate_leaf(&sol, 0.0, y, opts).unwrap();
        let q = forward.get(half).unwrap();
        let back = integrate_leaf(&sol, 0.0, q, opts).unwrap();
        for k in -half..=half {
            let p0 = forward.get(k + half).unwrap();
            let p1 = back.get(k).unwrap();
            prop_assert!(p0.dist(p1) < 1e-8, "k = {}: {:?} vs {:?}", k, p0, p1);
        }
    }

    #[test]
    fn closed_curves_shorten_every_step(e2 in -0.2f64..0.2, e3 in -0.15f64..0.15, scale in 0.5f64..2.0) {
        let c = Curve::from_param(
            |u| Vec2::from_angle(u) * (scale * (1.0 + e2 * (2.0 * u).cos() + e3 * (3.0 * u).sin())),
            0.0, TAU, 200, true,
        ).unwrap();
        let mut fc = FlowingCurve::new(c, 0.0, EndCondition::Closed, 0.02 * scale).unwrap();
        for _ in 0..20 {
            let dt = 0.2 * fc.curve().min_segment().powi(2);
            let next = csf_step(&fc, dt).unwrap();
            prop_assert!(next.curve().length() < fc.curve().length());
            fc = next;
        }
    }

    #[test]
    fn pinned_arcs_shorten_every_step(e in 0.05f64..0.5, k in 1u32..3) {
        let c = Curve::from_param(|x| Vec2::new(x, e * (k as f64 * PI * x).sin()), -1.0, 1.0, 201, false).unwrap();
        let mut fc = FlowingCurve::new(c, 0.0, EndCondition::Pinned { velocity: Vec2::ZERO }, 0.01).unwrap();
        for _ in 0..20 {
            let dt = 0.2 * fc.curve().min_segment().powi(2);
            let next = csf_step(&fc, dt).unwrap();
            prop_assert!(next.curve().length() < fc.curve().length());
            fc = next;
        }
    }
}
