use approx::assert_relative_eq;
use nalgebra::UnitQuaternion;
use proptest::prelude::*;
use ruloff::curve::{cubic_spline_interpolate, EndCondition, NurbsCurve3};
use ruloff::geom::{Point3, Vec2, Vec3};
use ruloff::offset::{raw_offset, ClosestPoint, OffsetRule};
use ruloff::overlap::{eliminate_loops_points, segment_intersect_2d, ProjectionBasis, SegmentHit};
use ruloff::subdivide::{base_count, base_plan, sample_at};
use ruloff::transition::{quartic_from_params, transition_fitness, HermiteEnds};

fn point() -> impl Strategy<Value = Point3> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

/// Clamped NURBS of degree 2..=4 with random interior knots and weights.
fn nurbs() -> impl Strategy<Value = NurbsCurve3> {
    (2usize..=4, 0usize..4).prop_flat_map(|(p, extra)| {
        let n = p + 1 + extra;
        (
            Just(p),
            prop::collection::vec(point(), n),
            prop::collection::vec(0.5..2.0f64, n),
            prop::collection::vec(0.05..0.95f64, extra),
        )
            .prop_map(|(p, pts, w, mut inner)| {
                inner.sort_by(f64::total_cmp);
                let mut knots = vec![0.0; p + 1];
                knots.extend(inner);
                knots.extend(vec![1.0; p + 1]);
                NurbsCurve3::new(p, knots, pts, w).unwrap()
            })
    })
}

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| i as f64 / n as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bezier_pieces_trace_the_curve(c in nurbs()) {
        for seg in c.decompose_to_bezier() {
            for u in grid(10) {
                let a = seg.evaluate_local(u);
                let b = c.evaluate(seg.global_param(u)).unwrap();
                prop_assert!((a - b).norm() <= 1e-9 * 100.0, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn knot_insertion_keeps_shape(c in nurbs(), t in 0.01..0.99f64) {
        let d = c.insert_knot(t).unwrap();
        prop_assert_eq!(d.control_points().len(), c.control_points().len() + 1);
        for s in grid(20) {
            prop_assert!((c.evaluate(s).unwrap() - d.evaluate(s).unwrap()).norm() <= 1e-9 * 100.0);
        }
    }

    #[test]
    fn sub_curve_matches_parent(c in nurbs(), a in 0.0..0.45f64, b in 0.55..1.0f64) {
        let s = c.sub_curve(a, b).unwrap();
        let (lo, hi) = s.domain();
        prop_assert_eq!((lo, hi), (a, b));
        for u in grid(12) {
            let t = a + (b - a) * u;
            prop_assert!((c.evaluate(t).unwrap() - s.evaluate(t).unwrap()).norm() <= 1e-9 * 100.0);
        }
    }

    #[test]
    fn derivatives_match_central_differences(c in nurbs(), t in 0.05..0.95f64) {
        let h = 1e-5;
        let d = c.derivatives(t, 2).unwrap();
        let dp = c.derivatives(t + h, 1).unwrap();
        let dm = c.derivatives(t - h, 1).unwrap();
        let fd1 = (dp[0] - dm[0]) / (2.0 * h);
        let fd2 = (dp[1] - dm[1]) / (2.0 * h);
        // Knots make higher derivatives jump; skip stencils that straddle one.
        prop_assume!(!c.knots().iter().any(|&k| (k - t).abs() < 2.0 * h));
        prop_assert!((fd1 - d[1]).norm() <= 1e-5 * (1.0 + d[1].norm()), "{} vs {}", fd1, d[1]);
        prop_assert!((fd2 - d[2]).norm() <= 1e-4 * (1.0 + d[2].norm()), "{} vs {}", fd2, d[2]);
    }

    #[test]
    fn base_count_grows_as_tolerance_shrinks(m in 0.0..1e6f64, eps in 1e-3..10.0f64) {
        let coarse = base_count(m, eps).unwrap();
        let fine = base_count(m, eps / 4.0).unwrap();
        prop_assert!(coarse >= 1);
        prop_assert!(fine >= coarse);
        prop_assert!(fine <= 2 * coarse + 1);
    }

    #[test]
    fn base_plan_is_strictly_increasing(c in nurbs(), eps in 0.05..5.0f64) {
        let params = base_plan(&c, eps).unwrap().merged_base();
        prop_assert_eq!(params[0], 0.0);
        prop_assert_eq!(*params.last().unwrap(), 1.0);
        prop_assert!(params.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn line_offset_keeps_distance(a in point(), b in point(), d in 0.1..100.0f64) {
        prop_assume!((b - a).norm() > 1.0);
        let dir = (b - a).normalize();
        let k = if dir.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
        let line = NurbsCurve3::line(a, b).unwrap();
        let samples: Vec<_> = grid(8).map(|t| sample_at(&line, t).unwrap()).collect();
        let raw = raw_offset(&samples, &OffsetRule::constant(k, d).unwrap()).unwrap();
        for (p, s) in raw.points().iter().zip(&samples) {
            assert_relative_eq!((p - s.position).norm(), d, max_relative = 1e-12);
            assert_relative_eq!((p - s.position).dot(&dir), 0.0, epsilon = 1e-9 * d);
        }
    }

    #[test]
    fn closest_point_on_circle_arc(r in 1.0..100.0f64, ang in 0.2..1.3f64, q in 0.1..3.0f64) {
        // Quarter circle as a rational quadratic.
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let arc = NurbsCurve3::bezier(
            vec![Point3::new(r, 0.0, 0.0), Point3::new(r, r, 0.0), Point3::new(0.0, r, 0.0)],
            vec![1.0, w, 1.0],
        ).unwrap();
        let p = Point3::new(q * r * ang.cos(), q * r * ang.sin(), 0.0);
        let dist = ClosestPoint::new(&arc).unwrap().distance(&p);
        assert_relative_eq!(dist, (q - 1.0).abs() * r, epsilon = 1e-7 * r);
    }

    #[test]
    fn open_elimination_is_simple_and_idempotent(
        pts in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -3.0..3.0f64), 2..30)
    ) {
        let pts: Vec<Point3> = pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
        let k = Vec3::new(0.2, -0.1, 1.0).normalize();
        let out = eliminate_loops_points(&pts, false, k).unwrap();
        let basis = ProjectionBasis::new(k);
        let flat: Vec<Vec2> = out.to_points().iter().map(|p| basis.project(p)).collect();
        let segs: Vec<(Vec2, Vec2)> = flat
            .windows(2)
            .filter(|w| (w[1] - w[0]).norm() > 1e-9)
            .map(|w| (w[0], w[1]))
            .collect();
        for i in 0..segs.len() {
            for j in i + 2..segs.len() {
                let hit = segment_intersect_2d(&segs[i].0, &segs[i].1, &segs[j].0, &segs[j].1, 1e-9);
                if let SegmentHit::Crossing { s, t, .. } = hit {
                    prop_assert!(
                        s <= 1e-6 || s >= 1.0 - 1e-6 || t <= 1e-6 || t >= 1.0 - 1e-6,
                        "segments {} and {} cross at s={} t={}", i, j, s, t
                    );
                }
            }
        }
        let again = eliminate_loops_points(&out.to_points(), false, k).unwrap();
        prop_assert_eq!(again.eliminated_loops, 0);
        prop_assert_eq!(again.to_points(), out.to_points());
        prop_assert_eq!(out.chains.len(), out.joints.len() + 1);
    }

    #[test]
    fn segment_intersection_is_symmetric(a in (-5.0..5.0f64, -5.0..5.0f64), b in (-5.0..5.0f64, -5.0..5.0f64),
                                         c in (-5.0..5.0f64, -5.0..5.0f64), d in (-5.0..5.0f64, -5.0..5.0f64)) {
        let [a, b, c, d] = [a, b, c, d].map(|(x, y)| Vec2::new(x, y));
        let one = segment_intersect_2d(&a, &b, &c, &d, 1e-12);
        let two = segment_intersect_2d(&c, &d, &a, &b, 1e-12);
        match (one, two) {
            (SegmentHit::Crossing { point: p, s, t }, SegmentHit::Crossing { point: q, s: s2, t: t2 }) => {
                prop_assert!((p - q).norm() <= 1e-9);
                prop_assert!((s - t2).abs() <= 1e-9 && (t - s2).abs() <= 1e-9);
            }
            (SegmentHit::Disjoint, SegmentHit::Disjoint) => {}
            (SegmentHit::CollinearOverlap { .. }, SegmentHit::CollinearOverlap { .. }) => {}
            (x, y) => prop_assert!(false, "{:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn transition_fitness_ignores_rigid_motion(
        params in prop::array::uniform7(0.0..1.0f64),
        axis in (0.1..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
        angle in -3.0..3.0f64,
        shift in point(),
    ) {
        let mut params = params;
        for w in &mut params[..3] {
            *w = w.max(1e-3);
        }
        let joint = ruloff::repro::reference_joint();
        let ends = HermiteEnds::from(&joint);
        let q = quartic_from_params(&ends, 50.0, &params).unwrap();
        let before = transition_fitness(&q, &joint.vertex, 100);
        let rot = UnitQuaternion::from_scaled_axis(Vec3::new(axis.0, axis.1, axis.2).normalize() * angle);
        let motion = |p: Point3| rot * p + shift;
        let mut moved = q.clone();
        for p in &mut moved.control_points {
            *p = motion(*p);
        }
        let after = transition_fitness(&moved, &motion(joint.vertex), 100);
        assert_relative_eq!(before, after, epsilon = 1e-9, max_relative = 1e-9);
    }
}

/// Max radial error of a clamped spline through circle points at angular spacing `h`.
fn circle_fit_error(r: f64, h: f64) -> f64 {
    let n = (1.0 / h).round() as usize;
    let pts: Vec<Point3> = (0..=n)
        .map(|i| {
            let a = i as f64 * h;
            Point3::new(r * a.cos(), r * a.sin(), 0.0)
        })
        .collect();
    let end_a = n as f64 * h;
    let end = EndCondition::clamped(Vec3::new(0.0, 1.0, 0.0), Vec3::new(-end_a.sin(), end_a.cos(), 0.0));
    let spline = cubic_spline_interpolate(&pts, &end).unwrap();
    grid(4000)
        .map(|t| (spline.evaluate(t).unwrap().norm() - r).abs())
        .fold(0.0, f64::max)
}

#[test]
fn spline_error_is_fourth_order() {
    for r in [1.0, 10.0, 250.0] {
        let coarse = circle_fit_error(r, 0.1);
        let fine = circle_fit_error(r, 0.05);
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "r={r}: ratio {ratio}");
    }
}
