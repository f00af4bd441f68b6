//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero when any criterion fails.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruloff::curve::NurbsCurve3;
use ruloff::geom::{Point3, Vec2, Vec3};
use ruloff::optimizer::{pso_minimize, pso_step, PsoConfig, SwarmState};
use ruloff::overlap::{eliminate_loops_points, ProjectionBasis, TrimmedChains};
use ruloff::repro::{self, chord_stats, table1_mode, TABLE1_SAMPLES};
use ruloff::subdivide::{base_plan, plan_curve, SubdivisionMode};
use ruloff::surface::{mesh_from_obj, mesh_to_obj, ruled_point, tessellate, Correspondence, RuledPatch};
use ruloff::transition::concave_transition;
use ruloff::Exec;

// Reference values and tolerances.
const T1_TRADITIONAL: [f64; 3] = [42.822, 68.616, 10.666];
const T1_IMPROVED: [f64; 3] = [9.927, 32.720, 8.139];
const T1_REL_TOL: f64 = 0.10;
const T1_POINTS: (usize, usize) = (20, 2);
const T1_ADDED: (usize, usize) = (83, 8);
const T1_BUDGET: Duration = Duration::from_secs(1);

const C2_MEAN: f64 = 400.0;
const C2_MEAN_TOL: f64 = 0.01;
const C2_MAX_SD: f64 = 5e-4;
const C2_MIN_RATIO: f64 = 20.0;
const C2_BUDGET: Duration = Duration::from_secs(2);

const C3_SEEDS: u64 = 10;
const C3_MIN_PASSING: usize = 9;
const C3_TARGET: f64 = 0.1;
const C3_END_TOL: f64 = 1e-12;
const C3_TANGENT_TOL: f64 = 1e-4;
const C3_RADIUS: f64 = 50.0;
const C3_BAND: f64 = 0.01;
const C3_SAMPLES: usize = 1000;
const C3_BUDGET: Duration = Duration::from_secs(30);

const C4_CASES: usize = 200;
const C4_EPS: f64 = 1e-9;
const C4_BUDGET: Duration = Duration::from_secs(10);

const C5_SEGMENTS: usize = 50;
const C5_EPSILONS: [f64; 3] = [1.0, 0.1, 0.01];

const C6_SPHERE_TARGET: f64 = 1e-4;

const C7_TRIM_TOL: f64 = 1e-6;
const C7_ANGLE_TOL: f64 = 1e-6;

const C8_BOUNDARY_TOL: f64 = 1e-12;
const C8_RULING_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within(value: f64, reference: f64, rel: f64) -> bool {
    (value - reference).abs() <= rel * reference.abs()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    for mode in [SubdivisionMode::Traditional, SubdivisionMode::Improved] {
        let curve = repro::reference_cubic();
        let plan = plan_curve(&curve, repro::TABLE1_EPSILON, repro::TABLE1_DISTANCE, mode).unwrap();
        let pts: Vec<Point3> = plan.refined_params.iter().map(|&t| curve.evaluate(t).unwrap()).collect();
        black_box(chord_stats(&pts));
    }
    let elapsed = start.elapsed();
    let trad = table1_mode(SubdivisionMode::Traditional, Exec::default()).unwrap();
    let imp = table1_mode(SubdivisionMode::Improved, Exec::default()).unwrap();
    let t = [trad.before.mean, trad.before.max, trad.before.sd];
    let i = [imp.before.mean, imp.before.max, imp.before.sd];
    let t_ok = t.iter().zip(T1_TRADITIONAL).all(|(v, r)| within(*v, r, T1_REL_TOL));
    let i_ok = i.iter().zip(T1_IMPROVED).all(|(v, r)| within(*v, r, T1_REL_TOL));
    let pts_ok = trad.points.abs_diff(T1_POINTS.0) <= T1_POINTS.1;
    let add_ok = imp.added.abs_diff(T1_ADDED.0) <= T1_ADDED.1;
    let time_ok = elapsed < T1_BUDGET;
    Outcome {
        pass: t_ok && i_ok && pts_ok && add_ok && time_ok,
        detail: format!(
            "traditional {:.3}/{:.3}/{:.3} [{}], improved {:.3}/{:.3}/{:.3} [{}], points {} [{}], added {} [{}], {:?} [{}]",
            t[0], t[1], t[2], ok(t_ok),
            i[0], i[1], i[2], ok(i_ok),
            trad.points, ok(pts_ok),
            imp.added, ok(add_ok),
            elapsed, ok(time_ok)
        ),
    }
}

fn criterion_2() -> Outcome {
    let trad = table1_mode(SubdivisionMode::Traditional, Exec::default()).unwrap();
    let start = Instant::now();
    let imp = table1_mode(SubdivisionMode::Improved, Exec::default()).unwrap();
    let elapsed = start.elapsed();
    let mean_ok = (imp.interpolation.mean - C2_MEAN).abs() <= C2_MEAN_TOL;
    let sd_ok = imp.interpolation.sd <= C2_MAX_SD;
    let ratio = trad.interpolation.sd / imp.interpolation.sd;
    let ratio_ok = ratio >= C2_MIN_RATIO;
    let time_ok = elapsed < C2_BUDGET;
    Outcome {
        pass: mean_ok && sd_ok && ratio_ok && time_ok,
        detail: format!(
            "{TABLE1_SAMPLES} samples: improved mean {:.6} [{}], SD {:.3e} [{}], traditional SD {:.3e}, ratio {:.2} [{}], {:?} [{}]",
            imp.interpolation.mean, ok(mean_ok),
            imp.interpolation.sd, ok(sd_ok),
            trad.interpolation.sd, ratio, ok(ratio_ok),
            elapsed, ok(time_ok)
        ),
    }
}

fn criterion_3() -> Outcome {
    let joint = repro::reference_joint();
    let mut passing = 0;
    let mut notes = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 0..C3_SEEDS {
        let start = Instant::now();
        let result = repro::repro_transition(seed, Exec::default());
        let elapsed = start.elapsed();
        slowest = slowest.max(elapsed);
        let Ok(sol) = result else {
            notes.push(format!("seed {seed}: no convergence"));
            continue;
        };
        let q = &sol.curve;
        let fit = q.fitness.unwrap();
        let weights_ok = q.weights.iter().all(|&w| w > 0.0);
        let ends_ok = (q.evaluate(0.0) - joint.x0).norm() <= C3_END_TOL * C3_RADIUS
            && (q.evaluate(1.0) - joint.x1).norm() <= C3_END_TOL * C3_RADIUS;
        let h = 1e-7;
        let d0 = (q.evaluate(h) - q.evaluate(0.0)) / h;
        let d1 = (q.evaluate(1.0) - q.evaluate(1.0 - h)) / h;
        let tan_ok = (d0 - joint.t0).norm() / joint.t0.norm() <= C3_TANGENT_TOL
            && (d1 - joint.t1).norm() / joint.t1.norm() <= C3_TANGENT_TOL;
        let (lo, hi) = (0..=C3_SAMPLES)
            .map(|i| (q.evaluate(i as f64 / C3_SAMPLES as f64) - joint.vertex).norm())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        let band_ok = lo >= C3_RADIUS * (1.0 - C3_BAND) && hi <= C3_RADIUS * (1.0 + C3_BAND);
        let run_ok = fit <= C3_TARGET && weights_ok && ends_ok && tan_ok && band_ok && elapsed < C3_BUDGET;
        if run_ok {
            passing += 1;
        } else {
            notes.push(format!(
                "seed {seed}: fitness {fit:.3e} weights {} ends {} tangents {} band [{lo:.4}, {hi:.4}] {elapsed:?}",
                ok(weights_ok), ok(ends_ok), ok(tan_ok)
            ));
        }
    }
    Outcome {
        pass: passing >= C3_MIN_PASSING,
        detail: format!(
            "{passing}/{C3_SEEDS} seeds pass (need {C3_MIN_PASSING}), slowest run {slowest:?}{}",
            if notes.is_empty() { String::new() } else { format!("; {}", notes.join("; ")) }
        ),
    }
}

/// Random closed walk; `lifted` adds a z coordinate unrelated to the projection.
fn random_polyline(rng: &mut ChaCha8Rng, lifted: bool) -> Vec<Point3> {
    let n = rng.random_range(5..40);
    (0..n)
        .map(|_| {
            let z = if lifted { rng.random_range(-5.0..5.0) } else { 0.0 };
            Point3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), z)
        })
        .collect()
}

fn orient(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Count of proper crossings between non-adjacent segments of the projected output.
fn proper_crossings(out: &TrimmedChains, cyclic: bool, k: Vec3) -> usize {
    let basis = ProjectionBasis::new(k);
    let pts: Vec<Vec2> = out.to_points().iter().map(|p| basis.project(p)).collect();
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.norm())).max(1.0);
    let eps = C4_EPS * scale;
    let n = pts.len();
    let edges = if cyclic { n } else { n - 1 };
    let segs: Vec<(Vec2, Vec2)> = (0..edges)
        .map(|i| (pts[i], pts[(i + 1) % n]))
        .filter(|(a, b)| (b - a).norm() > eps)
        .collect();
    let m = segs.len();
    let mut count = 0;
    for i in 0..m {
        for j in i + 2..m {
            if cyclic && i == 0 && j == m - 1 {
                continue;
            }
            let (a, b) = segs[i];
            let (c, d) = segs[j];
            let (o1, o2) = (orient(&a, &b, &c), orient(&a, &b, &d));
            let (o3, o4) = (orient(&c, &d, &a), orient(&c, &d, &b));
            let tol = eps * scale;
            if o1 * o2 < 0.0 && o3 * o4 < 0.0 && o1.abs().min(o2.abs()).min(o3.abs()).min(o4.abs()) > tol {
                count += 1;
            }
        }
    }
    count
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let k = Vec3::z();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut bad_simple, mut bad_idem, mut errors) = (0, 0, 0);
    for case in 0..C4_CASES {
        let pts = random_polyline(&mut rng, case % 2 == 1);
        let out = match eliminate_loops_points(&pts, true, k) {
            Ok(o) => o,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        if proper_crossings(&out, true, k) != 0 {
            bad_simple += 1;
        }
        let again = eliminate_loops_points(&out.to_points(), true, k).unwrap();
        if again.eliminated_loops != 0 || again.to_points() != out.to_points() {
            bad_idem += 1;
        }
    }
    let example = [
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(4.0, 0.0, 0.0),
        Point3::new(4.0, 2.0, 0.0),
        Point3::new(2.0, 2.0, 0.0),
        Point3::new(2.0, -1.0, 0.0),
    ];
    let ex = eliminate_loops_points(&example, false, k).unwrap();
    let chains: Vec<Vec<Point3>> = ex.chains.iter().map(|c| c.points()).collect();
    let example_ok = chains
        == vec![
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)],
            vec![Point3::new(2.0, 0.0, 0.0), Point3::new(2.0, -1.0, 0.0)],
        ]
        && ex.joints.len() == 1
        && ex.removed_vertices == 3;
    let elapsed = start.elapsed();
    let time_ok = elapsed < C4_BUDGET;
    Outcome {
        pass: bad_simple == 0 && bad_idem == 0 && errors == 0 && example_ok && time_ok,
        detail: format!(
            "{C4_CASES} closed polylines: {bad_simple} not simple, {bad_idem} not idempotent, {errors} errors; 5-vertex example [{}]; {elapsed:?} [{}]",
            ok(example_ok), ok(time_ok)
        ),
    }
}

/// Distance from `p` to the segment `a-b`.
fn segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&ab) / l2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    let mut intervals = 0;
    for i in 0..C5_SEGMENTS {
        let degree = if i % 2 == 0 { 3 } else { 4 };
        let pts: Vec<Point3> = (0..=degree)
            .map(|_| Point3::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        let curve = NurbsCurve3::polynomial_bezier(pts).unwrap();
        for eps in C5_EPSILONS {
            let params = base_plan(&curve, eps).unwrap().merged_base();
            for w in params.windows(2) {
                let a = curve.evaluate(w[0]).unwrap();
                let b = curve.evaluate(w[1]).unwrap();
                let dev = (1..=11)
                    .map(|j| {
                        let t = w[0] + (w[1] - w[0]) * j as f64 / 12.0;
                        segment_distance(&curve.evaluate(t).unwrap(), &a, &b)
                    })
                    .fold(0.0, f64::max);
                worst = worst.max(dev / eps);
                intervals += 1;
                if dev > eps {
                    violations += 1;
                }
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!(
            "{C5_SEGMENTS} segments x {C5_EPSILONS:?}: {intervals} intervals, {violations} over tolerance, worst deviation/eps {worst:.3}"
        ),
    }
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn criterion_6() -> Outcome {
    let mut cfg = PsoConfig::new(vec![(-5.0, 5.0); 2]);
    cfg.swarm_size = 50;
    cfg.seed = 7;
    cfg.max_iter = 200;
    cfg.target = C6_SPHERE_TARGET;
    let out = pso_minimize(sphere, &cfg).unwrap();
    let sphere_ok = out.best_value <= C6_SPHERE_TARGET && out.iterations <= 200;

    let mut long = cfg.clone();
    long.target = f64::NEG_INFINITY;
    let full = pso_minimize(sphere, &long).unwrap();
    let monotone_ok = full.history.windows(2).all(|w| w[1] <= w[0]);

    let mut decay = PsoConfig::new(vec![(-1e9, 1e9); 3]);
    decay.swarm_size = 4;
    decay.c1 = 0.0;
    decay.c2 = 0.0;
    let mut decay_ok = true;
    for e in [0.5, 0.9] {
        decay.inertia = e;
        let positions = vec![vec![0.0; 3]; 4];
        let velocities = vec![vec![1.0, -2.0, 0.5], vec![0.25, 3.0, -1.5], vec![-0.75, 0.0, 2.0], vec![4.0, 1.0, -3.0]];
        let mut state = SwarmState::from_parts(&decay, positions, velocities, &sphere).unwrap();
        let v0: Vec<f64> = state.velocities.iter().map(|v| norm(v)).collect();
        for step in 1..=30 {
            state = pso_step(state, &decay, &sphere).unwrap();
            for (v, n0) in state.velocities.iter().zip(&v0) {
                let expect = e.powi(step) * n0;
                let got = norm(v);
                let exact = if e == 0.5 { got == expect } else { (got - expect).abs() <= 1e-12 * expect };
                decay_ok &= exact;
            }
        }
    }

    let a = pso_minimize(sphere, &long).unwrap();
    let b = pso_minimize(sphere, &long).unwrap();
    let mut seq = long.clone();
    seq.exec = Exec::Sequential;
    let c = pso_minimize(sphere, &seq).unwrap();
    let same = |x: &ruloff::optimizer::PsoOutcome, y: &ruloff::optimizer::PsoOutcome| {
        x.best_position.iter().map(|v| v.to_bits()).eq(y.best_position.iter().map(|v| v.to_bits()))
            && x.history.iter().map(|v| v.to_bits()).eq(y.history.iter().map(|v| v.to_bits()))
    };
    let det_ok = same(&a, &b) && same(&a, &c);
    Outcome {
        pass: sphere_ok && monotone_ok && decay_ok && det_ok,
        detail: format!(
            "sphere best {:.2e} after {} iterations [{}], monotone history [{}], velocity decay [{}], bit-identical reruns [{}]",
            out.best_value, out.iterations, ok(sphere_ok), ok(monotone_ok), ok(decay_ok), ok(det_ok)
        ),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn angle(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn criterion_7() -> Outcome {
    let left = NurbsCurve3::line(Point3::new(-10.0, -2.0, 0.0), Point3::new(0.0, -2.0, 0.0)).unwrap();
    let right = NurbsCurve3::line(Point3::new(-2.0, 0.0, 0.0), Point3::new(-2.0, -10.0, 0.0)).unwrap();
    let ct = concave_transition(&left, &right, &Vec3::z(), 1.0).unwrap();
    let l_end = ct.left.evaluate(ct.left.domain().1).unwrap();
    let r_start = ct.right.evaluate(ct.right.domain().0).unwrap();
    let expect_l = Point3::new(-3.0, -2.0, 0.0);
    let expect_r = Point3::new(-2.0, -1.0, 0.0);
    let trim_ok = (l_end - expect_l).norm() <= C7_TRIM_TOL && (r_start - expect_r).norm() <= C7_TRIM_TOL;
    let (b0, b1) = ct.bridge.domain();
    let db = |t| ct.bridge.derivatives(t, 1).unwrap()[1];
    let dl = ct.left.derivatives(ct.left.domain().1, 1).unwrap()[1];
    let dr = ct.right.derivatives(ct.right.domain().0, 1).unwrap()[1];
    let mismatch = angle(&dl, &db(b0)).max(angle(&db(b1), &dr));
    let g1_ok = mismatch <= C7_ANGLE_TOL;
    Outcome {
        pass: trim_ok && g1_ok,
        detail: format!(
            "trim points ({:.6},{:.6},{:.6}) and ({:.6},{:.6},{:.6}), expected {:?} and {:?} [{}]; G1 mismatch {:.2e} rad [{}]",
            l_end.x, l_end.y, l_end.z, r_start.x, r_start.y, r_start.z,
            (expect_l.x, expect_l.y, expect_l.z), (expect_r.x, expect_r.y, expect_r.z),
            ok(trim_ok), mismatch, ok(g1_ok)
        ),
    }
}

fn criterion_8() -> Outcome {
    let curve = repro::reference_cubic();
    let off = table1_mode(SubdivisionMode::Improved, Exec::default()).unwrap().offset_curve;
    let patch = RuledPatch::new(&curve, &off, Correspondence::SharedParameter).unwrap();
    let mut boundary: f64 = 0.0;
    for i in 0..=100 {
        let u = i as f64 / 100.0;
        let p = curve.evaluate(curve.param_at(u)).unwrap();
        let q = off.evaluate(off.param_at(u)).unwrap();
        boundary = boundary.max((ruled_point(&patch, u, 0.0).unwrap() - p).norm());
        boundary = boundary.max((ruled_point(&patch, u, 1.0).unwrap() - q).norm());
    }
    let boundary_ok = boundary <= C8_BOUNDARY_TOL;
    let (nu, nv) = (40, 6);
    let mesh = tessellate(&patch, nu, nv, Exec::default()).unwrap();
    let mut ruling: f64 = 0.0;
    for i in 0..=nu {
        let col = &mesh.vertices[i * (nv + 1)..(i + 1) * (nv + 1)];
        let (a, b) = (col[0], col[nv]);
        let dir = (b - a).normalize();
        for p in col {
            ruling = ruling.max((p - a - dir * (p - a).dot(&dir)).norm());
        }
    }
    let ruling_ok = ruling <= C8_RULING_TOL;
    let back = mesh_from_obj(&mesh_to_obj(&mesh)).unwrap();
    let obj_ok = back.vertices.len() == mesh.vertices.len() && back.faces == mesh.faces;
    Outcome {
        pass: boundary_ok && ruling_ok && obj_ok,
        detail: format!(
            "boundary error {boundary:.1e} [{}], ruling deviation {ruling:.1e} [{}], OBJ round trip {} vertices {} faces [{}]",
            ok(boundary_ok), ok(ruling_ok), back.vertices.len(), back.faces.len(), ok(obj_ok)
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("subdivision statistics on the reference cubic", criterion_1),
        ("offset accuracy, improved vs traditional", criterion_2),
        ("convex transition over ten seeds", criterion_3),
        ("loop elimination property suite", criterion_4),
        ("chord deviation bound", criterion_5),
        ("particle swarm unit suite", criterion_6),
        ("concave transition on perpendicular lines", criterion_7),
        ("ruled surface identities and OBJ round trip", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!("{} criterion {}: {name}: {}", if out.pass { "PASS" } else { "FAIL" }, i + 1, out.detail);
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
