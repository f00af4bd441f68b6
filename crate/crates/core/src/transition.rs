//! Joint repair between offset chains.
//!
//! Convex joints leave a gap around the original co-vertex `P`; it is closed with a rational
//! quartic Bézier whose points stay (nearly) at distance `d` from `P`, found by particle swarm
//! search over four weights and the position of the middle control point. Concave joints
//! overlap; both curves are cut back past the crossing and joined with a cubic bridge.

use crate::curve::NurbsCurve3;
use crate::error::{Error, Result};
use crate::geom::{Point3, Vec2, Vec3};
use crate::optimizer::{pso_minimize, PsoConfig, PsoOutcome};
use crate::overlap::{segment_intersect_2d, ProjectionBasis, SegmentHit};

pub const SMOOTH_EPS: f64 = 1e-6;
pub const DEFAULT_SAMPLES: usize = 100;
pub const WEIGHT_PENALTY: f64 = 1e3;
pub const WEIGHT_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JointKind {
    Smooth,
    Convex,
    Concave,
}

impl JointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Smooth => "smooth",
            Self::Convex => "convex",
            Self::Concave => "concave",
        }
    }
}

/// `s = -T_end x T_start`; convex when `s.z < 0`.
pub fn classify_joint(t_end: &Vec3, t_start: &Vec3, z: &Vec3) -> Result<JointKind> {
    let (a, b) = (t_end.norm(), t_start.norm());
    if a == 0.0 || b == 0.0 {
        return Err(Error::DegenerateTangent { t: if a == 0.0 { 1.0 } else { 0.0 } });
    }
    let s = -t_end.cross(t_start);
    if s.norm() <= SMOOTH_EPS * a * b {
        return Ok(JointKind::Smooth);
    }
    Ok(if s.dot(z) < 0.0 {
        JointKind::Convex
    } else {
        JointKind::Concave
    })
}

/// End state of the left chain, start state of the right chain and the original co-vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointRecord {
    pub x0: Point3,
    pub t0: Vec3,
    pub x1: Point3,
    pub t1: Vec3,
    pub vertex: Point3,
    pub kind: JointKind,
}

impl JointRecord {
    pub fn new(x0: Point3, t0: Vec3, x1: Point3, t1: Vec3, vertex: Point3, z: &Vec3) -> Result<Self> {
        let kind = classify_joint(&t0, &t1, z)?;
        Ok(Self {
            x0,
            t0,
            x1,
            t1,
            vertex,
            kind,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphericalQuartic {
    pub control_points: [Point3; 5],
    pub weights: [f64; 5],
    /// `(w0, w1, w3, w4, p2a, p2b, p2g)`.
    pub params: [f64; 7],
    pub fitness: Option<f64>,
}

impl SphericalQuartic {
    /// Rational Bernstein evaluation; valid for any weights with a nonzero denominator.
    pub fn evaluate(&self, t: f64) -> Point3 {
        let s = 1.0 - t;
        let b = [s * s * s * s, 4.0 * t * s * s * s, 6.0 * t * t * s * s, 4.0 * t * t * t * s, t * t * t * t];
        let mut num = Vec3::zeros();
        let mut den = 0.0;
        for m in 0..5 {
            let bw = b[m] * self.weights[m];
            num += self.control_points[m] * bw;
            den += bw;
        }
        num / den
    }

    pub fn to_curve(&self) -> Result<NurbsCurve3> {
        NurbsCurve3::bezier(self.control_points.to_vec(), self.weights.to_vec())
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Endpoint data shared by every candidate quartic for one joint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermiteEnds {
    pub x0: Point3,
    pub t0: Vec3,
    pub x1: Point3,
    pub t1: Vec3,
}

impl From<&JointRecord> for HermiteEnds {
    fn from(j: &JointRecord) -> Self {
        Self {
            x0: j.x0,
            t0: j.t0,
            x1: j.x1,
            t1: j.t1,
        }
    }
}

/// Middle control point: a point at signed radius `d(2a - 1)` from the chord midpoint, with
/// latitude `pi(2b - 1)` and longitude `pi(2g - 1)`.
pub fn middle_control_point(ends: &HermiteEnds, d: f64, a: f64, b: f64, g: f64) -> Point3 {
    let rho = d * (2.0 * a - 1.0);
    let lat = std::f64::consts::PI * (2.0 * b - 1.0);
    let lon = std::f64::consts::PI * (2.0 * g - 1.0);
    let mid = (ends.x0 + ends.x1) * 0.5;
    mid + Vec3::new(lat.cos() * lon.sin(), lat.cos() * lon.cos(), lat.sin()) * rho
}

pub fn quartic_from_params(ends: &HermiteEnds, d: f64, params: &[f64; 7]) -> Result<SphericalQuartic> {
    let [w0, w1, w3, w4, a, b, g] = *params;
    if w1 == 0.0 || w3 == 0.0 {
        return Err(Error::InvalidParameter("inner weights w1, w3 must be nonzero".into()));
    }
    let p1 = ends.x0 + ends.t0 * (w0 / (4.0 * w1));
    let p3 = ends.x1 - ends.t1 * (w4 / (4.0 * w3));
    let p2 = middle_control_point(ends, d, a, b, g);
    Ok(SphericalQuartic {
        control_points: [ends.x0, p1, p2, p3, ends.x1],
        weights: [w0, w1, 1.0, w3, w4],
        params: *params,
        fitness: None,
    })
}

/// Population standard deviation of the distances.
pub fn distance_spread(distances: &[f64]) -> f64 {
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    (distances.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n).sqrt()
}

pub fn weight_penalty(weights: &[f64]) -> f64 {
    WEIGHT_PENALTY * weights.iter().map(|w| (WEIGHT_FLOOR - w).max(0.0)).sum::<f64>()
}

/// Spread of `|p(i/J) - P|` for `i = 1..=J`, plus the weight penalty.
pub fn transition_fitness(curve: &SphericalQuartic, vertex: &Point3, samples: usize) -> f64 {
    let distances: Vec<f64> = (1..=samples)
        .map(|i| (curve.evaluate(i as f64 / samples as f64) - vertex).norm())
        .collect();
    distance_spread(&distances) + weight_penalty(&curve.weights)
}

/// The seven-dimensional search box: four weights then the three middle-point coordinates.
pub fn transition_bounds() -> Vec<(f64, f64)> {
    let mut b = vec![(1e-3, 1.0); 4];
    b.extend([(0.0, 1.0); 3]);
    b
}

#[derive(Clone, Debug)]
pub struct ConvexSolution {
    pub curve: SphericalQuartic,
    pub outcome: PsoOutcome,
}

/// Solves for the quartic on a convex joint. `cfg.bounds` is replaced by [`transition_bounds`].
pub fn convex_transition(
    joint: &JointRecord,
    d: f64,
    cfg: &PsoConfig,
    samples: usize,
) -> Result<ConvexSolution> {
    let ends = HermiteEnds::from(joint);
    let chord = (joint.x1 - joint.x0).norm();
    if chord <= 1e-12 * d.max(1.0) {
        return Err(Error::DegenerateJoint("transition endpoints coincide".into()));
    }
    if joint.t0.norm() == 0.0 || joint.t1.norm() == 0.0 {
        return Err(Error::DegenerateJoint("zero end tangent".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("sample count {samples} < 2")));
    }
    let mut cfg = cfg.clone();
    cfg.bounds = transition_bounds();
    let vertex = joint.vertex;
    let fitness = |u: &[f64]| {
        let params: [f64; 7] = u.try_into().expect("seven parameters");
        match quartic_from_params(&ends, d, &params) {
            Ok(q) => transition_fitness(&q, &vertex, samples),
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = pso_minimize(fitness, &cfg)?;
    let params: [f64; 7] = outcome.best_position.as_slice().try_into().expect("seven parameters");
    let mut curve = quartic_from_params(&ends, d, &params)?;
    curve.fitness = Some(outcome.best_value);
    if outcome.best_value > cfg.target {
        return Err(Error::Convergence {
            fitness: outcome.best_value,
            target: cfg.target,
            best: Box::new(curve),
        });
    }
    Ok(ConvexSolution { curve, outcome })
}

/// Cubic Bézier from `p0` to `p1` leaving along `t0` and arriving along `t1`, inner control
/// points at a third of the chord.
pub fn hermite_cubic_bridge(p0: &Point3, t0: &Vec3, p1: &Point3, t1: &Vec3) -> Result<NurbsCurve3> {
    let l = (p1 - p0).norm();
    if l == 0.0 {
        return Err(Error::DegenerateBridge);
    }
    let (n0, n1) = (t0.norm(), t1.norm());
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::DegenerateTangent { t: if n0 == 0.0 { 0.0 } else { 1.0 } });
    }
    NurbsCurve3::polynomial_bezier(vec![*p0, p0 + t0 / n0 * (l / 3.0), p1 - t1 / n1 * (l / 3.0), *p1])
}

#[derive(Clone, Debug)]
pub struct ConcaveTransition {
    pub left: NurbsCurve3,
    pub right: NurbsCurve3,
    pub bridge: NurbsCurve3,
    /// Parameters of the projected crossing on the left and right curves.
    pub crossing: (f64, f64),
    /// Trim parameters on the left and right curves.
    pub trim: (f64, f64),
}

const CROSSING_SAMPLES: usize = 256;
const NEWTON_TOL: f64 = 1e-10;

struct Projected<'a> {
    curve: &'a NurbsCurve3,
    basis: ProjectionBasis,
}

impl Projected<'_> {
    fn point(&self, t: f64) -> Result<Vec2> {
        Ok(self.basis.project(&self.curve.evaluate(t)?))
    }

    fn tangent(&self, t: f64) -> Result<Vec2> {
        let d = self.curve.derivatives(t, 1)?;
        Ok(self.basis.project(&d[1]))
    }

    fn polyline(&self) -> Result<Vec<(f64, Vec2)>> {
        (0..=CROSSING_SAMPLES)
            .map(|i| {
                let t = self.curve.param_at(i as f64 / CROSSING_SAMPLES as f64);
                Ok((t, self.point(t)?))
            })
            .collect()
    }
}

/// Crossing nearest the junction: latest on the left curve, earliest on the right.
fn seed_crossing(left: &Projected, right: &Projected) -> Result<Option<(f64, f64)>> {
    let lp = left.polyline()?;
    let rp = right.polyline()?;
    let all: Vec<Vec2> = lp.iter().chain(&rp).map(|(_, q)| *q).collect();
    let diag = {
        let (mut lo, mut hi) = (all[0], all[0]);
        for q in &all {
            lo = lo.inf(q);
            hi = hi.sup(q);
        }
        (hi - lo).norm()
    };
    let eps = 1e-9 * diag.max(f64::MIN_POSITIVE);
    let (l0, l1) = left.curve.domain();
    let (r0, r1) = right.curve.domain();
    let mut best: Option<(f64, f64, f64)> = None;
    for a in lp.windows(2) {
        for b in rp.windows(2) {
            let (s, t) = match segment_intersect_2d(&a[0].1, &a[1].1, &b[0].1, &b[1].1, eps) {
                SegmentHit::Disjoint => continue,
                SegmentHit::Crossing { s, t, .. } | SegmentHit::CollinearOverlap { s, t } => (s, t),
            };
            let ta = a[0].0 + s * (a[1].0 - a[0].0);
            let tb = b[0].0 + t * (b[1].0 - b[0].0);
            let score = (l1 - ta) / (l1 - l0) + (tb - r0) / (r1 - r0);
            if best.is_none_or(|(_, _, bs)| score < bs) {
                best = Some((ta, tb, score));
            }
        }
    }
    Ok(best.map(|(a, b, _)| (a, b)))
}

/// Newton on `L(a) - R(b) = 0` in the projection plane; keeps the seed if Newton wanders off.
fn refine_crossing(left: &Projected, right: &Projected, seed: (f64, f64)) -> Result<(f64, f64)> {
    let (l0, l1) = left.curve.domain();
    let (r0, r1) = right.curve.domain();
    let (mut a, mut b) = seed;
    for _ in 0..50 {
        let f = left.point(a)? - right.point(b)?;
        let ja = left.tangent(a)?;
        let jb = -right.tangent(b)?;
        let det = ja.x * jb.y - ja.y * jb.x;
        if det.abs() < 1e-300 {
            break;
        }
        let da = (f.x * jb.y - f.y * jb.x) / det;
        let db = (ja.x * f.y - ja.y * f.x) / det;
        let (na, nb) = ((a - da).clamp(l0, l1), (b - db).clamp(r0, r1));
        let step = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        if step < NEWTON_TOL {
            return Ok((a, b));
        }
    }
    let f = left.point(a)? - right.point(b)?;
    let f0 = left.point(seed.0)? - right.point(seed.1)?;
    Ok(if f.norm() <= f0.norm() { (a, b) } else { seed })
}

/// Parameter between `from` and `to` where the chord to `anchor` equals `length`, found by
/// bisection. `g(from) >= 0` must hold.
fn trim_parameter(curve: &NurbsCurve3, anchor: &Point3, from: f64, to: f64, length: f64) -> Result<f64> {
    let g = |t: f64| -> Result<f64> { Ok((curve.evaluate(t)? - anchor).norm() - length) };
    let available = g(from)? + length;
    if available < length {
        return Err(Error::TrimLength {
            requested: length,
            available,
        });
    }
    let (mut good, mut bad) = (from, to);
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if g(mid)? >= 0.0 {
            good = mid;
        } else {
            bad = mid;
        }
    }
    // pick the side closer to the requested chord
    Ok(if g(good)?.abs() <= g(bad)?.abs() { good } else { bad })
}

/// Trims `left` and `right` at chord length `trim` back from their projected crossing and
/// joins the cut ends with a cubic bridge. A zero trim on a welded crossing yields a bridge
/// collapsed to the weld point.
pub fn concave_transition(
    left: &NurbsCurve3,
    right: &NurbsCurve3,
    k: &Vec3,
    trim: f64,
) -> Result<ConcaveTransition> {
    if !(trim >= 0.0 && trim.is_finite()) {
        return Err(Error::InvalidParameter(format!("trim length {trim}")));
    }
    let basis = ProjectionBasis::new(*k);
    let lp = Projected { curve: left, basis };
    let rp = Projected { curve: right, basis };
    let seed = seed_crossing(&lp, &rp)?.ok_or(Error::NoOverlap)?;
    let (a, b) = refine_crossing(&lp, &rp, seed)?;
    let (l0, _) = left.domain();
    let (_, r1) = right.domain();
    let pa = left.evaluate(a)?;
    let pb = right.evaluate(b)?;
    let ta = if trim == 0.0 { a } else { trim_parameter(left, &pa, l0, a, trim)? };
    let tb = if trim == 0.0 { b } else { trim_parameter(right, &pb, r1, b, trim)? };
    if ta <= l0 || tb >= r1 {
        return Err(Error::TrimLength {
            requested: trim,
            available: 0.0,
        });
    }
    let left_cut = left.sub_curve(l0, ta)?;
    let right_cut = right.sub_curve(tb, r1)?;
    let q0 = left.evaluate(ta)?;
    let q1 = right.evaluate(tb)?;
    let d0 = left.derivatives(ta, 1)?[1];
    let d1 = right.derivatives(tb, 1)?[1];
    let bridge = if (q1 - q0).norm() <= 1e-12 * (1.0 + q0.norm()) {
        NurbsCurve3::polynomial_bezier(vec![q0; 4])?
    } else {
        hermite_cubic_bridge(&q0, &d0, &q1, &d1)?
    };
    Ok(ConcaveTransition {
        left: left_cut,
        right: right_cut,
        bridge,
        crossing: (a, b),
        trim: (ta, tb),
    })
}
