//! Directional offsetting.
//!
//! Each sample moves by `d N` with `N = normalize(v × k)`, `v` the unit tangent and `k` the
//! parting direction (or a per-sample direction field). The raw polyline is then refit with a
//! chord-length cubic spline.

use crate::curve::{cubic_spline_interpolate, EndCondition, NurbsCurve3};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{mean_max_sd, Point3, Vec3};
use crate::subdivide::{subdivide_curve, OffsetSample, SubdivisionMode};

const PARALLEL_EPS: f64 = 1e-8;
const UNIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum DirectionField {
    Constant(Vec3),
    /// One direction per sample.
    PerSample(Vec<Vec3>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OffsetRule {
    pub direction: DirectionField,
    pub distance: f64,
}

fn check_unit(k: &Vec3) -> Result<()> {
    if (k.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidParameter(format!(
            "direction ({}, {}, {}) is not unit length",
            k.x, k.y, k.z
        )));
    }
    Ok(())
}

fn check_distance(d: f64) -> Result<()> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::InvalidParameter(format!("offset distance {d} must be >= 0")));
    }
    Ok(())
}

impl OffsetRule {
    pub fn constant(k: Vec3, distance: f64) -> Result<Self> {
        check_unit(&k)?;
        check_distance(distance)?;
        Ok(Self {
            direction: DirectionField::Constant(k),
            distance,
        })
    }

    pub fn per_sample(field: Vec<Vec3>, distance: f64) -> Result<Self> {
        field.iter().try_for_each(check_unit)?;
        check_distance(distance)?;
        Ok(Self {
            direction: DirectionField::PerSample(field),
            distance,
        })
    }

    pub fn direction_at(&self, i: usize) -> Option<Vec3> {
        match &self.direction {
            DirectionField::Constant(k) => Some(*k),
            DirectionField::PerSample(f) => f.get(i).copied(),
        }
    }
}

/// `normalize(v × k)`.
pub fn offset_direction(unit_tangent: &Vec3, k: &Vec3) -> Result<Vec3> {
    let n = unit_tangent.cross(k);
    let len = n.norm();
    if len < PARALLEL_EPS {
        return Err(Error::DegenerateDirection { sample: None });
    }
    Ok(n / len)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffsetPoint {
    pub sample: OffsetSample,
    pub point: Point3,
}

/// Offset samples joined by straight segments, before loop removal.
#[derive(Clone, Debug, PartialEq)]
pub struct RawOffsetPolyline {
    pub entries: Vec<OffsetPoint>,
    pub closed: bool,
}

impl RawOffsetPolyline {
    pub fn points(&self) -> Vec<Point3> {
        self.entries.iter().map(|e| e.point).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn raw_offset(samples: &[OffsetSample], rule: &OffsetRule) -> Result<RawOffsetPolyline> {
    if samples.is_empty() {
        return Err(Error::DegenerateInput("no samples to offset".into()));
    }
    if let DirectionField::PerSample(f) = &rule.direction {
        if f.len() != samples.len() {
            return Err(Error::InvalidParameter(format!(
                "{} field directions for {} samples",
                f.len(),
                samples.len()
            )));
        }
    }
    let d = rule.distance;
    let entries = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let k = rule.direction_at(i).expect("field length checked");
            let n = offset_direction(&s.unit_tangent, &k)
                .map_err(|_| Error::DegenerateDirection { sample: Some(i) })?;
            Ok(OffsetPoint {
                sample: *s,
                point: s.position + n * d,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawOffsetPolyline {
        entries,
        closed: false,
    })
}

/// Fits a curve through offset points: a cubic spline for three or more points, a line
/// for two.
pub fn fit_points(points: &[Point3], end: &EndCondition) -> Result<NurbsCurve3> {
    match points.len() {
        0 | 1 => Err(Error::DegenerateInput("chain needs at least two points".into())),
        2 => NurbsCurve3::line(points[0], points[1]),
        _ => cubic_spline_interpolate(points, end),
    }
}

pub fn fit_offset_curve(chain: &RawOffsetPolyline, end: &EndCondition) -> Result<NurbsCurve3> {
    if chain.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "offset chain has {} points, need 3",
            chain.len()
        )));
    }
    cubic_spline_interpolate(&chain.points(), end)
}

/// Derivative of the exact offset `C + d N` at `t` for a constant direction `k`.
pub fn offset_tangent(curve: &NurbsCurve3, k: &Vec3, d: f64, t: f64) -> Result<Vec3> {
    let der = curve.derivatives(t, 2)?;
    let speed = der[1].norm();
    if speed < 1e-12 {
        return Err(Error::DegenerateTangent { t });
    }
    let v = der[1] / speed;
    let dv = (der[2] - v * der[2].dot(&v)) / speed;
    let u = v.cross(k);
    let ulen = u.norm();
    if ulen < PARALLEL_EPS {
        return Err(Error::DegenerateDirection { sample: None });
    }
    let n = u / ulen;
    let du = dv.cross(k);
    let dn = (du - n * du.dot(&n)) / ulen;
    Ok(der[1] + dn * d)
}

/// Clamped end condition from the exact offset tangents at both curve ends.
pub fn offset_end_condition(curve: &NurbsCurve3, k: &Vec3, d: f64) -> Result<EndCondition> {
    let (a, b) = curve.domain();
    Ok(EndCondition::clamped(
        offset_tangent(curve, k, d, a)?,
        offset_tangent(curve, k, d, b)?,
    ))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorStats {
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
}

const SEED_COUNT: usize = 1024;
const GOLDEN_WIDTH: f64 = 1e-10;

/// Nearest-point distance queries against a fixed curve.
pub struct ClosestPoint<'a> {
    curve: &'a NurbsCurve3,
    params: Vec<f64>,
    points: Vec<Point3>,
}

impl<'a> ClosestPoint<'a> {
    pub fn new(curve: &'a NurbsCurve3) -> Result<Self> {
        let params: Vec<f64> = (0..=SEED_COUNT)
            .map(|i| curve.param_at(i as f64 / SEED_COUNT as f64))
            .collect();
        let points = params
            .iter()
            .map(|&t| curve.evaluate(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            curve,
            params,
            points,
        })
    }

    /// Distance from `q` to the curve: dense seeding, then golden-section refinement of the
    /// bracketing parameter interval.
    pub fn distance(&self, q: &Point3) -> f64 {
        self.closest(q).1
    }

    /// Parameter of the nearest curve point and its distance.
    pub fn closest(&self, q: &Point3) -> (f64, f64) {
        let (best, _) = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - q).norm_squared()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let mut lo = self.params[best.saturating_sub(1)];
        let mut hi = self.params[(best + 1).min(self.params.len() - 1)];
        let f = |t: f64| {
            self.curve
                .evaluate(t)
                .map(|p| (p - q).norm_squared())
                .unwrap_or(f64::INFINITY)
        };
        let width = GOLDEN_WIDTH * (self.params[self.params.len() - 1] - self.params[0]);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        while hi - lo > width {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
        }
        let seed = (self.points[best] - q).norm_squared();
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm <= seed {
            (mid, fm.sqrt())
        } else {
            (self.params[best], seed.sqrt())
        }
    }
}

/// Distances from `samples` uniform points of `offset_curve` to `original`.
pub fn offset_distances(
    offset_curve: &NurbsCurve3,
    original: &NurbsCurve3,
    samples: usize,
    exec: Exec,
) -> Result<Vec<f64>> {
    let samples = samples.max(2);
    let query = ClosestPoint::new(original)?;
    let points = offset_curve.sample_uniform(samples)?;
    Ok(exec.map(&points, |q| query.distance(q)))
}

/// Mean, max and population SD of the offset-to-original distances.
pub fn offset_error_stats(
    offset_curve: &NurbsCurve3,
    original: &NurbsCurve3,
    samples: usize,
    exec: Exec,
) -> Result<ErrorStats> {
    let dist = offset_distances(offset_curve, original, samples, exec)?;
    let (mean, max, sd) = mean_max_sd(&dist);
    Ok(ErrorStats { mean, max, sd })
}

/// Sampling, raw offset and clamped spline fit of one open curve under a constant direction.
#[derive(Clone, Debug)]
pub struct SingleOffset {
    pub samples: Vec<OffsetSample>,
    pub raw: RawOffsetPolyline,
    pub end: EndCondition,
    pub curve: NurbsCurve3,
}

pub fn offset_single(
    curve: &NurbsCurve3,
    epsilon: f64,
    k: Vec3,
    d: f64,
    mode: SubdivisionMode,
) -> Result<SingleOffset> {
    let rule = OffsetRule::constant(k, d)?;
    let samples = subdivide_curve(curve, epsilon, d, mode)?;
    let raw = raw_offset(&samples, &rule)?;
    let end = offset_end_condition(curve, &k, d).unwrap_or_default();
    let fitted = fit_points(&raw.points(), &end)?;
    Ok(SingleOffset {
        samples,
        raw,
        end,
        curve: fitted,
    })
}
