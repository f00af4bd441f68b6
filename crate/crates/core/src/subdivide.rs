//! Curve sampling for offsetting.
//!
//! The traditional plan splits every Bézier piece into `n = ceil(sqrt(M / 8ε))` equal
//! parameter intervals, where `M` bounds the second derivative of the piece. The improved
//! plan then inserts `m = floor(d / r)` extra parameters into each interval, `r` being the
//! mean curvature radius at its two ends, so chords stay comparable after an offset of `d`.

use crate::curve::{radius_from_derivatives, BezierSegment, NurbsCurve3};
use crate::error::{Error, Result};
use crate::geom::{Point3, Vec3};

/// Upper bound on refinement insertions per interval.
pub const MAX_INSERTIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubdivisionMode {
    Traditional,
    Improved,
}

impl std::str::FromStr for SubdivisionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traditional" => Ok(Self::Traditional),
            "improved" => Ok(Self::Improved),
            other => Err(Error::InvalidParameter(format!("unknown subdivision mode {other}"))),
        }
    }
}

/// One sample of the original curve, ready to be offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffsetSample {
    pub position: Point3,
    pub parameter: f64,
    /// Positive, or `f64::INFINITY` on straight stretches.
    pub curvature_radius: f64,
    pub unit_tangent: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubdivisionPlan {
    /// Uniform parameters per Bézier piece, both ends included.
    pub base_params: Vec<Vec<f64>>,
    /// Merged, strictly increasing parameters over the whole curve.
    pub refined_params: Vec<f64>,
    /// Extra parameters inserted in each interval of the merged base list.
    pub insertions: Vec<usize>,
}

impl SubdivisionPlan {
    /// Base parameters merged across pieces, duplicates at piece joins removed.
    pub fn merged_base(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for seg in &self.base_params {
            for &t in seg {
                if out.last().is_none_or(|&l| t > l) {
                    out.push(t);
                }
            }
        }
        out
    }

    pub fn added_points(&self) -> usize {
        self.insertions.iter().sum()
    }
}

/// Largest `|f''|` over uniform local samples: `p + 1` of them for polynomial pieces and
/// `2(p + 1)` for rational ones.
pub fn second_derivative_bound(segment: &BezierSegment) -> f64 {
    let p = segment.degree;
    if p < 2 && !segment.is_rational() {
        return 0.0;
    }
    let count = if segment.is_rational() { 2 * (p + 1) } else { p + 1 };
    let curve = segment.to_curve();
    (0..count)
        .map(|i| {
            let u = i as f64 / (count - 1) as f64;
            curve.derivatives(u, 2).map(|d| d[2].norm()).unwrap_or(0.0)
        })
        .fold(0.0, f64::max)
}

/// Number of equal subintervals `max(1, ceil(sqrt(M / 8ε)))` on a unit parameter span.
pub fn base_count(bound: f64, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {epsilon} must be positive")));
    }
    let n = (bound.max(0.0) / (8.0 * epsilon)).sqrt();
    // guard against sqrt(100) = 10.000000000000002 style rounding
    let rounded = n.round();
    let n = if (n - rounded).abs() < 1e-9 { rounded } else { n.ceil() };
    Ok((n as usize).max(1))
}

/// Samples the curve at `t`.
pub fn sample_at(curve: &NurbsCurve3, t: f64) -> Result<OffsetSample> {
    let d = curve.derivatives(t, 2)?;
    let speed = d[1].norm();
    let radius = radius_from_derivatives(&d[1], &d[2]).ok_or(Error::DegenerateTangent { t })?;
    Ok(OffsetSample {
        position: d[0],
        parameter: t,
        curvature_radius: radius,
        unit_tangent: d[1] / speed,
    })
}

/// Traditional plan: per-piece uniform parameters sized by the second-derivative bound.
pub fn base_plan(curve: &NurbsCurve3, epsilon: f64) -> Result<SubdivisionPlan> {
    let mut base_params = Vec::new();
    for seg in curve.decompose_to_bezier() {
        let n = base_count(second_derivative_bound(&seg), epsilon)?;
        let params: Vec<f64> = (0..=n)
            .map(|i| {
                if i == n {
                    seg.span.1
                } else {
                    seg.global_param(i as f64 / n as f64)
                }
            })
            .collect();
        base_params.push(params);
    }
    let mut plan = SubdivisionPlan {
        base_params,
        refined_params: Vec::new(),
        insertions: Vec::new(),
    };
    plan.refined_params = plan.merged_base();
    plan.insertions = vec![0; plan.refined_params.len().saturating_sub(1)];
    Ok(plan)
}

/// Inserts `floor(d / r_mean)` uniform parameters into each base interval, where `r_mean`
/// averages the curvature radii of the interval ends. `samples` must be taken at the merged
/// base parameters.
pub fn refine_for_offset(
    base: &SubdivisionPlan,
    samples: &[OffsetSample],
    d: f64,
) -> Result<SubdivisionPlan> {
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("offset distance {d} is negative")));
    }
    let params = base.merged_base();
    if samples.len() != params.len() {
        return Err(Error::InvalidParameter(format!(
            "{} samples for {} base parameters",
            samples.len(),
            params.len()
        )));
    }
    let mut refined = vec![params[0]];
    let mut insertions = Vec::with_capacity(params.len() - 1);
    for (i, w) in params.windows(2).enumerate() {
        let r = 0.5 * (samples[i].curvature_radius + samples[i + 1].curvature_radius);
        let m = insertion_count(d, r);
        for k in 1..=m {
            refined.push(w[0] + (w[1] - w[0]) * k as f64 / (m + 1) as f64);
        }
        refined.push(w[1]);
        insertions.push(m);
    }
    Ok(SubdivisionPlan {
        base_params: base.base_params.clone(),
        refined_params: refined,
        insertions,
    })
}

/// `floor(d / r)` capped at [`MAX_INSERTIONS`]; zero for infinite radius.
pub fn insertion_count(d: f64, r: f64) -> usize {
    if d == 0.0 || !r.is_finite() {
        return 0;
    }
    let m = (d / r).floor();
    if m >= MAX_INSERTIONS as f64 {
        MAX_INSERTIONS
    } else {
        m as usize
    }
}

/// Chord between two points of an arc of radius `r` subtending `alpha`, after offsetting
/// outward by `d`: `2 (r + d) sin(alpha / 2)`.
pub fn arc_offset_chord(r: f64, d: f64, alpha: f64) -> f64 {
    2.0 * (r + d) * (alpha / 2.0).sin()
}

/// Full plan for `mode`.
pub fn plan_curve(
    curve: &NurbsCurve3,
    epsilon: f64,
    d: f64,
    mode: SubdivisionMode,
) -> Result<SubdivisionPlan> {
    if !(d >= 0.0) {
        return Err(Error::InvalidParameter(format!("offset distance {d} is negative")));
    }
    let base = base_plan(curve, epsilon)?;
    match mode {
        SubdivisionMode::Traditional => Ok(base),
        SubdivisionMode::Improved => {
            let samples = base
                .merged_base()
                .iter()
                .map(|&t| sample_at(curve, t))
                .collect::<Result<Vec<_>>>()?;
            refine_for_offset(&base, &samples, d)
        }
    }
}

/// Ordered samples over the whole curve.
pub fn subdivide_curve(
    curve: &NurbsCurve3,
    epsilon: f64,
    d: f64,
    mode: SubdivisionMode,
) -> Result<Vec<OffsetSample>> {
    let plan = plan_curve(curve, epsilon, d, mode)?;
    plan.refined_params
        .iter()
        .map(|&t| sample_at(curve, t))
        .collect()
}
