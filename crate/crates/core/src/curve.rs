//! Rational B-spline space curves.
//!
//! Curves are stored clamped (end knots of multiplicity `degree + 1`) with positive
//! weights. Evaluation works on homogeneous coordinates and applies the quotient rule
//! for derivatives.

use crate::error::{Error, Result};
use crate::geom::{is_finite3, Point3, Vec3};

/// Below `KAPPA_EPS * |C'|^3` the cross product `|C' x C''|` counts as zero and the
/// curvature radius is reported as infinite.
pub const KAPPA_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NurbsCurve3 {
    degree: usize,
    knots: Vec<f64>,
    control_points: Vec<Point3>,
    weights: Vec<f64>,
}

impl NurbsCurve3 {
    pub fn new(
        degree: usize,
        knots: Vec<f64>,
        control_points: Vec<Point3>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidCurve(msg));
        if degree < 1 {
            return invalid("degree must be at least 1".into());
        }
        let n = control_points.len();
        if n < degree + 1 {
            return invalid(format!("{n} control points for degree {degree}"));
        }
        if weights.len() != n {
            return invalid(format!("{} weights for {n} control points", weights.len()));
        }
        if knots.len() != n + degree + 1 {
            return invalid(format!(
                "knot count {} != {} control points + degree {} + 1",
                knots.len(),
                n,
                degree
            ));
        }
        if knots.iter().any(|k| !k.is_finite()) || control_points.iter().any(|p| !is_finite3(p)) {
            return invalid("non-finite knot or control point".into());
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return invalid(format!("weight {w} is not positive"));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return invalid("knot vector is decreasing".into());
        }
        let (lo, hi) = (knots[degree], knots[n]);
        if knots[..=degree].iter().any(|&k| k != lo) || knots[n..].iter().any(|&k| k != hi) {
            return invalid("knot vector is not clamped".into());
        }
        if hi <= lo {
            return invalid("empty parameter domain".into());
        }
        Ok(Self {
            degree,
            knots,
            control_points,
            weights,
        })
    }

    /// Single-span Bézier curve on `[0, 1]`.
    pub fn bezier(control_points: Vec<Point3>, weights: Vec<f64>) -> Result<Self> {
        if control_points.len() < 2 {
            return Err(Error::InvalidCurve("bezier needs two control points".into()));
        }
        let p = control_points.len() - 1;
        let mut knots = vec![0.0; p + 1];
        knots.extend(std::iter::repeat_n(1.0, p + 1));
        Self::new(p, knots, control_points, weights)
    }

    /// Non-rational Bézier curve on `[0, 1]`.
    pub fn polynomial_bezier(control_points: Vec<Point3>) -> Result<Self> {
        let w = vec![1.0; control_points.len()];
        Self::bezier(control_points, w)
    }

    pub fn line(a: Point3, b: Point3) -> Result<Self> {
        Self::polynomial_bezier(vec![a, b])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn control_points(&self) -> &[Point3] {
        &self.control_points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_rational(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().any(|&w| w != w0)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.control_points.len()])
    }

    /// Maps `s` in `[0, 1]` affinely onto the domain.
    pub fn param_at(&self, s: f64) -> f64 {
        let (a, b) = self.domain();
        a + (b - a) * s
    }

    fn check_domain(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (hi - lo);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::Domain { t, lo, hi });
        }
        Ok(t.clamp(lo, hi))
    }

    fn find_span(&self, t: f64) -> usize {
        let n = self.control_points.len() - 1;
        let p = self.degree;
        if t >= self.knots[n + 1] {
            return n;
        }
        if t <= self.knots[p] {
            return p;
        }
        // knots[p..=n+1] is sorted; last index with knots[i] <= t
        let idx = self.knots[p..=n + 1].partition_point(|&k| k <= t) + p - 1;
        idx.min(n)
    }

    /// Nonzero basis functions and their derivatives up to `order` at `t` in span `span`.
    fn basis_derivatives(&self, span: usize, t: f64, order: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=order {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p as isize - k as isize;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk];
                    d = a[s2][0] * ndu[rk][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let row = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[(pk + 1) as usize][row];
                    d += a[s2][j] * ndu[row][pk as usize];
                }
                if r as isize <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[(pk + 1) as usize][r];
                    d += a[s2][k] * ndu[r][pk as usize];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=order {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p as f64) - (k as f64);
        }
        ders
    }

    /// Curve point followed by its derivatives up to `order` (at most 2):
    /// `[C(t), C'(t), C''(t)]` truncated to `order + 1` entries.
    pub fn derivatives(&self, t: f64, order: usize) -> Result<Vec<Vec3>> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        let t = self.check_domain(t)?;
        let span = self.find_span(t);
        let p = self.degree;
        let basis_order = order.min(p);
        let ders = self.basis_derivatives(span, t, basis_order);
        let mut a = [Vec3::zeros(); 3];
        let mut w = [0.0; 3];
        for k in 0..=basis_order {
            for j in 0..=p {
                let i = span - p + j;
                let wi = self.weights[i];
                a[k] += self.control_points[i] * (wi * ders[k][j]);
                w[k] += wi * ders[k][j];
            }
        }
        let c0 = a[0] / w[0];
        let mut out = vec![c0];
        if order >= 1 {
            let c1 = (a[1] - c0 * w[1]) / w[0];
            out.push(c1);
            if order >= 2 {
                out.push((a[2] - c1 * (2.0 * w[1]) - c0 * w[2]) / w[0]);
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, t: f64) -> Result<Point3> {
        Ok(self.derivatives(t, 0)?[0])
    }

    /// Unit tangent at `t`.
    pub fn unit_tangent(&self, t: f64) -> Result<Vec3> {
        let d = self.derivatives(t, 1)?;
        let n = d[1].norm();
        if n < 1e-12 {
            return Err(Error::DegenerateTangent { t });
        }
        Ok(d[1] / n)
    }

    /// `|C'|^3 / |C' x C''|`, or `f64::INFINITY` on straight stretches.
    pub fn curvature_radius(&self, t: f64) -> Result<f64> {
        let d = self.derivatives(t, 2)?;
        radius_from_derivatives(&d[1], &d[2]).ok_or(Error::DegenerateTangent { t })
    }

    /// Uniform parameter samples including both ends.
    pub fn sample_uniform(&self, count: usize) -> Result<Vec<Point3>> {
        let count = count.max(2);
        (0..count)
            .map(|i| self.evaluate(self.param_at(i as f64 / (count - 1) as f64)))
            .collect()
    }

    fn multiplicity(&self, t: f64) -> usize {
        self.knots.iter().filter(|&&k| k == t).count()
    }

    /// Inserts `t` once (Boehm), keeping the curve geometrically unchanged.
    pub fn insert_knot(&self, t: f64) -> Result<Self> {
        let t = self.check_domain(t)?;
        let p = self.degree;
        let k = self.find_span(t);
        let s = self.multiplicity(t);
        if s >= p && t > self.domain().0 && t < self.domain().1 {
            return Ok(self.clone());
        }
        let hom: Vec<(Vec3, f64)> = self
            .control_points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| (p * w, w))
            .collect();
        let mut new_hom = Vec::with_capacity(hom.len() + 1);
        for i in 0..=hom.len() {
            if i + p <= k {
                new_hom.push(hom[i]);
            } else if i > k {
                new_hom.push(hom[i - 1]);
            } else {
                let denom = self.knots[i + p] - self.knots[i];
                let alpha = if denom > 0.0 {
                    (t - self.knots[i]) / denom
                } else {
                    0.0
                };
                let (q0, w0) = hom[i - 1];
                let (q1, w1) = hom[i];
                new_hom.push((q1 * alpha + q0 * (1.0 - alpha), w1 * alpha + w0 * (1.0 - alpha)));
            }
        }
        let mut knots = self.knots.clone();
        knots.insert(k + 1, t);
        let (cps, ws): (Vec<_>, Vec<_>) = new_hom.into_iter().map(|(q, w)| (q / w, w)).unzip();
        Self::new(p, knots, cps, ws)
    }

    /// Raises the multiplicity of interior knot `t` to `degree`.
    fn saturate_knot(&self, t: f64) -> Result<Self> {
        let mut c = self.clone();
        while c.multiplicity(t) < c.degree {
            c = c.insert_knot(t)?;
        }
        Ok(c)
    }

    /// Splits into Bézier pieces, one per nonzero knot span.
    pub fn decompose_to_bezier(&self) -> Vec<BezierSegment> {
        let (lo, hi) = self.domain();
        let mut interior: Vec<f64> = self
            .knots
            .iter()
            .cloned()
            .filter(|&k| k > lo && k < hi)
            .collect();
        interior.dedup();
        let mut c = self.clone();
        for &t in &interior {
            // interior knots always lie inside the domain
            c = c.saturate_knot(t).expect("interior knot in domain");
        }
        let p = c.degree;
        let mut out = Vec::new();
        for s in p..c.control_points.len() {
            let (a, b) = (c.knots[s], c.knots[s + 1]);
            if b > a {
                out.push(BezierSegment {
                    degree: p,
                    control_points: c.control_points[s - p..=s].to_vec(),
                    weights: c.weights[s - p..=s].to_vec(),
                    span: (a, b),
                });
            }
        }
        out
    }

    /// The piece of the curve between parameters `a < b`, keeping the original parameterization.
    pub fn sub_curve(&self, a: f64, b: f64) -> Result<Self> {
        let a = self.check_domain(a)?;
        let b = self.check_domain(b)?;
        if b <= a {
            return Err(Error::InvalidParameter(format!("empty sub-curve [{a}, {b}]")));
        }
        let (lo, hi) = self.domain();
        let mut c = self.clone();
        for t in [a, b] {
            if t > lo && t < hi {
                while c.multiplicity(t) < c.degree + 1 {
                    c = c.insert_knot_unchecked(t);
                }
            }
        }
        let p = c.degree;
        // first control point index belonging to [a, ..]
        let first = c.knots.iter().position(|&k| k == a).unwrap_or(0);
        let last_knot = c.knots.iter().rposition(|&k| k == b).unwrap_or(c.knots.len() - 1);
        let knots = c.knots[first..=last_knot].to_vec();
        let ncp = knots.len() - p - 1;
        let cps = c.control_points[first..first + ncp].to_vec();
        let ws = c.weights[first..first + ncp].to_vec();
        Self::new(p, knots, cps, ws)
    }

    /// Knot insertion that tolerates multiplicity up to `degree + 1` (used for splitting).
    fn insert_knot_unchecked(&self, t: f64) -> Self {
        let p = self.degree;
        let k = self.find_span_right(t);
        let hom: Vec<(Vec3, f64)> = self
            .control_points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| (p * w, w))
            .collect();
        let mut new_hom = Vec::with_capacity(hom.len() + 1);
        for i in 0..=hom.len() {
            if i + p <= k {
                new_hom.push(hom[i]);
            } else if i > k {
                new_hom.push(hom[i - 1]);
            } else {
                let denom = self.knots[i + p] - self.knots[i];
                let alpha = if denom > 0.0 {
                    (t - self.knots[i]) / denom
                } else {
                    0.0
                };
                let (q0, w0) = hom[i - 1];
                let (q1, w1) = hom[i];
                new_hom.push((q1 * alpha + q0 * (1.0 - alpha), w1 * alpha + w0 * (1.0 - alpha)));
            }
        }
        let mut knots = self.knots.clone();
        knots.insert(k + 1, t);
        let (cps, ws): (Vec<_>, Vec<_>) = new_hom.into_iter().map(|(q, w)| (q / w, w)).unzip();
        Self {
            degree: p,
            knots,
            control_points: cps,
            weights: ws,
        }
    }

    /// Span index `k` with `knots[k] <= t < knots[k+1]`, ignoring the clamped-end shortcut.
    fn find_span_right(&self, t: f64) -> usize {
        self.knots.partition_point(|&k| k <= t) - 1
    }

    /// Same geometry with the domain mapped affinely onto `[0, 1]`.
    pub fn normalized(&self) -> Self {
        let (a, b) = self.domain();
        let knots = self.knots.iter().map(|k| (k - a) / (b - a)).collect();
        Self {
            knots,
            ..self.clone()
        }
    }

    /// Polyline approximation by `count` uniform parameter samples; used for arc-length tables.
    pub fn arc_length_table(&self, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let count = count.max(2);
        let params: Vec<f64> = (0..count)
            .map(|i| self.param_at(i as f64 / (count - 1) as f64))
            .collect();
        let pts = params
            .iter()
            .map(|&t| self.evaluate(t))
            .collect::<Result<Vec<_>>>()?;
        let mut lengths = vec![0.0];
        for w in pts.windows(2) {
            let last = *lengths.last().unwrap();
            lengths.push(last + (w[1] - w[0]).norm());
        }
        Ok((params, lengths))
    }
}

pub(crate) fn radius_from_derivatives(d1: &Vec3, d2: &Vec3) -> Option<f64> {
    let speed = d1.norm();
    if speed < 1e-12 {
        return None;
    }
    let cross = d1.cross(d2).norm();
    let cube = speed.powi(3);
    if cross < KAPPA_EPS * cube {
        Some(f64::INFINITY)
    } else {
        Some(cube / cross)
    }
}

/// One Bézier piece of a decomposed curve, parameterized locally on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BezierSegment {
    pub degree: usize,
    pub control_points: Vec<Point3>,
    pub weights: Vec<f64>,
    /// Parameter interval of the parent curve covered by this piece.
    pub span: (f64, f64),
}

impl BezierSegment {
    pub fn is_rational(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().any(|&w| w != w0)
    }

    /// The piece as a standalone curve on `[0, 1]`.
    pub fn to_curve(&self) -> NurbsCurve3 {
        NurbsCurve3::bezier(self.control_points.clone(), self.weights.clone())
            .expect("segment satisfies curve invariants")
    }

    /// Rational de Casteljau evaluation at local parameter `u`.
    pub fn evaluate_local(&self, u: f64) -> Point3 {
        let mut pts: Vec<(Vec3, f64)> = self
            .control_points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| (p * w, w))
            .collect();
        for r in 1..pts.len() {
            for i in 0..pts.len() - r {
                let (a, wa) = pts[i];
                let (b, wb) = pts[i + 1];
                pts[i] = (a * (1.0 - u) + b * u, wa * (1.0 - u) + wb * u);
            }
        }
        pts[0].0 / pts[0].1
    }

    /// Maps local `u` to the parent curve parameter.
    pub fn global_param(&self, u: f64) -> f64 {
        self.span.0 + (self.span.1 - self.span.0) * u
    }
}

/// End tangents for [`cubic_spline_interpolate`]. A missing tangent selects the natural
/// (zero second derivative) condition at that end.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EndCondition {
    pub start: Option<Vec3>,
    pub end: Option<Vec3>,
}

impl EndCondition {
    pub fn natural() -> Self {
        Self::default()
    }

    pub fn clamped(start: Vec3, end: Vec3) -> Self {
        Self {
            start: Some(start),
            end: Some(end),
        }
    }

    pub fn label(&self) -> &'static str {
        match (self.start, self.end) {
            (Some(_), Some(_)) => "clamped",
            (None, None) => "natural",
            _ => "mixed",
        }
    }
}

/// C² cubic spline through `points`, parameterized by normalized chord length on `[0, 1]`.
///
/// Clamped tangents are directions; they are scaled so the derivative with respect to
/// chord length has unit magnitude. The result is stored in piecewise Bézier form
/// (interior knots of multiplicity 3).
pub fn cubic_spline_interpolate(points: &[Point3], end: &EndCondition) -> Result<NurbsCurve3> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "spline interpolation needs 3 points, got {}",
            points.len()
        )));
    }
    let chords: Vec<f64> = points.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = chords.iter().sum();
    if let Some(i) = chords.iter().position(|&c| c <= 1e-12 * total.max(1.0)) {
        return Err(Error::DegenerateInput(format!(
            "points {i} and {} coincide",
            i + 1
        )));
    }
    let n = points.len() - 1;
    let h: Vec<f64> = chords.iter().map(|c| c / total).collect();
    let mut knots_u = vec![0.0];
    for hi in &h {
        knots_u.push(knots_u.last().unwrap() + hi);
    }
    knots_u[n] = 1.0;

    let scaled = |v: Vec3| -> Result<Vec3> {
        let len = v.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::DegenerateInput("zero end tangent".into()));
        }
        Ok(v * (total / len))
    };

    // tridiagonal system for the node derivatives D_i
    let mut sub = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut sup = vec![0.0; n + 1];
    let mut rhs = vec![Vec3::zeros(); n + 1];
    match end.start {
        Some(t) => {
            diag[0] = 1.0;
            rhs[0] = scaled(t)?;
        }
        None => {
            diag[0] = 2.0;
            sup[0] = 1.0;
            rhs[0] = (points[1] - points[0]) * (3.0 / h[0]);
        }
    }
    for i in 1..n {
        sub[i] = h[i];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        sup[i] = h[i - 1];
        rhs[i] = ((points[i] - points[i - 1]) * (h[i] / h[i - 1])
            + (points[i + 1] - points[i]) * (h[i - 1] / h[i]))
            * 3.0;
    }
    match end.end {
        Some(t) => {
            diag[n] = 1.0;
            rhs[n] = scaled(t)?;
        }
        None => {
            sub[n] = 1.0;
            diag[n] = 2.0;
            rhs[n] = (points[n] - points[n - 1]) * (3.0 / h[n - 1]);
        }
    }
    let d = solve_tridiagonal(&sub, &diag, &sup, &rhs);

    let mut cps = Vec::with_capacity(3 * n + 1);
    cps.push(points[0]);
    for i in 0..n {
        cps.push(points[i] + d[i] * (h[i] / 3.0));
        cps.push(points[i + 1] - d[i + 1] * (h[i] / 3.0));
        cps.push(points[i + 1]);
    }
    let mut knots = vec![0.0; 4];
    for &u in &knots_u[1..n] {
        knots.extend([u, u, u]);
    }
    knots.extend([1.0; 4]);
    let w = vec![1.0; cps.len()];
    NurbsCurve3::new(3, knots, cps, w)
}

/// Thomas algorithm with vector right-hand side. The systems built here are diagonally
/// dominant, so no pivoting is needed.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[Vec3]) -> Vec<Vec3> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![Vec3::zeros(); n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - d[i - 1] * sub[i]) / m;
    }
    let mut x = vec![Vec3::zeros(); n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - x[i + 1] * c[i];
    }
    x
}
