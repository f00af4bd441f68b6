//! End-to-end offsetting of an ordered chain of curves.
//!
//! Each curve is sampled, offset and cleaned of projected loops on its own. Loop joints
//! inside a curve are trimmed and bridged. Corners (tangent jumps at interior knots, the
//! closing point of a closed curve, shared end points of consecutive curves) are classified
//! and repaired with a quartic (convex) or a trimmed cubic bridge (concave).

use std::path::{Path, PathBuf};

use crate::curve::{EndCondition, NurbsCurve3};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::{Point3, Vec3};
use crate::io::{parse_curves, CurveRecord};
use crate::offset::{
    fit_points, offset_error_stats, offset_tangent, raw_offset, ClosestPoint, ErrorStats, OffsetRule,
    RawOffsetPolyline,
};
use crate::optimizer::PsoConfig;
use crate::overlap::{eliminate_loops, Chain, ChainVertex, TrimmedChains};
use crate::subdivide::{subdivide_curve, OffsetSample, SubdivisionMode};
use crate::surface::{gap_fan, tessellate, Correspondence, RuledMesh, RuledPatch};
use crate::transition::{
    classify_joint, concave_transition, convex_transition, transition_bounds, JointKind, JointRecord,
    SphericalQuartic, DEFAULT_SAMPLES, SMOOTH_EPS,
};

#[derive(Clone, Debug, PartialEq)]
pub enum DirectionSpec {
    Constant(Vec3),
    /// `(s, k)` rows over the normalized parameter `s` of each curve, interpolated linearly
    /// and renormalized.
    Field(Vec<(f64, Vec3)>),
}

impl DirectionSpec {
    pub fn at(&self, s: f64) -> Vec3 {
        match self {
            Self::Constant(k) => *k,
            Self::Field(rows) => {
                let i = rows.partition_point(|r| r.0 <= s);
                let k = if i == 0 {
                    rows[0].1
                } else if i >= rows.len() {
                    rows[rows.len() - 1].1
                } else {
                    let (a, b) = (rows[i - 1], rows[i]);
                    let w = if b.0 > a.0 { (s - a.0) / (b.0 - a.0) } else { 1.0 };
                    a.1 * (1.0 - w) + b.1 * w
                };
                k.normalize()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndChoice {
    /// Exact offset tangents at the original curve ends, natural elsewhere.
    Clamped,
    Natural,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshOptions {
    pub nu: usize,
    pub nv: usize,
    pub fan: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { nu: 32, nv: 4, fan: 16 }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineSpec {
    pub curves: Vec<CurveRecord>,
    pub direction: DirectionSpec,
    /// Projection direction for overlap tests and the reference for joint classification.
    pub parting: Vec3,
    pub distance: f64,
    pub epsilon: f64,
    pub mode: SubdivisionMode,
    pub end: EndChoice,
    /// The last curve ends where the first begins.
    pub joined: bool,
    pub error_samples: usize,
    pub transition_samples: usize,
    pub pso: PsoConfig,
    /// Concave trim length; `2 d / 10` when unset.
    pub trim: Option<f64>,
    pub mesh: Option<MeshOptions>,
    pub exec: Exec,
}

impl PipelineSpec {
    pub fn new(curves: Vec<CurveRecord>, k: Vec3, distance: f64, epsilon: f64) -> Self {
        Self {
            curves,
            direction: DirectionSpec::Constant(k),
            parting: k,
            distance,
            epsilon,
            mode: SubdivisionMode::Improved,
            end: EndChoice::Clamped,
            joined: false,
            error_samples: 500,
            transition_samples: DEFAULT_SAMPLES,
            pso: PsoConfig::new(transition_bounds()),
            trim: None,
            mesh: None,
            exec: Exec::default(),
        }
    }

    pub fn trim_length(&self) -> f64 {
        self.trim.unwrap_or(0.2 * self.distance)
    }

    /// Parses the key-value spec; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut curves = Vec::new();
        let mut direction = None;
        let mut parting = None;
        let mut distance = None;
        let mut spec = PipelineSpec::new(Vec::new(), Vec3::z(), 0.0, 1.0);
        let mut mesh: Option<MeshOptions> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line, msg };
            let (key, value) = body
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| perr(format!("expected key = value, got {body:?}")))?;
            let num = || -> Result<f64> {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| perr(format!("{key}: bad number {value:?}")))
            };
            let int = || -> Result<usize> {
                value
                    .parse::<usize>()
                    .map_err(|_| perr(format!("{key}: bad integer {value:?}")))
            };
            let vec3 = || -> Result<Vec3> {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| perr(format!("{key}: bad vector {value:?}")))?;
                if v.len() != 3 || v.iter().any(|c| !c.is_finite()) {
                    return Err(perr(format!("{key}: expected three numbers")));
                }
                let k = Vec3::new(v[0], v[1], v[2]);
                if k.norm() == 0.0 {
                    return Err(perr(format!("{key}: zero vector")));
                }
                Ok(k.normalize())
            };
            let flag = || -> Result<bool> {
                match value {
                    "0" | "false" => Ok(false),
                    "1" | "true" => Ok(true),
                    _ => Err(perr(format!("{key}: expected 0 or 1"))),
                }
            };
            let path = || base.join(value);
            match key {
                "curve" => {
                    let p = path();
                    let text = read(&p)?;
                    curves.extend(parse_curves(&text).map_err(|e| e.context(p.display().to_string()))?);
                }
                "distance" => {
                    let d = num()?;
                    if d < 0.0 {
                        return Err(perr(format!("distance {d} is negative")));
                    }
                    distance = Some(d);
                }
                "direction" => direction = Some(DirectionSpec::Constant(vec3()?)),
                "direction_field" => {
                    let p = path();
                    direction = Some(DirectionSpec::Field(parse_field(&read(&p)?).map_err(|e| e.context(p.display().to_string()))?));
                }
                "parting" => parting = Some(vec3()?),
                "epsilon" => {
                    let e = num()?;
                    if e <= 0.0 {
                        return Err(perr(format!("epsilon {e} must be positive")));
                    }
                    spec.epsilon = e;
                }
                "mode" => spec.mode = value.parse().map_err(|e: Error| perr(e.to_string()))?,
                "end_condition" => {
                    spec.end = match value {
                        "clamped" => EndChoice::Clamped,
                        "natural" => EndChoice::Natural,
                        _ => return Err(perr(format!("unknown end condition {value:?}"))),
                    }
                }
                "joined" => spec.joined = flag()?,
                "error_samples" => spec.error_samples = int()?.max(2),
                "seed" => spec.pso.seed = value.parse().map_err(|_| perr(format!("bad seed {value:?}")))?,
                "transition.samples" => spec.transition_samples = int()?,
                "transition.swarm_size" => spec.pso.swarm_size = int()?,
                "transition.inertia" => spec.pso.inertia = num()?,
                "transition.c1" => spec.pso.c1 = num()?,
                "transition.c2" => spec.pso.c2 = num()?,
                "transition.max_iter" => spec.pso.max_iter = int()?,
                "transition.target" => spec.pso.target = num()?,
                "transition.trim" => {
                    let t = num()?;
                    if t < 0.0 {
                        return Err(perr(format!("trim length {t} is negative")));
                    }
                    spec.trim = Some(t);
                }
                "mesh" => {
                    mesh = if flag()? { Some(mesh.unwrap_or_default()) } else { None };
                }
                "mesh.nu" | "mesh.nv" | "mesh.fan" => {
                    let m = mesh.get_or_insert_with(MeshOptions::default);
                    let v = int()?;
                    if v == 0 {
                        return Err(perr(format!("{key} must be at least 1")));
                    }
                    match key {
                        "mesh.nu" => m.nu = v,
                        "mesh.nv" => m.nv = v,
                        _ => m.fan = v,
                    }
                }
                _ => return Err(perr(format!("unknown key {key:?}"))),
            }
        }
        let eof = |msg: &str| Error::Parse {
            line: 0,
            msg: msg.into(),
        };
        if curves.is_empty() {
            return Err(eof("spec names no curve"));
        }
        spec.curves = curves;
        spec.distance = distance.ok_or_else(|| eof("spec lacks distance"))?;
        spec.direction = direction.ok_or_else(|| eof("spec lacks direction or direction_field"))?;
        spec.parting = match (parting, &spec.direction) {
            (Some(p), _) => p,
            (None, DirectionSpec::Constant(k)) => *k,
            (None, DirectionSpec::Field(_)) => Vec3::z(),
        };
        spec.mesh = mesh;
        spec.pso.validate().map_err(|e| eof(&e.to_string()))?;
        Ok(spec)
    }
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(e).context(path.display().to_string()))
}

/// `s x y z` rows, `s` increasing in `[0, 1]`.
pub fn parse_field(text: &str) -> Result<Vec<(f64, Vec3)>> {
    let mut rows: Vec<(f64, Vec3)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { line: n + 1, msg };
        let v: Vec<f64> = body
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(format!("bad row {body:?}")))?;
        if v.len() != 4 {
            return Err(perr("expected s x y z".into()));
        }
        let k = Vec3::new(v[1], v[2], v[3]);
        if k.norm() == 0.0 || !k.iter().all(|c| c.is_finite()) {
            return Err(perr("zero or non-finite direction".into()));
        }
        if rows.last().is_some_and(|r| r.0 >= v[0]) {
            return Err(perr("s must increase".into()));
        }
        rows.push((v[0], k.normalize()));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "empty direction field".into(),
        });
    }
    Ok(rows)
}

/// Fitted offset curve for one chain, with its place on the original curve.
#[derive(Clone, Debug)]
pub struct OffsetPiece {
    pub curve_index: usize,
    pub curve: NurbsCurve3,
    /// Increasing `(original parameter, piece parameter)` pairs, kept in step with trimming.
    pub pairs: Option<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug)]
pub struct CurveOutput {
    pub samples: Vec<OffsetSample>,
    pub raw: RawOffsetPolyline,
    pub trimmed: TrimmedChains,
    /// Offset distance statistics per fitted piece (before joint trimming).
    pub stats: Vec<ErrorStats>,
}

#[derive(Clone, Debug)]
pub enum Repair {
    /// Tangent-continuous joint left alone.
    None,
    Convex { quartic: SphericalQuartic, iterations: usize },
    Concave { bridge: NurbsCurve3, trim: (f64, f64) },
    /// Concave joint whose projections never cross; left as a position-only join.
    Unrepaired,
}

#[derive(Clone, Debug)]
pub struct JointReport {
    pub label: String,
    pub left_piece: usize,
    pub right_piece: usize,
    pub record: JointRecord,
    pub gap: f64,
    pub repair: Repair,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub curves: Vec<CurveOutput>,
    pub pieces: Vec<OffsetPiece>,
    pub joints: Vec<JointReport>,
    pub mesh: Option<RuledMesh>,
}

impl PipelineOutput {
    /// Offset pieces and repair curves in chain order.
    pub fn final_curves(&self) -> Result<Vec<NurbsCurve3>> {
        let mut out = Vec::new();
        let mut joint_after: Vec<Option<&JointReport>> = vec![None; self.pieces.len()];
        for j in &self.joints {
            joint_after[j.left_piece] = Some(j);
        }
        for (i, p) in self.pieces.iter().enumerate() {
            out.push(p.curve.clone());
            match joint_after[i].map(|j| &j.repair) {
                Some(Repair::Convex { quartic, .. }) => out.push(quartic.to_curve()?),
                Some(Repair::Concave { bridge, .. }) => out.push(bridge.clone()),
                _ => {}
            }
        }
        Ok(out)
    }

    pub fn joint_csv(&self) -> String {
        let mut out = String::from("joint,kind,repair,gap,fitness,x0,y0,z0,x1,y1,z1\n");
        for j in &self.joints {
            let (repair, fitness) = match &j.repair {
                Repair::None => ("none", String::new()),
                Repair::Convex { quartic, .. } => ("quartic", format!("{:e}", quartic.fitness.unwrap_or(f64::NAN))),
                Repair::Concave { .. } => ("bridge", String::new()),
                Repair::Unrepaired => ("unrepaired", String::new()),
            };
            let r = &j.record;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                j.label,
                r.kind.as_str(),
                repair,
                j.gap,
                fitness,
                r.x0.x,
                r.x0.y,
                r.x0.z,
                r.x1.x,
                r.x1.y,
                r.x1.z
            ));
        }
        out
    }
}

/// Left piece, right piece, and the original curve point the two meet at when the joint
/// comes from the input rather than from loop removal.
type Link = (usize, usize, Option<Point3>);

fn offset_curve(
    index: usize,
    record: &CurveRecord,
    spec: &PipelineSpec,
) -> Result<(CurveOutput, Vec<OffsetPiece>, Vec<Link>)> {
    let curve = &record.curve;
    let (lo, hi) = curve.domain();
    // each smooth span is sampled on its own so corners get both one-sided offsets
    let spans = smooth_spans(curve)?;
    let mut samples = Vec::new();
    let mut span_start = Vec::new();
    for span in &spans {
        span_start.push(samples.len());
        samples.extend(subdivide_curve(span, spec.epsilon, spec.distance, spec.mode)?);
    }
    let rule = match &spec.direction {
        DirectionSpec::Constant(k) => OffsetRule::constant(*k, spec.distance)?,
        field => OffsetRule::per_sample(
            samples.iter().map(|s| field.at((s.parameter - lo) / (hi - lo))).collect(),
            spec.distance,
        )?,
    };
    let mut raw = raw_offset(&samples, &rule)?;
    raw.closed = record.closed;
    let trimmed = eliminate_loops(&raw, spec.parting)?;
    let last = samples.len() - 1;
    let closest = ClosestPoint::new(curve)?;
    // (last sample of one span, first sample of the next, the corner between them)
    let mut corners: Vec<(usize, usize, Point3)> = (1..spans.len())
        .map(|i| Ok((span_start[i] - 1, span_start[i], spans[i].evaluate(spans[i].domain().0)?)))
        .collect::<Result<_>>()?;
    if record.closed {
        corners.push((last, 0, curve.evaluate(lo)?));
    }
    let corner_at = |a: &ChainVertex, b: &ChainVertex| {
        corners
            .iter()
            .find(|c| a.source == Some(c.0) && b.source == Some(c.1))
            .map(|c| c.2)
    };
    let mut runs: Vec<Vec<ChainVertex>> = Vec::new();
    for chain in &trimmed.chains {
        let mut run: Vec<ChainVertex> = Vec::new();
        for v in &chain.vertices {
            if run.last().is_some_and(|p| corner_at(p, v).is_some()) {
                runs.push(std::mem::take(&mut run));
            }
            run.push(*v);
        }
        runs.push(run);
    }
    runs.retain(|r| r.len() >= 2);
    let mut links = Vec::new();
    let count = runs.len();
    let boundaries = if record.closed { count } else { count.saturating_sub(1) };
    for i in 0..boundaries {
        let j = (i + 1) % count;
        links.push((i, j, corner_at(runs[i].last().unwrap(), &runs[j][0])));
    }
    let span_of = |sample: usize| span_start.partition_point(|&s| s <= sample) - 1;
    let mut pieces = Vec::new();
    let mut stats = Vec::new();
    for run in &runs {
        let chain = Chain { vertices: run.clone() };
        let pts = chain.points();
        let mut end = EndCondition::natural();
        if let (EndChoice::Clamped, DirectionSpec::Constant(k)) = (spec.end, &spec.direction) {
            if let Some(i) = run[0].source.filter(|i| span_start.contains(i)) {
                let span = &spans[span_of(i)];
                end.start = Some(offset_tangent(span, k, spec.distance, span.domain().0)?);
            }
            if let Some(i) = run[run.len() - 1].source.filter(|&i| i == last || span_start.contains(&(i + 1))) {
                let span = &spans[span_of(i)];
                end.end = Some(offset_tangent(span, k, spec.distance, span.domain().1)?);
            }
        }
        let fitted = fit_points(&pts, &end)?;
        // chord-length node parameters of the fit
        let mut acc = vec![0.0];
        for w in pts.windows(2) {
            acc.push(acc.last().unwrap() + (w[1] - w[0]).norm());
        }
        let total = *acc.last().unwrap();
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (v, a) in run.iter().zip(&acc) {
            let t = match v.source {
                Some(i) => samples[i].parameter,
                None => closest.closest(&v.position).0,
            };
            let u = if total > 0.0 { a / total } else { 0.0 };
            if pairs.last().is_none_or(|p| t > p.0 && u >= p.1) {
                pairs.push((t, u));
            }
        }
        stats.push(offset_error_stats(&fitted, curve, spec.error_samples, spec.exec)?);
        pieces.push(OffsetPiece {
            curve_index: index,
            curve: fitted,
            pairs: (pairs.len() >= 2).then_some(pairs),
        });
    }
    if pieces.is_empty() {
        return Err(Error::AllLoop);
    }
    Ok((
        CurveOutput {
            samples,
            raw,
            trimmed,
            stats,
        },
        pieces,
        links,
    ))
}

/// Splits `curve` at interior knots where its tangent direction jumps.
fn smooth_spans(curve: &NurbsCurve3) -> Result<Vec<NurbsCurve3>> {
    let p = curve.degree();
    let knots = curve.knots();
    let (lo, hi) = curve.domain();
    let mut cuts = vec![lo];
    let mut i = p + 1;
    while i < knots.len() - p - 1 {
        let t = knots[i];
        let mult = knots.iter().filter(|&&k| k == t).count();
        if mult >= p {
            let left = curve.sub_curve(*cuts.last().unwrap(), t)?.derivatives(t, 1)?[1];
            let right = curve.derivatives(t, 1)?[1];
            if angle_between(&left, &right) > SMOOTH_EPS {
                cuts.push(t);
            }
        }
        i += mult;
    }
    cuts.push(hi);
    if cuts.len() == 2 {
        return Ok(vec![curve.clone()]);
    }
    cuts.windows(2).map(|w| curve.sub_curve(w[0], w[1])).collect()
}

/// Cuts a pairs table down to the piece parameter range `[a, b]`.
fn restrict_pairs(pairs: &[(f64, f64)], a: f64, b: f64) -> Option<Vec<(f64, f64)>> {
    let t_at = |u: f64| {
        let k = pairs.partition_point(|p| p.1 < u).clamp(1, pairs.len() - 1);
        let (p, q) = (pairs[k - 1], pairs[k]);
        if q.1 > p.1 {
            p.0 + (q.0 - p.0) * ((u - p.1) / (q.1 - p.1)).clamp(0.0, 1.0)
        } else {
            p.0
        }
    };
    let mut out = vec![(t_at(a), a)];
    out.extend(pairs.iter().copied().filter(|p| p.1 > a && p.1 < b));
    out.push((t_at(b), b));
    out.dedup_by(|q, p| q.0 <= p.0 || q.1 <= p.1);
    (out.len() >= 2).then_some(out)
}

fn set_piece_curve(piece: &mut OffsetPiece, curve: NurbsCurve3) {
    let (a, b) = curve.domain();
    piece.pairs = piece.pairs.as_deref().and_then(|p| restrict_pairs(p, a, b));
    piece.curve = curve;
}

fn end_state(curve: &NurbsCurve3, at_end: bool) -> Result<(Point3, Vec3)> {
    let (a, b) = curve.domain();
    let d = curve.derivatives(if at_end { b } else { a }, 1)?;
    Ok((d[0], d[1]))
}

fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

pub fn run_pipeline(spec: &PipelineSpec) -> Result<PipelineOutput> {
    if spec.curves.is_empty() {
        return Err(Error::InvalidParameter("no input curves".into()));
    }
    let mut curves = Vec::new();
    let mut pieces: Vec<OffsetPiece> = Vec::new();
    let mut links: Vec<Link> = Vec::new();
    let mut first_piece = Vec::new();
    for (i, rec) in spec.curves.iter().enumerate() {
        let (out, ps, ls) = offset_curve(i, rec, spec).map_err(|e| e.context(format!("curve {i}")))?;
        let start = pieces.len();
        first_piece.push(start);
        links.extend(ls.into_iter().map(|(l, r, v)| (start + l, start + r, v)));
        pieces.extend(ps);
        curves.push(out);
    }
    let n = spec.curves.len();
    let pairs_between = if spec.joined { n } else { n - 1 };
    for i in 0..pairs_between {
        let next = (i + 1) % n;
        if n == 1 && !spec.joined {
            break;
        }
        let left_curve = &spec.curves[i].curve;
        let right_curve = &spec.curves[next].curve;
        let p = left_curve.evaluate(left_curve.domain().1)?;
        let q = right_curve.evaluate(right_curve.domain().0)?;
        let scale = crate::geom::bbox_diagonal(left_curve.control_points()).max(1.0);
        if (p - q).norm() > 1e-6 * scale {
            return Err(Error::DegenerateJoint(format!("curve {i} does not end where curve {next} starts")));
        }
        let left_last = if next == 0 && i == n - 1 { pieces.len() - 1 } else { first_piece[next] - 1 };
        links.push((left_last, first_piece[next], Some(p)));
    }
    let trim = spec.trim_length();
    let mut joints = Vec::new();
    for (idx, &(l, r, vertex)) in links.iter().enumerate() {
        let label = format!("joint{idx}");
        let result = (|| -> Result<JointReport> {
            let (x0, t0) = end_state(&pieces[l].curve, true)?;
            let (x1, t1) = end_state(&pieces[r].curve, false)?;
            let gap = (x1 - x0).norm();
            let original = match vertex {
                Some(p) => p,
                None => {
                    let c = &spec.curves[pieces[l].curve_index].curve;
                    let t = ClosestPoint::new(c)?.closest(&x0).0;
                    c.evaluate(t)?
                }
            };
            let kind = classify_joint(&t0, &t1, &spec.parting)?;
            let mut record = JointRecord {
                x0,
                t0,
                x1,
                t1,
                vertex: original,
                kind,
            };
            let concave = |pieces: &mut Vec<OffsetPiece>| -> Result<Repair> {
                let result = if l == r {
                    // a closed piece meeting itself: overlap its second half with its first
                    let c = &pieces[l].curve;
                    let (a, b) = c.domain();
                    let mid = 0.5 * (a + b);
                    concave_transition(&c.sub_curve(mid, b)?, &c.sub_curve(a, mid)?, &spec.parting, trim)
                } else {
                    concave_transition(&pieces[l].curve, &pieces[r].curve, &spec.parting, trim)
                };
                match result {
                    Ok(ct) => {
                        if l == r {
                            let kept = pieces[l].curve.sub_curve(ct.trim.1, ct.trim.0)?;
                            set_piece_curve(&mut pieces[l], kept);
                        } else {
                            set_piece_curve(&mut pieces[l], ct.left);
                            set_piece_curve(&mut pieces[r], ct.right);
                        }
                        Ok(Repair::Concave {
                            bridge: ct.bridge,
                            trim: ct.trim,
                        })
                    }
                    Err(Error::NoOverlap) => Ok(Repair::Unrepaired),
                    Err(e) => Err(e),
                }
            };
            let repair = if vertex.is_none() {
                // joints left by loop removal are overlaps
                concave(&mut pieces)?
            } else {
                match kind {
                    JointKind::Smooth if gap <= 1e-9 * (1.0 + spec.distance) => Repair::None,
                    JointKind::Concave => concave(&mut pieces)?,
                    JointKind::Smooth | JointKind::Convex => {
                        let theta = angle_between(&(x0 - original), &(x1 - original));
                        let arc = spec.distance * theta;
                        record.t0 = t0.normalize() * arc;
                        record.t1 = t1.normalize() * arc;
                        let mut cfg = spec.pso.clone();
                        cfg.seed = spec.pso.seed.wrapping_add(idx as u64);
                        cfg.exec = spec.exec;
                        let sol = convex_transition(&record, spec.distance, &cfg, spec.transition_samples)?;
                        Repair::Convex {
                            quartic: sol.curve,
                            iterations: sol.outcome.iterations,
                        }
                    }
                }
            };
            Ok(JointReport {
                label: label.clone(),
                left_piece: l,
                right_piece: r,
                record,
                gap,
                repair,
            })
        })()
        .map_err(|e| e.context(format!("joint {idx} (pieces {l} -> {r})")))?;
        joints.push(result);
    }
    let mesh = match spec.mesh {
        Some(opts) => Some(build_mesh(spec, &pieces, &joints, opts)?),
        None => None,
    };
    Ok(PipelineOutput {
        curves,
        pieces,
        joints,
        mesh,
    })
}

fn build_mesh(spec: &PipelineSpec, pieces: &[OffsetPiece], joints: &[JointReport], opts: MeshOptions) -> Result<RuledMesh> {
    let mut mesh = RuledMesh::default();
    for (i, piece) in pieces.iter().enumerate() {
        let original = &spec.curves[piece.curve_index].curve;
        let (patch, range) = match &piece.pairs {
            Some(pairs) => {
                let (lo, hi) = (pairs[0].0, pairs[pairs.len() - 1].0);
                let (a, b) = piece.curve.domain();
                let norm: Vec<(f64, f64)> =
                    pairs.iter().map(|p| ((p.0 - lo) / (hi - lo), (p.1 - a) / (b - a))).collect();
                (Correspondence::Pairs(norm), (lo, hi))
            }
            None => {
                let cp = ClosestPoint::new(original)?;
                let (a, b) = piece.curve.domain();
                let lo = cp.closest(&piece.curve.evaluate(a)?).0;
                let hi = cp.closest(&piece.curve.evaluate(b)?).0;
                (Correspondence::ChordLength, (lo.min(hi), lo.max(hi)))
            }
        };
        if range.1 - range.0 <= 1e-12 {
            continue;
        }
        let directrix = original.sub_curve(range.0, range.1)?;
        let patch = RuledPatch::new(&directrix, &piece.curve, patch)?;
        mesh.append(&tessellate(&patch, opts.nu, opts.nv, spec.exec)?.rename(&format!("piece{i}")));
    }
    for j in joints {
        let curve = match &j.repair {
            Repair::Convex { quartic, .. } => quartic.to_curve()?,
            Repair::Concave { bridge, .. } => bridge.clone(),
            _ => continue,
        };
        mesh.append(&gap_fan(&j.record.vertex, &curve, opts.fan)?.rename(&format!("fan-{}", j.label)));
    }
    Ok(mesh)
}
