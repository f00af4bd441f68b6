//! Text formats: curve files, point CSV and SVG plots.
//!
//! Curve file:
//!
//! ```text
//! curve3 degree=3 closed=0
//! knots: 0 0 0 0 1 1 1 1
//! cp: 200 200 200 1
//! cp: 300 500 300 1
//! cp: 400 600 500 1
//! cp: 600 200 600 1
//! ```
//!
//! Several records may follow each other in one file. Blank lines and `#` comments are
//! ignored. Numbers are written in shortest round-trip form.

use std::fmt::Write as _;

use crate::curve::NurbsCurve3;
use crate::error::{Error, Result};
use crate::geom::{bbox_diagonal, Point3, Vec2};

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRecord {
    pub curve: NurbsCurve3,
    pub closed: bool,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_numbers(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|s| {
            let v: f64 = s.parse().map_err(|_| perr(line, format!("bad number {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(perr(line, format!("non-finite number {s:?}")))
            }
        })
        .collect()
}

struct Pending {
    line: usize,
    degree: usize,
    closed: bool,
    knots: Option<Vec<f64>>,
    points: Vec<Point3>,
    weights: Vec<f64>,
}

impl Pending {
    fn finish(self) -> Result<CurveRecord> {
        let knots = self.knots.ok_or_else(|| perr(self.line, "missing knots line"))?;
        let curve = NurbsCurve3::new(self.degree, knots, self.points, self.weights)
            .map_err(|e| perr(self.line, e.to_string()))?;
        if self.closed {
            let (a, b) = curve.domain();
            let p = curve.evaluate(a)?;
            let q = curve.evaluate(b)?;
            let tol = 1e-9 * bbox_diagonal(curve.control_points()).max(1.0);
            if (p - q).norm() > tol {
                return Err(perr(self.line, "closed curve does not end where it starts"));
            }
        }
        Ok(CurveRecord {
            curve,
            closed: self.closed,
        })
    }
}

fn parse_header(line: usize, rest: &str) -> Result<Pending> {
    let mut degree = None;
    let mut closed = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| perr(line, format!("expected key=value, got {field:?}")))?;
        match key {
            "degree" => {
                degree = Some(value.parse::<usize>().map_err(|_| perr(line, format!("bad degree {value:?}")))?)
            }
            "closed" => {
                closed = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(perr(line, format!("closed must be 0 or 1, got {value:?}"))),
                })
            }
            _ => return Err(perr(line, format!("unknown header field {key:?}"))),
        }
    }
    Ok(Pending {
        line,
        degree: degree.ok_or_else(|| perr(line, "header lacks degree"))?,
        closed: closed.unwrap_or(false),
        knots: None,
        points: Vec::new(),
        weights: Vec::new(),
    })
}

/// All curve records in `text`.
pub fn parse_curves(text: &str) -> Result<Vec<CurveRecord>> {
    let mut out = Vec::new();
    let mut current: Option<Pending> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix("curve3") {
            if let Some(p) = current.take() {
                out.push(p.finish()?);
            }
            current = Some(parse_header(line, rest)?);
            continue;
        }
        let pending = current
            .as_mut()
            .ok_or_else(|| perr(line, "expected a curve3 header"))?;
        if let Some(rest) = body.strip_prefix("knots:") {
            if pending.knots.is_some() {
                return Err(perr(line, "duplicate knots line"));
            }
            pending.knots = Some(parse_numbers(line, rest)?);
        } else if let Some(rest) = body.strip_prefix("cp:") {
            let v = parse_numbers(line, rest)?;
            match v.as_slice() {
                [x, y, z] => {
                    pending.points.push(Point3::new(*x, *y, *z));
                    pending.weights.push(1.0);
                }
                [x, y, z, w] => {
                    pending.points.push(Point3::new(*x, *y, *z));
                    pending.weights.push(*w);
                }
                _ => return Err(perr(line, "control point needs x y z [w]")),
            }
        } else {
            return Err(perr(line, format!("unrecognized line {body:?}")));
        }
    }
    if let Some(p) = current.take() {
        out.push(p.finish()?);
    }
    if out.is_empty() {
        return Err(perr(0, "no curve records"));
    }
    Ok(out)
}

pub fn parse_curve(text: &str) -> Result<CurveRecord> {
    let mut all = parse_curves(text)?;
    if all.len() != 1 {
        return Err(perr(0, format!("expected one curve, found {}", all.len())));
    }
    Ok(all.remove(0))
}

pub fn serialize_curve(record: &CurveRecord) -> String {
    let c = &record.curve;
    let mut out = format!("curve3 degree={} closed={}\nknots:", c.degree(), u8::from(record.closed));
    for k in c.knots() {
        let _ = write!(out, " {k}");
    }
    out.push('\n');
    for (p, w) in c.control_points().iter().zip(c.weights()) {
        let _ = writeln!(out, "cp: {} {} {} {}", p.x, p.y, p.z, w);
    }
    out
}

pub fn serialize_curves(records: &[CurveRecord]) -> String {
    records.iter().map(serialize_curve).collect()
}

/// `x,y,z` rows with a header.
pub fn points_to_csv(points: &[Point3]) -> String {
    let mut out = String::from("x,y,z\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.x, p.y, p.z);
    }
    out
}

/// Reads `x,y,z` rows; a non-numeric first line is taken as a header.
pub fn points_from_csv(text: &str) -> Result<Vec<Point3>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let body = raw.trim();
        if body.is_empty() {
            continue;
        }
        let cells: Vec<&str> = body.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => out.push(Point3::new(v[0], v[1], v[2])),
            Ok(_) => return Err(perr(n + 1, "expected three columns")),
            Err(_) if n == 0 => continue,
            Err(_) => return Err(perr(n + 1, format!("bad row {body:?}"))),
        }
    }
    Ok(out)
}

/// Reads the second column of `iteration,value` rows.
pub fn history_from_csv(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let body = raw.trim();
        if body.is_empty() {
            continue;
        }
        let cells: Vec<&str> = body.split(',').collect();
        match cells.get(1).map(|c| c.trim().parse::<f64>()) {
            Some(Ok(v)) => out.push(v),
            _ if n == 0 => continue,
            _ => return Err(perr(n + 1, format!("bad row {body:?}"))),
        }
    }
    Ok(out)
}

/// Drawing primitives for [`render_svg`].
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Polyline { points: Vec<Vec2>, color: String },
    Marker { at: Vec2, color: String },
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const SVG_MARGIN: f64 = 40.0;

/// Fixed 800x600 canvas, equal axis scaling unless `stretch` is set, axes through the data
/// origin when visible or along the lower-left edges otherwise.
pub fn render_svg(title: &str, shapes: &[Shape], stretch: bool) -> String {
    let pts: Vec<Vec2> = shapes
        .iter()
        .flat_map(|s| match s {
            Shape::Polyline { points, .. } => points.clone(),
            Shape::Marker { at, .. } => vec![*at],
        })
        .collect();
    let (mut lo, mut hi) = match pts.first() {
        Some(p) => (*p, *p),
        None => (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0)),
    };
    for p in &pts {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    for i in 0..2 {
        if hi[i] - lo[i] <= 0.0 {
            lo[i] -= 1.0;
            hi[i] += 1.0;
        }
    }
    let (w, h) = (SVG_W - 2.0 * SVG_MARGIN, SVG_H - 2.0 * SVG_MARGIN);
    let (mut sx, mut sy) = (w / (hi.x - lo.x), h / (hi.y - lo.y));
    if !stretch {
        let s = sx.min(sy);
        sx = s;
        sy = s;
    }
    let map = |p: &Vec2| (SVG_MARGIN + (p.x - lo.x) * sx, SVG_H - SVG_MARGIN - (p.y - lo.y) * sy);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">"
    );
    let _ = writeln!(out, "<title>{}</title>", xml_escape(title));
    let _ = writeln!(out, "<rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>");
    let ax = if lo.x <= 0.0 && 0.0 <= hi.x { 0.0 } else { lo.x };
    let ay = if lo.y <= 0.0 && 0.0 <= hi.y { 0.0 } else { lo.y };
    let (x0, yax) = map(&Vec2::new(lo.x, ay));
    let (x1, _) = map(&Vec2::new(hi.x, ay));
    let (xax, y0) = map(&Vec2::new(ax, lo.y));
    let (_, y1) = map(&Vec2::new(ax, hi.y));
    let _ = writeln!(
        out,
        "<g id=\"axes\" stroke=\"#888\" stroke-width=\"1\"><line x1=\"{x0:.2}\" y1=\"{yax:.2}\" x2=\"{x1:.2}\" y2=\"{yax:.2}\"/><line x1=\"{xax:.2}\" y1=\"{y0:.2}\" x2=\"{xax:.2}\" y2=\"{y1:.2}\"/></g>"
    );
    for s in shapes {
        match s {
            Shape::Polyline { points, color } if points.len() >= 2 => {
                let coords: Vec<String> = points
                    .iter()
                    .map(|p| {
                        let (x, y) = map(p);
                        format!("{x:.2},{y:.2}")
                    })
                    .collect();
                let _ = writeln!(
                    out,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                    coords.join(" ")
                );
            }
            Shape::Polyline { .. } => {}
            Shape::Marker { at, color } => {
                let (x, y) = map(at);
                let _ = writeln!(
                    out,
                    "<circle class=\"marker\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"none\" stroke=\"{color}\" data-x=\"{}\" data-y=\"{}\"/>",
                    at.x, at.y
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
