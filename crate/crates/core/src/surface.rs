//! Ruled surfaces `R(u, v) = (1 - v) P(u) + v Q(u)` and their meshes.

use std::fmt::Write as _;

use crate::curve::NurbsCurve3;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geom::Point3;

/// Faces with a smaller area are dropped during tessellation.
pub const MIN_FACE_AREA: f64 = 1e-12;
const TABLE_SAMPLES: usize = 1024;

/// How a shared `u` in `[0, 1]` maps onto the parameters of both curves.
#[derive(Clone, Debug, PartialEq)]
pub enum Correspondence {
    /// Same normalized parameter on both curves.
    SharedParameter,
    /// Same normalized arc length on both curves.
    ChordLength,
    /// Increasing `(u_p, u_q)` pairs of normalized parameters, interpolated linearly.
    Pairs(Vec<(f64, f64)>),
}

/// Monotone map from normalized arc length to curve parameter.
#[derive(Clone, Debug)]
struct ArcTable {
    params: Vec<f64>,
    fractions: Vec<f64>,
}

impl ArcTable {
    fn new(curve: &NurbsCurve3) -> Result<Self> {
        let (params, lengths) = curve.arc_length_table(TABLE_SAMPLES)?;
        let total = *lengths.last().unwrap();
        let fractions = if total > 0.0 {
            lengths.iter().map(|l| l / total).collect()
        } else {
            (0..params.len()).map(|i| i as f64 / (params.len() - 1) as f64).collect()
        };
        Ok(Self { params, fractions })
    }

    fn param(&self, s: f64) -> f64 {
        interpolate(&self.fractions, &self.params, s)
    }
}

/// Piecewise-linear lookup of `x` in increasing `xs`.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return ys[0];
    }
    if i >= xs.len() {
        return ys[ys.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    if x1 <= x0 {
        return ys[i];
    }
    ys[i - 1] + (ys[i] - ys[i - 1]) * (x - x0) / (x1 - x0)
}

#[derive(Clone, Debug)]
pub struct RuledPatch {
    pub directrix: NurbsCurve3,
    pub opposite: NurbsCurve3,
    pub correspondence: Correspondence,
    tables: Option<(ArcTable, ArcTable)>,
}

impl RuledPatch {
    /// Both curves are normalized onto `[0, 1]`.
    pub fn new(directrix: &NurbsCurve3, opposite: &NurbsCurve3, correspondence: Correspondence) -> Result<Self> {
        let directrix = directrix.normalized();
        let opposite = opposite.normalized();
        if let Correspondence::Pairs(pairs) = &correspondence {
            if pairs.len() < 2 || pairs.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                return Err(Error::InvalidParameter("correspondence pairs must increase".into()));
            }
        }
        let tables = match correspondence {
            Correspondence::ChordLength => Some((ArcTable::new(&directrix)?, ArcTable::new(&opposite)?)),
            _ => None,
        };
        Ok(Self {
            directrix,
            opposite,
            correspondence,
            tables,
        })
    }

    /// Parameters on the directrix and the opposite curve for shared `u`.
    pub fn params(&self, u: f64) -> (f64, f64) {
        match (&self.correspondence, &self.tables) {
            (Correspondence::ChordLength, Some((p, q))) => (p.param(u), q.param(u)),
            (Correspondence::Pairs(pairs), _) => {
                let us: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let vs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                (u, interpolate(&us, &vs, u))
            }
            _ => (u, u),
        }
    }

    pub fn ends(&self, u: f64) -> Result<(Point3, Point3)> {
        let (a, b) = self.params(u);
        Ok((self.directrix.evaluate(a)?, self.opposite.evaluate(b)?))
    }
}

fn blend(p: &Point3, q: &Point3, v: f64) -> Point3 {
    p * (1.0 - v) + q * v
}

pub fn ruled_point(patch: &RuledPatch, u: f64, v: f64) -> Result<Point3> {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("(u, v) = ({u}, {v}) outside the unit square")));
    }
    let (p, q) = patch.ends(u)?;
    Ok(match v {
        0.0 => p,
        1.0 => q,
        _ => blend(&p, &q, v),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchTag {
    pub label: String,
    pub first_face: usize,
    pub face_count: usize,
}

/// Polygon mesh of quads and triangles; faces index into `vertices`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuledMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Vec<usize>>,
    pub patches: Vec<PatchTag>,
}

fn polygon_area(pts: &[Point3]) -> f64 {
    let mut acc = Point3::zeros();
    for i in 1..pts.len() - 1 {
        acc += (pts[i] - pts[0]).cross(&(pts[i + 1] - pts[0]));
    }
    0.5 * acc.norm()
}

impl RuledMesh {
    pub fn quad_count(&self) -> usize {
        self.faces.iter().filter(|f| f.len() == 4).count()
    }

    pub fn triangle_count(&self) -> usize {
        self.faces.iter().filter(|f| f.len() == 3).count()
    }

    fn push_face(&mut self, face: Vec<usize>) {
        let pts: Vec<Point3> = face.iter().map(|&i| self.vertices[i]).collect();
        if polygon_area(&pts) > MIN_FACE_AREA {
            self.faces.push(face);
        }
    }

    fn tag(&mut self, label: &str, first_face: usize) {
        self.patches.push(PatchTag {
            label: label.to_string(),
            first_face,
            face_count: self.faces.len() - first_face,
        });
    }

    /// Appends `other`, shifting its indices.
    pub fn append(&mut self, other: &RuledMesh) {
        let shift = self.vertices.len();
        let face_shift = self.faces.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| f.iter().map(|i| i + shift).collect::<Vec<_>>()));
        self.patches.extend(other.patches.iter().map(|t| PatchTag {
            label: t.label.clone(),
            first_face: t.first_face + face_shift,
            face_count: t.face_count,
        }));
    }

    pub fn rename(mut self, label: &str) -> Self {
        for t in &mut self.patches {
            t.label = label.to_string();
        }
        self
    }
}

/// `(nu + 1) x (nv + 1)` grid over the patch with `nu * nv` quads. Vertex `(i, j)` sits at
/// index `i (nv + 1) + j`. Each column blends one evaluation of each curve, so columns are
/// exact straight rulings.
pub fn tessellate(patch: &RuledPatch, nu: usize, nv: usize, exec: Exec) -> Result<RuledMesh> {
    if nu == 0 || nv == 0 {
        return Err(Error::InvalidParameter("tessellation counts must be at least 1".into()));
    }
    let columns = exec.map_range(nu + 1, |i| patch.ends(i as f64 / nu as f64));
    let mut mesh = RuledMesh::default();
    for col in columns {
        let (p, q) = col?;
        for j in 0..=nv {
            mesh.vertices.push(match j {
                0 => p,
                j if j == nv => q,
                _ => blend(&p, &q, j as f64 / nv as f64),
            });
        }
    }
    let row = nv + 1;
    for i in 0..nu {
        for j in 0..nv {
            let a = i * row + j;
            mesh.push_face(vec![a, a + row, a + row + 1, a + 1]);
        }
    }
    mesh.tag("ruled", 0);
    Ok(mesh)
}

/// Triangles from `vertex` to `nu + 1` uniform samples of `transition`.
pub fn gap_fan(vertex: &Point3, transition: &NurbsCurve3, nu: usize) -> Result<RuledMesh> {
    if nu == 0 {
        return Err(Error::InvalidParameter("fan needs at least one triangle".into()));
    }
    let samples = transition.sample_uniform(nu + 1)?;
    let length: f64 = samples.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut mesh = RuledMesh::default();
    if length <= MIN_FACE_AREA {
        return Ok(mesh);
    }
    mesh.vertices.push(*vertex);
    mesh.vertices.extend(samples);
    for i in 1..=nu {
        mesh.push_face(vec![0, i, i + 1]);
    }
    mesh.tag("fan", 0);
    Ok(mesh)
}

/// Nine significant digits, trailing zeros trimmed.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{x:.8e}");
        let (m, e) = s.split_once('e').unwrap();
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        format!("{m}e{e}")
    }
}

/// Wavefront OBJ with `v` and 1-based `f` records; each patch becomes a `g` group.
pub fn mesh_to_obj(mesh: &RuledMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", format_sig9(v.x), format_sig9(v.y), format_sig9(v.z));
    }
    let mut tags = mesh.patches.iter().peekable();
    for (fi, f) in mesh.faces.iter().enumerate() {
        while let Some(t) = tags.peek() {
            if t.first_face == fi && t.face_count > 0 {
                let _ = writeln!(out, "g {}", t.label);
                tags.next();
                break;
            } else if t.first_face <= fi {
                tags.next();
            } else {
                break;
            }
        }
        let idx: Vec<String> = f.iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(out, "f {}", idx.join(" "));
    }
    out
}

/// Polylines as OBJ `v` and `l` records.
pub fn polylines_to_obj(polylines: &[Vec<Point3>]) -> String {
    let mut out = String::new();
    let mut base = 1;
    for line in polylines {
        for v in line {
            let _ = writeln!(out, "v {} {} {}", format_sig9(v.x), format_sig9(v.y), format_sig9(v.z));
        }
        if line.len() >= 2 {
            let idx: Vec<String> = (base..base + line.len()).map(|i| i.to_string()).collect();
            let _ = writeln!(out, "l {}", idx.join(" "));
        }
        base += line.len();
    }
    out
}

/// Reads `v`, `f` and `g` records; other records are ignored.
pub fn mesh_from_obj(text: &str) -> Result<RuledMesh> {
    let mut mesh = RuledMesh::default();
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let mut it = raw.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .map(|s| s.parse::<f64>().map_err(|e| parse_err(line, e.to_string())))
                    .collect::<Result<_>>()?;
                if c.len() < 3 {
                    return Err(parse_err(line, "vertex needs three coordinates".into()));
                }
                mesh.vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let face: Vec<usize> = it
                    .map(|s| {
                        let i: usize = s
                            .split('/')
                            .next()
                            .unwrap_or("")
                            .parse()
                            .map_err(|_| parse_err(line, format!("bad index {s}")))?;
                        if i == 0 || i > mesh.vertices.len() {
                            return Err(parse_err(line, format!("index {i} out of range")));
                        }
                        Ok(i - 1)
                    })
                    .collect::<Result<_>>()?;
                if face.len() < 3 {
                    return Err(parse_err(line, "face needs three vertices".into()));
                }
                mesh.faces.push(face);
                if let Some(t) = mesh.patches.last_mut() {
                    if t.first_face + t.face_count == mesh.faces.len() - 1 {
                        t.face_count += 1;
                    }
                }
            }
            Some("g") => {
                let label = it.collect::<Vec<_>>().join(" ");
                mesh.patches.push(PatchTag {
                    label,
                    first_face: mesh.faces.len(),
                    face_count: 0,
                });
            }
            _ => {}
        }
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    fn lines(length: f64) -> RuledPatch {
        let p = NurbsCurve3::line(v(0.0, 0.0, 0.0), v(length, 0.0, 0.0)).unwrap();
        let q = NurbsCurve3::line(v(0.0, 1.0, 0.0), v(length, 1.0, 0.0)).unwrap();
        RuledPatch::new(&p, &q, Correspondence::SharedParameter).unwrap()
    }

    #[test]
    fn parallel_lines_blend() {
        let patch = lines(5.0);
        assert_eq!(ruled_point(&patch, 0.3, 0.5).unwrap(), v(1.5, 0.5, 0.0));
        assert_eq!(ruled_point(&patch, 0.3, 0.0).unwrap(), v(1.5, 0.0, 0.0));
        assert_eq!(ruled_point(&patch, 0.3, 1.0).unwrap(), v(1.5, 1.0, 0.0));
        assert!(ruled_point(&patch, 1.5, 0.0).is_err());
    }

    #[test]
    fn grid_counts() {
        let patch = lines(5.0);
        let m = tessellate(&patch, 10, 2, Exec::Sequential).unwrap();
        assert_eq!((m.vertices.len(), m.quad_count()), (33, 20));
        let m = tessellate(&patch, 1, 1, Exec::Sequential).unwrap();
        assert_eq!((m.vertices.len(), m.quad_count()), (4, 1));
    }

    #[test]
    fn fan_counts() {
        let arc = NurbsCurve3::bezier(
            vec![v(1.0, 0.0, 0.0), v(1.0, 1.0, 0.0), v(0.0, 1.0, 0.0)],
            vec![1.0, std::f64::consts::FRAC_1_SQRT_2, 1.0],
        )
        .unwrap();
        let fan = gap_fan(&v(0.0, 0.0, 0.0), &arc, 4).unwrap();
        assert_eq!(fan.triangle_count(), 4);
        assert!(fan.faces.iter().all(|f| f[0] == 0));
        assert!(fan.vertices[1..].iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
        assert_eq!(gap_fan(&v(0.0, 0.0, 0.0), &arc, 1).unwrap().triangle_count(), 1);
    }

    #[test]
    fn chord_length_correspondence_matches_lengths() {
        // uneven parameterization on the directrix
        let p = NurbsCurve3::polynomial_bezier(vec![v(0.0, 0.0, 0.0), v(0.1, 0.0, 0.0), v(4.0, 0.0, 0.0)]).unwrap();
        let q = NurbsCurve3::line(v(0.0, 1.0, 0.0), v(4.0, 1.0, 0.0)).unwrap();
        let patch = RuledPatch::new(&p, &q, Correspondence::ChordLength).unwrap();
        let (a, b) = patch.ends(0.5).unwrap();
        assert!((a.x - 2.0).abs() < 1e-3);
        assert!((b.x - 2.0).abs() < 1e-3);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.5), "1.5");
        assert_eq!(format_sig9(123.456789012), "123.456789");
        assert_eq!(format_sig9(-0.000123456789012), "-0.000123456789");
        assert_eq!(format_sig9(1.0e12), "1e12");
    }

    #[test]
    fn obj_round_trip() {
        let m = tessellate(&lines(2.0), 3, 2, Exec::Sequential).unwrap();
        let text = mesh_to_obj(&m);
        assert!(text.ends_with('\n') && !text.contains('\r'));
        let back = mesh_from_obj(&text).unwrap();
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.vertices.len(), m.vertices.len());
        assert_eq!(back.patches, m.patches);
    }
}
