//! Invalid loop removal on the projection along the parting direction.
//!
//! Offset points whose projections cross are overlaps even when the 3D polyline does not
//! self-intersect. The raw polyline is projected onto a plane perpendicular to `k` and scanned
//! forward: the first segment `(i-1, i)` that meets a later, non-adjacent segment `(j, j+1)`
//! bounds an invalid loop. Vertices `i..=j` are dropped and replaced by the two 3D points
//! lying over the crossing, one on each segment. Those two points project to the same 2D
//! point, so the edge joining them has zero projected length; such edges are the joints
//! handed to the transition stage.

use crate::error::{Error, Result};
use crate::geom::{bbox_diagonal, lerp3, Point3, Vec2, Vec3};
use crate::offset::RawOffsetPolyline;

/// Relative tolerance for projected intersections, scaled by the projected bounding-box diagonal.
pub const INTERSECTION_EPS: f64 = 1e-9;

/// Orthonormal frame of the plane perpendicular to `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionBasis {
    pub k: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl ProjectionBasis {
    /// For `k = +z` the frame is `(x, y)`.
    pub fn new(k: Vec3) -> Self {
        let k = k.normalize();
        let seed = if k.x.abs() > 0.9 { Vec3::y() } else { Vec3::x() };
        let e1 = (seed - k * seed.dot(&k)).normalize();
        let e2 = k.cross(&e1);
        Self { k, e1, e2 }
    }

    pub fn project(&self, p: &Point3) -> Vec2 {
        Vec2::new(p.dot(&self.e1), p.dot(&self.e2))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedPolyline {
    pub points: Vec<Vec2>,
    /// Index of the 3D vertex each projected point came from.
    pub source: Vec<usize>,
}

pub fn project(points: &[Point3], k: Vec3) -> ProjectedPolyline {
    let basis = ProjectionBasis::new(k);
    ProjectedPolyline {
        points: points.iter().map(|p| basis.project(p)).collect(),
        source: (0..points.len()).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentHit {
    Disjoint,
    /// Meeting point with parameters `s` on the first segment and `t` on the second.
    Crossing { point: Vec2, s: f64, t: f64 },
    /// Parallel segments sharing a stretch of positive length. `s`, `t` locate the shared
    /// point that comes first along the first segment.
    CollinearOverlap { s: f64, t: f64 },
}

fn cross2(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Intersection of segments `a1-a2` and `b1-b2`; `eps` is an absolute distance tolerance.
pub fn segment_intersect_2d(a1: &Vec2, a2: &Vec2, b1: &Vec2, b2: &Vec2, eps: f64) -> SegmentHit {
    let r = a2 - a1;
    let q = b2 - b1;
    let (rl, ql) = (r.norm(), q.norm());
    if rl <= eps || ql <= eps {
        return SegmentHit::Disjoint;
    }
    let w = b1 - a1;
    let denom = cross2(&r, &q);
    if denom.abs() <= 1e-12 * rl * ql {
        // parallel: collinear when b1 lies on the line of a
        if cross2(&w, &r).abs() / rl > eps {
            return SegmentHit::Disjoint;
        }
        let rr = rl * rl;
        let tb1 = w.dot(&r) / rr;
        let tb2 = (b2 - a1).dot(&r) / rr;
        let (lo, hi) = (tb1.min(tb2).max(0.0), tb1.max(tb2).min(1.0));
        if (hi - lo) * rl <= eps {
            if (hi - lo) * rl >= -eps {
                // touching at a single point
                let s = lo.clamp(0.0, 1.0);
                let p = a1 + r * s;
                let t = ((p - b1).dot(&q) / (ql * ql)).clamp(0.0, 1.0);
                return SegmentHit::Crossing { point: p, s, t };
            }
            return SegmentHit::Disjoint;
        }
        let p = a1 + r * lo;
        let t = ((p - b1).dot(&q) / (ql * ql)).clamp(0.0, 1.0);
        return SegmentHit::CollinearOverlap { s: lo, t };
    }
    let s = cross2(&w, &q) / denom;
    let t = cross2(&w, &r) / denom;
    let (ts, tt) = (eps / rl, eps / ql);
    if s < -ts || s > 1.0 + ts || t < -tt || t > 1.0 + tt {
        return SegmentHit::Disjoint;
    }
    let s = s.clamp(0.0, 1.0);
    let t = t.clamp(0.0, 1.0);
    SegmentHit::Crossing {
        point: a1 + r * s,
        s,
        t,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainVertex {
    pub position: Point3,
    /// Index in the input polyline; `None` for points inserted over a crossing.
    pub source: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub vertices: Vec<ChainVertex>,
}

impl Chain {
    pub fn points(&self) -> Vec<Point3> {
        self.vertices.iter().map(|v| v.position).collect()
    }
}

/// Discontinuity between the end of chain `left` and the start of chain `right`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopJoint {
    pub left: usize,
    pub right: usize,
    pub left_point: Point3,
    pub right_point: Point3,
    /// Both sides coincide in 3D (a true intersection rather than an overlap).
    pub welded: bool,
}

impl LoopJoint {
    pub fn gap(&self) -> f64 {
        (self.right_point - self.left_point).norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrimmedChains {
    pub chains: Vec<Chain>,
    pub joints: Vec<LoopJoint>,
    /// The input was closed and no joint split it: the single chain wraps around.
    pub closed: bool,
    pub eliminated_loops: usize,
    pub removed_vertices: usize,
}

impl TrimmedChains {
    /// Chains concatenated back into one polyline (joint edges included).
    pub fn to_points(&self) -> Vec<Point3> {
        self.chains.iter().flat_map(|c| c.points()).collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Vertex {
    p: Point3,
    q: Vec2,
    source: Option<usize>,
}

struct Scan {
    verts: Vec<Vertex>,
    closed: bool,
    eps: f64,
}

impl Scan {
    fn edge_count(&self) -> usize {
        if self.closed {
            self.verts.len()
        } else {
            self.verts.len().saturating_sub(1)
        }
    }

    fn edge(&self, i: usize) -> (usize, usize) {
        (i, (i + 1) % self.verts.len())
    }

    fn is_gap(&self, i: usize) -> bool {
        let (a, b) = self.edge(i);
        (self.verts[b].q - self.verts[a].q).norm() <= self.eps
    }

    /// Edge indices with positive projected length, in order.
    fn effective_edges(&self) -> Vec<usize> {
        (0..self.edge_count()).filter(|&i| !self.is_gap(i)).collect()
    }

    /// First crossing pair `(edge_a, edge_b, s, t)` in forward scan order.
    fn first_crossing(&self) -> Option<(usize, usize, f64, f64)> {
        let edges = self.effective_edges();
        let m = edges.len();
        for ai in 0..m {
            let (a0, a1) = self.edge(edges[ai]);
            for bi in ai + 2..m {
                if self.closed && ai == 0 && bi == m - 1 {
                    continue;
                }
                let (b0, b1) = self.edge(edges[bi]);
                let hit = segment_intersect_2d(
                    &self.verts[a0].q,
                    &self.verts[a1].q,
                    &self.verts[b0].q,
                    &self.verts[b1].q,
                    self.eps,
                );
                match hit {
                    SegmentHit::Disjoint => {}
                    SegmentHit::Crossing { s, t, .. } | SegmentHit::CollinearOverlap { s, t } => {
                        return Some((edges[ai], edges[bi], s, t));
                    }
                }
            }
        }
        None
    }

    fn split_point(&self, edge: usize, s: f64, at: Vec2) -> Vertex {
        let (a, b) = self.edge(edge);
        Vertex {
            p: lerp3(&self.verts[a].p, &self.verts[b].p, s),
            q: at,
            source: None,
        }
    }

    /// Removes one loop; returns the number of original vertices dropped.
    fn eliminate(&mut self, ea: usize, eb: usize, s: f64, t: f64, weld_tol: f64) -> usize {
        let (a0, a1) = self.edge(ea);
        let at = self.verts[a0].q + (self.verts[a1].q - self.verts[a0].q) * s;
        let pic = self.split_point(ea, s, at);
        let mut pjc = self.split_point(eb, t, at);
        if (pjc.p - pic.p).norm() <= weld_tol {
            pjc.p = pic.p;
        }
        let n = self.verts.len();
        let i = ea + 1;
        let j = eb;
        // vertices i..=j form the inner loop; the rest the outer one
        let inner: Vec<Vertex> = self.verts[i..=j].to_vec();
        let remove_inner = if self.closed {
            let outer: Vec<Vertex> = self.verts[j + 1..].iter().chain(&self.verts[..i]).cloned().collect();
            let ai = loop_area(at, &inner);
            let ao = loop_area(at, &outer);
            if (ai - ao).abs() > self.eps * self.eps {
                ai < ao
            } else {
                inner.len() <= outer.len()
            }
        } else {
            true
        };
        if remove_inner {
            let mut verts = Vec::with_capacity(n - inner.len() + 2);
            verts.extend_from_slice(&self.verts[..i]);
            verts.push(pic);
            verts.push(pjc);
            verts.extend_from_slice(&self.verts[j + 1..]);
            self.verts = verts;
            inner.len()
        } else {
            let mut verts = Vec::with_capacity(inner.len() + 2);
            verts.push(pic);
            verts.extend(inner);
            verts.push(pjc);
            let removed = n - (verts.len() - 2);
            self.verts = verts;
            removed
        }
    }
}

/// Unsigned area of the polygon `[start, loop_pts...]`.
fn loop_area(start: Vec2, loop_pts: &[Vertex]) -> f64 {
    let mut pts = vec![start];
    pts.extend(loop_pts.iter().map(|v| v.q));
    let mut a = 0.0;
    for w in 0..pts.len() {
        let p = pts[w];
        let q = pts[(w + 1) % pts.len()];
        a += cross2(&p, &q);
    }
    0.5 * a.abs()
}

/// Loop removal on a bare point list. Zero-length projected edges in the input are treated
/// as existing joints, so the output fed back in comes out unchanged.
pub fn eliminate_loops_points(points: &[Point3], closed: bool, k: Vec3) -> Result<TrimmedChains> {
    let sources: Vec<Option<usize>> = (0..points.len()).map(Some).collect();
    eliminate_inner(points, &sources, closed, k)
}

pub fn eliminate_loops(polyline: &RawOffsetPolyline, k: Vec3) -> Result<TrimmedChains> {
    eliminate_loops_points(&polyline.points(), polyline.closed, k)
}

fn eliminate_inner(
    points: &[Point3],
    sources: &[Option<usize>],
    closed: bool,
    k: Vec3,
) -> Result<TrimmedChains> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput("polyline needs two points".into()));
    }
    let basis = ProjectionBasis::new(k);
    let projected: Vec<Vec2> = points.iter().map(|p| basis.project(p)).collect();
    let diag = {
        let lifted: Vec<Point3> = projected.iter().map(|q| Point3::new(q.x, q.y, 0.0)).collect();
        bbox_diagonal(&lifted)
    };
    let eps = INTERSECTION_EPS * diag.max(f64::MIN_POSITIVE);
    let weld_tol = INTERSECTION_EPS * bbox_diagonal(points).max(f64::MIN_POSITIVE);
    let mut scan = Scan {
        verts: points
            .iter()
            .zip(&projected)
            .zip(sources)
            .map(|((p, q), s)| Vertex {
                p: *p,
                q: *q,
                source: *s,
            })
            .collect(),
        closed,
        eps,
    };
    let mut loops = 0;
    let mut removed = 0;
    while let Some((ea, eb, s, t)) = scan.first_crossing() {
        removed += scan.eliminate(ea, eb, s, t, weld_tol);
        loops += 1;
        if scan.effective_edges().is_empty() {
            return Err(Error::AllLoop);
        }
    }
    Ok(split_chains(&scan, loops, removed, weld_tol))
}

fn split_chains(scan: &Scan, loops: usize, removed: usize, weld_tol: f64) -> TrimmedChains {
    let n = scan.verts.len();
    let gaps: Vec<usize> = (0..scan.edge_count()).filter(|&i| scan.is_gap(i)).collect();
    let to_cv = |v: &Vertex| ChainVertex {
        position: v.p,
        source: v.source,
    };
    let mut chains = Vec::new();
    let mut joints = Vec::new();
    if gaps.is_empty() {
        chains.push(Chain {
            vertices: scan.verts.iter().map(to_cv).collect(),
        });
        return TrimmedChains {
            chains,
            joints,
            closed: scan.closed,
            eliminated_loops: loops,
            removed_vertices: removed,
        };
    }
    // for closed input start right after the last gap, so every chain is contiguous and a
    // second pass over the output keeps the same chain order
    let start = if scan.closed { (gaps[gaps.len() - 1] + 1) % n } else { 0 };
    let order: Vec<usize> = (0..n).map(|i| (start + i) % n).collect();
    let mut current = vec![to_cv(&scan.verts[order[0]])];
    for w in 0..n - 1 {
        let from = order[w];
        let to = order[w + 1];
        if scan.is_gap(from) {
            chains.push(Chain {
                vertices: std::mem::take(&mut current),
            });
        }
        current.push(to_cv(&scan.verts[to]));
    }
    chains.push(Chain { vertices: current });
    let count = chains.len();
    let mut link = |l: usize, r: usize| {
        let lp = chains[l].vertices.last().unwrap().position;
        let rp = chains[r].vertices[0].position;
        joints.push(LoopJoint {
            left: l,
            right: r,
            left_point: lp,
            right_point: rp,
            welded: (rp - lp).norm() <= weld_tol,
        });
    };
    for c in 0..count - 1 {
        link(c, c + 1);
    }
    if scan.closed {
        link(count - 1, 0);
    }
    TrimmedChains {
        chains,
        joints,
        closed: false,
        eliminated_loops: loops,
        removed_vertices: removed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn p2(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn projection_frames() {
        let b = ProjectionBasis::new(v(0.0, 0.0, 1.0));
        assert_eq!(b.project(&v(3.0, 4.0, 7.0)), p2(3.0, 4.0));
        let b = ProjectionBasis::new(v(1.0, 0.0, 0.0));
        let q = b.project(&v(3.0, 4.0, 7.0));
        assert_eq!((q.x.abs(), q.y.abs()), (4.0, 7.0));
    }

    #[test]
    fn helix_projects_to_circle() {
        let pts: Vec<Point3> = (0..50)
            .map(|i| {
                let a = i as f64 * 0.3;
                v(2.0 * a.cos(), 2.0 * a.sin(), 0.5 * a)
            })
            .collect();
        let proj = project(&pts, v(0.0, 0.0, 1.0));
        assert!(proj.points.iter().all(|q| (q.norm() - 2.0).abs() < 1e-12));
        assert_eq!(proj.source, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn segment_cases() {
        let e = 1e-12;
        match segment_intersect_2d(&p2(0.0, 0.0), &p2(2.0, 0.0), &p2(1.0, -1.0), &p2(1.0, 1.0), e) {
            SegmentHit::Crossing { point, s, t } => {
                assert_eq!(point, p2(1.0, 0.0));
                assert_eq!((s, t), (0.5, 0.5));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            segment_intersect_2d(&p2(0.0, 0.0), &p2(1.0, 0.0), &p2(0.0, 1.0), &p2(1.0, 1.0), e),
            SegmentHit::Disjoint
        );
        assert!(matches!(
            segment_intersect_2d(&p2(0.0, 0.0), &p2(2.0, 0.0), &p2(1.0, 0.0), &p2(3.0, 0.0), e),
            SegmentHit::CollinearOverlap { .. }
        ));
    }

    #[test]
    fn simple_polyline_untouched() {
        let pts = vec![v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 1.0, 0.0), v(2.0, 3.0, 0.0)];
        let out = eliminate_loops_points(&pts, false, v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(out.chains.len(), 1);
        assert!(out.joints.is_empty());
        assert_eq!(out.to_points(), pts);
    }

    #[test]
    fn five_vertex_example() {
        let pts = vec![
            v(0.0, 0.0, 0.0),
            v(4.0, 0.0, 0.0),
            v(4.0, 2.0, 0.0),
            v(2.0, 2.0, 0.0),
            v(2.0, -1.0, 0.0),
        ];
        let out = eliminate_loops_points(&pts, false, v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(out.chains.len(), 2);
        assert_eq!(out.chains[0].points(), vec![v(0.0, 0.0, 0.0), v(2.0, 0.0, 0.0)]);
        assert_eq!(out.chains[1].points(), vec![v(2.0, 0.0, 0.0), v(2.0, -1.0, 0.0)]);
        assert_eq!(out.joints.len(), 1);
        assert!(out.joints[0].welded);
        assert_eq!(out.removed_vertices, 3);
        assert_eq!(out.eliminated_loops, 1);
        let src: Vec<_> = out.chains.iter().flat_map(|c| c.vertices.iter().map(|v| v.source)).collect();
        assert_eq!(src, vec![Some(0), None, None, Some(4)]);
    }

    #[test]
    fn lifted_example_keeps_gap() {
        let pts = vec![
            v(0.0, 0.0, 0.0),
            v(4.0, 0.0, 1.0),
            v(4.0, 2.0, 2.0),
            v(2.0, 2.0, 3.0),
            v(2.0, -1.0, 4.0),
        ];
        let out = eliminate_loops_points(&pts, false, v(0.0, 0.0, 1.0)).unwrap();
        let j = out.joints[0];
        // s = 0.5 on the first segment, t = 2/3 on the last
        assert!((j.left_point - v(2.0, 0.0, 0.5)).norm() < 1e-12);
        assert!((j.right_point - v(2.0, 0.0, 3.0 + 2.0 / 3.0)).norm() < 1e-12);
        assert!(!j.welded);
        assert!((j.gap() - (3.0 + 2.0 / 3.0 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn output_is_fixed_point() {
        let pts = vec![
            v(0.0, 0.0, 0.0),
            v(4.0, 0.0, 1.0),
            v(4.0, 2.0, 2.0),
            v(2.0, 2.0, 3.0),
            v(2.0, -1.0, 4.0),
        ];
        let k = v(0.0, 0.0, 1.0);
        let once = eliminate_loops_points(&pts, false, k).unwrap();
        let twice = eliminate_loops_points(&once.to_points(), false, k).unwrap();
        assert_eq!(once.chains.iter().map(|c| c.points()).collect::<Vec<_>>(), twice.chains.iter().map(|c| c.points()).collect::<Vec<_>>());
        assert_eq!(twice.eliminated_loops, 0);
    }

    #[test]
    fn closed_square_with_swallowtail() {
        // square with a small loop at one corner
        let pts = vec![
            v(0.0, 0.0, 0.0),
            v(10.0, 0.0, 0.0),
            v(11.0, 1.0, 0.0),
            v(11.0, -1.0, 0.0),
            v(10.0, 0.5, 0.0),
            v(10.0, 10.0, 0.0),
            v(0.0, 10.0, 0.0),
        ];
        let out = eliminate_loops_points(&pts, true, v(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(out.eliminated_loops, 1);
        let all: Vec<Point3> = out.to_points();
        // the tail tip is cut off at the crossing (10.2, 0.2)
        assert!(all.iter().all(|p| p.x <= 10.2 + 1e-12));
        assert!(all.iter().any(|p| (p - v(10.2, 0.2, 0.0)).norm() < 1e-12));
        assert!(all.contains(&v(0.0, 10.0, 0.0)));
    }
}
