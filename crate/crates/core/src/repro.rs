//! Built-in reference cases: the cubic subdivision comparison and the convex transition.

use std::fmt::Write as _;

use crate::curve::NurbsCurve3;
use crate::error::Result;
use crate::exec::Exec;
use crate::geom::{chord_lengths, sample_sd, Point3, Vec3};
use crate::offset::{offset_distances, offset_end_condition, raw_offset, fit_points, OffsetRule};
use crate::optimizer::PsoConfig;
use crate::subdivide::{plan_curve, sample_at, SubdivisionMode};
use crate::transition::{convex_transition, ConvexSolution, JointKind, JointRecord, DEFAULT_SAMPLES};
use crate::geom::mean_max_sd;

pub const TABLE1_EPSILON: f64 = 1.0;
pub const TABLE1_DISTANCE: f64 = 400.0;
pub const TABLE1_SAMPLES: usize = 500;

/// Offsetting towards `-z` moves the cubic outward, away from its centre of curvature.
pub fn table1_direction() -> Vec3 {
    Vec3::new(0.0, 0.0, -1.0)
}

pub fn reference_cubic() -> NurbsCurve3 {
    NurbsCurve3::polynomial_bezier(vec![
        Point3::new(200.0, 200.0, 200.0),
        Point3::new(300.0, 500.0, 300.0),
        Point3::new(400.0, 600.0, 500.0),
        Point3::new(600.0, 200.0, 600.0),
    ])
    .expect("valid cubic")
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub max: f64,
    pub sd: f64,
}

/// Chord statistics use the sample standard deviation (n - 1).
pub fn chord_stats(points: &[Point3]) -> Stats {
    let lengths = chord_lengths(points);
    let (mean, max, _) = mean_max_sd(&lengths);
    Stats {
        mean,
        max,
        sd: sample_sd(&lengths),
    }
}

#[derive(Clone, Debug)]
pub struct ModeReport {
    pub mode: SubdivisionMode,
    pub points: usize,
    pub added: usize,
    pub before: Stats,
    pub after: Stats,
    /// Distance from the fitted offset curve back to the original.
    pub interpolation: Stats,
    pub offset_curve: NurbsCurve3,
}

#[derive(Clone, Debug)]
pub struct Table1Report {
    pub traditional: ModeReport,
    pub improved: ModeReport,
}

impl Table1Report {
    /// Relative drop of the interpolation SD from traditional to improved, in percent.
    pub fn reduction_percent(&self) -> f64 {
        100.0 * (1.0 - self.improved.interpolation.sd / self.traditional.interpolation.sd)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,row,mean,max,sd\n");
        for r in [&self.traditional, &self.improved] {
            let mode = match r.mode {
                SubdivisionMode::Traditional => "traditional",
                SubdivisionMode::Improved => "improved",
            };
            for (row, s) in [("before_offset", r.before), ("after_offset", r.after), ("interpolation", r.interpolation)] {
                let _ = writeln!(out, "{mode},{row},{:.6},{:.6},{:.6e}", s.mean, s.max, s.sd);
            }
            let _ = writeln!(out, "{mode},points,{},{},", r.points, r.added);
        }
        let _ = writeln!(out, "reduction,sd_percent,{:.3},,", self.reduction_percent());
        out
    }
}

pub fn table1_mode(mode: SubdivisionMode, exec: Exec) -> Result<ModeReport> {
    let curve = reference_cubic();
    let k = table1_direction();
    let plan = plan_curve(&curve, TABLE1_EPSILON, TABLE1_DISTANCE, mode)?;
    let samples = plan
        .refined_params
        .iter()
        .map(|&t| sample_at(&curve, t))
        .collect::<Result<Vec<_>>>()?;
    let raw = raw_offset(&samples, &OffsetRule::constant(k, TABLE1_DISTANCE)?)?;
    let end = offset_end_condition(&curve, &k, TABLE1_DISTANCE)?;
    let offset_curve = fit_points(&raw.points(), &end)?;
    let dist = offset_distances(&offset_curve, &curve, TABLE1_SAMPLES, exec)?;
    let (mean, max, sd) = mean_max_sd(&dist);
    let positions: Vec<Point3> = samples.iter().map(|s| s.position).collect();
    Ok(ModeReport {
        mode,
        points: samples.len(),
        added: plan.added_points(),
        before: chord_stats(&positions),
        after: chord_stats(&raw.points()),
        interpolation: Stats { mean, max, sd },
        offset_curve,
    })
}

pub fn table1(exec: Exec) -> Result<Table1Report> {
    Ok(Table1Report {
        traditional: table1_mode(SubdivisionMode::Traditional, exec)?,
        improved: table1_mode(SubdivisionMode::Improved, exec)?,
    })
}

pub const TRANSITION_DISTANCE: f64 = 50.0;

/// Convex joint around the origin with end points on the sphere of radius 50.
pub fn reference_joint() -> JointRecord {
    JointRecord {
        x0: Point3::new(47.553, 0.0, 15.451),
        t0: Vec3::new(-3.744, 53.960, 11.524),
        x1: Point3::new(29.389, 40.451, 0.0),
        t1: Vec3::new(-36.693, 26.659, -18.325),
        vertex: Point3::zeros(),
        kind: JointKind::Convex,
    }
}

pub fn transition_config(seed: u64, exec: Exec) -> PsoConfig {
    let mut cfg = PsoConfig::new(crate::transition::transition_bounds());
    cfg.seed = seed;
    cfg.exec = exec;
    cfg
}

pub fn repro_transition(seed: u64, exec: Exec) -> Result<ConvexSolution> {
    convex_transition(&reference_joint(), TRANSITION_DISTANCE, &transition_config(seed, exec), DEFAULT_SAMPLES)
}
