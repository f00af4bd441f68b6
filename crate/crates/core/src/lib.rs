//! Offsetting of 3D NURBS curves for ruled surface construction.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`curve`]: rational B-spline curves, Bézier decomposition, cubic spline fitting.
//! - [`subdivide`]: second-derivative bounded sampling plus offset-aware refinement.
//! - [`offset`]: directional offsetting `N = v × k`, spline fitting and accuracy statistics.
//! - [`overlap`]: invalid loop removal on the projection along the parting direction.
//! - [`transition`]: convex gaps bridged by spherical rational quartics, concave overlaps
//!   trimmed and bridged by cubic Béziers.
//! - [`optimizer`]: bounded particle swarm minimizer used by the convex transition.
//! - [`surface`]: ruled surface evaluation, tessellation and gap fans.
//! - [`pipeline`]: end-to-end orchestration over a set of input curves.
//! - [`io`]: curve text format, OBJ, SVG and CSV writers.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel` feature disabled
//! every mode runs sequentially.

pub mod curve;
pub mod error;
pub mod exec;
pub mod geom;
pub mod io;
pub mod offset;
pub mod optimizer;
pub mod overlap;
pub mod pipeline;
pub mod repro;
pub mod subdivide;
pub mod surface;
pub mod transition;

pub use curve::{BezierSegment, EndCondition, NurbsCurve3};
pub use error::{Error, Result};
pub use exec::Exec;
pub use geom::{Point3, Vec2, Vec3};
