use thiserror::Error;

use crate::transition::SphericalQuartic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("parameter {t} outside curve domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },
    #[error("derivative order {0} not supported (max 2)")]
    UnsupportedOrder(usize),
    #[error("zero first derivative at t = {t}")]
    DegenerateTangent { t: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tangent parallel to offset direction (sample {sample:?})")]
    DegenerateDirection { sample: Option<usize> },
    #[error("loop elimination removed the whole polyline")]
    AllLoop,
    #[error("degenerate joint: {0}")]
    DegenerateJoint(String),
    #[error("projected curves do not intersect")]
    NoOverlap,
    #[error("trim length {requested} exceeds available chord {available}")]
    TrimLength { requested: f64, available: f64 },
    #[error("bridge endpoints coincide")]
    DegenerateBridge,
    #[error("particle swarm stopped at fitness {fitness} above target {target}")]
    Convergence {
        fitness: f64,
        target: f64,
        best: Box<SphericalQuartic>,
    },
    #[error("non-finite fitness {value} for particle {particle}")]
    FitnessDomain { particle: usize, value: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by input files rather than geometry.
    pub fn is_input(&self) -> bool {
        matches!(self.root(), Error::Parse { .. } | Error::Io(_))
    }

    /// True when the particle swarm missed its target.
    pub fn is_convergence(&self) -> bool {
        matches!(self.root(), Error::Convergence { .. })
    }

    /// The innermost error beneath any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
