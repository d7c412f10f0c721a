use crate::linalg::Vector;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A metric evaluation produced a non-finite or non-positive value.
    #[error("metric evaluation failed at x={x:?}, y={y:?}: {reason}")]
    Evaluation { x: Vector, y: Vector, reason: String },

    /// Direction shorter than the minimum admissible norm; the metric is not
    /// differentiable at the zero direction.
    #[error("direction norm {norm:.3e} is below the minimum {min:.3e}")]
    DegenerateDirection { norm: f64, min: f64 },

    /// Strong-convexity failure: the fundamental tensor is not positive
    /// definite at this point and direction.
    #[error("metric tensor not positive definite at x={x:?}, y={y:?} (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite {
        x: Vector,
        y: Vector,
        eigenvalues: Vec<f64>,
    },

    /// A coordinate map's Jacobian is singular at the queried point.
    #[error("singular coordinate map at x={x:?} (|det J| = {det:.3e})")]
    SingularMap { x: Vector, det: f64 },

    /// Query inside the shielded region, where the expansion map and the
    /// cloak tensor are undefined.
    #[error("point at radius {radius:.6} lies inside the shielded region (r < {shield_radius:.6})")]
    ShieldInterior { radius: f64, shield_radius: f64 },

    /// Argument outside the domain an operation is defined on.
    #[error("{what} = {value:.6} outside domain ({lo:.6}, {hi:.6})")]
    OutsideDomain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// The fundamental tensor is numerically too ill-conditioned to solve
    /// the geodesic system reliably.
    #[error("fundamental tensor condition number {condition:.3e} exceeds limit {limit:.3e}")]
    IllConditioned { condition: f64, limit: f64 },

    /// Principal refractive indices that do not yield positive material
    /// parameters.
    #[error("principal indices {indices:?} do not yield positive material parameters")]
    MaterialSolve { indices: [f64; 3] },

    /// Mismatched spatial dimensions between arguments.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Fewer path samples than an operation requires.
    #[error("path needs at least {needed} samples, got {got}")]
    PathTooShort { needed: usize, got: usize },
}
