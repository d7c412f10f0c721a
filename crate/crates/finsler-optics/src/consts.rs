//! Numerical guards and default tolerances, collected in one place so tests
//! and the validation suite pin the same values the library enforces.

/// Smallest admissible direction norm. The metric is positively homogeneous
/// but not differentiable at the zero direction, so every direction-dependent
/// operation rejects anything shorter.
pub const MIN_DIRECTION_NORM: f64 = 1e-8;

/// Condition-number limit for the fundamental tensor in the geodesic solve.
/// Beyond this the linear system loses too many digits to trust the ray.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Default relative step for position derivatives (scaled by
/// `max(1, norm)`): first-order differences balance truncation against
/// rounding near 1e-5.
pub const DEFAULT_FD_STEP_POSITION: f64 = 1e-5;

/// Default relative step for direction derivatives. The fundamental tensor
/// is a second difference, whose rounding floor scales as `eps / h^2`; a
/// step near `eps^(1/4)` keeps the entrywise error a couple of orders below
/// the 1e-6 budget, which 1e-5 cannot reach.
pub const DEFAULT_FD_STEP_DIRECTION: f64 = 1e-4;

/// Default cap on `|tanh alpha|` in the radial cosh transform, which keeps
/// the stretched radius finite near the vertical axis.
pub const DEFAULT_ALPHA_CLAMP: f64 = 1.0 - 1e-3;

/// Default angular width of the smooth direction-weight transition bands.
pub const DEFAULT_TRANSITION_WIDTH: f64 = 0.2;

/// Default lateral/angular deviation below which a ray counts as straight.
pub const DEFAULT_TOL_PASS: f64 = 1e-6;

/// Default relative shortfall of the closest approach tolerated when
/// deciding that a fan is blocked by the shield.
pub const DEFAULT_TOL_BLOCK: f64 = 2e-2;

/// Default relative width of the annulus clipped next to the inner boundary
/// when exporting material fields (the tangential permittivity diverges
/// there for an ideal cloak).
pub const DEFAULT_R_GUARD: f64 = 1e-3;

/// Jacobian determinants smaller than this are treated as singular maps.
pub const SINGULAR_DET: f64 = 1e-12;
