//! Construction of the asymmetric shield metric.
//!
//! Three regime tensors are blended by a direction weight:
//! a flat tensor (undisturbed propagation), a cylindrical-cloak tensor from a
//! point-expansion map (incident light detours around the shielded region),
//! and a radially stretched tensor from a cosh transform (light emitted
//! inside the shielded region). All tensors are produced in Cartesian
//! components so the ray integrator works in a single chart with no
//! coordinate singularity away from the origin.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::consts::{DEFAULT_ALPHA_CLAMP, DEFAULT_TRANSITION_WIDTH, SINGULAR_DET};
use crate::error::{Error, Result};
use crate::fd::{self, FdConfig};
use crate::field::{ensure_positive_definite, guard_direction, FinslerField, MetricTensor};
use crate::linalg::{Matrix, Vector};

use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Direction angle of a planar vector, measured counterclockwise from the
/// +x axis, in `[0, 2pi)`. Leftward travel corresponds to angles near pi.
pub fn angle_of(y: &Vector) -> Result<f64> {
    guard_direction(y)?;
    if y.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: y.dim(),
        });
    }
    let theta = y[1].atan2(y[0]);
    Ok(if theta < 0.0 { theta + TAU } else { theta })
}

/// Shape of the direction weight `f(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightProfile {
    /// Exactly 0 on `[pi/2, 3pi/2)`, exactly 1 elsewhere.
    Step,
    /// Cubic smoothstep transitions of the given width centered on pi/2 and
    /// 3pi/2; equals the step profile outside the transition bands.
    Smooth,
    /// Constant weight, used for flat and pure-cloak control scenarios.
    Constant(f64),
}

/// Direction weight selecting, per direction, how much of the shield regime
/// applies: 0 is the flat regime, 1 the fully transformed one.
#[derive(Debug, Clone, Copy)]
pub struct DirectionWeight {
    pub profile: WeightProfile,
    pub transition_width: f64,
}

impl DirectionWeight {
    pub fn step() -> Self {
        DirectionWeight {
            profile: WeightProfile::Step,
            transition_width: 0.0,
        }
    }

    pub fn smooth(transition_width: f64) -> Self {
        assert!(
            transition_width > 0.0 && transition_width < FRAC_PI_2,
            "transition width must lie in (0, pi/2)"
        );
        DirectionWeight {
            profile: WeightProfile::Smooth,
            transition_width,
        }
    }

    pub fn constant(value: f64) -> Self {
        assert!((0.0..=1.0).contains(&value), "weight must lie in [0, 1]");
        DirectionWeight {
            profile: WeightProfile::Constant(value),
            transition_width: 0.0,
        }
    }

    /// Weight at direction angle `theta` (normalized internally to
    /// `[0, 2pi)`); always in `[0, 1]`.
    pub fn evaluate(&self, theta: f64) -> f64 {
        let theta = theta.rem_euclid(TAU);
        match self.profile {
            WeightProfile::Constant(c) => c,
            WeightProfile::Step => {
                if (FRAC_PI_2..3.0 * FRAC_PI_2).contains(&theta) {
                    0.0
                } else {
                    1.0
                }
            }
            WeightProfile::Smooth => {
                let w = self.transition_width;
                let falling = band_coordinate(theta, FRAC_PI_2, w);
                let rising = band_coordinate(theta, 3.0 * FRAC_PI_2, w);
                match (falling, rising) {
                    (Some(s), _) => 1.0 - smoothstep(s),
                    (_, Some(s)) => smoothstep(s),
                    _ => {
                        if theta > FRAC_PI_2 && theta < 3.0 * FRAC_PI_2 {
                            0.0
                        } else {
                            1.0
                        }
                    }
                }
            }
        }
    }
}

impl DirectionWeight {
    /// `Some(weight)` when `theta` sits on a locally constant stretch of the
    /// profile, at least `margin` radians away from any transition or jump.
    /// Direction derivatives of the blend vanish there.
    pub fn plateau(&self, theta: f64, margin: f64) -> Option<f64> {
        let theta = theta.rem_euclid(TAU);
        let edges = [FRAC_PI_2, 3.0 * FRAC_PI_2];
        match self.profile {
            WeightProfile::Constant(c) => Some(c),
            WeightProfile::Step => {
                if edges.iter().any(|&e| angular_distance(theta, e) < margin) {
                    None
                } else {
                    Some(self.evaluate(theta))
                }
            }
            WeightProfile::Smooth => {
                let reach = 0.5 * self.transition_width + margin;
                if edges.iter().any(|&e| angular_distance(theta, e) < reach) {
                    None
                } else {
                    Some(self.evaluate(theta))
                }
            }
        }
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

impl Default for DirectionWeight {
    fn default() -> Self {
        DirectionWeight::smooth(DEFAULT_TRANSITION_WIDTH)
    }
}

/// Position within a transition band centered at `center`, or `None` when
/// outside it.
fn band_coordinate(theta: f64, center: f64, width: f64) -> Option<f64> {
    let lo = center - 0.5 * width;
    let hi = center + 0.5 * width;
    if theta >= lo && theta <= hi {
        Some((theta - lo) / width)
    } else {
        None
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

/// Radial stretch `r' = (r + r0) cosh(alpha(theta))` with
/// `tanh(alpha) = (2/pi)(theta - pi)`, defined on polar angles in
/// `(pi/2, 3pi/2)`. `alpha_clamp` caps `|tanh alpha|` so the stretch stays
/// finite approaching the vertical axis; beyond the cap the stretch factor is
/// constant in angle.
#[derive(Debug, Clone, Copy)]
pub struct RadialCoshTransform {
    pub r0: f64,
    pub alpha_clamp: f64,
}

impl RadialCoshTransform {
    pub fn new(r0: f64, alpha_clamp: f64) -> Self {
        assert!(r0 >= 0.0, "radial offset must be non-negative");
        assert!(
            alpha_clamp > 0.0 && alpha_clamp < 1.0,
            "alpha clamp must lie in (0, 1)"
        );
        RadialCoshTransform { r0, alpha_clamp }
    }

    /// `cosh(alpha)` and `sinh(alpha) * d(alpha)/d(theta)` at polar angle
    /// `theta`, with clamping applied. Valid for any angle.
    fn stretch_terms(&self, theta: f64) -> (f64, f64) {
        let u = (2.0 / PI) * (theta - PI);
        let clamped = u.clamp(-self.alpha_clamp, self.alpha_clamp);
        let denom = (1.0 - clamped * clamped).sqrt();
        let cosh_alpha = 1.0 / denom;
        let sinh_alpha = clamped / denom;
        let dalpha = if u.abs() < self.alpha_clamp {
            (2.0 / PI) / (1.0 - clamped * clamped)
        } else {
            0.0
        };
        (cosh_alpha, sinh_alpha * dalpha)
    }

    /// Stretched radius at `(r, theta)`; errors when `theta` leaves
    /// `(pi/2, 3pi/2)`.
    pub fn radial(&self, r: f64, theta: f64) -> Result<f64> {
        if !(theta > FRAC_PI_2 && theta < 3.0 * FRAC_PI_2) {
            return Err(Error::OutsideDomain {
                what: "theta",
                value: theta,
                lo: FRAC_PI_2,
                hi: 3.0 * FRAC_PI_2,
            });
        }
        if r <= 0.0 {
            return Err(Error::OutsideDomain {
                what: "r",
                value: r,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let (cosh_alpha, _) = self.stretch_terms(theta);
        Ok((r + self.r0) * cosh_alpha)
    }

    /// The transform as a Cartesian point map. Clamping extends it to every
    /// polar angle, which the blended field relies on.
    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        let (r, theta) = polar_of(x)?;
        let (cosh_alpha, _) = self.stretch_terms(theta);
        let stretched = (r + self.r0) * cosh_alpha;
        Ok(Vector::new2(
            stretched * theta.cos(),
            stretched * theta.sin(),
        ))
    }

    /// Analytic Cartesian Jacobian of [`forward`](Self::forward).
    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        let (r, theta) = polar_of(x)?;
        let (cosh_alpha, sinh_dalpha) = self.stretch_terms(theta);
        let stretched = (r + self.r0) * cosh_alpha;
        let dr_stretch = cosh_alpha;
        let dtheta_stretch = (r + self.r0) * sinh_dalpha;

        let (sin_t, cos_t) = theta.sin_cos();
        // Image derivatives with respect to (r, theta) ...
        let m = [
            [
                dr_stretch * cos_t,
                dtheta_stretch * cos_t - stretched * sin_t,
            ],
            [
                dr_stretch * sin_t,
                dtheta_stretch * sin_t + stretched * cos_t,
            ],
        ];
        // ... chained with (r, theta) derivatives with respect to (x, y).
        let a = [[cos_t, sin_t], [-sin_t / r, cos_t / r]];
        let mut jac = Matrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                jac.set(i, j, m[i][0] * a[0][j] + m[i][1] * a[1][j]);
            }
        }
        Ok(jac)
    }

    pub fn map(&self) -> CoordinateMap {
        let t = *self;
        let t2 = *self;
        CoordinateMap::new(2, "radial-cosh", move |x| t.forward(x))
            .with_jacobian(move |x| t2.jacobian(x))
    }
}

impl Default for RadialCoshTransform {
    fn default() -> Self {
        RadialCoshTransform::new(0.5, DEFAULT_ALPHA_CLAMP)
    }
}

fn polar_of(x: &Vector) -> Result<(f64, f64)> {
    if x.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: x.dim(),
        });
    }
    let r = x.norm();
    if r < SINGULAR_DET {
        return Err(Error::SingularMap { x: *x, det: 0.0 });
    }
    let theta = x[1].atan2(x[0]);
    Ok((r, if theta < 0.0 { theta + TAU } else { theta }))
}

/// Linear expansion of a point into a ball: real radii `[R1, R2]` correspond
/// to electromagnetic radii `[0, R2]` through `r = R1 + r' (R2 - R1) / R2`.
#[derive(Debug, Clone, Copy)]
pub struct PointExpansionMap {
    pub shield_radius: f64,
    pub device_radius: f64,
}

impl PointExpansionMap {
    pub fn new(shield_radius: f64, device_radius: f64) -> Self {
        assert!(
            0.0 < shield_radius && shield_radius < device_radius,
            "need 0 < shield radius < device radius"
        );
        PointExpansionMap {
            shield_radius,
            device_radius,
        }
    }

    /// `d r' / d r`: the constant radial stretch of the linear map.
    pub fn radial_stretch(&self) -> f64 {
        self.device_radius / (self.device_radius - self.shield_radius)
    }

    /// Electromagnetic radius for a real radius in `[R1, R2]`.
    pub fn virtual_radius(&self, r: f64) -> Result<f64> {
        if r < self.shield_radius {
            return Err(Error::ShieldInterior {
                radius: r,
                shield_radius: self.shield_radius,
            });
        }
        Ok(self.radial_stretch() * (r - self.shield_radius))
    }

    /// The expansion as a Cartesian point map (identity outside the device).
    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        let r = x.norm();
        if r > self.device_radius {
            return Ok(*x);
        }
        let scaled = self.virtual_radius(r)? / r;
        Ok(x.scale(scaled))
    }

    pub fn map(&self) -> CoordinateMap {
        let m = *self;
        CoordinateMap::new(2, "point-expansion", move |x| m.forward(x))
    }
}

type PointMapFn = Box<dyn Fn(&Vector) -> Result<Vector> + Send + Sync>;
type JacobianFn = Box<dyn Fn(&Vector) -> Result<Matrix> + Send + Sync>;

/// A coordinate map with an optional analytic Jacobian; pullbacks fall back
/// to central differences when none is supplied.
pub struct CoordinateMap {
    dim: usize,
    label: String,
    forward: PointMapFn,
    jacobian: Option<JacobianFn>,
}

impl CoordinateMap {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        forward: impl Fn(&Vector) -> Result<Vector> + Send + Sync + 'static,
    ) -> Self {
        CoordinateMap {
            dim,
            label: label.into(),
            forward: Box::new(forward),
            jacobian: None,
        }
    }

    pub fn identity(dim: usize) -> Self {
        CoordinateMap::new(dim, "identity", |x| Ok(*x))
            .with_jacobian(move |x| Ok(Matrix::identity(x.dim())))
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(&Vector) -> Result<Matrix> + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Box::new(jacobian));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn forward(&self, x: &Vector) -> Result<Vector> {
        (self.forward)(x)
    }

    pub fn jacobian(&self, x: &Vector, cfg: &FdConfig) -> Result<Matrix> {
        match &self.jacobian {
            Some(j) => j(x),
            None => fd::jacobian_of_map(&*self.forward, x, cfg),
        }
    }
}

/// Pullback `Jᵀ G J` of a base metric under a coordinate map, where the base
/// tensor is evaluated at the mapped point. Errors on singular Jacobians.
pub fn pullback_metric(
    map: &CoordinateMap,
    base: &dyn Fn(&Vector) -> Result<Matrix>,
    x: &Vector,
    cfg: &FdConfig,
) -> Result<Matrix> {
    let jac = map.jacobian(x, cfg)?;
    let det = jac.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::SingularMap { x: *x, det });
    }
    let image = map.forward(x)?;
    let g = base(&image)?;
    Ok(g.congruence(&jac))
}

/// Converts a tensor given in the polar coordinate basis `(r, theta)` at
/// point `x` into Cartesian components.
pub fn polar_tensor_to_cartesian(g_polar: &Matrix, x: &Vector) -> Result<Matrix> {
    let (r, theta) = polar_of(x)?;
    let (sin_t, cos_t) = theta.sin_cos();
    let a = Matrix::from_rows2([cos_t, sin_t], [-sin_t / r, cos_t / r]);
    Ok(g_polar.congruence(&a))
}

/// Annulus branch of the cloak tensor, as a smooth formula with no domain
/// checks: `g = a^2 P_radial + b^2 P_tangential` with `a` the constant radial
/// stretch and `b = r'/r`. Extends smoothly a little past both boundaries,
/// which branch-locked difference stencils rely on.
fn annulus_tensor(map: &PointExpansionMap, x: &Vector) -> Matrix {
    let r = x.norm();
    let radial = map.radial_stretch();
    let tangential = radial * (r - map.shield_radius) / r;
    let unit = x.scale(1.0 / r);
    let mut g = Matrix::zeros(2);
    for i in 0..2 {
        for j in 0..2 {
            let p_rad = unit[i] * unit[j];
            let p_tan = if i == j { 1.0 } else { 0.0 } - p_rad;
            g.set(i, j, radial * radial * p_rad + tangential * tangential * p_tan);
        }
    }
    g
}

/// Cylindrical-cloak tensor in Cartesian components: identity outside the
/// device, the pullback of the flat metric under the point-expansion map in
/// the annulus, undefined inside the shielded region.
pub fn regime_metric_l1(map: &PointExpansionMap, x: &Vector) -> Result<Matrix> {
    let r = x.norm();
    if r < map.shield_radius {
        return Err(Error::ShieldInterior {
            radius: r,
            shield_radius: map.shield_radius,
        });
    }
    if r > map.device_radius {
        return Ok(Matrix::identity(2));
    }
    Ok(annulus_tensor(map, x))
}

/// Radially stretched tensor in Cartesian components: the pullback of the
/// flat metric under the cosh transform.
pub fn regime_metric_l2(transform: &RadialCoshTransform, x: &Vector) -> Result<Matrix> {
    let jac = transform.jacobian(x)?;
    let det = jac.determinant();
    if !det.is_finite() || det.abs() < SINGULAR_DET {
        return Err(Error::SingularMap { x: *x, det });
    }
    Ok(jac.transpose().mul(&jac))
}

/// The pure cylindrical-cloak field: a direction-independent metric that
/// detours every ray around the shielded region. Declares its two
/// discontinuity circles so the integrator refracts across the device
/// boundary and terminates cleanly at the shield boundary.
pub struct CloakMetric {
    map: PointExpansionMap,
}

impl CloakMetric {
    pub fn new(map: PointExpansionMap) -> Self {
        CloakMetric { map }
    }

    pub fn expansion(&self) -> &PointExpansionMap {
        &self.map
    }

    fn squared_on_branch(&self, branch_radius: f64, x: &Vector, y: &Vector) -> Result<f64> {
        if branch_radius > self.map.device_radius {
            return Ok(y.norm_squared());
        }
        if branch_radius < self.map.shield_radius {
            return Err(Error::ShieldInterior {
                radius: branch_radius,
                shield_radius: self.map.shield_radius,
            });
        }
        let q = annulus_tensor(&self.map, x).quadratic_form(y);
        if !q.is_finite() || q < 0.0 {
            return Err(Error::Evaluation {
                x: *x,
                y: *y,
                reason: format!("cloak quadratic form produced {q}"),
            });
        }
        Ok(q)
    }
}

impl FinslerField for CloakMetric {
    fn dim(&self) -> usize {
        2
    }

    fn label(&self) -> &str {
        "cylindrical-cloak"
    }

    fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.eval_squared(x, y).map(f64::sqrt)
    }

    fn eval_squared(&self, x: &Vector, y: &Vector) -> Result<f64> {
        guard_direction(y)?;
        self.squared_on_branch(x.norm(), x, y)
    }

    fn eval_squared_branch(&self, x: &Vector, y: &Vector, branch_point: &Vector) -> Result<f64> {
        guard_direction(y)?;
        self.squared_on_branch(branch_point.norm(), x, y)
    }

    fn interface_radii(&self) -> Vec<f64> {
        vec![self.map.shield_radius, self.map.device_radius]
    }

    fn fundamental_tensor(
        &self,
        x: &Vector,
        y: &Vector,
        cfg: &crate::fd::FdConfig,
    ) -> Result<MetricTensor> {
        self.fundamental_tensor_branch(x, y, cfg, x)
    }

    fn fundamental_tensor_branch(
        &self,
        x: &Vector,
        y: &Vector,
        _cfg: &crate::fd::FdConfig,
        branch_point: &Vector,
    ) -> Result<MetricTensor> {
        guard_direction(y)?;
        let branch_radius = branch_point.norm();
        let entries = if branch_radius > self.map.device_radius {
            Matrix::identity(2)
        } else if branch_radius >= self.map.shield_radius {
            annulus_tensor(&self.map, x)
        } else {
            return Err(Error::ShieldInterior {
                radius: branch_radius,
                shield_radius: self.map.shield_radius,
            });
        };
        ensure_positive_definite(&entries, x, y)?;
        Ok(MetricTensor {
            entries,
            base_point: *x,
            base_direction: *y,
            asymmetry: 0.0,
        })
    }
}

/// What the blended field does where the shielded region would be queried
/// with a non-flat weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteriorRegime {
    /// The shielded region is impassable for transformed directions:
    /// evaluation errors, and rays terminate at the boundary. This is the
    /// configuration the incident-light scenarios use.
    Shielded,
    /// The shielded region carries the radially stretched tensor, the
    /// configuration for studying light emitted inside it.
    Emission,
}

/// The asymmetric shield: a direction-weighted blend of the flat tensor with
/// the cloak tensor outside the shielded region (and, in emission form, the
/// radially stretched tensor inside it).
pub struct BlendedShieldMetric {
    expansion: PointExpansionMap,
    stretch: RadialCoshTransform,
    weight: DirectionWeight,
    interior: InteriorRegime,
    label: String,
    off_flat_evals: AtomicU64,
}

impl BlendedShieldMetric {
    pub fn new(
        expansion: PointExpansionMap,
        stretch: RadialCoshTransform,
        weight: DirectionWeight,
        interior: InteriorRegime,
    ) -> Self {
        BlendedShieldMetric {
            expansion,
            stretch,
            weight,
            interior,
            label: "blended-shield".into(),
            off_flat_evals: AtomicU64::new(0),
        }
    }

    pub fn shield_radius(&self) -> f64 {
        self.expansion.shield_radius
    }

    pub fn device_radius(&self) -> f64 {
        self.expansion.device_radius
    }

    pub fn weight(&self) -> &DirectionWeight {
        &self.weight
    }

    pub fn expansion(&self) -> &PointExpansionMap {
        &self.expansion
    }

    /// Number of evaluations that saw a non-zero weight. Stays at zero for
    /// runs that only ever query flat-regime directions.
    pub fn off_flat_evaluations(&self) -> u64 {
        self.off_flat_evals.load(Ordering::Relaxed)
    }

    /// Transformed-regime tensor evaluated at `x` with the formula branch
    /// selected by `branch_radius`: identity outside the device, the cloak
    /// tensor in the annulus, and inside the shielded region either an error
    /// or the radial stretch, per the interior policy.
    fn transformed_tensor_on_branch(&self, x: &Vector, branch_radius: f64) -> Result<Matrix> {
        if branch_radius > self.expansion.device_radius {
            return Ok(Matrix::identity(2));
        }
        if branch_radius >= self.expansion.shield_radius {
            return Ok(annulus_tensor(&self.expansion, x));
        }
        match self.interior {
            InteriorRegime::Shielded => Err(Error::ShieldInterior {
                radius: branch_radius,
                shield_radius: self.expansion.shield_radius,
            }),
            InteriorRegime::Emission => regime_metric_l2(&self.stretch, x),
        }
    }

    fn transformed_tensor(&self, x: &Vector) -> Result<Matrix> {
        self.transformed_tensor_on_branch(x, x.norm())
    }

    /// Position tensor selected by a direction angle:
    /// `g = f(theta) g_transformed + (1 - f(theta)) g_flat`.
    pub fn region_tensor(&self, x: &Vector, theta: f64) -> Result<Matrix> {
        let w = self.weight.evaluate(theta);
        if w > 0.0 {
            self.off_flat_evals.fetch_add(1, Ordering::Relaxed);
        }
        if w == 0.0 {
            return Ok(Matrix::identity(2));
        }
        let transformed = self.transformed_tensor(x)?;
        if w == 1.0 {
            return Ok(transformed);
        }
        Ok(transformed.scale(w).add(&Matrix::identity(2).scale(1.0 - w)))
    }
}

impl FinslerField for BlendedShieldMetric {
    fn dim(&self) -> usize {
        2
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.eval_squared(x, y).map(f64::sqrt)
    }

    fn eval_squared(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.eval_squared_branch(x, y, x)
    }

    fn eval_squared_branch(&self, x: &Vector, y: &Vector, branch_point: &Vector) -> Result<f64> {
        let theta = angle_of(y)?;
        let w = self.weight.evaluate(theta);
        if w > 0.0 {
            self.off_flat_evals.fetch_add(1, Ordering::Relaxed);
        }
        // Plateau directions reuse the regime code paths verbatim so the
        // blend is bit-identical to the pure regimes there.
        if w == 0.0 {
            return Ok(y.norm_squared());
        }
        let transformed = self.transformed_tensor_on_branch(x, branch_point.norm())?;
        let g = if w == 1.0 {
            transformed
        } else {
            transformed.scale(w).add(&Matrix::identity(2).scale(1.0 - w))
        };
        let q = g.quadratic_form(y);
        if !q.is_finite() || q <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                x: *x,
                y: *y,
                eigenvalues: g.sym_eigenvalues(),
            });
        }
        Ok(q)
    }

    fn interface_radii(&self) -> Vec<f64> {
        vec![self.expansion.shield_radius, self.expansion.device_radius]
    }

    fn fundamental_tensor(
        &self,
        x: &Vector,
        y: &Vector,
        cfg: &FdConfig,
    ) -> Result<MetricTensor> {
        self.fundamental_tensor_branch(x, y, cfg, x)
    }

    fn fundamental_tensor_branch(
        &self,
        x: &Vector,
        y: &Vector,
        cfg: &FdConfig,
        branch_point: &Vector,
    ) -> Result<MetricTensor> {
        guard_direction(y)?;
        let theta = angle_of(y)?;
        // On a weight plateau the direction derivatives of the weight vanish
        // and the fundamental tensor is the blended position tensor itself.
        // The margin keeps difference stencils from poking into a band.
        const PLATEAU_MARGIN: f64 = 1e-2;
        if let Some(w) = self.weight.plateau(theta, PLATEAU_MARGIN) {
            let entries = if w == 0.0 {
                Matrix::identity(2)
            } else {
                let transformed = self.transformed_tensor_on_branch(x, branch_point.norm())?;
                if w == 1.0 {
                    transformed
                } else {
                    transformed.scale(w).add(&Matrix::identity(2).scale(1.0 - w))
                }
            };
            crate::field::ensure_positive_definite(&entries, x, y)?;
            return Ok(MetricTensor {
                entries,
                base_point: *x,
                base_direction: *y,
                asymmetry: 0.0,
            });
        }
        crate::field::metric_tensor(
            &crate::field::BranchView {
                field: self,
                branch: *branch_point,
            },
            x,
            y,
            cfg,
        )
    }
}

/// Direction-independent view of a blend: freezes the weight at one angle
/// and exposes the resulting Riemann tensor field. Used by oracles that
/// compare the blend against its constituent regimes.
pub fn frozen_direction_tensor(
    blend: &BlendedShieldMetric,
    x: &Vector,
    theta: f64,
) -> Result<MetricTensor> {
    let entries = blend.region_tensor(x, theta)?;
    ensure_positive_definite(&entries, x, &Vector::new2(theta.cos(), theta.sin()))?;
    Ok(MetricTensor {
        entries,
        base_point: *x,
        base_direction: Vector::new2(theta.cos(), theta.sin()),
        asymmetry: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{eval_metric, flat_metric, riemann_metric};
    use approx::assert_relative_eq;

    fn default_blend(interior: InteriorRegime) -> BlendedShieldMetric {
        BlendedShieldMetric::new(
            PointExpansionMap::new(1.0, 2.0),
            RadialCoshTransform::new(0.5, DEFAULT_ALPHA_CLAMP),
            DirectionWeight::default(),
            interior,
        )
    }

    #[test]
    fn angle_convention() {
        assert_relative_eq!(angle_of(&Vector::new2(1.0, 0.0)).unwrap(), 0.0);
        assert_relative_eq!(angle_of(&Vector::new2(-1.0, 0.0)).unwrap(), PI);
        assert_relative_eq!(
            angle_of(&Vector::new2(0.0, -1.0)).unwrap(),
            3.0 * FRAC_PI_2
        );
    }

    #[test]
    fn step_weight_branches() {
        let w = DirectionWeight::step();
        assert_eq!(w.evaluate(PI), 0.0);
        assert_eq!(w.evaluate(0.0), 1.0);
        // The boundary belongs to the zero branch.
        assert_eq!(w.evaluate(FRAC_PI_2), 0.0);
        assert_eq!(w.evaluate(3.0 * FRAC_PI_2), 1.0);
        assert_eq!(w.evaluate(FRAC_PI_2 - 1e-12), 1.0);
    }

    #[test]
    fn smooth_weight_plateaus_and_monotone_bands() {
        let w = DirectionWeight::smooth(0.2);
        assert_eq!(w.evaluate(PI), 0.0);
        assert_eq!(w.evaluate(0.0), 1.0);
        assert_eq!(w.evaluate(FRAC_PI_2 - 0.11), 1.0);
        assert_eq!(w.evaluate(FRAC_PI_2 + 0.11), 0.0);
        assert_relative_eq!(w.evaluate(FRAC_PI_2), 0.5, epsilon = 1e-12);
        assert_relative_eq!(w.evaluate(3.0 * FRAC_PI_2), 0.5, epsilon = 1e-12);

        let mut prev = w.evaluate(FRAC_PI_2 - 0.1);
        let mut theta = FRAC_PI_2 - 0.1;
        while theta < FRAC_PI_2 + 0.1 {
            theta += 1e-3;
            let cur = w.evaluate(theta);
            assert!(cur <= prev + 1e-15, "falling band must be monotone");
            assert!((0.0..=1.0).contains(&cur));
            prev = cur;
        }
    }

    #[test]
    fn cosh_transform_values() {
        let t = RadialCoshTransform::new(0.5, DEFAULT_ALPHA_CLAMP);
        // tanh(alpha) = 0 at theta = pi.
        assert_relative_eq!(t.radial(2.0, PI).unwrap(), 2.5, epsilon = 1e-14);

        let t0 = RadialCoshTransform::new(0.0, DEFAULT_ALPHA_CLAMP);
        // tanh(alpha) = 1/2 at theta = 5pi/4: cosh = 1/sqrt(1 - 1/4).
        assert_relative_eq!(
            t0.radial(1.0, 5.0 * PI / 4.0).unwrap(),
            2.0 / 3.0_f64.sqrt(),
            epsilon = 1e-14
        );

        // Near the vertical axis the clamp keeps the stretch finite.
        let clamp = 1.0 - 1e-6;
        let tc = RadialCoshTransform::new(0.25, clamp);
        let near_axis = tc.radial(1.0, FRAC_PI_2 + 1e-9).unwrap();
        let expected = 1.25 / (1.0 - clamp * clamp).sqrt();
        assert_relative_eq!(near_axis, expected, epsilon = 1e-9);
        assert!(near_axis.is_finite());

        assert!(matches!(
            t.radial(1.0, 0.3),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn pullback_identity_map_polar_base() {
        let cfg = FdConfig::default();
        let map = CoordinateMap::identity(2);
        let base = |u: &Vector| Ok(Matrix::diagonal(2, &[1.0, u[0] * u[0]]));
        let g = pullback_metric(&map, &base, &Vector::new2(2.0, 0.4), &cfg).unwrap();
        assert_relative_eq!(g.get(0, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.get(1, 1), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn pullback_linear_radial_chart() {
        // Chart coordinates (r, theta); the expansion r' = 2 (r - 1) pulled
        // back against the polar flat base metric diag(1, r'^2).
        let cfg = FdConfig::default();
        let map = CoordinateMap::new(2, "expansion-chart", |u| {
            Ok(Vector::new2(2.0 * (u[0] - 1.0), u[1]))
        });
        let base = |u: &Vector| Ok(Matrix::diagonal(2, &[1.0, u[0] * u[0]]));
        let g = pullback_metric(&map, &base, &Vector::new2(1.5, 0.0), &cfg).unwrap();
        assert_relative_eq!(g.get(0, 0), 4.0, epsilon = 1e-8);
        assert_relative_eq!(g.get(1, 1), 1.0, epsilon = 1e-8);
        assert_relative_eq!(g.get(0, 1), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn pullback_rigid_map_is_identity() {
        let cfg = FdConfig::default();
        let angle: f64 = 0.7;
        let map = CoordinateMap::new(2, "rotation", move |x| {
            let (s, c) = angle.sin_cos();
            Ok(Vector::new2(c * x[0] - s * x[1], s * x[0] + c * x[1]))
        });
        let base = |_: &Vector| Ok(Matrix::identity(2));
        let g = pullback_metric(&map, &base, &Vector::new2(0.3, -1.2), &cfg).unwrap();
        assert_relative_eq!(g.get(0, 0), 1.0, epsilon = 1e-9);
        assert_relative_eq!(g.get(1, 1), 1.0, epsilon = 1e-9);
        assert_relative_eq!(g.get(0, 1), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn singular_map_detected() {
        let cfg = FdConfig::default();
        let map = CoordinateMap::new(2, "collapse", |x| Ok(Vector::new2(x[0], 0.0)));
        let base = |_: &Vector| Ok(Matrix::identity(2));
        assert!(matches!(
            pullback_metric(&map, &base, &Vector::new2(1.0, 1.0), &cfg),
            Err(Error::SingularMap { .. })
        ));
    }

    #[test]
    fn cloak_tensor_boundary_and_exterior() {
        let map = PointExpansionMap::new(1.0, 2.0);
        // On the outer boundary: radial eigenvalue k^2, angular eigenvalue 1.
        let g = regime_metric_l1(&map, &Vector::new2(2.0, 0.0)).unwrap();
        assert_relative_eq!(g.get(0, 0), 4.0, epsilon = 1e-12);
        assert_relative_eq!(g.get(1, 1), 1.0, epsilon = 1e-12);

        let outside = regime_metric_l1(&map, &Vector::new2(2.5, 1.0)).unwrap();
        assert_relative_eq!(outside.get(0, 0), 1.0);
        assert_relative_eq!(outside.get(1, 1), 1.0);
        assert_relative_eq!(outside.get(0, 1), 0.0);

        assert!(matches!(
            regime_metric_l1(&map, &Vector::new2(0.5, 0.0)),
            Err(Error::ShieldInterior { .. })
        ));
    }

    #[test]
    fn cloak_tensor_matches_fd_pullback() {
        // Brute-force JᵀJ of the Cartesian expansion map as the oracle for
        // the closed-form annulus tensor.
        let map = PointExpansionMap::new(1.0, 2.0);
        let cfg = FdConfig {
            h_x: 1e-6,
            h_y: 1e-6,
        };
        let coord = map.map();
        let base = |_: &Vector| Ok(Matrix::identity(2));
        for x in [
            Vector::new2(1.5, 0.0),
            Vector::new2(1.2, 0.9),
            Vector::new2(-0.9, 1.1),
        ] {
            let exact = regime_metric_l1(&map, &x).unwrap();
            let fd = pullback_metric(&coord, &base, &x, &cfg).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(
                        exact.get(i, j),
                        fd.get(i, j),
                        epsilon = 1e-6,
                        max_relative = 1e-6
                    );
                }
            }
        }
        // Spot check at (1.5, 0): diag(k^2, (r'/r)^2) = diag(4, (1/1.5)^2).
        let g = regime_metric_l1(&map, &Vector::new2(1.5, 0.0)).unwrap();
        assert_relative_eq!(g.get(0, 0), 4.0, epsilon = 1e-12);
        assert_relative_eq!(g.get(1, 1), (1.0 / 1.5_f64) * (1.0 / 1.5), epsilon = 1e-12);
    }

    #[test]
    fn stretch_tensor_on_axis_and_fd_oracle() {
        let t = RadialCoshTransform::new(0.5, DEFAULT_ALPHA_CLAMP);
        // On the leftward axis the map is a pure radial offset.
        let g = regime_metric_l2(&t, &Vector::new2(-1.2, 0.0)).unwrap();
        assert_relative_eq!(g.get(0, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.get(0, 1), 0.0, epsilon = 1e-12);
        // Tangential entry in Cartesian components is (r'/r)^2.
        let ratio = (1.2 + 0.5) / 1.2;
        assert_relative_eq!(g.get(1, 1), ratio * ratio, epsilon = 1e-12);

        // Off axis: analytic Jacobian against central differences.
        let cfg = FdConfig {
            h_x: 1e-6,
            h_y: 1e-6,
        };
        let coord = t.map();
        let base = |_: &Vector| Ok(Matrix::identity(2));
        for x in [
            Vector::new2(-0.8, 0.35),
            Vector::new2(-0.2, -0.6),
            Vector::new2(0.4, 0.3),
        ] {
            let exact = regime_metric_l2(&t, &x).unwrap();
            let numeric = {
                let coord_fd = CoordinateMap::new(2, "stretch-fd", move |x: &Vector| t.forward(x));
                pullback_metric(&coord_fd, &base, &x, &cfg).unwrap()
            };
            let analytic = pullback_metric(&coord, &base, &x, &cfg).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(
                        exact.get(i, j),
                        numeric.get(i, j),
                        epsilon = 1e-6,
                        max_relative = 1e-6
                    );
                    assert_relative_eq!(exact.get(i, j), analytic.get(i, j), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn stretch_tensor_zero_offset_axis_is_flat() {
        let t = RadialCoshTransform::new(0.0, DEFAULT_ALPHA_CLAMP);
        for r in [0.5, 1.0, 2.3] {
            let g = regime_metric_l2(&t, &Vector::new2(-r, 0.0)).unwrap();
            assert_relative_eq!(g.get(0, 0), 1.0, epsilon = 1e-12);
            assert_relative_eq!(g.get(1, 1), 1.0, epsilon = 1e-12);
            assert_relative_eq!(g.get(0, 1), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn blend_plateaus() {
        let blend = default_blend(InteriorRegime::Shielded);
        let flat = flat_metric(2);

        // Leftward plateau equals the flat metric exactly, anywhere.
        for x in [
            Vector::new2(3.0, 0.5),
            Vector::new2(1.4, 0.2),
            Vector::new2(0.3, 0.1),
        ] {
            let y = Vector::new2(-1.3, 0.05);
            assert_eq!(
                eval_metric(&blend, &x, &y).unwrap(),
                eval_metric(&flat, &x, &y).unwrap()
            );
        }

        // Rightward plateau outside the device is flat too.
        let y = Vector::new2(2.0, 0.1);
        let x = Vector::new2(3.0, 0.4);
        assert_relative_eq!(
            eval_metric(&blend, &x, &y).unwrap(),
            eval_metric(&flat, &x, &y).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn blend_matches_cloak_field_in_annulus() {
        let blend = default_blend(InteriorRegime::Shielded);
        let map = PointExpansionMap::new(1.0, 2.0);
        let cloak = riemann_metric(2, "cloak", move |x| regime_metric_l1(&map, x));
        for x in [Vector::new2(-1.5, 0.2), Vector::new2(0.3, 1.4)] {
            let y = Vector::new2(1.0, 0.02);
            assert_relative_eq!(
                eval_metric(&blend, &x, &y).unwrap(),
                eval_metric(&cloak, &x, &y).unwrap(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn blend_interior_policies() {
        let y = Vector::new2(1.0, 0.0);
        let x = Vector::new2(-0.4, 0.1);

        let shielded = default_blend(InteriorRegime::Shielded);
        assert!(matches!(
            eval_metric(&shielded, &x, &y),
            Err(Error::ShieldInterior { .. })
        ));

        let emission = default_blend(InteriorRegime::Emission);
        let t = RadialCoshTransform::new(0.5, DEFAULT_ALPHA_CLAMP);
        let expected = regime_metric_l2(&t, &x).unwrap().quadratic_form(&y).sqrt();
        assert_relative_eq!(eval_metric(&emission, &x, &y).unwrap(), expected);

        // Leftward directions are flat regardless of policy.
        let left = Vector::new2(-1.0, 0.0);
        assert_relative_eq!(eval_metric(&shielded, &x, &left).unwrap(), 1.0);
    }

    #[test]
    fn blend_bounds_between_regimes() {
        let blend = default_blend(InteriorRegime::Shielded);
        let map = PointExpansionMap::new(1.0, 2.0);
        let x = Vector::new2(-1.3, 0.4);
        let flat = flat_metric(2);
        let g1 = regime_metric_l1(&map, &x).unwrap();
        for k in 0..40 {
            let theta = TAU * k as f64 / 40.0;
            let y = Vector::new2(theta.cos(), theta.sin());
            let Ok(b) = eval_metric(&blend, &x, &y) else {
                continue;
            };
            let f_flat = eval_metric(&flat, &x, &y).unwrap();
            let f_cloak = g1.quadratic_form(&y).sqrt();
            let lo = f_flat.min(f_cloak) - 1e-12;
            let hi = f_flat.max(f_cloak) + 1e-12;
            assert!(b >= lo && b <= hi, "blend must stay between its regimes");
        }
    }

    #[test]
    fn blend_continuous_across_transition_bands() {
        let blend = default_blend(InteriorRegime::Shielded);
        let x = Vector::new2(-1.5, 0.3);
        for center in [FRAC_PI_2, 3.0 * FRAC_PI_2] {
            let mut prev: Option<f64> = None;
            let mut theta = center - 0.15;
            while theta <= center + 0.15 {
                let y = Vector::new2(theta.cos(), theta.sin());
                let value = eval_metric(&blend, &x, &y).unwrap();
                if let Some(p) = prev {
                    assert!(
                        (value - p).abs() <= 1e-4,
                        "jump {} across theta = {theta}",
                        (value - p).abs()
                    );
                }
                prev = Some(value);
                theta += 1e-6;
            }
        }
    }

    #[test]
    fn blend_homogeneity_is_exact() {
        let blend = default_blend(InteriorRegime::Shielded);
        let x = Vector::new2(-1.4, 0.6);
        for (vx, vy) in [(0.7, 0.3), (-0.2, 0.95), (1.0, -0.01)] {
            let y = Vector::new2(vx, vy);
            for lambda in [0.1, 2.0, 9.7] {
                let residual = crate::field::check_homogeneity(&blend, &x, &y, lambda).unwrap();
                assert!(residual <= 1e-12, "residual {residual}");
            }
        }
    }

    #[test]
    fn transition_band_tensor_is_consistent_or_reports_convexity_loss() {
        // Inside the transition bands the weight varies with direction and
        // the fundamental tensor picks up derivative terms; the blend can
        // genuinely lose strong convexity there. Wherever the tensor exists
        // it must satisfy the 2-homogeneity identity F^2 = yᵀ g y; where it
        // does not, the failure must be the typed error with an eigenvalue
        // diagnostic.
        let blend = default_blend(InteriorRegime::Shielded);
        let cfg = FdConfig::default();
        let mut convexity_losses = 0;
        let mut checked = 0;
        for r in [1.1_f64, 1.5, 1.95] {
            for pos_angle in [0.0_f64, 1.0, 2.0, 3.0] {
                let x = Vector::new2(r * pos_angle.cos(), r * pos_angle.sin());
                for offset in [-0.08_f64, 0.0, 0.08] {
                    let theta = FRAC_PI_2 + offset;
                    let y = Vector::new2(theta.cos(), theta.sin());
                    match blend.fundamental_tensor(&x, &y, &cfg) {
                        Ok(tensor) => {
                            let f2 = blend.eval_squared(&x, &y).unwrap();
                            let q = tensor.entries.quadratic_form(&y);
                            // The difference-stencil noise scales with the
                            // tensor entries, which dwarf F^2 for the nearly
                            // degenerate band directions.
                            let scale = (0..2)
                                .flat_map(|i| (0..2).map(move |j| (i, j)))
                                .map(|(i, j)| tensor.entries.get(i, j).abs())
                                .fold(f2, f64::max);
                            assert!(
                                (q - f2).abs() <= 1e-6 * scale,
                                "consistency failed at r={r}, angle={pos_angle}, offset={offset}"
                            );
                            checked += 1;
                        }
                        Err(Error::NotPositiveDefinite { eigenvalues, .. }) => {
                            assert!(eigenvalues.iter().any(|&e| e <= 0.0));
                            convexity_losses += 1;
                        }
                        Err(other) => panic!("unexpected error in band: {other}"),
                    }
                }
            }
        }
        assert!(checked > 0, "some band tensors must exist");
        assert!(
            convexity_losses > 0,
            "the blend is known to lose strong convexity somewhere in the bands"
        );
    }

    #[test]
    fn band_heading_ray_terminates_gracefully() {
        // A ray aimed along a transition band must end with a recorded
        // convexity failure, never a panic.
        let blend = default_blend(InteriorRegime::Shielded);
        let cfg = crate::ray::IntegratorConfig {
            step: 1e-3,
            max_steps: 20_000,
            domain: crate::ray::Domain::centered_square(6.0),
            ..Default::default()
        };
        let heading = FRAC_PI_2 + 0.05;
        let traj = crate::ray::integrate(
            &blend,
            crate::ray::RayState::new(
                Vector::new2(1.6, -3.0),
                Vector::new2(heading.cos(), heading.sin()),
            ),
            &cfg,
        )
        .unwrap();
        assert!(matches!(
            traj.termination,
            crate::ray::Termination::ConvexityFailure | crate::ray::Termination::LeftDomain
        ));
        if traj.termination == crate::ray::Termination::ConvexityFailure {
            assert!(traj.failure.is_some());
        }
    }

    #[test]
    fn off_flat_counter() {
        let blend = default_blend(InteriorRegime::Shielded);
        let x = Vector::new2(3.0, 0.0);
        for _ in 0..5 {
            let _ = eval_metric(&blend, &x, &Vector::new2(-1.0, 0.0));
        }
        assert_eq!(blend.off_flat_evaluations(), 0);
        let _ = eval_metric(&blend, &x, &Vector::new2(1.0, 0.0));
        assert_eq!(blend.off_flat_evaluations(), 1);
    }
}
