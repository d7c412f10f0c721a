//! Geodesic ray tracing.
//!
//! Rays are extremals of the energy `E = F^2 / 2`. Writing the
//! Euler-Lagrange equations in terms of the fundamental tensor gives the
//! linear system
//!
//! ```text
//! g_ij(x, v) a_j = dE/dx_i - (d^2 E / dv_i dx_k) v_k
//! ```
//!
//! for the acceleration `a = dv/dt`. Energy extremals are automatically
//! constant-speed, so integrating with the start normalized to `F = 1` keeps
//! the non-affine correction term of the general geodesic equation at zero;
//! periodic renormalization absorbs finite-difference drift.

use crate::consts::{CONDITION_LIMIT, MIN_DIRECTION_NORM};
use crate::error::{Error, Result};
use crate::fd::FdConfig;
use crate::field::{eval_metric, FinslerField};
use crate::linalg::{Matrix, Vector};

/// Instantaneous ray state. Under the unit-speed convention the metric value
/// along an integrated ray stays within drift tolerance of one.
#[derive(Debug, Clone, Copy)]
pub struct RayState {
    pub position: Vector,
    pub velocity: Vector,
    pub parameter: f64,
    /// Metric value `F(position, velocity)` measured when the sample was
    /// recorded.
    pub metric_value: f64,
}

impl RayState {
    pub fn new(position: Vector, velocity: Vector) -> Self {
        RayState {
            position,
            velocity,
            parameter: 0.0,
            metric_value: f64::NAN,
        }
    }
}

/// Why integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The ray left the configured bounding box.
    LeftDomain,
    /// The step budget ran out.
    MaxSteps,
    /// The fundamental tensor stopped being usable (lost positive
    /// definiteness, became too ill-conditioned, or the metric itself was
    /// undefined at a probed point).
    ConvexityFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::LeftDomain => "left_domain",
            Termination::MaxSteps => "max_steps",
            Termination::ConvexityFailure => "convexity_failure",
        }
    }
}

/// Axis-aligned integration domain.
#[derive(Debug, Clone, Copy)]
pub struct Domain {
    pub min: Vector,
    pub max: Vector,
}

impl Domain {
    pub fn centered_square(half_width: f64) -> Self {
        Domain {
            min: Vector::new2(-half_width, -half_width),
            max: Vector::new2(half_width, half_width),
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        (0..x.dim()).all(|i| x[i] >= self.min[i] && x[i] <= self.max[i])
    }
}

/// Fixed-step fourth-order Runge-Kutta configuration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub step: f64,
    pub max_steps: usize,
    /// Velocity is renormalized to unit metric speed every this many steps.
    pub renorm_every: usize,
    pub domain: Domain,
    pub fd: FdConfig,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-3,
            max_steps: 200_000,
            renorm_every: 16,
            domain: Domain::centered_square(10.0),
            fd: FdConfig::default(),
        }
    }
}

/// Integrated ray path with the reason it stopped.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<RayState>,
    pub termination: Termination,
    /// Human-readable detail for convexity failures.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn start(&self) -> &RayState {
        self.samples.first().expect("trajectory is never empty")
    }

    pub fn end(&self) -> &RayState {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn parameter_length(&self) -> f64 {
        self.end().parameter - self.start().parameter
    }

    /// Position at parameter `t` by linear interpolation between samples.
    pub fn position_at(&self, t: f64) -> Vector {
        let samples = &self.samples;
        if t <= samples[0].parameter {
            return samples[0].position;
        }
        if t >= samples[samples.len() - 1].parameter {
            return samples[samples.len() - 1].position;
        }
        let idx = samples.partition_point(|s| s.parameter <= t);
        let a = &samples[idx - 1];
        let b = &samples[idx];
        let span = b.parameter - a.parameter;
        let w = if span > 0.0 {
            (t - a.parameter) / span
        } else {
            0.0
        };
        a.position + (b.position - a.position).scale(w)
    }
}

/// Geodesic acceleration from the energy-form linear system. Errors when the
/// fundamental tensor is not positive definite or too ill-conditioned to
/// solve.
pub fn spray_acceleration<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<Vector> {
    let tensor = field.fundamental_tensor(x, y, cfg)?;
    let g = &tensor.entries;
    let condition = g.sym_condition_number();
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let rhs = field.spray_rhs(x, y, cfg)?;
    g.solve(&rhs).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
        limit: CONDITION_LIMIT,
    })
}

/// Residual of the fundamental-tensor route against the Christoffel route
/// for a direction-independent metric: for Riemann fields the geodesic
/// acceleration must equal `-Gamma^i_jk y^j y^k`, with the symbols obtained
/// from the tensor field by central differences.
pub fn riemann_reduction_check<G>(
    tensor_field: &G,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<f64>
where
    G: Fn(&Vector) -> Result<Matrix> + Sync,
{
    struct Borrowed<'a, G> {
        tensor: &'a G,
        dim: usize,
    }
    impl<G> FinslerField for Borrowed<'_, G>
    where
        G: Fn(&Vector) -> Result<Matrix> + Sync,
    {
        fn dim(&self) -> usize {
            self.dim
        }
        fn label(&self) -> &str {
            "reduction-check"
        }
        fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
            self.eval_squared(x, y).map(f64::sqrt)
        }
        fn eval_squared(&self, x: &Vector, y: &Vector) -> Result<f64> {
            crate::field::guard_direction(y)?;
            Ok((self.tensor)(x)?.quadratic_form(y))
        }
        fn fundamental_tensor(
            &self,
            x: &Vector,
            y: &Vector,
            _cfg: &FdConfig,
        ) -> Result<crate::field::MetricTensor> {
            let entries = (self.tensor)(x)?.symmetrized();
            crate::field::ensure_positive_definite(&entries, x, y)?;
            Ok(crate::field::MetricTensor {
                entries,
                base_point: *x,
                base_direction: *y,
                asymmetry: 0.0,
            })
        }
    }

    let field = Borrowed {
        tensor: tensor_field,
        dim: x.dim(),
    };
    let spray = spray_acceleration(&field, x, y, cfg)?;
    let christoffel = christoffel_contraction(tensor_field, x, y, cfg)?;
    Ok((spray + christoffel).norm())
}

/// `Gamma^i_jk y^j y^k` with Christoffel symbols from central differences of
/// the tensor field.
pub fn christoffel_contraction(
    tensor_field: &dyn Fn(&Vector) -> Result<Matrix>,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<Vector> {
    let d = x.dim();
    let h = cfg.step_x(x);
    let g = tensor_field(x)?;

    // dg[k] holds the derivative of the tensor along coordinate k.
    let mut dg = Vec::with_capacity(d);
    for k in 0..d {
        let mut xp = *x;
        xp[k] += h;
        let mut xm = *x;
        xm[k] -= h;
        let gp = tensor_field(&xp)?;
        let gm = tensor_field(&xm)?;
        let mut der = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                der.set(i, j, (gp.get(i, j) - gm.get(i, j)) / (2.0 * h));
            }
        }
        dg.push(der);
    }

    // Lowered symbols contracted with y twice: G_l = Gamma_{l j k} y^j y^k.
    let mut lowered = Vector::zeros(d);
    for l in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            for k in 0..d {
                let gamma = 0.5 * (dg[k].get(l, j) + dg[j].get(l, k) - dg[l].get(j, k));
                s += gamma * y[j] * y[k];
            }
        }
        lowered[l] = s;
    }
    g.solve(&lowered).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
        limit: CONDITION_LIMIT,
    })
}

use crate::field::BranchView;

/// Result of advancing one step, which an interface crossing may cut short.
enum Advance {
    Step {
        position: Vector,
        velocity: Vector,
        dt: f64,
    },
    /// The ray reached an interface whose far side rejects it; it stops on
    /// the boundary.
    Blocked {
        position: Vector,
        velocity: Vector,
        dt: f64,
        error: Error,
    },
}

fn advance<F: FinslerField + ?Sized>(
    field: &F,
    interfaces: &[f64],
    x: &Vector,
    v: &Vector,
    h: f64,
    fd: &FdConfig,
) -> Result<Advance> {
    if interfaces.is_empty() {
        let (position, velocity) = rk4_step(field, x, v, h, fd)?;
        return Ok(Advance::Step {
            position,
            velocity,
            dt: h,
        });
    }

    // Integrate the smooth flow of the starting side; its formulas extend
    // past the boundary, so stages and stencils stay consistent.
    let locked = BranchView { field, branch: *x };
    let (raw_position, raw_velocity) = rk4_step(&locked, x, v, h, fd)?;

    let Some((fraction, radius)) = first_chord_crossing(x, &raw_position, interfaces) else {
        return Ok(Advance::Step {
            position: raw_position,
            velocity: raw_velocity,
            dt: h,
        });
    };

    let chord = raw_position - *x;
    let at_interface = {
        let raw = *x + chord.scale(fraction);
        raw.scale(radius / raw.norm())
    };
    let velocity_in = *v + (raw_velocity - *v).scale(fraction);
    let dt = fraction * h;
    let inward = x.norm() > radius;
    match refract_across(field, &at_interface, &velocity_in, inward, fd) {
        Ok((position, velocity)) => Ok(Advance::Step {
            position,
            velocity,
            dt,
        }),
        Err(error) => Ok(Advance::Blocked {
            position: at_interface,
            velocity: velocity_in,
            dt,
            error,
        }),
    }
}

/// Earliest fraction along the chord `a -> b` at which it crosses one of the
/// given circles, with the radius crossed.
fn first_chord_crossing(a: &Vector, b: &Vector, radii: &[f64]) -> Option<(f64, f64)> {
    let delta = *b - *a;
    let len2 = delta.norm_squared();
    if len2 == 0.0 {
        return None;
    }
    let mut best: Option<(f64, f64)> = None;
    for &radius in radii {
        let f0 = a.norm_squared() - radius * radius;
        let f1 = b.norm_squared() - radius * radius;
        if f0 * f1 >= 0.0 {
            continue;
        }
        let half_b = a.dot(&delta);
        let disc = half_b * half_b - len2 * f0;
        if disc < 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        for root in [(-half_b - sq) / len2, (-half_b + sq) / len2] {
            if root > 0.0 && root < 1.0 {
                if best.is_none_or(|(s, _)| root < s) {
                    best = Some((root, radius));
                }
                break;
            }
        }
    }
    best
}

/// Crosses a declared metric discontinuity the way an impedance interface
/// refracts a ray: the tangential momentum and the metric speed are
/// conserved, and the normal momentum is re-solved on the far side. Falls
/// back to reflection when no transmitted solution exists.
fn refract_across<F: FinslerField + ?Sized>(
    field: &F,
    at_interface: &Vector,
    velocity_in: &Vector,
    inward: bool,
    fd: &FdConfig,
) -> Result<(Vector, Vector)> {
    const NUDGE: f64 = 1e-9;
    let outward_scale = 1.0 + NUDGE;
    let inward_scale = 1.0 - NUDGE;
    let (pre_scale, post_scale) = if inward {
        (outward_scale, inward_scale)
    } else {
        (inward_scale, outward_scale)
    };
    let pre_branch = at_interface.scale(pre_scale);
    let post_branch = at_interface.scale(post_scale);

    let g_minus = field
        .fundamental_tensor_branch(at_interface, velocity_in, fd, &pre_branch)?
        .entries;
    let g_plus = field
        .fundamental_tensor_branch(at_interface, velocity_in, fd, &post_branch)?
        .entries;
    if g_minus == g_plus {
        // Continuous crossing: nothing to refract.
        return Ok((post_branch, *velocity_in));
    }
    let speed_squared = g_minus.quadratic_form(velocity_in);
    let momentum = g_minus.matvec(velocity_in);

    let normal = at_interface.scale(1.0 / at_interface.norm());
    let tangent = Vector::new2(-normal[1], normal[0]);
    let p_tangent = momentum.dot(&tangent);
    let p_normal_in = momentum.dot(&normal);
    let singular = || Error::IllConditioned {
        condition: f64::INFINITY,
        limit: CONDITION_LIMIT,
    };
    let ginv_n = g_plus.solve(&normal).ok_or_else(singular)?;
    let ginv_t = g_plus.solve(&tangent).ok_or_else(singular)?;

    // p+ᵀ g+⁻¹ p+ = F² with the tangential component held fixed.
    let quad_a = normal.dot(&ginv_n);
    let quad_b = 2.0 * p_tangent * normal.dot(&ginv_t);
    let quad_c = p_tangent * p_tangent * tangent.dot(&ginv_t) - speed_squared;
    let disc = quad_b * quad_b - 4.0 * quad_a * quad_c;
    if disc < 0.0 {
        // Total internal reflection: flip the normal momentum, stay on the
        // starting side.
        let reflected = momentum - normal.scale(2.0 * p_normal_in);
        let velocity = g_minus.solve(&reflected).ok_or_else(singular)?;
        return Ok((pre_branch, velocity));
    }
    let sq = disc.sqrt();
    let roots = [
        (-quad_b - sq) / (2.0 * quad_a),
        (-quad_b + sq) / (2.0 * quad_a),
    ];
    let wanted_positive = p_normal_in >= 0.0;
    let p_normal = roots
        .into_iter()
        .filter(|r| (*r >= 0.0) == wanted_positive)
        .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    let Some(p_normal) = p_normal else {
        let reflected = momentum - normal.scale(2.0 * p_normal_in);
        let velocity = g_minus.solve(&reflected).ok_or_else(singular)?;
        return Ok((pre_branch, velocity));
    };
    let transmitted = tangent.scale(p_tangent) + normal.scale(p_normal);
    let velocity = g_plus.solve(&transmitted).ok_or_else(singular)?;
    Ok((post_branch, velocity))
}

/// Integrates a geodesic with fixed-step RK4. The start velocity is
/// normalized internally to unit metric speed; evaluation failures terminate
/// the ray gracefully with the failing state excluded, and declared metric
/// interfaces are crossed by refraction.
pub fn integrate<F: FinslerField + ?Sized>(
    field: &F,
    start: RayState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let interfaces = field.interface_radii();
    let speed = eval_metric(field, &start.position, &start.velocity)?;
    let mut position = start.position;
    let mut velocity = start.velocity.scale(1.0 / speed);
    let mut parameter = start.parameter;

    let mut samples = Vec::with_capacity(1024);
    samples.push(RayState {
        position,
        velocity,
        parameter,
        metric_value: 1.0,
    });

    let h = cfg.step;
    for step_index in 0..cfg.max_steps {
        match advance(field, &interfaces, &position, &velocity, h, &cfg.fd) {
            Ok(Advance::Step {
                position: new_position,
                velocity: new_velocity,
                dt,
            }) => {
                position = new_position;
                velocity = new_velocity;
                parameter += dt;
            }
            Ok(Advance::Blocked {
                position: boundary,
                velocity: boundary_velocity,
                dt,
                error,
            }) => {
                parameter += dt;
                let metric_value = field
                    .eval(&boundary, &boundary_velocity)
                    .unwrap_or(f64::NAN);
                samples.push(RayState {
                    position: boundary,
                    velocity: boundary_velocity,
                    parameter,
                    metric_value,
                });
                return Ok(Trajectory {
                    samples,
                    termination: Termination::ConvexityFailure,
                    failure: Some(error.to_string()),
                });
            }
            Err(err) => {
                return Ok(Trajectory {
                    samples,
                    termination: Termination::ConvexityFailure,
                    failure: Some(err.to_string()),
                });
            }
        }

        if cfg.renorm_every > 0 && (step_index + 1) % cfg.renorm_every == 0 {
            match eval_metric(field, &position, &velocity) {
                Ok(f) => velocity = velocity.scale(1.0 / f),
                Err(err) => {
                    return Ok(Trajectory {
                        samples,
                        termination: Termination::ConvexityFailure,
                        failure: Some(err.to_string()),
                    });
                }
            }
        }

        let metric_value = match eval_metric(field, &position, &velocity) {
            Ok(f) => f,
            Err(err) => {
                return Ok(Trajectory {
                    samples,
                    termination: Termination::ConvexityFailure,
                    failure: Some(err.to_string()),
                });
            }
        };
        samples.push(RayState {
            position,
            velocity,
            parameter,
            metric_value,
        });

        if !cfg.domain.contains(&position) {
            return Ok(Trajectory {
                samples,
                termination: Termination::LeftDomain,
                failure: None,
            });
        }
        if velocity.norm() < MIN_DIRECTION_NORM {
            return Ok(Trajectory {
                samples,
                termination: Termination::ConvexityFailure,
                failure: Some("velocity collapsed below the admissible norm".into()),
            });
        }
    }

    Ok(Trajectory {
        samples,
        termination: Termination::MaxSteps,
        failure: None,
    })
}

fn rk4_step<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    v: &Vector,
    h: f64,
    fd: &FdConfig,
) -> Result<(Vector, Vector)> {
    let a1 = spray_acceleration(field, x, v, fd)?;

    let x2 = *x + v.scale(0.5 * h);
    let v2 = *v + a1.scale(0.5 * h);
    let a2 = spray_acceleration(field, &x2, &v2, fd)?;

    let x3 = *x + v2.scale(0.5 * h);
    let v3 = *v + a2.scale(0.5 * h);
    let a3 = spray_acceleration(field, &x3, &v3, fd)?;

    let x4 = *x + v3.scale(h);
    let v4 = *v + a3.scale(h);
    let a4 = spray_acceleration(field, &x4, &v4, fd)?;

    let position = *x + (*v + (v2 + v3).scale(2.0) + v4).scale(h / 6.0);
    let velocity = *v + (a1 + (a2 + a3).scale(2.0) + a4).scale(h / 6.0);
    Ok((position, velocity))
}

/// Closest approach of the sampled polyline to a point, using exact
/// point-to-segment projection on every segment.
pub fn min_distance_to_point(trajectory: &Trajectory, p: &Vector) -> f64 {
    let mut best = f64::INFINITY;
    for pair in trajectory.samples.windows(2) {
        best = best.min(point_segment_distance(p, &pair[0].position, &pair[1].position));
    }
    if trajectory.samples.len() == 1 {
        best = trajectory.samples[0].position.distance(p);
    }
    best
}

fn point_segment_distance(p: &Vector, a: &Vector, b: &Vector) -> f64 {
    let ab = *b - *a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((*p - *a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.distance(&(*a + ab.scale(t)))
}

/// Lateral offset of a trajectory's final sample from a reference line, and
/// the angle between its final velocity and the reference direction.
pub fn deviation_metrics(
    trajectory: &Trajectory,
    line_point: &Vector,
    line_direction: &Vector,
) -> (f64, f64) {
    let unit = line_direction.scale(1.0 / line_direction.norm());
    let end = trajectory.end();
    let offset_vec = end.position - *line_point;
    let lateral = offset_vec.cross_z(&unit).abs();
    let v = end.velocity;
    let angle = v.cross_z(&unit).abs().atan2(v.dot(&unit));
    (lateral, angle.abs())
}

/// Maximum perpendicular distance of the trajectory samples from the line
/// through its own start along `direction`.
pub fn max_lateral_deviation(trajectory: &Trajectory, direction: &Vector) -> f64 {
    let unit = direction.scale(1.0 / direction.norm());
    let origin = trajectory.start().position;
    trajectory
        .samples
        .iter()
        .map(|s| (s.position - origin).cross_z(&unit).abs())
        .fold(0.0, f64::max)
}

/// Integrates the reverse ray from the final state and reports the largest
/// parameter-matched separation from the forward path. Reciprocal media
/// retrace to discretization accuracy; direction-dependent media need not.
pub fn retrace_deviation<F: FinslerField + ?Sized>(
    field: &F,
    forward: &Trajectory,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let end = forward.end();
    let reversed = integrate(field, RayState::new(end.position, -end.velocity), cfg)?;
    let total = forward.parameter_length();
    let mut worst: f64 = 0.0;
    for sample in &reversed.samples {
        let back_parameter = sample.parameter - reversed.start().parameter;
        if back_parameter > total {
            break;
        }
        let forward_position =
            forward.position_at(forward.end().parameter - back_parameter);
        worst = worst.max(sample.position.distance(&forward_position));
    }
    Ok(worst)
}
