//! Central finite differences for metric fields.
//!
//! Metric blends accept user-pluggable closures, so derivatives are numerical
//! throughout: the fundamental tensor is the direction-Hessian of the squared
//! metric, and the geodesic right-hand side needs position gradients and a
//! mixed position/direction Hessian of the energy `E = F^2 / 2`.

use crate::error::Result;
use crate::field::FinslerField;
use crate::linalg::{Matrix, Vector};

/// Finite-difference configuration. Steps are relative: the effective step at
/// a point scales with `max(1, norm)` so large coordinates do not starve the
/// difference of significant digits.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Relative step for direction derivatives.
    pub h_y: f64,
    /// Relative step for position derivatives.
    pub h_x: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            h_y: crate::consts::DEFAULT_FD_STEP_DIRECTION,
            h_x: crate::consts::DEFAULT_FD_STEP_POSITION,
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> bool {
        0.0 < self.h_y && self.h_y < 1.0 && 0.0 < self.h_x && self.h_x < 1.0
    }

    pub fn step_y(&self, y: &Vector) -> f64 {
        self.h_y * y.norm().max(1.0)
    }

    pub fn step_x(&self, x: &Vector) -> f64 {
        self.h_x * x.norm().max(1.0)
    }
}

fn shifted(v: &Vector, i: usize, h: f64) -> Vector {
    let mut out = *v;
    out[i] += h;
    out
}

/// Hessian of `F^2` with respect to the direction, by central differences.
/// Off-diagonal entries come from the four-point cross stencil, evaluated
/// once per pair and mirrored.
pub(crate) fn direction_hessian_of_squared<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<Matrix> {
    let d = y.dim();
    let h = cfg.step_y(y);
    let center = field.eval_squared(x, y)?;
    let mut hess = Matrix::zeros(d);

    for i in 0..d {
        let plus = field.eval_squared(x, &shifted(y, i, h))?;
        let minus = field.eval_squared(x, &shifted(y, i, -h))?;
        hess.set(i, i, (plus - 2.0 * center + minus) / (h * h));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let pp = field.eval_squared(x, &shifted(&shifted(y, i, h), j, h))?;
            let pm = field.eval_squared(x, &shifted(&shifted(y, i, h), j, -h))?;
            let mp = field.eval_squared(x, &shifted(&shifted(y, i, -h), j, h))?;
            let mm = field.eval_squared(x, &shifted(&shifted(y, i, -h), j, -h))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess.set(i, j, v);
            hess.set(j, i, v);
        }
    }
    Ok(hess)
}

/// Gradient of the energy `E = F^2 / 2` with respect to position.
pub(crate) fn position_gradient_of_energy<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<Vector> {
    let d = x.dim();
    let h = cfg.step_x(x);
    let mut grad = Vector::zeros(d);
    for i in 0..d {
        let plus = field.eval_squared(&shifted(x, i, h), y)?;
        let minus = field.eval_squared(&shifted(x, i, -h), y)?;
        grad[i] = 0.5 * (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Mixed Hessian `M[i][k] = d^2 E / (dy_i dx_k)` of the energy.
pub(crate) fn mixed_hessian_of_energy<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<Matrix> {
    let d = x.dim();
    let hx = cfg.step_x(x);
    let hy = cfg.step_y(y);
    let mut mixed = Matrix::zeros(d);
    for i in 0..d {
        for k in 0..d {
            let pp = field.eval_squared(&shifted(x, k, hx), &shifted(y, i, hy))?;
            let pm = field.eval_squared(&shifted(x, k, hx), &shifted(y, i, -hy))?;
            let mp = field.eval_squared(&shifted(x, k, -hx), &shifted(y, i, hy))?;
            let mm = field.eval_squared(&shifted(x, k, -hx), &shifted(y, i, -hy))?;
            mixed.set(i, k, 0.5 * (pp - pm - mp + mm) / (4.0 * hx * hy));
        }
    }
    Ok(mixed)
}

/// Central-difference Jacobian of a coordinate map.
pub(crate) fn jacobian_of_map(
    map: &dyn Fn(&Vector) -> Result<Vector>,
    x: &Vector,
    cfg: &FdConfig,
) -> Result<Matrix> {
    let d = x.dim();
    let h = cfg.step_x(x);
    let mut jac = Matrix::zeros(d);
    for j in 0..d {
        let plus = map(&shifted(x, j, h))?;
        let minus = map(&shifted(x, j, -h))?;
        for i in 0..d {
            jac.set(i, j, (plus[i] - minus[i]) / (2.0 * h));
        }
    }
    Ok(jac)
}
