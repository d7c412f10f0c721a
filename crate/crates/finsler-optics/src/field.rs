//! Direction-dependent metric fields and the operations every other module
//! builds on: evaluation, the fundamental tensor, homogeneity checks, and
//! path length.
//!
//! A field assigns a positive length `F(x, y)` to each position `x` and
//! direction `y`, positively 1-homogeneous in the direction. Riemann metrics
//! are the special case where `F^2` is a quadratic form with coefficients
//! independent of direction.

use crate::consts::MIN_DIRECTION_NORM;
use crate::error::{Error, Result};
use crate::fd::{self, FdConfig};
use crate::linalg::{Matrix, Vector};

/// Checks the direction guard shared by all direction-dependent operations.
pub fn guard_direction(y: &Vector) -> Result<()> {
    let norm = y.norm();
    if !y.is_finite() || norm < MIN_DIRECTION_NORM {
        return Err(Error::DegenerateDirection {
            norm,
            min: MIN_DIRECTION_NORM,
        });
    }
    Ok(())
}

/// A positionally varying, direction-dependent length element.
///
/// Implementations are immutable after construction and safe to evaluate from
/// many threads. `eval_squared` exists because quadratic-form fields can skip
/// a square root / squaring round trip on the hot path.
pub trait FinslerField: Send + Sync {
    fn dim(&self) -> usize;

    fn label(&self) -> &str;

    /// `F(x, y)`; strictly positive for admissible directions.
    fn eval(&self, x: &Vector, y: &Vector) -> Result<f64>;

    /// `F(x, y)^2`.
    fn eval_squared(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.eval(x, y).map(|f| f * f)
    }

    /// Fundamental tensor at `(x, y)`. The default recovers it numerically as
    /// half the direction-Hessian of `F^2`; fields with a closed form
    /// override this.
    fn fundamental_tensor(&self, x: &Vector, y: &Vector, cfg: &FdConfig) -> Result<MetricTensor> {
        metric_tensor(self, x, y, cfg)
    }

    /// Right-hand side of the geodesic system in energy form:
    /// `rhs_i = dE/dx_i - (d^2 E / dy_i dx_k) y_k` with `E = F^2 / 2`.
    /// The default is fully finite-difference.
    fn spray_rhs(&self, x: &Vector, y: &Vector, cfg: &FdConfig) -> Result<Vector> {
        let grad = fd::position_gradient_of_energy(self, x, y, cfg)?;
        let mixed = fd::mixed_hessian_of_energy(self, x, y, cfg)?;
        Ok(grad - mixed.matvec(y))
    }

    /// Radii of declared concentric metric discontinuities, ascending. The
    /// ray integrator refracts across these instead of stepping through them
    /// blindly; difference stencils never straddle them.
    fn interface_radii(&self) -> Vec<f64> {
        Vec::new()
    }

    /// `F^2` evaluated on the smooth formula branch that applies at
    /// `branch_point`, even when `x` itself falls across a declared
    /// interface. Fields without interfaces ignore the branch point.
    fn eval_squared_branch(&self, x: &Vector, y: &Vector, branch_point: &Vector) -> Result<f64> {
        let _ = branch_point;
        self.eval_squared(x, y)
    }

    /// Fundamental tensor with the formula branch pinned to `branch_point`.
    /// The default differentiates the branch-locked squared metric.
    fn fundamental_tensor_branch(
        &self,
        x: &Vector,
        y: &Vector,
        cfg: &FdConfig,
        branch_point: &Vector,
    ) -> Result<MetricTensor> {
        metric_tensor(
            &BranchView {
                field: self,
                branch: *branch_point,
            },
            x,
            y,
            cfg,
        )
    }
}

/// View of a field with every evaluation pinned to the smooth formula branch
/// of one reference point. Keeps difference stencils and whole integration
/// steps from straddling a declared interface.
pub(crate) struct BranchView<'a, F: FinslerField + ?Sized> {
    pub field: &'a F,
    pub branch: Vector,
}

impl<F: FinslerField + ?Sized> FinslerField for BranchView<'_, F> {
    fn dim(&self) -> usize {
        self.field.dim()
    }
    fn label(&self) -> &str {
        self.field.label()
    }
    fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.eval_squared(x, y).map(f64::sqrt)
    }
    fn eval_squared(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.field.eval_squared_branch(x, y, &self.branch)
    }
    fn fundamental_tensor(&self, x: &Vector, y: &Vector, cfg: &FdConfig) -> Result<MetricTensor> {
        self.field.fundamental_tensor_branch(x, y, cfg, &self.branch)
    }
}

/// Fundamental tensor at a base point and direction, together with the
/// asymmetry of the raw difference stencil (a diagnostic; the stored entries
/// are already symmetrized).
#[derive(Debug, Clone)]
pub struct MetricTensor {
    pub entries: Matrix,
    pub base_point: Vector,
    pub base_direction: Vector,
    pub asymmetry: f64,
}

/// Strict evaluation: direction guard, then positivity/finiteness checks on
/// the result.
pub fn eval_metric<F: FinslerField + ?Sized>(field: &F, x: &Vector, y: &Vector) -> Result<f64> {
    guard_direction(y)?;
    let value = field.eval(x, y)?;
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::Evaluation {
            x: *x,
            y: *y,
            reason: format!("non-positive or non-finite metric value {value}"),
        });
    }
    Ok(value)
}

/// Fundamental tensor by central differences: half the direction-Hessian of
/// `F^2`, symmetrized, with a positive-definiteness check via leading
/// principal minors.
pub fn metric_tensor<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<MetricTensor> {
    guard_direction(y)?;
    let hessian = fd::direction_hessian_of_squared(field, x, y, cfg)?;
    let raw = hessian.scale(0.5);
    if !raw.is_finite() {
        return Err(Error::Evaluation {
            x: *x,
            y: *y,
            reason: "finite-difference overflow in direction Hessian".into(),
        });
    }
    let asymmetry = raw.asymmetry();
    let entries = raw.symmetrized();
    ensure_positive_definite(&entries, x, y)?;
    Ok(MetricTensor {
        entries,
        base_point: *x,
        base_direction: *y,
        asymmetry,
    })
}

pub(crate) fn ensure_positive_definite(g: &Matrix, x: &Vector, y: &Vector) -> Result<()> {
    if !g.is_positive_definite() {
        return Err(Error::NotPositiveDefinite {
            x: *x,
            y: *y,
            eigenvalues: g.sym_eigenvalues(),
        });
    }
    Ok(())
}

/// Relative homogeneity residual `|F(x, ly) - l F(x, y)| / (l F(x, y))`.
/// Zero means the scaling law holds exactly.
pub fn check_homogeneity<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    y: &Vector,
    lambda: f64,
) -> Result<f64> {
    if lambda <= 0.0 {
        return Err(Error::OutsideDomain {
            what: "lambda",
            value: lambda,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let base = eval_metric(field, x, y)?;
    let scaled = eval_metric(field, x, &y.scale(lambda))?;
    Ok((scaled - lambda * base).abs() / (lambda * base))
}

/// Length of a sampled path, plus the number of degenerate (zero
/// displacement) segments that were skipped.
#[derive(Debug, Clone, Copy)]
pub struct PathLength {
    pub length: f64,
    pub skipped_segments: usize,
}

/// Composite trapezoid over the sampled path: each segment contributes the
/// average of the metric applied to the chord at both endpoints, which is the
/// discrete form of `ds = F(x, dx)`.
pub fn path_length<F: FinslerField + ?Sized>(
    field: &F,
    samples: &[(f64, Vector)],
) -> Result<PathLength> {
    if samples.len() < 2 {
        return Err(Error::PathTooShort {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut length = 0.0;
    let mut skipped = 0;
    for pair in samples.windows(2) {
        let (_, a) = pair[0];
        let (_, b) = pair[1];
        let chord = b - a;
        if chord.norm() < MIN_DIRECTION_NORM {
            skipped += 1;
            continue;
        }
        let at_start = eval_metric(field, &a, &chord)?;
        let at_end = eval_metric(field, &b, &chord)?;
        length += 0.5 * (at_start + at_end);
    }
    Ok(PathLength {
        length,
        skipped_segments: skipped,
    })
}

// --- Concrete fields -------------------------------------------------------

/// Euclidean metric `F(x, y) = |y|`.
pub struct FlatMetric {
    dim: usize,
}

impl FlatMetric {
    pub fn new(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "supported dimensions are 2 and 3");
        FlatMetric { dim }
    }
}

/// Euclidean metric in dimension `d`.
pub fn flat_metric(dim: usize) -> FlatMetric {
    FlatMetric::new(dim)
}

impl FinslerField for FlatMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        "flat"
    }

    fn eval(&self, _x: &Vector, y: &Vector) -> Result<f64> {
        guard_direction(y)?;
        Ok(y.norm())
    }

    fn eval_squared(&self, _x: &Vector, y: &Vector) -> Result<f64> {
        guard_direction(y)?;
        Ok(y.norm_squared())
    }

    fn fundamental_tensor(&self, x: &Vector, y: &Vector, _cfg: &FdConfig) -> Result<MetricTensor> {
        guard_direction(y)?;
        Ok(MetricTensor {
            entries: Matrix::identity(self.dim),
            base_point: *x,
            base_direction: *y,
            asymmetry: 0.0,
        })
    }

    fn spray_rhs(&self, _x: &Vector, y: &Vector, _cfg: &FdConfig) -> Result<Vector> {
        Ok(Vector::zeros(y.dim()))
    }
}

type TensorFieldFn = Box<dyn Fn(&Vector) -> Result<Matrix> + Send + Sync>;

/// Riemann metric `F(x, y) = sqrt(yᵀ g(x) y)` from a pluggable tensor field.
pub struct RiemannMetric {
    dim: usize,
    label: String,
    tensor: TensorFieldFn,
}

impl RiemannMetric {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        tensor: impl Fn(&Vector) -> Result<Matrix> + Send + Sync + 'static,
    ) -> Self {
        assert!(dim == 2 || dim == 3, "supported dimensions are 2 and 3");
        RiemannMetric {
            dim,
            label: label.into(),
            tensor: Box::new(tensor),
        }
    }

    /// The defining tensor at `x`, checked symmetric positive definite.
    pub fn tensor_at(&self, x: &Vector) -> Result<Matrix> {
        let g = (self.tensor)(x)?;
        let g = g.symmetrized();
        ensure_positive_definite(&g, x, &Vector::zeros(self.dim))?;
        Ok(g)
    }
}

/// Riemann metric field from a tensor-valued closure.
pub fn riemann_metric(
    dim: usize,
    label: impl Into<String>,
    tensor: impl Fn(&Vector) -> Result<Matrix> + Send + Sync + 'static,
) -> RiemannMetric {
    RiemannMetric::new(dim, label, tensor)
}

impl FinslerField for RiemannMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.eval_squared(x, y).map(f64::sqrt)
    }

    fn eval_squared(&self, x: &Vector, y: &Vector) -> Result<f64> {
        guard_direction(y)?;
        let g = self.tensor_at(x)?;
        let q = g.quadratic_form(y);
        if !q.is_finite() || q <= 0.0 {
            return Err(Error::Evaluation {
                x: *x,
                y: *y,
                reason: format!("quadratic form produced {q}"),
            });
        }
        Ok(q)
    }

    fn fundamental_tensor(&self, x: &Vector, y: &Vector, _cfg: &FdConfig) -> Result<MetricTensor> {
        guard_direction(y)?;
        let entries = self.tensor_at(x)?;
        Ok(MetricTensor {
            entries,
            base_point: *x,
            base_direction: *y,
            asymmetry: 0.0,
        })
    }
}

/// Conformally flat metric `F(x, y) = n(x) |y|`: an isotropic refractive
/// index profile. When the gradient of `n` is supplied the geodesic
/// right-hand side is computed in closed form.
pub struct ConformalMetric {
    dim: usize,
    label: String,
    index: Box<dyn Fn(&Vector) -> f64 + Send + Sync>,
    index_gradient: Option<IndexGradientFn>,
}

type IndexGradientFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;

impl ConformalMetric {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        index: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(dim == 2 || dim == 3, "supported dimensions are 2 and 3");
        ConformalMetric {
            dim,
            label: label.into(),
            index: Box::new(index),
            index_gradient: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.index_gradient = Some(Box::new(gradient));
        self
    }

    fn index_at(&self, x: &Vector) -> Result<f64> {
        let n = (self.index)(x);
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::Evaluation {
                x: *x,
                y: Vector::zeros(self.dim),
                reason: format!("refractive index {n} is not positive"),
            });
        }
        Ok(n)
    }
}

impl FinslerField for ConformalMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        guard_direction(y)?;
        Ok(self.index_at(x)? * y.norm())
    }

    fn eval_squared(&self, x: &Vector, y: &Vector) -> Result<f64> {
        guard_direction(y)?;
        let n = self.index_at(x)?;
        Ok(n * n * y.norm_squared())
    }

    fn fundamental_tensor(&self, x: &Vector, y: &Vector, _cfg: &FdConfig) -> Result<MetricTensor> {
        guard_direction(y)?;
        let n = self.index_at(x)?;
        Ok(MetricTensor {
            entries: Matrix::identity(self.dim).scale(n * n),
            base_point: *x,
            base_direction: *y,
            asymmetry: 0.0,
        })
    }

    fn spray_rhs(&self, x: &Vector, y: &Vector, cfg: &FdConfig) -> Result<Vector> {
        match &self.index_gradient {
            Some(grad_fn) => {
                // E = n(x)^2 |y|^2 / 2:
                //   dE/dx_i            = n n_{,i} |y|^2
                //   (d^2E/dy_i dx_k) y_k = 2 n (grad n . y) y_i
                let n = self.index_at(x)?;
                let grad = grad_fn(x);
                let y2 = y.norm_squared();
                let gy = grad.dot(y);
                Ok(grad.scale(n * y2) - y.scale(2.0 * n * gy))
            }
            None => {
                let grad = fd::position_gradient_of_energy(self, x, y, cfg)?;
                let mixed = fd::mixed_hessian_of_energy(self, x, y, cfg)?;
                Ok(grad - mixed.matvec(y))
            }
        }
    }
}
