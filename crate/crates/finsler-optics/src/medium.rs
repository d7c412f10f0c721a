//! From metric to material: direction-dependent refractive index,
//! impedance-matched permittivity and permeability, and the closed-form
//! cylindrical-cloak parameters they must reduce to for the non-directional
//! regime.

use crate::design::{BlendedShieldMetric, PointExpansionMap};
use crate::error::{Error, Result};
use crate::field::{eval_metric, FinslerField};
use crate::linalg::{sym_eigen_2x2, Matrix, Vector};

use std::f64::consts::TAU;

/// Refractive index `n(x, y) = F(x, y) / |y|`: the ratio of the designed
/// metric to the flat one. Independent of the direction's length.
pub fn refractive_index<F: FinslerField + ?Sized>(
    field: &F,
    x: &Vector,
    y: &Vector,
) -> Result<f64> {
    let value = eval_metric(field, x, y)?;
    Ok(value / y.norm())
}

/// Closed-form index of the cylindrical cloak for a direction given in polar
/// components `(y_r, y_theta)` at radius `r`:
/// `n = sqrt(k^2 y_r^2 + r'^2 y_theta^2) / sqrt(y_r^2 + r^2 y_theta^2)`.
///
/// Serves as the analytic oracle for [`refractive_index`] on the cloak field.
pub fn cylindrical_index(
    map: &PointExpansionMap,
    r: f64,
    y_r: f64,
    y_theta: f64,
) -> Result<f64> {
    if r <= map.shield_radius {
        return Err(Error::ShieldInterior {
            radius: r,
            shield_radius: map.shield_radius,
        });
    }
    if r > map.device_radius {
        return Err(Error::OutsideDomain {
            what: "r",
            value: r,
            lo: map.shield_radius,
            hi: map.device_radius,
        });
    }
    if y_r == 0.0 && y_theta == 0.0 {
        return Err(Error::DegenerateDirection {
            norm: 0.0,
            min: crate::consts::MIN_DIRECTION_NORM,
        });
    }
    let stretch = map.radial_stretch();
    let virtual_r = map.virtual_radius(r)?;
    let transformed = (stretch * y_r).hypot(virtual_r * y_theta);
    let flat = y_r.hypot(r * y_theta);
    Ok(transformed / flat)
}

/// Scalar non-reflection split: `n = sqrt(eps) sqrt(mu)` with
/// `sqrt(mu / eps) = C` gives `eps = n / C`, `mu = n C`.
pub fn impedance_match(n: f64, impedance: f64) -> (f64, f64) {
    (n / impedance, n * impedance)
}

/// Principal permittivity and permeability at a sample point, in the frame
/// spanned by the columns of `frame`.
#[derive(Debug, Clone)]
pub struct MaterialTensors {
    pub epsilon: [f64; 3],
    pub mu: [f64; 3],
    pub frame: Matrix,
}

impl MaterialTensors {
    /// Largest deviation of `sqrt(mu_i / eps_i)` from the target impedance.
    pub fn impedance_mismatch(&self, impedance: f64) -> f64 {
        (0..3)
            .map(|i| ((self.mu[i] / self.epsilon[i]).sqrt() - impedance).abs())
            .fold(0.0, f64::max)
    }
}

/// Inverts the transversality relation between principal indices and the
/// dielectric tensor: propagation along a principal axis is governed by the
/// material response in the two orthogonal axes, so
/// `n_i^2 = eps_j mu_k` (cyclic), which under the non-reflection condition
/// solves to `eps_i = n_j n_k / (C n_i)` and `mu = C^2 eps`.
pub fn principal_indices_to_materials(
    indices: [f64; 3],
    impedance: f64,
) -> Result<MaterialTensors> {
    if indices.iter().any(|&n| !n.is_finite() || n <= 0.0) {
        return Err(Error::MaterialSolve { indices });
    }
    let [nx, ny, nz] = indices;
    let eps = [
        ny * nz / (nx * impedance),
        nz * nx / (ny * impedance),
        nx * ny / (nz * impedance),
    ];
    if eps.iter().any(|&e| !e.is_finite() || e <= 0.0) {
        return Err(Error::MaterialSolve { indices });
    }
    let c2 = impedance * impedance;
    let mu = [eps[0] * c2, eps[1] * c2, eps[2] * c2];
    Ok(MaterialTensors {
        epsilon: eps,
        mu,
        frame: Matrix::identity(3),
    })
}

/// Closed-form cylindrical-cloak parameters in the `(r, theta, z)` principal
/// frame, obtained by running the index pipeline analytically for the linear
/// expansion map: principal indices `(k, r'/r, 1)` give
/// `eps_r = (r - R1)/r`, `eps_theta = r/(r - R1)`, `eps_z = k^2 (r - R1)/r`.
pub fn cylindrical_cloak_parameters(map: &PointExpansionMap, r: f64) -> Result<MaterialTensors> {
    let n_r = map.radial_stretch();
    let n_theta = map.virtual_radius(r).and_then(|v| {
        if r <= map.shield_radius {
            Err(Error::ShieldInterior {
                radius: r,
                shield_radius: map.shield_radius,
            })
        } else {
            Ok(v / r)
        }
    })?;
    if r > map.device_radius {
        return Err(Error::OutsideDomain {
            what: "r",
            value: r,
            lo: map.shield_radius,
            hi: map.device_radius,
        });
    }
    principal_indices_to_materials([n_r, n_theta, 1.0], 1.0)
}

/// Rectangular sampling grid, inclusive of both ends.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Grid points in row-major order: y rows ascending, x fastest.
    pub fn points(&self) -> Vec<Vector> {
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            let y = interp(self.y_min, self.y_max, iy, self.ny);
            for ix in 0..self.nx {
                let x = interp(self.x_min, self.x_max, ix, self.nx);
                pts.push(Vector::new2(x, y));
            }
        }
        pts
    }
}

fn interp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.5 * (lo + hi)
    } else {
        lo + (hi - lo) * i as f64 / (n - 1) as f64
    }
}

/// One exported material sample: scalar index along the bin direction plus
/// the principal material triple of the tensor frozen at that direction.
#[derive(Debug, Clone)]
pub struct MaterialFieldSample {
    pub position: Vector,
    pub direction_bin: f64,
    pub index: f64,
    pub materials: MaterialTensors,
}

/// Discretized material field with counts of samples that were clipped next
/// to the inner boundary or failed to evaluate.
#[derive(Debug)]
pub struct MaterialField {
    pub samples: Vec<MaterialFieldSample>,
    pub clipped: usize,
    pub failed: usize,
}

/// Samples the blended shield's material parameters over a grid and a set of
/// uniform direction bins (bin `b` at angle `2 pi b / bins`). Output order is
/// deterministic: row-major grid, ascending bins. Samples inside the guard
/// annulus next to the inner boundary are clipped (the tangential
/// permittivity diverges there); per-sample evaluation failures are counted
/// and skipped.
pub fn sample_material_field(
    blend: &BlendedShieldMetric,
    grid: &GridSpec,
    direction_bins: usize,
    impedance: f64,
    r_guard: f64,
) -> MaterialField {
    assert!(direction_bins >= 4, "need at least 4 direction bins");
    let shield_radius = blend.shield_radius();
    let guard_outer = shield_radius * (1.0 + r_guard);
    let mut samples = Vec::new();
    let mut clipped = 0;
    let mut failed = 0;

    for position in grid.points() {
        let r = position.norm();
        for b in 0..direction_bins {
            let theta = TAU * b as f64 / direction_bins as f64;
            let weight = blend.weight().evaluate(theta);
            if weight > 0.0 && r >= shield_radius && r < guard_outer {
                clipped += 1;
                continue;
            }
            let tensor = match blend.region_tensor(&position, theta) {
                Ok(t) => t,
                Err(_) => {
                    failed += 1;
                    continue;
                }
            };
            match materials_from_tensor(&tensor, &position, impedance) {
                Ok(materials) => {
                    let dir = Vector::new2(theta.cos(), theta.sin());
                    let index = tensor.quadratic_form(&dir).sqrt();
                    samples.push(MaterialFieldSample {
                        position,
                        direction_bin: theta,
                        index,
                        materials,
                    });
                }
                Err(_) => failed += 1,
            }
        }
    }
    MaterialField {
        samples,
        clipped,
        failed,
    }
}

/// Principal materials of a planar position tensor with a trivial out-of-
/// plane axis: eigen-decompose the in-plane block, order the axes so the
/// first aligns with the radial direction, take `n_i = sqrt(lambda_i)` and
/// `n_z = 1`, and invert the transversality relation.
pub fn materials_from_tensor(
    tensor: &Matrix,
    position: &Vector,
    impedance: f64,
) -> Result<MaterialTensors> {
    let ([l_a, l_b], angle) = sym_eigen_2x2(tensor.get(0, 0), tensor.get(0, 1), tensor.get(1, 1));
    if !(l_a > 0.0 && l_b > 0.0) {
        return Err(Error::NotPositiveDefinite {
            x: *position,
            y: Vector::zeros(2),
            eigenvalues: vec![l_b, l_a],
        });
    }
    // Eigenvector of l_a is (cos angle, sin angle). Pick the axis closest to
    // radial as the first principal direction.
    let (sin_a, cos_a) = angle.sin_cos();
    let axis_a = Vector::new2(cos_a, sin_a);
    let axis_b = Vector::new2(-sin_a, cos_a);
    let r = position.norm();
    let (radial_like, tangential_like, n_radial, n_tangential) = if r > 0.0 {
        let radial = position.scale(1.0 / r);
        if axis_a.dot(&radial).abs() >= axis_b.dot(&radial).abs() {
            (axis_a, axis_b, l_a.sqrt(), l_b.sqrt())
        } else {
            (axis_b, axis_a, l_b.sqrt(), l_a.sqrt())
        }
    } else {
        (axis_a, axis_b, l_a.sqrt(), l_b.sqrt())
    };

    let mut materials = principal_indices_to_materials([n_radial, n_tangential, 1.0], impedance)?;
    let mut frame = Matrix::identity(3);
    frame.set(0, 0, radial_like[0]);
    frame.set(1, 0, radial_like[1]);
    frame.set(0, 1, tangential_like[0]);
    frame.set(1, 1, tangential_like[1]);
    materials.frame = frame;
    Ok(materials)
}
