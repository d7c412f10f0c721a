//! Small dense vectors and symmetric matrices for dimensions 2 and 3.
//!
//! Everything is stack-allocated and `Copy`; the geodesic integrator calls
//! into this module millions of times per ray fan, so no heap traffic is
//! allowed on the hot path.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

/// Spatial vector with runtime dimension 2 or 3. Unused components stay zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector {
    dim: usize,
    data: [f64; 3],
}

impl Vector {
    pub fn new2(x: f64, y: f64) -> Self {
        Vector { dim: 2, data: [x, y, 0.0] }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Vector { dim: 3, data: [x, y, z] }
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 2 || dim == 3);
        Vector { dim, data: [0.0; 3] }
    }

    /// Standard basis vector `e_i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.data[i] = 1.0;
        v
    }

    pub fn from_slice(dim: usize, s: &[f64]) -> Self {
        let mut v = Vector::zeros(dim);
        v.data[..dim].copy_from_slice(&s[..dim]);
        v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    pub fn norm_squared(&self) -> f64 {
        self.components().iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        (0..self.dim).map(|i| self.data[i] * other.data[i]).sum()
    }

    /// z-component of the cross product of two planar vectors.
    pub fn cross_z(&self, other: &Vector) -> f64 {
        self.data[0] * other.data[1] - self.data[1] * other.data[0]
    }

    pub fn scale(&self, s: f64) -> Vector {
        let mut out = *self;
        for c in out.data.iter_mut() {
            *c *= s;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }

    /// Distance between two points.
    pub fn distance(&self, other: &Vector) -> f64 {
        (*self - *other).norm()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim);
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.dim);
        &mut self.data[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(self, rhs: Vector) -> Vector {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for i in 0..3 {
            out.data[i] += rhs.data[i];
        }
        out
    }
}

impl AddAssign for Vector {
    fn add_assign(&mut self, rhs: Vector) {
        *self = *self + rhs;
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(self, rhs: Vector) -> Vector {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut out = self;
        for i in 0..3 {
            out.data[i] -= rhs.data[i];
        }
        out
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    fn mul(self, s: f64) -> Vector {
        self.scale(s)
    }
}

impl Neg for Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

/// Square matrix with runtime dimension 2 or 3, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: [[f64; 3]; 3],
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 2 || dim == 3);
        Matrix { dim, data: [[0.0; 3]; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i][i] = 1.0;
        }
        m
    }

    pub fn diagonal(dim: usize, d: &[f64]) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i][i] = d[i];
        }
        m
    }

    pub fn from_rows2(r0: [f64; 2], r1: [f64; 2]) -> Self {
        let mut m = Matrix::zeros(2);
        m.data[0][..2].copy_from_slice(&r0);
        m.data[1][..2].copy_from_slice(&r1);
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j] = v;
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.data[i][j].is_finite()))
    }

    pub fn matvec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.dim, v.dim());
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.data[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// `yᵀ M y`.
    pub fn quadratic_form(&self, y: &Vector) -> f64 {
        self.matvec(y).dot(y)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i][j] = self.data[j][i];
            }
        }
        out
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.data[i][k] * other.data[k][j];
                }
                out.data[i][j] = s;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.data[i][j] += other.data[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut out = *self;
        for row in out.data.iter_mut() {
            for c in row.iter_mut() {
                *c *= s;
            }
        }
        out
    }

    /// `AᵀMA`: congruence transform used for coordinate changes of tensors.
    pub fn congruence(&self, a: &Matrix) -> Matrix {
        a.transpose().mul(self).mul(a)
    }

    /// Largest absolute difference between `m_ij` and `m_ji`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.data[i][j] - self.data[j][i]).abs());
            }
        }
        worst
    }

    /// Averages off-diagonal pairs so the result is exactly symmetric.
    pub fn symmetrized(&self) -> Matrix {
        let mut out = *self;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let avg = 0.5 * (self.data[i][j] + self.data[j][i]);
                out.data[i][j] = avg;
                out.data[j][i] = avg;
            }
        }
        out
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.data;
        match self.dim {
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            _ => unreachable!(),
        }
    }

    /// Leading principal minors, used as the positive-definiteness test for
    /// symmetric matrices of dimension <= 3.
    pub fn leading_minors(&self) -> Vec<f64> {
        let m = &self.data;
        let mut minors = vec![m[0][0]];
        minors.push(m[0][0] * m[1][1] - m[0][1] * m[1][0]);
        if self.dim == 3 {
            minors.push(self.determinant());
        }
        minors
    }

    pub fn is_positive_definite(&self) -> bool {
        self.leading_minors().iter().all(|&m| m > 0.0)
    }

    /// Eigenvalues of a symmetric matrix, ascending. Closed form for d = 2,
    /// trigonometric solution of the characteristic cubic for d = 3.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let m = &self.data;
        match self.dim {
            2 => {
                let a = m[0][0];
                let b = 0.5 * (m[0][1] + m[1][0]);
                let c = m[1][1];
                let half_trace = 0.5 * (a + c);
                let disc = (0.5 * (a - c)).hypot(b);
                vec![half_trace - disc, half_trace + disc]
            }
            3 => {
                let a = self.symmetrized();
                let m = &a.data;
                let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
                if p1 == 0.0 {
                    let mut d = vec![m[0][0], m[1][1], m[2][2]];
                    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    return d;
                }
                let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
                let p2 = (m[0][0] - q).powi(2)
                    + (m[1][1] - q).powi(2)
                    + (m[2][2] - q).powi(2)
                    + 2.0 * p1;
                let p = (p2 / 6.0).sqrt();
                let mut b = Matrix::zeros(3);
                for i in 0..3 {
                    for j in 0..3 {
                        let centered = if i == j { m[i][j] - q } else { m[i][j] };
                        b.data[i][j] = centered / p;
                    }
                }
                let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let eig1 = q + 2.0 * p * phi.cos();
                let eig3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
                let eig2 = 3.0 * q - eig1 - eig3;
                let mut d = vec![eig3, eig2, eig1];
                d.sort_by(|x, y| x.partial_cmp(y).unwrap());
                d
            }
            _ => unreachable!(),
        }
    }

    /// Ratio of extreme symmetric eigenvalue magnitudes; `f64::INFINITY` for
    /// singular matrices.
    pub fn sym_condition_number(&self) -> f64 {
        let eigs = self.sym_eigenvalues();
        let max = eigs.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
        let min = eigs.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Solves `M a = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot vanishes.
    pub fn solve(&self, b: &Vector) -> Option<Vector> {
        let n = self.dim;
        let mut a = self.data;
        let mut rhs = [0.0; 3];
        rhs[..n].copy_from_slice(b.components());

        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
            if a[pivot_row][col].abs() == 0.0 {
                return None;
            }
            a.swap(col, pivot_row);
            rhs.swap(col, pivot_row);
            for row in (col + 1)..n {
                let factor = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }

        let mut x = [0.0; 3];
        for row in (0..n).rev() {
            let mut s = rhs[row];
            for k in (row + 1)..n {
                s -= a[row][k] * x[k];
            }
            if a[row][row] == 0.0 {
                return None;
            }
            x[row] = s / a[row][row];
        }
        Some(Vector::from_slice(n, &x))
    }
}

/// Orthonormal eigen-decomposition of a symmetric 2x2 block: returns
/// `(eigenvalues, rotation angle of the first eigenvector)`.
pub fn sym_eigen_2x2(a: f64, b: f64, c: f64) -> ([f64; 2], f64) {
    let half_trace = 0.5 * (a + c);
    let disc = (0.5 * (a - c)).hypot(b);
    let angle = 0.5 * (2.0 * b).atan2(a - c);
    ([half_trace + disc, half_trace - disc], angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn norm_and_dot() {
        let v = Vector::new2(3.0, 4.0);
        assert_relative_eq!(v.norm(), 5.0);
        let w = Vector::new3(1.0, 2.0, 2.0);
        assert_relative_eq!(w.norm(), 3.0);
        assert_relative_eq!(Vector::new2(1.0, 2.0).dot(&Vector::new2(3.0, -1.0)), 1.0);
    }

    #[test]
    fn solve_2x2_and_3x3() {
        let m = Matrix::from_rows2([2.0, 1.0], [1.0, 3.0]);
        let b = Vector::new2(5.0, 10.0);
        let x = m.solve(&b).unwrap();
        assert_relative_eq!(m.matvec(&x).distance(&b), 0.0, epsilon = 1e-12);

        let mut m3 = Matrix::identity(3);
        m3.set(0, 1, 0.5);
        m3.set(1, 0, 0.5);
        m3.set(2, 2, 4.0);
        let b3 = Vector::new3(1.0, -2.0, 8.0);
        let x3 = m3.solve(&b3).unwrap();
        assert_relative_eq!(m3.matvec(&x3).distance(&b3), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_solve_is_none() {
        let m = Matrix::from_rows2([1.0, 2.0], [2.0, 4.0]);
        assert!(m.solve(&Vector::new2(1.0, 1.0)).is_none());
    }

    #[test]
    fn eigenvalues_2x2() {
        let m = Matrix::from_rows2([2.0, 1.0], [1.0, 2.0]);
        let e = m.sym_eigenvalues();
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_3x3() {
        let m = Matrix::diagonal(3, &[1.0, 4.0, 9.0]);
        let e = m.sym_eigenvalues();
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(e[2], 9.0, epsilon = 1e-10);

        // Known spectrum: eigenvalues of [[2,1,0],[1,2,1],[0,1,2]] are 2, 2 ± sqrt(2).
        let mut t = Matrix::diagonal(3, &[2.0, 2.0, 2.0]);
        t.set(0, 1, 1.0);
        t.set(1, 0, 1.0);
        t.set(1, 2, 1.0);
        t.set(2, 1, 1.0);
        let e = t.sym_eigenvalues();
        assert_relative_eq!(e[0], 2.0 - 2.0_f64.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(e[1], 2.0, epsilon = 1e-10);
        assert_relative_eq!(e[2], 2.0 + 2.0_f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn minors_detect_indefinite() {
        let m = Matrix::from_rows2([1.0, 2.0], [2.0, 1.0]);
        assert!(!m.is_positive_definite());
        assert!(Matrix::identity(3).is_positive_definite());
    }

    #[test]
    fn eigen_frame_2x2() {
        let ([l1, l2], angle) = sym_eigen_2x2(2.0, 0.0, 1.0);
        assert_relative_eq!(l1, 2.0);
        assert_relative_eq!(l2, 1.0);
        assert_relative_eq!(angle, 0.0);
    }
}
