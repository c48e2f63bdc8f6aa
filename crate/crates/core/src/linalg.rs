//! Small fixed-size helpers: 2x2 matrices for monodromy products and a
//! spectral radius for the nonnegative transfer matrices of the oracles.

use nalgebra::DMatrix;
use std::ops::Mul;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// Transfer matrix of `J'' + K J = 0` over `duration` for constant `K <= 0`,
    /// acting on column vectors `(J, J')`.
    pub fn jacobi_block(curvature: f64, duration: f64) -> Self {
        let a = (-curvature).max(0.0).sqrt();
        if a == 0.0 {
            Mat2::new(1.0, duration, 0.0, 1.0)
        } else {
            let (s, c) = ((a * duration).sinh(), (a * duration).cosh());
            Mat2::new(c, s / a, a * s, c)
        }
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// `|det - 1|` relative to the size of the two products it cancels.
    pub fn unimodular_defect(&self) -> f64 {
        let scale = (self.0[0][0] * self.0[1][1]).abs() + (self.0[0][1] * self.0[1][0]).abs();
        (self.det() - 1.0).abs() / scale.max(1.0)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Spectral radius from the characteristic polynomial. Returns `None` when
    /// the eigenvalues are complex or repeated within `tol` of `|trace| = 2`
    /// (for unit determinant matrices this is the parabolic/elliptic case).
    pub fn real_spectral_radius(&self, tol: f64) -> Option<f64> {
        let tr = self.trace();
        let det = self.det();
        let disc = tr * tr - 4.0 * det;
        if disc <= tol {
            return None;
        }
        let root = disc.sqrt();
        Some(((tr.abs() + root) / 2.0).max((tr.abs() - root).abs() / 2.0))
    }

    /// Expanding eigenvector normalized to `(1, slope)`, when it exists and has
    /// a nonzero first component.
    pub fn expanding_slope(&self, tol: f64) -> Option<f64> {
        let tr = self.trace();
        let disc = tr * tr - 4.0 * self.det();
        if disc <= tol {
            return None;
        }
        let mu = if tr >= 0.0 {
            (tr + disc.sqrt()) / 2.0
        } else {
            (tr - disc.sqrt()) / 2.0
        };
        let [[a, b], [c, d]] = self.0;
        // (A - mu I) v = 0 with v = (1, s)
        if b.abs() > c.abs().max(1e-300) {
            Some((mu - a) / b)
        } else if (mu - d).abs() > 0.0 {
            Some(c / (mu - d))
        } else {
            None
        }
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = self.0;
        let b = rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// Spectral radius of a square matrix given row-major.
pub fn spectral_radius(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_block_has_unit_determinant() {
        let m = Mat2::jacobi_block(-4.0, 0.7) * Mat2::jacobi_block(0.0, 3.0);
        assert!((m.det() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_block_is_parabolic() {
        assert!(Mat2::jacobi_block(0.0, 1.0).real_spectral_radius(1e-12).is_none());
    }

    #[test]
    fn full_shift_radius() {
        let r = spectral_radius(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_curvature_slope_is_a() {
        let m = Mat2::jacobi_block(-1.0, 1.0);
        assert!((m.expanding_slope(1e-12).unwrap() - 1.0).abs() < 1e-12);
    }
}
