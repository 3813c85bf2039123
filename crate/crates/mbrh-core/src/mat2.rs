//! Small dense 2x2 complex matrix used for jump matrices and local solution
//! values.  The global linear algebra lives in `rhsolver::solve`; this type
//! only covers the pointwise operations the pipeline needs.

use crate::{c64, C64};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(a11: C64, a12: C64, a21: C64, a22: C64) -> Self {
        Mat2([[a11, a12], [a21, a22]])
    }

    pub fn identity() -> Self {
        Mat2::new(c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0))
    }

    pub fn zero() -> Self {
        Mat2::new(c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0))
    }

    /// Pauli matrix diag(1, -1).
    pub fn sigma3() -> Self {
        Mat2::new(c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0))
    }

    /// Pauli matrix [[0, -i], [i, 0]].
    pub fn sigma2() -> Self {
        Mat2::new(c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0))
    }

    /// Upper-triangular unipotent [[1, a], [0, 1]].
    pub fn upper(a: C64) -> Self {
        Mat2::new(c64(1.0, 0.0), a, c64(0.0, 0.0), c64(1.0, 0.0))
    }

    /// Lower-triangular unipotent [[1, 0], [a, 1]].
    pub fn lower(a: C64) -> Self {
        Mat2::new(c64(1.0, 0.0), c64(0.0, 0.0), a, c64(1.0, 0.0))
    }

    /// diag(d, 1/d), the sigma3 power of a scalar.
    pub fn diag_pow(d: C64) -> Self {
        Mat2::new(d, c64(0.0, 0.0), c64(0.0, 0.0), d.inv())
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn inv(&self) -> Mat2 {
        let d = self.det();
        Mat2::new(
            self.0[1][1] / d,
            -self.0[0][1] / d,
            -self.0[1][0] / d,
            self.0[0][0] / d,
        )
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for e in row.iter_mut() {
                *e *= s;
            }
        }
        out
    }

    /// Entrywise complex conjugate (no transpose).
    pub fn conj(&self) -> Mat2 {
        Mat2::new(
            self.0[0][0].conj(),
            self.0[0][1].conj(),
            self.0[1][0].conj(),
            self.0[1][1].conj(),
        )
    }

    pub fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
        *a * *b - *b * *a
    }

    /// Largest entry modulus.
    pub fn norm_max(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    /// Distance to the identity in the max-entry norm.
    pub fn dist_identity(&self) -> f64 {
        (*self - Mat2::identity()).norm_max()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(c64(-1.0, 0.0))
    }
}
