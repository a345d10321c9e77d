//! Dense vectors and square matrices of the two sizes the converter needs:
//! 4 for the state and 5 for the augmented affine system `[A b; 0 0]`.
//!
//! The only nontrivial routine is [`mat_exp`], which turns each affine mode
//! into an exact transition map between switching instants.

#![allow(clippy::needless_range_loop)]

use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<const N: usize>(pub [f64; N]);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<const N: usize>(pub [[f64; N]; N]);

pub type Vec4 = Vector<4>;
pub type Vec5 = Vector<5>;
pub type Mat4 = Matrix<4>;
pub type Mat5 = Matrix<5>;

impl<const N: usize> Vector<N> {
    pub const fn new(entries: [f64; N]) -> Self {
        Vector(entries)
    }

    pub const fn zeros() -> Self {
        Vector([0.0; N])
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Vector(self.0.map(f))
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl Vec4 {
    /// Homogeneous lift `(y, 1)` used with augmented transition matrices.
    pub fn lift(&self) -> Vec5 {
        let [a, b, c, d] = self.0;
        Vector([a, b, c, d, 1.0])
    }
}

impl Vec5 {
    /// First four entries.
    pub fn head(&self) -> Vec4 {
        let [a, b, c, d, _] = self.0;
        Vector([a, b, c, d])
    }
}

#[cfg(feature = "serde")]
impl<const N: usize> serde::Serialize for Vector<N> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter())
    }
}

impl<const N: usize> Default for Vector<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> From<[f64; N]> for Vector<N> {
    fn from(v: [f64; N]) -> Self {
        Vector(v)
    }
}

impl<const N: usize> Index<usize> for Vector<N> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const N: usize> IndexMut<usize> for Vector<N> {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<const N: usize> Add for Vector<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> AddAssign for Vector<N> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const N: usize> Sub for Vector<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Neg for Vector<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl<const N: usize> Mul<f64> for Vector<N> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.map(|x| x * s)
    }
}

impl<const N: usize> Matrix<N> {
    pub const fn from_rows(rows: [[f64; N]; N]) -> Self {
        Matrix(rows)
    }

    pub const fn zeros() -> Self {
        Matrix([[0.0; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: [f64; N]) -> Self {
        let mut m = Self::zeros();
        for i in 0..N {
            m.0[i][i] = d[i];
        }
        m
    }

    /// Entry at zero-based `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn row(&self, i: usize) -> Vector<N> {
        Vector(self.0[i])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..N)
            .map(|j| (0..N).map(|i| self.0[i][j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(mut self, s: f64) -> Self {
        self.0.iter_mut().flatten().for_each(|x| *x *= s);
        self
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    /// Matrix-vector product.
    pub fn mat_vec(&self, v: &Vector<N>) -> Vector<N> {
        let mut out = [0.0; N];
        for (o, row) in out.iter_mut().zip(self.0.iter()) {
            *o = row.iter().zip(v.0.iter()).map(|(a, b)| a * b).sum();
        }
        Vector(out)
    }

    /// Row vector times matrix, `l^T M`.
    pub fn vec_mat(&self, l: &Vector<N>) -> Vector<N> {
        let mut out = [0.0; N];
        for (i, row) in self.0.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(row.iter()) {
                *o += l.0[i] * a;
            }
        }
        Vector(out)
    }

    /// Solves `self * X = rhs` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot vanishes.
    fn solve(&self, rhs: &Self) -> Option<Self> {
        let mut a = self.0;
        let mut b = rhs.0;
        for col in 0..N {
            let pivot = (col..N)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap_or(col);
            if a[pivot][col] == 0.0 {
                return None;
            }
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in col + 1..N {
                let f = a[row][col] / a[col][col];
                if f == 0.0 {
                    continue;
                }
                for k in col..N {
                    a[row][k] -= f * a[col][k];
                }
                for k in 0..N {
                    b[row][k] -= f * b[col][k];
                }
            }
        }
        for col in (0..N).rev() {
            for k in 0..N {
                let mut s = b[col][k];
                for j in col + 1..N {
                    s -= a[col][j] * b[j][k];
                }
                b[col][k] = s / a[col][col];
            }
        }
        Some(Matrix(b))
    }
}

impl<const N: usize> Default for Matrix<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Index<(usize, usize)> for Matrix<N> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for Matrix<N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl<const N: usize> Add for Matrix<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Matrix<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Matrix<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [[0.0; N]; N];
        for i in 0..N {
            for k in 0..N {
                let a = self.0[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..N {
                    out[i][j] += a * rhs.0[k][j];
                }
            }
        }
        Matrix(out)
    }
}

impl<const N: usize> Mul<Vector<N>> for Matrix<N> {
    type Output = Vector<N>;
    fn mul(self, v: Vector<N>) -> Vector<N> {
        self.mat_vec(&v)
    }
}

/// Stacks an affine system `ẏ = A y + b` into the 5×5 generator `[A b; 0 0]`.
pub fn augment(a: &Mat4, b: &Vec4) -> Mat5 {
    let mut m = Mat5::zeros();
    for i in 0..4 {
        m.0[i][..4].copy_from_slice(&a.0[i]);
        m.0[i][4] = b.0[i];
    }
    m
}

/// Scaled-norm ceiling for the Padé kernel.
const SCALED_NORM_MAX: f64 = 0.5;
const PADE_DEGREE: usize = 6;

/// Coefficients of the diagonal `[6/6]` Padé approximant of `exp`.
fn pade_coefficients() -> [f64; PADE_DEGREE + 1] {
    let p = PADE_DEGREE as f64;
    let mut c = [1.0; PADE_DEGREE + 1];
    for k in 1..=PADE_DEGREE {
        let kf = k as f64;
        c[k] = c[k - 1] * (p - kf + 1.0) / (kf * (2.0 * p - kf + 1.0));
    }
    c
}

/// `exp(m * t)` by scaling and squaring around a `[6/6]` Padé kernel.
///
/// The argument is halved until its 1-norm is at most 0.5, where the kernel's
/// truncation error is below 1e-16, then the result is squared back.
pub fn mat_exp(m: &Mat5, t: f64) -> Result<Mat5> {
    expm(m, t)
}

pub(crate) fn expm<const N: usize>(m: &Matrix<N>, t: f64) -> Result<Matrix<N>> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::invalid(
            "t",
            "time step must be finite and non-negative",
            t,
        ));
    }
    if !m.is_finite() {
        return Err(Error::invalid(
            "M",
            "matrix entries must be finite",
            f64::NAN,
        ));
    }
    let mut x = m.scale(t);
    let mut norm = x.norm_1();
    if norm == 0.0 {
        return Ok(Matrix::identity());
    }
    let mut squarings = 0u32;
    while norm > SCALED_NORM_MAX {
        norm *= 0.5;
        squarings += 1;
    }
    x = x.scale(libm::ldexp(1.0, -(squarings as i32)));

    let c = pade_coefficients();
    let mut numer = Matrix::identity();
    let mut denom = Matrix::identity();
    let mut power = Matrix::identity();
    for (k, ck) in c.iter().enumerate().skip(1) {
        power = power * x;
        let term = power.scale(*ck);
        numer = numer + term;
        denom = if k % 2 == 0 {
            denom + term
        } else {
            denom - term
        };
    }
    // The denominator is within 0.5 of the identity in norm, so it is always
    // invertible; a vanishing pivot can only come from NaN contamination.
    let mut e =
        denom
            .solve(&numer)
            .ok_or(Error::invalid("M", "Padé denominator is singular", norm))?;
    for _ in 0..squarings {
        e = e * e;
    }
    Ok(e)
}
