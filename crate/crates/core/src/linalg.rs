//! Dense matrices, Frobenius norms and the 2×2 ridge system.
//!
//! Everything here runs in `f64`. The only solver is the explicit adjugate
//! inverse of a 2×2 matrix; there is deliberately no general LU/QR path.

use crate::error::{Error, Result};
use crate::trit::Trit;

/// Dense row-major `rows × cols` matrix of finite weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dense `W · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }
}

/// Squared Frobenius distance `‖a − b‖²_F`.
pub fn frobenius_error_sq(a: &WeightMatrix, b: &WeightMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Frobenius distance `‖a − b‖_F`.
pub fn frobenius_error(a: &WeightMatrix, b: &WeightMatrix) -> Result<f64> {
    frobenius_error_sq(a, b).map(f64::sqrt)
}

/// The `d × 2` trit basis `S = [t1 t2]`, borrowed from two trit rows.
#[derive(Debug, Clone, Copy)]
pub struct Basis<'a> {
    t1: &'a [Trit],
    t2: &'a [Trit],
}

pub fn build_basis<'a>(t1: &'a [Trit], t2: &'a [Trit]) -> Result<Basis<'a>> {
    if t1.len() != t2.len() {
        return Err(Error::Dimension(format!(
            "basis columns of length {} and {}",
            t1.len(),
            t2.len()
        )));
    }
    Ok(Basis { t1, t2 })
}

impl<'a> Basis<'a> {
    /// Unchecked counterpart of [`build_basis`] for callers that already
    /// sliced both columns to the same length.
    pub(crate) fn from_valid(t1: &'a [Trit], t2: &'a [Trit]) -> Self {
        debug_assert_eq!(t1.len(), t2.len());
        Basis { t1, t2 }
    }

    pub fn len(&self) -> usize {
        self.t1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t1.is_empty()
    }

    pub fn column(&self, k: usize) -> &'a [Trit] {
        match k {
            0 => self.t1,
            1 => self.t2,
            _ => panic!("basis has two columns, asked for {k}"),
        }
    }

    pub fn get(&self, j: usize, k: usize) -> Trit {
        self.column(k)[j]
    }

    /// `SᵀS` as a 2×2 matrix.
    pub fn gram(&self) -> Mat2 {
        let (mut s11, mut s12, mut s22) = (0i64, 0i64, 0i64);
        for (&a, &b) in self.t1.iter().zip(self.t2) {
            let (a, b) = (a.value() as i64, b.value() as i64);
            s11 += a * a;
            s12 += a * b;
            s22 += b * b;
        }
        Mat2::new(s11 as f64, s12 as f64, s12 as f64, s22 as f64)
    }

    /// `Sᵀw`. Trits select, negate or skip; no multiplies.
    pub fn project(&self, w: &[f64]) -> [f64; 2] {
        let mut b = [0.0; 2];
        for ((&a, &c), &x) in self.t1.iter().zip(self.t2).zip(w) {
            b[0] = a.apply(b[0], x);
            b[1] = c.apply(b[1], x);
        }
        b
    }

    /// `S θ` evaluated at every row.
    pub fn combine(&self, theta: [f64; 2]) -> Vec<f64> {
        self.t1
            .iter()
            .zip(self.t2)
            .map(|(&a, &b)| combine_pair(theta, a, b))
            .collect()
    }
}

/// `α₁c₁ + α₂c₂`. Shared by every error evaluation so that the α-step and the
/// trit-step compute bit-identical approximations for the same pair.
#[inline]
pub fn combine_pair(alpha: [f64; 2], c1: Trit, c2: Trit) -> f64 {
    alpha[0] * c1.as_f64() + alpha[1] * c2.as_f64()
}

/// 2×2 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22)
            .sqrt()
    }

    pub fn scale(&self, c: f64) -> Mat2 {
        Mat2::new(self.a11 * c, self.a12 * c, self.a21 * c, self.a22 * c)
    }

    pub fn add_diagonal(&self, lambda: f64) -> Mat2 {
        Mat2::new(self.a11 + lambda, self.a12, self.a21, self.a22 + lambda)
    }

    /// `adj(A) / det(A)`. Only an exact zero determinant is rejected.
    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        if det == 0.0 {
            return Err(Error::Singular);
        }
        Ok(Mat2::new(self.a22, -self.a12, -self.a21, self.a11).scale(1.0 / det))
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }
}

/// Normal equations `(SᵀS + λI) θ = Sᵀw` of one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeSystem {
    gram: Mat2,
    /// `SᵀS + λI`.
    pub a: Mat2,
    /// `Sᵀw`.
    pub b: [f64; 2],
    pub lambda: f64,
    pub theta: Option<[f64; 2]>,
}

impl RidgeSystem {
    pub fn new(basis: &Basis<'_>, w: &[f64], lambda: f64) -> Result<Self> {
        if w.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "target of length {} against basis of length {}",
                w.len(),
                basis.len()
            )));
        }
        Ok(Self::from_parts(basis.gram(), basis.project(w), lambda))
    }

    pub fn from_parts(gram: Mat2, b: [f64; 2], lambda: f64) -> Self {
        Self {
            gram,
            a: gram.add_diagonal(lambda),
            b,
            lambda,
            theta: None,
        }
    }

    /// Same system with a different regularization strength.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self::from_parts(self.gram, self.b, lambda)
    }

    pub fn condition(&self) -> Result<f64> {
        condition_estimate(&self.a)
    }

    /// Solves and records `theta`.
    pub fn solve(&mut self) -> Result<[f64; 2]> {
        let theta = self.a.inverse()?.mul_vec(self.b);
        self.theta = Some(theta);
        Ok(theta)
    }
}

/// Closed-form ridge coefficients `(SᵀS + λI)⁻¹ Sᵀw`.
pub fn solve_ridge(basis: &Basis<'_>, w: &[f64], lambda: f64) -> Result<[f64; 2]> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda {lambda} < 0")));
    }
    RidgeSystem::new(basis, w, lambda)?.solve()
}

/// `‖A‖_F · ‖A⁻¹‖_F`, an upper bound on the spectral condition number.
pub fn condition_estimate(a: &Mat2) -> Result<f64> {
    Ok(a.frobenius_norm() * a.inverse()?.frobenius_norm())
}
