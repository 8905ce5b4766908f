//! Dense square complex matrices.

use std::ops::{Add, Mul, Neg, Sub};

use faer::Mat;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cone, cplx, czero, is_finite_c, Real, C};

/// Which Schatten norm to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schatten {
    /// Trace norm (sum of singular values).
    One,
    /// Hilbert-Schmidt (Frobenius) norm.
    Two,
    /// Operator norm (largest singular value).
    Inf,
}

/// Square `dim x dim` complex matrix backed by a column-major `faer` buffer.
#[derive(Clone, Debug)]
pub struct Matrix<T: Real> {
    inner: Mat<C<T>>,
}

impl<T: Real> PartialEq for Matrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|j| self.col(j) == other.col(j))
    }
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { inner: Mat::from_fn(n, n, |_, _| czero()) }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { cone() } else { czero() })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C<T>) -> Self {
        Self { inner: Mat::from_fn(n, n, f) }
    }

    pub fn try_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Result<C<T>>) -> Result<Self> {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in 0..n {
                m.set(i, j, f(i, j)?);
            }
        }
        Ok(m)
    }

    pub fn from_diag(d: &[C<T>]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { czero() })
    }

    pub fn from_real_diag(d: &[T]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { cplx(d[i], T::zero()) } else { czero() })
    }

    /// Builds from row-major rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<C<T>>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimMismatch { left: n, right: bad.len() });
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// Wraps a `faer` matrix, which must be square.
    pub fn from_faer(m: Mat<C<T>>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch { left: m.nrows(), right: m.ncols() });
        }
        Ok(Self { inner: m })
    }

    pub(crate) fn wrap(m: Mat<C<T>>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { inner: m }
    }

    pub fn as_faer(&self) -> &Mat<C<T>> {
        &self.inner
    }

    pub fn into_faer(self) -> Mat<C<T>> {
        self.inner
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.inner[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C<T>) {
        self.inner[(i, j)] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[C<T>] {
        self.inner.col_as_slice(j)
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [C<T>] {
        self.inner.col_as_slice_mut(j)
    }

    pub fn diag(&self) -> Vec<C<T>> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim()).all(|j| self.col(j).iter().all(|z| is_finite_c(*z)))
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::wrap(self.inner.adjoint().to_owned())
    }

    pub fn transpose(&self) -> Self {
        Self::wrap(self.inner.transpose().to_owned())
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, mut f: impl FnMut(C<T>) -> C<T>) -> Self {
        Self::from_fn(self.dim(), |i, j| f(self.get(i, j)))
    }

    pub fn scale(&self, s: C<T>) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.map(|z| z * s)
    }

    /// Entrywise (Schur) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self::from_fn(self.dim(), |i, j| self.get(i, j) * other.get(i, j)))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self::wrap(&self.inner * &other.inner))
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[C<T>]) -> Self {
        Self::from_fn(self.dim(), |i, j| d[i] * self.get(i, j))
    }

    /// `self * diag(d)`.
    pub fn scale_cols(&self, d: &[C<T>]) -> Self {
        Self::from_fn(self.dim(), |i, j| self.get(i, j) * d[j])
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim()).fold(czero(), |acc, i| acc + self.get(i, i))
    }

    /// `(A + A*)/2`.
    pub fn hermitian_part(&self) -> Self {
        let h = T::lit(0.5);
        Self::from_fn(self.dim(), |i, j| (self.get(i, j) + self.get(j, i).conj()) * h)
    }

    /// `(A - A*)/(2i)`, the Hermitian matrix `B` with `A = hermitian_part + iB`.
    pub fn anti_hermitian_part(&self) -> Self {
        let h = T::lit(0.5);
        Self::from_fn(self.dim(), |i, j| {
            let d = (self.get(i, j) - self.get(j, i).conj()) * h;
            cplx(d.im, -d.re)
        })
    }

    pub fn frobenius(&self) -> T {
        let mut s = T::zero();
        for j in 0..self.dim() {
            for z in self.col(j) {
                s = s + z.norm_sqr();
            }
        }
        Float::sqrt(s)
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for j in 0..self.dim() {
            for z in self.col(j) {
                m = Float::max(m, z.norm());
            }
        }
        m
    }

    /// Cheap upper bound on the operator norm: `sqrt(max col sum * max row sum)`.
    pub fn norm_bound(&self) -> T {
        let n = self.dim();
        let mut rows = vec![T::zero(); n];
        let mut col_max = T::zero();
        for j in 0..n {
            let mut s = T::zero();
            for (i, z) in self.col(j).iter().enumerate() {
                let a = z.norm();
                s = s + a;
                rows[i] = rows[i] + a;
            }
            col_max = Float::max(col_max, s);
        }
        let row_max = rows.into_iter().fold(T::zero(), Float::max);
        Float::sqrt(col_max * row_max)
    }

    fn scaled_tol(&self, tol: T) -> T {
        tol * Float::max(self.norm_bound(), T::one())
    }

    /// Largest entry of `A - A*`.
    pub fn hermitian_defect(&self) -> T {
        let n = self.dim();
        let mut m = T::zero();
        for i in 0..n {
            for j in i..n {
                m = Float::max(m, (self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        m
    }

    /// Largest entry of `A*A - I`.
    pub fn unitary_defect(&self) -> T {
        let g = Self::wrap(self.inner.adjoint() * &self.inner);
        let mut m = T::zero();
        for j in 0..self.dim() {
            for (i, z) in g.col(j).iter().enumerate() {
                let e = if i == j { *z - cone() } else { *z };
                m = Float::max(m, e.norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.hermitian_defect() <= self.scaled_tol(tol)
    }

    pub fn is_skew_hermitian(&self, tol: T) -> bool {
        let n = self.dim();
        let lim = self.scaled_tol(tol);
        (0..n).all(|i| (i..n).all(|j| (self.get(i, j) + self.get(j, i).conj()).norm() <= lim))
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.unitary_defect() <= self.scaled_tol(tol)
    }

    /// Singular values in nonincreasing order.
    pub fn singular_values(&self) -> Result<Vec<T>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        let s = self.inner.singular_values().map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
        Ok(s)
    }

    /// Full SVD `A = U diag(s) V*`, returned as `(U, s, V)`.
    pub fn svd(&self) -> Result<(Self, Vec<T>, Self)> {
        let svd = self.inner.svd().map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
        let n = self.dim();
        let s = (0..n).map(|i| svd.S()[i].re).collect();
        Ok((Self::wrap(svd.U().to_owned()), s, Self::wrap(svd.V().to_owned())))
    }

    pub fn schatten_norm(&self, p: Schatten) -> Result<T> {
        match p {
            Schatten::Two => Ok(self.frobenius()),
            Schatten::Inf => Ok(self.singular_values()?.first().copied().unwrap_or(T::zero())),
            Schatten::One => Ok(self.singular_values()?.into_iter().fold(T::zero(), |a, b| a + b)),
        }
    }

    pub fn norm_inf(&self) -> Result<T> {
        self.schatten_norm(Schatten::Inf)
    }

    pub fn norm_1(&self) -> Result<T> {
        self.schatten_norm(Schatten::One)
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(&self.matmul(other)? - &other.matmul(self)?)
    }

    /// Block diagonal matrix with the given blocks in order.
    pub fn block_diag(blocks: &[&Self]) -> Self {
        let n: usize = blocks.iter().map(|b| b.dim()).sum();
        let mut out = Self::zeros(n);
        let mut off = 0;
        for b in blocks {
            for j in 0..b.dim() {
                for i in 0..b.dim() {
                    out.set(off + i, off + j, b.get(i, j));
                }
            }
            off += b.dim();
        }
        out
    }

    /// Polar factor `U V*` of the SVD, i.e. the unitary closest to `self`.
    pub fn polar(&self) -> Result<Self> {
        let (u, _, v) = self.svd()?;
        u.matmul(&v.adjoint())
    }

    pub fn cast<S: Real>(&self) -> Matrix<S> {
        Matrix::from_fn(self.dim(), |i, j| {
            let z = self.get(i, j);
            cplx(S::lit(z.re.to_f64_lossy()), S::lit(z.im.to_f64_lossy()))
        })
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }

    pub fn to_json(&self) -> MatrixJson {
        let n = self.dim();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                re.push(z.re.to_f64_lossy());
                im.push(z.im.to_f64_lossy());
            }
        }
        MatrixJson { dim: n, re, im }
    }

    pub fn from_json(j: &MatrixJson) -> Result<Self> {
        let n = j.dim;
        if j.re.len() != n * n || j.im.len() != n * n {
            return Err(Error::DimMismatch { left: n * n, right: j.re.len().max(j.im.len()) });
        }
        let m = Self::from_fn(n, |r, c| cplx(T::lit(j.re[r * n + c]), T::lit(j.im[r * n + c])));
        m.ensure_finite()?;
        Ok(m)
    }
}

/// Row-major JSON form `{dim, re, im}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl<T: Real> Serialize for Matrix<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for Matrix<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        Matrix::from_json(&j).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Matrix::wrap(&self.inner + &rhs.inner)
    }
}

impl<T: Real> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Matrix::wrap(&self.inner - &rhs.inner)
    }
}

impl<T: Real> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch");
        Matrix::wrap(&self.inner * &rhs.inner)
    }
}

impl<T: Real> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|z| -z)
    }
}
