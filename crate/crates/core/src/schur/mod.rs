//! Linear and bilinear Schur multipliers and their norm certificates.

mod bilinear;
mod certify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{cplx, czero, is_finite_c, Real, C};

pub use bilinear::{
    bilinear_ascent, bilinear_norm_221, bilinear_norm_221_with, default_bilinear_seeds, BilinearAscent,
    BilinearCertificate, BilinearMap,
};
pub use certify::{
    ascend_from, factorization_bound, linear_norm_inf, linear_norm_inf_with, schur_lower_bound, AscentResult,
    CertifyOptions, NormCertificate, UpperMethod,
};

/// `n x n` family `m_ij` defining `X ↦ [m_ij x_ij]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol2<T: Real> {
    m: Matrix<T>,
}

impl<T: Real> Symbol2<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        m.ensure_finite()?;
        Ok(Self { m })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C<T>) -> Result<Self> {
        Self::new(Matrix::from_fn(n, f))
    }

    pub fn n(&self) -> usize {
        self.m.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C<T> {
        self.m.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.m
    }

    /// Entrywise product with `u_i conj(v_j)`.
    pub fn twisted(&self, u: &[C<T>], v: &[C<T>]) -> Self {
        Self { m: Matrix::from_fn(self.n(), |i, j| u[i] * self.get(i, j) * v[j].conj()) }
    }

    /// Principal restriction to the given indices.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self { m: Matrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b])) }
    }
}

/// `n x n x n` family `m_ikj` defining `(X, Y) ↦ [Σ_k m_ikj x_ik y_kj]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol3<T: Real> {
    n: usize,
    data: Vec<C<T>>,
}

impl<T: Real> Symbol3<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> C<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let v = f(i, k, j);
                    if !is_finite_c(v) {
                        return Err(Error::NonFinite);
                    }
                    data.push(v);
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Tries the fallible constructor used when the entries come from a function evaluation.
    pub fn try_from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> Result<C<T>>) -> Result<Self> {
        let mut data = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let v = f(i, k, j)?;
                    if !is_finite_c(v) {
                        return Err(Error::NonFinite);
                    }
                    data.push(v);
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize, j: usize) -> C<T> {
        self.data[(i * self.n + k) * self.n + j]
    }

    /// `M(k) = {m_ikj}_{i,j}`.
    pub fn slice(&self, k: usize) -> Symbol2<T> {
        Symbol2 { m: Matrix::from_fn(self.n, |i, j| self.get(i, k, j)) }
    }
}

pub fn apply_linear<T: Real>(m: &Symbol2<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
    m.m.hadamard(x)
}

pub fn apply_bilinear<T: Real>(m: &Symbol3<T>, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
    let n = m.n();
    for d in [x.dim(), y.dim()] {
        if d != n {
            return Err(Error::DimMismatch { left: n, right: d });
        }
    }
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = czero();
            for k in 0..n {
                acc = acc + m.get(i, k, j) * x.get(i, k) * y.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// JSON form of a symbol: `n` plus row-major real and imaginary parts.
///
/// Entries are ordered `(i, j)` for a `Symbol2` (length `n^2`) and `(i, k, j)` for a `Symbol3`
/// (length `n^3`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolJson {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// A parsed symbol of either order.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySymbol<T: Real> {
    Linear(Symbol2<T>),
    Bilinear(Symbol3<T>),
}

impl SymbolJson {
    pub fn parse<T: Real>(&self) -> Result<AnySymbol<T>> {
        let n = self.n;
        let len = self.re.len();
        if self.im.len() != len {
            return Err(Error::DimMismatch { left: len, right: self.im.len() });
        }
        let at = |p: usize| cplx(T::lit(self.re[p]), T::lit(self.im[p]));
        if len == n * n {
            Ok(AnySymbol::Linear(Symbol2::from_fn(n, |i, j| at(i * n + j))?))
        } else if len == n * n * n {
            Ok(AnySymbol::Bilinear(Symbol3::from_fn(n, |i, k, j| at((i * n + k) * n + j))?))
        } else {
            Err(Error::Invalid(format!("symbol of order n={n} cannot have {len} entries")))
        }
    }

    pub fn from_symbol2<T: Real>(m: &Symbol2<T>) -> Self {
        let j = m.as_matrix().to_json();
        Self { n: j.dim, re: j.re, im: j.im }
    }

    pub fn from_symbol3<T: Real>(m: &Symbol3<T>) -> Self {
        Self {
            n: m.n,
            re: m.data.iter().map(|z| z.re.to_f64_lossy()).collect(),
            im: m.data.iter().map(|z| z.im.to_f64_lossy()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_c, random_matrix, rng_from_seed};

    #[test]
    fn linear_examples() {
        let mut rng = rng_from_seed(30);
        let x = random_matrix::<f64>(4, &mut rng);
        let ones = Symbol2::from_fn(4, |_, _| cplx(1.0, 0.0)).unwrap();
        assert_eq!(apply_linear(&ones, &x).unwrap(), x);
        let delta = Symbol2::from_fn(4, |i, j| cplx(if i == j { 1.0 } else { 0.0 }, 0.0)).unwrap();
        let d = apply_linear(&delta, &x).unwrap();
        assert_eq!(d, Matrix::from_diag(&x.diag()));

        let m = Symbol2::new(random_matrix::<f64>(4, &mut rng)).unwrap();
        let mc = Symbol2::new(m.as_matrix().conj()).unwrap();
        let twice = apply_linear(&mc, &apply_linear(&m, &x).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = x.get(i, j) * m.get(i, j).norm_sqr();
                assert!((twice.get(i, j) - want).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn bilinear_examples() {
        let mut rng = rng_from_seed(31);
        let n = 3;
        let x = random_matrix::<f64>(n, &mut rng);
        let y = random_matrix::<f64>(n, &mut rng);
        let ones = Symbol3::from_fn(n, |_, _, _| cplx(1.0, 0.0)).unwrap();
        let p = apply_bilinear(&ones, &x, &y).unwrap();
        assert!((&p - &(&x * &y)).max_abs() < 1e-13);

        let a = random_matrix::<f64>(n, &mut rng);
        let b = random_matrix::<f64>(n, &mut rng);
        let sep = Symbol3::from_fn(n, |i, k, j| a.get(i, k) * b.get(k, j)).unwrap();
        let want = &a.hadamard(&x).unwrap() * &b.hadamard(&y).unwrap();
        assert!((&apply_bilinear(&sep, &x, &y).unwrap() - &want).max_abs() < 1e-12);

        let vals: Vec<C<f64>> = (0..27).map(|_| gaussian_c(&mut rng)).collect();
        let m = Symbol3::from_fn(n, |i, k, j| vals[i * 9 + k * 3 + j]).unwrap();
        let got = apply_bilinear(&m, &x, &y).unwrap();
        // Independent loop order: accumulate over k outermost.
        let mut oracle = vec![vec![czero::<f64>(); n]; n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    oracle[i][j] += vals[i * 9 + k * 3 + j] * x.get(i, k) * y.get(k, j);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!((got.get(i, j) - oracle[i][j]).norm() < 1e-13);
            }
        }
        assert_eq!(m.slice(1).get(2, 0), vals[2 * 9 + 3]);
    }

    #[test]
    fn json_dispatch() {
        let j = SymbolJson { n: 2, re: vec![1.0; 8], im: vec![0.0; 8] };
        assert!(matches!(j.parse::<f64>().unwrap(), AnySymbol::Bilinear(_)));
        let j = SymbolJson { n: 2, re: vec![1.0; 4], im: vec![0.0; 4] };
        assert!(matches!(j.parse::<f64>().unwrap(), AnySymbol::Linear(_)));
        let j = SymbolJson { n: 2, re: vec![1.0; 5], im: vec![0.0; 5] };
        assert!(j.parse::<f64>().is_err());
    }
}
