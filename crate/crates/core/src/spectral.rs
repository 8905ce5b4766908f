//! Spectral decompositions of Hermitian and unitary matrices and the functional calculus built on them.

use faer::Side;
use num_traits::Float;

use crate::circle::CircleFunction;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{cis, cplx, czero, Real, C};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Fixed mixing angle for the Hermitian combination used to diagonalize unitaries.
const MIX_ANGLE: f64 = 0.713_479_155_119_827;

/// Eigenvalues with an orthonormal eigenbasis (columns of `basis`).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition<T: Real> {
    pub eigenvalues: Vec<C<T>>,
    pub basis: Matrix<T>,
}

impl<T: Real> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `basis * diag(values) * basis*`.
    pub fn synthesize(&self, values: &[C<T>]) -> Matrix<T> {
        let vd = self.basis.scale_cols(values);
        &vd * &self.basis.adjoint()
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.synthesize(&self.eigenvalues)
    }

    /// Relative Frobenius reconstruction error against `a`.
    pub fn reconstruction_error(&self, a: &Matrix<T>) -> T {
        let r = (&self.reconstruct() - a).frobenius();
        r / Float::max(a.frobenius(), T::min_positive_value())
    }

    /// Applies a scalar map to the eigenvalues.
    pub fn map(&self, mut f: impl FnMut(C<T>) -> Result<C<T>>) -> Result<Matrix<T>> {
        let vals = self.eigenvalues.iter().map(|z| f(*z)).collect::<Result<Vec<_>>>()?;
        Ok(self.synthesize(&vals))
    }

    /// Replaces every eigenvalue by the nearest entry of `reference`, which must lie within `tol`.
    ///
    /// Used when the exact spectrum is known and eigensolver noise would otherwise split
    /// coincident eigenvalues.
    pub fn snapped(&self, reference: &[C<T>], tol: T) -> Result<Self> {
        let mut eigenvalues = Vec::with_capacity(self.dim());
        for z in &self.eigenvalues {
            let near = reference
                .iter()
                .copied()
                .min_by(|a, b| (*a - *z).norm().partial_cmp(&(*b - *z).norm()).unwrap_or(std::cmp::Ordering::Equal))
                .ok_or_else(|| Error::Invalid("empty reference spectrum".into()))?;
            let dist = (near - *z).norm();
            if !(dist <= tol) {
                return Err(Error::Invalid(format!(
                    "eigenvalue is {:e} away from the reference spectrum",
                    dist.to_f64_lossy()
                )));
            }
            eigenvalues.push(near);
        }
        Ok(Self { eigenvalues, basis: self.basis.clone() })
    }

    /// Block-diagonal direct sum of decompositions, eigenvalues concatenated in block order.
    pub fn direct_sum(parts: &[&Self]) -> Self {
        let eigenvalues = parts.iter().flat_map(|p| p.eigenvalues.iter().copied()).collect();
        let blocks: Vec<&Matrix<T>> = parts.iter().map(|p| &p.basis).collect();
        Self { eigenvalues, basis: Matrix::block_diag(&blocks) }
    }

    /// `V* X W` for this decomposition `V` on the left and `right` on the right.
    pub fn to_coords(&self, x: &Matrix<T>, right: &Self) -> Matrix<T> {
        &(&self.basis.adjoint() * x) * &right.basis
    }

    /// `V X W*`, inverse of [`Self::to_coords`].
    pub fn from_coords(&self, x: &Matrix<T>, right: &Self) -> Matrix<T> {
        &(&self.basis * x) * &right.basis.adjoint()
    }
}

/// Hermitian eigendecomposition with real eigenvalues in ascending order.
pub fn eig_hermitian<T: Real>(a: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    eig_hermitian_with(a, T::lit(DEFAULT_TOL))
}

pub fn eig_hermitian_with<T: Real>(a: &Matrix<T>, tol: T) -> Result<SpectralDecomposition<T>> {
    a.ensure_finite()?;
    if !a.is_hermitian(tol) {
        return Err(Error::NotHermitian { defect: a.hermitian_defect().to_f64_lossy() });
    }
    hermitian_eig_raw(&a.hermitian_part())
}

pub(crate) fn hermitian_eig_raw<T: Real>(a: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    let n = a.dim();
    if n == 0 {
        return Ok(SpectralDecomposition { eigenvalues: vec![], basis: Matrix::zeros(0) });
    }
    let evd = a.as_faer().self_adjoint_eigen(Side::Lower).map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
    let eigenvalues = (0..n).map(|i| cplx(evd.S()[i].re, T::zero())).collect();
    Ok(SpectralDecomposition { eigenvalues, basis: Matrix::wrap(evd.U().to_owned()) })
}

/// Unitary eigendecomposition with unimodular eigenvalues sorted by argument.
pub fn eig_unitary<T: Real>(u: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    eig_unitary_with(u, T::lit(DEFAULT_TOL))
}

pub fn eig_unitary_with<T: Real>(u: &Matrix<T>, tol: T) -> Result<SpectralDecomposition<T>> {
    u.ensure_finite()?;
    let defect = u.unitary_defect();
    if defect > tol * Float::max(u.norm_bound(), T::one()) {
        return Err(Error::NotUnitary { defect: defect.to_f64_lossy() });
    }
    let n = u.dim();
    if n == 0 {
        return hermitian_eig_raw(u);
    }
    // Validation scale: Frobenius residual relative to ||U||_F = sqrt(n), with
    // headroom for accumulated rounding in the n-term inner products.
    let accept = Float::max(tol, T::epsilon() * T::lit(64.0) * Float::sqrt(T::lit(n as f64)));
    let d = joint_hermitian_route(u)?;
    if d.reconstruction_error(u) <= accept {
        return Ok(d);
    }
    let d = schur_route(u)?;
    let err = d.reconstruction_error(u);
    if err <= accept {
        Ok(d)
    } else {
        Err(Error::NoConvergence(format!("unitary eigenbasis residual {:e}", err.to_f64_lossy())))
    }
}

/// Diagonalizes `cos(φ)A + sin(φ)B` with `U = A + iB`, then splits clusters with the other angle.
fn joint_hermitian_route<T: Real>(u: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    let n = u.dim();
    let phi = T::lit(MIX_ANGLE);
    let rot = cis(-phi);
    // Herm(e^{-iφ}U) = cos φ A + sin φ B.
    let c = u.scale(rot).hermitian_part();
    let first = hermitian_eig_raw(&c)?;
    let mut basis = first.basis;
    let vals: Vec<T> = first.eigenvalues.iter().map(|z| z.re).collect();
    let scale = vals.iter().fold(T::one(), |m, v| Float::max(m, Float::abs(*v)));
    let gap = T::lit(1e-8) * scale;

    let mut uv = u * &basis;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && vals[end] - vals[end - 1] <= gap {
            end += 1;
        }
        if end - start > 1 {
            refine_cluster(&mut basis, &mut uv, start, end, rot)?;
        }
        start = end;
    }

    let mut pairs: Vec<(C<T>, usize)> = (0..n)
        .map(|j| {
            let z: C<T> = basis.col(j).iter().zip(uv.col(j)).fold(czero(), |acc, (v, w)| acc + v.conj() * w);
            (normalize_unit(z), j)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.arg().partial_cmp(&b.0.arg()).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let sorted = Matrix::from_fn(n, |i, j| basis.get(i, pairs[j].1));
    Ok(SpectralDecomposition { eigenvalues, basis: sorted })
}

fn refine_cluster<T: Real>(
    basis: &mut Matrix<T>,
    uv: &mut Matrix<T>,
    start: usize,
    end: usize,
    rot: C<T>,
) -> Result<()> {
    let k = end - start;
    // Compress U to the cluster, T = Vc* U Vc, and diagonalize the orthogonal Hermitian combination.
    let t = Matrix::from_fn(k, |a, b| dot(basis.col(start + a), uv.col(start + b)));
    let other = t.scale(rot * cplx(T::zero(), -T::one())).hermitian_part();
    let q = hermitian_eig_raw(&other)?.basis;
    for m in [basis, uv] {
        let old: Vec<Vec<C<T>>> = (start..end).map(|j| m.col(j).to_vec()).collect();
        for b in 0..k {
            let col = m.col_mut(start + b);
            for (i, slot) in col.iter_mut().enumerate() {
                *slot = (0..k).fold(czero(), |acc, a| acc + old[a][i] * q.get(a, b));
            }
        }
    }
    Ok(())
}

/// General complex eigensolver plus Gram-Schmidt inside near-degenerate clusters.
fn schur_route<T: Real>(u: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    let n = u.dim();
    let evd = u.as_faer().eigen().map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
    let mut pairs: Vec<(C<T>, usize)> = (0..n).map(|j| (normalize_unit(evd.S()[j]), j)).collect();
    pairs.sort_by(|a, b| a.0.arg().partial_cmp(&b.0.arg()).unwrap_or(std::cmp::Ordering::Equal));
    let mut cols: Vec<Vec<C<T>>> = pairs.iter().map(|p| (0..n).map(|i| evd.U()[(i, p.1)]).collect()).collect();
    let tol = T::lit(1e-8);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end].0 - pairs[end - 1].0).norm() <= tol {
            end += 1;
        }
        for j in start..end {
            for _ in 0..2 {
                for i in start..j {
                    let p = dot(&cols[i], &cols[j]);
                    let src = cols[i].clone();
                    for (x, y) in cols[j].iter_mut().zip(&src) {
                        *x = *x - *y * p;
                    }
                }
            }
            let nrm = Float::sqrt(cols[j].iter().fold(T::zero(), |a, z| a + z.norm_sqr()));
            if nrm <= T::epsilon() {
                return Err(Error::NoConvergence("rank-deficient eigenvector cluster".into()));
            }
            for x in cols[j].iter_mut() {
                *x = *x / nrm;
            }
        }
        start = end;
    }
    let basis = Matrix::from_fn(n, |i, j| cols[j][i]);
    Ok(SpectralDecomposition { eigenvalues: pairs.iter().map(|p| p.0).collect(), basis })
}

fn dot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter().zip(b).fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

fn normalize_unit<T: Real>(z: C<T>) -> C<T> {
    let r = z.norm();
    if r > T::zero() {
        z / r
    } else {
        cplx(T::one(), T::zero())
    }
}

/// `e^{iZ}` for Hermitian `Z`.
pub fn exp_i<T: Real>(z: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(exp_i_decomposed(z)?.0)
}

/// `e^{iZ}` together with its eigendecomposition inherited from `Z`.
pub fn exp_i_decomposed<T: Real>(z: &Matrix<T>) -> Result<(Matrix<T>, SpectralDecomposition<T>)> {
    let d = eig_hermitian(z)?;
    let eig = SpectralDecomposition { eigenvalues: d.eigenvalues.iter().map(|l| cis(l.re)).collect(), basis: d.basis };
    Ok((eig.reconstruct(), eig))
}

/// `φ(U)` for a unitary `U`.
pub fn functional_calculus<T: Real, F: CircleFunction<T> + ?Sized>(phi: &F, u: &Matrix<T>) -> Result<Matrix<T>> {
    let d = eig_unitary(u)?;
    d.map(|z| phi.value(z))
}

/// `f(A)` for Hermitian `A` and a real function.
pub fn hermitian_calculus<T: Real>(a: &Matrix<T>, f: impl Fn(T) -> T) -> Result<Matrix<T>> {
    let d = eig_hermitian(a)?;
    d.map(|z| Ok(cplx(f(z.re), T::zero())))
}
