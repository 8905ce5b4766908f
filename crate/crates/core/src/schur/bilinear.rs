//! `S2 x S2 → S1` norms of bilinear Schur multipliers: slice supremum plus direct ascent.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::certify::{linear_norm_inf_with, CertifyOptions, NormCertificate};
use super::{apply_bilinear, Symbol3};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::random::{child_seed, random_matrix, rng_from_seed};
use crate::scalar::{cplx, czero, Real};

/// A bilinear map on `n x n` matrices together with its two partial adjoints.
///
/// `grad_x(C, Y)` is the `G` with `Re tr(C* B(X, Y)) = Re tr(G* X)` for every `X`, and
/// likewise `grad_y` for the second slot.
pub trait BilinearMap<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>>;
    fn grad_x(&self, c: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>>;
    fn grad_y(&self, c: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>>;
}

impl<T: Real> BilinearMap<T> for Symbol3<T> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        apply_bilinear(self, x, y)
    }

    fn grad_x(&self, c: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.n();
        Ok(Matrix::from_fn(n, |i, k| {
            (0..n).fold(czero(), |acc, j| acc + c.get(i, j) * (self.get(i, k, j) * y.get(k, j)).conj())
        }))
    }

    fn grad_y(&self, c: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.n();
        Ok(Matrix::from_fn(n, |k, j| {
            (0..n).fold(czero(), |acc, i| acc + c.get(i, j) * (self.get(i, k, j) * x.get(i, k)).conj())
        }))
    }
}

#[derive(Clone, Debug)]
pub struct BilinearAscent<T: Real> {
    pub value: T,
    pub x: Matrix<T>,
    pub y: Matrix<T>,
    pub iterations: usize,
}

fn normalized<T: Real>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let f = a.frobenius();
    (f > T::zero()).then(|| a.scale_real(T::one() / f))
}

/// `(‖A‖_1, polar(A))` from one SVD.
fn trace_norm_and_polar<T: Real>(a: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    let (u, s, v) = a.svd()?;
    Ok((s.iter().fold(T::zero(), |x, y| x + *y), &u * &v.adjoint()))
}

/// Rank-one unit pair followed by `starts - 1` Gaussian pairs.
pub fn default_bilinear_seeds<T: Real>(n: usize, starts: usize, seed: u64) -> Vec<(Matrix<T>, Matrix<T>)> {
    let mut e = Matrix::zeros(n);
    if n > 0 {
        e.set(0, 0, cplx(T::one(), T::zero()));
    }
    let mut out = vec![(e.clone(), e)];
    for s in 1..starts.max(1) {
        let mut rng = rng_from_seed(child_seed(seed, 1000 + s as u64));
        let x = random_matrix::<T>(n, &mut rng);
        let y = random_matrix::<T>(n, &mut rng);
        out.push((x, y));
    }
    out
}

/// Alternating ascent of `‖B(X, Y)‖_1` over `‖X‖_2 = ‖Y‖_2 = 1`; each half-step is an exact
/// maximization of the linearization, so the objective never decreases.
pub fn bilinear_ascent<T: Real, B: BilinearMap<T> + ?Sized>(
    map: &B,
    seeds: &[(Matrix<T>, Matrix<T>)],
    max_iter: usize,
) -> Result<BilinearAscent<T>> {
    let mut best: Option<BilinearAscent<T>> = None;
    for (x0, y0) in seeds {
        let (Some(mut x), Some(mut y)) = (normalized(x0), normalized(y0)) else {
            return Err(Error::Invalid("zero seed".into()));
        };
        let (mut val, mut c) = trace_norm_and_polar(&map.apply(&x, &y)?)?;
        let mut iterations = 0;
        for _ in 0..max_iter {
            iterations += 1;
            let Some(nx) = normalized(&map.grad_x(&c, &y)?) else { break };
            x = nx;
            c = trace_norm_and_polar(&map.apply(&x, &y)?)?.1;
            let Some(ny) = normalized(&map.grad_y(&c, &x)?) else { break };
            y = ny;
            let (nv, nc) = trace_norm_and_polar(&map.apply(&x, &y)?)?;
            c = nc;
            let gain = nv - val;
            val = nv;
            if gain <= T::lit(1e-13) * Float::max(val, T::one()) {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| val > b.value) {
            best = Some(BilinearAscent { value: val, x, y, iterations });
        }
    }
    best.ok_or_else(|| Error::Invalid("no seeds".into()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BilinearCertificate<T: Real> {
    /// Slice-supremum bracket: `max_k` of the per-slice lower and upper bounds.
    pub certificate: NormCertificate<T>,
    pub slices: Vec<NormCertificate<T>>,
    pub direct_lower: T,
    pub direct_witness: Vec<Matrix<T>>,
    /// `direct_lower <= certificate.upper + 1e-6`.
    pub consistent: bool,
}

pub fn bilinear_norm_221<T: Real>(m: &Symbol3<T>) -> Result<BilinearCertificate<T>> {
    bilinear_norm_221_with(m, &CertifyOptions::default(), 10)
}

pub fn bilinear_norm_221_with<T: Real>(
    m: &Symbol3<T>,
    opts: &CertifyOptions,
    direct_starts: usize,
) -> Result<BilinearCertificate<T>> {
    let n = m.n();
    let mut slices = Vec::with_capacity(n);
    for k in 0..n {
        let o = CertifyOptions { seed: child_seed(opts.seed, k as u64), ..opts.clone() };
        slices.push(linear_norm_inf_with(&m.slice(k), &o)?);
    }
    let arg = (0..n)
        .max_by(|a, b| slices[*a].lower.partial_cmp(&slices[*b].lower).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::Invalid("empty symbol".into()))?;
    let upper = slices.iter().fold(T::zero(), |a, c| Float::max(a, c.upper));
    let certificate = NormCertificate {
        lower: slices[arg].lower,
        upper,
        witness: slices[arg].witness.clone(),
        iterations: slices.iter().map(|c| c.iterations).sum(),
        method: vec!["slice-supremum".into(), format!("argmax-slice={arg}")],
        stalled: slices.iter().any(|c| c.stalled),
    };
    let seeds = default_bilinear_seeds(n, direct_starts, opts.seed);
    let direct = bilinear_ascent(m, &seeds, opts.max_iter)?;
    Ok(BilinearCertificate {
        consistent: direct.value <= upper + T::lit(1e-6),
        direct_lower: direct.value,
        direct_witness: vec![direct.x, direct.y],
        certificate,
        slices,
    })
}
