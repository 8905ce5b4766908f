//! Double and triple operator integrals for unitaries, computed in eigencoordinates.

use num_traits::Float;

use crate::circle::{CircleFunction, DividedDifferences, Sample};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{cplx, czero, Real, C};
use crate::schur::{bilinear_ascent, default_bilinear_seeds, BilinearMap, Symbol2, Symbol3};
use crate::spectral::{eig_unitary, exp_i, SpectralDecomposition};

/// Pairs `(z0_i, z2_j)` closer than this are summed directly with `dd2`.
const NEAR_PAIR: f64 = 1e-3;

/// `X ↦ V0 (Φ ∘ (V0* X V1)) V1*` with `Φ_ik = φ(z0_i, z1_k)`.
#[derive(Clone, Debug)]
pub struct DoubleOI<T: Real> {
    d0: SpectralDecomposition<T>,
    d1: SpectralDecomposition<T>,
    symbol: Symbol2<T>,
}

impl<T: Real> DoubleOI<T> {
    pub fn new(
        d0: &SpectralDecomposition<T>,
        d1: &SpectralDecomposition<T>,
        mut phi: impl FnMut(C<T>, C<T>) -> Result<C<T>>,
    ) -> Result<Self> {
        let (n0, n1) = (d0.dim(), d1.dim());
        if n0 != n1 {
            return Err(Error::DimMismatch { left: n0, right: n1 });
        }
        let mut m = Matrix::zeros(n0);
        for i in 0..n0 {
            for k in 0..n1 {
                m.set(i, k, phi(d0.eigenvalues[i], d1.eigenvalues[k])?);
            }
        }
        Ok(Self { d0: d0.clone(), d1: d1.clone(), symbol: Symbol2::new(m)? })
    }

    /// Symbol `f^{[1]}` evaluated on the two spectra.
    pub fn first_difference(
        f: &dyn CircleFunction<T>,
        d0: &SpectralDecomposition<T>,
        d1: &SpectralDecomposition<T>,
    ) -> Result<Self> {
        let dd = DividedDifferences::new(f);
        let s0 = samples(&dd, d0)?;
        let s1 = samples(&dd, d1)?;
        check_dim(s0.len(), s1.len())?;
        let m = Matrix::try_from_fn(s0.len(), |i, k| dd.dd1(&s0[i], &s1[k]))?;
        Ok(Self { d0: d0.clone(), d1: d1.clone(), symbol: Symbol2::new(m)? })
    }

    pub fn symbol(&self) -> &Symbol2<T> {
        &self.symbol
    }

    pub fn decompositions(&self) -> (&SpectralDecomposition<T>, &SpectralDecomposition<T>) {
        (&self.d0, &self.d1)
    }

    /// Eigencoordinate action `Φ ∘ X̃`.
    pub fn apply_coords(&self, xt: &Matrix<T>) -> Result<Matrix<T>> {
        self.symbol.as_matrix().hadamard(xt)
    }

    pub fn apply(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        check_dim(self.d0.dim(), x.dim())?;
        let xt = self.d0.to_coords(x, &self.d1);
        Ok(self.d0.from_coords(&self.apply_coords(&xt)?, &self.d1))
    }
}

fn check_dim(n: usize, d: usize) -> Result<()> {
    if n == d {
        Ok(())
    } else {
        Err(Error::DimMismatch { left: n, right: d })
    }
}

fn samples<T: Real, F: CircleFunction<T> + ?Sized>(
    dd: &DividedDifferences<'_, T, F>,
    d: &SpectralDecomposition<T>,
) -> Result<Vec<Sample<T>>> {
    d.eigenvalues.iter().map(|z| dd.sample(*z)).collect()
}

type Closure3<'a, T> = Box<dyn Fn(C<T>, C<T>, C<T>) -> Result<C<T>> + Sync + 'a>;

enum Kernel<'a, T: Real> {
    Closure(Closure3<'a, T>),
    /// `f^{[2]}` split as `(F1a_ik - F1b_kj) / (z0_i - z2_j)` away from the diagonal band.
    SecondDifference {
        dd: DividedDifferences<'a, T, dyn CircleFunction<T> + 'a>,
        s: [Vec<Sample<T>>; 3],
        f1a: Matrix<T>,
        f1b: Matrix<T>,
        /// `1/(z0_i - z2_j)` on far pairs, zero on near ones.
        inv_gap: Matrix<T>,
        near: Vec<(usize, usize)>,
        /// `dd2(z0_i, z1_k, z2_j)` for the near pairs, `k` fastest.
        near_vals: Vec<C<T>>,
    },
}

/// `(X, Y) ↦ V0 B_ψ(V0* X V1, V1* Y V2) V2*`, with `ψ` scaled by `w_k = z1_k` in the `ς` form.
pub struct TripleOI<'a, T: Real> {
    d: [SpectralDecomposition<T>; 3],
    kernel: Kernel<'a, T>,
    mid: Option<Vec<C<T>>>,
}

impl<'a, T: Real> TripleOI<'a, T> {
    pub fn new(
        d0: &SpectralDecomposition<T>,
        d1: &SpectralDecomposition<T>,
        d2: &SpectralDecomposition<T>,
        psi: impl Fn(C<T>, C<T>, C<T>) -> Result<C<T>> + Sync + 'a,
    ) -> Result<Self> {
        check_dim(d0.dim(), d1.dim())?;
        check_dim(d0.dim(), d2.dim())?;
        Ok(Self { d: [d0.clone(), d1.clone(), d2.clone()], kernel: Kernel::Closure(Box::new(psi)), mid: None })
    }

    /// Symbol `f^{[2]}` on the three spectra.
    pub fn second_difference(
        f: &'a dyn CircleFunction<T>,
        d0: &SpectralDecomposition<T>,
        d1: &SpectralDecomposition<T>,
        d2: &SpectralDecomposition<T>,
    ) -> Result<Self> {
        check_dim(d0.dim(), d1.dim())?;
        check_dim(d0.dim(), d2.dim())?;
        if f.smoothness() < crate::circle::Smoothness::C2 {
            return Err(Error::NotC2);
        }
        let n = d0.dim();
        let dd = DividedDifferences::new(f);
        let s = [samples(&dd, d0)?, samples(&dd, d1)?, samples(&dd, d2)?];
        let mut f1a = Matrix::zeros(n);
        let mut f1b = Matrix::zeros(n);
        for a in 0..n {
            for b in 0..n {
                f1a.set(a, b, dd.dd1_inner(&s[0][a], &s[1][b])?);
                f1b.set(a, b, dd.dd1_inner(&s[1][a], &s[2][b])?);
            }
        }
        let band = T::lit(NEAR_PAIR);
        let mut inv_gap = Matrix::zeros(n);
        let mut near = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let gap = s[0][i].z - s[2][j].z;
                if gap.norm() > band {
                    inv_gap.set(i, j, cplx(T::one(), T::zero()) / gap);
                } else {
                    near.push((i, j));
                }
            }
        }
        let mut near_vals = Vec::with_capacity(near.len() * n);
        for &(i, j) in &near {
            for k in 0..n {
                near_vals.push(dd.dd2(&s[0][i], &s[1][k], &s[2][j])?);
            }
        }
        Ok(Self {
            d: [d0.clone(), d1.clone(), d2.clone()],
            kernel: Kernel::SecondDifference { dd, s, f1a, f1b, inv_gap, near, near_vals },
            mid: None,
        })
    }

    /// Symbol `ς(z0, z1, z2) = z1 f^{[2]}(z0, z1, z2)`.
    pub fn varsigma(
        f: &'a dyn CircleFunction<T>,
        d0: &SpectralDecomposition<T>,
        d1: &SpectralDecomposition<T>,
        d2: &SpectralDecomposition<T>,
    ) -> Result<Self> {
        let mut t = Self::second_difference(f, d0, d1, d2)?;
        t.mid = Some(d1.eigenvalues.clone());
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.d[0].dim()
    }

    /// Replaces the middle weight; `None` gives the plain `f^{[2]}` symbol.
    pub fn set_middle_weight(&mut self, w: Option<Vec<C<T>>>) {
        self.mid = w;
    }

    pub fn decompositions(&self) -> &[SpectralDecomposition<T>; 3] {
        &self.d
    }

    fn base_entry(&self, i: usize, k: usize, j: usize) -> Result<C<T>> {
        match &self.kernel {
            Kernel::Closure(psi) => psi(self.d[0].eigenvalues[i], self.d[1].eigenvalues[k], self.d[2].eigenvalues[j]),
            Kernel::SecondDifference { dd, s, .. } => dd.dd2(&s[0][i], &s[1][k], &s[2][j]),
        }
    }

    /// `ψ(z0_i, z1_k, z2_j)` including the middle weight.
    pub fn entry(&self, i: usize, k: usize, j: usize) -> Result<C<T>> {
        let v = self.base_entry(i, k, j)?;
        Ok(match &self.mid {
            Some(w) => v * w[k],
            None => v,
        })
    }

    /// Materializes the full `n^3` symbol.
    pub fn symbol(&self) -> Result<Symbol3<T>> {
        Symbol3::try_from_fn(self.n(), |i, k, j| self.entry(i, k, j))
    }

    fn weighted(&self, b: &Matrix<T>) -> Matrix<T> {
        match &self.mid {
            Some(w) => b.scale_rows(w),
            None => b.clone(),
        }
    }

    /// `[Σ_k ψ_ikj a_ik b_kj]` for the unweighted kernel.
    fn contract(&self, a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.n();
        match &self.kernel {
            Kernel::Closure(_) => {
                let mut out = Matrix::zeros(n);
                let mut row = vec![czero::<T>(); n];
                for i in 0..n {
                    row.iter_mut().for_each(|r| *r = czero());
                    for k in 0..n {
                        let aik = a.get(i, k);
                        for (j, r) in row.iter_mut().enumerate() {
                            *r = *r + self.base_entry(i, k, j)? * aik * b.get(k, j);
                        }
                    }
                    for (j, r) in row.iter().enumerate() {
                        out.set(i, j, *r);
                    }
                }
                Ok(out)
            }
            Kernel::SecondDifference { f1a, f1b, inv_gap, near, near_vals, .. } => {
                let p = &f1a.hadamard(a)? * b;
                let q = a * &f1b.hadamard(b)?;
                let mut out = (&p - &q).hadamard(inv_gap)?;
                for (pi, &(i, j)) in near.iter().enumerate() {
                    let vals = &near_vals[pi * n..(pi + 1) * n];
                    let mut acc = czero();
                    for (k, v) in vals.iter().enumerate() {
                        acc = acc + *v * a.get(i, k) * b.get(k, j);
                    }
                    out.set(i, j, acc);
                }
                Ok(out)
            }
        }
    }

    /// `[Σ_j ψ_ikj p_ij b_kj]_{ik}` for the unweighted kernel.
    fn contract_x(&self, p: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.n();
        match &self.kernel {
            Kernel::Closure(_) => Ok(Matrix::try_from_fn(n, |i, k| {
                let mut acc = czero();
                for j in 0..n {
                    acc = acc + self.base_entry(i, k, j)? * p.get(i, j) * b.get(k, j);
                }
                Ok(acc)
            })?),
            Kernel::SecondDifference { f1a, f1b, inv_gap, near, near_vals, .. } => {
                let pg = p.hadamard(inv_gap)?;
                let mut out = &f1a.hadamard(&(&pg * &b.transpose()))? - &(&pg * &f1b.hadamard(b)?.transpose());
                for (pi, &(i, j)) in near.iter().enumerate() {
                    let vals = &near_vals[pi * n..(pi + 1) * n];
                    let pij = p.get(i, j);
                    for (k, v) in vals.iter().enumerate() {
                        let acc = out.get(i, k) + *v * pij * b.get(k, j);
                        out.set(i, k, acc);
                    }
                }
                Ok(out)
            }
        }
    }

    /// `[Σ_i ψ_ikj a_ik p_ij]_{kj}` for the unweighted kernel.
    fn contract_y(&self, p: &Matrix<T>, a: &Matrix<T>) -> Result<Matrix<T>> {
        let n = self.n();
        match &self.kernel {
            Kernel::Closure(_) => Ok(Matrix::try_from_fn(n, |k, j| {
                let mut acc = czero();
                for i in 0..n {
                    acc = acc + self.base_entry(i, k, j)? * a.get(i, k) * p.get(i, j);
                }
                Ok(acc)
            })?),
            Kernel::SecondDifference { f1a, f1b, inv_gap, near, near_vals, .. } => {
                let pg = p.hadamard(inv_gap)?;
                let mut out = &(&f1a.hadamard(a)?.transpose() * &pg) - &f1b.hadamard(&(&a.transpose() * &pg))?;
                for (pi, &(i, j)) in near.iter().enumerate() {
                    let vals = &near_vals[pi * n..(pi + 1) * n];
                    let pij = p.get(i, j);
                    for (k, v) in vals.iter().enumerate() {
                        let acc = out.get(k, j) + *v * a.get(i, k) * pij;
                        out.set(k, j, acc);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Eigencoordinate action `B_ψ(X̃, Ỹ)`, summed over `k` in ascending order.
    pub fn apply_coords(&self, xt: &Matrix<T>, yt: &Matrix<T>) -> Result<Matrix<T>> {
        check_dim(self.n(), xt.dim())?;
        check_dim(self.n(), yt.dim())?;
        self.contract(xt, &self.weighted(yt))
    }

    pub fn apply(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        let [d0, d1, d2] = &self.d;
        let xt = d0.to_coords(x, d1);
        let yt = d1.to_coords(y, d2);
        Ok(d0.from_coords(&self.apply_coords(&xt, &yt)?, d2))
    }

    /// Eigencoordinate adjoint in the first slot: `G_ik = Σ_j c_ij conj(ψ_ikj b_kj)`.
    pub fn grad_x_coords(&self, c: &Matrix<T>, bt: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.contract_x(&c.conj(), &self.weighted(bt))?.conj())
    }

    /// Eigencoordinate adjoint in the second slot: `G_kj = Σ_i c_ij conj(ψ_ikj a_ik)`.
    pub fn grad_y_coords(&self, c: &Matrix<T>, at: &Matrix<T>) -> Result<Matrix<T>> {
        let g = self.contract_y(&c.conj(), at)?.conj();
        Ok(match &self.mid {
            Some(w) => g.scale_rows(&w.iter().map(|z| z.conj()).collect::<Vec<_>>()),
            None => g,
        })
    }
}

impl<'a, T: Real> BilinearMap<T> for TripleOI<'a, T> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        TripleOI::apply(self, x, y)
    }

    fn grad_x(&self, c: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>> {
        let [d0, d1, d2] = &self.d;
        let ct = d0.to_coords(c, d2);
        let yt = d1.to_coords(y, d2);
        Ok(d0.from_coords(&self.grad_x_coords(&ct, &yt)?, d1))
    }

    fn grad_y(&self, c: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>> {
        let [d0, d1, d2] = &self.d;
        let ct = d0.to_coords(c, d2);
        let xt = d0.to_coords(x, d1);
        Ok(d1.from_coords(&self.grad_y_coords(&ct, &xt)?, d2))
    }
}

pub fn doi_apply<T: Real>(
    phi: impl FnMut(C<T>, C<T>) -> Result<C<T>>,
    u0: &Matrix<T>,
    u1: &Matrix<T>,
    x: &Matrix<T>,
) -> Result<Matrix<T>> {
    DoubleOI::new(&eig_unitary(u0)?, &eig_unitary(u1)?, phi)?.apply(x)
}

pub fn toi_apply<T: Real>(
    psi: impl Fn(C<T>, C<T>, C<T>) -> Result<C<T>> + Sync,
    u0: &Matrix<T>,
    u1: &Matrix<T>,
    u2: &Matrix<T>,
    x: &Matrix<T>,
    y: &Matrix<T>,
) -> Result<Matrix<T>> {
    TripleOI::new(&eig_unitary(u0)?, &eig_unitary(u1)?, &eig_unitary(u2)?, psi)?.apply(x, y)
}

/// `‖f(U0) - f(U1) - T^{U0,U1}_{f^{[1]}}(U0 - U1)‖_∞`.
pub fn first_order_identity_residual<T: Real>(f: &dyn CircleFunction<T>, u0: &Matrix<T>, u1: &Matrix<T>) -> Result<T> {
    let d0 = eig_unitary(u0)?;
    let d1 = eig_unitary(u1)?;
    let lhs = &d0.map(|z| f.value(z))? - &d1.map(|z| f.value(z))?;
    let rhs = DoubleOI::first_difference(f, &d0, &d1)?.apply(&(u0 - u1))?;
    (&lhs - &rhs).norm_inf()
}

fn i_times<T: Real>(a: &Matrix<T>) -> Matrix<T> {
    a.scale(cplx(T::zero(), T::one()))
}

/// `T^{U,U}_{f^{[1]}}(iZU)`, the derivative of `t ↦ f(e^{itZ}U)` at zero.
pub fn derivative_at_zero<T: Real>(f: &dyn CircleFunction<T>, u: &Matrix<T>, z: &Matrix<T>) -> Result<Matrix<T>> {
    let d = eig_unitary(u)?;
    derivative_at_zero_with(f, u, &d, z)
}

pub fn derivative_at_zero_with<T: Real>(
    f: &dyn CircleFunction<T>,
    u: &Matrix<T>,
    d: &SpectralDecomposition<T>,
    z: &Matrix<T>,
) -> Result<Matrix<T>> {
    check_dim(u.dim(), z.dim())?;
    DoubleOI::first_difference(f, d, d)?.apply(&i_times(&(z * u)))
}

/// `‖T^{U0,U2}_{f^{[1]}}(X) - T^{U1,U2}_{f^{[1]}}(X) - T^{U0,U1,U2}_{f^{[2]}}(U0 - U1, X)‖_∞`.
pub fn perturbation_identity_residual<T: Real>(
    f: &dyn CircleFunction<T>,
    u0: &Matrix<T>,
    u1: &Matrix<T>,
    u2: &Matrix<T>,
    x: &Matrix<T>,
) -> Result<T> {
    let d0 = eig_unitary(u0)?;
    let d1 = eig_unitary(u1)?;
    let d2 = eig_unitary(u2)?;
    let a = DoubleOI::first_difference(f, &d0, &d2)?.apply(x)?;
    let b = DoubleOI::first_difference(f, &d1, &d2)?.apply(x)?;
    let c = TripleOI::second_difference(f, &d0, &d1, &d2)?.apply(&(u0 - u1), x)?;
    (&(&a - &b) - &c).norm_inf()
}

/// Second-order Taylor remainder of `t ↦ f(e^{itZ}U)` at `t = 1` and its two operator-integral terms.
#[derive(Clone, Debug)]
pub struct TaylorRemainder<T: Real> {
    pub remainder: Matrix<T>,
    pub term_toi: Matrix<T>,
    pub term_doi: Matrix<T>,
}

impl<T: Real> TaylorRemainder<T> {
    pub fn residual(&self) -> Result<T> {
        (&(&self.remainder - &self.term_toi) - &self.term_doi).norm_inf()
    }
}

pub fn taylor_remainder<T: Real>(
    f: &dyn CircleFunction<T>,
    u: &Matrix<T>,
    z: &Matrix<T>,
) -> Result<TaylorRemainder<T>> {
    let d = eig_unitary(u)?;
    taylor_remainder_with(f, u, &d, z)
}

/// As [`taylor_remainder`] with a precomputed decomposition of `U`.
pub fn taylor_remainder_with<T: Real>(
    f: &dyn CircleFunction<T>,
    u: &Matrix<T>,
    d: &SpectralDecomposition<T>,
    z: &Matrix<T>,
) -> Result<TaylorRemainder<T>> {
    check_dim(u.dim(), z.dim())?;
    if !z.is_hermitian(T::lit(1e-10) * Float::max(z.norm_bound(), T::one())) {
        return Err(Error::NotHermitian { defect: z.hermitian_defect().to_f64_lossy() });
    }
    let uz = &exp_i(z)? * u;
    let dz = eig_unitary(&uz)?;
    let izu = i_times(&(z * u));
    let diff = &uz - u;
    let fu = d.map(|w| f.value(w))?;
    let fuz = dz.map(|w| f.value(w))?;
    let deriv = DoubleOI::first_difference(f, d, d)?.apply(&izu)?;
    let remainder = &(&fuz - &fu) - &deriv;
    let term_toi = TripleOI::second_difference(f, &dz, d, d)?.apply(&diff, &izu)?;
    let term_doi = DoubleOI::first_difference(f, &dz, d)?.apply(&(&diff - &izu))?;
    Ok(TaylorRemainder { remainder, term_toi, term_doi })
}

/// `max_X ‖T^{F_m,U1}_φ(X) - T^{U0,U1}_φ(X)‖_∞` for each `F_m` in the sequence.
pub fn doi_continuity_check<T: Real>(
    phi: impl Fn(C<T>, C<T>) -> Result<C<T>>,
    u0: &Matrix<T>,
    u1: &Matrix<T>,
    sequence: &[Matrix<T>],
    tests: &[Matrix<T>],
) -> Result<Vec<T>> {
    let d1 = eig_unitary(u1)?;
    let base = DoubleOI::new(&eig_unitary(u0)?, &d1, &phi)?;
    let refs = tests.iter().map(|x| base.apply(x)).collect::<Result<Vec<_>>>()?;
    sequence
        .iter()
        .map(|fm| {
            let t = DoubleOI::new(&eig_unitary(fm)?, &d1, &phi)?;
            tests
                .iter()
                .zip(&refs)
                .try_fold(T::zero(), |acc, (x, r)| Ok(Float::max(acc, (&t.apply(x)? - r).norm_inf()?)))
        })
        .collect()
}

/// Triple analogue of [`doi_continuity_check`], perturbing the first unitary.
pub fn toi_continuity_check<T: Real>(
    psi: impl Fn(C<T>, C<T>, C<T>) -> Result<C<T>> + Sync + Clone,
    u: [&Matrix<T>; 3],
    sequence: &[Matrix<T>],
    tests: &[(Matrix<T>, Matrix<T>)],
) -> Result<Vec<T>> {
    let d1 = eig_unitary(u[1])?;
    let d2 = eig_unitary(u[2])?;
    let base = TripleOI::new(&eig_unitary(u[0])?, &d1, &d2, psi.clone())?;
    let refs = tests.iter().map(|(x, y)| base.apply(x, y)).collect::<Result<Vec<_>>>()?;
    sequence
        .iter()
        .map(|fm| {
            let t = TripleOI::new(&eig_unitary(fm)?, &d1, &d2, psi.clone())?;
            tests
                .iter()
                .zip(&refs)
                .try_fold(T::zero(), |acc, ((x, y), r)| Ok(Float::max(acc, (&t.apply(x, y)? - r).norm_inf()?)))
        })
        .collect()
}

/// `|ascent(B_M) - ascent(T_ψ)|` from identical seeds, the second moved to the original coordinates.
pub fn bilinear_transfer_gap<T: Real>(t: &TripleOI<'_, T>, starts: usize, seed: u64, max_iter: usize) -> Result<T> {
    let m = t.symbol()?;
    let [d0, d1, d2] = t.decompositions();
    let seeds = default_bilinear_seeds::<T>(t.n(), starts, seed);
    let a = bilinear_ascent(&m, &seeds, max_iter)?;
    let moved: Vec<_> = seeds.iter().map(|(x, y)| (d0.from_coords(x, d1), d1.from_coords(y, d2))).collect();
    let b = bilinear_ascent(t, &moved, max_iter)?;
    Ok(Float::abs(a.value - b.value))
}

/// Best `‖B(W, W)‖_1` over self-adjoint `W` with `‖W‖_2 = 1`.
#[derive(Clone, Debug)]
pub struct SelfAdjointAscent<T: Real> {
    pub value: T,
    pub w: Matrix<T>,
    pub iterations: usize,
}

/// Projected ascent on the unit Hilbert-Schmidt sphere of self-adjoint matrices.
///
/// The step moves to the normalized Hermitian part of the gradient of `Re tr(C* B(W, W))`
/// with `C = polar(B(W, W))`; a step that lowers the objective is halved towards `W` until it
/// does not, so the recorded value is monotone.
pub fn selfadjoint_ascent<T: Real, B: BilinearMap<T> + ?Sized>(
    map: &B,
    seeds: &[Matrix<T>],
    max_iter: usize,
) -> Result<SelfAdjointAscent<T>> {
    let value_of = |w: &Matrix<T>| -> Result<(T, Matrix<T>)> {
        let (u, s, v) = map.apply(w, w)?.svd()?;
        Ok((s.iter().fold(T::zero(), |a, b| a + *b), &u * &v.adjoint()))
    };
    let unit = |a: Matrix<T>| -> Option<Matrix<T>> {
        let h = a.hermitian_part();
        let f = h.frobenius();
        (f > T::zero()).then(|| h.scale_real(T::one() / f))
    };
    let mut best: Option<SelfAdjointAscent<T>> = None;
    for seed in seeds {
        let Some(mut w) = unit(seed.clone()) else {
            return Err(Error::Invalid("zero seed".into()));
        };
        let (mut val, mut c) = value_of(&w)?;
        let mut iterations = 0;
        for _ in 0..max_iter {
            iterations += 1;
            let g = &map.grad_x(&c, &w)? + &map.grad_y(&c, &w)?;
            let Some(target) = unit(g) else { break };
            let mut step = T::one();
            let mut accepted = None;
            for _ in 0..20 {
                let cand = unit(&w.scale_real(T::one() - step) + &target.scale_real(step));
                if let Some(cand) = cand {
                    let (v, cc) = value_of(&cand)?;
                    if v > val {
                        accepted = Some((cand, v, cc));
                        break;
                    }
                }
                step = step / T::lit(2.0);
            }
            let Some((nw, nv, nc)) = accepted else { break };
            let gain = nv - val;
            w = nw;
            val = nv;
            c = nc;
            if gain <= T::lit(1e-12) * Float::max(val, T::one()) {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| val > b.value) {
            best = Some(SelfAdjointAscent { value: val, w, iterations });
        }
    }
    best.ok_or_else(|| Error::Invalid("no seeds".into()))
}
