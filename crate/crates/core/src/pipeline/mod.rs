//! Finite blocks of the unbounded-remainder construction: commutator pair, conjugate pair,
//! unitary blocks, the self-adjoint witness, the scaling ladder, and the divergence bookkeeping.

pub mod report;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circle::{eval_h, make_f, make_g, CircleFunction, HFunction};
use crate::error::{Error, Result};
use crate::integrals::{selfadjoint_ascent, taylor_remainder_with, TripleOI};
use crate::matrix::Matrix;
use crate::random::{child_seed, gaussian_c, random_hermitian, rng_from_seed};
use crate::scalar::{cis, cplx, czero, C};
use crate::schur::{factorization_bound, schur_lower_bound, CertifyOptions, Symbol2, UpperMethod};
use crate::spectral::{eig_hermitian, eig_unitary, exp_i, hermitian_calculus, SpectralDecomposition};

pub use report::{divergence_report, AlphaSeries, DivergenceReport, ReportRow};

type M = Matrix<f64>;
type Decomp = SpectralDecomposition<f64>;

const E_INV: f64 = 0.367_879_441_171_442_33;

/// Distance within which computed eigenvalues are identified with the known spectrum.
pub const SNAP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub adps_iter: usize,
    pub adps_random_starts: usize,
    pub t_max_j: u32,
    pub schur_starts: usize,
    pub schur_iter: usize,
    pub w_random_starts: usize,
    pub w_iter: usize,
    pub w_subspace_starts: usize,
    pub w_polish_iter: usize,
    pub m_max_j: u32,
    /// Relative change of `m^2 ‖R‖_1` between ladder points accepted as stable.
    pub stabilization: f64,
    /// Required ratio of the triple-integral term to the double-integral term.
    pub domination: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            adps_iter: 20,
            adps_random_starts: 1,
            t_max_j: 40,
            schur_starts: 4,
            schur_iter: 80,
            w_random_starts: 8,
            w_iter: 40,
            w_subspace_starts: 12,
            w_polish_iter: 150,
            m_max_j: 30,
            stabilization: 0.05,
            domination: 2.0,
        }
    }
}

/// Diagonal `D` on a symmetric grid and a Hermitian `R` with `‖[R, D]‖_∞ = π`.
#[derive(Clone, Debug)]
pub struct AdpsPair {
    pub n: usize,
    /// Achieved `‖Φ ∘ X‖_∞ / ‖X‖_∞` for the chosen `X`.
    pub witness_ratio: f64,
    pub lambda: Vec<f64>,
    pub d: M,
    pub r: M,
    pub comm_norm: f64,
    pub h_comm_norm: f64,
    /// `max |Φ_jk|` over `j ≠ k`, the ratio of the best elementary witness `E_jk + E_kj`.
    pub trivial_ratio: f64,
    pub iterations: usize,
}

/// `Φ_jk = h^{[1]}(λ_j, λ_k)` on the grid.
pub fn h_divided_difference(lambda: &[f64]) -> M {
    let h = HFunction::<f64>::new();
    M::from_fn(lambda.len(), |j, k| {
        let v = if j == k {
            h.eval_d1(lambda[j])
        } else {
            (h.eval(lambda[j]) - h.eval(lambda[k])) / (lambda[j] - lambda[k])
        };
        cplx(v, 0.0)
    })
}

/// Hermitian part with the diagonal removed; `i` times this is the admissible set for `[R, D]`.
fn hermitian_offdiag(g: &M) -> M {
    let n = g.dim();
    let mut out = M::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (g.get(i, j) + g.get(j, i).conj()).scale(0.5);
            out.set(i, j, v);
            out.set(j, i, v.conj());
        }
    }
    out
}

/// `‖A‖_∞` and `‖A‖_p` of a Hermitian `A` with the gradient of the latter.
fn schatten_p_hermitian(a: &M, p: f64) -> Result<(f64, f64, M)> {
    let e = eig_hermitian(a)?;
    let mu: Vec<f64> = e.eigenvalues.iter().map(|z| z.re).collect();
    let top = mu.iter().fold(0.0f64, |x, y| x.max(y.abs()));
    if top == 0.0 {
        return Ok((0.0, 0.0, M::zeros(a.dim())));
    }
    let sp: f64 = mu.iter().map(|m| (m.abs() / top).powf(p)).sum();
    let scale = sp.powf((p - 1.0) / p);
    let w: Vec<C<f64>> = mu.iter().map(|m| cplx(m.signum() * (m.abs() / top).powf(p - 1.0) / scale, 0.0)).collect();
    Ok((top, top * sp.powf(1.0 / p), e.synthesize(&w)))
}

/// `‖Φ ∘ Y‖_∞ / ‖Y‖_∞`.
fn commutator_ratio(phi: &M, y: &M) -> Result<f64> {
    Ok(schatten_p_hermitian(&phi.hadamard(y)?, 2.0)?.0 / schatten_p_hermitian(y, 2.0)?.0)
}

/// Ascent of `‖Φ ∘ Y‖_∞ / ‖Y‖_∞` over Hermitian zero-diagonal `Y`, for real symmetric `Φ`.
///
/// Both operators are Hermitian, so the ratio of Schatten `p`-norms is smooth; `p` runs
/// through a doubling schedule and the best `∞`-ratio seen is kept.
pub fn commutator_ascent(phi: &M, seed: M, iters: usize) -> Result<(M, f64, usize)> {
    let mut y = hermitian_offdiag(&seed);
    y = y.scale_real(1.0 / y.frobenius());
    let mut best = (y.clone(), commutator_ratio(phi, &y)?);
    let mut used = 0;
    for p in [8.0, 32.0, 128.0] {
        let objective = |y: &M| -> Result<(f64, f64, M)> {
            let (ta, na, ga) = schatten_p_hermitian(&phi.hadamard(y)?, p)?;
            let (ty, ny, gy) = schatten_p_hermitian(y, p)?;
            let g = hermitian_offdiag(&(&phi.hadamard(&ga)?.scale_real(1.0 / na) - &gy.scale_real(1.0 / ny)));
            Ok(((na / ny).ln(), ta / ty, g))
        };
        let (mut val, _, mut g) = objective(&y)?;
        let mut step = 0.5;
        for _ in 0..iters {
            used += 1;
            let gn = g.frobenius();
            if gn < 1e-12 {
                break;
            }
            let mut accepted = None;
            for _ in 0..30 {
                let cand = &y + &g.scale_real(step / gn);
                let cand = cand.scale_real(1.0 / cand.frobenius());
                let (cv, cr, cg) = objective(&cand)?;
                if cv > val + 1e-4 * step * gn {
                    accepted = Some((cand, cv, cr, cg));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, cv, cr, cg)) = accepted else { break };
            let gain = cv - val;
            (y, val, g) = (cand, cv, cg);
            if cr > best.1 {
                best = (y.clone(), cr);
            }
            step = (step * 2.0).min(1.0);
            if gain < 1e-10 {
                break;
            }
        }
    }
    Ok((best.0, best.1, used))
}

fn hermitian_seeds(d: usize, seed: u64, random: usize) -> Vec<Vec<C<f64>>> {
    let mut out = vec![vec![cplx(1.0, 0.0); d]];
    // Opposite signs across the zero of the grid.
    out.push((0..d).map(|j| cplx(if 2 * j < d { -1.0 } else { 1.0 }, 0.0)).collect());
    for s in 0..random {
        let mut rng = rng_from_seed(child_seed(seed, 20 + s as u64));
        out.push((0..d).map(|_| gaussian_c::<f64>(&mut rng)).collect());
    }
    out
}

/// Hermitian sign `C` of a Hermitian matrix, with `tr(C A) = ‖A‖_1`.
fn hermitian_sign(a: &M) -> Result<M> {
    let e = eig_hermitian(a)?;
    let signs: Vec<C<f64>> = e.eigenvalues.iter().map(|l| cplx(if l.re < 0.0 { -1.0 } else { 1.0 }, 0.0)).collect();
    Ok(e.synthesize(&signs))
}

/// Ascent of `‖Φ_0 ∘ u u*‖_1` over unit `u`, where `Φ_0` is `Φ` with its diagonal removed.
///
/// For real symmetric `Φ_0` this is `sup ‖Φ_0 ∘ Y‖_∞ / ‖Y‖_∞` over all Hermitian `Y`, attained at
/// the sign of `Φ_0 ∘ u u*`; that sign is returned as a seed for the zero-diagonal search.
pub fn rank_one_dual_ascent(phi: &M, u0: Vec<C<f64>>, iters: usize) -> Result<(M, f64)> {
    let d = phi.dim();
    let phi0 = M::from_fn(d, |i, j| if i == j { czero() } else { phi.get(i, j) });
    let nrm = u0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let u: Vec<C<f64>> = u0.into_iter().map(|z| z / nrm).collect();
    let eval = |u: &[C<f64>]| -> Result<(f64, M)> {
        let a = M::from_fn(d, |i, j| u[i] * phi0.get(i, j) * u[j].conj()).hermitian_part();
        let c = hermitian_sign(&a)?;
        Ok(((&c * &a).trace().re, c))
    };
    let (mut val, mut c) = eval(&u)?;
    for _ in 0..iters {
        let q = M::from_fn(d, |i, j| c.get(i, j).conj() * phi0.get(i, j)).hermitian_part();
        let e = eig_hermitian(&q)?;
        let top = (0..d).max_by(|x, y| e.eigenvalues[*x].re.total_cmp(&e.eigenvalues[*y].re)).unwrap_or(0);
        let nu: Vec<C<f64>> = e.basis.col(top).iter().map(|z| z.conj()).collect();
        let (nv, nc) = eval(&nu)?;
        if nv <= val * (1.0 + 1e-12) {
            break;
        }
        (val, c) = (nv, nc);
    }
    Ok((c, val))
}

pub fn build_adps_pair(n: usize, seed: u64, opts: &PipelineOptions) -> Result<AdpsPair> {
    if n < 3 {
        return Err(Error::Invalid(format!("n must be at least 3, got {n}")));
    }
    let d = 2 * n + 1;
    let lambda: Vec<f64> = (0..d).map(|j| (j as f64 - n as f64) / n as f64 * E_INV).collect();
    let phi = h_divided_difference(&lambda);

    let (mut jt, mut kt, mut elementary) = (0, 1, 0.0f64);
    for j in 0..d {
        for k in (j + 1)..d {
            if phi.get(j, k).re.abs() > elementary {
                (jt, kt, elementary) = (j, k, phi.get(j, k).re.abs());
            }
        }
    }
    let mut seeds = Vec::new();
    // Hermitian Hilbert-type kernel i/(j - k).
    seeds.push(M::from_fn(d, |j, k| if j == k { czero() } else { cplx(0.0, 1.0 / (j as f64 - k as f64)) }));
    let mut elem = M::zeros(d);
    elem.set(jt, kt, cplx(1.0, 0.0));
    elem.set(kt, jt, cplx(1.0, 0.0));
    seeds.push(elem);
    for u0 in hermitian_seeds(d, seed, opts.adps_random_starts) {
        seeds.push(rank_one_dual_ascent(&phi, u0, opts.adps_iter)?.0);
    }
    let mut best: Option<(M, f64)> = None;
    let mut iterations = 0;
    for s in seeds {
        let (y, r, it) = commutator_ascent(&phi, s, opts.adps_iter)?;
        iterations += it;
        if best.as_ref().is_none_or(|b| r > b.1) {
            best = Some((y, r));
        }
    }
    let (y, ratio) = best.expect("seeds are nonempty");
    // The elementary witness is among the seeds, so falling short of it means the ascent broke.
    if !(ratio >= elementary * (1.0 - 1e-12)) {
        return Err(Error::WitnessSearchFailed(format!(
            "commutator ratio {ratio:.6} is below the elementary witness {elementary:.6} at n={n}"
        )));
    }
    // [R, D] = iY: R_jk = i Y_jk / (λ_k - λ_j).
    let mut r = M::zeros(d);
    for j in 0..d {
        for k in (j + 1)..d {
            let v = y.get(j, k) * cplx(0.0, 1.0) / (lambda[k] - lambda[j]);
            r.set(j, k, v);
            r.set(k, j, v.conj());
        }
    }
    let dm = M::from_real_diag(&lambda);
    let c0 = r.commutator(&dm)?.norm_inf()?;
    let r = r.scale_real(std::f64::consts::PI / c0);
    let comm_norm = r.commutator(&dm)?.norm_inf()?;
    let hd = M::from_real_diag(&lambda.iter().map(|l| eval_h(*l)).collect::<Vec<_>>());
    let h_comm_norm = r.commutator(&hd)?.norm_inf()?;
    Ok(AdpsPair {
        n,
        witness_ratio: ratio,
        lambda,
        d: dm,
        r,
        comm_norm,
        h_comm_norm,
        trivial_ratio: elementary,
        iterations,
    })
}

/// `B = e^{itR} D e^{-itR} - D` for the selected `t = 2^{-j}`.
#[derive(Clone, Debug)]
pub struct TChoice {
    pub t: f64,
    pub j: u32,
    pub b: M,
    pub b_norm: f64,
    pub h_diff_norm: f64,
    pub ratio_h: f64,
    /// `h_comm_norm / 4π`, the guaranteed floor for `ratio_h`.
    pub ratio_floor: f64,
    pub spectrum_gap: f64,
}

#[allow(non_snake_case)]
pub fn select_t_and_B(pair: &AdpsPair, opts: &PipelineOptions) -> Result<TChoice> {
    let hd = hermitian_calculus(&pair.d, eval_h)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    for j in 0..=opts.t_max_j {
        let t = 0.5f64.powi(j as i32);
        let e = exp_i(&pair.r.scale_real(t))?;
        let apb = (&(&e * &pair.d) * &e.adjoint()).hermitian_part();
        let b = &apb - &pair.d;
        let b_norm = b.norm_inf()?;
        if b_norm == 0.0 || !(0.5 * t * pair.comm_norm <= b_norm && b_norm <= two_pi * t) {
            continue;
        }
        let h_diff_norm = (&hermitian_calculus(&apb, eval_h)? - &hd).norm_inf()?;
        if h_diff_norm < 0.5 * pair.h_comm_norm * t {
            continue;
        }
        let mut sigma: Vec<f64> = eig_hermitian(&apb)?.eigenvalues.iter().map(|z| z.re).collect();
        sigma.sort_by(f64::total_cmp);
        let spectrum_gap = sigma.iter().zip(&pair.lambda).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        return Ok(TChoice {
            t,
            j,
            b,
            b_norm,
            h_diff_norm,
            ratio_h: h_diff_norm / b_norm,
            ratio_floor: pair.h_comm_norm / (2.0 * two_pi),
            spectrum_gap,
        });
    }
    Err(Error::NoAdmissibleT)
}

/// `H = e^{iA}` and `K = e^{i(A+B)}` with their decompositions.
#[derive(Clone, Debug)]
pub struct HkPair {
    pub h: M,
    pub k: M,
    pub dh: Decomp,
    pub dk: Decomp,
    /// Index of the eigenvalue `1` in `dh`.
    pub one_index: usize,
    pub kh_norm: f64,
    pub g_diff_norm: f64,
    pub ratio_g: f64,
    pub spectrum_gap: f64,
    /// `‖g(H) - h(A)‖_∞`.
    pub calculus_gap: f64,
}

#[allow(non_snake_case)]
pub fn build_HK(a: &M, lambda: &[f64], b: &M) -> Result<HkPair> {
    let apb = a + b;
    let ea = eig_hermitian(&apb)?;
    let mut sk: Vec<f64> = ea.eigenvalues.iter().map(|z| z.re).collect();
    sk.sort_by(f64::total_cmp);
    let spectrum_gap = sk.iter().zip(lambda).fold(0.0f64, |acc, (x, y)| acc.max((cis(*x) - cis(*y)).norm()));
    let dh = Decomp { eigenvalues: lambda.iter().map(|l| cis(*l)).collect(), basis: M::identity(lambda.len()) };
    // `A + B` is conjugate to `A`; snapping keeps the eigenvalue 1 of `K` exact.
    let dk = Decomp { eigenvalues: ea.eigenvalues.iter().map(|l| cis(l.re)).collect(), basis: ea.basis }
        .snapped(&dh.eigenvalues, SNAP_TOL)?;
    let one_index =
        lambda.iter().position(|l| *l == 0.0).ok_or_else(|| Error::Invalid("0 is not on the grid".into()))?;
    let h = dh.reconstruct();
    let k = dk.reconstruct();
    let kh_norm = (&k - &h).norm_inf()?;
    if kh_norm < 1e-13 {
        return Err(Error::DegenerateCase(format!("‖K - H‖ = {kh_norm:e}")));
    }
    let g = make_g::<f64>();
    let gh = dh.map(|z| g.value(z))?;
    let gk = dk.map(|z| g.value(z))?;
    let g_diff_norm = (&gk - &gh).norm_inf()?;
    let ha = hermitian_calculus(a, eval_h)?;
    let calculus_gap = (&gh - &ha).max_abs();
    Ok(HkPair {
        h,
        k,
        dh,
        dk,
        one_index,
        kh_norm,
        g_diff_norm,
        ratio_g: g_diff_norm / kh_norm,
        spectrum_gap,
        calculus_gap,
    })
}

/// `U = diag(V, V)` with `V = diag(K, H)`, and its block decomposition.
pub fn build_blocks(hk: &HkPair) -> Result<(M, Decomp)> {
    if hk.h.dim() != hk.k.dim() {
        return Err(Error::DimMismatch { left: hk.k.dim(), right: hk.h.dim() });
    }
    let u = M::block_diag(&[&hk.k, &hk.h, &hk.k, &hk.h]);
    let du = Decomp::direct_sum(&[&hk.dk, &hk.dh, &hk.dk, &hk.dh]);
    Ok((u, du))
}

/// Bounds for the slice `ς(·, 1, ·)` on `σ(K) x σ(H)` and for the supremum over all slices.
#[derive(Clone, Debug)]
pub struct SliceBounds {
    pub lower: f64,
    pub upper: f64,
    pub sup_upper: f64,
    /// The lower bound obtained from the witness `K - H` alone.
    pub seed_ratio: f64,
    pub u: Vec<C<f64>>,
    pub v: Vec<C<f64>>,
}

pub fn slice_bounds(hk: &HkPair, opts: &PipelineOptions, seed: u64) -> Result<SliceBounds> {
    let f = make_f::<f64>();
    let t = TripleOI::varsigma(&f, &hk.dk, &hk.dh, &hk.dh)?;
    let d = hk.h.dim();
    let e = hk.one_index;
    let slice = Symbol2::new(Matrix::try_from_fn(d, |i, j| t.entry(i, e, j))?)?;
    let x0 = hk.dk.to_coords(&(&hk.k - &hk.h), &hk.dh);
    let x0 = x0.scale_real(1.0 / x0.norm_inf()?);
    let seed_ratio = slice.as_matrix().hadamard(&x0)?.norm_inf()?;
    let copts = CertifyOptions {
        starts: opts.schur_starts,
        max_iter: opts.schur_iter,
        seed,
        upper: UpperMethod::Factorization,
        ..CertifyOptions::default()
    };
    let (best, _) = schur_lower_bound(&slice, &copts, &[x0])?;
    let upper = factorization_bound(slice.as_matrix());
    // Row and column ℓ2 norms of every slice, accumulated without materializing the tensor.
    let mut sup_upper = 0.0f64;
    for k in 0..d {
        let mut rows = vec![0.0f64; d];
        let mut col_max = 0.0f64;
        for j in 0..d {
            let mut c = 0.0;
            for (i, r) in rows.iter_mut().enumerate() {
                let a = t.entry(i, k, j)?.norm_sqr();
                c += a;
                *r += a;
            }
            col_max = col_max.max(c);
        }
        let row_max = rows.into_iter().fold(0.0f64, f64::max);
        sup_upper = sup_upper.max(row_max.min(col_max).sqrt());
    }
    Ok(SliceBounds { lower: best.value, upper, sup_upper: sup_upper.max(best.value), seed_ratio, u: best.u, v: best.v })
}

/// A star-shaped self-adjoint `W = V (e a* + a e*) V*` in the eigenbasis `V` of `U`.
#[derive(Clone, Debug)]
pub struct WWitness {
    pub w: M,
    pub anchor: usize,
    pub support: Vec<usize>,
    pub star: Vec<C<f64>>,
    pub star_value: f64,
    /// Eigen-indices of the spectral subspace searched by the self-adjoint ascent.
    pub subspace: Vec<usize>,
    pub subspace_value: f64,
    pub toi_lb: f64,
    pub commutation_gap: f64,
    pub starts: usize,
    pub iterations: usize,
}

/// `‖D_a G D_a*‖_1 + |Σ s_k |a_k|^2|` and the data of its linear minorant.
fn star_objective(g: &M, s: &[C<f64>], a: &[C<f64>]) -> Result<(f64, M, C<f64>)> {
    let q = M::from_fn(a.len(), |i, j| a[i] * g.get(i, j) * a[j].conj());
    let (u, sv, v) = q.svd()?;
    let c: C<f64> = s.iter().zip(a).fold(czero(), |acc, (sk, ak)| acc + *sk * ak.norm_sqr());
    let sign = if c.norm() > 0.0 { c / c.norm() } else { cplx(1.0, 0.0) };
    Ok((sv.iter().sum::<f64>() + c.norm(), &u * &v.adjoint(), sign))
}

fn normalize_half(a: Vec<C<f64>>) -> Option<Vec<C<f64>>> {
    let nrm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (nrm > 0.0).then(|| a.into_iter().map(|z| z * (std::f64::consts::FRAC_1_SQRT_2 / nrm)).collect())
}

/// Majorize-minimize ascent of the star objective: each step maximizes the linear minorant
/// `Re tr(C* D_a G D_a*) + Re(conj(sign) Σ s_k |a_k|^2)`, a Hermitian form in `conj(a)`.
fn star_ascent(g: &M, s: &[C<f64>], seed: Vec<C<f64>>, iters: usize) -> Result<(Vec<C<f64>>, f64, usize)> {
    let mut a = seed;
    let (mut val, mut c, mut sign) = star_objective(g, s, &a)?;
    let mut used = 0;
    for _ in 0..iters {
        used += 1;
        let q = M::from_fn(a.len(), |i, j| c.get(i, j).conj() * g.get(i, j));
        let mut h = q.hermitian_part();
        for (k, sk) in s.iter().enumerate() {
            let v = h.get(k, k) + cplx((sign.conj() * *sk).re, 0.0);
            h.set(k, k, v);
        }
        let e = eig_hermitian(&h)?;
        let top = (0..a.len()).max_by(|x, y| e.eigenvalues[*x].re.total_cmp(&e.eigenvalues[*y].re)).unwrap_or(0);
        let Some(na) = normalize_half(e.basis.col(top).iter().map(|z| z.conj()).collect()) else { break };
        let (nv, nc, ns) = star_objective(g, s, &na)?;
        if nv <= val {
            break;
        }
        let gain = (nv - val) / nv;
        a = na;
        val = nv;
        c = nc;
        sign = ns;
        if gain < 1e-10 {
            break;
        }
    }
    Ok((a, val, used))
}

#[allow(non_snake_case)]
pub fn find_W_witness(
    u: &M,
    du: &Decomp,
    hk: &HkPair,
    slice: &SliceBounds,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<WWitness> {
    let d = hk.h.dim();
    let anchor = d + hk.one_index;
    let support: Vec<usize> = (3 * d..4 * d).collect();
    let f = make_f::<f64>();
    let mut toi = TripleOI::varsigma(&f, du, du, du)?;
    let g = Matrix::try_from_fn(support.len(), |a, b| toi.entry(support[a], anchor, support[b]))?;
    let s = support.iter().map(|k| toi.entry(anchor, *k, anchor)).collect::<Result<Vec<_>>>()?;

    let mut seeds: Vec<Vec<C<f64>>> = Vec::new();
    let (uc, vc): (Vec<_>, Vec<_>) = slice.u.iter().zip(&slice.v).map(|(x, y)| (x.conj(), y.conj())).unzip();
    seeds.push(uc.clone());
    seeds.push(vc.clone());
    seeds.push(uc.iter().zip(&vc).map(|(x, y)| x + y).collect());
    seeds.push(uc.iter().zip(&vc).map(|(x, y)| x + y * cplx(0.0, 1.0)).collect());
    seeds.push(vec![cplx(1.0, 0.0); d]);
    for r in 0..opts.w_random_starts {
        let mut rng = rng_from_seed(child_seed(seed, 100 + r as u64));
        seeds.push((0..d).map(|_| gaussian_c::<f64>(&mut rng)).collect());
    }
    let starts = seeds.len() + 1 + opts.w_subspace_starts;
    let mut best: Option<(Vec<C<f64>>, f64)> = None;
    let mut iterations = 0;
    for sd in seeds {
        let Some(sd) = normalize_half(sd) else { continue };
        let (a, v, it) = star_ascent(&g, &s, sd, opts.w_iter)?;
        iterations += it;
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((a, v));
        }
    }
    let (star, star_value) = best.ok_or_else(|| Error::WitnessSearchFailed("no usable seed".into()))?;

    let mut star_t = M::zeros(u.dim());
    for (k, idx) in support.iter().enumerate() {
        star_t.set(anchor, *idx, star[k].conj());
        star_t.set(*idx, anchor, star[k]);
    }

    // Self-adjoint ascent inside a spectral subspace: all four copies of the eigenvalues at the
    // grid ends, around 1, and at the heaviest entries of the star. In eigencoordinates the
    // restricted problem is exact, so the values below are values of the full map.
    let mut grid: Vec<usize> = vec![0, 1, d - 2, d - 1];
    let e = hk.one_index;
    grid.extend([e.saturating_sub(1), e, (e + 1).min(d - 1)]);
    let mut by_weight: Vec<usize> = (0..d).collect();
    by_weight.sort_by(|a, b| star[*b].norm().total_cmp(&star[*a].norm()));
    grid.extend(by_weight.iter().take(4));
    grid.sort_unstable();
    grid.dedup();
    let subspace: Vec<usize> = (0..4).flat_map(|b| grid.iter().map(move |j| b * d + j)).collect();
    let ds = Decomp {
        eigenvalues: subspace.iter().map(|i| du.eigenvalues[*i]).collect(),
        basis: M::identity(subspace.len()),
    };
    let sub = TripleOI::varsigma(&f, &ds, &ds, &ds)?;
    let mut sub_seeds = vec![M::from_fn(subspace.len(), |a, b| star_t.get(subspace[a], subspace[b]))];
    for r in 0..opts.w_subspace_starts {
        let mut rng = rng_from_seed(child_seed(seed, 200 + r as u64));
        sub_seeds.push(random_hermitian::<f64>(subspace.len(), &mut rng));
    }
    let asc = selfadjoint_ascent(&sub, &sub_seeds, opts.w_polish_iter)?;
    iterations += asc.iterations;
    let mut sub_t = M::zeros(u.dim());
    for (a, ia) in subspace.iter().enumerate() {
        for (b, ib) in subspace.iter().enumerate() {
            sub_t.set(*ia, *ib, asc.w.get(a, b));
        }
    }

    let embed = |wt: &M| {
        let w = du.from_coords(wt, du).hermitian_part();
        w.scale_real(1.0 / w.frobenius())
    };
    let mut candidates = Vec::new();
    for wt in [&star_t, &sub_t] {
        let w = embed(wt);
        let sv = toi.apply(&w, &w)?;
        let val = sv.norm_1()?;
        candidates.push((w, sv, val));
    }
    let subspace_value = candidates[1].2;
    let (w, sv, toi_lb) = candidates.into_iter().max_by(|a, b| a.2.total_cmp(&b.2)).expect("two candidates");
    toi.set_middle_weight(None);
    let wu = &w * u;
    let direct = toi.apply(&wu, &wu)?;
    let commutation_gap = (&direct - &(&sv * u)).norm_1()? / toi_lb;
    if !(toi_lb >= 0.5 * slice.lower) {
        return Err(Error::WitnessSearchFailed(format!(
            "‖T_ς(W, W)‖_1 = {toi_lb:.6} is below half the slice lower bound {:.6}",
            slice.lower
        )));
    }
    Ok(WWitness {
        w,
        anchor,
        support,
        star,
        star_value,
        subspace,
        subspace_value,
        toi_lb,
        commutation_gap,
        starts,
        iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub m: u64,
    pub beta: f64,
    pub scaled: f64,
    /// `m^2 ‖term_toi‖_1` and `m^2 ‖term_doi‖_1`.
    pub toi_term: f64,
    pub doi_term: f64,
    pub dominated: bool,
    pub taylor_residual: f64,
}

#[derive(Clone, Debug)]
pub struct MChoice {
    pub m: u64,
    pub remainder: M,
    pub point: LadderPoint,
    pub ladder: Vec<LadderPoint>,
    /// `‖term_doi‖_1 / ‖e^{iZ}U - U - iZU‖_1`, an empirical lower bound for the `S¹ → S¹` norm.
    pub doi_ratio: f64,
}

fn ladder_point(u: &M, du: &Decomp, w: &M, m: u64, domination: f64) -> Result<(LadderPoint, M, f64)> {
    let f = make_f::<f64>();
    let mf = m as f64;
    let z = w.scale_real(1.0 / mf);
    let tr = taylor_remainder_with(&f, u, du, &z)?;
    let beta = tr.remainder.norm_1()?;
    let m2 = mf * mf;
    let toi_term = m2 * tr.term_toi.norm_1()?;
    let doi_term = m2 * tr.term_doi.norm_1()?;
    let uz = &exp_i(&z)? * u;
    let izu = (&z * u).scale(cplx(0.0, 1.0));
    let second = &(&uz - u) - &izu;
    let doi_ratio = tr.term_doi.norm_1()? / second.norm_1()?;
    let point = LadderPoint {
        m,
        beta,
        scaled: m2 * beta,
        toi_term,
        doi_term,
        dominated: toi_term >= domination * doi_term,
        taylor_residual: tr.residual()?,
    };
    Ok((point, tr.remainder, doi_ratio))
}

pub fn scale_and_select_m(u: &M, du: &Decomp, w: &M, n: usize, opts: &PipelineOptions) -> Result<MChoice> {
    let mut ladder = Vec::new();
    let mut prev: Option<(LadderPoint, M, f64)> = None;
    for j in 0..=opts.m_max_j {
        let m = (n as u64) << j;
        let cur = ladder_point(u, du, w, m, opts.domination)?;
        ladder.push(cur.0.clone());
        if let Some((p, rem, ratio)) = prev.take() {
            let stable = (p.scaled - cur.0.scaled).abs() <= opts.stabilization * cur.0.scaled;
            if p.dominated && stable {
                return Ok(MChoice { m: p.m, remainder: rem, point: p, ladder, doi_ratio: ratio });
            }
        }
        prev = Some(cur);
    }
    Err(Error::NoStabilization)
}

/// Everything measured for one `n`, with the matrices needed to recompute it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRecord {
    pub n: usize,
    pub seed: u64,
    pub dim_small: usize,
    pub dim_big: usize,
    pub comm_norm: f64,
    pub h_comm_norm: f64,
    pub trivial_ratio: f64,
    pub t: f64,
    pub t_index: u32,
    pub b_norm: f64,
    pub ratio_h: f64,
    pub ratio_h_floor: f64,
    pub conjugacy_gap: f64,
    pub kh_norm: f64,
    pub ratio_g: f64,
    pub calculus_gap: f64,
    pub slice1_lower: f64,
    pub slice1_upper: f64,
    pub slice_sup_upper: f64,
    pub slice1_seed_ratio: f64,
    pub chain_ok: bool,
    pub star_value: f64,
    pub subspace_dim: usize,
    pub subspace_value: f64,
    pub toi_lb: f64,
    pub commutation_gap: f64,
    pub w_hs: f64,
    pub m: u64,
    pub z_hs: f64,
    pub beta: f64,
    pub scaled: f64,
    pub toi_term: f64,
    pub doi_term: f64,
    pub doi_ratio: f64,
    pub taylor_residual: f64,
    pub ladder: Vec<LadderPoint>,
    /// Matrix name to file name, relative to the record's directory.
    pub matrices: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub record: PipelineRecord,
    pub matrices: BTreeMap<String, M>,
}

/// Per-stage progress messages.
pub type Progress<'a> = &'a mut dyn FnMut(&str);

pub fn run_pipeline_n(
    n: usize,
    root_seed: u64,
    opts: &PipelineOptions,
    progress: Progress<'_>,
) -> Result<PipelineOutput> {
    faer::set_global_parallelism(faer::Par::Seq);
    let seed = child_seed(root_seed, n as u64);

    let pair = build_adps_pair(n, child_seed(seed, 1), opts).map_err(keep_kind("adps-pair"))?;
    progress(&format!("n={n}: commutator pair ‖[R,h(D)]‖ = {:.6}", pair.h_comm_norm));
    let tc = select_t_and_B(&pair, opts).map_err(keep_kind("t-search"))?;
    progress(&format!("n={n}: t = 2^-{} ratio_h = {:.6}", tc.j, tc.ratio_h));
    let hk = build_HK(&pair.d, &pair.lambda, &tc.b).map_err(keep_kind("unitary-pair"))?;
    progress(&format!("n={n}: ratio_g = {:.6}", hk.ratio_g));
    let (u, du) = build_blocks(&hk).map_err(keep_kind("blocks"))?;
    let slice = slice_bounds(&hk, opts, child_seed(seed, 2)).map_err(keep_kind("slice-bounds"))?;
    progress(&format!("n={n}: slice bounds [{:.6}, {:.6}]", slice.lower, slice.upper));
    let ww = find_W_witness(&u, &du, &hk, &slice, child_seed(seed, 3), opts).map_err(keep_kind("witness"))?;
    progress(&format!("n={n}: toi_lb = {:.6}", ww.toi_lb));
    let mc = scale_and_select_m(&u, &du, &ww.w, n, opts).map_err(keep_kind("m-ladder"))?;
    progress(&format!("n={n}: m = {} scaled = {:.6}", mc.m, mc.point.scaled));

    let chain_ok = slice.lower <= slice.sup_upper * (1.0 + 1e-9)
        && slice.upper <= slice.sup_upper * (1.0 + 1e-9)
        && hk.ratio_g <= slice.lower * (1.0 + 1e-6);
    let mut matrices = BTreeMap::new();
    matrices.insert("D".to_string(), pair.d.clone());
    matrices.insert("R".to_string(), pair.r.clone());
    matrices.insert("B".to_string(), tc.b.clone());
    matrices.insert("H".to_string(), hk.h.clone());
    matrices.insert("K".to_string(), hk.k.clone());
    matrices.insert("U".to_string(), u);
    matrices.insert("W".to_string(), ww.w.clone());
    let names = matrices.keys().map(|k| (k.clone(), matrix_file(n, k))).collect();
    let record = PipelineRecord {
        n,
        seed,
        dim_small: hk.h.dim(),
        dim_big: ww.w.dim(),
        comm_norm: pair.comm_norm,
        h_comm_norm: pair.h_comm_norm,
        trivial_ratio: pair.trivial_ratio,
        t: tc.t,
        t_index: tc.j,
        b_norm: tc.b_norm,
        ratio_h: tc.ratio_h,
        ratio_h_floor: tc.ratio_floor,
        conjugacy_gap: tc.spectrum_gap.max(hk.spectrum_gap),
        kh_norm: hk.kh_norm,
        ratio_g: hk.ratio_g,
        calculus_gap: hk.calculus_gap,
        slice1_lower: slice.lower,
        slice1_upper: slice.upper,
        slice_sup_upper: slice.sup_upper,
        slice1_seed_ratio: slice.seed_ratio,
        chain_ok,
        star_value: ww.star_value,
        subspace_dim: ww.subspace.len(),
        subspace_value: ww.subspace_value,
        toi_lb: ww.toi_lb,
        commutation_gap: ww.commutation_gap,
        w_hs: ww.w.frobenius(),
        m: mc.m,
        z_hs: ww.w.frobenius() / mc.m as f64,
        beta: mc.point.beta,
        scaled: mc.point.scaled,
        toi_term: mc.point.toi_term,
        doi_term: mc.point.doi_term,
        doi_ratio: mc.doi_ratio,
        taylor_residual: mc.point.taylor_residual,
        ladder: mc.ladder,
        matrices: names,
    };
    Ok(PipelineOutput { record, matrices })
}

/// Prefixes the failing stage while keeping the error variant.
fn keep_kind(stage: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::WitnessSearchFailed(s) => Error::WitnessSearchFailed(format!("stage {stage}: {s}")),
        Error::NoAdmissibleT | Error::NoStabilization | Error::DegenerateCase(_) => e,
        other => Error::Invalid(format!("stage {stage}: {other}")),
    }
}

pub fn record_file(n: usize) -> String {
    format!("record_n{n:04}.json")
}

pub fn matrix_file(n: usize, name: &str) -> String {
    format!("n{n:04}_{name}.json")
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_output(dir: &Path, out: &PipelineOutput) -> Result<()> {
    for (name, m) in &out.matrices {
        let file = &out.record.matrices[name];
        write_atomic(&dir.join(file), serde_json::to_string(&m.to_json())?.as_bytes())?;
    }
    let mut json = serde_json::to_string_pretty(&out.record)?;
    json.push('\n');
    write_atomic(&dir.join(record_file(out.record.n)), json.as_bytes())
}

/// Runs and writes every `n` of the ladder in order; stops at the first failure.
pub fn run_ladder(
    ladder: &[usize],
    root_seed: u64,
    opts: &PipelineOptions,
    dir: &Path,
    progress: Progress<'_>,
) -> Result<Vec<PipelineRecord>> {
    let mut records = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let out = run_pipeline_n(n, root_seed, opts, progress)?;
        write_output(dir, &out)?;
        records.push(out.record);
    }
    Ok(records)
}

/// Records in a directory, sorted by `n`.
pub fn read_records(dir: &Path) -> Result<Vec<PipelineRecord>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if name.starts_with("record_n") && name.ends_with(".json") {
            out.push(serde_json::from_str::<PipelineRecord>(&std::fs::read_to_string(&path)?)?);
        }
    }
    out.sort_by_key(|r| r.n);
    Ok(out)
}

pub fn read_matrix(dir: &Path, record: &PipelineRecord, name: &str) -> Result<M> {
    let file = record.matrices.get(name).ok_or_else(|| Error::Invalid(format!("record lacks matrix {name}")))?;
    let j = serde_json::from_str(&std::fs::read_to_string(dir.join(file))?)?;
    M::from_json(&j)
}

/// Stored value, recomputed value, and their relative difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub name: String,
    pub stored: f64,
    pub recomputed: f64,
    pub rel_diff: f64,
}

/// Recomputes the recorded norms from the stored matrices alone.
pub fn replay(dir: &Path, rec: &PipelineRecord) -> Result<Vec<ReplayEntry>> {
    let get = |name: &str| read_matrix(dir, rec, name);
    let (d, r, b, h, k, u, w) = (get("D")?, get("R")?, get("B")?, get("H")?, get("K")?, get("U")?, get("W")?);
    let mut out = Vec::new();
    let mut push = |name: &str, stored: f64, recomputed: f64| {
        let rel_diff = (stored - recomputed).abs() / stored.abs().max(1e-300);
        out.push(ReplayEntry { name: name.into(), stored, recomputed, rel_diff });
    };
    push("comm_norm", rec.comm_norm, r.commutator(&d)?.norm_inf()?);
    push("h_comm_norm", rec.h_comm_norm, r.commutator(&hermitian_calculus(&d, eval_h)?)?.norm_inf()?);
    push("b_norm", rec.b_norm, b.norm_inf()?);
    let hd = hermitian_calculus(&d, eval_h)?;
    push("ratio_h", rec.ratio_h, (&hermitian_calculus(&(&d + &b), eval_h)? - &hd).norm_inf()? / b.norm_inf()?);
    push("kh_norm", rec.kh_norm, (&k - &h).norm_inf()?);
    let spectrum: Vec<C<f64>> = d.diag().iter().map(|l| cis(l.re)).collect();
    let eig = |a: &M| eig_unitary(a).and_then(|e| e.snapped(&spectrum, SNAP_TOL));
    let g = make_g::<f64>();
    let gk = eig(&k)?.map(|z| g.value(z))?;
    let gh = eig(&h)?.map(|z| g.value(z))?;
    push("ratio_g", rec.ratio_g, (&gk - &gh).norm_inf()? / (&k - &h).norm_inf()?);
    push("w_hs", rec.w_hs, w.frobenius());
    let du = eig(&u)?;
    let f = make_f::<f64>();
    let toi = TripleOI::varsigma(&f, &du, &du, &du)?;
    push("toi_lb", rec.toi_lb, toi.apply(&w, &w)?.norm_1()?);
    let z = w.scale_real(1.0 / rec.m as f64);
    push("z_hs", rec.z_hs, z.frobenius());
    let tr = taylor_remainder_with(&f, &u, &du, &z)?;
    let beta = tr.remainder.norm_1()?;
    push("beta", rec.beta, beta);
    push("scaled", rec.scaled, beta * (rec.m as f64).powi(2));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> PipelineOptions {
        PipelineOptions::default()
    }

    #[test]
    fn adps_invariants() {
        let p = build_adps_pair(4, 1, &opts()).unwrap();
        assert!((p.comm_norm - std::f64::consts::PI).abs() < 1e-9);
        assert!(p.lambda.contains(&0.0));
        assert!(p.lambda.iter().all(|l| l.abs() <= E_INV));
        assert!(p.r.is_hermitian(0.0));
        assert!(p.h_comm_norm / p.comm_norm >= p.trivial_ratio * (1.0 - 1e-9));
        assert!(build_adps_pair(2, 1, &opts()).is_err());
    }

    #[test]
    fn divided_difference_symbol() {
        let l = [-0.2, 0.0, 0.1];
        let phi = h_divided_difference(&l);
        let want = (eval_h(0.1) - eval_h(-0.2)) / 0.3;
        assert!((phi.get(0, 2).re - want).abs() < 1e-15);
        assert_eq!(phi.get(1, 1).re, 0.0);
    }

    #[test]
    fn t_search_and_conjugate_pair() {
        let p = build_adps_pair(4, 2, &opts()).unwrap();
        let tc = select_t_and_B(&p, &opts()).unwrap();
        assert!(tc.spectrum_gap < 1e-9);
        assert!(tc.ratio_h >= tc.ratio_floor);
        assert!(tc.b.is_hermitian(1e-15));
        let hk = build_HK(&p.d, &p.lambda, &tc.b).unwrap();
        assert!(hk.spectrum_gap < 1e-9);
        assert!(hk.calculus_gap < 1e-10);
        assert!(hk.kh_norm <= tc.b_norm + 1e-10);
        assert!(hk.ratio_g >= tc.ratio_h * (1.0 - 1e-9));
        assert_eq!(hk.dh.eigenvalues[hk.one_index], cplx(1.0, 0.0));
        assert!(matches!(build_HK(&p.d, &p.lambda, &M::zeros(9)), Err(Error::DegenerateCase(_))));
    }

    #[test]
    fn blocks_shape() {
        let p = build_adps_pair(3, 3, &opts()).unwrap();
        let tc = select_t_and_B(&p, &opts()).unwrap();
        let hk = build_HK(&p.d, &p.lambda, &tc.b).unwrap();
        let (u, du) = build_blocks(&hk).unwrap();
        assert_eq!(u.dim(), 8 * 3 + 4);
        assert!(u.is_unitary(1e-12));
        assert!(du.reconstruction_error(&u) < 1e-13);
    }

    #[test]
    fn star_objective_matches_full_integral() {
        let p = build_adps_pair(3, 4, &opts()).unwrap();
        let tc = select_t_and_B(&p, &opts()).unwrap();
        let hk = build_HK(&p.d, &p.lambda, &tc.b).unwrap();
        let (u, du) = build_blocks(&hk).unwrap();
        let sb = slice_bounds(&hk, &opts(), 5).unwrap();
        assert!(sb.lower >= sb.seed_ratio);
        assert!(sb.seed_ratio >= hk.ratio_g * (1.0 - 1e-7));
        let ww = find_W_witness(&u, &du, &hk, &sb, 6, &opts()).unwrap();
        assert!((ww.w.frobenius() - 1.0).abs() < 1e-12);
        assert!(ww.w.is_hermitian(1e-12));
        assert!(ww.toi_lb >= ww.star_value * (1.0 - 1e-8));
        assert!(ww.toi_lb >= ww.subspace_value * (1.0 - 1e-12));
        assert!(ww.commutation_gap < 1e-9);
    }

    #[test]
    fn exponential_series_limits() {
        let mut rng = rng_from_seed(80);
        let w = crate::random::random_hermitian::<f64>(5, &mut rng);
        let w = w.scale_real(1.0 / w.frobenius());
        let mut first = Vec::new();
        let mut second = Vec::new();
        for m in [8.0, 16.0, 32.0, 64.0] {
            let e = exp_i(&w.scale_real(1.0 / m)).unwrap();
            let d1 = &e - &M::identity(5);
            let iw = w.scale(cplx(0.0, 1.0));
            first.push((&d1.scale_real(m) - &iw).norm_inf().unwrap());
            let r2 = (&d1 - &iw.scale_real(1.0 / m)).scale_real(m * m);
            second.push((&r2 + &(&w * &w).scale_real(0.5)).norm_inf().unwrap());
        }
        assert!(first.windows(2).all(|x| x[1] < x[0]));
        assert!(second.windows(2).all(|x| x[1] < x[0]));
    }
}
