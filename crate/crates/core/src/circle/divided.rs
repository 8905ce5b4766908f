//! First- and second-order divided differences on the unit circle.

use num_traits::Float;

use super::{make_f, CircleFunction, FFunction, Smoothness};
use crate::error::{Error, Result};
use crate::scalar::{cplx, Real, C};

/// Distance above which the raw first-order quotient is used.
pub const DELTA_C: f64 = 1e-6;
/// Distance below which the derivative itself is returned.
pub const DELTA_D: f64 = 1e-9;
/// Band of the Taylor-corrected quotient when a first-order difference feeds a second-order one.
const DELTA_INNER: f64 = 1e-3;

const CIRCLE_TOL: f64 = 1e-12;

/// A circle point with the data the divided-difference formulas reuse.
#[derive(Clone, Copy, Debug)]
pub struct Sample<T: Real> {
    pub z: C<T>,
    pub theta: T,
    pub value: C<T>,
    /// Second angle derivative, absent at singular angles.
    pub angle_d2: Option<C<T>>,
}

/// Divided-difference evaluator bound to one function.
pub struct DividedDifferences<'a, T: Real, F: CircleFunction<T> + ?Sized> {
    phi: &'a F,
    delta_c: T,
    delta_d: T,
    inner: T,
}

impl<'a, T: Real, F: CircleFunction<T> + ?Sized> DividedDifferences<'a, T, F> {
    pub fn new(phi: &'a F) -> Self {
        Self { phi, delta_c: T::lit(DELTA_C), delta_d: T::lit(DELTA_D), inner: T::lit(DELTA_INNER) }
    }

    pub fn function(&self) -> &'a F {
        self.phi
    }

    pub fn sample(&self, z: C<T>) -> Result<Sample<T>> {
        let tol = Float::max(T::lit(CIRCLE_TOL), T::epsilon() * T::lit(16.0));
        let r = z.norm();
        if !(Float::abs(r - T::one()) <= tol) {
            return Err(Error::NotOnCircle { modulus: r.to_f64_lossy() });
        }
        let theta = Float::atan2(z.im, z.re);
        Ok(Sample { z, theta, value: self.phi.value(z)?, angle_d2: self.phi.angle_d2(theta).ok() })
    }

    /// `φ^{[1]}(z0, z1)`.
    pub fn dd1(&self, a: &Sample<T>, b: &Sample<T>) -> Result<C<T>> {
        self.dd1_band(a, b, self.delta_c)
    }

    /// First-order difference with the Taylor band widened to `1e-3`, for use inside `dd2`.
    pub fn dd1_inner(&self, a: &Sample<T>, b: &Sample<T>) -> Result<C<T>> {
        self.dd1_band(a, b, self.inner)
    }

    fn dd1_band(&self, a: &Sample<T>, b: &Sample<T>, band: T) -> Result<C<T>> {
        let dz = a.z - b.z;
        let dist = dz.norm();
        if dist > band {
            return Ok((a.value - b.value) / dz);
        }
        let zm = unit(a.z + b.z);
        if dist < self.delta_d {
            return self.phi.d1(zm);
        }
        // θ0 = θm + δ, θ1 = θm - δ; F(θ0) - F(θ1) = 2δ[F'(θm) + δ(F''(θ0) - F''(θ1))/12] + O(δ^5)
        // and z0 - z1 = 2i sin(δ) zm.
        let delta = (a.z * b.z.conj()).arg() / T::lit(2.0);
        let theta_m = Float::atan2(zm.im, zm.re);
        let corr = match (a.angle_d2, b.angle_d2) {
            (Some(p), Some(q)) => (p - q) * (delta / T::lit(12.0)),
            _ => cplx(T::zero(), T::zero()),
        };
        let slope = self.phi.angle_d1(theta_m)? + corr;
        let ratio = delta / Float::sin(delta);
        Ok(slope * ratio * cplx(T::zero(), -T::one()) * zm.conj())
    }

    /// `φ^{[2]}(z0, z1, z2)`.
    pub fn dd2(&self, a: &Sample<T>, b: &Sample<T>, c: &Sample<T>) -> Result<C<T>> {
        if self.phi.smoothness() < Smoothness::C2 {
            return Err(Error::NotC2);
        }
        let d01 = (a.z - b.z).norm();
        let d12 = (b.z - c.z).norm();
        let d02 = (a.z - c.z).norm();
        // Put the farthest pair at the ends; the value is symmetric.
        let (x0, x1, x2, span) = if d02 >= d01 && d02 >= d12 {
            (a, b, c, d02)
        } else if d01 >= d12 {
            (a, c, b, d01)
        } else {
            (b, a, c, d12)
        };
        if span > self.delta_c {
            let p = self.dd1_inner(x0, x1)?;
            let q = self.dd1_inner(x1, x2)?;
            return Ok((p - q) / (x0.z - x2.z));
        }
        let zc = unit(a.z + b.z + c.z);
        Ok(self.phi.d2(zc)? / T::lit(2.0))
    }
}

fn unit<T: Real>(z: C<T>) -> C<T> {
    let r = z.norm();
    if r > T::zero() {
        z / r
    } else {
        cplx(T::one(), T::zero())
    }
}

pub fn divided_diff_1<T: Real, F: CircleFunction<T> + ?Sized>(phi: &F, z0: C<T>, z1: C<T>) -> Result<C<T>> {
    let dd = DividedDifferences::new(phi);
    dd.dd1(&dd.sample(z0)?, &dd.sample(z1)?)
}

pub fn divided_diff_2<T: Real, F: CircleFunction<T> + ?Sized>(phi: &F, z0: C<T>, z1: C<T>, z2: C<T>) -> Result<C<T>> {
    let dd = DividedDifferences::new(phi);
    dd.dd2(&dd.sample(z0)?, &dd.sample(z1)?, &dd.sample(z2)?)
}

/// `ς(z0, z1, z2) = z1 f^{[2]}(z0, z1, z2)`.
pub fn eval_varsigma<T: Real>(z0: C<T>, z1: C<T>, z2: C<T>) -> Result<C<T>> {
    let f: FFunction<T> = make_f();
    Ok(z1 * divided_diff_2(&f, z0, z1, z2)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::{make_g, Laurent};
    use crate::random::{random_circle_point, rng_from_seed};
    use crate::scalar::cis;

    fn one() -> C<f64> {
        cplx(1.0, 0.0)
    }

    #[test]
    fn identity_and_square() {
        let id = Laurent::<f64>::monomial(1);
        let sq = Laurent::<f64>::monomial(2);
        for (t0, t1) in [(0.3, 2.0), (0.3, 0.3 + 1e-7), (0.3, 0.3 + 1e-11), (1.0, 1.0), (-3.1, 3.1)] {
            let (z0, z1) = (cis(t0), cis(t1));
            assert!((divided_diff_1(&id, z0, z1).unwrap() - one()).norm() < 1e-12);
            assert!((divided_diff_1(&sq, z0, z1).unwrap() - (z0 + z1)).norm() < 1e-12);
        }
    }

    #[test]
    fn coincidence_is_derivative() {
        let f = make_f::<f64>();
        let z = cis(0.3);
        assert_eq!(divided_diff_1(&f, z, z).unwrap(), f.d1(z).unwrap());
    }

    #[test]
    fn symmetry() {
        let f = make_f::<f64>();
        let mut rng = rng_from_seed(21);
        for _ in 0..50 {
            let z0 = random_circle_point::<f64>(&mut rng);
            let z1 = random_circle_point::<f64>(&mut rng);
            assert_eq!(divided_diff_1(&f, z0, z1).unwrap(), divided_diff_1(&f, z1, z0).unwrap());
            for s in [3e-7, 2e-8, 5e-10] {
                let w = z0 * cis(s);
                let a = divided_diff_1(&f, z0, w).unwrap();
                let b = divided_diff_1(&f, w, z0).unwrap();
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn continuity_at_coincidence() {
        let f = make_f::<f64>();
        let mut rng = rng_from_seed(22);
        // Constant measured once on a coarse probe and then fixed.
        let c = 20.0;
        for _ in 0..100 {
            let z0 = random_circle_point::<f64>(&mut rng);
            let d = f.d1(z0).unwrap();
            for s in [9e-4, 1e-4, 3e-6, 4e-7, 2e-9] {
                let z1 = z0 * cis(s);
                let v = divided_diff_1(&f, z0, z1).unwrap();
                assert!((v - d).norm() <= c * (z0 - z1).norm() + 1e-12);
            }
        }
    }

    #[test]
    fn band_matches_quotient_for_smooth_functions() {
        let p = Laurent::<f64>::new(vec![(4, cplx(1.0, 0.5)), (-3, cplx(0.2, 0.0))]);
        let z0 = cis(1.1);
        for s in [5e-7, 1e-7, 3e-9] {
            let z1 = z0 * cis(s);
            // Quotient expanded by algebra, free of cancellation.
            let alg = (z0.powi(3) + z0 * z0 * z1 + z0 * z1 * z1 + z1.powi(3)) * cplx(1.0, 0.5)
                - (z0 * z0 + z0 * z1 + z1 * z1) / (z0.powi(3) * z1.powi(3)) * 0.2;
            let got = divided_diff_1(&p, z0, z1).unwrap();
            assert!((got - alg).norm() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn second_order_polynomials() {
        let sq = Laurent::<f64>::monomial(2);
        let cube = Laurent::<f64>::monomial(3);
        let mut rng = rng_from_seed(23);
        for _ in 0..30 {
            let z0 = random_circle_point::<f64>(&mut rng);
            for (z1, z2) in [
                (random_circle_point(&mut rng), random_circle_point(&mut rng)),
                (z0 * cis(1e-7), z0 * cis(-3e-7)),
                (z0, z0),
                (z0 * cis(2e-4), z0 * cis(5e-4)),
            ] {
                assert!((divided_diff_2(&sq, z0, z1, z2).unwrap() - one()).norm() < 1e-9);
                let v = divided_diff_2(&cube, z0, z1, z2).unwrap();
                assert!((v - (z0 + z1 + z2)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn second_order_symmetry_for_f() {
        let f = make_f::<f64>();
        let mut rng = rng_from_seed(24);
        for k in 0..60 {
            let z0 = random_circle_point::<f64>(&mut rng);
            let (z1, z2) = match k % 3 {
                0 => (random_circle_point(&mut rng), random_circle_point(&mut rng)),
                1 => (z0 * cis(3e-5), random_circle_point(&mut rng)),
                _ => (z0 * cis(2e-7), z0 * cis(-5e-7)),
            };
            let pts = [z0, z1, z2];
            let base = divided_diff_2(&f, z0, z1, z2).unwrap();
            for p in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                let v = divided_diff_2(&f, pts[p[0]], pts[p[1]], pts[p[2]]).unwrap();
                assert!((v - base).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn varsigma_slice_identities() {
        let g = make_g::<f64>();
        let mut rng = rng_from_seed(25);
        for k in 0..100 {
            let z0 = if k % 10 == 0 { one() } else { random_circle_point::<f64>(&mut rng) };
            let z2 = if k % 7 == 0 { z0 } else { random_circle_point::<f64>(&mut rng) };
            let lhs = eval_varsigma(z0, one(), z2).unwrap();
            let rhs = divided_diff_1(&g, z0, z2).unwrap();
            assert!((lhs - rhs).norm() < 1e-8, "{z0} {z2}: {lhs} {rhs}");
        }
        for _ in 0..20 {
            let z2 = random_circle_point::<f64>(&mut rng);
            let lhs = eval_varsigma(one(), one(), z2).unwrap();
            let rhs = -g.value(z2).unwrap() / (one() - z2);
            assert!((lhs - rhs).norm() < 1e-10);
            let lhs = eval_varsigma(z2, one(), z2).unwrap();
            assert!((lhs - g.d1(z2).unwrap()).norm() < 1e-8);
        }
    }

    #[test]
    fn errors() {
        let g = make_g::<f64>();
        let z = cis(0.5);
        assert_eq!(divided_diff_2(&g, z, z, z), Err(Error::NotC2));
        assert!(matches!(divided_diff_1(&g, z * 1.001, z), Err(Error::NotOnCircle { .. })));
    }
}
