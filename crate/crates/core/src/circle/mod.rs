//! Scalar functions on the unit circle and their divided differences.

mod divided;
mod hgf;

use std::fmt::Write as _;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::{cis, cplx, czero, Real, C};

pub use divided::{divided_diff_1, divided_diff_2, eval_varsigma, DividedDifferences, Sample, DELTA_C, DELTA_D};
pub use hgf::{eval_h, eval_h_derivatives, make_f, make_g, FFunction, GFunction, HFunction};

/// Declared differentiability class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Smoothness {
    C1,
    C2,
}

/// A function on the unit circle with complex derivatives in `z`.
///
/// Angle derivatives refer to `θ ↦ φ(e^{iθ})`: `F' = i z φ'` and `F'' = -z(φ' + z φ'')`.
pub trait CircleFunction<T: Real>: Sync {
    fn value(&self, z: C<T>) -> Result<C<T>>;
    fn d1(&self, z: C<T>) -> Result<C<T>>;
    fn d2(&self, z: C<T>) -> Result<C<T>>;
    fn smoothness(&self) -> Smoothness;

    /// Angles in `(-π, π]` where `d2` may be unavailable.
    fn singular_angles(&self) -> Vec<T> {
        Vec::new()
    }

    fn angle_d1(&self, theta: T) -> Result<C<T>> {
        let z = cis(theta);
        Ok(cplx(T::zero(), T::one()) * z * self.d1(z)?)
    }

    fn angle_d2(&self, theta: T) -> Result<C<T>> {
        let z = cis(theta);
        Ok(-(z * (self.d1(z)? + z * self.d2(z)?)))
    }
}

/// A real function on `[-π, π]` extended 2π-periodically.
pub trait RealLineFunction<T: Real>: Sync {
    fn value(&self, x: T) -> T;
    fn d1(&self, x: T) -> T;
    fn d2(&self, x: T) -> Result<T>;
    fn singular_points(&self) -> Vec<T>;
}

/// Laurent polynomial `Σ c_k z^k`; covers monomials and constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Laurent<T: Real> {
    terms: Vec<(i32, C<T>)>,
}

impl<T: Real> Laurent<T> {
    pub fn new(terms: Vec<(i32, C<T>)>) -> Self {
        Self { terms }
    }

    pub fn monomial(k: i32) -> Self {
        Self::new(vec![(k, cplx(T::one(), T::zero()))])
    }

    pub fn constant(c: C<T>) -> Self {
        Self::new(vec![(0, c)])
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut terms = Vec::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                terms.push((a + b, *ca * *cb));
            }
        }
        Self::new(terms)
    }

    fn eval_with(&self, z: C<T>, order: i32) -> C<T> {
        let mut acc = czero();
        for &(k, c) in &self.terms {
            let mut fall = T::one();
            for r in 0..order {
                fall = fall * T::lit((k - r) as f64);
            }
            if fall != T::zero() {
                acc = acc + c * z.powi(k - order) * fall;
            }
        }
        acc
    }
}

impl<T: Real> CircleFunction<T> for Laurent<T> {
    fn value(&self, z: C<T>) -> Result<C<T>> {
        Ok(self.eval_with(z, 0))
    }
    fn d1(&self, z: C<T>) -> Result<C<T>> {
        Ok(self.eval_with(z, 1))
    }
    fn d2(&self, z: C<T>) -> Result<C<T>> {
        Ok(self.eval_with(z, 2))
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::C2
    }
}

/// CSV table `theta, value, d1, d2` (complex columns split into re/im) on a uniform grid of `(-π, π]`.
///
/// Derivatives that are undefined at a sample are left empty.
pub fn export_csv<T: Real, F: CircleFunction<T> + ?Sized>(phi: &F, resolution: usize) -> String {
    let mut out = String::from("theta,value_re,value_im,d1_re,d1_im,d2_re,d2_im\n");
    let two_pi = T::lit(2.0) * T::PI();
    for s in 1..=resolution {
        let theta = -T::PI() + two_pi * T::lit(s as f64) / T::lit(resolution as f64);
        let z = cis(theta);
        let _ = write!(out, "{}", theta);
        for v in [phi.value(z), phi.d1(z), phi.d2(z)] {
            match v {
                Ok(v) if Float::is_finite(v.re) && Float::is_finite(v.im) => {
                    let _ = write!(out, ",{},{}", v.re, v.im);
                }
                _ => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laurent_derivatives() {
        let p = Laurent::<f64>::new(vec![(3, cplx(1.0, 0.0)), (-1, cplx(0.0, 2.0))]);
        let z = cis(0.4);
        let want_d1 = z * z * 3.0 - cplx(0.0, 2.0) / (z * z);
        let want_d2 = z * 6.0 + cplx(0.0, 4.0) / (z * z * z);
        assert!((p.d1(z).unwrap() - want_d1).norm() < 1e-14);
        assert!((p.d2(z).unwrap() - want_d2).norm() < 1e-14);
    }

    #[test]
    fn angle_derivatives_of_monomial() {
        // θ ↦ e^{2iθ}: F' = 2i e^{2iθ}, F'' = -4 e^{2iθ}.
        let p = Laurent::<f64>::monomial(2);
        let t = 0.9;
        assert!((p.angle_d1(t).unwrap() - cplx(0.0, 2.0) * cis(2.0 * t)).norm() < 1e-14);
        assert!((p.angle_d2(t).unwrap() + cis(2.0 * t) * 4.0).norm() < 1e-14);
    }

    #[test]
    fn csv_shape() {
        let csv = export_csv(&make_g::<f64>(), 8);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines.iter().all(|l| l.split(',').count() == 7));
        // θ = 0 sits in the grid and g'' is singular there.
        assert!(lines.iter().any(|l| l.ends_with(",,")));
    }
}
