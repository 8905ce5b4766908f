//! The function `h(x) = |x| (ln(1 - ln|x|))^{-1/2}` near zero, its even periodic extension,
//! and the circle functions `g(e^{iθ}) = h(θ)` and `f(z) = (z - 1) g(z)`.

use num_traits::Float;

use super::{CircleFunction, RealLineFunction, Smoothness};
use crate::error::{Error, Result};
use crate::scalar::{cplx, Real, C};

/// `h` with a quintic Hermite bridge on `[e^{-1}, π]`.
#[derive(Clone, Copy, Debug)]
pub struct HFunction<T: Real> {
    a: T,
    width: T,
    p0: T,
    m: T,
    c: T,
    alpha: T,
    beta: T,
    gamma: T,
}

impl<T: Real> Default for HFunction<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> HFunction<T> {
    pub fn new() -> Self {
        let a = T::one() / T::E();
        let width = T::PI() - a;
        let p0 = closed_value(a);
        let m0 = closed_d1(a);
        let c0 = closed_d2(a);
        // Endpoint value at π; the bridge is flat to second order there.
        let p1 = p0 + m0 * width / T::lit(2.0);
        let m = width * m0;
        let c = width * width * c0;
        let half = T::lit(0.5);
        let r0 = p1 - p0 - m - c * half;
        let r1 = -m - c;
        let r2 = -c;
        Self {
            a,
            width,
            p0,
            m,
            c,
            alpha: T::lit(10.0) * r0 - T::lit(4.0) * r1 + half * r2,
            beta: T::lit(-15.0) * r0 + T::lit(7.0) * r1 - r2,
            gamma: T::lit(6.0) * r0 - T::lit(3.0) * r1 + half * r2,
        }
    }

    /// Right end of the closed-form region, `e^{-1}`.
    pub fn joint(&self) -> T {
        self.a
    }

    fn bridge(&self, u: T) -> (T, T, T) {
        let s = (u - self.a) / self.width;
        let (al, be, ga) = (self.alpha, self.beta, self.gamma);
        let half = T::lit(0.5);
        let v = self.p0 + s * (self.m + s * (self.c * half + s * (al + s * (be + s * ga))));
        let ds = self.m + s * (self.c + s * (T::lit(3.0) * al + s * (T::lit(4.0) * be + s * T::lit(5.0) * ga)));
        let dss = self.c + s * (T::lit(6.0) * al + s * (T::lit(12.0) * be + s * T::lit(20.0) * ga));
        (v, ds / self.width, dss / (self.width * self.width))
    }

    /// `h(x)`, total on the real line.
    pub fn eval(&self, x: T) -> T {
        let u = Float::abs(reduce(x));
        if u <= self.a {
            closed_value(u)
        } else {
            self.bridge(u).0
        }
    }

    /// `h'(x)`, with `h'(0) = 0`.
    pub fn eval_d1(&self, x: T) -> T {
        let r = reduce(x);
        let u = Float::abs(r);
        let d = if u == T::zero() {
            T::zero()
        } else if u <= self.a {
            closed_d1(u)
        } else {
            self.bridge(u).1
        };
        if r < T::zero() {
            -d
        } else {
            d
        }
    }

    /// `h''(x)`; singular at `x = 0`.
    pub fn eval_d2(&self, x: T) -> Result<T> {
        let u = Float::abs(reduce(x));
        if u == T::zero() {
            Err(Error::SecondDerivativeSingular)
        } else if u <= self.a {
            Ok(closed_d2(u))
        } else {
            Ok(self.bridge(u).2)
        }
    }
}

impl<T: Real> RealLineFunction<T> for HFunction<T> {
    fn value(&self, x: T) -> T {
        self.eval(x)
    }
    fn d1(&self, x: T) -> T {
        self.eval_d1(x)
    }
    fn d2(&self, x: T) -> Result<T> {
        self.eval_d2(x)
    }
    fn singular_points(&self) -> Vec<T> {
        vec![T::zero()]
    }
}

/// Reduces to `[-π, π]`.
fn reduce<T: Real>(x: T) -> T {
    if Float::abs(x) <= T::PI() {
        return x;
    }
    let two_pi = T::lit(2.0) * T::PI();
    x - two_pi * Float::round(x / two_pi)
}

fn closed_value<T: Real>(u: T) -> T {
    if u == T::zero() {
        return T::zero();
    }
    let q = Float::ln(T::one() - Float::ln(u));
    u / Float::sqrt(q)
}

fn closed_d1<T: Real>(u: T) -> T {
    let l = T::one() - Float::ln(u);
    let q = Float::ln(l);
    let sq = Float::sqrt(q);
    T::one() / sq + T::lit(0.5) / (q * sq * l)
}

fn closed_d2<T: Real>(u: T) -> T {
    let l = T::one() - Float::ln(u);
    let q = Float::ln(l);
    let q32 = q * Float::sqrt(q);
    let q52 = q32 * q;
    let half = T::lit(0.5);
    (half / q32 + T::lit(0.75) / (q52 * l) + half / (q32 * l)) / (u * l)
}

/// `h(x)` with the default extension.
pub fn eval_h<T: Real>(x: T) -> T {
    HFunction::new().eval(x)
}

/// `(h'(x), h''(x))`; fails at `x = 0` where only `h'(0) = 0` exists.
pub fn eval_h_derivatives<T: Real>(x: T) -> Result<(T, T)> {
    let h = HFunction::new();
    Ok((h.eval_d1(x), h.eval_d2(x)?))
}

/// `g(e^{iθ}) = h(θ)`, a C¹ function on the circle.
#[derive(Clone, Copy, Debug, Default)]
pub struct GFunction<T: Real> {
    pub h: HFunction<T>,
}

/// `f(z) = (z - 1) g(z)`, a C² function on the circle.
#[derive(Clone, Copy, Debug, Default)]
pub struct FFunction<T: Real> {
    pub h: HFunction<T>,
}

pub fn make_g<T: Real>() -> GFunction<T> {
    GFunction { h: HFunction::new() }
}

pub fn make_f<T: Real>() -> FFunction<T> {
    FFunction { h: HFunction::new() }
}

fn angle<T: Real>(z: C<T>) -> T {
    Float::atan2(z.im, z.re)
}

fn i_unit<T: Real>() -> C<T> {
    cplx(T::zero(), T::one())
}

impl<T: Real> CircleFunction<T> for GFunction<T> {
    fn value(&self, z: C<T>) -> Result<C<T>> {
        Ok(cplx(self.h.eval(angle(z)), T::zero()))
    }

    fn d1(&self, z: C<T>) -> Result<C<T>> {
        Ok(-i_unit::<T>() * z.conj() * self.h.eval_d1(angle(z)))
    }

    fn d2(&self, z: C<T>) -> Result<C<T>> {
        let t = angle(z);
        let zb = z.conj();
        Ok((i_unit::<T>() * self.h.eval_d1(t) - self.h.eval_d2(t)?) * zb * zb)
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C1
    }

    fn singular_angles(&self) -> Vec<T> {
        vec![T::zero()]
    }

    fn angle_d1(&self, theta: T) -> Result<C<T>> {
        Ok(cplx(self.h.eval_d1(theta), T::zero()))
    }

    fn angle_d2(&self, theta: T) -> Result<C<T>> {
        Ok(cplx(self.h.eval_d2(theta)?, T::zero()))
    }
}

impl<T: Real> FFunction<T> {
    fn g(&self) -> GFunction<T> {
        GFunction { h: self.h }
    }
}

impl<T: Real> CircleFunction<T> for FFunction<T> {
    fn value(&self, z: C<T>) -> Result<C<T>> {
        Ok((z - T::one()) * self.h.eval(angle(z)))
    }

    fn d1(&self, z: C<T>) -> Result<C<T>> {
        let g = self.g();
        Ok(g.value(z)? + (z - T::one()) * g.d1(z)?)
    }

    fn d2(&self, z: C<T>) -> Result<C<T>> {
        let g = self.g();
        let two = T::lit(2.0);
        if angle(z) == T::zero() {
            // (z - 1) g''(z) -> 0 while g'(1) = -i h'(0) = 0.
            return Ok(g.d1(z)? * two);
        }
        Ok(g.d1(z)? * two + (z - T::one()) * g.d2(z)?)
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness::C2
    }

    fn angle_d1(&self, theta: T) -> Result<C<T>> {
        let z = crate::scalar::cis(theta);
        Ok(i_unit::<T>() * z * self.h.eval(theta) + (z - T::one()) * self.h.eval_d1(theta))
    }

    fn angle_d2(&self, theta: T) -> Result<C<T>> {
        let z = crate::scalar::cis(theta);
        let hv = self.h.eval(theta);
        let h1 = self.h.eval_d1(theta);
        let tail =
            if theta == T::zero() { cplx(T::zero(), T::zero()) } else { (z - T::one()) * self.h.eval_d2(theta)? };
        Ok(-z * hv + i_unit::<T>() * z * (h1 * T::lit(2.0)) + tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cis;
    use rand::Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn h_special_values() {
        assert_eq!(eval_h(0.0f64), 0.0);
        let e1 = (-1.0f64).exp();
        let want = e1 / 2.0f64.ln().sqrt();
        assert!((eval_h(e1) - want).abs() < 1e-15);
        assert!((want - 0.44186).abs() < 1e-5);
    }

    #[test]
    fn h_even_and_periodic() {
        let mut rng = crate::random::rng_from_seed(17);
        let h = HFunction::<f64>::new();
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-3.2..3.2);
            assert_eq!(h.eval(x), h.eval(-x));
            let p = h.eval(x + 2.0 * std::f64::consts::PI);
            assert!((p - h.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn h_derivative_at_zero() {
        let h = HFunction::<f64>::new();
        assert_eq!(h.eval_d1(0.0), 0.0);
        let mut last = f64::INFINITY;
        for k in 2..12 {
            let x = 10f64.powi(-k);
            let q = h.eval(x) / x;
            assert!(q < last);
            last = q;
        }
        // The decay is only logarithmic: h(x)/x = (ln(1 - ln x))^{-1/2}.
        assert!(last < 0.6);
        assert!((eval_h(1e-300f64) / 1e-300) < 0.4);
        assert_eq!(eval_h_derivatives(0.0f64), Err(Error::SecondDerivativeSingular));
    }

    #[test]
    fn h_derivatives_match_differences() {
        let h = HFunction::<f64>::new();
        for x in [0.1, -0.1, 0.25, 0.5, 1.3, 2.9, -2.0] {
            let s = 1e-5;
            let fd1 = (h.eval(x + s) - h.eval(x - s)) / (2.0 * s);
            let fd2 = (h.eval_d1(x + s) - h.eval_d1(x - s)) / (2.0 * s);
            assert!(rel(h.eval_d1(x), fd1) < 1e-6, "h' at {x}");
            assert!(rel(h.eval_d2(x).unwrap(), fd2) < 1e-6, "h'' at {x}");
        }
    }

    #[test]
    fn x_times_second_derivative_vanishes() {
        let (_, d2) = eval_h_derivatives(1e-8f64).unwrap();
        assert!((1e-8 * d2).abs() < 0.05);
    }

    #[test]
    fn bridge_joins_smoothly() {
        let h = HFunction::<f64>::new();
        let a = h.joint();
        let (v, d1, d2) = h.bridge(a);
        assert!((v - closed_value(a)).abs() < 1e-15);
        assert!((d1 - closed_d1(a)).abs() < 1e-14);
        assert!((d2 - closed_d2(a)).abs() < 1e-12);
        let (_, e1, e2) = h.bridge(std::f64::consts::PI);
        assert!(e1.abs() < 1e-13 && e2.abs() < 1e-12);
    }

    #[test]
    fn g_and_f_at_one() {
        let g = make_g::<f64>();
        let f = make_f::<f64>();
        let one = cplx(1.0, 0.0);
        assert_eq!(g.value(one).unwrap(), cplx(0.0, 0.0));
        assert_eq!(f.value(one).unwrap(), cplx(0.0, 0.0));
        assert_eq!(f.d1(one).unwrap().norm(), 0.0);
        assert_eq!(f.d2(one).unwrap().norm(), 0.0);
        assert!(matches!(g.d2(one), Err(Error::SecondDerivativeSingular)));
    }

    #[test]
    fn f_composed() {
        let f = make_f::<f64>();
        let z = cis(0.2);
        let want = (z - 1.0) * eval_h(0.2);
        assert!((f.value(z).unwrap() - want).norm() < 1e-12);
    }

    fn circle_fd<F: CircleFunction<f64>>(phi: &F, z: C<f64>, s: f64, order: u8) -> C<f64> {
        let (zp, zm) = (z * cis(s), z * cis(-s));
        let (a, b) = match order {
            1 => (phi.value(zp).unwrap(), phi.value(zm).unwrap()),
            _ => (phi.d1(zp).unwrap(), phi.d1(zm).unwrap()),
        };
        (a - b) / (zp - zm)
    }

    #[test]
    fn z_derivatives_match_differences() {
        let g = make_g::<f64>();
        let f = make_f::<f64>();
        for t in [0.05, -0.3, 1.0, 2.5, -1.7] {
            let z = cis(t);
            for (val, fd) in [
                (g.d1(z).unwrap(), circle_fd(&g, z, 1e-5, 1)),
                (g.d2(z).unwrap(), circle_fd(&g, z, 1e-5, 2)),
                (f.d1(z).unwrap(), circle_fd(&f, z, 1e-5, 1)),
                (f.d2(z).unwrap(), circle_fd(&f, z, 1e-5, 2)),
            ] {
                assert!((val - fd).norm() <= 1e-5 * val.norm().max(1e-3), "at θ={t}");
            }
        }
    }

    #[test]
    fn angle_derivatives_consistent_with_default() {
        let f = make_f::<f64>();
        for t in [0.3, -2.0, 1e-4] {
            let z = cis(t);
            let d1 = cplx(0.0, 1.0) * z * f.d1(z).unwrap();
            let d2 = -(z * (f.d1(z).unwrap() + z * f.d2(z).unwrap()));
            assert!((f.angle_d1(t).unwrap() - d1).norm() < 1e-12);
            assert!((f.angle_d2(t).unwrap() - d2).norm() < 1e-10);
        }
    }

    #[test]
    fn f_second_differences_converge_at_zero() {
        let f = make_f::<f64>();
        let second = |t: f64, s: f64| {
            let v = |x: f64| f.value(cis(x)).unwrap();
            (v(t + s) - v(t) * 2.0 + v(t - s)) / (s * s)
        };
        for t in [0.0, 0.2, -1.0] {
            let exact = f.angle_d2(t).unwrap();
            let e3 = (second(t, 1e-3) - exact).norm();
            let e4 = (second(t, 1e-4) - exact).norm();
            assert!(e4 <= e3 + 1e-6, "θ={t}: {e3} {e4}");
            assert!(e4 < 0.1);
        }
    }
}
