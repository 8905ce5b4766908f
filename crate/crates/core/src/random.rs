//! Seeded random instances. Every generator takes an explicit RNG so runs are replayable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;
use crate::scalar::{cis, cplx, Real, C};

pub type Rng64 = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Derives an independent child seed (splitmix64 finalizer over `root ^ tag`).
pub fn child_seed(root: u64, tag: u64) -> u64 {
    let mut z = root ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_c<T: Real>(rng: &mut impl Rng) -> C<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    cplx(T::lit(re * std::f64::consts::FRAC_1_SQRT_2), T::lit(im * std::f64::consts::FRAC_1_SQRT_2))
}

/// Complex Ginibre matrix with unit-variance entries.
pub fn random_matrix<T: Real>(n: usize, rng: &mut impl Rng) -> Matrix<T> {
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, gaussian_c(rng));
        }
    }
    m
}

pub fn random_hermitian<T: Real>(n: usize, rng: &mut impl Rng) -> Matrix<T> {
    random_matrix::<T>(n, rng).hermitian_part()
}

/// Haar unitary via the polar factor of a Ginibre matrix.
pub fn random_unitary<T: Real>(n: usize, rng: &mut impl Rng) -> Matrix<T> {
    random_matrix::<T>(n, rng).polar().expect("svd of a Gaussian matrix")
}

/// Random unit-modulus vector.
pub fn random_phases<T: Real>(n: usize, rng: &mut impl Rng) -> Vec<C<T>> {
    (0..n).map(|_| cis(T::lit(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)))).collect()
}

/// A point `e^{iθ}` with θ uniform on `[-π, π)`.
pub fn random_circle_point<T: Real>(rng: &mut impl Rng) -> C<T> {
    random_phases(1, rng)[0]
}
