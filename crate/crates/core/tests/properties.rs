use moilab::circle::{divided_diff_1, make_f, CircleFunction, Laurent};
use moilab::integrals::{toi_apply, TripleOI};
use moilab::pipeline::report::{bookkeeping, AlphaSeries};
use moilab::pipeline::{build_HK, build_adps_pair, select_t_and_B, PipelineOptions, PipelineRecord};
use moilab::random::{gaussian_c, random_hermitian, random_matrix, random_phases, random_unitary, rng_from_seed};
use moilab::scalar::cis;
use moilab::schur::{apply_bilinear, bilinear_norm_221_with, linear_norm_inf_with, CertifyOptions, Symbol2, Symbol3};
use moilab::spectral::{eig_hermitian, eig_unitary, exp_i, functional_calculus};
use moilab::verify::commutation_gap;
use moilab::{ComplexMatrix, MatrixJson, Schatten, C};
use num_rational::BigRational;
use proptest::prelude::*;
use std::f64::consts::PI;

/// Measured once on a dense circle grid as 2.30; fixed here with headroom.
const DD1_LIPSCHITZ: f64 = 3.0;

fn quick() -> CertifyOptions {
    CertifyOptions { starts: 4, max_iter: 100, ..Default::default() }
}

fn contraction(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = rng_from_seed(seed);
    let c = random_matrix::<f64>(n, &mut rng);
    c.scale_real(1.0 / c.norm_inf().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn norm_ordering(seed: u64, n in 1usize..8) {
        let a = random_matrix::<f64>(n, &mut rng_from_seed(seed));
        let inf = a.schatten_norm(Schatten::Inf).unwrap();
        let two = a.schatten_norm(Schatten::Two).unwrap();
        let one = a.schatten_norm(Schatten::One).unwrap();
        prop_assert!(inf <= two * (1.0 + 1e-12) && two <= one * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction(seed: u64, n in 1usize..20) {
        let mut rng = rng_from_seed(seed);
        let u = random_unitary::<f64>(n, &mut rng);
        prop_assert!(eig_unitary(&u).unwrap().reconstruction_error(&u) < 1e-10);
        let h = random_hermitian::<f64>(n, &mut rng);
        let d = eig_hermitian(&h).unwrap();
        prop_assert!(d.reconstruction_error(&h) < 1e-10 * h.norm_inf().unwrap().max(1.0));
    }

    #[test]
    fn exp_i_is_unitary(seed: u64, n in 1usize..20, scale in 0.01f64..50.0) {
        let h = random_hermitian::<f64>(n, &mut rng_from_seed(seed)).scale_real(scale);
        prop_assert!(exp_i(&h).unwrap().is_unitary(1e-10));
    }

    #[test]
    fn schatten_conjugation_invariance(seed: u64, n in 1usize..12) {
        let mut rng = rng_from_seed(seed);
        let a = random_matrix::<f64>(n, &mut rng);
        let v = random_unitary::<f64>(n, &mut rng);
        let b = &(&v.adjoint() * &a) * &v;
        for p in [Schatten::One, Schatten::Two, Schatten::Inf] {
            let (x, y) = (a.schatten_norm(p).unwrap(), b.schatten_norm(p).unwrap());
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn calculus_is_multiplicative(seed: u64, n in 1usize..10, a in -3i32..4, b in -3i32..4) {
        let mut rng = rng_from_seed(seed);
        let u = random_unitary::<f64>(n, &mut rng);
        let phi = Laurent::new(vec![(a, gaussian_c(&mut rng)), (0, gaussian_c(&mut rng))]);
        let psi = Laurent::new(vec![(b, gaussian_c(&mut rng)), (1, gaussian_c(&mut rng))]);
        let lhs = functional_calculus(&phi.product(&psi), &u).unwrap();
        let rhs = &functional_calculus(&phi, &u).unwrap() * &functional_calculus(&psi, &u).unwrap();
        prop_assert!((&lhs - &rhs).norm_inf().unwrap() <= 1e-10 * (1.0 + rhs.norm_inf().unwrap()));
    }

    #[test]
    fn divided_difference_on_diagonal(theta in -PI..PI) {
        let f = make_f::<f64>();
        let z = cis(theta);
        prop_assert!((divided_diff_1(&f, z, z).unwrap() - f.d1(z).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn divided_difference_lipschitz_near_diagonal(theta in -PI..PI, d in 1e-9f64..1e-3) {
        let f = make_f::<f64>();
        let (z0, z1) = (cis(theta), cis(theta + d));
        let gap = (divided_diff_1(&f, z0, z1).unwrap() - f.d1(z0).unwrap()).norm();
        prop_assert!(gap <= DD1_LIPSCHITZ * (z0 - z1).norm() + 1e-10);
    }

    #[test]
    fn toi_is_bilinear(seed: u64, n in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let f = make_f::<f64>();
        let ds: Vec<_> = (0..3).map(|_| eig_unitary(&random_unitary::<f64>(n, &mut rng)).unwrap()).collect();
        let t = TripleOI::second_difference(&f, &ds[0], &ds[1], &ds[2]).unwrap();
        let (x1, x2, y) = (random_matrix::<f64>(n, &mut rng), random_matrix::<f64>(n, &mut rng), random_matrix::<f64>(n, &mut rng));
        let c = gaussian_c::<f64>(&mut rng);
        let lhs = t.apply(&(&x1.scale(c) + &x2), &y).unwrap();
        let rhs = &t.apply(&x1, &y).unwrap().scale(c) + &t.apply(&x2, &y).unwrap();
        prop_assert!((&lhs - &rhs).norm_inf().unwrap() <= 1e-12 * (1.0 + rhs.norm_inf().unwrap()));
        let lhs = t.apply(&y, &x1.scale(c)).unwrap();
        let rhs = t.apply(&y, &x1).unwrap().scale(c);
        prop_assert!((&lhs - &rhs).norm_inf().unwrap() <= 1e-12 * (1.0 + rhs.norm_inf().unwrap()));
    }

    #[test]
    fn toi_unitary_invariance(seed: u64, n in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let f = make_f::<f64>();
        let psi = |a, b, c| moilab::circle::divided_diff_2(&f, a, b, c);
        let us: Vec<_> = (0..3).map(|_| random_unitary::<f64>(n, &mut rng)).collect();
        let (x, y) = (random_matrix::<f64>(n, &mut rng), random_matrix::<f64>(n, &mut rng));
        let v = random_unitary::<f64>(n, &mut rng);
        let conj = |a: &ComplexMatrix| &(&v * a) * &v.adjoint();
        let base = toi_apply(psi, &us[0], &us[1], &us[2], &x, &y).unwrap();
        let moved = toi_apply(psi, &conj(&us[0]), &conj(&us[1]), &conj(&us[2]), &conj(&x), &conj(&y)).unwrap();
        prop_assert!((&moved - &conj(&base)).norm_inf().unwrap() <= 1e-10 * (1.0 + base.norm_inf().unwrap()));
    }

    #[test]
    fn commutation_identity(seed: u64, n in 1usize..10) {
        let mut rng = rng_from_seed(seed);
        let u = random_unitary::<f64>(n, &mut rng);
        let w = random_hermitian::<f64>(n, &mut rng);
        let w = w.scale_real(1.0 / w.frobenius());
        prop_assert!(commutation_gap(&u, &eig_unitary(&u).unwrap(), &w).unwrap().0 < 1e-9);
    }

    #[test]
    fn matrix_json_round_trip_is_bit_exact(seed: u64, n in 0usize..6) {
        let a = random_matrix::<f64>(n, &mut rng_from_seed(seed)).scale_real(1e-7);
        let text = serde_json::to_string(&a.to_json()).unwrap();
        let back = ComplexMatrix::from_json(&serde_json::from_str::<MatrixJson>(&text).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(a.get(i, j).re.to_bits(), back.get(i, j).re.to_bits());
                prop_assert_eq!(a.get(i, j).im.to_bits(), back.get(i, j).im.to_bits());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn schur_norm_invariant_under_diagonal_twist(seed: u64, n in 2usize..5) {
        let mut rng = rng_from_seed(seed);
        let m = Symbol2::new(random_matrix::<f64>(n, &mut rng)).unwrap();
        let (u, v) = (random_phases::<f64>(n, &mut rng), random_phases::<f64>(n, &mut rng));
        let a = linear_norm_inf_with(&m, &quick()).unwrap();
        let b = linear_norm_inf_with(&m.twisted(&u, &v), &quick()).unwrap();
        prop_assert!(a.lower <= b.upper + 1e-6 && b.lower <= a.upper + 1e-6);
    }

    #[test]
    fn schur_norm_monotone_under_restriction(seed: u64, n in 3usize..6) {
        let m = Symbol2::new(random_matrix::<f64>(n, &mut rng_from_seed(seed))).unwrap();
        let idx: Vec<usize> = (0..n).filter(|i| i % 2 == 0 || *i == 1).collect();
        let sub = linear_norm_inf_with(&m.restrict(&idx), &quick()).unwrap();
        let full = linear_norm_inf_with(&m, &quick()).unwrap();
        prop_assert!(sub.lower <= full.upper + 1e-6);
    }

    #[test]
    fn bilinear_trace_duality(seed: u64, n in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let vals: Vec<C<f64>> = (0..n * n * n).map(|_| gaussian_c(&mut rng)).collect();
        let m = Symbol3::from_fn(n, |i, k, j| vals[(i * n + k) * n + j]).unwrap();
        let cert = bilinear_norm_221_with(&m, &quick(), 2).unwrap();
        let (x, y) = (random_matrix::<f64>(n, &mut rng), random_matrix::<f64>(n, &mut rng));
        let c = contraction(n, seed ^ 0xabc);
        let lhs = (&apply_bilinear(&m, &x, &y).unwrap() * &c.adjoint()).trace().norm();
        prop_assert!(lhs <= cert.certificate.upper * x.frobenius() * y.frobenius() * (1.0 + 1e-9) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn conjugacy_along_the_construction(seed: u64, n in 3usize..6) {
        let opts = PipelineOptions::default();
        let pair = build_adps_pair(n, seed, &opts).unwrap();
        prop_assert!((pair.comm_norm - std::f64::consts::PI).abs() < 1e-9);
        prop_assert!(pair.lambda.iter().any(|l| l.abs() < 1e-10));
        let tc = select_t_and_B(&pair, &opts).unwrap();
        prop_assert!(tc.spectrum_gap < 1e-9);
        let hk = build_HK(&pair.d, &pair.lambda, &tc.b).unwrap();
        prop_assert!(hk.spectrum_gap < 1e-9);
        prop_assert!(hk.kh_norm <= tc.b_norm + 1e-10);
    }
}

fn synthetic_record(n: usize, m: u64, beta: f64) -> PipelineRecord {
    let mut r: PipelineRecord = serde_json::from_str(include_str!("data/record_template.json")).unwrap();
    r.n = n;
    r.m = m;
    r.z_hs = 1.0 / m as f64;
    r.beta = beta;
    r
}

proptest! {
    #[test]
    fn bookkeeping_inequalities_hold_exactly(
        entries in prop::collection::vec((3usize..400, 3u64..5000, 1e-12f64..1.0), 1..8),
        nlogn: bool,
    ) {
        let series = if nlogn { AlphaSeries::InverseNlogn } else { AlphaSeries::InverseSquare };
        let records: Vec<_> = entries.iter().map(|(n, m, b)| synthetic_record(*n, *m, *b)).collect();
        for row in bookkeeping::<BigRational>(&records, series) {
            prop_assert!(row.upper_ok && row.lower_ok);
        }
    }
}

#[test]
fn template_parses() {
    let r = synthetic_record(5, 7, 0.5);
    assert_eq!(r.n, 5);
    assert_eq!(r.z_hs, 1.0 / 7.0);
}
