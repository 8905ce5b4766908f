//! Seeded residual checks of the operator-integral identities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circle::{divided_diff_1, divided_diff_2, eval_varsigma, make_f, make_g, CircleFunction};
use crate::error::{Error, Result};
use crate::integrals::{
    bilinear_transfer_gap, derivative_at_zero_with, doi_continuity_check, taylor_remainder, toi_continuity_check,
    DoubleOI, TripleOI,
};
use crate::matrix::Matrix;
use crate::random::{child_seed, random_hermitian, random_matrix, random_unitary, rng_from_seed, Rng64};
use crate::scalar::{cis, cplx};
use crate::schur::{linear_norm_inf_with, CertifyOptions};
use crate::spectral::{eig_unitary, exp_i};

/// Tolerance names accepted by `--tol`, with defaults.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("first_order", 1e-8),
    ("derivative_order", 0.2),
    ("perturbation", 1e-8),
    ("taylor", 1e-8),
    ("linear_transfer", 1e-9),
    ("bilinear_transfer", 1e-9),
    ("continuity", 1e-6),
    ("varsigma", 1e-8),
    ("commutation", 1e-9),
    ("exp_lipschitz", 1e-10),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub instances: usize,
    pub max_dim: usize,
    pub tolerances: BTreeMap<String, f64>,
    /// Flips the sign of the operator-integral term in the first-order check (harness self-test).
    pub inject_fault: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            instances: 8,
            max_dim: 16,
            tolerances: TOLERANCES.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            inject_fault: false,
        }
    }
}

impl VerifyConfig {
    /// Overrides one tolerance; unknown names and non-positive values are rejected.
    pub fn set_tolerance(&mut self, name: &str, value: f64) -> Result<()> {
        if !TOLERANCES.iter().any(|(k, _)| *k == name) {
            return Err(Error::Invalid(format!("unknown tolerance '{name}'")));
        }
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Invalid(format!("tolerance '{name}' must be positive, got {value}")));
        }
        self.tolerances.insert(name.to_string(), value);
        Ok(())
    }

    fn tol(&self, name: &str) -> f64 {
        self.tolerances
            .get(name)
            .copied()
            .or_else(|| TOLERANCES.iter().find(|(k, _)| *k == name).map(|(_, v)| *v))
            .unwrap_or(0.0)
    }

    fn rng(&self, check: u64, instance: usize) -> Rng64 {
        rng_from_seed(child_seed(self.seed, check * 100_000 + instance as u64))
    }

    fn dim(&self, instance: usize) -> usize {
        const LADDER: [usize; 9] = [2, 3, 4, 6, 8, 12, 16, 24, 32];
        let dims: Vec<usize> = LADDER.iter().copied().filter(|d| *d <= self.max_dim.max(2)).collect();
        dims[instance % dims.len()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    /// Worst residual over the instances, in the units the threshold uses.
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn result(name: &str, instances: usize, residual: f64, threshold: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        instances,
        residual,
        threshold,
        passed: residual.is_finite() && residual < threshold,
        detail,
    }
}

/// `‖f(U0) - f(U1) ∓ T_{f^{[1]}}(U0 - U1)‖_∞ / (1 + ‖f(U0)‖_∞)`, worst over instances.
pub fn check_first_order(cfg: &VerifyConfig) -> Result<CheckResult> {
    let f = make_f::<f64>();
    let mut worst = 0.0f64;
    for s in 0..cfg.instances {
        let mut rng = cfg.rng(1, s);
        let n = cfg.dim(s);
        let u0 = random_unitary::<f64>(n, &mut rng);
        let u1 = random_unitary::<f64>(n, &mut rng);
        let d0 = eig_unitary(&u0)?;
        let d1 = eig_unitary(&u1)?;
        let f0 = d0.map(|z| f.value(z))?;
        let lhs = &f0 - &d1.map(|z| f.value(z))?;
        let rhs = DoubleOI::first_difference(&f, &d0, &d1)?.apply(&(&u0 - &u1))?;
        let r = if cfg.inject_fault { &lhs + &rhs } else { &lhs - &rhs };
        worst = worst.max(r.norm_inf()? / (1.0 + f0.norm_inf()?));
    }
    Ok(result("first-order-difference", cfg.instances, worst, cfg.tol("first_order"), String::new()))
}

/// Worst deviation of the observed finite-difference order from 1 over `t ∈ {1e-3, 1e-4, 1e-5}`.
pub fn check_derivative(cfg: &VerifyConfig) -> Result<CheckResult> {
    let f = make_f::<f64>();
    let mut worst = 0.0f64;
    let mut orders = Vec::new();
    for s in 0..cfg.instances {
        let mut rng = cfg.rng(2, s);
        let n = cfg.dim(s);
        let u = random_unitary::<f64>(n, &mut rng);
        let z = random_hermitian::<f64>(n, &mut rng);
        let d = eig_unitary(&u)?;
        let der = derivative_at_zero_with(&f, &u, &d, &z)?;
        let fu = d.map(|w| f.value(w))?;
        let mut errs = Vec::new();
        for t in [1e-3, 1e-4, 1e-5] {
            let ut = &exp_i(&z.scale_real(t))? * &u;
            let q = (&eig_unitary(&ut)?.map(|w| f.value(w))? - &fu).scale_real(1.0 / t);
            errs.push((&q - &der).norm_inf()?);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log10();
            orders.push(order);
            worst = worst.max((order - 1.0).abs());
        }
    }
    let lo = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(result(
        "derivative",
        cfg.instances,
        worst,
        cfg.tol("derivative_order") + 1e-12,
        format!("observed order range [{lo:.4}, {hi:.4}]"),
    ))
}

pub fn check_perturbation(cfg: &VerifyConfig) -> Result<CheckResult> {
    let f = make_f::<f64>();
    let mut worst = 0.0f64;
    for s in 0..cfg.instances {
        let mut rng = cfg.rng(3, s);
        let n = cfg.dim(s);
        let us: Vec<_> = (0..3).map(|_| random_unitary::<f64>(n, &mut rng)).collect();
        let x = random_matrix::<f64>(n, &mut rng);
        let r = crate::integrals::perturbation_identity_residual(&f, &us[0], &us[1], &us[2], &x)?;
        worst = worst.max(r / (1.0 + x.norm_inf()?));
    }
    Ok(result("perturbation", cfg.instances, worst, cfg.tol("perturbation"), String::new()))
}

pub fn check_taylor(cfg: &VerifyConfig) -> Result<CheckResult> {
    let f = make_f::<f64>();
    let mut worst = 0.0f64;
    for s in 0..cfg.instances {
        let mut rng = cfg.rng(4, s);
        let n = cfg.dim(s);
        let u = random_unitary::<f64>(n, &mut rng);
        let z = random_hermitian::<f64>(n, &mut rng);
        let t = taylor_remainder(&f, &u, &z)?;
        worst = worst.max(t.residual()? / (1.0 + z.norm_inf()?));
    }
    Ok(result("taylor-remainder", cfg.instances, worst, cfg.tol("taylor"), String::new()))
}

/// The Schur witness, moved to the original coordinates, attains the certified value on the DOI.
pub fn check_linear_transfer(cfg: &VerifyConfig) -> Result<CheckResult> {
    let f = make_f::<f64>();
    let mut worst = 0.0f64;
    let count = cfg.instances.min(6);
    for s in 0..count {
        let mut rng = cfg.rng(5, s);
        let n = 2 + s % 5;
        let d0 = eig_unitary(&random_unitary::<f64>(n, &mut rng))?;
        let d1 = eig_unitary(&random_unitary::<f64>(n, &mut rng))?;
        let t = DoubleOI::first_difference(&f, &d0, &d1)?;
        let opts = CertifyOptions { starts: 6, seed: child_seed(cfg.seed, s as u64), ..Default::default() };
        let cert = linear_norm_inf_with(t.symbol(), &opts)?;
        let x = d0.from_coords(&cert.witness[0], &d1);
        let ratio = t.apply(&x)?.norm_inf()? / x.norm_inf()?;
        let over = (ratio - cert.upper).max(0.0);
        worst = worst.max((ratio - cert.lower).abs()).max(over);
    }
    Ok(result("linear-transfer", count, worst, cfg.tol("linear_transfer"), String::new()))
}

pub fn check_bilinear_transfer(cfg: &VerifyConfig) -> Result<CheckResult> {
    let f = make_f::<f64>();
    let mut worst = 0.0f64;
    let count = cfg.instances.min(6);
    for s in 0..count {
        let mut rng = cfg.rng(6, s);
        let n = 2 + s % 3;
        let ds: Vec<_> = (0..3).map(|_| eig_unitary(&random_unitary::<f64>(n, &mut rng))).collect::<Result<_>>()?;
        let t = TripleOI::second_difference(&f, &ds[0], &ds[1], &ds[2])?;
        worst = worst.max(bilinear_transfer_gap(&t, 4, child_seed(cfg.seed, 600 + s as u64), 30)?);
    }
    Ok(result("bilinear-transfer", count, worst, cfg.tol("bilinear_transfer"), String::new()))
}

/// Continuity along `F_m = e^{iZ/m} U0`; the residual is the value at `m = 1e6`, and the
/// sequence must decrease.
pub fn check_continuity(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let mut rng = cfg.rng(7, 0);
    let n = cfg.dim(3).min(6);
    let u0 = random_unitary::<f64>(n, &mut rng);
    let u1 = random_unitary::<f64>(n, &mut rng);
    let z = random_hermitian::<f64>(n, &mut rng);
    let z = z.scale_real(0.1 / z.norm_inf()?);
    let tests: Vec<_> = (0..3).map(|_| random_matrix::<f64>(n, &mut rng)).collect();
    let seq = [1e2, 1e3, 1e4, 1e5, 1e6]
        .iter()
        .map(|m| Ok(&exp_i(&z.scale_real(1.0 / m))? * &u0))
        .collect::<Result<Vec<_>>>()?;
    let f = make_f::<f64>();
    let tol = cfg.tol("continuity");
    let judge = |name: &str, errs: Vec<f64>| {
        let monotone = errs.windows(2).all(|w| w[1] < w[0]);
        let last = *errs.last().unwrap_or(&f64::NAN);
        let mut r = result(
            name,
            errs.len(),
            last,
            tol,
            format!("sequence {:?}", errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()),
        );
        r.passed &= monotone;
        r
    };
    let d = doi_continuity_check(|a, b| divided_diff_1(&f, a, b), &u0, &u1, &seq, &tests)?;
    let pairs: Vec<_> = tests.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
    let t = toi_continuity_check(|a, b, c| divided_diff_2(&make_f::<f64>(), a, b, c), [&u0, &u1, &u1], &seq, &pairs)?;
    Ok(vec![judge("doi-continuity", d), judge("toi-continuity", t)])
}

/// `ς(z0, 1, z2) = g^{[1]}(z0, z2)` on a `k x k` grid of angles that contains `0` and `π`.
pub fn check_varsigma_restriction(cfg: &VerifyConfig, k: usize) -> Result<CheckResult> {
    let g = make_g::<f64>();
    let one = cplx(1.0, 0.0);
    let mut worst = 0.0f64;
    // Integer numerator so that the grid hits 0 exactly.
    let angle = |a: usize| std::f64::consts::PI * (2 * (a as i64 + 1) - k as i64) as f64 / k as f64;
    for a in 0..k {
        for b in 0..k {
            let (z0, z2) = (cis(angle(a)), cis(angle(b)));
            let lhs = eval_varsigma(z0, one, z2)?;
            let rhs = divided_diff_1(&g, z0, z2)?;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    Ok(result("varsigma-restriction", k * k, worst, cfg.tol("varsigma"), format!("{k}x{k} grid")))
}

/// `‖T_{f^{[2]}}(WU, WU) - T_ς(W, W) U‖_1 / ‖T_ς(W, W)‖_1`.
pub fn commutation_gap(u: &Matrix<f64>, d: &crate::SpectralDecomposition<f64>, w: &Matrix<f64>) -> Result<(f64, f64)> {
    let f = make_f::<f64>();
    let wu = w * u;
    let a = TripleOI::second_difference(&f, d, d, d)?.apply(&wu, &wu)?;
    let s = TripleOI::varsigma(&f, d, d, d)?.apply(w, w)?;
    let sn = s.norm_1()?;
    Ok(((&a - &(&s * u)).norm_1()? / sn, sn))
}

pub fn check_commutation(cfg: &VerifyConfig) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for s in 0..cfg.instances {
        let mut rng = cfg.rng(9, s);
        let n = cfg.dim(s);
        let u = random_unitary::<f64>(n, &mut rng);
        let w = random_hermitian::<f64>(n, &mut rng);
        let w = w.scale_real(1.0 / w.frobenius());
        worst = worst.max(commutation_gap(&u, &eig_unitary(&u)?, &w)?.0);
    }
    Ok(result("commutation", cfg.instances, worst, cfg.tol("commutation"), String::new()))
}

/// `max(‖e^{i(A+B)} - e^{iA}‖_∞ - ‖B‖_∞, 0)` over random Hermitian pairs.
pub fn check_exp_lipschitz(cfg: &VerifyConfig, pairs: usize) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    let mut slack = f64::INFINITY;
    for s in 0..pairs {
        let mut rng = cfg.rng(10, s);
        let n = 2 + s % 7;
        let a = random_hermitian::<f64>(n, &mut rng).scale_real(1.0 + (s % 5) as f64);
        let b = random_hermitian::<f64>(n, &mut rng).scale_real(0.01 * (1 + s % 50) as f64);
        let lhs = (&exp_i(&(&a + &b))? - &exp_i(&a)?).norm_inf()?;
        let bn = b.norm_inf()?;
        worst = worst.max(lhs - bn);
        slack = slack.min(bn - lhs);
    }
    Ok(result("exp-lipschitz", pairs, worst.max(0.0), cfg.tol("exp_lipschitz"), format!("min slack {slack:.3e}")))
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = vec![
        check_first_order(cfg)?,
        check_derivative(cfg)?,
        check_perturbation(cfg)?,
        check_taylor(cfg)?,
        check_linear_transfer(cfg)?,
        check_bilinear_transfer(cfg)?,
    ];
    checks.extend(check_continuity(cfg)?);
    checks.push(check_varsigma_restriction(cfg, 30)?);
    checks.push(check_commutation(cfg)?);
    checks.push(check_exp_lipschitz(cfg, 50)?);
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { seed: cfg.seed, checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig { instances: 3, max_dim: 6, ..Default::default() }
    }

    #[test]
    fn default_suite_passes() {
        let r = run_verify(&small()).unwrap();
        assert!(r.checks.len() >= 7);
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn injected_fault_is_caught() {
        let cfg = VerifyConfig { inject_fault: true, ..small() };
        let c = check_first_order(&cfg).unwrap();
        assert!(!c.passed);
    }

    #[test]
    fn tolerance_validation() {
        let mut cfg = VerifyConfig::default();
        assert!(cfg.set_tolerance("taylor", -1.0).is_err());
        assert!(cfg.set_tolerance("nope", 1.0).is_err());
        cfg.set_tolerance("taylor", 1e-6).unwrap();
        assert_eq!(cfg.tol("taylor"), 1e-6);
    }
}
