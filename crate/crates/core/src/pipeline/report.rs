//! Partial-sum bookkeeping over a finished ladder of pipeline records.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::PipelineRecord;
use crate::error::{Error, Result};

/// Convergent series used for `α_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaSeries {
    /// `α_n = 1/(n^2 + 1)`.
    InverseSquare,
    /// `α_n = 1/(n ln(n)^2)`.
    InverseNlogn,
}

impl AlphaSeries {
    pub fn name(self) -> &'static str {
        match self {
            Self::InverseSquare => "inverse-square",
            Self::InverseNlogn => "inverse-nlogn",
        }
    }

    /// Sum of the series over all admissible `n`: from 1 for the inverse square, from 2 otherwise.
    pub fn total(self) -> f64 {
        match self {
            Self::InverseSquare => {
                let pi = std::f64::consts::PI;
                (pi / pi.tanh() - 1.0) / 2.0
            }
            Self::InverseNlogn => 2.109_742_801_2,
        }
    }

    pub fn alpha<S: Bookkeeping>(self, n: usize) -> S {
        match self {
            Self::InverseSquare => S::one() / S::from_integer(n as u64 * n as u64 + 1),
            Self::InverseNlogn => {
                let l = (n as f64).ln();
                S::from_f64_exact(1.0 / (n as f64 * l * l))
            }
        }
    }
}

impl FromStr for AlphaSeries {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse-square" => Ok(Self::InverseSquare),
            "inverse-nlogn" => Ok(Self::InverseNlogn),
            _ => Err(Error::Invalid(format!("unknown series {s:?}; expected inverse-square or inverse-nlogn"))),
        }
    }
}

/// Arithmetic needed by the bookkeeping; `f64` for quick looks, `BigRational` for exact checks.
pub trait Bookkeeping:
    Clone
    + PartialOrd
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn from_integer(k: u64) -> Self;
    /// The value of a finite `f64` without rounding where the type allows it.
    fn from_f64_exact(x: f64) -> Self;
    fn floor(&self) -> Self;
    fn to_f64(&self) -> f64;
}

impl Bookkeeping for f64 {
    fn from_integer(k: u64) -> Self {
        k as f64
    }
    fn from_f64_exact(x: f64) -> Self {
        x
    }
    fn floor(&self) -> Self {
        f64::floor(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Bookkeeping for BigRational {
    fn from_integer(k: u64) -> Self {
        BigRational::from_integer(BigInt::from(k))
    }
    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_f64(x).expect("finite value")
    }
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// One ladder row in scalar type `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row<S> {
    pub n: usize,
    pub alpha: S,
    pub z_sq: S,
    pub big_n: S,
    pub beta: S,
    pub nz_sum: S,
    pub nbeta_sum: S,
    pub alpha_sum: S,
    pub z_sq_sum: S,
    /// `N‖Z‖_2^2 ≤ α + ‖Z‖_2^2`.
    pub upper_ok: bool,
    /// `N ≥ α ‖Z‖_2^{-2}`.
    pub lower_ok: bool,
}

/// Rows of the bookkeeping, with `‖Z_n‖_2` and `β_n` taken from the records as exact binary values.
pub fn bookkeeping<S: Bookkeeping>(records: &[PipelineRecord], series: AlphaSeries) -> Vec<Row<S>> {
    let mut rows = Vec::with_capacity(records.len());
    let (mut nz, mut nb, mut sa, mut sz) = (S::zero(), S::zero(), S::zero(), S::zero());
    for r in records {
        let alpha: S = series.alpha(r.n);
        let z = S::from_f64_exact(r.z_hs);
        let z_sq = z.clone() * z;
        let q = alpha.clone() / z_sq.clone();
        let big_n = q.floor() + S::one();
        let beta = S::from_f64_exact(r.beta);
        let nzz = big_n.clone() * z_sq.clone();
        nz = nz + nzz.clone();
        nb = nb + big_n.clone() * beta.clone();
        sa = sa + alpha.clone();
        sz = sz + z_sq.clone();
        rows.push(Row {
            n: r.n,
            upper_ok: nzz <= alpha.clone() + z_sq.clone(),
            lower_ok: big_n >= q,
            alpha,
            z_sq,
            big_n,
            beta,
            nz_sum: nz.clone(),
            nbeta_sum: nb.clone(),
            alpha_sum: sa.clone(),
            z_sq_sum: sz.clone(),
        });
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub m: u64,
    pub beta: f64,
    pub z_hs: f64,
    pub alpha: f64,
    /// `N_n` as a decimal integer string; it can exceed 64 bits.
    pub big_n: String,
    pub nz_partial: f64,
    pub nbeta_partial: f64,
    pub alpha_partial: f64,
    pub upper_ok: bool,
    pub lower_ok: bool,
    pub ratio_h: f64,
    pub ratio_g: f64,
    pub toi_lb: f64,
    pub scaled: f64,
}

/// Least-squares fit `y ≈ a + b·x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub quantity: String,
    pub intercept: f64,
    pub slope: f64,
    /// Number of `i` with `y_{i+1} < y_i`.
    pub inversions: usize,
    /// `max_n y_n / √(ln n)`.
    pub growth_constant: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

pub fn inversions(y: &[f64]) -> usize {
    y.windows(2).filter(|w| w[1] < w[0]).count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub series: AlphaSeries,
    pub series_total: f64,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<Fit>,
    /// Both per-row inequalities hold in exact arithmetic for every row.
    pub rows_ok: bool,
    /// `Σ N‖Z‖^2 < Σ α + Σ ‖Z‖^2` over the ladder, exactly.
    pub sum_bound_ok: bool,
    /// `Σ α` stays below the total of the series.
    pub alpha_bounded: bool,
    pub nbeta_increasing: bool,
    pub nbeta_max: f64,
    pub notes: Vec<String>,
}

impl DivergenceReport {
    pub fn passed(&self) -> bool {
        self.rows_ok && self.sum_bound_ok && self.alpha_bounded && self.nbeta_increasing
    }

    pub fn fit(&self, quantity: &str) -> Option<&Fit> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }

    /// Plot columns `n, ratio_h, ratio_g, toi_lb, scaled`.
    pub fn csv(&self) -> String {
        let mut s = String::from("n,ratio_h,ratio_g,toi_lb,scaled\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{:e},{:e},{:e}", r.n, r.ratio_h, r.ratio_g, r.toi_lb, r.scaled);
        }
        s
    }
}

pub fn divergence_report(records: &[PipelineRecord], series: AlphaSeries) -> Result<DivergenceReport> {
    if records.len() < 3 {
        return Err(Error::InsufficientLadder(records.len()));
    }
    if records.windows(2).any(|w| w[1].n <= w[0].n) {
        return Err(Error::Invalid("records must have strictly increasing n".into()));
    }
    let exact = bookkeeping::<BigRational>(records, series);
    let last = exact.last().expect("nonempty");
    let sum_bound_ok = last.nz_sum < last.alpha_sum.clone() + last.z_sq_sum.clone();
    let alpha_bounded = Bookkeeping::to_f64(&last.alpha_sum) <= series.total();
    let nbeta_increasing = exact.windows(2).all(|w| w[1].nbeta_sum > w[0].nbeta_sum);
    let rows: Vec<ReportRow> = exact
        .iter()
        .zip(records)
        .map(|(e, r)| ReportRow {
            n: r.n,
            m: r.m,
            beta: r.beta,
            z_hs: r.z_hs,
            alpha: Bookkeeping::to_f64(&e.alpha),
            big_n: e.big_n.to_integer().to_string(),
            nz_partial: Bookkeeping::to_f64(&e.nz_sum),
            nbeta_partial: Bookkeeping::to_f64(&e.nbeta_sum),
            alpha_partial: Bookkeeping::to_f64(&e.alpha_sum),
            upper_ok: e.upper_ok,
            lower_ok: e.lower_ok,
            ratio_h: r.ratio_h,
            ratio_g: r.ratio_g,
            toi_lb: r.toi_lb,
            scaled: r.scaled,
        })
        .collect();
    let x: Vec<f64> = records.iter().map(|r| (r.n as f64).ln().sqrt()).collect();
    let quantities: [(&str, fn(&PipelineRecord) -> f64); 5] = [
        ("h_comm_norm", |r| r.h_comm_norm),
        ("ratio_h", |r| r.ratio_h),
        ("ratio_g", |r| r.ratio_g),
        ("toi_lb", |r| r.toi_lb),
        ("scaled", |r| r.scaled),
    ];
    let fits = quantities
        .iter()
        .map(|(name, get)| {
            let y: Vec<f64> = records.iter().map(get).collect();
            let (intercept, slope) = fit_line(&x, &y);
            Fit {
                quantity: name.to_string(),
                intercept,
                slope,
                inversions: inversions(&y),
                growth_constant: y.iter().zip(&x).map(|(a, b)| a / b).fold(0.0, f64::max),
            }
        })
        .collect();
    let span = (x[0], x[x.len() - 1]);
    Ok(DivergenceReport {
        series,
        series_total: series.total(),
        rows_ok: exact.iter().all(|r| r.upper_ok && r.lower_ok),
        sum_bound_ok,
        alpha_bounded,
        nbeta_increasing,
        nbeta_max: rows.last().map_or(0.0, |r| r.nbeta_partial),
        rows,
        fits,
        notes: vec![format!(
            "√(ln n) spans only [{:.3}, {:.3}] on this ladder; the fits cannot separate √(ln n) from ln n growth",
            span.0, span.1
        )],
    })
}
