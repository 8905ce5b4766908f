//! Command-line front end. `run` returns the process exit code: 0 pass, 1 check failure, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::circle::{export_csv, make_f, make_g};
use crate::error::{Error, Result};
use crate::pipeline::report::{divergence_report, AlphaSeries};
use crate::pipeline::{read_records, replay, run_ladder, write_atomic, PipelineOptions};
use crate::scalar::cplx;
use crate::schur::{bilinear_norm_221_with, linear_norm_inf_with, AnySymbol, CertifyOptions, Symbol2, SymbolJson};
use crate::verify::{run_verify, VerifyConfig, TOLERANCES};

/// Default output directory when `--out` is absent.
pub const OUT_ENV: &str = "MOILAB_OUT";
const DEFAULT_OUT: &str = "moilab-out";

/// Pipeline tolerances accepted by `--tol` besides the verify suite's.
pub const PIPELINE_TOLERANCES: &[(&str, f64)] = &[("replay", 1e-9)];

#[derive(Parser, Debug)]
#[command(
    name = "moilab",
    version,
    about = "Operator integrals, Schur multipliers and the remainder counterexample pipeline"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Comma-separated ladder of n values.
    #[arg(long, global = true, value_delimiter = ',', default_value = "8,16,32,64,128")]
    n_ladder: Vec<usize>,
    /// Root seed for every randomized search.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    /// Tolerance override, repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Output directory (falls back to $MOILAB_OUT, then ./moilab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "inverse-square")]
    alpha_series: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Seeded identity and continuity checks.
    Verify {
        #[arg(long, default_value_t = 8)]
        instances: usize,
        #[arg(long, default_value_t = 16)]
        max_dim: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Certified norm of a Schur multiplier given as JSON, or of triangular truncation.
    Schur {
        #[arg(long, conflicts_with = "triangular")]
        symbol: Option<PathBuf>,
        /// Strict upper-triangular all-ones symbol of this order.
        #[arg(long)]
        triangular: Option<usize>,
        #[arg(long, default_value_t = 20)]
        starts: usize,
    },
    /// Runs the construction for every n of the ladder and writes records and matrices.
    Pipeline,
    /// Bookkeeping and growth fits over a directory of records.
    Report {
        /// Record directory; defaults to the output directory.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// CSV samples of f or g on the circle.
    Plot {
        #[arg(long, default_value = "f")]
        function: String,
        #[arg(long, default_value_t = 720)]
        resolution: usize,
    },
}

/// Validated settings shared by the subcommands.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub n_ladder: Vec<usize>,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub out: PathBuf,
    pub series: AlphaSeries,
}

impl RunConfig {
    fn from_common(subcommand: &str, c: &Common) -> Result<Self> {
        if c.n_ladder.is_empty() || c.n_ladder.iter().any(|n| *n < 3) {
            return Err(Error::Invalid("ladder entries must be at least 3".into()));
        }
        if c.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("ladder must be strictly increasing".into()));
        }
        let mut tolerances = BTreeMap::new();
        for t in &c.tol {
            let (name, value) = parse_tol(t)?;
            tolerances.insert(name, value);
        }
        let out = c
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok(Self {
            subcommand: subcommand.into(),
            n_ladder: c.n_ladder.clone(),
            seed: c.seed,
            tolerances,
            out,
            series: c.alpha_series.parse()?,
        })
    }

    fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

/// Parses `NAME=VALUE` against the known tolerance names; values must be positive and finite.
pub fn parse_tol(s: &str) -> Result<(String, f64)> {
    let (name, value) = s.split_once('=').ok_or_else(|| Error::Invalid(format!("expected NAME=VALUE, got '{s}'")))?;
    let name = name.trim();
    if !TOLERANCES.iter().chain(PIPELINE_TOLERANCES).any(|(k, _)| *k == name) {
        return Err(Error::Invalid(format!("unknown tolerance '{name}'")));
    }
    let value: f64 = value.trim().parse().map_err(|_| Error::Invalid(format!("tolerance '{name}': bad number")))?;
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::Invalid(format!("tolerance '{name}' must be positive, got {value}")));
    }
    Ok((name.to_string(), value))
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Check(e.to_string())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, A>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Check(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            1
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(stderr, "usage error: {m}");
            2
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<bool, Failure> {
    let name = match &cli.command {
        Command::Verify { .. } => "verify",
        Command::Schur { .. } => "schur",
        Command::Pipeline => "pipeline",
        Command::Report { .. } => "report",
        Command::Plot { .. } => "plot",
    };
    let cfg = RunConfig::from_common(name, &cli.common).map_err(|e| Failure::Usage(e.to_string()))?;
    match cli.command {
        Command::Verify { instances, max_dim, inject_fault } => {
            run_verify_cmd(&cfg, instances, max_dim, inject_fault, out)
        }
        Command::Schur { symbol, triangular, starts } => run_schur(&cfg, symbol, triangular, starts, out),
        Command::Pipeline => run_pipeline_cmd(&cfg, out, err),
        Command::Report { records } => run_report(&cfg, records, out),
        Command::Plot { function, resolution } => run_plot(&cfg, &function, resolution, out),
    }
}

fn run_verify_cmd(
    cfg: &RunConfig,
    instances: usize,
    max_dim: usize,
    inject_fault: bool,
    out: &mut dyn Write,
) -> std::result::Result<bool, Failure> {
    if instances == 0 || max_dim < 2 {
        return Err(Failure::Usage("need --instances ≥ 1 and --max-dim ≥ 2".into()));
    }
    let mut vc = VerifyConfig { seed: cfg.seed, instances, max_dim, inject_fault, ..Default::default() };
    for (k, v) in &cfg.tolerances {
        if TOLERANCES.iter().any(|(n, _)| n == k) {
            vc.set_tolerance(k, *v).map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    let report = run_verify(&vc)?;
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{} {:<24} residual {:.3e} < {:.1e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.residual,
            c.threshold,
            c.detail
        );
    }
    write_json(&cfg.out.join("verify.json"), &report)?;
    Ok(report.passed)
}

fn run_schur(
    cfg: &RunConfig,
    symbol: Option<PathBuf>,
    triangular: Option<usize>,
    starts: usize,
    out: &mut dyn Write,
) -> std::result::Result<bool, Failure> {
    let sym = match (symbol, triangular) {
        (Some(path), None) => {
            let text =
                std::fs::read_to_string(&path).map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?;
            let j: SymbolJson = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("symbol JSON: {e}")))?;
            j.parse::<f64>().map_err(|e| Failure::Usage(e.to_string()))?
        }
        (None, Some(n)) if n >= 1 => AnySymbol::Linear(
            Symbol2::from_fn(n, |i, j| cplx(if j > i { 1.0 } else { 0.0 }, 0.0)).map_err(Failure::from)?,
        ),
        _ => return Err(Failure::Usage("give exactly one of --symbol FILE or --triangular N (N ≥ 1)".into())),
    };
    let opts = CertifyOptions { starts: starts.max(1), seed: cfg.seed, ..Default::default() };
    let path = cfg.out.join("schur.json");
    match sym {
        AnySymbol::Linear(m) => {
            let c = linear_norm_inf_with(&m, &opts)?;
            let _ = writeln!(
                out,
                "linear n={} lower {:.10} upper {:.10} gap {:.3e}",
                m.n(),
                c.lower,
                c.upper,
                c.relative_gap()
            );
            write_json(&path, &c)?;
            Ok(c.lower <= c.upper * (1.0 + 1e-9))
        }
        AnySymbol::Bilinear(m) => {
            let c = bilinear_norm_221_with(&m, &opts, starts.max(1))?;
            let _ = writeln!(
                out,
                "bilinear n={} slice bracket [{:.10}, {:.10}] direct {:.10} consistent {}",
                m.n(),
                c.certificate.lower,
                c.certificate.upper,
                c.direct_lower,
                c.consistent
            );
            write_json(&path, &c)?;
            Ok(c.consistent)
        }
    }
}

fn run_pipeline_cmd(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<bool, Failure> {
    let opts = PipelineOptions::default();
    let tol = cfg.tol("replay", PIPELINE_TOLERANCES[0].1);
    let records = run_ladder(&cfg.n_ladder, cfg.seed, &opts, &cfg.out, &mut |m: &str| {
        let _ = writeln!(err, "{m}");
    })?;
    let mut ok = true;
    for r in &records {
        let worst = replay(&cfg.out, r)?.into_iter().fold(0.0f64, |a, e| a.max(e.rel_diff));
        ok &= worst <= tol && r.chain_ok;
        let _ = writeln!(
            out,
            "n={:<4} ratio_h {:.6} ratio_g {:.6} toi_lb {:.6} m {} scaled {:.6} replay {:.1e}",
            r.n, r.ratio_h, r.ratio_g, r.toi_lb, r.m, r.scaled, worst
        );
    }
    Ok(ok)
}

fn run_report(cfg: &RunConfig, records: Option<PathBuf>, out: &mut dyn Write) -> std::result::Result<bool, Failure> {
    let dir = records.unwrap_or_else(|| cfg.out.clone());
    let recs = read_records(&dir)?;
    let rep = divergence_report(&recs, cfg.series)?;
    let _ = writeln!(out, "series {} (total {:.6})", rep.series.name(), rep.series_total);
    for r in &rep.rows {
        let _ = writeln!(
            out,
            "n={:<4} N={} N‖Z‖² ≤ α+‖Z‖²: {} N ≥ α/‖Z‖²: {} ΣNβ {:.6e}",
            r.n, r.big_n, r.upper_ok, r.lower_ok, r.nbeta_partial
        );
    }
    let _ = writeln!(out, "sum bound {} ΣNβ increasing {}", rep.sum_bound_ok, rep.nbeta_increasing);
    for f in &rep.fits {
        let _ =
            writeln!(out, "fit {:<12} a {:+.6} b {:+.6} inversions {}", f.quantity, f.intercept, f.slope, f.inversions);
    }
    write_json(&cfg.out.join("report.json"), &rep)?;
    write_atomic(&cfg.out.join("report.csv"), rep.csv().as_bytes())?;
    Ok(rep.passed())
}

fn run_plot(
    cfg: &RunConfig,
    function: &str,
    resolution: usize,
    out: &mut dyn Write,
) -> std::result::Result<bool, Failure> {
    if resolution == 0 {
        return Err(Failure::Usage("--resolution must be positive".into()));
    }
    let csv = match function {
        "f" => export_csv(&make_f::<f64>(), resolution),
        "g" => export_csv(&make_g::<f64>(), resolution),
        other => return Err(Failure::Usage(format!("unknown function '{other}'; expected f or g"))),
    };
    let path = cfg.out.join(format!("{function}.csv"));
    write_atomic(&path, csv.as_bytes())?;
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_parsing() {
        assert_eq!(parse_tol("taylor=1e-6").unwrap(), ("taylor".into(), 1e-6));
        assert!(parse_tol("taylor=-1").is_err());
        assert!(parse_tol("taylor").is_err());
        assert!(parse_tol("bogus=1").is_err());
        assert!(parse_tol("replay=inf").is_err());
    }

    #[test]
    fn ladder_validation() {
        let mut sink = Vec::new();
        let mut e = Vec::new();
        assert_eq!(run(["moilab", "pipeline", "--n-ladder", "8,4"], &mut sink, &mut e), 2);
        assert_eq!(run(["moilab", "pipeline", "--n-ladder", "2"], &mut sink, &mut e), 2);
        assert_eq!(run(["moilab", "frobnicate"], &mut sink, &mut e), 2);
        assert_eq!(run(["moilab", "--help"], &mut sink, &mut e), 0);
    }
}
