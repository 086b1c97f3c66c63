//! `zonal`: file-driven pipelines over zonal kernel coefficient tables.
//!
//! Exit codes: 0 success, 1 invalid input, 2 mathematical precondition
//! violated (negative or non-real coefficient, non-hermitian kernel),
//! 3 a numerical check exceeded its tolerance.

mod spec;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use zonal_core::convolution::{convolve_direct, convolve_spectral, funk_hecke_sides, TestHarmonic};
use zonal_core::hs_operator::{compare_roots, discretize_operator, expected_spectrum, operator_sqrt_kernel};
use zonal_core::quadrature::{circle_rule, disc_rule, orthogonality_defect, sphere3_rule, sphere_mc_sample};
use zonal_core::root::{continuity_report, convolution_root, direct_residual, existence_diagnostics, pd_gram_check, verify_root};
use zonal_core::spectral::{forward_transform, geometric_table};
use zonal_core::{json, CoefficientTable, Error, QuadratureRule, SpectralIndex, ZonalKernel};

use crate::spec::parse_kernel_spec;

const DEFAULT_DEGREE: usize = 32;

#[derive(Parser)]
#[command(name = "zonal", version, about = "Spectral analysis and convolution roots of zonal kernels on complex spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand a kernel spec into a coefficient file by forward quadrature.
    Expand {
        spec: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        degree: usize,
        /// Radial disc nodes (default N + 1).
        #[arg(long)]
        nrad: Option<usize>,
        /// Angular nodes (default 2N + 2).
        #[arg(long)]
        nang: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral convolution of two coefficient files.
    Convolve {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also compare against direct sphere quadrature at random point pairs.
        #[arg(long)]
        oracle: bool,
        /// Oracle report destination (default: standard error).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convolution square root of a coefficient file, with diagnostics.
    Root {
        kernel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Diagnostics report destination (default: standard error).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = zonal_core::root::ROOT_TOL)]
        tol: f64,
    },
    /// Residual of a claimed root against its kernel.
    Verify {
        root: PathBuf,
        kernel: PathBuf,
        /// Add the pointwise direct-quadrature residual.
        #[arg(long)]
        direct: bool,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-7)]
        direct_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimum eigenvalue of a seeded random Gram matrix.
    PdCheck {
        spec: PathBuf,
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        degree: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nyström operator square root against the spectral root.
    HsCompare {
        spec: PathBuf,
        /// Radial (u) nodes of the sphere rule, q = 2.
        #[arg(long, default_value_t = 16)]
        nu: usize,
        /// Angular nodes (default 64 for q = 1, 32 for q = 2).
        #[arg(long)]
        nang: Option<usize>,
        /// Monte Carlo nodes for q >= 3.
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Table truncation for families (default: the degree the rule resolves).
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        eig_tol: f64,
        /// Eigenvalue CSV destination.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orthogonality and Funk–Hecke invariant suite.
    Audit {
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 8)]
        degree: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        fh_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A numerical check exceeded its tolerance.
#[derive(Debug)]
struct ToleranceExceeded(String);

impl fmt::Display for ToleranceExceeded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tolerance exceeded: {}", self.0)
    }
}

impl std::error::Error for ToleranceExceeded {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ToleranceExceeded>().is_some() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NegativeCoefficient { .. }
                | Error::NonRealCoefficient { .. }
                | Error::NegativeEigenvalue { .. }
                | Error::NotHermitian(_)
                | Error::NotPositiveSemidefinite(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_report(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(_) => emit(out, text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn read_table(path: &Path) -> Result<CoefficientTable> {
    CoefficientTable::read(path).with_context(|| format!("coefficient file {}", path.display()))
}

fn check(passed: bool, what: impl FnOnce() -> String) -> Result<()> {
    if passed {
        Ok(())
    } else {
        Err(ToleranceExceeded(what()).into())
    }
}

/// Rule on which products of two degree-`n` kernels integrate exactly.
fn convolution_rule(q: usize, n: usize) -> Result<QuadratureRule> {
    Ok(match q {
        1 => circle_rule((2 * n + 2).max(16))?,
        2 => sphere3_rule(n + 1, 2 * n + 2)?,
        _ => bail!("direct sphere quadrature is available for q = 1 and q = 2 only, got q = {q}"),
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Expand { spec, degree, nrad, nang, out } => {
            let spec = parse_kernel_spec(&spec)?;
            let kernel = spec.kernel(degree)?;
            let nang = nang.unwrap_or(2 * degree + 2);
            let rule = if spec.q == 1 { circle_rule(nang)? } else { disc_rule(spec.q, nrad.unwrap_or(degree + 1), nang)? };
            let table = forward_transform(&kernel, degree, &rule)?;
            emit(out.as_deref(), &table.to_json()?)
        }
        Command::Convolve { a, b, out, oracle, report, tol, pairs, seed } => {
            let (ta, tb) = (read_table(&a)?, read_table(&b)?);
            let c = convolve_spectral(&ta, &tb)?;
            emit(out.as_deref(), &c.to_json()?)?;
            if !oracle {
                return Ok(());
            }
            let q = c.q();
            let rule = convolution_rule(q, ta.degree().max(tb.degree()))?;
            let pts = sphere_mc_sample(q, 2 * pairs, seed)?;
            let (ka, kb, kc): (ZonalKernel, ZonalKernel, ZonalKernel) = (ta.into(), tb.into(), c.into());
            let mut worst: f64 = 0.0;
            for i in 0..pairs {
                let (x, y) = (pts.node(2 * i), pts.node(2 * i + 1));
                worst = worst.max((convolve_direct(&ka, &kb, x, y, &rule)? - kc.eval(x, y)?).norm());
            }
            let passed = worst <= tol;
            let r = OracleReport { version: json::SCHEMA_VERSION, oracle_residual: worst, pairs, seed, rule: rule.kind().to_string(), nodes: rule.len(), tol, passed };
            emit_report(report.as_deref(), &json::to_string(&r)?)?;
            check(passed, || format!("direct oracle residual {worst:e} > {tol:e}"))
        }
        Command::Root { kernel, out, report, tol } => {
            let table = read_table(&kernel)?;
            let diag = existence_diagnostics(&table, tol);
            let continuity = continuity_report(&table);
            let r = RootOutput { version: json::SCHEMA_VERSION, report: &diag, abs_sum: continuity.abs_sum };
            emit_report(report.as_deref(), &json::to_string(&r)?)?;
            let root = convolution_root(&table, tol)?;
            emit(out.as_deref(), &root.to_json()?)
        }
        Command::Verify { root, kernel, direct, tol, direct_tol, out } => {
            let (p, k) = (read_table(&root)?, read_table(&kernel)?);
            let l2 = verify_root(&p, &k, None)?;
            let direct_residual = if direct {
                let rule = convolution_rule(p.q(), p.degree().max(k.degree()))?;
                Some(direct_residual(&p, &k, &rule)?)
            } else {
                None
            };
            let passed = l2 <= tol && direct_residual.is_none_or(|d| d <= direct_tol);
            let r = VerifyReport { version: json::SCHEMA_VERSION, l2_residual: l2, direct_residual, tol, direct_tol, passed };
            emit(out.as_deref(), &json::to_string(&r)?)?;
            check(passed, || format!("root residual {l2:e} (direct {direct_residual:?})"))
        }
        Command::PdCheck { spec, points, seed, tol, degree, out } => {
            let spec = parse_kernel_spec(&spec)?;
            let g = pd_gram_check(&spec.kernel(degree)?, points, seed, tol)?;
            emit(out.as_deref(), &json::to_string(&PdReport { version: json::SCHEMA_VERSION, check: &g })?)?;
            check(g.passed, || format!("Gram minimum eigenvalue {:e} < -{tol:e}", g.min_eigenvalue))
        }
        Command::HsCompare { spec, nu, nang, points, seed, degree, tol, eig_tol, csv, out } => {
            let spec = parse_kernel_spec(&spec)?;
            let q = spec.q;
            let (rule, resolved) = match q {
                1 => {
                    let nang = nang.unwrap_or(64);
                    (circle_rule(nang)?, nang.saturating_sub(1) / 2)
                }
                2 => {
                    let nang = nang.unwrap_or(32);
                    (sphere3_rule(nu, nang)?, (nu.saturating_sub(1)).min(nang.saturating_sub(1) / 2))
                }
                _ => (sphere_mc_sample(q, points, seed)?, 0),
            };
            let table = spec.table(degree.unwrap_or(resolved))?;
            let op = discretize_operator(&table.clone().into(), &rule)?;
            let eig = op.eigensystem()?;
            let sqrt = operator_sqrt_kernel(&eig, &op, None)?;
            let root = convolution_root(&table, zonal_core::root::ROOT_TOL)?;
            let root_deviation = compare_roots(&sqrt, &root)?;
            let expected = expected_spectrum(&table);
            let eigenvalue_deviation = (0..eig.len().max(expected.len()))
                .map(|i| (eig.eigenvalues.get(i).copied().unwrap_or(0.0) - expected.get(i).copied().unwrap_or(0.0)).abs())
                .fold(0.0, f64::max);
            if let Some(path) = &csv {
                let file = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
                eig.write_csv(file)?;
            }
            let passed = root_deviation <= tol && eigenvalue_deviation <= eig_tol;
            let r = HsReport {
                version: json::SCHEMA_VERSION,
                q,
                rule: rule.kind().to_string(),
                nodes: rule.len(),
                table_degree: table.degree(),
                rank: sqrt.rank(),
                eigenvalue_count: eig.len(),
                max_eigenvalue: eig.eigenvalues.first().copied().unwrap_or(0.0),
                min_eigenvalue: eig.eigenvalues.last().copied().unwrap_or(0.0),
                eigenvalue_deviation,
                root_deviation,
                tol,
                eig_tol,
                passed,
            };
            emit(out.as_deref(), &json::to_string(&r)?)?;
            check(passed, || format!("root deviation {root_deviation:e}, eigenvalue deviation {eigenvalue_deviation:e}"))
        }
        Command::Audit { q, degree, tol, fh_tol, out } => {
            if q == 0 {
                bail!("--q must be at least 1");
            }
            let rule = if q == 1 { circle_rule(2 * degree + 2)? } else { disc_rule(q, degree + 1, 2 * degree + 2)? };
            let orthogonality = orthogonality_defect(&rule, degree)?;
            let funk_hecke = if q == 2 { Some(funk_hecke_audit(degree)?) } else { None };
            let passed = orthogonality <= tol && funk_hecke.is_none_or(|f| f <= fh_tol);
            let r = AuditReport { version: json::SCHEMA_VERSION, q, degree, orthogonality_max_error: orthogonality, funk_hecke_max_residual: funk_hecke, tol, fh_tol, passed };
            emit(out.as_deref(), &json::to_string(&r)?)?;
            check(passed, || format!("orthogonality {orthogonality:e}, Funk-Hecke {funk_hecke:?}"))
        }
    }
}

/// Funk–Hecke residuals on the sphere of `C^2` for constant, single-mode and
/// geometric kernels against harmonics of bi-degree up to `min(3, degree)`.
fn funk_hecke_audit(degree: usize) -> Result<f64> {
    let hd = degree.min(3) as u32;
    let kd = degree.min(6);
    let one = Complex64::new(1.0, 0.0);
    let kernels: Vec<ZonalKernel> = vec![
        CoefficientTable::new(2, 0, [(SpectralIndex::disc(0, 0), one)])?.into(),
        CoefficientTable::new(2, 1, [(SpectralIndex::disc(1, 0), one)])?.into(),
        CoefficientTable::new(2, 2, [(SpectralIndex::disc(2, 1), one)])?.into(),
        geometric_table(2, 0.4, kd)?.into(),
    ];
    let harmonics: Vec<TestHarmonic> = (0..=hd).flat_map(|m| (0..=hd).map(move |n| TestHarmonic::new(m, n))).collect();
    let top = kd + hd as usize;
    let sphere = sphere3_rule(top + 2, 2 * top + 4)?;
    let disc = disc_rule(2, top + 2, 2 * top + 4)?;
    let base = sphere_mc_sample(2, 5, 17)?;
    let mut worst: f64 = 0.0;
    for k in &kernels {
        for y in base.nodes() {
            for s in funk_hecke_sides(k, &harmonics, y, &sphere, &disc)? {
                worst = worst.max(s.residual());
            }
        }
    }
    Ok(worst)
}

#[derive(Serialize)]
struct OracleReport {
    version: u32,
    oracle_residual: f64,
    pairs: usize,
    seed: u64,
    rule: String,
    nodes: usize,
    tol: f64,
    passed: bool,
}

#[derive(Serialize)]
struct RootOutput<'a> {
    version: u32,
    #[serde(flatten)]
    report: &'a zonal_core::root::RootReport,
    abs_sum: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    version: u32,
    l2_residual: f64,
    direct_residual: Option<f64>,
    tol: f64,
    direct_tol: f64,
    passed: bool,
}

#[derive(Serialize)]
struct PdReport<'a> {
    version: u32,
    #[serde(flatten)]
    check: &'a zonal_core::root::GramCheck,
}

#[derive(Serialize)]
struct HsReport {
    version: u32,
    q: usize,
    rule: String,
    nodes: usize,
    table_degree: usize,
    rank: usize,
    eigenvalue_count: usize,
    max_eigenvalue: f64,
    min_eigenvalue: f64,
    eigenvalue_deviation: f64,
    root_deviation: f64,
    tol: f64,
    eig_tol: f64,
    passed: bool,
}

#[derive(Serialize)]
struct AuditReport {
    version: u32,
    q: usize,
    degree: usize,
    orthogonality_max_error: f64,
    funk_hecke_max_residual: Option<f64>,
    tol: f64,
    fh_tol: f64,
    passed: bool,
}
