//! Convolution square roots of `L²`-positive definite zonal kernels.
//!
//! A zonal kernel with coefficients `a_{m,n} >= 0` and `Σ a_{m,n} < ∞` has
//! the root `P` with `a_{m,n}(P) = sqrt(h_{m,n} a_{m,n})`, because spectral
//! convolution gives `a(P)² / h = a`. On the circle `a_k(P) = sqrt(a_k)`.
//!
//! The construction is diagonal, so the root of a truncated table is exactly
//! the truncation of the root.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::convolution::{convolve_direct, convolve_spectral};
use crate::error::{Error, Result};
use crate::hs_operator::{hermitian_eig, CMatrix};
use crate::quadrature::{random_sphere_points, sphere_mc_sample, QuadratureRule};
use crate::spectral::{l2_norm_sq, CoefficientTable, SpectralIndex, ZonalKernel};
use crate::sum::Neumaier;

/// Coefficients in `[-ROOT_TOL, 0)` are treated as quadrature noise.
pub const ROOT_TOL: f64 = 1e-12;

/// Number of trailing per-degree sums used for the tail fit.
const TAIL_WINDOW: usize = 5;

/// Seed of the point pairs used by [`verify_root`].
pub const VERIFY_SEED: u64 = 0x5eed_0001;

/// Point pairs checked by [`verify_root`] when a rule is supplied.
pub const VERIFY_PAIRS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStatus {
    Ok,
    NegativeCoefficient,
    TailWarning,
}

/// Diagnostics for the existence of a convolution root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootReport {
    /// Smallest real part of `a / h = ⟨K, Z⟩₂` over the table.
    pub min_coefficient: f64,
    /// `Σ Re a = Σ h ⟨K, Z⟩₂`.
    pub summability_partial: f64,
    /// Geometric extrapolation of the per-degree sums beyond the table.
    pub tail_estimate: f64,
    /// `‖P * P - K‖₂` for the root of the nonnegative part of the table.
    pub l2_residual: f64,
    pub status: RootStatus,
    /// All coefficients real and nonnegative up to `1e-12`.
    pub pd_candidate: bool,
    /// `s_d = Σ_{deg = d} Re a`.
    pub per_degree: Vec<f64>,
    /// Most negative (or non-real) coefficient, when the status says so.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offending_index: Option<SpectralIndex>,
}

/// Finds the first coefficient that blocks the root construction.
fn first_violation(table: &CoefficientTable, tol: f64) -> Option<Error> {
    let mut worst: Option<(SpectralIndex, f64)> = None;
    for (idx, a) in table.iter() {
        if a.im.abs() > tol {
            return Some(Error::NonRealCoefficient { index: *idx, imag: a.im });
        }
        if a.re < -tol && worst.is_none_or(|(_, v)| a.re < v) {
            worst = Some((*idx, a.re));
        }
    }
    worst.map(|(index, value)| Error::NegativeCoefficient { index, value })
}

/// Root-existence diagnostics; never fails.
///
/// A coefficient with imaginary part beyond `tol` also yields the
/// `negative_coefficient` status, since it violates nonnegativity just the
/// same.
pub fn existence_diagnostics(table: &CoefficientTable, tol: f64) -> RootReport {
    let min_coefficient = table
        .iter()
        .map(|(idx, a)| a.re / table.norm_const(idx))
        .fold(f64::INFINITY, f64::min);
    let min_coefficient = if min_coefficient.is_finite() { min_coefficient } else { 0.0 };

    let mut summ = Neumaier::new();
    for (_, a) in table.iter() {
        summ.add(a.re);
    }
    let per_degree = table.per_degree(|a| a.re);
    let tail_estimate = tail_estimate(&per_degree, table.degree());

    let violation = first_violation(table, tol);
    let offending_index = match &violation {
        Some(Error::NegativeCoefficient { index, .. }) | Some(Error::NonRealCoefficient { index, .. }) => Some(*index),
        _ => None,
    };
    let status = if violation.is_some() {
        RootStatus::NegativeCoefficient
    } else if tail_estimate.is_infinite() {
        RootStatus::TailWarning
    } else {
        RootStatus::Ok
    };

    let positive = nonnegative_part(table);
    let l2_residual = convolution_root(&positive, tol)
        .and_then(|p| spectral_residual(&p, table))
        .unwrap_or(f64::NAN);

    RootReport {
        min_coefficient,
        summability_partial: summ.value(),
        tail_estimate,
        l2_residual,
        status,
        pd_candidate: table.is_pd_candidate(),
        per_degree,
        offending_index,
    }
}

fn nonnegative_part(table: &CoefficientTable) -> CoefficientTable {
    let entries: Vec<_> = table.iter().map(|(i, a)| (*i, Complex64::new(a.re.max(0.0), 0.0))).collect();
    CoefficientTable::new(table.q(), table.degree(), entries).expect("subset of a valid table")
}

/// Fits `log |s_d|` over the last complete degrees `d <= N` and sums the
/// geometric continuation. Returns 0 when fewer than two of those sums are
/// nonzero (nothing to extrapolate) and `+∞` when the fitted ratio is `>= 1`.
fn tail_estimate(per_degree: &[f64], degree: usize) -> f64 {
    let complete = &per_degree[..per_degree.len().min(degree + 1)];
    let start = complete.len().saturating_sub(TAIL_WINDOW);
    let pts: Vec<(f64, f64)> = complete[start..]
        .iter()
        .enumerate()
        .filter(|(_, s)| s.abs() > 0.0)
        .map(|(i, s)| ((start + i) as f64, s.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let ratio = (sxy / sxx).exp();
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    let last = complete.last().copied().unwrap_or(0.0).abs();
    last * ratio / (1.0 - ratio)
}

/// The convolution root `a(P) = sqrt(h a)`.
///
/// Coefficients in `[-tol, 0)` become zero; anything below `-tol`, or with
/// an imaginary part beyond `tol`, is an error naming the index.
pub fn convolution_root(table: &CoefficientTable, tol: f64) -> Result<CoefficientTable> {
    if let Some(err) = first_violation(table, tol) {
        return Err(err);
    }
    let entries: Vec<_> = table
        .iter()
        .map(|(idx, a)| (*idx, Complex64::new((table.norm_const(idx) * a.re.max(0.0)).sqrt(), 0.0)))
        .collect();
    CoefficientTable::new(table.q(), table.degree(), entries)
}

fn spectral_residual(p: &CoefficientTable, k: &CoefficientTable) -> Result<f64> {
    let pp = convolve_spectral(p, p)?;
    Ok(l2_norm_sq(&pp.difference(k)?).sqrt())
}

/// `‖P * P - K‖₂` from coefficients; with a rule, also the largest
/// `|(P * P)(x, y) - K(x, y)|` over [`VERIFY_PAIRS`] seeded random point
/// pairs by direct quadrature. Returns the larger of the two.
pub fn verify_root(p: &CoefficientTable, k: &CoefficientTable, rule: Option<&QuadratureRule>) -> Result<f64> {
    if p.q() != k.q() {
        return Err(Error::DimensionMismatch(p.q(), k.q()));
    }
    let spectral = spectral_residual(p, k)?;
    let Some(rule) = rule else { return Ok(spectral) };
    Ok(spectral.max(direct_residual(p, k, rule)?))
}

/// Largest pointwise `|(P * P)(x, y) - K(x, y)|` by direct quadrature.
pub fn direct_residual(p: &CoefficientTable, k: &CoefficientTable, rule: &QuadratureRule) -> Result<f64> {
    let q = p.q();
    let pk: ZonalKernel = p.clone().into();
    let kk: ZonalKernel = k.clone().into();
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let pts = random_sphere_points(&mut rng, q, 2 * VERIFY_PAIRS);
    let mut worst: f64 = 0.0;
    for pair in pts.chunks_exact(2 * q) {
        let (x, y) = pair.split_at(q);
        let direct = convolve_direct(&pk, &pk, x, y, rule)?;
        worst = worst.max((direct - kk.eval(x, y)?).norm());
    }
    Ok(worst)
}

/// Result of a Gram-matrix positivity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramCheck {
    pub min_eigenvalue: f64,
    pub npoints: usize,
    pub seed: u64,
    pub tol: f64,
    pub passed: bool,
}

/// Asymmetry of a Gram matrix beyond which the kernel is reported as
/// defective.
const GRAM_HERMITIAN_TOL: f64 = 1e-9;

/// Minimum eigenvalue of `[K(x_i, x_j)]` at `npoints` seeded uniform sphere
/// points; classically positive definite kernels give `>= -tol`.
pub fn pd_gram_check(kernel: &ZonalKernel, npoints: usize, seed: u64, tol: f64) -> Result<GramCheck> {
    if npoints == 0 {
        return Err(Error::Domain("pd_gram_check needs npoints >= 1".into()));
    }
    let q = kernel.q();
    let pts = sphere_mc_sample(q, npoints, seed)?;
    let mut gram = CMatrix::zeros(npoints);
    for i in 0..npoints {
        for j in 0..npoints {
            gram[(i, j)] = kernel.eval(pts.node(i), pts.node(j))?;
        }
    }
    let asym = gram.max_hermitian_defect();
    if asym > GRAM_HERMITIAN_TOL {
        return Err(Error::NotHermitian(asym));
    }
    gram.symmetrize();
    let eig = hermitian_eig(&gram)?;
    let min_eigenvalue = eig.eigenvalues.last().copied().unwrap_or(0.0);
    Ok(GramCheck { min_eigenvalue, npoints, seed, tol, passed: min_eigenvalue >= -tol })
}

/// Absolute coefficient sums, the quantity behind uniform convergence of the
/// expansion (and hence continuity of the kernel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    /// `Σ |a|`.
    pub abs_sum: f64,
    /// `Σ_{deg = d} |a|` for each total degree `d`.
    pub per_degree: Vec<f64>,
    /// `Σ_{deg >= d} |a|`, the mass not yet accounted for before degree `d`.
    pub per_degree_tail: Vec<f64>,
    /// Whether the per-degree sums decay over the trailing window.
    pub decreasing_tail: bool,
}

pub fn continuity_report(table: &CoefficientTable) -> ContinuityReport {
    let per_degree = table.per_degree(|a| a.norm());
    let mut abs = Neumaier::new();
    for (_, a) in table.iter() {
        abs.add(a.norm());
    }
    let mut tail = vec![0.0; per_degree.len()];
    let mut acc = Neumaier::new();
    for d in (0..per_degree.len()).rev() {
        acc.add(per_degree[d]);
        tail[d] = acc.value();
    }
    let window = &per_degree[per_degree.len().saturating_sub(TAIL_WINDOW)..];
    let decreasing_tail = window.windows(2).all(|w| w[1] <= w[0]);
    ContinuityReport { abs_sum: abs.value(), per_degree, per_degree_tail: tail, decreasing_tail }
}
