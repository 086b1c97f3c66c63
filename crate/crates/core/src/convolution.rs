//! Generalized convolution `(K1 * K2)(x, y) = (1/ω_q) ∫ K1(x, ξ) K2(ξ, y) dσ_q(ξ)`.
//!
//! On zonal kernels the convolution is diagonal in the disc-polynomial basis:
//! `Z_{m,n} * Z_{k,l} = δ_{mk} δ_{nl} Z_{m,n} / h_{m,n}`, so coefficients
//! multiply as `c_{m,n} = a_{m,n} b_{m,n} / h_{m,n}` (and `c_k = a_k b_k` on
//! the circle). [`convolve_direct`] evaluates the defining integral by sphere
//! quadrature and serves as the independent check of [`convolve_spectral`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{QuadratureRule, RuleKind};
use crate::spectral::{hermitian_inner, CoefficientTable, SpectralIndex, ZonalKernel};
use crate::special_fn::{disc_poly, DiscPolyIndex};
use crate::sum::{sum_complex, ComplexNeumaier};

/// Asymmetry allowed in `K(x, y) = conj(K(y, x))` before a kernel is
/// rejected as non-hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Spectral convolution: entrywise `a b / h` on the intersection of supports.
pub fn convolve_spectral(a: &CoefficientTable, b: &CoefficientTable) -> Result<CoefficientTable> {
    if a.q() != b.q() {
        return Err(Error::DimensionMismatch(a.q(), b.q()));
    }
    let q = a.q();
    let entries: Vec<(SpectralIndex, Complex64)> = a
        .iter()
        .filter_map(|(idx, &x)| {
            let y = b.get(idx);
            (y != Complex64::default()).then(|| (*idx, x * y / idx.norm_const(q)))
        })
        .collect();
    CoefficientTable::new(q, a.degree().min(b.degree()), entries)
}

/// Checks that `rule` is a sphere rule usable for direct integration in
/// dimension `q`.
pub(crate) fn check_sphere_rule(rule: &QuadratureRule, q: usize) -> Result<()> {
    if rule.q() != q {
        return Err(Error::DimensionMismatch(rule.q(), q));
    }
    let ok = match rule.kind() {
        RuleKind::Circle => q == 1,
        RuleKind::Sphere3 => q == 2,
        RuleKind::SphereMc => true,
        RuleKind::Disc => false,
    };
    if !ok {
        let expected = match q {
            1 => "circle or sphere_mc",
            2 => "sphere3 or sphere_mc",
            _ => "sphere_mc",
        };
        return Err(Error::RuleKind { found: rule.kind().to_string(), expected: expected.into() });
    }
    Ok(())
}

/// `(K1 * K2)(x, y)` by quadrature over `ξ`.
pub fn convolve_direct(
    k1: &ZonalKernel,
    k2: &ZonalKernel,
    x: &[Complex64],
    y: &[Complex64],
    rule: &QuadratureRule,
) -> Result<Complex64> {
    let q = k1.q();
    if k2.q() != q {
        return Err(Error::DimensionMismatch(q, k2.q()));
    }
    check_sphere_rule(rule, q)?;
    rule.try_integrate(|xi| Ok(k1.eval(x, xi)? * k2.eval(xi, y)?))
}

/// The harmonic `Y(x) = x1^m conj(x2)^n` on the unit sphere of `C^2`.
///
/// Holomorphic in `x1` and antiholomorphic in `x2`, so it is annihilated by
/// the complex Laplacian and has bi-degree `(m, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TestHarmonic {
    pub m: u32,
    pub n: u32,
}

impl TestHarmonic {
    pub fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        x[0].powu(self.m) * x[1].conj().powu(self.n)
    }
}

/// Both sides of the Funk–Hecke formula for one harmonic.
#[derive(Clone, Copy, Debug)]
pub struct FunkHeckeSides {
    /// `(1/ω_2) ∫ K'(x · y) conj(Y(x)) dσ(x)` by sphere quadrature.
    pub lhs: Complex64,
    /// `[∫ K' conj(R_{m,n}) dν_0] conj(Y(y))` by disc quadrature.
    pub rhs: Complex64,
}

impl FunkHeckeSides {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).norm()
    }
}

/// Evaluates the Funk–Hecke formula at `y` for each harmonic, sampling the
/// kernel on the sphere rule once.
pub fn funk_hecke_sides(
    kernel: &ZonalKernel,
    harmonics: &[TestHarmonic],
    y: &[Complex64],
    sphere_rule: &QuadratureRule,
    disc_rule: &QuadratureRule,
) -> Result<Vec<FunkHeckeSides>> {
    if kernel.q() != 2 {
        return Err(Error::Domain(format!("Funk-Hecke check is implemented for q = 2, got q = {}", kernel.q())));
    }
    check_sphere_rule(sphere_rule, 2)?;
    if disc_rule.kind() != RuleKind::Disc || disc_rule.q() != 2 {
        return Err(Error::RuleKind { found: format!("{} (q = {})", disc_rule.kind(), disc_rule.q()), expected: "disc (q = 2)".into() });
    }
    let top = harmonics.iter().map(|h| h.m.max(h.n) as usize).max().unwrap_or(0);
    if disc_rule.resolved_degree().unwrap_or(0) < top {
        return Err(Error::Resolution { degree: top, detail: "disc rule does not resolve the harmonic degrees".into() });
    }

    let sphere_samples: Vec<Complex64> = (0..sphere_rule.len())
        .into_par_iter()
        .map(|i| kernel.eval(sphere_rule.node(i), y).map(|v| v * sphere_rule.weights()[i]))
        .collect::<Result<_>>()?;
    let disc_samples: Vec<Complex64> = disc_rule
        .nodes()
        .zip(disc_rule.weights())
        .map(|(z, &w)| kernel.generating(z[0]).map(|v| v * w))
        .collect::<Result<_>>()?;

    harmonics
        .par_iter()
        .map(|h| {
            let lhs = sum_complex(sphere_rule.nodes().zip(&sphere_samples).map(|(x, &kw)| kw * h.eval(x).conj()));
            let idx = DiscPolyIndex::new(2, h.m, h.n)?;
            let mut acc = ComplexNeumaier::new();
            for (z, &kw) in disc_rule.nodes().zip(&disc_samples) {
                acc.add(kw * disc_poly(idx, z[0])?.conj());
            }
            let rhs = acc.value() * h.eval(y).conj();
            Ok(FunkHeckeSides { lhs, rhs })
        })
        .collect()
}

/// `|LHS - RHS|` of the Funk–Hecke formula for one harmonic.
pub fn funk_hecke_check(
    kernel: &ZonalKernel,
    harmonic: TestHarmonic,
    y: &[Complex64],
    sphere_rule: &QuadratureRule,
    disc_rule: &QuadratureRule,
) -> Result<f64> {
    Ok(funk_hecke_sides(kernel, &[harmonic], y, sphere_rule, disc_rule)?[0].residual())
}

/// A polynomial `Σ c · Π x_j^{a_j} conj(x_j)^{b_j}` on the unit sphere of `C^q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeFunction {
    q: usize,
    terms: Vec<(Complex64, Vec<u32>, Vec<u32>)>,
}

impl ProbeFunction {
    pub fn monomial(coeff: Complex64, holomorphic: Vec<u32>, antiholomorphic: Vec<u32>) -> Self {
        assert_eq!(holomorphic.len(), antiholomorphic.len(), "exponent vectors must have length q");
        Self { q: holomorphic.len(), terms: vec![(coeff, holomorphic, antiholomorphic)] }
    }

    /// `e^{ikθ}` on the circle.
    pub fn circle_mode(k: i64) -> Self {
        let (a, b) = if k >= 0 { (k as u32, 0) } else { (0, k.unsigned_abs() as u32) };
        Self::monomial(Complex64::new(1.0, 0.0), vec![a], vec![b])
    }

    /// `count` probes, each a sum of three monomials of total degree
    /// `<= max_degree` with standard complex Gaussian coefficients, drawn
    /// from a ChaCha8 stream seeded with `seed`.
    pub fn random_family(q: usize, max_degree: u32, count: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let terms = (0..3)
                    .map(|_| {
                        let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                        let mut a = vec![0u32; q];
                        let mut b = vec![0u32; q];
                        let total = rng.random_range(0..=max_degree);
                        for _ in 0..total {
                            let j = rng.random_range(0..q);
                            if rng.random::<bool>() {
                                a[j] += 1;
                            } else {
                                b[j] += 1;
                            }
                        }
                        (c, a, b)
                    })
                    .collect();
                Self { q, terms }
            })
            .collect()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, a, b)| {
                x.iter()
                    .zip(a.iter().zip(b))
                    .fold(*c, |acc, (z, (&p, &r))| acc * z.powu(p) * z.conj().powu(r))
            })
            .sum()
    }
}

/// Largest `|K(x_i, x_j) - conj(K(x_j, x_i))|` over a strided subset of at
/// most `max_points` rule nodes.
pub(crate) fn max_hermitian_defect(kernel: &ZonalKernel, rule: &QuadratureRule, max_points: usize) -> Result<f64> {
    let stride = rule.len().div_ceil(max_points).max(1);
    let idx: Vec<usize> = (0..rule.len()).step_by(stride).collect();
    let mut worst: f64 = 0.0;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a..] {
            let kij = kernel.eval(rule.node(i), rule.node(j))?;
            let kji = kernel.eval(rule.node(j), rule.node(i))?;
            worst = worst.max((kij - kji.conj()).norm());
        }
    }
    Ok(worst)
}

/// Minimum over `probes` of `Re ⟨(K * K) f, f⟩`, where both applications of
/// the integral operator and the final inner product are quadratures over
/// `rule`. For hermitian `K` every value is nonnegative.
///
/// Hermitian symmetry of `K` is checked on rule nodes before integrating.
pub fn hermitian_selfconv_pd_check(kernel: &ZonalKernel, rule: &QuadratureRule, probes: &[ProbeFunction]) -> Result<f64> {
    let q = kernel.q();
    check_sphere_rule(rule, q)?;
    if let Some(p) = probes.iter().find(|p| p.q() != q) {
        return Err(Error::DimensionMismatch(p.q(), q));
    }
    let defect = max_hermitian_defect(kernel, rule, 48)?;
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }

    let n = rule.len();
    let w = rule.weights();
    let gram: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|ij| kernel.eval(rule.node(ij / n), rule.node(ij % n)))
        .collect::<Result<_>>()?;
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        (0..n)
            .into_par_iter()
            .map(|i| sum_complex((0..n).map(|j| gram[i * n + j] * v[j] * w[j])))
            .collect()
    };

    let mut min = f64::INFINITY;
    for probe in probes {
        let f: Vec<Complex64> = rule.nodes().map(|x| probe.eval(x)).collect();
        let g = apply(&apply(&f));
        let value = sum_complex((0..n).map(|i| g[i] * f[i].conj() * w[i]));
        min = min.min(value.re);
    }
    Ok(min)
}

/// `⟨K, Z_{m,n}⟩₂ = a_{m,n} / h_{m,n}` read off a table, i.e. the eigenvalue
/// of the integral operator on bi-degree `(m, n)` harmonics.
pub fn mode_coefficient(table: &CoefficientTable, idx: &SpectralIndex) -> Complex64 {
    table.get(idx) / table.norm_const(idx)
}

/// `(1/ω_q) ∫ K(x, ξ) conj(Z(x, ξ))` with `ξ` fixed, approximating the
/// kernel inner product `⟨K, Z⟩₂` via zonality.
pub fn kernel_mode_inner(
    kernel_values: impl Fn(&[Complex64]) -> Result<Complex64> + Sync,
    mode: SpectralIndex,
    xi: &[Complex64],
    rule: &QuadratureRule,
) -> Result<Complex64> {
    let q = rule.q();
    rule.try_integrate(|x| {
        let ip = hermitian_inner(x, xi);
        let z = match mode {
            SpectralIndex::Circle { k } => {
                let u = ip / ip.norm();
                if k >= 0 { u.powu(k as u32) } else { u.conj().powu(k.unsigned_abs() as u32) }
            }
            SpectralIndex::Disc { m, n } => disc_poly(DiscPolyIndex::new(q, m, n)?, ip)?,
        };
        Ok(kernel_values(x)? * z.conj())
    })
}
