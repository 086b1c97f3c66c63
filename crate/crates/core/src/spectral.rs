//! Coefficient tables, zonal kernels, and the transforms between them.
//!
//! A zonal kernel on the unit sphere of `C^q` is `K(x, y) = K'(x · y)` with
//! `x · y = Σ x_j conj(y_j)`. For `q >= 2` the generating function `K'` lives
//! on the closed unit disc and expands as `Σ a_{m,n} R_{m,n}^{q-2}`; for
//! `q = 1` it lives on the circle and expands as `Σ a_k z^k`. Both cases share
//! one code path with `h ≡ 1` on the circle.
//!
//! Tables are sparse, truncated at a caller-supplied degree `N` (`m, n <= N`,
//! or `|k| <= N`), and iterate in a fixed order: by total degree, then
//! lexicographically.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::SCHEMA_VERSION;
use crate::quadrature::{QuadratureRule, RuleKind};
use crate::special_fn::{angular_factor, clamp_to_disc, jacobi_r_sequence, norm_const, DiscPolyIndex};
use crate::sum::{ComplexNeumaier, Neumaier};

/// Entries below this magnitude are dropped when a table is built.
pub const DROP_TOL: f64 = 1e-14;

/// Tolerance on `|x| = 1` for sphere points and on `|z| = 1` for circle points.
pub const SPHERE_TOL: f64 = 1e-10;

/// Tolerance on the sign and imaginary part of a coefficient for a table to
/// count as a positive definite candidate.
pub const PD_CANDIDATE_TOL: f64 = 1e-12;

/// A mode label: a signed frequency on the circle or a bi-degree on the disc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectralIndex {
    Circle { k: i64 },
    Disc { m: u32, n: u32 },
}

impl SpectralIndex {
    pub fn circle(k: i64) -> Self {
        SpectralIndex::Circle { k }
    }

    pub fn disc(m: u32, n: u32) -> Self {
        SpectralIndex::Disc { m, n }
    }

    /// `|k|` on the circle, `m + n` on the disc.
    pub fn total_degree(&self) -> usize {
        match *self {
            SpectralIndex::Circle { k } => k.unsigned_abs() as usize,
            SpectralIndex::Disc { m, n } => (m + n) as usize,
        }
    }

    /// `|k|` on the circle, `max(m, n)` on the disc; compared against a
    /// table's truncation degree.
    pub fn max_degree(&self) -> usize {
        match *self {
            SpectralIndex::Circle { k } => k.unsigned_abs() as usize,
            SpectralIndex::Disc { m, n } => m.max(n) as usize,
        }
    }

    /// Angular frequency: `k` on the circle, `m - n` on the disc.
    pub fn frequency(&self) -> i64 {
        match *self {
            SpectralIndex::Circle { k } => k,
            SpectralIndex::Disc { m, n } => m as i64 - n as i64,
        }
    }

    /// `h_{m,n}^{q-2}` for `q >= 2`; 1 on the circle.
    pub fn norm_const(&self, q: usize) -> f64 {
        match *self {
            SpectralIndex::Circle { .. } => 1.0,
            SpectralIndex::Disc { m, n } => norm_const(DiscPolyIndex { q, m, n }),
        }
    }

    fn fits(&self, q: usize) -> bool {
        matches!(
            (self, q),
            (SpectralIndex::Circle { .. }, 1) | (SpectralIndex::Disc { .. }, 2..)
        )
    }

    fn sort_key(&self) -> (usize, i64, i64) {
        match *self {
            SpectralIndex::Circle { k } => (k.unsigned_abs() as usize, k, 0),
            SpectralIndex::Disc { m, n } => ((m + n) as usize, m as i64, n as i64),
        }
    }
}

impl Ord for SpectralIndex {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for SpectralIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SpectralIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SpectralIndex::Circle { k } => write!(f, "k={k}"),
            SpectralIndex::Disc { m, n } => write!(f, "(m,n)=({m},{n})"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Term {
    coeff: Complex64,
    diagonal: usize,
    slot: usize,
}

/// Sparse, truncated coefficient table of a zonal generating function.
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    q: usize,
    degree: usize,
    entries: BTreeMap<SpectralIndex, Complex64>,
    // synthesis plan: one Jacobi sequence per angular frequency
    diagonals: Vec<(i64, usize, usize)>,
    terms: Vec<Term>,
    max_power: usize,
}

impl PartialEq for CoefficientTable {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.degree == other.degree && self.entries == other.entries
    }
}

impl CoefficientTable {
    /// Builds a table, dropping entries with `|a| < 1e-14`.
    ///
    /// Fails on indices of the wrong shape for `q`, indices beyond `degree`,
    /// duplicates, and non-finite coefficients.
    pub fn new<I>(q: usize, degree: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (SpectralIndex, Complex64)>,
    {
        if q == 0 {
            return Err(Error::InvalidTable("q must be >= 1".into()));
        }
        let mut map = BTreeMap::new();
        for (idx, a) in entries {
            if !idx.fits(q) {
                return Err(Error::InvalidTable(format!("index {idx} does not fit q = {q}")));
            }
            if idx.max_degree() > degree {
                return Err(Error::InvalidTable(format!(
                    "index {idx} exceeds truncation degree {degree}"
                )));
            }
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::InvalidTable(format!("coefficient at {idx} is not finite")));
            }
            if map.contains_key(&idx) {
                return Err(Error::InvalidTable(format!("duplicate index {idx}")));
            }
            map.insert(idx, a);
        }
        map.retain(|_, a| a.norm() >= DROP_TOL);
        Ok(Self::from_map(q, degree, map))
    }

    pub fn empty(q: usize, degree: usize) -> Self {
        Self::from_map(q, degree, BTreeMap::new())
    }

    fn from_map(q: usize, degree: usize, entries: BTreeMap<SpectralIndex, Complex64>) -> Self {
        let mut kmax: BTreeMap<i64, usize> = BTreeMap::new();
        let mut max_power = 0;
        for idx in entries.keys() {
            max_power = max_power.max(idx.frequency().unsigned_abs() as usize);
            if let SpectralIndex::Disc { m, n } = *idx {
                let e = kmax.entry(idx.frequency()).or_insert(0);
                *e = (*e).max(m.min(n) as usize);
            }
        }
        let mut diagonals = Vec::with_capacity(kmax.len());
        let mut offset = 0;
        for (&d, &k) in &kmax {
            diagonals.push((d, k, offset));
            offset += k + 1;
        }
        let terms = entries
            .iter()
            .map(|(idx, &coeff)| match *idx {
                SpectralIndex::Disc { m, n } => {
                    let d = idx.frequency();
                    let diagonal = diagonals.binary_search_by_key(&d, |t| t.0).unwrap();
                    Term { coeff, diagonal, slot: diagonals[diagonal].2 + m.min(n) as usize }
                }
                SpectralIndex::Circle { k } => Term { coeff, diagonal: 0, slot: k.unsigned_abs() as usize },
            })
            .collect();
        Self { q, degree, entries, diagonals, terms, max_power }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Truncation degree `N`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Coefficient at `idx`, zero when absent.
    pub fn get(&self, idx: &SpectralIndex) -> Complex64 {
        self.entries.get(idx).copied().unwrap_or_default()
    }

    /// Entries in total-degree, then lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&SpectralIndex, &Complex64)> + '_ {
        self.entries.iter()
    }

    pub fn norm_const(&self, idx: &SpectralIndex) -> f64 {
        idx.norm_const(self.q)
    }

    /// All entries real and nonnegative up to `1e-12`.
    pub fn is_pd_candidate(&self) -> bool {
        self.entries
            .values()
            .all(|a| a.re >= -PD_CANDIDATE_TOL && a.im.abs() <= PD_CANDIDATE_TOL)
    }

    /// `c · self`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(&i, &a)| (i, a * c))
            .filter(|(_, a)| a.norm() >= DROP_TOL)
            .collect();
        Self::from_map(self.q, self.degree, entries)
    }

    /// `self - other` on the union of supports; degree is the larger one.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.q != other.q {
            return Err(Error::DimensionMismatch(self.q, other.q));
        }
        let mut map = self.entries.clone();
        for (&idx, &b) in &other.entries {
            *map.entry(idx).or_default() -= b;
        }
        map.retain(|_, a| a.norm() >= DROP_TOL);
        Ok(Self::from_map(self.q, self.degree.max(other.degree), map))
    }

    /// Drops every entry beyond `degree`.
    pub fn truncated(&self, degree: usize) -> Self {
        let map = self
            .entries
            .iter()
            .filter(|(i, _)| i.max_degree() <= degree)
            .map(|(&i, &a)| (i, a))
            .collect();
        Self::from_map(self.q, degree, map)
    }

    /// Per-total-degree sums `s_d = Σ_{deg = d} f(a)` for `d = 0..=max`.
    pub fn per_degree<F: Fn(Complex64) -> f64>(&self, f: F) -> Vec<f64> {
        let top = self.entries.keys().map(|i| i.total_degree()).max();
        let Some(top) = top else { return Vec::new() };
        let mut acc = vec![Neumaier::new(); top + 1];
        for (idx, &a) in &self.entries {
            acc[idx.total_degree()].add(f(a));
        }
        acc.iter().map(|s| s.value()).collect()
    }

    /// Coefficient file representation.
    pub fn to_file(&self) -> CoefficientFile {
        CoefficientFile {
            version: Some(SCHEMA_VERSION),
            q: self.q,
            degree: self.degree,
            entries: self
                .entries
                .iter()
                .map(|(idx, a)| {
                    let (m, n, k) = match *idx {
                        SpectralIndex::Circle { k } => (None, None, Some(k)),
                        SpectralIndex::Disc { m, n } => (Some(m), Some(n), None),
                    };
                    CoefficientEntry { m, n, k, re: a.re, im: a.im }
                })
                .collect(),
        }
    }

    pub fn from_file(file: &CoefficientFile) -> Result<Self> {
        if let Some(v) = file.version {
            if v != SCHEMA_VERSION {
                return Err(Error::InvalidTable(format!(
                    "unsupported schema version {v} (expected {SCHEMA_VERSION})"
                )));
            }
        }
        let entries = file
            .entries
            .iter()
            .enumerate()
            .map(|(pos, e)| {
                let idx = match (file.q, e.m, e.n, e.k) {
                    (1, None, None, Some(k)) => SpectralIndex::Circle { k },
                    (2.., Some(m), Some(n), None) => SpectralIndex::Disc { m, n },
                    (1, ..) => {
                        return Err(Error::InvalidTable(format!(
                            "entries[{pos}]: q = 1 entries need exactly the field \"k\""
                        )))
                    }
                    _ => {
                        return Err(Error::InvalidTable(format!(
                            "entries[{pos}]: q >= 2 entries need exactly the fields \"m\" and \"n\""
                        )))
                    }
                };
                Ok((idx, Complex64::new(e.re, e.im)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.q, file.degree, entries)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(&self.to_file())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CoefficientFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// On-disk coefficient table:
/// `{"version": 1, "q": 2, "N": 8, "entries": [{"m": 1, "n": 0, "re": .., "im": ..}]}`
/// with `"k"` in place of `"m"`, `"n"` when `q = 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    pub q: usize,
    #[serde(rename = "N")]
    pub degree: usize,
    pub entries: Vec<CoefficientEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    pub re: f64,
    pub im: f64,
}

/// Evaluates `Σ a R(z)` (or `Σ a_k z^k` on the circle) in table order with
/// compensated summation.
///
/// `z` must lie in the closed disc for `q >= 2` and on the unit circle for
/// `q = 1` (both up to rounding). Convergence of the infinite series this
/// table truncates is only guaranteed in `L²`; pointwise values of a
/// truncation are exactly that.
pub fn synthesize(table: &CoefficientTable, z: Complex64) -> Result<Complex64> {
    if table.q == 1 {
        let z = unit_circle_point(z)?;
        let mut pos = Vec::with_capacity(table.max_power + 1);
        let mut p = Complex64::new(1.0, 0.0);
        for _ in 0..=table.max_power {
            pos.push(p);
            p *= z;
        }
        let mut acc = ComplexNeumaier::new();
        for (idx, t) in table.entries.keys().zip(&table.terms) {
            let zk = if idx.frequency() >= 0 { pos[t.slot] } else { pos[t.slot].conj() };
            acc.add(t.coeff * zk);
        }
        return Ok(acc.value());
    }

    let z = clamp_to_disc(z)?;
    let alpha = (table.q - 2) as f64;
    let t = 2.0 * z.norm_sqr() - 1.0;
    let slots = table.diagonals.last().map_or(0, |&(_, k, off)| off + k + 1);
    let mut radial = Vec::with_capacity(slots);
    let mut phases = Vec::with_capacity(table.diagonals.len());
    let mut seq = Vec::new();
    for &(d, kmax, _) in &table.diagonals {
        jacobi_r_sequence(kmax, alpha, d.unsigned_abs() as f64, t, &mut seq);
        radial.extend_from_slice(&seq);
        phases.push(angular_factor(z, d));
    }
    let mut acc = ComplexNeumaier::new();
    for term in &table.terms {
        acc.add(term.coeff * phases[term.diagonal] * radial[term.slot]);
    }
    Ok(acc.value())
}

fn unit_circle_point(z: Complex64) -> Result<Complex64> {
    let r = z.norm();
    if (r - 1.0).abs() > SPHERE_TOL {
        return Err(Error::Domain(format!("|z| = {r} is not on the unit circle")));
    }
    Ok(z / r)
}

/// `Σ |a|² / h`, the squared `L²` norm of the kernel (equal to the `ν`-norm
/// of its generating function).
pub fn l2_norm_sq(table: &CoefficientTable) -> f64 {
    let mut acc = Neumaier::new();
    for (idx, a) in table.iter() {
        acc.add(a.norm_sqr() / table.norm_const(idx));
    }
    acc.value()
}

type GeneratingFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// An evaluable zonal kernel `K(x, y) = K'(x · y)`.
#[derive(Clone)]
pub enum ZonalKernel {
    /// Circle Poisson kernel `K'(z) = (1 - ρ²) / |1 - ρz|²`, with
    /// coefficients `a_k = ρ^{|k|}`.
    Poisson { rho: f64 },
    /// Kernel defined by a (finite) coefficient table.
    Expansion(CoefficientTable),
    /// Arbitrary generating function on the disc (or circle when `q = 1`).
    Function { q: usize, f: GeneratingFn },
}

impl fmt::Debug for ZonalKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZonalKernel::Poisson { rho } => f.debug_struct("Poisson").field("rho", rho).finish(),
            ZonalKernel::Expansion(t) => f.debug_tuple("Expansion").field(t).finish(),
            ZonalKernel::Function { q, .. } => f.debug_struct("Function").field("q", q).finish_non_exhaustive(),
        }
    }
}

impl From<CoefficientTable> for ZonalKernel {
    fn from(t: CoefficientTable) -> Self {
        ZonalKernel::Expansion(t)
    }
}

impl ZonalKernel {
    pub fn poisson(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("Poisson parameter must lie in (0, 1), got {rho}")));
        }
        Ok(ZonalKernel::Poisson { rho })
    }

    pub fn function<F>(q: usize, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        ZonalKernel::Function { q, f: Arc::new(f) }
    }

    pub fn q(&self) -> usize {
        match self {
            ZonalKernel::Poisson { .. } => 1,
            ZonalKernel::Expansion(t) => t.q(),
            ZonalKernel::Function { q, .. } => *q,
        }
    }

    pub fn table(&self) -> Option<&CoefficientTable> {
        match self {
            ZonalKernel::Expansion(t) => Some(t),
            _ => None,
        }
    }

    /// The generating function `K'(z)`.
    pub fn generating(&self, z: Complex64) -> Result<Complex64> {
        match self {
            ZonalKernel::Poisson { rho } => {
                let z = unit_circle_point(z)?;
                Ok(Complex64::from((1.0 - rho * rho) / (Complex64::new(1.0, 0.0) - z * rho).norm_sqr()))
            }
            ZonalKernel::Expansion(t) => synthesize(t, z),
            ZonalKernel::Function { q, f } => {
                let z = if *q == 1 { unit_circle_point(z)? } else { clamp_to_disc(z)? };
                Ok(f(z))
            }
        }
    }

    /// `K(x, y) = K'(x · y)` for points of the unit sphere of `C^q`.
    pub fn eval(&self, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
        zonal_eval(self, x, y)
    }
}

/// `x · y = Σ x_j conj(y_j)`.
#[inline]
pub fn hermitian_inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b.conj()).sum()
}

pub(crate) fn check_sphere_point(x: &[Complex64], q: usize) -> Result<()> {
    if x.len() != q {
        return Err(Error::DimensionMismatch(x.len(), q));
    }
    let r: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (r - 1.0).abs() > SPHERE_TOL {
        return Err(Error::Domain(format!("point with norm {r} is not on the unit sphere")));
    }
    Ok(())
}

/// `K'(x · y)`, with the inner product pulled back onto the closed disc (or
/// the circle for `q = 1`) when rounding pushes it outside.
pub fn zonal_eval(kernel: &ZonalKernel, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
    let q = kernel.q();
    check_sphere_point(x, q)?;
    check_sphere_point(y, q)?;
    let mut ip = hermitian_inner(x, y);
    let r = ip.norm();
    if q == 1 || r > 1.0 {
        ip /= r;
    }
    kernel.generating(ip)
}

/// Fourier coefficients of `kernel` up to degree `n_max`.
///
/// For `q >= 2`, `a_{m,n} = h_{m,n} ∫ K' conj(R_{m,n}) dν_{q-2}` with a disc
/// rule; for `q = 1`, `a_k = (1/2π) ∫ K'(e^{iθ}) e^{-ikθ} dθ` with a circle
/// rule. Kernel samples are taken once per node. The rule must resolve
/// `n_max`: `nrad >= N + 1` and `nang >= 2N + 1`.
pub fn forward_transform(kernel: &ZonalKernel, n_max: usize, rule: &QuadratureRule) -> Result<CoefficientTable> {
    let q = kernel.q();
    if rule.q() != q {
        return Err(Error::DimensionMismatch(rule.q(), q));
    }
    let expected = if q == 1 { RuleKind::Circle } else { RuleKind::Disc };
    if rule.kind() != expected {
        return Err(Error::RuleKind { found: rule.kind().to_string(), expected: expected.to_string() });
    }
    if rule.angular_nodes() < 2 * n_max + 1 || (q >= 2 && rule.radial_nodes() < n_max + 1) {
        return Err(Error::Resolution {
            degree: n_max,
            detail: format!(
                "need nrad >= {} and nang >= {}, rule has nrad = {}, nang = {}",
                n_max + 1,
                2 * n_max + 1,
                rule.radial_nodes(),
                rule.angular_nodes()
            ),
        });
    }

    let nodes: Vec<Complex64> = rule.nodes().map(|z| z[0]).collect();
    let weighted: Vec<Complex64> = nodes
        .par_iter()
        .zip(rule.weights().par_iter())
        .map(|(&z, &w)| kernel.generating(z).map(|v| v * w))
        .collect::<Result<_>>()?;

    let frequencies: Vec<i64> = (-(n_max as i64)..=(n_max as i64)).collect();
    let per_diagonal: Vec<Vec<(SpectralIndex, Complex64)>> = if q == 1 {
        frequencies
            .par_iter()
            .map(|&k| {
                let mut acc = ComplexNeumaier::new();
                for (&z, &kw) in nodes.iter().zip(&weighted) {
                    acc.add(kw * angular_factor(z, k).conj());
                }
                vec![(SpectralIndex::Circle { k }, acc.value())]
            })
            .collect()
    } else {
        let alpha = (q - 2) as f64;
        frequencies
            .par_iter()
            .map(|&d| {
                let kmax = n_max - d.unsigned_abs() as usize;
                let mut acc = vec![ComplexNeumaier::new(); kmax + 1];
                let mut seq = Vec::with_capacity(kmax + 1);
                for (&z, &kw) in nodes.iter().zip(&weighted) {
                    jacobi_r_sequence(kmax, alpha, d.unsigned_abs() as f64, 2.0 * z.norm_sqr() - 1.0, &mut seq);
                    let base = kw * angular_factor(z, d).conj();
                    for (a, &r) in acc.iter_mut().zip(&seq) {
                        a.add(base * r);
                    }
                }
                acc.iter()
                    .enumerate()
                    .map(|(k, a)| {
                        let (m, n) = if d >= 0 { (k as i64 + d, k as i64) } else { (k as i64, k as i64 - d) };
                        let idx = SpectralIndex::Disc { m: m as u32, n: n as u32 };
                        (idx, a.value() * idx.norm_const(q))
                    })
                    .collect()
            })
            .collect()
    };
    CoefficientTable::new(q, n_max, per_diagonal.into_iter().flatten())
}

/// Circle Poisson coefficients `a_k = ρ^{|k|}`, `|k| <= degree`.
pub fn poisson_table(rho: f64, degree: usize) -> Result<CoefficientTable> {
    let d = degree as i64;
    CoefficientTable::new(1, degree, (-d..=d).map(|k| (SpectralIndex::circle(k), Complex64::from(rho.powi(k.abs() as i32)))))
}

/// Geometric family `a_{m,n} = ρ^{m+n}`, `m, n <= degree`.
pub fn geometric_table(q: usize, rho: f64, degree: usize) -> Result<CoefficientTable> {
    if q < 2 {
        return Err(Error::Domain("the geometric family needs q >= 2".into()));
    }
    let n = degree as u32;
    CoefficientTable::new(
        q,
        degree,
        (0..=n).flat_map(|m| (0..=n).map(move |k| (SpectralIndex::disc(m, k), Complex64::from(rho.powi((m + k) as i32))))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{circle_rule, disc_rule, random_sphere_points};
    use crate::special_fn::disc_poly_monomial;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn disc(q: usize, n: usize) -> QuadratureRule {
        disc_rule(q, n + 1, 2 * n + 2).unwrap()
    }

    fn random_table(rng: &mut ChaCha8Rng, q: usize, degree: usize) -> CoefficientTable {
        let mut entries = Vec::new();
        if q == 1 {
            for k in -(degree as i64)..=(degree as i64) {
                entries.push((SpectralIndex::circle(k), Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
            }
        } else {
            for m in 0..=degree as u32 {
                for n in 0..=degree as u32 {
                    entries.push((SpectralIndex::disc(m, n), Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
                }
            }
        }
        CoefficientTable::new(q, degree, entries).unwrap()
    }

    #[test]
    fn ordering_is_by_total_degree() {
        let t = CoefficientTable::new(
            2,
            3,
            [(SpectralIndex::disc(0, 2), c(1.0)), (SpectralIndex::disc(1, 0), c(2.0)), (SpectralIndex::disc(0, 0), c(3.0)), (SpectralIndex::disc(2, 0), c(4.0))],
        )
        .unwrap();
        let order: Vec<_> = t.iter().map(|(i, _)| *i).collect();
        assert_eq!(order, vec![SpectralIndex::disc(0, 0), SpectralIndex::disc(1, 0), SpectralIndex::disc(0, 2), SpectralIndex::disc(2, 0)]);
        let t = CoefficientTable::new(1, 2, [(SpectralIndex::circle(2), c(1.0)), (SpectralIndex::circle(-1), c(1.0)), (SpectralIndex::circle(1), c(1.0))]).unwrap();
        let order: Vec<_> = t.iter().map(|(i, _)| *i).collect();
        assert_eq!(order, vec![SpectralIndex::circle(-1), SpectralIndex::circle(1), SpectralIndex::circle(2)]);
    }

    #[test]
    fn table_validation() {
        assert!(CoefficientTable::new(2, 1, [(SpectralIndex::disc(2, 0), c(1.0))]).is_err());
        assert!(CoefficientTable::new(1, 3, [(SpectralIndex::disc(0, 0), c(1.0))]).is_err());
        assert!(CoefficientTable::new(2, 3, [(SpectralIndex::circle(0), c(1.0))]).is_err());
        assert!(CoefficientTable::new(2, 3, [(SpectralIndex::disc(0, 0), c(1.0)), (SpectralIndex::disc(0, 0), c(2.0))]).is_err());
        assert!(CoefficientTable::new(2, 3, [(SpectralIndex::disc(0, 0), c(f64::NAN))]).is_err());
        let t = CoefficientTable::new(2, 3, [(SpectralIndex::disc(0, 0), c(1e-15)), (SpectralIndex::disc(1, 0), c(0.5))]).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.is_pd_candidate());
        let t = CoefficientTable::new(2, 3, [(SpectralIndex::disc(1, 0), c(-1e-3))]).unwrap();
        assert!(!t.is_pd_candidate());
    }

    #[test]
    fn forward_of_basis_element() {
        let mode = CoefficientTable::new(2, 1, [(SpectralIndex::disc(1, 1), c(1.0))]).unwrap();
        let t = forward_transform(&mode.clone().into(), 4, &disc(2, 4)).unwrap();
        assert_abs_diff_eq!(t.get(&SpectralIndex::disc(1, 1)).re, 1.0, epsilon = 1e-12);
        for (idx, a) in t.iter() {
            if *idx != SpectralIndex::disc(1, 1) {
                assert!(a.norm() < 1e-12, "{idx}: {a}");
            }
        }
    }

    #[test]
    fn forward_of_poisson() {
        let k = ZonalKernel::poisson(0.5).unwrap();
        let t = forward_transform(&k, 20, &circle_rule(128).unwrap()).unwrap();
        for kk in -20i64..=20 {
            assert_abs_diff_eq!(t.get(&SpectralIndex::circle(kk)).re, 0.5f64.powi(kk.abs() as i32), epsilon = 1e-14);
        }
    }

    #[test]
    fn forward_of_geometric_round_trip() {
        let g = geometric_table(2, 0.4, 10).unwrap();
        let t = forward_transform(&g.clone().into(), 10, &disc(2, 10)).unwrap();
        for m in 0..=10u32 {
            for n in 0..=10u32 {
                let a = t.get(&SpectralIndex::disc(m, n));
                assert_abs_diff_eq!(a.re, 0.4f64.powi((m + n) as i32), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn forward_rejects_coarse_rules() {
        let k: ZonalKernel = geometric_table(2, 0.4, 4).unwrap().into();
        assert!(matches!(forward_transform(&k, 6, &disc_rule(2, 6, 14).unwrap()), Err(Error::Resolution { .. })));
        assert!(matches!(forward_transform(&k, 6, &disc_rule(2, 7, 12).unwrap()), Err(Error::Resolution { .. })));
        assert!(forward_transform(&k, 6, &disc_rule(2, 7, 13).unwrap()).is_ok());
        assert!(matches!(forward_transform(&k, 2, &circle_rule(8).unwrap()), Err(Error::DimensionMismatch(..))));
        assert!(matches!(forward_transform(&k, 2, &disc_rule(3, 8, 8).unwrap()), Err(Error::DimensionMismatch(..))));
    }

    #[test]
    fn synthesize_examples() {
        let one = CoefficientTable::new(3, 0, [(SpectralIndex::disc(0, 0), c(1.0))]).unwrap();
        assert_eq!(synthesize(&one, Complex64::new(0.2, -0.7)).unwrap(), c(1.0));
        let r10 = CoefficientTable::new(2, 1, [(SpectralIndex::disc(1, 0), c(1.0))]).unwrap();
        let z = Complex64::new(0.3, -0.2);
        assert!((synthesize(&r10, z).unwrap() - z).norm() < 1e-15);
        assert!((synthesize(&r10, z).unwrap() - disc_poly_monomial(DiscPolyIndex::new(2, 1, 0).unwrap(), z).unwrap()).norm() < 1e-15);

        let p = poisson_table(0.5, 60).unwrap();
        let v = synthesize(&p, Complex64::from_polar(1.0, std::f64::consts::PI / 3.0)).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
        assert!(synthesize(&p, c(0.5)).is_err());
        assert!(synthesize(&r10, c(1.1)).is_err());
    }

    #[test]
    fn synthesize_matches_pointwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in 2..=4 {
            let t = random_table(&mut rng, q, 6);
            let z = Complex64::new(0.31, 0.57);
            let direct: Complex64 = t
                .iter()
                .map(|(idx, a)| match *idx {
                    SpectralIndex::Disc { m, n } => a * crate::special_fn::disc_poly(DiscPolyIndex::new(q, m, n).unwrap(), z).unwrap(),
                    _ => unreachable!(),
                })
                .sum();
            assert!((synthesize(&t, z).unwrap() - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn l2_norm_examples() {
        let t = CoefficientTable::new(2, 1, [(SpectralIndex::disc(1, 0), c(1.0))]).unwrap();
        assert_abs_diff_eq!(l2_norm_sq(&t), 0.5, epsilon = 1e-15);
        assert_eq!(l2_norm_sq(&CoefficientTable::empty(2, 3)), 0.0);
        assert_abs_diff_eq!(l2_norm_sq(&poisson_table(0.5, 60).unwrap()), 5.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn parseval_against_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for q in 2..=4 {
            let t = random_table(&mut rng, q, 5);
            let rule = disc(q, 5);
            let quad = rule.try_integrate(|z| Ok(Complex64::from(synthesize(&t, z[0])?.norm_sqr()))).unwrap();
            assert!((quad.re - l2_norm_sq(&t)).abs() <= 1e-9 * l2_norm_sq(&t).max(1.0));
        }
        let t = random_table(&mut rng, 1, 7);
        let quad = circle_rule(16).unwrap().try_integrate(|z| Ok(Complex64::from(synthesize(&t, z[0])?.norm_sqr()))).unwrap();
        assert!((quad.re - l2_norm_sq(&t)).abs() <= 1e-9);
    }

    #[test]
    fn round_trip_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for q in 1..=3 {
            for _ in 0..3 {
                let t = random_table(&mut rng, q, 10);
                let rule = if q == 1 { circle_rule(22).unwrap() } else { disc(q, 10) };
                let back = forward_transform(&t.clone().into(), 10, &rule).unwrap();
                for (idx, a) in t.iter() {
                    assert!((back.get(idx) - a).norm() <= 1e-10, "q={q} {idx}");
                }
                assert_eq!(back.len(), t.len());
            }
        }
    }

    #[test]
    fn zonal_eval_examples() {
        let mode = CoefficientTable::new(2, 1, [(SpectralIndex::disc(1, 0), c(1.0))]).unwrap();
        let k: ZonalKernel = mode.into();
        let e1 = [c(1.0), c(0.0)];
        let e2 = [c(0.0), c(1.0)];
        assert_abs_diff_eq!(k.eval(&e1, &e1).unwrap().re, 1.0, epsilon = 1e-15);
        assert_eq!(k.eval(&e1, &e2).unwrap(), c(0.0));
        let (alpha, beta) = (0.7f64, 0.4f64);
        let y = [Complex64::from_polar(beta.cos(), -alpha), Complex64::from_polar(beta.sin(), 0.3)];
        let v = k.eval(&e1, &y).unwrap();
        assert!((v - Complex64::from_polar(beta.cos(), alpha)).norm() < 1e-15);
        assert!(k.eval(&[c(1.0), c(0.1)], &e1).is_err());
        assert!(k.eval(&[c(1.0)], &e1).is_err());
    }

    fn random_unitary(rng: &mut ChaCha8Rng, q: usize) -> Vec<Vec<Complex64>> {
        let mut cols: Vec<Vec<Complex64>> = Vec::new();
        while cols.len() < q {
            let mut v: Vec<Complex64> = (0..q).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            for u in &cols {
                let p = hermitian_inner(&v, u);
                for (a, b) in v.iter_mut().zip(u) {
                    *a -= p * b;
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                cols.push(v.iter().map(|z| z / norm).collect());
            }
        }
        cols
    }

    fn apply(u: &[Vec<Complex64>], x: &[Complex64]) -> Vec<Complex64> {
        let q = x.len();
        (0..q).map(|i| (0..q).map(|j| u[j][i] * x[j]).sum()).collect()
    }

    #[test]
    fn unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for q in 2..=4 {
            let k: ZonalKernel = random_table(&mut rng, q, 4).into();
            for _ in 0..10 {
                let u = random_unitary(&mut rng, q);
                let pts = random_sphere_points(&mut rng, q, 2);
                let (x, y) = (&pts[..q], &pts[q..]);
                let a = k.eval(x, y).unwrap();
                let b = k.eval(&apply(&u, x), &apply(&u, y)).unwrap();
                assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0), "q={q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn hermitian_symmetry_for_swap_symmetric_real_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in 2..=3 {
            let mut entries = Vec::new();
            for m in 0..=4u32 {
                for n in m..=4u32 {
                    let a = c(rng.random_range(0.0..1.0));
                    entries.push((SpectralIndex::disc(m, n), a));
                    if m != n {
                        entries.push((SpectralIndex::disc(n, m), a));
                    }
                }
            }
            let k: ZonalKernel = CoefficientTable::new(q, 4, entries).unwrap().into();
            let pts = random_sphere_points(&mut rng, q, 2);
            let (x, y) = (&pts[..q], &pts[q..]);
            assert!((k.eval(x, y).unwrap() - k.eval(y, x).unwrap().conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn coefficient_file_round_trip_and_errors() {
        let t = geometric_table(3, 0.3, 3).unwrap();
        let text = t.to_json().unwrap();
        assert!(text.contains("\"N\": 3"));
        assert_eq!(CoefficientTable::from_json(&text).unwrap(), t);
        let p = poisson_table(0.25, 4).unwrap();
        assert_eq!(CoefficientTable::from_json(&p.to_json().unwrap()).unwrap(), p);

        let bad = r#"{"q": 1, "N": 2, "entries": [{"m": 0, "n": 0, "re": 1.0, "im": 0.0}]}"#;
        assert!(CoefficientTable::from_json(bad).is_err());
        let bad = r#"{"q": 2, "N": 2, "entries": [{"m": 0, "re": 1.0, "im": 0.0}]}"#;
        assert!(CoefficientTable::from_json(bad).is_err());
        let bad = r#"{"q": 2, "N": 2, "entries": [{"m": 0, "n": 0, "re": 1.0}]}"#;
        assert!(CoefficientTable::from_json(bad).is_err());
        let ok = r#"{"q": 1, "N": 2, "entries": [{"k": -2, "re": 1.0, "im": 0.5}]}"#;
        assert_eq!(CoefficientTable::from_json(ok).unwrap().get(&SpectralIndex::circle(-2)), Complex64::new(1.0, 0.5));
    }

    proptest! {
        #[test]
        fn difference_with_self_is_empty(seed in 0u64..1000, q in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_table(&mut rng, q, 3);
            prop_assert!(t.difference(&t).unwrap().is_empty());
        }
    }
}
