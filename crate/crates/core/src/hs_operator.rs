//! Nyström discretization of zonal integral operators and their Mercer
//! square roots.
//!
//! With rule nodes `x_i` and normalized weights `w_i`, the symmetrized matrix
//! `M_ij = √w_i K(x_i, x_j) √w_j` is Hermitian and its eigenvalues
//! approximate those of `f ↦ ∫ K(·, y) f(y) dμ(y)`. Replacing each
//! eigenvalue by its square root and undoing the weight scaling samples the
//! kernel of the operator square root, which must match the convolution
//! root of the coefficient table.
//!
//! Small matrices go through a cyclic Jacobi eigensolver. Large operators of
//! kernels with nonnegative expansions are factored by pivoted Cholesky on
//! entries computed on demand, so no dense matrix is ever stored for them.

use std::io::Write;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::convolution::{check_sphere_rule, max_hermitian_defect};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::spectral::{CoefficientTable, ZonalKernel};
use crate::sum::sum_complex;

/// Largest operator assembled as a dense matrix.
pub const DENSE_CAP: usize = 4096;
/// Operators up to this size always use the dense Jacobi solver.
pub const JACOBI_DIRECT_MAX: usize = 256;
/// Largest rank accepted by the pivoted Cholesky route.
pub const LOW_RANK_CAP: usize = 2048;
/// Asymmetry tolerated in a matrix handed to the eigensolver.
pub const EIG_HERMITIAN_TOL: f64 = 1e-9;
/// Relative diagonal threshold at which pivoted Cholesky stops.
pub const CHOLESKY_TOL: f64 = 1e-13;

const MAX_SWEEPS: usize = 64;
const PHASE_TOL: f64 = 1e-10;

/// Square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn<F: Fn(usize, usize) -> Complex64>(n: usize, f: F) -> Self {
        let data = (0..n * n).map(|ij| f(ij / n, ij % n)).collect();
        CMatrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(r.len(), n));
        }
        Ok(CMatrix { n, data: rows.concat() })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn max_hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces `A` by `(A + A^H) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            self[(i, i)].im = 0.0;
            for j in i + 1..self.n {
                let avg = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let n = self.n;
        let data = (0..n * n)
            .into_par_iter()
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                sum_complex((0..n).map(|k| self.data[i * n + k] * other.data[k * n + j]))
            })
            .collect();
        Ok(CMatrix { n, data })
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n).map(|i| sum_complex((0..self.n).map(|j| self[(i, j)] * v[j]))).collect()
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenpairs sorted by descending eigenvalue.
///
/// Each eigenvector has its first non-negligible component real and
/// positive. A system from the low-rank route holds only the numerically
/// nonzero eigenvalues; `dim` is always the matrix size.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
}

impl EigenSystem {
    fn sorted(dim: usize, pairs: Vec<(f64, Vec<Complex64>)>) -> Self {
        let mut pairs = pairs;
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (eigenvalues, mut eigenvectors): (Vec<f64>, Vec<_>) = pairs.into_iter().unzip();
        eigenvectors.iter_mut().for_each(|v| normalize_phase(v));
        EigenSystem { dim, eigenvalues, eigenvectors }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max_n ‖M v_n - λ_n v_n‖`.
    pub fn max_residual(&self, m: &CMatrix) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(&l, v)| {
                let mv = m.mul_vec(v);
                mv.iter().zip(v).map(|(a, b)| (a - b * l).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |⟨v_a, v_b⟩ - δ_ab|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, va) in self.eigenvectors.iter().enumerate() {
            for (b, vb) in self.eigenvectors.iter().enumerate().skip(a) {
                let ip: Complex64 = va.iter().zip(vb).map(|(x, y)| x.conj() * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }

    /// Writes `index,eigenvalue` rows, index starting at 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_eigenvalues_csv(&self.eigenvalues, writer)
    }
}

pub fn write_eigenvalues_csv<W: Write>(eigenvalues: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "eigenvalue"])?;
    for (i, l) in eigenvalues.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{l:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn normalize_phase(v: &mut [Complex64]) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(&lead) = v.iter().find(|z| z.norm() > PHASE_TOL * scale) {
        let phase = lead.conj() / lead.norm();
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Full eigensystem of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
pub fn hermitian_eig(m: &CMatrix) -> Result<EigenSystem> {
    let n = m.dim();
    let defect = m.max_hermitian_defect();
    if defect > EIG_HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let mut a = m.clone();
    a.symmetrize();
    let mut v = CMatrix::identity(n);
    let target = f64::EPSILON * a.frobenius();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if a.off_diagonal_norm() <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && a.off_diagonal_norm() > target {
        return Err(Error::EigenConvergence { sweeps: MAX_SWEEPS, off_norm: a.off_diagonal_norm() });
    }

    let pairs = (0..n).map(|k| (a[(k, k)].re, (0..n).map(|i| v[(i, k)]).collect())).collect();
    Ok(EigenSystem::sorted(n, pairs))
}

/// One Jacobi rotation `A ← J^H A J`, `V ← V J` zeroing `A_pq`, where
/// `J = diag(1, e^{-iφ}) · R(θ)` on rows and columns `p, q`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let abs = apq.norm();
    if abs <= f64::MIN_POSITIVE {
        return;
    }
    let e = (apq / abs).conj();
    let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * abs);
    let t = if tau.abs() > 1e150 {
        0.5 / tau
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let (jpp, jpq, jqp, jqq) = (Complex64::new(c, 0.0), Complex64::new(s, 0.0), e * -s, e * c);

    let n = a.dim();
    for k in 0..n {
        let (x, y) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = x * jpp + y * jqp;
        a[(k, q)] = x * jpq + y * jqq;
        let (x, y) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = x * jpp + y * jqp;
        v[(k, q)] = x * jpq + y * jqq;
    }
    for k in 0..n {
        let (x, y) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = jpp.conj() * x + jqp.conj() * y;
        a[(q, k)] = jpq.conj() * x + jqq.conj() * y;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;
}

/// Symmetrized Nyström surrogate of the integral operator of a zonal kernel.
///
/// Matrix entries are computed on demand; [`NystromOperator::matrix`]
/// assembles the dense matrix for operators up to [`DENSE_CAP`] nodes.
#[derive(Clone, Debug)]
pub struct NystromOperator {
    kernel: ZonalKernel,
    q: usize,
    points: Vec<Complex64>,
    weights: Vec<f64>,
    sqrt_w: Vec<f64>,
}

/// Builds the Nyström operator of `kernel` on a circle or sphere rule.
///
/// Hermitian symmetry of the kernel is checked on (up to 64) rule nodes.
pub fn discretize_operator(kernel: &ZonalKernel, rule: &QuadratureRule) -> Result<NystromOperator> {
    let q = kernel.q();
    check_sphere_rule(rule, q)?;
    let defect = max_hermitian_defect(kernel, rule, 64)?;
    if defect > EIG_HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let points: Vec<Complex64> = rule.nodes().flatten().copied().collect();
    let weights = rule.weights().to_vec();
    let sqrt_w = weights.iter().map(|w| w.sqrt()).collect();
    Ok(NystromOperator { kernel: kernel.clone(), q, points, weights, sqrt_w })
}

impl NystromOperator {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn kernel(&self) -> &ZonalKernel {
        &self.kernel
    }

    pub fn point(&self, i: usize) -> &[Complex64] {
        &self.points[i * self.q..(i + 1) * self.q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `M_ij = √w_i K(x_i, x_j) √w_j`.
    pub fn entry(&self, i: usize, j: usize) -> Result<Complex64> {
        Ok(self.kernel.eval(self.point(i), self.point(j))? * (self.sqrt_w[i] * self.sqrt_w[j]))
    }

    /// The dense symmetrized matrix, rows assembled in parallel.
    pub fn matrix(&self) -> Result<CMatrix> {
        let n = self.len();
        if n > DENSE_CAP {
            return Err(Error::Domain(format!("{n} nodes exceed the dense limit of {DENSE_CAP}")));
        }
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.entry(i, j)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut m = CMatrix::from_rows(&rows)?;
        m.symmetrize();
        Ok(m)
    }

    /// Nonnegative expansion coefficients make the operator positive
    /// semidefinite, which admits the low-rank factorization.
    fn known_psd(&self) -> bool {
        match &self.kernel {
            ZonalKernel::Poisson { .. } => true,
            ZonalKernel::Expansion(t) => t.is_pd_candidate(),
            ZonalKernel::Function { .. } => false,
        }
    }

    /// Eigensystem of the operator matrix: dense Jacobi for small operators
    /// or kernels of unknown sign, pivoted Cholesky otherwise.
    pub fn eigensystem(&self) -> Result<EigenSystem> {
        let n = self.len();
        if n <= JACOBI_DIRECT_MAX || (!self.known_psd() && n <= DENSE_CAP) {
            return hermitian_eig(&self.matrix()?);
        }
        if !self.known_psd() {
            return Err(Error::Domain(format!(
                "{n} nodes exceed the dense limit and the kernel is not known to be positive semidefinite"
            )));
        }
        self.low_rank_eig()
    }

    /// `M ≈ L L^H` by diagonally pivoted Cholesky, then the eigenpairs of
    /// `L^H L = V Λ V^H` give `U = L V Λ^{-1/2}`.
    fn low_rank_eig(&self) -> Result<EigenSystem> {
        let n = self.len();
        let mut diag: Vec<f64> = (0..n).map(|i| self.entry(i, i).map(|z| z.re)).collect::<Result<_>>()?;
        let dmax = diag.iter().copied().fold(0.0, f64::max);
        if dmax <= 0.0 {
            return Ok(EigenSystem { dim: n, eigenvalues: Vec::new(), eigenvectors: Vec::new() });
        }
        let mut cols: Vec<Vec<Complex64>> = Vec::new();
        loop {
            let (p, dp) = diag.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, d)| if d > b.1 { (i, d) } else { b });
            if dp <= CHOLESKY_TOL * dmax {
                break;
            }
            if cols.len() >= LOW_RANK_CAP.min(n) {
                return Err(Error::Domain(format!("numerical rank exceeds {}", LOW_RANK_CAP.min(n))));
            }
            let scale = dp.sqrt();
            let col: Vec<Complex64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let proj = sum_complex(cols.iter().map(|c| c[i] * c[p].conj()));
                    Ok((self.entry(i, p)? - proj) / scale)
                })
                .collect::<Result<_>>()?;
            for (d, l) in diag.iter_mut().zip(&col) {
                *d -= l.norm_sqr();
            }
            diag[p] = 0.0;
            let low = diag.iter().copied().fold(f64::INFINITY, f64::min);
            if low < -1e-8 * dmax {
                return Err(Error::NotPositiveSemidefinite(low));
            }
            cols.push(col);
        }

        let r = cols.len();
        let gram = CMatrix::from_fn(r, |a, b| sum_complex(cols[a].iter().zip(&cols[b]).map(|(x, y)| x.conj() * y)));
        let small = hermitian_eig(&gram)?;
        let pairs = small
            .eigenvalues
            .iter()
            .zip(&small.eigenvectors)
            .filter(|(l, _)| **l > CHOLESKY_TOL * dmax)
            .map(|(&l, vk)| {
                let inv = 1.0 / l.sqrt();
                let u = (0..n).map(|i| sum_complex((0..r).map(|a| cols[a][i] * vk[a])) * inv).collect();
                (l, u)
            })
            .collect();
        Ok(EigenSystem::sorted(n, pairs))
    }
}

/// Samples `S(x_i, x_j) = Σ √λ_n u_n(i) conj(u_n(j)) / √(w_i w_j)` of the
/// operator square-root kernel, evaluated on demand.
#[derive(Clone, Debug)]
pub struct SqrtKernel {
    q: usize,
    points: Vec<Complex64>,
    sqrt_w: Vec<f64>,
    /// `λ_n^{1/4} u_n / √w`, so that `S_ij = Σ f_n(i) conj(f_n(j))`.
    factors: Vec<Vec<Complex64>>,
}

/// Mercer square root of the discretized operator.
///
/// Eigenvalues in `[-clamp_tol, clamp_tol]` are discretization noise around
/// zero and are dropped; anything below `-clamp_tol` is an error.
/// `clamp_tol` defaults to `1e-10 · λ_max`.
pub fn operator_sqrt_kernel(eig: &EigenSystem, op: &NystromOperator, clamp_tol: Option<f64>) -> Result<SqrtKernel> {
    if eig.dim != op.len() {
        return Err(Error::DimensionMismatch(eig.dim, op.len()));
    }
    let lmax = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let tol = clamp_tol.unwrap_or(1e-10 * lmax);
    let mut factors = Vec::new();
    for (n, (&l, u)) in eig.eigenvalues.iter().zip(&eig.eigenvectors).enumerate() {
        if l < -tol {
            return Err(Error::NegativeEigenvalue { index: n, value: l });
        }
        if l > tol {
            let s = l.sqrt().sqrt();
            factors.push(u.iter().zip(&op.sqrt_w).map(|(z, w)| z * (s / w)).collect());
        }
    }
    Ok(SqrtKernel { q: op.q, points: op.points.clone(), sqrt_w: op.sqrt_w.clone(), factors })
}

impl SqrtKernel {
    pub fn len(&self) -> usize {
        self.sqrt_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_w.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn point(&self, i: usize) -> &[Complex64] {
        &self.points[i * self.q..(i + 1) * self.q]
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        sum_complex(self.factors.iter().map(|f| f[i] * f[j].conj()))
    }

    /// `Ŝ_ij = √w_i S_ij √w_j`, the matrix square root of the Nyström matrix.
    pub fn symmetrized(&self) -> Result<CMatrix> {
        let n = self.len();
        if n > DENSE_CAP {
            return Err(Error::Domain(format!("{n} nodes exceed the dense limit of {DENSE_CAP}")));
        }
        Ok(CMatrix::from_fn(n, |i, j| self.value(i, j) * (self.sqrt_w[i] * self.sqrt_w[j])))
    }
}

/// Rows compared exhaustively by [`compare_roots`]; larger operators are
/// compared on a strided subset of this many rows against every column.
pub const COMPARE_ROWS: usize = 256;

/// `max |S_ij - P'(x_i · x_j)|` over sample pairs.
pub fn compare_roots(s: &SqrtKernel, p: &CoefficientTable) -> Result<f64> {
    if s.q() != p.q() {
        return Err(Error::DimensionMismatch(s.q(), p.q()));
    }
    let n = s.len();
    let kernel: ZonalKernel = p.clone().into();
    let stride = n.div_ceil(COMPARE_ROWS).max(1);
    let rows: Vec<usize> = (0..n).step_by(stride).collect();
    let worst = rows
        .par_iter()
        .map(|&i| {
            let mut w: f64 = 0.0;
            for j in 0..n {
                let expect = kernel.eval(s.point(i), s.point(j))?;
                w = w.max((s.value(i, j) - expect).norm());
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Operator eigenvalues predicted by a table: `a / h` with multiplicity `h`
/// (on the circle `a_k` once each), real parts, sorted descending, zeros
/// omitted.
pub fn expected_spectrum(table: &CoefficientTable) -> Vec<f64> {
    let mut out = Vec::new();
    for (idx, a) in table.iter() {
        let h = table.norm_const(idx);
        let mult = h.round() as usize;
        out.extend(std::iter::repeat_n(a.re / h, mult));
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}
