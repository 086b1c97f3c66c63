//! Normalized Jacobi polynomials and disc (generalized Zernike) polynomials.
//!
//! For `q >= 2` and `z = r e^{iθ}` in the closed unit disc,
//!
//! ```text
//! R_{m,n}^{q-2}(z) = r^{|m-n|} e^{i(m-n)θ} R_{min(m,n)}^{(q-2, |m-n|)}(2r² - 1)
//! ```
//!
//! where `R_k^{(α,β)} = P_k^{(α,β)} / P_k^{(α,β)}(1)`. The prefactor is just
//! `z^{m-n}` when `m >= n` and `conj(z)^{n-m}` otherwise, so no angle is ever
//! computed. [`disc_poly_monomial`] evaluates the same polynomial from its
//! explicit monomial sum and is kept as an accuracy oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sum::ComplexNeumaier;

/// Slack allowed outside the closed unit disc before a point is rejected.
pub const DISC_CLAMP_TOL: f64 = 1e-12;

/// Above this value of `m + n + q` the monomial coefficients are formed in
/// log space instead of exact integer arithmetic.
const EXACT_FACTORIAL_LIMIT: usize = 30;

/// Bi-degree `(m, n)` of a disc polynomial in dimension `q >= 2`.
///
/// The circle (`q = 1`) is indexed by a signed integer instead; see
/// [`crate::spectral::SpectralIndex`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DiscPolyIndex {
    pub q: usize,
    pub m: u32,
    pub n: u32,
}

impl DiscPolyIndex {
    pub fn new(q: usize, m: u32, n: u32) -> Result<Self> {
        if q < 2 {
            return Err(Error::Domain(format!(
                "disc polynomials need q >= 2, got q = {q}"
            )));
        }
        Ok(Self { q, m, n })
    }

    /// `m - n`, the angular frequency.
    pub fn frequency(&self) -> i64 {
        self.m as i64 - self.n as i64
    }

    /// `min(m, n)`, the degree of the Jacobi factor.
    pub fn jacobi_degree(&self) -> usize {
        self.m.min(self.n) as usize
    }
}

/// `P_k^{(α,β)}(1) = binom(k + α, k)` for real `α`.
pub fn jacobi_value_at_one(k: usize, alpha: f64) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (alpha + i as f64) / i as f64)
}

/// Normalized Jacobi polynomial `R_k^{(α,β)}(t)`, equal to one at `t = 1`.
pub fn jacobi_r(k: usize, alpha: f64, beta: f64, t: f64) -> f64 {
    let mut seq = Vec::with_capacity(k + 1);
    jacobi_r_sequence(k, alpha, beta, t, &mut seq);
    seq[k]
}

/// Writes `R_0^{(α,β)}(t), ..., R_kmax^{(α,β)}(t)` into `out`.
///
/// The classical three-term recurrence runs on the unnormalized `P_k`; each
/// value is divided by `P_k(1)` afterwards.
pub fn jacobi_r_sequence(kmax: usize, alpha: f64, beta: f64, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if kmax == 0 {
        return;
    }
    let ab = alpha + beta;
    let mut p_prev = 1.0;
    let mut p = (alpha + 1.0) + 0.5 * (ab + 2.0) * (t - 1.0);
    let mut at_one = alpha + 1.0;
    out.push(p / at_one);
    for k in 2..=kmax {
        let kf = k as f64;
        let c = 2.0 * kf + ab;
        let a1 = 2.0 * kf * (kf + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * t + alpha * alpha - beta * beta);
        let a3 = 2.0 * (kf + alpha - 1.0) * (kf + beta - 1.0) * c;
        let next = (a2 * p - a3 * p_prev) / a1;
        p_prev = p;
        p = next;
        at_one *= (alpha + kf) / kf;
        out.push(p / at_one);
    }
}

/// Maps `z` into the closed unit disc, tolerating rounding just outside it.
pub fn clamp_to_disc(z: Complex64) -> Result<Complex64> {
    let r = z.norm();
    if r <= 1.0 {
        Ok(z)
    } else if r <= 1.0 + DISC_CLAMP_TOL {
        Ok(z / r)
    } else {
        Err(Error::Domain(format!(
            "|z| = {r} lies outside the closed unit disc"
        )))
    }
}

/// `z^{m-n}` for `m >= n`, else `conj(z)^{n-m}`.
#[inline]
pub(crate) fn angular_factor(z: Complex64, frequency: i64) -> Complex64 {
    if frequency >= 0 {
        z.powu(frequency as u32)
    } else {
        z.conj().powu(frequency.unsigned_abs() as u32)
    }
}

/// Disc polynomial `R_{m,n}^{q-2}(z)` via the Jacobi recurrence.
pub fn disc_poly(idx: DiscPolyIndex, z: Complex64) -> Result<Complex64> {
    if idx.q < 2 {
        return Err(Error::Domain(format!("disc_poly needs q >= 2, got {}", idx.q)));
    }
    let z = clamp_to_disc(z)?;
    let d = idx.frequency();
    let alpha = (idx.q - 2) as f64;
    let beta = d.unsigned_abs() as f64;
    let t = 2.0 * z.norm_sqr() - 1.0;
    let radial = jacobi_r(idx.jacobi_degree(), alpha, beta, t);
    Ok(angular_factor(z, d) * radial)
}

/// All `R_{m,n}^{q-2}(z)` with `m, n <= degree`, row-major in `m`.
///
/// Runs one Jacobi recurrence per angular frequency `m - n`.
pub fn disc_poly_grid(q: usize, degree: usize, z: Complex64) -> Result<Vec<Complex64>> {
    if q < 2 {
        return Err(Error::Domain(format!("disc_poly_grid needs q >= 2, got {q}")));
    }
    let z = clamp_to_disc(z)?;
    let width = degree + 1;
    let alpha = (q - 2) as f64;
    let t = 2.0 * z.norm_sqr() - 1.0;
    let mut out = vec![Complex64::new(0.0, 0.0); width * width];
    let mut seq = Vec::with_capacity(width);
    for d in -(degree as i64)..=(degree as i64) {
        let kmax = degree - d.unsigned_abs() as usize;
        jacobi_r_sequence(kmax, alpha, d.unsigned_abs() as f64, t, &mut seq);
        let phase = angular_factor(z, d);
        for (k, &r) in seq.iter().enumerate() {
            let (m, n) = if d >= 0 {
                (k + d as usize, k)
            } else {
                (k, k + d.unsigned_abs() as usize)
            };
            out[m * width + n] = phase * r;
        }
    }
    Ok(out)
}

/// Disc polynomial from the explicit monomial sum
///
/// ```text
/// m! n! (q-2)! / ((m+q-2)! (n+q-2)!) · Σ_j (-1)^j (m+n+q-2-j)! / (j! (m-j)! (n-j)!) z^{m-j} conj(z)^{n-j}
/// ```
///
/// While `m + n + q <= 30` the integer coefficients are exact and the sum,
/// a polynomial in `|z|²`, is evaluated in double-double arithmetic, so the
/// alternating cancellation costs nothing. Beyond that the coefficients come
/// from log-factorials and the sum cancels badly for large `m, n`.
pub fn disc_poly_monomial(idx: DiscPolyIndex, z: Complex64) -> Result<Complex64> {
    if idx.q < 2 {
        return Err(Error::Domain(format!(
            "disc_poly_monomial needs q >= 2, got {}",
            idx.q
        )));
    }
    let z = clamp_to_disc(z)?;
    let (m, n, q) = (idx.m as usize, idx.n as usize, idx.q);
    if m + n + q <= EXACT_FACTORIAL_LIMIT {
        return Ok(monomial_exact(m, n, q, z));
    }
    let coeffs = monomial_coeffs_log(m, n, q)?;
    let zc = z.conj();
    let mut acc = ComplexNeumaier::new();
    for (j, c) in coeffs.into_iter().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mono = z.powu((m - j) as u32) * zc.powu((n - j) as u32);
        acc.add(mono * (sign * c));
    }
    Ok(acc.value())
}

fn factorial_u128(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// `z^{m-j} conj(z)^{n-j} = angular · x^{min(m,n)-j}` with `x = |z|²`; the
/// real polynomial in `x` has integer coefficients and is summed by Horner
/// in double-double.
fn monomial_exact(m: usize, n: usize, q: usize, z: Complex64) -> Complex64 {
    // (m+q-2)! (n+q-2)! / (m! n! (q-2)!) as an integer
    let rising_m: u128 = ((m + 1)..=(m + q - 2)).map(|i| i as u128).product();
    let binom_n = factorial_u128(n + q - 2) / (factorial_u128(n) * factorial_u128(q - 2));
    let denom = rising_m * binom_n;
    let low = m.min(n);
    let x = z.norm_sqr();
    let mut acc = Dd::ZERO;
    for k in (0..=low).rev() {
        let j = low - k;
        let num = factorial_u128(m + n + q - 2 - j)
            / (factorial_u128(j) * factorial_u128(m - j) * factorial_u128(n - j));
        let c = Dd::from_u128(num);
        acc = acc.mul_f64(x).add(if j % 2 == 0 { c } else { c.neg() });
    }
    let radial = acc.div_u128(denom);
    angular_factor(z, m as i64 - n as i64) * radial
}

/// Unevaluated sum `hi + lo` of two doubles.
#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn from_u128(v: u128) -> Dd {
        let hi = v as f64;
        let lo = (v as i128 - hi as i128) as f64;
        Dd::quick(hi, lo)
    }

    fn quick(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = Self::two_sum(self.hi, o.hi);
        Dd::quick(s, e + self.lo + o.lo)
    }

    fn mul_f64(self, x: f64) -> Dd {
        let p = self.hi * x;
        let e = self.hi.mul_add(x, -p) + self.lo * x;
        Dd::quick(p, e)
    }

    fn div_u128(self, d: u128) -> f64 {
        let dd = Dd::from_u128(d);
        let q1 = self.hi / dd.hi;
        // one correction step: r = self - q1·d
        let p = dd.hi * q1;
        let pe = dd.hi.mul_add(q1, -p) + dd.lo * q1;
        let r = (self.hi - p) - pe + self.lo;
        q1 + r / dd.hi
    }
}

/// `num / den` correctly rounded for the magnitudes seen here.
fn ratio_to_f64(num: u128, den: u128) -> f64 {
    let g = gcd(num, den);
    (num / g) as f64 / (den / g) as f64
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

fn monomial_coeffs_log(m: usize, n: usize, q: usize) -> Result<Vec<f64>> {
    let prefactor = ln_factorial(m) + ln_factorial(n) + ln_factorial(q - 2)
        - ln_factorial(m + q - 2)
        - ln_factorial(n + q - 2);
    (0..=m.min(n))
        .map(|j| {
            let ln_c = prefactor + ln_factorial(m + n + q - 2 - j)
                - ln_factorial(j)
                - ln_factorial(m - j)
                - ln_factorial(n - j);
            if ln_c > f64::MAX.ln() {
                Err(Error::Overflow(format!(
                    "monomial coefficient j = {j} of R_{{{m},{n}}} (q = {q})"
                )))
            } else {
                Ok(ln_c.exp())
            }
        })
        .collect()
}

/// Normalization constant
/// `h_{m,n}^{q-2} = (m+n+q-1)/(q-1) · binom(m+q-2, q-2) · binom(n+q-2, q-2)`,
/// the reciprocal of `∫ |R_{m,n}^{q-2}|² dν_{q-2}`.
///
/// Evaluated in integer arithmetic; `h` is the dimension of the space of
/// bi-degree `(m, n)` spherical harmonics and therefore an integer.
pub fn norm_const(idx: DiscPolyIndex) -> f64 {
    let (m, n, q) = (idx.m as u128, idx.n as u128, idx.q as u128);
    let num = (m + n + q - 1) * binom_u128(m + q - 2, q - 2) * binom_u128(n + q - 2, q - 2);
    ratio_to_f64(num, q - 1)
}

fn binom_u128(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}
