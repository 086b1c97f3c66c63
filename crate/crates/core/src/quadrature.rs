//! Quadrature rules for the disc measure `ν_{q-2}`, the circle, the unit
//! sphere of `C^2`, and Monte Carlo samples on the unit sphere of `C^q`.
//!
//! Every rule is normalized: weights sum to one, so disc rules integrate
//! against the probability measure
//! `dν_{q-2}(z) = (q-1)/π (1-|z|²)^{q-2} dx dy` and sphere or circle rules
//! compute averages `(1/ω_q) ∫ f dσ_q`.
//!
//! To resolve all products `R_{m,n} conj(R_{k,l})` with `m, n, k, l <= N`,
//! use `nrad = N + 1` radial and `nang = 2N + 2` angular nodes.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::special_fn::{angular_factor, disc_poly_grid, norm_const, DiscPolyIndex};
use crate::sum::{sum_complex, sum_real};

const NEWTON_MAX_ITER: usize = 100;

/// Nodes and weights on `[-1, 1]` for the weight `(1 - t)^α`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        sum_real(self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)))
    }
}

/// `(P_n^{(α,β)}(t), P_{n-1}^{(α,β)}(t))` for `n >= 1`.
fn jacobi_p_pair(n: usize, alpha: f64, beta: f64, t: f64) -> (f64, f64) {
    let ab = alpha + beta;
    let mut p_prev = 1.0;
    let mut p = (alpha + 1.0) + 0.5 * (ab + 2.0) * (t - 1.0);
    for k in 2..=n {
        let kf = k as f64;
        let c = 2.0 * kf + ab;
        let a1 = 2.0 * kf * (kf + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (c * (c - 2.0) * t + alpha * alpha - beta * beta);
        let a3 = 2.0 * (kf + alpha - 1.0) * (kf + beta - 1.0) * c;
        let next = (a2 * p - a3 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// `(P_n, P_n')` for the weight `(1 - t)^α` (β = 0).
fn jacobi_with_derivative(n: usize, alpha: f64, t: f64) -> (f64, f64) {
    let (p, p_prev) = jacobi_p_pair(n, alpha, 0.0, t);
    let nf = n as f64;
    let c = 2.0 * nf + alpha;
    let dp = (nf * (alpha - c * t) * p + 2.0 * (nf + alpha) * nf * p_prev) / (c * (1.0 - t * t));
    (p, dp)
}

/// Gauss–Jacobi rule with `npts` nodes for the weight `(1 - t)^α` on `[-1, 1]`.
///
/// Nodes are the zeros of `P_npts^{(α,0)}`, located by Newton iteration from
/// Chebyshev initial guesses with deflation against the zeros already found.
/// Exact for polynomials of degree `<= 2·npts - 1`.
pub fn gauss_jacobi_rule(npts: usize, alpha: f64) -> Result<GaussRule> {
    if npts == 0 {
        return Err(Error::Domain("gauss_jacobi_rule needs npts >= 1".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let n = npts;
    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = (PI * (2 * i + 1) as f64 / (2 * n) as f64).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = jacobi_with_derivative(n, alpha, t);
            let deflate: f64 = nodes.iter().map(|&r| 1.0 / (t - r)).sum();
            let step = p / (dp - p * deflate);
            t -= step;
            t = t.clamp(-1.0 + f64::EPSILON, 1.0 - f64::EPSILON);
            if step.abs() <= 4.0 * f64::EPSILON * t.abs().max(1e-3) {
                converged = true;
                break;
            }
        }
        if !converged || !t.is_finite() {
            return Err(Error::NodeConvergence { node: i, npts: n });
        }
        nodes.push(t);
    }
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let scale = 2f64.powf(alpha + 1.0);
    let weights = nodes
        .iter()
        .map(|&t| {
            let (_, dp) = jacobi_with_derivative(n, alpha, t);
            scale / ((1.0 - t * t) * dp * dp)
        })
        .collect();
    Ok(GaussRule { nodes, weights })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    /// Product rule for `ν_{q-2}` on the closed unit disc.
    Disc,
    /// Equispaced points on the unit circle (the sphere of `C^1`).
    Circle,
    /// Product rule on the unit sphere of `C^2`.
    Sphere3,
    /// Seeded uniform samples on the unit sphere of `C^q`.
    SphereMc,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleKind::Disc => "disc",
            RuleKind::Circle => "circle",
            RuleKind::Sphere3 => "sphere3",
            RuleKind::SphereMc => "sphere_mc",
        };
        f.write_str(s)
    }
}

/// An immutable, normalized node/weight list.
///
/// Disc rules store one complex coordinate per node. Circle, sphere and
/// Monte Carlo rules store points of the unit sphere of `C^q` (`q`
/// coordinates per node; the circle is the case `q = 1`).
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    kind: RuleKind,
    q: usize,
    dim: usize,
    coords: Vec<Complex64>,
    weights: Vec<f64>,
    radial_nodes: usize,
    angular_nodes: usize,
}

impl QuadratureRule {
    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Coordinates per node: 1 for disc rules, `q` otherwise.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node(&self, i: usize) -> &[Complex64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[Complex64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Radial (disc) or `u` (sphere3) node count; 0 for other kinds.
    pub fn radial_nodes(&self) -> usize {
        self.radial_nodes
    }

    /// Angular node count per angle; 0 for Monte Carlo rules.
    pub fn angular_nodes(&self) -> usize {
        self.angular_nodes
    }

    /// Largest `N` such that all products of disc polynomials (or circle
    /// exponentials) of degree `<= N` are integrated exactly.
    pub fn resolved_degree(&self) -> Option<usize> {
        match self.kind {
            RuleKind::Disc => Some((self.radial_nodes - 1).min((self.angular_nodes - 1) / 2)),
            RuleKind::Circle => Some((self.angular_nodes - 1) / 2),
            RuleKind::Sphere3 | RuleKind::SphereMc => None,
        }
    }

    /// `Σ w_i f(node_i)`, evaluated in parallel and reduced in node order.
    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(&[Complex64]) -> Complex64 + Sync,
    {
        let vals: Vec<Complex64> = (0..self.len())
            .into_par_iter()
            .map(|i| f(self.node(i)) * self.weights[i])
            .collect();
        sum_complex(vals)
    }

    /// Fallible variant of [`QuadratureRule::integrate`].
    pub fn try_integrate<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(&[Complex64]) -> Result<Complex64> + Sync,
    {
        let vals: Vec<Complex64> = (0..self.len())
            .into_par_iter()
            .map(|i| f(self.node(i)).map(|v| v * self.weights[i]))
            .collect::<Result<_>>()?;
        Ok(sum_complex(vals))
    }

    /// Writes the rule as CSV: coordinates (real and imaginary part of each)
    /// followed by the weight.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = Vec::with_capacity(2 * self.dim + 1);
        if self.dim == 1 {
            header.extend(["re_z".to_string(), "im_z".to_string()]);
        } else {
            for j in 1..=self.dim {
                header.push(format!("re_z{j}"));
                header.push(format!("im_z{j}"));
            }
        }
        header.push("weight".into());
        out.write_record(&header)?;
        for (node, w) in self.nodes().zip(&self.weights) {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            for z in node {
                row.push(format!("{:.17e}", z.re));
                row.push(format!("{:.17e}", z.im));
            }
            row.push(format!("{:.17e}", w));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Product rule for `ν_{q-2}`: Gauss–Jacobi in `t = 2r² - 1` with weight
/// `(1 - t)^{q-2}`, times `nang` equispaced angles.
pub fn disc_rule(q: usize, nrad: usize, nang: usize) -> Result<QuadratureRule> {
    if q < 2 {
        return Err(Error::Domain(format!("disc_rule needs q >= 2, got {q}")));
    }
    if nrad == 0 || nang == 0 {
        return Err(Error::Domain("disc_rule needs nrad >= 1 and nang >= 1".into()));
    }
    let radial = gauss_jacobi_rule(nrad, (q - 2) as f64)?;
    // ∫ (1-t)^{q-2} dt = 2^{q-1}/(q-1), so this factor makes the weights sum to one
    let scale = (q - 1) as f64 / 2f64.powi(q as i32 - 1) / nang as f64;
    let mut coords = Vec::with_capacity(nrad * nang);
    let mut weights = Vec::with_capacity(nrad * nang);
    for (&t, &w) in radial.nodes.iter().zip(&radial.weights) {
        let r = ((t + 1.0) / 2.0).sqrt();
        for j in 0..nang {
            coords.push(Complex64::from_polar(r, TAU * j as f64 / nang as f64));
            weights.push(w * scale);
        }
    }
    Ok(QuadratureRule {
        kind: RuleKind::Disc,
        q,
        dim: 1,
        coords,
        weights,
        radial_nodes: nrad,
        angular_nodes: nang,
    })
}

/// `nang` equispaced points `e^{2πij/nang}` with weights `1/nang`.
///
/// Exact for `z^k` with `|k| < nang`; `z^{nang}` aliases to 1.
pub fn circle_rule(nang: usize) -> Result<QuadratureRule> {
    if nang == 0 {
        return Err(Error::Domain("circle_rule needs nang >= 1".into()));
    }
    let coords = (0..nang)
        .map(|j| Complex64::from_polar(1.0, TAU * j as f64 / nang as f64))
        .collect();
    Ok(QuadratureRule {
        kind: RuleKind::Circle,
        q: 1,
        dim: 1,
        coords,
        weights: vec![1.0 / nang as f64; nang],
        radial_nodes: 0,
        angular_nodes: nang,
    })
}

/// Product rule on the unit sphere of `C^2` in the coordinates
/// `z1 = √u e^{iφ1}`, `z2 = √(1-u) e^{iφ2}`, under which the normalized
/// surface measure is `du dφ1 dφ2 / (2π)²` on `[0,1] × [0,2π)²`.
pub fn sphere3_rule(nu: usize, nang: usize) -> Result<QuadratureRule> {
    if nu == 0 || nang == 0 {
        return Err(Error::Domain("sphere3_rule needs nu >= 1 and nang >= 1".into()));
    }
    let legendre = gauss_jacobi_rule(nu, 0.0)?;
    let phases: Vec<Complex64> = (0..nang)
        .map(|j| Complex64::from_polar(1.0, TAU * j as f64 / nang as f64))
        .collect();
    let ang_w = 1.0 / (nang * nang) as f64;
    let len = nu * nang * nang;
    let mut coords = Vec::with_capacity(2 * len);
    let mut weights = Vec::with_capacity(len);
    for (&t, &w) in legendre.nodes.iter().zip(&legendre.weights) {
        let u = (t + 1.0) / 2.0;
        let (a, b) = (u.sqrt(), (1.0 - u).sqrt());
        for p1 in &phases {
            for p2 in &phases {
                coords.push(p1 * a);
                coords.push(p2 * b);
                weights.push(0.5 * w * ang_w);
            }
        }
    }
    Ok(QuadratureRule {
        kind: RuleKind::Sphere3,
        q: 2,
        dim: 2,
        coords,
        weights,
        radial_nodes: nu,
        angular_nodes: nang,
    })
}

/// `npts` uniform points on the unit sphere of `C^q`, drawn as normalized
/// standard complex Gaussian vectors from a ChaCha8 stream seeded with
/// `seed`. Weights are `1/npts`.
pub fn sphere_mc_sample(q: usize, npts: usize, seed: u64) -> Result<QuadratureRule> {
    if q == 0 || npts == 0 {
        return Err(Error::Domain("sphere_mc_sample needs q >= 1 and npts >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = random_sphere_points(&mut rng, q, npts);
    Ok(QuadratureRule {
        kind: RuleKind::SphereMc,
        q,
        dim: q,
        coords,
        weights: vec![1.0 / npts as f64; npts],
        radial_nodes: 0,
        angular_nodes: 0,
    })
}

/// Flat list of `count` uniform points on the unit sphere of `C^q`.
pub fn random_sphere_points(rng: &mut ChaCha8Rng, q: usize, count: usize) -> Vec<Complex64> {
    let mut coords = Vec::with_capacity(q * count);
    let mut buf = vec![Complex64::new(0.0, 0.0); q];
    for _ in 0..count {
        loop {
            for z in buf.iter_mut() {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                *z = Complex64::new(re, im);
            }
            let norm = buf.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-300 {
                coords.extend(buf.iter().map(|z| z / norm));
                break;
            }
        }
    }
    coords
}

/// Largest deviation of the rule's Gram matrix of basis functions up to
/// `degree` from the exact one.
///
/// On a disc rule this is `|∫ R_{m,n} conj(R_{k,l}) dν - δ_{mk} δ_{nl} / h_{m,n}|`
/// over all `m, n, k, l <= degree`; on a circle rule the basis is `z^k`,
/// `|k| <= degree`, with Gram matrix the identity.
pub fn orthogonality_defect(rule: &QuadratureRule, degree: usize) -> Result<f64> {
    let (basis, norms): (Vec<Vec<Complex64>>, Vec<f64>) = match rule.kind() {
        RuleKind::Disc => {
            let q = rule.q();
            let grids = rule.nodes().map(|z| disc_poly_grid(q, degree, z[0])).collect::<Result<_>>()?;
            let w = degree + 1;
            let norms = (0..w * w)
                .map(|a| norm_const(DiscPolyIndex { q, m: (a / w) as u32, n: (a % w) as u32 }))
                .collect();
            (grids, norms)
        }
        RuleKind::Circle => {
            let d = degree as i64;
            let grids = rule.nodes().map(|z| (-d..=d).map(|k| angular_factor(z[0], k)).collect()).collect();
            (grids, vec![1.0; 2 * degree + 1])
        }
        other => {
            return Err(Error::RuleKind { found: other.to_string(), expected: "disc or circle".into() });
        }
    };
    let size = norms.len();
    let worst = (0..size)
        .into_par_iter()
        .map(|a| {
            let mut w: f64 = 0.0;
            for b in 0..size {
                let g = sum_complex(basis.iter().zip(rule.weights()).map(|(v, &wt)| v[a] * v[b].conj() * wt));
                let expect = if a == b { 1.0 / norms[a] } else { 0.0 };
                w = w.max((g - expect).norm());
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Surface area `ω_q = 2π^q / (q-1)!` of the unit sphere of `C^q`.
pub fn surface_area(q: usize) -> f64 {
    assert!(q >= 1, "surface_area needs q >= 1");
    let fact: f64 = (1..q).map(|i| i as f64).product();
    2.0 * PI.powi(q as i32) / fact
}
