//! Acceptance checks, one test per criterion. Each prints a single
//! `criterion N ... PASS|FAIL` line with the measured value, its limit and
//! the wall time (run with `--nocapture` to see them), then asserts.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zonal_core::convolution::{convolve_direct, convolve_spectral, funk_hecke_sides, TestHarmonic};
use zonal_core::hs_operator::{compare_roots, discretize_operator, expected_spectrum, operator_sqrt_kernel};
use zonal_core::quadrature::{circle_rule, disc_rule, orthogonality_defect, random_sphere_points, sphere3_rule, sphere_mc_sample};
use zonal_core::root::{continuity_report, convolution_root, direct_residual, pd_gram_check, verify_root, ROOT_TOL};
use zonal_core::special_fn::{disc_poly, disc_poly_monomial, DiscPolyIndex};
use zonal_core::spectral::{geometric_table, poisson_table};
use zonal_core::{CoefficientTable, QuadratureRule, SpectralIndex, ZonalKernel};

fn report(n: u32, name: &str, passed: bool, detail: String, elapsed: Duration, budget: Option<Duration>) {
    let within = budget.is_none_or(|b| elapsed <= b);
    let verdict = if passed && within { "PASS" } else { "FAIL" };
    let budget = budget.map(|b| format!(" (budget {:.0} s)", b.as_secs_f64())).unwrap_or_default();
    println!("criterion {n} {name}: {verdict} {detail}; time {:.2} s{budget}", elapsed.as_secs_f64());
    assert!(passed, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded its time budget");
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn single(q: usize, idx: SpectralIndex, a: f64) -> CoefficientTable {
    CoefficientTable::new(q, idx.max_degree(), [(idx, c(a))]).unwrap()
}

#[test]
fn criterion_1_orthogonality() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for q in 2..=4 {
        worst = worst.max(orthogonality_defect(&disc_rule(q, 9, 18).unwrap(), 8).unwrap());
    }
    report(1, "orthogonality", worst <= 1e-10, format!("max error {worst:.3e} <= 1e-10"), t.elapsed(), Some(Duration::from_secs(30)));
}

#[test]
fn criterion_2_disc_polynomial_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut diff, mut bound): (f64, f64) = (0.0, 0.0);
    for q in 2..=5 {
        let pts: Vec<Complex64> = (0..200)
            .map(|_| Complex64::from_polar(rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        for m in 0..=12 {
            for n in 0..=12 {
                let idx = DiscPolyIndex::new(q, m, n).unwrap();
                for &z in &pts {
                    let a = disc_poly(idx, z).unwrap();
                    diff = diff.max((a - disc_poly_monomial(idx, z).unwrap()).norm());
                    bound = bound.max(a.norm());
                }
            }
        }
    }
    let passed = diff <= 1e-10 && bound <= 1.0 + 1e-12;
    report(2, "disc polynomial oracle", passed, format!("max |recurrence - monomial| {diff:.3e} <= 1e-10, max |R| {bound:.15}"), t.elapsed(), Some(Duration::from_secs(10)));
}

#[test]
fn criterion_3_funk_hecke() {
    let t = Instant::now();
    let kernels: Vec<ZonalKernel> = vec![
        single(2, SpectralIndex::disc(0, 0), 2.5).into(),
        single(2, SpectralIndex::disc(1, 0), 1.0).into(),
        single(2, SpectralIndex::disc(2, 1), 1.0).into(),
        geometric_table(2, 0.4, 6).unwrap().into(),
    ];
    let harmonics: Vec<TestHarmonic> = (0..=3).flat_map(|m| (0..=3).map(move |n| TestHarmonic::new(m, n))).collect();
    let sphere = sphere3_rule(24, 48).unwrap();
    let disc = disc_rule(2, 12, 24).unwrap();
    let base = sphere_mc_sample(2, 5, 3).unwrap();
    let mut worst: f64 = 0.0;
    for k in &kernels {
        for y in base.nodes() {
            for s in funk_hecke_sides(k, &harmonics, y, &sphere, &disc).unwrap() {
                worst = worst.max(s.residual());
            }
        }
    }
    report(3, "Funk-Hecke", worst <= 1e-8, format!("max |LHS - RHS| {worst:.3e} <= 1e-8"), t.elapsed(), Some(Duration::from_secs(60)));
}

fn random_table(rng: &mut ChaCha8Rng, q: usize, degree: usize) -> CoefficientTable {
    let mut z = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    if q == 1 {
        let d = degree as i64;
        CoefficientTable::new(1, degree, (-d..=d).map(|k| (SpectralIndex::circle(k), z()))).unwrap()
    } else {
        let d = degree as u32;
        let entries: Vec<_> = (0..=d).flat_map(|m| (0..=d).map(move |n| SpectralIndex::disc(m, n))).map(|i| (i, z())).collect();
        CoefficientTable::new(q, degree, entries).unwrap()
    }
}

fn oracle_gap(q: usize, rule: &QuadratureRule, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (random_table(&mut rng, q, 5), random_table(&mut rng, q, 5));
    let spectral: ZonalKernel = convolve_spectral(&a, &b).unwrap().into();
    let (ka, kb): (ZonalKernel, ZonalKernel) = (a.into(), b.into());
    let pts = random_sphere_points(&mut rng, q, 40);
    pts.chunks_exact(2 * q)
        .map(|pair| {
            let (x, y) = pair.split_at(q);
            (convolve_direct(&ka, &kb, x, y, rule).unwrap() - spectral.eval(x, y).unwrap()).norm()
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_4_convolution_oracle() {
    let t = Instant::now();
    let circle = oracle_gap(1, &circle_rule(128).unwrap(), 41);
    let sphere = oracle_gap(2, &sphere3_rule(24, 48).unwrap(), 42);
    let worst = circle.max(sphere);
    report(4, "convolution oracle", worst <= 1e-8, format!("q=1 {circle:.3e}, q=2 {sphere:.3e} <= 1e-8"), t.elapsed(), Some(Duration::from_secs(60)));
}

#[test]
fn criterion_5_root_recovery() {
    let t = Instant::now();
    let mut cases: Vec<(String, CoefficientTable)> = Vec::new();
    for rho in [0.3, 0.5, 0.8] {
        cases.push((format!("poisson {rho}"), poisson_table(rho, 40).unwrap()));
    }
    for rho in [0.25, 0.5] {
        for q in [2, 3] {
            cases.push((format!("geometric {rho} q={q}"), geometric_table(q, rho, 8).unwrap()));
        }
    }
    for (q, idx) in [(1, SpectralIndex::circle(3)), (1, SpectralIndex::circle(-2)), (2, SpectralIndex::disc(1, 1)), (2, SpectralIndex::disc(2, 0)), (2, SpectralIndex::disc(0, 3)), (3, SpectralIndex::disc(1, 2))] {
        cases.push((format!("mode {idx} q={q}"), single(q, idx, 1.0)));
    }

    let (mut spectral, mut direct, mut poisson): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (name, k) in &cases {
        let p = convolution_root(k, ROOT_TOL).unwrap();
        spectral = spectral.max(verify_root(&p, k, None).unwrap());
        let rule = match k.q() {
            1 => Some(circle_rule(2 * k.degree() + 2).unwrap()),
            2 => Some(sphere3_rule(k.degree() + 1, 2 * k.degree() + 2).unwrap()),
            _ => None,
        };
        if let Some(rule) = rule {
            let d = direct_residual(&p, k, &rule).unwrap();
            assert!(d.is_finite(), "{name}");
            direct = direct.max(d);
        }
    }
    for rho in [0.3f64, 0.5, 0.8] {
        // coefficientwise over the stored support of K; entries below the
        // drop threshold are absent from K and therefore from its root
        let k = poisson_table(rho, 40).unwrap();
        let p = convolution_root(&k, ROOT_TOL).unwrap();
        assert_eq!(p.len(), k.len());
        for (idx, _) in k.iter() {
            let SpectralIndex::Circle { k: j } = *idx else { unreachable!() };
            poisson = poisson.max((p.get(idx) - rho.sqrt().powi(j.abs() as i32)).norm());
        }
    }
    let passed = spectral <= 1e-10 && direct <= 1e-7 && poisson <= 1e-12;
    let detail = format!("{} kernels: spectral {spectral:.3e} <= 1e-10, direct {direct:.3e} <= 1e-7, Poisson(sqrt rho) {poisson:.3e} <= 1e-12", cases.len());
    report(5, "root recovery", passed, detail, t.elapsed(), Some(Duration::from_secs(30)));
}

fn run_root(dir: &Path, file: &str) -> (i32, serde_json::Value) {
    let o = Command::new(env!("CARGO_BIN_EXE_zonal"))
        .args(["root", file, "--out", "root.json", "--report", "report.json"])
        .current_dir(dir)
        .output()
        .unwrap();
    let r = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    (o.status.code().unwrap(), r)
}

#[test]
fn criterion_6_negative_control() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = Vec::new();
    let mut count = 0;
    for (q, value) in [(1, -0.1), (1, -2e-12), (2, -0.1), (2, -1.1e-12), (3, -5.0)] {
        for _ in 0..4 {
            let base = if q == 1 { poisson_table(0.5, 6).unwrap() } else { geometric_table(q, 0.5, 4).unwrap() };
            let entries: Vec<_> = base.iter().map(|(i, a)| (*i, *a)).collect();
            let bad = entries[rng.random_range(0..entries.len())].0;
            let modified = entries.iter().map(|&(i, a)| if i == bad { (i, c(value)) } else { (i, a) });
            let table = CoefficientTable::new(q, base.degree(), modified).unwrap();
            let file = format!("k{count}.json");
            table.write(&dir.path().join(&file)).unwrap();
            let (code, report_json) = run_root(dir.path(), &file);
            let named = serde_json::to_value(bad).unwrap();
            if code != 2 || report_json["status"] != "negative_coefficient" || report_json["offending_index"] != named {
                failures.push(format!("{file}: exit {code}, report {}", report_json["offending_index"]));
            }
            count += 1;
        }
    }
    let detail = format!("{count} tables, {} without exit 2 and the offending index", failures.len());
    report(6, "negative control", failures.is_empty(), format!("{detail} {failures:?}"), t.elapsed(), None);
}

/// Eigenvalue gap against the table and the count of retained eigenvalues.
fn mercer(table: &CoefficientTable, rule: &QuadratureRule) -> (f64, f64, usize) {
    let op = discretize_operator(&table.clone().into(), rule).unwrap();
    let eig = op.eigensystem().unwrap();
    let sqrt = operator_sqrt_kernel(&eig, &op, None).unwrap();
    let root = convolution_root(table, ROOT_TOL).unwrap();
    let deviation = compare_roots(&sqrt, &root).unwrap();
    let expected = expected_spectrum(table);
    let gap = (0..eig.len().max(expected.len()))
        .map(|i| (eig.eigenvalues.get(i).copied().unwrap_or(0.0) - expected.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max);
    let retained = eig.eigenvalues.iter().filter(|&&l| l > 1e-10).count();
    (deviation, gap, retained)
}

#[test]
fn criterion_7_mercer_cross_validation() {
    let t = Instant::now();
    // 64 circle nodes resolve |k| <= 31
    let poisson = poisson_table(0.5, 31).unwrap();
    let (p_dev, p_gap, p_count) = mercer(&poisson, &circle_rule(64).unwrap());
    let (_, p_gap_fine, p_count_fine) = mercer(&poisson, &circle_rule(128).unwrap());

    let mode = single(2, SpectralIndex::disc(1, 1), 4.0);
    let (m_dev, m_gap, m_count) = mercer(&mode, &sphere3_rule(16, 32).unwrap());
    let (_, m_gap_coarse, m_count_coarse) = mercer(&mode, &sphere3_rule(8, 16).unwrap());

    let deviation = p_dev.max(m_dev);
    let gap = p_gap.max(p_gap_fine).max(m_gap).max(m_gap_coarse);
    let stable = p_count == 63 && p_count_fine == 63 && m_count == 3 && m_count_coarse == 3;
    let detail = format!(
        "root deviation poisson {p_dev:.3e}, mode {m_dev:.3e} <= 1e-6; eigenvalue gap {gap:.3e} <= 1e-8; multiplicities {p_count}/{p_count_fine} and {m_count_coarse}/{m_count}"
    );
    report(7, "Mercer cross-validation", deviation <= 1e-6 && gap <= 1e-8 && stable, detail, t.elapsed(), Some(Duration::from_secs(120)));
}

#[test]
fn criterion_8_continuity_reports() {
    let t = Instant::now();
    let g = continuity_report(&geometric_table(2, 0.5, 40).unwrap()).abs_sum;
    let p = continuity_report(&poisson_table(0.5, 60).unwrap()).abs_sum;
    let passed = (g - 4.0).abs() <= 1e-6 && (p - 3.0).abs() <= 1e-12;
    report(8, "continuity reports", passed, format!("geometric |sum - 4| {:.3e} <= 1e-6, Poisson |sum - 3| {:.3e} <= 1e-12", (g - 4.0).abs(), (p - 3.0).abs()), t.elapsed(), None);
}

#[test]
fn criterion_9_gram_positivity() {
    let t = Instant::now();
    let mut kernels: Vec<(String, ZonalKernel)> = Vec::new();
    for rho in [0.3, 0.5, 0.8] {
        kernels.push((format!("poisson {rho}"), ZonalKernel::poisson(rho).unwrap()));
    }
    for rho in [0.25, 0.5] {
        for q in [2, 3] {
            kernels.push((format!("geometric {rho} q={q}"), geometric_table(q, rho, 16).unwrap().into()));
        }
    }
    for (q, idx) in [(1, SpectralIndex::circle(2)), (2, SpectralIndex::disc(1, 1)), (3, SpectralIndex::disc(2, 1))] {
        kernels.push((format!("mode {idx} q={q}"), single(q, idx, 1.0).into()));
    }
    let roots: Vec<(String, ZonalKernel)> = kernels
        .iter()
        .filter_map(|(n, k)| k.table().map(|t| (format!("root of {n}"), convolution_root(t, ROOT_TOL).unwrap().into())))
        .collect();
    kernels.extend(roots);

    let mut worst = f64::INFINITY;
    let mut worst_name = String::new();
    for (i, (name, k)) in kernels.iter().enumerate() {
        let g = pd_gram_check(k, 12, 900 + i as u64, 1e-8).unwrap();
        if g.min_eigenvalue < worst {
            worst = g.min_eigenvalue;
            worst_name = name.clone();
        }
    }
    report(9, "Gram positivity", worst >= -1e-8, format!("{} kernels, min eigenvalue {worst:.3e} ({worst_name}) >= -1e-8", kernels.len()), t.elapsed(), None);
}
