//! The acceptance suite behind `lrp verify`.
//!
//! Each criterion has pinned parameters at two scales. `Full` is the scale
//! the criteria are stated at; `Smoke` shrinks replicate counts and grids so
//! the whole suite runs in seconds, which is what the reproducibility
//! criterion reruns.

use std::path::Path;
use std::time::Instant;

use anyhow::{ensure, Result};
use lrp_core::estimators::{
    band_spread, check_submultiplicativity, corner_distances, estimate_lambda, kernel_comparison, lambda_series,
    moment_ratio, moment_trend, quantile_point_to_box, scaling_coupling_check, theta_vs_beta, center_degree,
};
use lrp_core::kernel::{
    block_connection_probability, check_probability_bounds, connection_probability, expected_degree, kernel_gap,
    quadrature_interaction,
};
use lrp_core::oracle::{
    brute_force_connected_sets, exact_diameter_law, exact_expected_distance, exact_separation_probability,
    expected_degree_in_box, DEFAULT_SUBSET_CAP,
};
use lrp_core::rng::{derive_seed, replica_seed, Purpose};
use lrp_core::sampler::sample_box;
use lrp_core::stats::EstimateCI;
use lrp_core::structure::{
    connected_set_survey, cut_point_count_bound, cut_point_probability, cut_point_survey, enumerate_connected_sets,
    sphere_connection_probability,
};
use lrp_core::{BoxSampler, BoxSpec, DiameterMode, Displacement, KernelFamily, KernelSpec, LatticeGraph};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::commands::{ci_row, degree_radius};
use crate::config::{OutputFormat, Scale};
use crate::output::{write_report, Report, Row, RowBuilder};

pub const CRITERIA: std::ops::RangeInclusive<u32> = 1..=16;

/// Criteria that fail at the stated scale for reasons recorded in the
/// project notes; the acceptance tests report them without aborting.
pub const KNOWN_UNATTAINABLE: [u32; 1] = [15];

/// `E[D(0,3)]` on `{0,1,2,3}` at `β = 1`, by enumerating the eight
/// configurations of the edges `(0,2)`, `(1,3)`, `(0,3)`.
pub const ORACLE_CORNER_MEAN_N4: f64 = 43.0 / 18.0;
/// Expected degree of a vertex of `Z` at `β = 1`: `2 + 2 (π²/6 - 1)`.
pub const LINE_DEGREE_BETA1: f64 = 3.289_868_133_696_453;

pub fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "kernel exactness",
        2 => "bound compliance",
        3 => "self-similarity",
        4 => "scaling coupling",
        5 => "submultiplicativity",
        6 => "exponent existence",
        7 => "large-beta law",
        8 => "oracle equivalence",
        9 => "degree",
        10 => "sphere connection",
        11 => "connected sets",
        12 => "cut and separation points",
        13 => "kernel robustness",
        14 => "moment boundedness",
        15 => "quantile structure",
        16 => "reproducibility",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub known_unattainable: bool,
    pub detail: String,
    #[serde(skip)]
    pub rows: Vec<Row>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("criterion {}: {verdict} [{}] {}", self.id, self.name, self.detail)
    }
}

fn pick<T>(scale: Scale, full: T, smoke: T) -> T {
    match scale {
        Scale::Full => full,
        Scale::Smoke => smoke,
    }
}

fn rows_for(id: u32, d: usize, kernel: &KernelSpec, n: usize, seed: u64) -> RowBuilder {
    Row::builder(&format!("c{id:02}"), d, kernel, n, seed)
}

fn disp(v: &[i64]) -> Displacement {
    Displacement::new(v.to_vec()).expect("nonempty")
}

fn indicator(b: bool) -> f64 {
    f64::from(u8::from(b))
}

/// Runs one criterion. The master seed of criterion `id` is derived from
/// `seed`, so criteria are independent of each other and of run order.
pub fn run_criterion(id: u32, scale: Scale, seed: u64) -> Result<CriterionOutcome> {
    ensure!(CRITERIA.contains(&id), "no criterion {id}");
    let master = derive_seed(seed, Purpose::Generic, 1000 + u64::from(id));
    let (passed, detail, rows) = match id {
        1 => c01(master)?,
        2 => c02(master)?,
        3 => c03(scale, master)?,
        4 => c04(scale, master)?,
        5 => c05(scale, master)?,
        6 => c06(scale, master)?,
        7 => c07(scale, master)?,
        8 => c08(scale, master)?,
        9 => c09(scale, master)?,
        10 => c10(scale, master)?,
        11 => c11(scale, master)?,
        12 => c12(scale, master)?,
        13 => c13(scale, master)?,
        14 => c14(scale, master)?,
        15 => c15(scale, master)?,
        _ => c16(scale, seed)?,
    };
    Ok(CriterionOutcome {
        id,
        name: criterion_name(id),
        passed,
        known_unattainable: KNOWN_UNATTAINABLE.contains(&id),
        detail,
        rows,
    })
}

type Verdict = (bool, String, Vec<Row>);

fn c01(seed: u64) -> Result<Verdict> {
    let start = Instant::now();
    let mut worst = 0f64;
    for k in 2..=64i64 {
        let closed = ((k * k) as f64 / (k * k - 1) as f64).ln();
        let quad = quadrature_interaction(&disp(&[k]));
        worst = worst.max(((quad - closed) / closed).abs());
    }
    let fast = start.elapsed().as_secs_f64() < 1.0;
    let b = rows_for(1, 1, &KernelSpec::exact(1.0), 64, seed);
    let passed = worst <= 1e-8 && fast;
    let detail = format!("max relative error {worst:.3e} over k in [2,64] (tolerance 1e-8)");
    Ok((passed, detail, vec![b.exact("max_relative_error", worst)]))
}

fn c02(seed: u64) -> Result<Verdict> {
    let mut checked = 0u64;
    let mut violations = 0u64;
    let mut rows = Vec::new();
    for beta in [0.5, 1.0, 4.0] {
        for d in 1..=2usize {
            let mut local = 0u64;
            let r = 64i64;
            let range: Vec<i64> = (-r..=r).collect();
            let mut visit = |v: &[i64]| -> Result<()> {
                if v.iter().map(|c| c.abs()).max().unwrap_or(0) < 2 {
                    return Ok(());
                }
                checked += 1;
                if !check_probability_bounds(beta, &disp(v))?.holds() {
                    local += 1;
                }
                Ok(())
            };
            if d == 1 {
                for &a in &range {
                    visit(&[a])?;
                }
            } else {
                for &a in &range {
                    for &c in &range {
                        visit(&[a, c])?;
                    }
                }
            }
            violations += local;
            rows.push(rows_for(2, d, &KernelSpec::exact(beta), 64, seed).exact("violations", local as f64));
        }
    }
    let detail = format!("{violations} violations over {checked} displacements with sup norm in [2,64], d in {{1,2}}, beta in {{0.5,1,4}}");
    Ok((violations == 0, detail, rows))
}

fn c03(scale: Scale, seed: u64) -> Result<Verdict> {
    let k = KernelSpec::exact(1.0);
    let mut worst = 0f64;
    for d in 1..=2usize {
        for sup in 2..=4i64 {
            for off in 0..=1i64 {
                let mut v = vec![0i64; d];
                v[0] = sup;
                if d == 2 {
                    v[1] = off * (sup - 1);
                }
                let single = connection_probability(&k, &disp(&v));
                for n in 2..=4 {
                    let block = block_connection_probability(&k, &disp(&v), n)?;
                    worst = worst.max(((block - single) / single).abs());
                }
            }
        }
    }
    // Blocks {0..3} and {12..15} of a 16-site segment.
    let reps = pick(scale, 100_000, 2_000);
    let sampler = BoxSampler::new(k, BoxSpec::new(1, 16)?)?;
    let hits: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let c = sampler.sample(replica_seed(seed, Purpose::Generic, 16, i as u64));
            indicator(c.edges().iter().any(|&(a, b)| a < 4 && b >= 12))
        })
        .collect();
    let est = EstimateCI::from_samples("block connection", &hits, seed)?;
    let target = 1.0 / 9.0;
    let z = (est.mean - target) / est.stderr;
    let b = rows_for(3, 1, &k, 4, seed);
    let rows = vec![
        b.exact("identity_max_relative_error", worst),
        ci_row(&b, "block_connection_frequency", &est),
        b.exact("block_connection_exact", target),
    ];
    let passed = worst <= 1e-8 && z.abs() <= 4.0;
    let detail = format!(
        "identity max relative error {worst:.3e} (tolerance 1e-8); MC {:.5} ± {:.5} vs 1/9, z = {z:.2} (limit 4)",
        est.mean, est.stderr
    );
    Ok((passed, detail, rows))
}

fn c04(scale: Scale, seed: u64) -> Result<Verdict> {
    let clouds = pick(scale, 1000, 20);
    let mut rows = Vec::new();
    let mut total = 0u64;
    let mut bad = 0u64;
    for (d, fine, coarse) in [(1usize, 16usize, 8usize), (2, 8, 4)] {
        let eps = 1.0 / fine as f64;
        let r = scaling_coupling_check(d, 1.0, eps, fine, coarse, clouds, derive_seed(seed, Purpose::Coupling, d as u64))?;
        total += r.pairs_checked;
        bad += r.violations;
        let b = rows_for(4, d, &KernelSpec::exact(1.0), fine, seed);
        rows.push(b.exact("pairs_checked", r.pairs_checked as f64));
        rows.push(b.exact("violations", r.violations as f64));
        rows.push(b.exact("max_ratio", r.max_ratio));
    }
    let detail = format!("{bad} violations of D' <= 3 D over {total} vertex pairs in {clouds} clouds per dimension");
    Ok((bad == 0, detail, rows))
}

fn c05(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 100_000, 500);
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for (j, (d, beta)) in [(1usize, 0.5), (1, 2.0), (2, 1.0)].into_iter().enumerate() {
        let k = KernelSpec::exact(beta);
        let r = check_submultiplicativity(&k, d, 4, 4, reps, derive_seed(seed, Purpose::Generic, j as u64))?;
        let b = rows_for(5, d, &k, 16, seed);
        rows.push(b.stat("lambda_16", r.lambda_mn.lambda_hat, r.lambda_mn.lambda_stderr, reps));
        rows.push(b.stat("lambda_4_squared", r.product, r.product_stderr, reps));
        rows.push(b.exact("z_score", r.z_score));
        worst = worst.max(r.z_score);
        parts.push(format!(
            "(d={d}, beta={beta}) {:.3} vs {:.3}, z = {:.2}",
            r.lambda_mn.lambda_hat, r.product, r.z_score
        ));
    }
    Ok((worst <= 3.0, format!("{}; limit z <= 3", parts.join("; ")), rows))
}

fn dyadic(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo), |&n| (n < hi).then_some(2 * n)).collect()
}

fn c06(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 1000, 200);
    let grids = [
        (1usize, pick(scale, dyadic(8, 512), dyadic(8, 64))),
        (2, pick(scale, dyadic(4, 64), dyadic(4, 32))),
    ];
    let mut rows = Vec::new();
    let mut passed = true;
    let mut parts = Vec::new();
    for (d, grid) in grids {
        for (j, beta) in [1.0, 4.0].into_iter().enumerate() {
            let k = KernelSpec::exact(beta);
            let s = derive_seed(seed, Purpose::Generic, (d * 10 + j) as u64);
            let (series, fit) = lambda_series(&k, d, &grid, reps, s)?;
            let b = rows_for(6, d, &k, 0, seed);
            for e in &series {
                rows.push(b.with_n(e.n).stat("lambda_hat", e.lambda_hat, e.lambda_stderr, reps));
            }
            rows.push(b.stat("theta_hat", fit.theta_hat, fit.theta_stderr, grid.len()));
            rows.push(b.exact("r_squared", fit.r_squared));
            rows.push(b.exact("min_consecutive_z", fit.min_consecutive_z));
            let ok = fit.theta_hat > 0.0 && fit.theta_hat < 1.0 && fit.r_squared > 0.98 && fit.monotone;
            passed &= ok;
            parts.push(format!(
                "(d={d}, beta={beta}) theta {:.3} ± {:.3}, R² {:.4}, min step z {:.1}",
                fit.theta_hat, fit.theta_stderr, fit.r_squared, fit.min_consecutive_z
            ));
        }
    }
    Ok((passed, format!("{}; need theta in (0,1), R² > 0.98, no step z < -3", parts.join("; ")), rows))
}

fn c07(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 1000, 200);
    let grid = pick(scale, dyadic(64, 2048), dyadic(16, 128));
    let r = theta_vs_beta(KernelFamily::ExactCube, 1, &[8.0, 64.0, 512.0], &grid, reps, seed)?;
    let mut rows = Vec::new();
    for row in r.rows.iter().filter(|r| !r.reference) {
        let b = rows_for(7, 1, &KernelSpec::exact(row.beta), 0, seed);
        rows.push(b.stat("theta_hat", row.theta_hat, row.theta_stderr, grid.len()));
        if let Some(p) = row.theta_log_beta {
            rows.push(b.exact("theta_log_beta", p));
        }
    }
    let b = rows_for(7, 1, &KernelSpec::exact(0.0), 0, seed);
    rows.push(b.exact("min_separation_z", r.min_separation_z));
    rows.push(b.exact("product_spread", r.product_spread));
    let thetas: Vec<String> = r
        .rows
        .iter()
        .filter(|r| !r.reference)
        .map(|r| format!("{:.4}", r.theta_hat))
        .collect();
    let passed = r.min_separation_z >= 3.0 && r.product_spread <= 3.0;
    let detail = format!(
        "theta at beta 8/64/512 = {}; adjacent separation z >= {:.1} (need 3); theta·ln beta spread {:.3} (need <= 3)",
        thetas.join("/"),
        r.min_separation_z,
        r.product_spread
    );
    Ok((passed, detail, rows))
}

fn c08(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 100_000, 1_000);
    let k = KernelSpec::exact(1.0);
    let law = exact_expected_distance(&k, &BoxSpec::new(1, 4)?, &[0], &[3], 22)?;
    let frozen_ok = (law.expectation - ORACLE_CORNER_MEAN_N4).abs() < 1e-12;
    let pairs = corner_distances(&k, 1, 4, reps, derive_seed(seed, Purpose::Generic, 0), Purpose::Generic)?;
    let xs: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
    let est = EstimateCI::from_samples("D(0,3)", &xs, seed)?;
    let z_mean = (est.mean - law.expectation) / est.stderr;

    let dia_law = exact_diameter_law(&k, &BoxSpec::new(1, 3)?, 22)?;
    let sampler = BoxSampler::new(k, BoxSpec::new(1, 3)?)?;
    let dias: Vec<u32> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let c = sampler.sample(replica_seed(seed, Purpose::Diameter, 3, i as u64));
            LatticeGraph::new(&c)
                .diameter(DiameterMode::default())
                .map(|d| d.value)
                .unwrap_or(u32::MAX)
        })
        .collect();
    let b = rows_for(8, 1, &k, 4, seed);
    let mut rows = vec![
        b.exact("oracle_mean", law.expectation),
        ci_row(&b, "mc_mean", &est),
    ];
    let mut worst_z = z_mean.abs();
    for &(v, p) in &dia_law.support {
        let freq: Vec<f64> = dias.iter().map(|&x| indicator(x == v)).collect();
        let e = EstimateCI::from_samples(format!("P(dia = {v})"), &freq, seed)?;
        let z = (e.mean - p) / e.stderr.max(f64::MIN_POSITIVE);
        worst_z = worst_z.max(z.abs());
        let bn = b.with_n(3);
        rows.push(bn.exact(&format!("diameter_p{v}_exact"), p));
        rows.push(ci_row(&bn, &format!("diameter_p{v}_mc"), &e));
    }
    let passed = frozen_ok && worst_z <= 4.0;
    let detail = format!(
        "oracle E[D(0,3)] = {:.6} (frozen 43/18 matches: {frozen_ok}); MC {:.4} ± {:.4}; worst |z| incl. diameter law {worst_z:.2} (limit 4)",
        law.expectation, est.mean, est.stderr
    );
    Ok((passed, detail, rows))
}

fn c09(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 10_000, 200);
    let n = 129;
    let k = KernelSpec::exact(1.0);
    let centered = BoxSpec::with_origin(n, vec![-64])?;
    let exact_box = expected_degree_in_box(&k, &centered, &[0])?;
    let deficit = LINE_DEGREE_BETA1 - exact_box;
    let est = center_degree(&k, 1, n, reps, seed)?;
    let z = (est.mean - exact_box) / est.stderr;
    let mu = expected_degree(&k, 1, degree_radius(1))?;
    let b = rows_for(9, 1, &k, n, seed);
    let rows = vec![
        ci_row(&b, "center_degree", &est),
        b.exact("expected_degree_in_box", exact_box),
        b.exact("finite_box_deficit", deficit),
        b.exact("degree_bound", mu.bound),
    ];
    let passed = z.abs() <= 4.0 && mu.within_bound() && est.mean <= mu.bound;
    let detail = format!(
        "mean degree {:.4} ± {:.4} vs 3.2899 - {deficit:.4} = {exact_box:.4}, z = {z:.2} (limit 4); bound {}",
        est.mean, est.stderr, mu.bound
    );
    Ok((passed, detail, rows))
}

fn c10(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 100_000, 2_000);
    let k1 = KernelSpec::exact(1.0);
    let mut rows = Vec::new();
    let mut passed = true;
    let mut parts = Vec::new();
    for r in [2u64, 5, 10] {
        let s = sphere_connection_probability(&k1, 1, r, reps, derive_seed(seed, Purpose::Sphere, r))?;
        let target = (2.0 * r as f64 - 1.0) / (r * r) as f64;
        let z = (s.estimate.mean - target) / s.estimate.stderr;
        passed &= z.abs() <= 4.0;
        let b = rows_for(10, 1, &k1, r as usize, seed);
        rows.push(ci_row(&b, "p_sphere", &s.estimate));
        rows.push(b.exact("p_sphere_exact", target));
        parts.push(format!("d=1 k={r}: {:.4} vs {target:.4} (z {z:.2})", s.estimate.mean));
    }
    for r in [2u64, 4, 8] {
        let s = sphere_connection_probability(&k1, 2, r, reps, derive_seed(seed, Purpose::Sphere, 100 + r))?;
        passed &= s.estimate.mean <= s.bound + 3.0 * s.estimate.stderr;
        let b = rows_for(10, 2, &k1, r as usize, seed);
        rows.push(ci_row(&b, "p_sphere", &s.estimate));
        rows.push(b.exact("bound", s.bound));
        parts.push(format!("d=2 k={r}: {:.4} <= {:.1}", s.estimate.mean, s.bound));
    }
    Ok((passed, parts.join("; "), rows))
}

fn c11(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 1000, 20);
    let k = KernelSpec::exact(1.0);
    let k_max = 5;
    let mut rows = Vec::new();
    let mut passed = true;
    let mut parts = Vec::new();
    for (d, n) in [(1usize, 11usize), (2, 9)] {
        let mu = expected_degree(&k, d, degree_radius(d))?.value;
        let half = (n / 2) as i64;
        let box_spec = BoxSpec::with_origin(n, vec![-half; d])?;
        let threshold = 20.0 * mu;
        let survey = connected_set_survey(
            &k,
            &box_spec,
            &vec![0; d],
            k_max,
            threshold,
            reps,
            derive_seed(seed, Purpose::ConnectedSets, d as u64),
        )?;
        let b = rows_for(11, d, &k, n, seed);
        rows.push(b.exact("mu_beta", mu));
        for s in &survey {
            let kk = s.k as i32;
            let count_bound = (4.0 * mu).powi(kk);
            let event_bound = (-4.0 * f64::from(kk) * mu).exp();
            passed &= s.count.mean <= count_bound;
            passed &= s.degree_event.mean <= event_bound + 3.0 * s.degree_event.stderr;
            rows.push(ci_row(&b, &format!("count_k{kk}"), &s.count));
            rows.push(b.exact(&format!("count_bound_k{kk}"), count_bound));
            rows.push(ci_row(&b, &format!("degree_event_k{kk}"), &s.degree_event));
        }
        let last = survey.last().expect("k_max >= 1");
        parts.push(format!(
            "d={d}: mu {mu:.3}, mean |CS_5| {:.1} <= {:.3e}, event frequency {:.4}",
            last.count.mean,
            (4.0 * mu).powi(5),
            last.degree_event.mean
        ));
    }
    // Exclusive-extension enumeration against subset testing.
    let graphs = pick(scale, 100u64, 10);
    let mut mismatches = 0;
    for i in 0..graphs {
        let (d, n) = if i % 2 == 0 { (1usize, 11usize) } else { (2, 5) };
        let c = sample_box(&k, &BoxSpec::new(d, n)?, replica_seed(seed, Purpose::Generic, n as u64, i))?;
        let g = LatticeGraph::new(&c);
        let root = (i as usize * 7) % g.num_vertices();
        for rep in enumerate_connected_sets(&g, root, k_max)? {
            if rep.count != brute_force_connected_sets(&g, root, rep.k, DEFAULT_SUBSET_CAP)? {
                mismatches += 1;
            }
        }
    }
    passed &= mismatches == 0;
    rows.push(rows_for(11, 0, &k, 0, seed).exact("enumeration_mismatches", f64::from(mismatches)));
    parts.push(format!("{mismatches} enumeration mismatches on {graphs} graphs"));
    Ok((passed, parts.join("; "), rows))
}

fn c12(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 100_000, 2_000);
    let mut rows = Vec::new();
    let mut passed = true;
    let mut parts = Vec::new();
    for (j, (beta, m, w)) in [(0.5, 8usize, 3usize), (1.0, 4, 1), (2.0, 16, 5)].into_iter().enumerate() {
        let s = cut_point_survey(beta, m, w, reps, derive_seed(seed, Purpose::CutPoints, j as u64))?;
        let p = cut_point_probability(beta, m, w);
        let z = (s.cut_at_w.mean - p) / s.cut_at_w.stderr;
        passed &= z.abs() <= 4.0;
        let b = rows_for(12, 1, &KernelSpec::exact(beta), m, seed);
        rows.push(ci_row(&b, "cut_at_w", &s.cut_at_w));
        rows.push(b.exact("cut_at_w_exact", p));
        parts.push(format!("cut (beta {beta}, m {m}, w {w}) z {z:.2}"));
    }
    let mut worst_ratio = 0f64;
    for beta in [0.5, 1.0, 2.0] {
        for m in [3usize, 8, 16, 64, 256, 1024, 4096] {
            let bound = cut_point_count_bound(beta, m)?;
            passed &= bound.holds();
            worst_ratio = worst_ratio.max(bound.expected / bound.bound);
            rows.push(rows_for(12, 1, &KernelSpec::exact(beta), m, seed).exact("expected_cut_count", bound.expected));
        }
    }
    parts.push(format!("expected count / f(beta,m) at most {worst_ratio:.3}"));
    let big_m = 9;
    for beta in [0.5, 1.0] {
        let s = cut_point_survey(beta, big_m, 3, reps, derive_seed(seed, Purpose::Separation, (beta * 2.0) as u64))?;
        let sep = s.separation_at_w.expect("w = 3 is odd");
        let floor = 0.1 * (big_m as f64).powf(-beta);
        passed &= sep.mean >= floor - 3.0 * sep.stderr;
        let b = rows_for(12, 1, &KernelSpec::exact(beta), big_m, seed);
        rows.push(ci_row(&b, "separation_at_3", &sep));
        rows.push(b.exact("separation_exact", exact_separation_probability(beta, big_m, 3)?));
        rows.push(b.exact("separation_floor", floor));
        parts.push(format!("separation (beta {beta}) {:.4} >= {floor:.4}", sep.mean));
    }
    Ok((passed, parts.join("; "), rows))
}

fn c13(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 2000, 50);
    let a = KernelSpec::exact(2.0);
    let b2 = KernelSpec::truncated(2.0);
    let mut rows = Vec::new();
    let mut q = Vec::new();
    for n in [64usize, 256] {
        let c = kernel_comparison(&a, &b2, 1, n, reps, None, derive_seed(seed, Purpose::KernelComparison, n as u64))?;
        let b = rows_for(13, 1, &a, n, seed);
        rows.push(b.stat("corner_ratio_q99", c.corner_ratio_q99, 0.0, reps));
        rows.push(b.stat("corner_inverse_q99", c.corner_inverse_q99, 0.0, reps));
        q.push((c.corner_ratio_q99, c.corner_inverse_q99));
    }
    let drift = |x: f64, y: f64| (x / y).max(y / x);
    let stability = drift(q[0].0, q[1].0).max(drift(q[0].1, q[1].1));
    let mut gap = 0f64;
    for k in 2..=64i64 {
        gap = gap.max(kernel_gap(&disp(&[k]), 2.0)?);
    }
    let same = kernel_comparison(
        &KernelSpec::exact(1.0),
        &KernelSpec::truncated(1.0),
        1,
        256,
        pick(scale, 200, 10),
        None,
        derive_seed(seed, Purpose::KernelComparison, 1),
    )?;
    let b = rows_for(13, 1, &a, 0, seed);
    rows.push(b.exact("q99_stability", stability));
    rows.push(b.exact("sup_scaled_gap", gap));
    rows.push(rows_for(13, 1, &KernelSpec::exact(1.0), 256, seed).exact("identical_fraction", same.identical_fraction));
    let passed = stability <= 1.5 && gap <= 2.0 && same.identical_fraction == 1.0;
    let detail = format!(
        "q99 ratio drift 64→256 {stability:.3} (limit 1.5); sup scaled gap at beta 2 {gap:.3} (limit 2); identical at beta 1: {:.0}%",
        100.0 * same.identical_fraction
    );
    Ok((passed, detail, rows))
}

fn c14(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 10_000, 200);
    let grid = pick(scale, dyadic(16, 256), dyadic(16, 64));
    let k = KernelSpec::exact(1.0);
    let ratios = grid
        .iter()
        .map(|&n| moment_ratio(&k, 1, n, reps, 2, seed))
        .collect::<lrp_core::Result<Vec<_>>>()?;
    let t = moment_trend(ratios)?;
    let b = rows_for(14, 1, &k, 0, seed);
    let mut rows: Vec<Row> = t
        .ratios
        .iter()
        .map(|r| b.with_n(r.n).stat("second_moment_ratio", r.ratio, r.stderr, r.replicates))
        .collect();
    rows.push(b.stat("log_slope", t.slope, t.slope_stderr, grid.len()));
    let passed = t.z_score.abs() <= 3.0;
    let first = t.ratios.first().map_or(0.0, |r| r.ratio);
    let last = t.ratios.last().map_or(0.0, |r| r.ratio);
    let detail = format!(
        "E[D²]/E[D]² from {first:.4} to {last:.4}; log-slope {:.5} ± {:.5}, z = {:.2} (limit 3)",
        t.slope, t.slope_stderr, t.z_score
    );
    Ok((passed, detail, rows))
}

fn c15(scale: Scale, seed: u64) -> Result<Verdict> {
    let reps = pick(scale, 10_000, 200);
    let k = KernelSpec::exact(1.0);
    let halo = 2;
    let mut rows = Vec::new();
    let mut point = Vec::new();
    let mut boxes = Vec::new();
    for n in [16usize, 32, 64] {
        let lam = estimate_lambda(&k, 1, n, reps, seed)?;
        let q = quantile_point_to_box(&k, 1, n, reps, lam.lambda_hat, halo, seed)?;
        let b = rows_for(15, 1, &k, n, seed);
        rows.push(b.stat("lambda_hat", lam.lambda_hat, lam.lambda_stderr, reps));
        rows.push(b.exact("point_q01_normalized", q.point_to_box.normalized_q01));
        rows.push(b.exact("point_q99_normalized", q.point_to_box.normalized_q99));
        rows.push(b.exact("box_q01_normalized", q.box_to_box.normalized_q01));
        rows.push(b.exact("box_q99_normalized", q.box_to_box.normalized_q99));
        point.push(q.point_to_box);
        boxes.push(q.box_to_box);
    }
    let sp = band_spread(&point);
    let sb = band_spread(&boxes);
    let b = rows_for(15, 1, &k, 0, seed);
    rows.push(b.exact("point_band_spread", sp));
    rows.push(b.exact("box_band_spread", sb));
    let q01: Vec<String> = point.iter().map(|p| format!("{}", p.q01)).collect();
    let detail = format!(
        "band spread point-to-box {sp:.3}, box-to-box {sb:.3} (limit 2); raw point q01 at n=16/32/64: {}",
        q01.join("/")
    );
    Ok((sp <= 2.0 && sb <= 2.0, detail, rows))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

/// Runs the criteria `ids` and writes their data files into `dir`.
pub fn write_suite(dir: &Path, ids: &[u32], scale: Scale, seed: u64, format: OutputFormat) -> Result<Vec<String>> {
    let outcomes = ids
        .iter()
        .map(|&id| run_criterion(id, scale, seed))
        .collect::<Result<Vec<_>>>()?;
    write_report(dir, &suite_report(&outcomes, scale, seed), format)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name != crate::output::MANIFEST_FILE {
            files.push((name, std::fs::read(entry.path())?));
        }
    }
    files.sort();
    Ok(files)
}

fn c16(scale: Scale, seed: u64) -> Result<Verdict> {
    // Always the smoke scale: the point is byte equality, not statistics.
    let _ = scale;
    let ids: Vec<u32> = (1..=15).collect();
    let mut dirs = Vec::new();
    for threads in [1usize, 1, 8] {
        let dir = tempfile::tempdir()?;
        pool(threads)?.install(|| write_suite(dir.path(), &ids, Scale::Smoke, seed, OutputFormat::Csv))?;
        dirs.push(dir);
    }
    let contents = dirs
        .iter()
        .map(|d| read_dir_sorted(d.path()))
        .collect::<Result<Vec<_>>>()?;
    let repeat = contents[0] == contents[1];
    let workers = contents[0] == contents[2];
    let bytes: usize = contents[0].iter().map(|f| f.1.len()).sum();
    let b = rows_for(16, 0, &KernelSpec::exact(0.0), 0, seed);
    let rows = vec![
        b.exact("identical_on_rerun", indicator(repeat)),
        b.exact("identical_across_workers", indicator(workers)),
    ];
    let detail = format!(
        "smoke suite data ({} files, {bytes} bytes): rerun identical {repeat}, 1 vs 8 workers identical {workers}",
        contents[0].len()
    );
    Ok((repeat && workers, detail, rows))
}

/// The `verify` report: every criterion's rows plus a pass/fail table.
pub fn suite_report(outcomes: &[CriterionOutcome], scale: Scale, seed: u64) -> Report {
    let rows = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    let summary = json!({
        "scale": scale,
        "seed": seed,
        "criteria": outcomes,
        "failed": failed,
    });
    let mut report = Report::new("verify", rows, summary);
    if !failed.is_empty() {
        report.passed = false;
        report.failure = Some(format!("acceptance criteria failed: {failed:?}"));
    }
    report
}
