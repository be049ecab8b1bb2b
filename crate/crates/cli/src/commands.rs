//! One function per subcommand. Each takes a validated config and returns a
//! [`Report`]; the caller owns the worker pool and the file layout.

use anyhow::{bail, Result};
use lrp_core::estimators::{
    band_spread, check_submultiplicativity, corner_distances, diameter_scaling, estimate_lambda, kernel_comparison,
    lambda_series, quantile_point_to_box, scaling_coupling_check, tail_profile, theta_vs_beta, TailStatus,
};
use lrp_core::io::write_configuration;
use lrp_core::kernel::expected_degree;
use lrp_core::oracle::{exact_diameter_law, exact_expected_distance, exact_sphere_probability_d1, ExactLaw};
use lrp_core::rng::Purpose;
use lrp_core::stats::EstimateCI;
use lrp_core::structure::{
    connected_set_survey, cut_point_count_bound, cut_point_probability, cut_point_survey,
    sphere_connection_probability,
};
use lrp_core::{BoxSampler, BoxSpec, DiameterMode, KernelFamily, KernelSpec};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::output::{Report, Row, RowBuilder};

pub const SUBCOMMANDS: [&str; 16] = [
    "sample",
    "distance",
    "lambda",
    "theta",
    "submult",
    "theta-vs-beta",
    "tail",
    "quantiles",
    "diameter",
    "compare-kernels",
    "coupling-check",
    "consets",
    "cutpoints",
    "sphere",
    "oracle",
    "verify",
];

/// Runs every subcommand except `verify`.
pub fn run(command: &str, cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate_for(command)?;
    match command {
        "sample" => sample(cfg),
        "distance" => distance(cfg),
        "lambda" => lambda(cfg),
        "theta" => theta(cfg),
        "submult" => submult(cfg),
        "theta-vs-beta" => theta_beta(cfg),
        "tail" => tail(cfg),
        "quantiles" => quantiles(cfg),
        "diameter" => diameter(cfg),
        "compare-kernels" => compare_kernels(cfg),
        "coupling-check" => coupling_check(cfg),
        "consets" => consets(cfg),
        "cutpoints" => cutpoints(cfg),
        "sphere" => sphere(cfg),
        "oracle" => oracle(cfg),
        other => bail!("unknown subcommand `{other}`"),
    }
}

fn builder(cfg: &ExperimentConfig, experiment: &str, n: usize) -> Result<RowBuilder> {
    Ok(Row::builder(experiment, cfg.model.d, &cfg.kernel()?, n, cfg.run.seed))
}

pub fn ci_row(b: &RowBuilder, statistic: &str, e: &EstimateCI) -> Row {
    b.stat(statistic, e.mean, e.stderr, e.replicates)
}

/// Fails early if a box of side `n` would not fit in the memory cap.
fn check_memory(cfg: &ExperimentConfig, n: usize) -> Result<()> {
    BoxSampler::with_budget(cfg.kernel()?, BoxSpec::new(cfg.model.d, n)?, cfg.caps.memory_bytes)?;
    Ok(())
}

fn sample(cfg: &ExperimentConfig) -> Result<Report> {
    let (d, n) = (cfg.model.d, cfg.sizes.n);
    let sampler = BoxSampler::with_budget(cfg.kernel()?, BoxSpec::new(d, n)?, cfg.caps.memory_bytes)?;
    let config = sampler.sample(cfg.run.seed);
    let mut bytes = Vec::new();
    write_configuration(&config, &mut bytes)?;
    let b = builder(cfg, "sample", n)?;
    let rows = vec![
        b.exact("long_edges", config.num_long_edges() as f64),
        b.exact("expected_long_edges", sampler.expected_edges()),
    ];
    let mut report = Report::new("sample", rows, json!({ "configuration_file": "configuration.json" }));
    report.extra.push(("configuration.json".into(), bytes));
    Ok(report)
}

fn distance(cfg: &ExperimentConfig) -> Result<Report> {
    let (d, n, reps, seed) = (cfg.model.d, cfg.sizes.n, cfg.sizes.replicates, cfg.run.seed);
    check_memory(cfg, n)?;
    let pairs = corner_distances(&cfg.kernel()?, d, n, reps, seed, Purpose::Generic)?;
    let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
    let c: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
    let e1 = EstimateCI::from_samples("D(0,(n-1)e1)", &a, seed)?;
    let ones = EstimateCI::from_samples("D(0,(n-1)1)", &c, seed)?;
    let b = builder(cfg, "distance", n)?;
    let rows = vec![ci_row(&b, "corner_e1", &e1), ci_row(&b, "corner_ones", &ones)];
    Ok(Report::new("distance", rows, json!({ "corner_e1": e1, "corner_ones": ones })))
}

fn lambda(cfg: &ExperimentConfig) -> Result<Report> {
    let (d, n, reps, seed) = (cfg.model.d, cfg.sizes.n, cfg.sizes.replicates, cfg.run.seed);
    check_memory(cfg, n)?;
    let est = estimate_lambda(&cfg.kernel()?, d, n, reps, seed)?;
    let b = builder(cfg, "lambda", n)?;
    let rows = vec![
        ci_row(&b, "corner_e1", &est.corner_e1),
        ci_row(&b, "corner_ones", &est.corner_ones),
        b.stat("lambda_hat", est.lambda_hat, est.lambda_stderr, reps),
    ];
    let summary = json!({
        "estimate": est,
        "corner_bracket_holds_3se": est.corner_bracket_holds(3.0),
    });
    Ok(Report::new("lambda", rows, summary))
}

fn theta(cfg: &ExperimentConfig) -> Result<Report> {
    let grid = &cfg.sizes.n_grid;
    check_memory(cfg, *grid.iter().max().expect("validated"))?;
    let (series, fit) = lambda_series(&cfg.kernel()?, cfg.model.d, grid, cfg.sizes.replicates, cfg.run.seed)?;
    let b = builder(cfg, "theta", 0)?;
    let mut rows: Vec<Row> = series
        .iter()
        .map(|e| b.with_n(e.n).stat("lambda_hat", e.lambda_hat, e.lambda_stderr, cfg.sizes.replicates))
        .collect();
    rows.push(b.stat("theta_hat", fit.theta_hat, fit.theta_stderr, series.len()));
    rows.push(b.exact("r_squared", fit.r_squared));
    let mut report = Report::new("theta", rows, json!({ "fit": fit, "series": series }));
    if !fit.monotone {
        report.passed = false;
        report.failure = Some(format!("Λ̂ decreases between grid points (min z {:.2})", fit.min_consecutive_z));
    }
    Ok(report)
}

fn submult(cfg: &ExperimentConfig) -> Result<Report> {
    let (m, n) = (cfg.sizes.m, cfg.sizes.n);
    check_memory(cfg, m * n)?;
    let r = check_submultiplicativity(&cfg.kernel()?, cfg.model.d, m, n, cfg.sizes.replicates, cfg.run.seed)?;
    let b = builder(cfg, "submult", m * n)?;
    let reps = cfg.sizes.replicates;
    let rows = vec![
        b.stat("lambda_mn", r.lambda_mn.lambda_hat, r.lambda_mn.lambda_stderr, reps),
        b.stat("lambda_m_times_lambda_n", r.product, r.product_stderr, reps),
        b.exact("z_score", r.z_score),
    ];
    let mut report = Report::new("submult", rows, serde_json::to_value(&r)?);
    if r.z_score > 3.0 {
        report.passed = false;
        report.failure = Some(format!("Λ̂(mn) exceeds Λ̂(m)Λ̂(n) by z = {:.2}", r.z_score));
    }
    Ok(report)
}

fn theta_beta(cfg: &ExperimentConfig) -> Result<Report> {
    let grid = &cfg.sizes.n_grid;
    let d = cfg.model.d;
    let r = theta_vs_beta(cfg.model.family, d, &cfg.model.betas, grid, cfg.sizes.replicates, cfg.run.seed)?;
    let mut rows = Vec::new();
    for row in &r.rows {
        let kernel = KernelSpec::new(cfg.model.family, row.beta)?;
        let b = Row::builder("theta-vs-beta", d, &kernel, 0, cfg.run.seed);
        rows.push(b.stat("theta_hat", row.theta_hat, row.theta_stderr, grid.len()));
        if let Some(p) = row.theta_log_beta {
            rows.push(b.stat("theta_log_beta", p, row.theta_stderr * row.beta.ln(), grid.len()));
        }
    }
    Ok(Report::new("theta-vs-beta", rows, serde_json::to_value(&r)?))
}

fn tail(cfg: &ExperimentConfig) -> Result<Report> {
    let kernel = cfg.kernel()?;
    let (d, n, seed) = (cfg.model.d, cfg.sizes.n, cfg.run.seed);
    check_memory(cfg, n)?;
    let theta = match cfg.sizes.theta {
        Some(t) => t,
        None => lambda_series(&kernel, d, &cfg.sizes.n_grid, 1000.min(cfg.sizes.replicates), seed)?
            .1
            .theta_hat
            .clamp(1e-6, 1.0),
    };
    let t = tail_profile(&kernel, d, n, cfg.sizes.replicates, theta, seed)?;
    let b = builder(cfg, "tail", n)?;
    let reps = cfg.sizes.replicates;
    let mean = t.normalized.iter().sum::<f64>() / t.normalized.len() as f64;
    let mut rows = vec![
        b.exact("theta_used", theta),
        b.stat("normalized_mean", mean, 0.0, reps),
        b.exact("moment_threshold", t.moment_threshold),
        b.exact("divergence_threshold", t.divergence_threshold),
    ];
    if let (Some(eta), Some(se)) = (t.eta_hat, t.eta_stderr) {
        rows.push(b.stat("eta_hat", eta, se, reps));
    }
    let stride = (t.survival.len() / 200).max(1);
    let survival: Vec<_> = t.survival.iter().step_by(stride).collect();
    let summary = json!({
        "n": t.n,
        "theta_hat": t.theta_hat,
        "status": t.status,
        "eta_hat": t.eta_hat,
        "eta_stderr": t.eta_stderr,
        "moment_threshold": t.moment_threshold,
        "divergence_threshold": t.divergence_threshold,
        "survival": survival,
        "deterministic": t.status == TailStatus::Deterministic,
    });
    Ok(Report::new("tail", rows, summary))
}

fn quantiles(cfg: &ExperimentConfig) -> Result<Report> {
    let kernel = cfg.kernel()?;
    let (d, reps, seed, halo) = (cfg.model.d, cfg.sizes.replicates, cfg.run.seed, cfg.sizes.halo);
    let grid = if cfg.sizes.n_grid.is_empty() {
        vec![cfg.sizes.n]
    } else {
        cfg.sizes.n_grid.clone()
    };
    let b = builder(cfg, "quantiles", 0)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &n in &grid {
        check_memory(cfg, (2 * halo + 1) * n)?;
        let lam = estimate_lambda(&kernel, d, n, reps, seed)?;
        let q = quantile_point_to_box(&kernel, d, n, reps, lam.lambda_hat, halo, seed)?;
        let bn = b.with_n(n);
        rows.push(bn.stat("lambda_hat", lam.lambda_hat, lam.lambda_stderr, reps));
        for (tag, band) in [("point", &q.point_to_box), ("box", &q.box_to_box)] {
            rows.push(bn.stat(&format!("{tag}_q01_normalized"), band.normalized_q01, 0.0, reps));
            rows.push(bn.stat(&format!("{tag}_q99_normalized"), band.normalized_q99, 0.0, reps));
        }
        reports.push(q);
    }
    let point: Vec<_> = reports.iter().map(|q| q.point_to_box.clone()).collect();
    let boxes: Vec<_> = reports.iter().map(|q| q.box_to_box.clone()).collect();
    let summary = json!({
        "halo": halo,
        "point_to_box_spread": band_spread(&point),
        "box_to_box_spread": band_spread(&boxes),
        "bands": reports,
    });
    Ok(Report::new("quantiles", rows, summary))
}

fn diameter(cfg: &ExperimentConfig) -> Result<Report> {
    let mode = match cfg.sizes.diameter_sweeps {
        Some(sweeps) => DiameterMode::SampledLowerBound { sweeps },
        None => DiameterMode::Exact {
            cap: cfg.caps.diameter_exact,
        },
    };
    let grid = &cfg.sizes.n_grid;
    check_memory(cfg, *grid.iter().max().expect("validated"))?;
    let s = diameter_scaling(&cfg.kernel()?, cfg.model.d, grid, cfg.sizes.replicates, mode, cfg.run.seed)?;
    let b = builder(cfg, "diameter", 0)?;
    let mut rows: Vec<Row> = s
        .points
        .iter()
        .map(|p| {
            let stat = if p.exact { "diameter" } else { "diameter_lower_bound" };
            ci_row(&b.with_n(p.n), stat, &p.diameter)
        })
        .collect();
    rows.push(b.stat("theta_hat", s.fit.theta_hat, s.fit.theta_stderr, s.points.len()));
    Ok(Report::new("diameter", rows, serde_json::to_value(&s)?))
}

fn compare_kernels(cfg: &ExperimentConfig) -> Result<Report> {
    let (d, n) = (cfg.model.d, cfg.sizes.n);
    let a = cfg.kernel()?;
    let other = KernelSpec::new(cfg.model.compare_family, cfg.model.beta)?;
    check_memory(cfg, n)?;
    let exact_ok = (n as u128).pow(d as u32) <= cfg.caps.diameter_exact as u128;
    let mode = exact_ok.then_some(DiameterMode::Exact {
        cap: cfg.caps.diameter_exact,
    });
    let c = kernel_comparison(&a, &other, d, n, cfg.sizes.replicates, mode, cfg.run.seed)?;
    let b = builder(cfg, "compare-kernels", n)?;
    let reps = cfg.sizes.replicates;
    let mut rows = vec![
        b.stat("corner_ratio_q99", c.corner_ratio_q99, 0.0, reps),
        b.stat("corner_inverse_q99", c.corner_inverse_q99, 0.0, reps),
        b.stat("identical_fraction", c.identical_fraction, 0.0, reps),
    ];
    if let (Some(r), Some(i)) = (c.diameter_ratio_q99, c.diameter_inverse_q99) {
        rows.push(b.stat("diameter_ratio_q99", r, 0.0, reps));
        rows.push(b.stat("diameter_inverse_q99", i, 0.0, reps));
    }
    Ok(Report::new("compare-kernels", rows, serde_json::to_value(&c)?))
}

fn coupling_check(cfg: &ExperimentConfig) -> Result<Report> {
    let (fine, coarse) = (cfg.sizes.scales[0], cfg.sizes.scales[1]);
    let r = scaling_coupling_check(
        cfg.model.d,
        cfg.model.beta,
        cfg.sizes.epsilon,
        fine,
        coarse,
        cfg.sizes.replicates,
        cfg.run.seed,
    )?;
    let b = builder(cfg, "coupling-check", fine)?;
    let rows = vec![
        b.exact("pairs_checked", r.pairs_checked as f64),
        b.exact("violations", r.violations as f64),
        b.exact("max_ratio", r.max_ratio),
    ];
    let mut report = Report::new("coupling-check", rows, serde_json::to_value(&r)?);
    if r.violations > 0 {
        report.passed = false;
        report.failure = Some(format!("{} pairs violate D' <= 3 D", r.violations));
    }
    Ok(report)
}

/// Truncation radius for the expected degree `μ_β`.
pub fn degree_radius(d: usize) -> u32 {
    match d {
        1 => 10_000,
        2 => 128,
        3 => 24,
        _ => 6,
    }
}

fn consets(cfg: &ExperimentConfig) -> Result<Report> {
    let kernel = cfg.kernel()?;
    let (d, n, seed) = (cfg.model.d, cfg.sizes.n, cfg.run.seed);
    check_memory(cfg, n)?;
    let k_max = cfg.sizes.k as usize;
    let mu = expected_degree(&kernel, d, degree_radius(d))?;
    let half = (n / 2) as i64;
    let box_spec = BoxSpec::with_origin(n, vec![-half; d])?;
    let threshold = 20.0 * mu.value;
    let survey = connected_set_survey(&kernel, &box_spec, &vec![0; d], k_max, threshold, cfg.sizes.replicates, seed)?;
    let b = builder(cfg, "consets", n)?;
    let mut rows = vec![b.exact("mu_beta", mu.value)];
    let mut violations = Vec::new();
    for s in &survey {
        let k = s.k as i32;
        let count_bound = (4.0 * mu.value).powi(k);
        let event_bound = (-4.0 * f64::from(k) * mu.value).exp();
        rows.push(ci_row(&b, &format!("count_k{k}"), &s.count));
        rows.push(b.exact(&format!("count_bound_k{k}"), count_bound));
        rows.push(ci_row(&b, &format!("degree_event_k{k}"), &s.degree_event));
        rows.push(b.exact(&format!("degree_event_bound_k{k}"), event_bound));
        if s.count.mean > count_bound + 3.0 * s.count.stderr {
            violations.push(format!("mean |CS_{k}| above 4^k μ^k"));
        }
        if s.degree_event.mean > event_bound + 3.0 * s.degree_event.stderr {
            violations.push(format!("average-degree event too frequent at k = {k}"));
        }
    }
    let mut report = Report::new(
        "consets",
        rows,
        json!({ "mu_beta": mu, "threshold": threshold, "survey": survey }),
    );
    if !violations.is_empty() {
        report.passed = false;
        report.failure = Some(violations.join("; "));
    }
    Ok(report)
}

fn cutpoints(cfg: &ExperimentConfig) -> Result<Report> {
    let (beta, m, w, seed) = (cfg.model.beta, cfg.sizes.n, cfg.sizes.w, cfg.run.seed);
    let s = cut_point_survey(beta, m, w, cfg.sizes.replicates, seed)?;
    let bound = cut_point_count_bound(beta, m)?;
    let b = builder(cfg, "cutpoints", m)?;
    let mut rows = vec![
        ci_row(&b, "cut_at_w", &s.cut_at_w),
        b.exact("cut_at_w_exact", cut_point_probability(beta, m, w)),
        ci_row(&b, "cut_count", &s.cut_count),
        b.exact("cut_count_exact", bound.expected),
        b.exact("cut_count_bound", bound.bound),
    ];
    if let Some(sep) = &s.separation_at_w {
        rows.push(ci_row(&b, "separation_at_w", sep));
        rows.push(b.exact(
            "separation_at_w_exact",
            lrp_core::oracle::exact_separation_probability(beta, m, w)?,
        ));
        rows.push(b.exact("separation_lower_bound", 0.1 * (m as f64).powf(-beta)));
    }
    Ok(Report::new("cutpoints", rows, json!({ "survey": s, "bound": bound })))
}

fn sphere(cfg: &ExperimentConfig) -> Result<Report> {
    let kernel = cfg.kernel()?;
    let (d, k) = (cfg.model.d, cfg.sizes.k);
    let s = sphere_connection_probability(&kernel, d, k, cfg.sizes.replicates, cfg.run.seed)?;
    let b = builder(cfg, "sphere", k as usize)?;
    let mut rows = vec![
        ci_row(&b, "p_sphere", &s.estimate),
        b.exact("bound", s.bound),
        b.exact("truncation_bracket", s.truncation_bracket),
    ];
    if d == 1 && kernel.family == KernelFamily::ExactCube {
        rows.push(b.exact("p_sphere_exact", exact_sphere_probability_d1(kernel.beta, k, None)?));
    }
    Ok(Report::new("sphere", rows, serde_json::to_value(&s)?))
}

/// `{"value": probability}` with values in increasing order.
pub fn law_json(law: &ExactLaw) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for &(v, p) in &law.support {
        map.insert(v.to_string(), json!(p));
    }
    json!({
        "law": map,
        "support": law.support,
        "expectation": law.expectation,
        "second_moment": law.second_moment,
        "configurations": law.configurations,
    })
}

fn oracle(cfg: &ExperimentConfig) -> Result<Report> {
    let kernel = cfg.kernel()?;
    let (d, n) = (cfg.model.d, cfg.sizes.n);
    let box_spec = BoxSpec::new(d, n)?;
    let far = vec![n as i64 - 1; d];
    let dist = exact_expected_distance(&kernel, &box_spec, &vec![0; d], &far, cfg.caps.enumeration)?;
    let dia = exact_diameter_law(&kernel, &box_spec, cfg.caps.enumeration)?;
    let b = builder(cfg, "oracle", n)?;
    let mut rows = vec![
        b.exact("corner_distance_mean", dist.expectation),
        b.exact("corner_distance_second_moment", dist.second_moment),
        b.exact("diameter_mean", dia.expectation),
    ];
    for &(v, p) in &dia.support {
        rows.push(b.exact(&format!("diameter_p{v}"), p));
    }
    let summary = json!({
        "corner_distance": law_json(&dist),
        "diameter": law_json(&dia),
    });
    Ok(Report::new("oracle", rows, summary))
}
