//! Monte Carlo estimators for distance statistics.
//!
//! Replicates run on the rayon pool and are collected in replica order, so
//! every reduction sees the same sequence of numbers whatever the number of
//! workers. Replica `i` at box side `n` always uses the seed
//! `replica_seed(master, purpose, n, i)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{Bfs, DiameterMode, LatticeGraph};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::lattice::BoxSpec;
use crate::rng::{derive_seed, replica_seed, Purpose};
use crate::sampler::{couple_scales, sample_coupled_kernels, sample_poisson_cloud, BoxSampler};
use crate::stats::{covariance, linear_fit, mean_var, quantile_sorted, sorted, z_score, EstimateCI};

/// Smallest replicate count accepted by [`tail_profile`].
pub const MIN_TAIL_REPLICATES: usize = 10_000;
/// Largest relative standard error of a grid point used in exponent fits.
pub const MAX_FIT_REL_STDERR: f64 = 0.05;

/// Runs `f(i, scratch)` for `i in 0..count` in parallel, returning results in
/// index order. Each worker owns one BFS scratch of `scratch` vertices.
pub(crate) fn replicate<T, F>(count: usize, scratch: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Bfs) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map_init(|| Bfs::new(scratch), |bfs, i| f(i, bfs))
        .collect()
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 2 {
        return Err(invalid("at least two replicates are needed for a standard error"));
    }
    Ok(())
}

/// `Λ̂(n)` from the two corner distances `D(0, (n-1)e_1)` and `D(0, (n-1)𝟙)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaEstimate {
    pub d: usize,
    pub n: usize,
    pub kernel: KernelSpec,
    pub corner_e1: EstimateCI,
    pub corner_ones: EstimateCI,
    /// `max(corner means) + 1`.
    pub lambda_hat: f64,
    /// Standard error of the corner attaining the maximum.
    pub lambda_stderr: f64,
}

impl LambdaEstimate {
    /// `E[D(0,(n-1)e_1)] <= 6 E[D(0,(n-1)𝟙)]` up to `k` combined standard errors.
    pub fn corner_bracket_holds(&self, k: f64) -> bool {
        let se = self.corner_e1.stderr.hypot(6.0 * self.corner_ones.stderr);
        self.corner_e1.mean <= 6.0 * self.corner_ones.mean + k * se
    }
}

/// Corner distances `(D(0,(n-1)e_1), D(0,(n-1)𝟙))` for each replicate.
pub fn corner_distances(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    seed: u64,
    purpose: Purpose,
) -> Result<Vec<(u32, u32)>> {
    let box_spec = BoxSpec::new(d, n)?;
    let sampler = BoxSampler::new(*kernel, box_spec.clone())?;
    let mut e1 = vec![false; d];
    e1[0] = true;
    let far_e1 = box_spec.corner_index(&e1);
    let far_ones = box_spec.corner_index(&vec![true; d]);
    Ok(replicate(replicates, box_spec.num_vertices(), |i, bfs| {
        let config = sampler.sample(replica_seed(seed, purpose, n as u64, i as u64));
        let g = LatticeGraph::new(&config);
        bfs.run(&g, &[0], |_| true, |_, _| false, |_| false);
        let a = bfs.get(far_e1).expect("box graphs are connected");
        let b = bfs.get(far_ones).expect("box graphs are connected");
        (a, b)
    }))
}

fn lambda_with_purpose(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    seed: u64,
    purpose: Purpose,
) -> Result<LambdaEstimate> {
    check_replicates(replicates)?;
    let pairs = corner_distances(kernel, d, n, replicates, seed, purpose)?;
    let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    let corner_e1 = EstimateCI::from_samples(format!("D(0,(n-1)e1) n={n}"), &a, seed)?;
    let corner_ones = EstimateCI::from_samples(format!("D(0,(n-1)1) n={n}"), &b, seed)?;
    let top = if corner_e1.mean >= corner_ones.mean {
        &corner_e1
    } else {
        &corner_ones
    };
    Ok(LambdaEstimate {
        d,
        n,
        kernel: *kernel,
        lambda_hat: top.mean + 1.0,
        lambda_stderr: top.stderr,
        corner_e1,
        corner_ones,
    })
}

pub fn estimate_lambda(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<LambdaEstimate> {
    lambda_with_purpose(kernel, d, n, replicates, seed, Purpose::Lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Weighted by inverse delta-method variances of the log values.
    LoglogWls,
    /// Used when some grid point has zero standard error.
    LoglogOls,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaFit {
    pub theta_hat: f64,
    pub theta_stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub method: FitMethod,
    /// `min_n log Λ̂(n) / log n`, an upper estimate of the exponent.
    pub subadditive_inf: f64,
    /// Smallest z-score of `Λ̂(n_{i+1}) - Λ̂(n_i)` over consecutive grid points.
    pub min_consecutive_z: f64,
    /// `min_consecutive_z >= -3`.
    pub monotone: bool,
}

/// Power-law fit of `value ≈ C n^θ` over `(n, value, stderr)` points with
/// `n >= 2`, `value > 0` and relative standard error below
/// [`MAX_FIT_REL_STDERR`].
pub fn fit_power_law(points: &[(usize, f64, f64)]) -> Result<ThetaFit> {
    let mut usable: Vec<(usize, f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(n, v, se)| n >= 2 && v > 0.0 && se / v < MAX_FIT_REL_STDERR)
        .collect();
    if usable.len() < 4 {
        return Err(Error::IllConditioned(format!(
            "{} usable grid points, need at least 4",
            usable.len()
        )));
    }
    usable.sort_by_key(|p| p.0);
    if usable.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::IllConditioned("repeated grid point".into()));
    }
    let x: Vec<f64> = usable.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    let weighted = usable.iter().all(|p| p.2 > 0.0);
    let weights: Vec<f64> = usable.iter().map(|p| (p.1 / p.2).powi(2)).collect();
    let fit = linear_fit(&x, &y, weighted.then_some(weights.as_slice()))?;
    let subadditive_inf = x.iter().zip(&y).map(|(x, y)| y / x).fold(f64::INFINITY, f64::min);
    let min_consecutive_z = usable
        .windows(2)
        .map(|w| z_score(w[1].1 - w[0].1, w[0].2.hypot(w[1].2)))
        .fold(f64::INFINITY, f64::min);
    Ok(ThetaFit {
        theta_hat: fit.slope,
        theta_stderr: fit.slope_stderr,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        residuals: fit.residuals,
        n_grid: usable.iter().map(|p| p.0).collect(),
        method: if weighted {
            FitMethod::LoglogWls
        } else {
            FitMethod::LoglogOls
        },
        subadditive_inf,
        min_consecutive_z,
        monotone: min_consecutive_z >= -3.0,
    })
}

/// Fits `log Λ̂(n)` against `log n`.
pub fn fit_theta(estimates: &[LambdaEstimate]) -> Result<ThetaFit> {
    let points: Vec<_> = estimates
        .iter()
        .map(|e| (e.n, e.lambda_hat, e.lambda_stderr))
        .collect();
    fit_power_law(&points)
}

/// Estimates `Λ̂` over a grid of box sides and fits the exponent.
pub fn lambda_series(
    kernel: &KernelSpec,
    d: usize,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<(Vec<LambdaEstimate>, ThetaFit)> {
    let estimates = n_grid
        .iter()
        .map(|&n| estimate_lambda(kernel, d, n, replicates, seed))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_theta(&estimates)?;
    Ok((estimates, fit))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmultReport {
    pub m: usize,
    pub n: usize,
    pub lambda_mn: LambdaEstimate,
    pub product: f64,
    pub product_stderr: f64,
    /// `(Λ̂(mn) - Λ̂(m) Λ̂(n)) / se`; the inequality predicts `z <= 0` up to
    /// noise.
    pub z_score: f64,
}

/// Compares `Λ̂(mn)` with `Λ̂(m) Λ̂(n)`, estimated from independent streams.
pub fn check_submultiplicativity(
    kernel: &KernelSpec,
    d: usize,
    m: usize,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<SubmultReport> {
    if m < 2 || n < 2 {
        return Err(invalid("submultiplicativity needs m, n >= 2"));
    }
    let big = lambda_with_purpose(kernel, d, m * n, replicates, seed, Purpose::Lambda)?;
    let lm = lambda_with_purpose(kernel, d, m, replicates, seed, Purpose::LambdaSecond)?;
    let (product, product_stderr) = if m == n {
        (lm.lambda_hat * lm.lambda_hat, 2.0 * lm.lambda_hat * lm.lambda_stderr)
    } else {
        let ln = lambda_with_purpose(kernel, d, n, replicates, seed, Purpose::LambdaSecond)?;
        (
            lm.lambda_hat * ln.lambda_hat,
            (ln.lambda_hat * lm.lambda_stderr).hypot(lm.lambda_hat * ln.lambda_stderr),
        )
    };
    let z = z_score(big.lambda_hat - product, big.lambda_stderr.hypot(product_stderr));
    Ok(SubmultReport {
        m,
        n,
        lambda_mn: big,
        product,
        product_stderr,
        z_score: z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaRow {
    pub beta: f64,
    pub theta_hat: f64,
    pub theta_stderr: f64,
    pub r_squared: f64,
    /// `θ̂ log β`, reported for `β >= 2`.
    pub theta_log_beta: Option<f64>,
    /// `true` for the appended `β = 0` row.
    pub reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaVsBeta {
    pub d: usize,
    pub family: KernelFamily,
    pub n_grid: Vec<usize>,
    pub rows: Vec<ThetaRow>,
    /// Smallest `(θ̂_i - θ̂_{i+1}) / se` over adjacent positive `β`.
    pub min_separation_z: f64,
    /// `max / min` of `θ̂ log β` over rows with `β >= 2`.
    pub product_spread: f64,
}

pub fn theta_vs_beta(
    family: KernelFamily,
    d: usize,
    betas: &[f64],
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<ThetaVsBeta> {
    let mut betas: Vec<f64> = betas.to_vec();
    betas.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(betas.len() + 1);
    for (j, &beta) in betas.iter().enumerate() {
        let kernel = KernelSpec::new(family, beta)?;
        let master = derive_seed(seed, Purpose::Generic, j as u64);
        let (_, fit) = lambda_series(&kernel, d, n_grid, replicates, master)?;
        rows.push(ThetaRow {
            beta,
            theta_hat: fit.theta_hat,
            theta_stderr: fit.theta_stderr,
            r_squared: fit.r_squared,
            theta_log_beta: (beta >= 2.0).then(|| fit.theta_hat * beta.ln()),
            reference: false,
        });
    }
    let positive: Vec<&ThetaRow> = rows.iter().filter(|r| r.beta > 0.0).collect();
    let min_separation_z = positive
        .windows(2)
        .map(|w| z_score(w[0].theta_hat - w[1].theta_hat, w[0].theta_stderr.hypot(w[1].theta_stderr)))
        .fold(f64::INFINITY, f64::min);
    let products: Vec<f64> = rows.iter().filter_map(|r| r.theta_log_beta).collect();
    let product_spread = if products.is_empty() {
        1.0
    } else {
        let hi = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    };
    // At β = 0 every distance is deterministic, so two replicates suffice.
    let zero = KernelSpec::new(family, 0.0)?;
    let (_, reference) = lambda_series(&zero, d, n_grid, 2, seed)?;
    rows.push(ThetaRow {
        beta: 0.0,
        theta_hat: reference.theta_hat,
        theta_stderr: 0.0,
        r_squared: reference.r_squared,
        theta_log_beta: None,
        reference: true,
    });
    Ok(ThetaVsBeta {
        d,
        family,
        n_grid: n_grid.to_vec(),
        rows,
        min_separation_z,
        product_spread,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TailStatus {
    Fitted,
    /// All samples coincide; there is no tail to fit.
    Deterministic,
    InsufficientTailMass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProfile {
    pub n: usize,
    pub theta_hat: f64,
    /// Sorted samples of `D(0,(n-1)𝟙) / n^θ̂`.
    pub normalized: Vec<f64>,
    /// `(s, P(S > s))` at each distinct sample value.
    pub survival: Vec<(f64, f64)>,
    pub status: TailStatus,
    /// Slope of `log(-log P(S > s))` against `log s` over the top decile.
    pub eta_hat: Option<f64>,
    pub eta_stderr: Option<f64>,
    /// `1 / (1 - θ̂)`: exponential moments of `S^η` are finite below it.
    pub moment_threshold: f64,
    /// `d / (1 - θ̂)`: exponential moments diverge above it.
    pub divergence_threshold: f64,
}

/// Empirical survival function at each distinct value of sorted data.
pub fn survival(sorted: &[f64]) -> Vec<(f64, f64)> {
    let total = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push((sorted[i], (sorted.len() - j) as f64 / total));
        i = j;
    }
    out
}

/// Stretched-exponential fit of the upper decile of `samples`.
pub fn fit_tail(samples: &[f64]) -> (TailStatus, Option<(f64, f64)>) {
    let s = sorted(samples);
    if s.first() == s.last() {
        return (TailStatus::Deterministic, None);
    }
    let cut = quantile_sorted(&s, 0.9);
    let tail_count = s.iter().filter(|&&v| v >= cut).count();
    let pts: Vec<(f64, f64)> = survival(&s)
        .into_iter()
        .filter(|&(v, g)| v >= cut && v > 0.0 && g > 0.0)
        .map(|(v, g)| (v.ln(), (-g.ln()).ln()))
        .collect();
    if tail_count < 100 || pts.len() < 3 {
        return (TailStatus::InsufficientTailMass, None);
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    match linear_fit(&x, &y, None) {
        Ok(f) => (TailStatus::Fitted, Some((f.slope, f.slope_stderr))),
        Err(_) => (TailStatus::InsufficientTailMass, None),
    }
}

pub fn tail_profile(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    theta_hat: f64,
    seed: u64,
) -> Result<TailProfile> {
    if replicates < MIN_TAIL_REPLICATES {
        return Err(invalid(format!(
            "tail profiles need at least {MIN_TAIL_REPLICATES} replicates, got {replicates}"
        )));
    }
    if !(theta_hat > 0.0 && theta_hat < 1.0 + 1e-9) {
        return Err(invalid(format!("exponent {theta_hat} outside (0, 1]")));
    }
    let scale = (n as f64).powf(theta_hat);
    let pairs = corner_distances(kernel, d, n, replicates, seed, Purpose::Tail)?;
    let normalized = sorted(&pairs.iter().map(|p| p.1 as f64 / scale).collect::<Vec<_>>());
    let (status, fit) = fit_tail(&normalized);
    let gap = (1.0 - theta_hat).max(f64::MIN_POSITIVE);
    Ok(TailProfile {
        n,
        theta_hat,
        survival: survival(&normalized),
        normalized,
        status,
        eta_hat: fit.map(|f| f.0),
        eta_stderr: fit.map(|f| f.1),
        moment_threshold: 1.0 / gap,
        divergence_threshold: d as f64 / gap,
    })
}

/// Empirical `E[exp(t S^power)]`.
pub fn stretched_moment(samples: &[f64], t: f64, power: f64) -> f64 {
    samples.iter().map(|s| (t * s.powf(power)).exp()).sum::<f64>() / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileBand {
    pub n: usize,
    pub lambda_hat: f64,
    pub q01: f64,
    pub q99: f64,
    pub normalized_q01: f64,
    pub normalized_q99: f64,
}

impl QuantileBand {
    fn from_samples(n: usize, lambda_hat: f64, samples: &[f64]) -> Self {
        let s = sorted(samples);
        let q01 = quantile_sorted(&s, 0.01);
        let q99 = quantile_sorted(&s, 0.99);
        Self {
            n,
            lambda_hat,
            q01,
            q99,
            normalized_q01: q01 / lambda_hat,
            normalized_q99: q99 / lambda_hat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileReport {
    /// `D(0, B_n(0)^C)` in the window `B_{halo·n}(0)`.
    pub point_to_box: QuantileBand,
    /// `D*(V_0^n, B_n(V_0^n)^C)` in the window `{-halo·n, .., (halo+1)n - 1}^d`.
    pub box_to_box: QuantileBand,
    pub halo: usize,
}

/// Largest `max / min` ratio of the normalised 1% and 99% quantiles across
/// bands; `1` means perfectly stable.
pub fn band_spread(bands: &[QuantileBand]) -> f64 {
    let ratio = |f: fn(&QuantileBand) -> f64| {
        let hi = bands.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let lo = bands.iter().map(f).fold(f64::INFINITY, f64::min);
        hi / lo
    };
    ratio(|b| b.normalized_q01).max(ratio(|b| b.normalized_q99))
}

/// Quantiles of point-to-box and box-to-box distances, normalised by
/// `lambda_hat`. The window is finite, so long edges leaving it are lost;
/// `halo` controls how far it extends.
pub fn quantile_point_to_box(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    lambda_hat: f64,
    halo: usize,
    seed: u64,
) -> Result<QuantileReport> {
    check_replicates(replicates)?;
    if n == 0 || halo < 2 {
        return Err(invalid("quantiles need n >= 1 and halo >= 2"));
    }
    let ni = n as i64;
    let window = BoxSpec::ball(&vec![0; d], halo * n)?;
    let sampler = BoxSampler::new(*kernel, window.clone())?;
    let origin = window.index_of(&vec![0; d])?;
    let outside: Vec<bool> = (0..window.num_vertices())
        .map(|v| window.coords(v).iter().any(|c| c.abs() > ni))
        .collect();
    let point: Vec<f64> = replicate(replicates, window.num_vertices(), |i, bfs| {
        let config = sampler.sample(replica_seed(seed, Purpose::Quantiles, n as u64, i as u64));
        let g = LatticeGraph::new(&config);
        bfs.run(&g, &[origin], |_| true, |_, _| false, |w| outside[w])
            .expect("window is connected") as f64
    });

    let side = (2 * halo + 1) * n;
    let wide = BoxSpec::with_origin(side, vec![-((halo * n) as i64); d])?;
    let wide_sampler = BoxSampler::new(*kernel, wide.clone())?;
    let mut in_a = vec![false; wide.num_vertices()];
    let mut in_b = vec![false; wide.num_vertices()];
    let mut sources = Vec::new();
    for v in 0..wide.num_vertices() {
        let x = wide.coords(v);
        if x.iter().all(|&c| (0..ni).contains(&c)) {
            in_a[v] = true;
            sources.push(v);
        }
        in_b[v] = x.iter().any(|&c| c < -ni || c >= 2 * ni);
    }
    let boxes: Vec<f64> = replicate(replicates, wide.num_vertices(), |i, bfs| {
        let config = wide_sampler.sample(replica_seed(seed, Purpose::BoxToBox, n as u64, i as u64));
        let g = LatticeGraph::new(&config);
        let hit = bfs.run(&g, &sources, |_| true, |a, b| in_a[a] && in_b[b], |w| in_b[w]);
        hit.expect("the annulus connects the two sets") as f64
    });
    Ok(QuantileReport {
        point_to_box: QuantileBand::from_samples(n, lambda_hat, &point),
        box_to_box: QuantileBand::from_samples(n, lambda_hat, &boxes),
        halo,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRatio {
    pub n: usize,
    pub order: u32,
    /// `E[D^r] / E[D]^r`.
    pub ratio: f64,
    /// Delta-method standard error.
    pub stderr: f64,
    pub replicates: usize,
}

/// `E[X^r] / E[X]^r` with a delta-method standard error.
pub fn moment_ratio_from_samples(n: usize, samples: &[f64], order: u32) -> Result<MomentRatio> {
    check_replicates(samples.len())?;
    let r = order as i32;
    let powered: Vec<f64> = samples.iter().map(|x| x.powi(r)).collect();
    let (m1, v1) = mean_var(samples);
    let (mr, vr) = mean_var(&powered);
    if m1 <= 0.0 {
        return Err(invalid("moment ratio needs a positive mean"));
    }
    let ratio = mr / m1.powi(r);
    let ga = 1.0 / m1.powi(r);
    let gb = -(order as f64) * mr / m1.powi(r + 1);
    let cov = covariance(&powered, samples);
    let var = (ga * ga * vr + 2.0 * ga * gb * cov + gb * gb * v1).max(0.0);
    Ok(MomentRatio {
        n,
        order,
        ratio,
        stderr: (var / samples.len() as f64).sqrt(),
        replicates: samples.len(),
    })
}

/// Moment ratio of the corner distance `D(0,(n-1)𝟙)`.
pub fn moment_ratio(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    order: u32,
    seed: u64,
) -> Result<MomentRatio> {
    if !matches!(order, 2 | 4) {
        return Err(invalid(format!("moment order must be 2 or 4, got {order}")));
    }
    let pairs = corner_distances(kernel, d, n, replicates, seed, Purpose::Moments)?;
    let samples: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    moment_ratio_from_samples(n, &samples, order)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTrend {
    pub ratios: Vec<MomentRatio>,
    /// Slope of `log ratio` against `log n`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub z_score: f64,
}

pub fn moment_trend(ratios: Vec<MomentRatio>) -> Result<MomentTrend> {
    let x: Vec<f64> = ratios.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = ratios.iter().map(|r| r.ratio.ln()).collect();
    let weighted = ratios.iter().all(|r| r.stderr > 0.0);
    let w: Vec<f64> = ratios.iter().map(|r| (r.ratio / r.stderr).powi(2)).collect();
    let fit = linear_fit(&x, &y, weighted.then_some(w.as_slice()))?;
    Ok(MomentTrend {
        z_score: z_score(fit.slope, fit.slope_stderr),
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterPoint {
    pub n: usize,
    pub diameter: EstimateCI,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiameterScaling {
    pub points: Vec<DiameterPoint>,
    /// Box sides left out of the fit (`n = 1`, where the diameter is 0).
    pub excluded: Vec<usize>,
    /// Power-law fit of `E[dia] + 1`.
    pub fit: ThetaFit,
}

pub fn diameter_scaling(
    kernel: &KernelSpec,
    d: usize,
    n_grid: &[usize],
    replicates: usize,
    mode: DiameterMode,
    seed: u64,
) -> Result<DiameterScaling> {
    check_replicates(replicates)?;
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for &n in n_grid {
        if n < 2 {
            excluded.push(n);
            continue;
        }
        let box_spec = BoxSpec::new(d, n)?;
        let sampler = BoxSampler::new(*kernel, box_spec.clone())?;
        let values = replicate(replicates, 0, |i, _| {
            let config = sampler.sample(replica_seed(seed, Purpose::Diameter, n as u64, i as u64));
            LatticeGraph::new(&config).diameter(mode)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let samples: Vec<f64> = values.iter().map(|v| v.value as f64).collect();
        points.push(DiameterPoint {
            n,
            diameter: EstimateCI::from_samples(format!("dia n={n}"), &samples, seed)?,
            exact: values.iter().all(|v| v.exact),
        });
    }
    let fit_points: Vec<_> = points
        .iter()
        .map(|p| (p.n, p.diameter.mean + 1.0, p.diameter.stderr))
        .collect();
    Ok(DiameterScaling {
        fit: fit_power_law(&fit_points)?,
        points,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelComparison {
    pub d: usize,
    pub n: usize,
    pub kernel_a: KernelSpec,
    pub kernel_b: KernelSpec,
    /// 99% quantiles of `D_A / D_B` and `D_B / D_A` for the corner pair.
    pub corner_ratio_q99: f64,
    pub corner_inverse_q99: f64,
    pub diameter_ratio_q99: Option<f64>,
    pub diameter_inverse_q99: Option<f64>,
    /// Fraction of replicates whose two configurations coincide.
    pub identical_fraction: f64,
}

/// Distances under two kernels on Harris-coupled configurations.
pub fn kernel_comparison(
    kernel_a: &KernelSpec,
    kernel_b: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    diameter: Option<DiameterMode>,
    seed: u64,
) -> Result<KernelComparison> {
    check_replicates(replicates)?;
    if kernel_a.beta != kernel_b.beta {
        return Err(invalid("compared kernels must share beta"));
    }
    if n < 2 {
        return Err(invalid("kernel comparison needs n >= 2"));
    }
    let box_spec = BoxSpec::new(d, n)?;
    let far = box_spec.corner_index(&vec![true; d]);
    type Row = (f64, f64, Option<(f64, f64)>, bool);
    let rows: Vec<Result<Row>> = replicate(replicates, 0, |i, _| {
        let s = replica_seed(seed, Purpose::KernelComparison, n as u64, i as u64);
        let (a, b) = sample_coupled_kernels(kernel_a, kernel_b, &box_spec, s)?;
        let same = a.edges() == b.edges();
        let (ga, gb) = (LatticeGraph::new(&a), LatticeGraph::new(&b));
        let da = ga.distance_between(0, far) as f64;
        let db = gb.distance_between(0, far) as f64;
        let dia = match diameter {
            Some(mode) => Some((ga.diameter(mode)?.value as f64, gb.diameter(mode)?.value as f64)),
            None => None,
        };
        Ok((da, db, dia, same))
    });
    let rows = rows.into_iter().collect::<Result<Vec<Row>>>()?;
    let q99 = |v: Vec<f64>| quantile_sorted(&sorted(&v), 0.99);
    let corner_ratio_q99 = q99(rows.iter().map(|r| r.0 / r.1).collect());
    let corner_inverse_q99 = q99(rows.iter().map(|r| r.1 / r.0).collect());
    let (diameter_ratio_q99, diameter_inverse_q99) = if diameter.is_some() {
        let dia: Vec<(f64, f64)> = rows.iter().map(|r| r.2.expect("diameter requested")).collect();
        (
            Some(q99(dia.iter().map(|p| p.0 / p.1).collect())),
            Some(q99(dia.iter().map(|p| p.1 / p.0).collect())),
        )
    } else {
        (None, None)
    };
    Ok(KernelComparison {
        d,
        n,
        kernel_a: *kernel_a,
        kernel_b: *kernel_b,
        corner_ratio_q99,
        corner_inverse_q99,
        diameter_ratio_q99,
        diameter_inverse_q99,
        identical_fraction: rows.iter().filter(|r| r.3).count() as f64 / replicates as f64,
    })
}

/// Mean degree of the centre vertex of an odd box.
pub fn center_degree(
    kernel: &KernelSpec,
    d: usize,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<EstimateCI> {
    check_replicates(replicates)?;
    if n.is_multiple_of(2) {
        return Err(invalid("the centre vertex needs an odd box side"));
    }
    let box_spec = BoxSpec::new(d, n)?;
    let sampler = BoxSampler::new(*kernel, box_spec.clone())?;
    let center = box_spec.index_of(&vec![(n / 2) as i64; d])?;
    let degrees: Vec<f64> = replicate(replicates, 0, |i, _| {
        let config = sampler.sample(replica_seed(seed, Purpose::Degree, n as u64, i as u64));
        LatticeGraph::new(&config).degree(center) as f64
    });
    EstimateCI::from_samples(format!("deg(center) n={n}"), &degrees, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingReport {
    pub d: usize,
    pub beta: f64,
    pub fine: usize,
    pub coarse: usize,
    pub clouds: usize,
    /// Ordered vertex pairs checked over all clouds.
    pub pairs_checked: u64,
    /// Pairs with `D'(u', v') > 3 D(u, v)`.
    pub violations: u64,
    /// Largest `D'(u', v') / D(u, v)` over pairs with `u != v`.
    pub max_ratio: f64,
}

/// Checks `D'(⌊(n'/n)u⌋, ⌊(n'/n)v⌋) <= 3 D(u, v)` for every vertex pair of
/// the fine scale `n`, on shared clouds discretised at `n` and `n' <= n`.
pub fn scaling_coupling_check(
    d: usize,
    beta: f64,
    epsilon: f64,
    fine: usize,
    coarse: usize,
    clouds: usize,
    seed: u64,
) -> Result<CouplingReport> {
    if coarse == 0 || coarse > fine {
        return Err(invalid("need 1 <= coarse <= fine"));
    }
    let fine_box = BoxSpec::new(d, fine)?;
    let coarse_box = BoxSpec::new(d, coarse)?;
    let nv = fine_box.num_vertices();
    let project: Vec<usize> = (0..nv)
        .map(|v| {
            let x: Vec<i64> = fine_box
                .coords(v)
                .iter()
                .map(|&c| ((c as usize * coarse) / fine) as i64)
                .collect();
            coarse_box.index_of(&x).expect("projection stays in the coarse box")
        })
        .collect();
    let rows: Vec<Result<(u64, u64, f64)>> = replicate(clouds, nv, |i, bfs| {
        let s = replica_seed(seed, Purpose::Coupling, fine as u64, i as u64);
        let cloud = sample_poisson_cloud(d, beta, epsilon, s)?;
        let scales = couple_scales(&cloud, &[fine, coarse])?;
        let g = LatticeGraph::new(&scales[0]);
        let h = LatticeGraph::new(&scales[1]);
        let coarse_dist: Vec<Vec<u32>> = (0..coarse_box.num_vertices()).map(|a| h.distances_from(a)).collect();
        let (mut checked, mut bad, mut worst) = (0u64, 0u64, 0f64);
        for a in 0..nv {
            bfs.run(&g, &[a], |_| true, |_, _| false, |_| false);
            for b in 0..nv {
                let df = bfs.get(b).expect("box graphs are connected");
                let dc = coarse_dist[project[a]][project[b]];
                checked += 1;
                if dc > 3 * df {
                    bad += 1;
                }
                if df > 0 {
                    worst = worst.max(f64::from(dc) / f64::from(df));
                }
            }
        }
        Ok((checked, bad, worst))
    });
    let mut report = CouplingReport {
        d,
        beta,
        fine,
        coarse,
        clouds,
        pairs_checked: 0,
        violations: 0,
        max_ratio: 0.0,
    };
    for r in rows {
        let (c, b, w) = r?;
        report.pairs_checked += c;
        report.violations += b;
        report.max_ratio = report.max_ratio.max(w);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_lambda_is_n() {
        let e = estimate_lambda(&KernelSpec::exact(0.0), 2, 9, 4, 1).unwrap();
        assert_eq!(e.lambda_hat, 9.0);
        assert_eq!(e.lambda_stderr, 0.0);
        let one = estimate_lambda(&KernelSpec::exact(3.0), 1, 1, 2, 1).unwrap();
        assert_eq!(one.lambda_hat, 1.0);
    }

    #[test]
    fn power_law_recovered_exactly() {
        let pts: Vec<_> = [4usize, 8, 16, 32, 64]
            .iter()
            .map(|&n| (n, (n as f64).powf(0.7), 0.0))
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.theta_hat - 0.7).abs() < 1e-12);
        assert_eq!(f.method, FitMethod::LoglogOls);
        assert!(fit_power_law(&pts[..3]).is_err());
    }

    #[test]
    fn noisy_points_are_dropped() {
        let mut pts: Vec<_> = [4usize, 8, 16, 32].iter().map(|&n| (n, n as f64, 0.01)).collect();
        pts[0].2 = 1.0;
        assert!(fit_power_law(&pts).is_err());
    }

    #[test]
    fn moment_ratio_of_constant_is_one() {
        let m = moment_ratio_from_samples(8, &[3.0; 10], 2).unwrap();
        assert_eq!(m.ratio, 1.0);
        assert_eq!(m.stderr, 0.0);
        let m = moment_ratio_from_samples(8, &[1.0, 3.0], 2).unwrap();
        assert!((m.ratio - 1.25).abs() < 1e-15);
    }

    #[test]
    fn deterministic_tail_is_flagged() {
        assert_eq!(fit_tail(&[2.0; 500]).0, TailStatus::Deterministic);
        let few: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
        assert_eq!(fit_tail(&few).0, TailStatus::InsufficientTailMass);
    }

    #[test]
    fn survival_steps() {
        let s = survival(&[1.0, 1.0, 2.0, 5.0]);
        assert_eq!(s, vec![(1.0, 0.5), (2.0, 0.25), (5.0, 0.0)]);
    }
}
