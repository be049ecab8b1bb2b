//! Structural statistics: sphere connections, connected sets containing a
//! vertex, conditioned edge counts between blocks, and cut and separation
//! points on the line.

use rand::RngCore;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::estimators::replicate;
use crate::graph::LatticeGraph;
use crate::kernel::KernelSpec;
use crate::lattice::{sup_norm, BoxSpec};
use crate::rng::{open01, replica_seed, stream, Purpose};
use crate::sampler::{BoxSampler, Configuration};
use crate::stats::EstimateCI;

/// Largest set size accepted by [`enumerate_connected_sets`].
pub const MAX_CONNECTED_SET_SIZE: usize = 6;
/// Largest number of cell pairs accepted by [`conditioned_edge_count`].
pub const MAX_CONDITIONED_PAIRS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereEstimate {
    pub d: usize,
    pub k: u64,
    pub estimate: EstimateCI,
    /// Edges from the origin reaching beyond this sup-norm radius are not
    /// sampled.
    pub window_radius: u64,
    /// `β 50^d (R+1)^{-d}`: the omitted probability lies in `[0, this]`.
    pub truncation_bracket: f64,
    /// `β 50^d k^{-d}`.
    pub bound: f64,
}

fn default_window(d: usize, k: u64) -> u64 {
    let wide = 1u64 << (24 / d.max(1)).min(40);
    wide.max(4 * k)
}

/// Whether the origin has an open edge to some `x` with
/// `k <= |x|_∞ <= radius`. Shells `[a, 2a)` are swept with the envelope
/// `min(1, 4^d β a^{-2d})`, which dominates every kernel family on the
/// shell, and proposals are thinned to the true probability.
fn origin_reaches(kernel: &KernelSpec, d: usize, k: u64, radius: u64, rng: &mut impl RngCore) -> bool {
    let mut x = vec![0i64; d];
    let mut a = k;
    while a <= radius {
        let b = (2 * a).min(radius + 1);
        let side = 2 * b - 1;
        let count = side.pow(d as u32) as f64;
        let q = (4f64.powi(d as i32) * kernel.beta * (a as f64).powi(-2 * d as i32)).min(1.0);
        if q > 0.0 {
            let ln_closed = (-q).ln_1p();
            let skip = |rng: &mut dyn RngCore| {
                if q >= 1.0 {
                    0.0
                } else {
                    (open01(rng.next_u64()).ln() / ln_closed).floor()
                }
            };
            let mut j = skip(rng);
            while j < count {
                let mut rem = j as u64;
                for c in x.iter_mut().rev() {
                    *c = (rem % side) as i64 - (b as i64 - 1);
                    rem /= side;
                }
                if sup_norm(&x) >= a {
                    let p = kernel.probability(&x);
                    if open01(rng.next_u64()) * q < p {
                        return true;
                    }
                }
                j += 1.0 + skip(rng);
            }
        }
        a = b;
    }
    false
}

/// Monte Carlo estimate of `P(0 ∼ S_{>=k})`, the probability that the origin
/// has an open edge to some vertex at sup-norm distance at least `k`.
pub fn sphere_connection_probability(
    kernel: &KernelSpec,
    d: usize,
    k: u64,
    replicates: usize,
    seed: u64,
) -> Result<SphereEstimate> {
    sphere_connection_in_window(kernel, d, k, default_window(d, k), replicates, seed)
}

pub fn sphere_connection_in_window(
    kernel: &KernelSpec,
    d: usize,
    k: u64,
    window_radius: u64,
    replicates: usize,
    seed: u64,
) -> Result<SphereEstimate> {
    if k < 2 {
        return Err(invalid("sphere radius must be >= 2"));
    }
    if window_radius < 4 * k {
        return Err(invalid("window radius must be at least 4k"));
    }
    if (2 * window_radius + 1).checked_pow(d as u32).is_none_or(|c| c > 1 << 52) {
        return Err(Error::CapExceeded {
            what: "sphere window cells",
            requested: (2 * window_radius as u128 + 1).pow(d as u32),
            limit: 1 << 52,
        });
    }
    let hits: Vec<f64> = replicate(replicates, 0, |i, _| {
        let mut rng = stream(
            replica_seed(seed, Purpose::Sphere, k, i as u64),
            Purpose::Sphere,
            0,
        );
        f64::from(u8::from(origin_reaches(kernel, d, k, window_radius, &mut rng)))
    });
    let di = d as i32;
    Ok(SphereEstimate {
        d,
        k,
        estimate: EstimateCI::from_samples(format!("P(0 ~ S>={k})"), &hits, seed)?,
        window_radius,
        truncation_bracket: kernel.beta * 50f64.powi(di) * (window_radius as f64 + 1.0).powi(-di),
        bound: kernel.beta * 50f64.powi(di) * (k as f64).powi(-di),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectedSetReport {
    pub k: usize,
    /// Number of connected vertex sets of size `k` containing the root.
    pub count: u64,
    /// Largest `Σ deg / k` over those sets.
    pub max_avg_degree: f64,
}

impl ConnectedSetReport {
    /// Whether some counted set has average degree at least `threshold`.
    pub fn degree_event(&self, threshold: f64) -> bool {
        self.max_avg_degree >= threshold
    }
}

struct SetEnumerator<'a> {
    g: &'a LatticeGraph,
    k_max: usize,
    blocked: Vec<bool>,
    degree: Vec<f64>,
    counts: Vec<u64>,
    max_avg: Vec<f64>,
}

impl SetEnumerator<'_> {
    /// Each call decides the candidates in `ext` one by one: the popped
    /// vertex is either added (recursion) or excluded for good (it stays
    /// blocked), so every connected set is reached along exactly one branch.
    fn extend(&mut self, size: usize, degree_sum: f64, mut ext: Vec<usize>) {
        self.counts[size] += 1;
        let avg = degree_sum / size as f64;
        if avg > self.max_avg[size] {
            self.max_avg[size] = avg;
        }
        if size == self.k_max {
            return;
        }
        while let Some(w) = ext.pop() {
            let mut added = Vec::new();
            let blocked = &mut self.blocked;
            self.g.for_each_neighbor(w, |u| {
                if !blocked[u] {
                    blocked[u] = true;
                    added.push(u);
                }
            });
            let mut next = ext.clone();
            next.extend_from_slice(&added);
            self.extend(size + 1, degree_sum + self.degree[w], next);
            for u in added {
                self.blocked[u] = false;
            }
        }
    }
}

/// Counts connected vertex sets of each size `1..=k_max` containing `root`.
pub fn enumerate_connected_sets(
    g: &LatticeGraph,
    root: usize,
    k_max: usize,
) -> Result<Vec<ConnectedSetReport>> {
    if k_max > MAX_CONNECTED_SET_SIZE {
        return Err(Error::CapExceeded {
            what: "connected set size",
            requested: k_max as u128,
            limit: MAX_CONNECTED_SET_SIZE as u128,
        });
    }
    if root >= g.num_vertices() {
        return Err(Error::OutsideBox(vec![root as i64]));
    }
    if k_max == 0 {
        return Ok(Vec::new());
    }
    let nv = g.num_vertices();
    let mut e = SetEnumerator {
        g,
        k_max,
        blocked: vec![false; nv],
        degree: (0..nv).map(|v| g.degree(v) as f64).collect(),
        counts: vec![0; k_max + 1],
        max_avg: vec![0.0; k_max + 1],
    };
    e.blocked[root] = true;
    let mut ext = Vec::new();
    g.for_each_neighbor(root, |u| ext.push(u));
    for &u in &ext {
        e.blocked[u] = true;
    }
    e.extend(1, e.degree[root], ext);
    Ok((1..=k_max)
        .map(|k| ConnectedSetReport {
            k,
            count: e.counts[k],
            max_avg_degree: e.max_avg[k],
        })
        .collect())
}

/// Law of a sum of independent Bernoulli variables, `law[j] = P(X = j)`.
pub fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut law = vec![0.0; probs.len() + 1];
    law[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        for j in (0..=i + 1).rev() {
            let stay = law[j] * (1.0 - p);
            let step = if j > 0 { law[j - 1] * p } else { 0.0 };
            law[j] = stay + step;
        }
    }
    law
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedEdgeCount {
    /// `E[X]` for `X` the number of open edges between the two blocks.
    pub mean: f64,
    /// `E[X | X >= 1]`; `None` when `X = 0` almost surely.
    pub conditional_mean: Option<f64>,
    pub law: Vec<f64>,
}

impl ConditionedEdgeCount {
    pub fn from_probabilities(probs: &[f64]) -> Self {
        let law = poisson_binomial(probs);
        let mean: f64 = probs.iter().sum();
        let positive = 1.0 - law[0];
        let conditional_mean = (positive > 0.0).then(|| {
            law.iter().enumerate().skip(1).map(|(j, p)| j as f64 * p).sum::<f64>() / positive
        });
        Self {
            mean,
            conditional_mean,
            law,
        }
    }

    /// `E[X | X >= 1] <= 1 + E[X]`.
    pub fn bound_holds(&self) -> bool {
        self.conditional_mean.is_none_or(|c| c <= 1.0 + self.mean + 1e-12)
    }
}

/// Exact law of the number of open edges between the blocks
/// `n u + {0..n-1}^d` and `n v + {0..n-1}^d`.
pub fn conditioned_edge_count(
    kernel: &KernelSpec,
    block_u: &[i64],
    block_v: &[i64],
    n: usize,
) -> Result<ConditionedEdgeCount> {
    let d = block_u.len();
    if block_v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: block_v.len(),
        });
    }
    if block_u == block_v {
        return Err(Error::OverlappingSets);
    }
    let cells = n.checked_pow(d as u32).unwrap_or(usize::MAX);
    let pairs = cells.saturating_mul(cells);
    if pairs > MAX_CONDITIONED_PAIRS {
        return Err(Error::CapExceeded {
            what: "block cell pairs",
            requested: pairs as u128,
            limit: MAX_CONDITIONED_PAIRS as u128,
        });
    }
    let local = |mut i: usize| {
        let mut c = vec![0i64; d];
        for x in c.iter_mut().rev() {
            *x = (i % n) as i64;
            i /= n;
        }
        c
    };
    let mut probs = Vec::with_capacity(pairs);
    let mut offset = vec![0i64; d];
    for a in 0..cells {
        let x = local(a);
        for b in 0..cells {
            let y = local(b);
            for i in 0..d {
                offset[i] = n as i64 * (block_v[i] - block_u[i]) + y[i] - x[i];
            }
            probs.push(kernel.probability(&offset));
        }
    }
    Ok(ConditionedEdgeCount::from_probabilities(&probs))
}

fn require_line(config: &Configuration) -> Result<usize> {
    if config.box_spec.d != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: config.box_spec.d,
        });
    }
    Ok(config.box_spec.n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutPointReport {
    pub m: usize,
    /// Interior positions `w` with no open edge `{u, v}`, `u < w < v`.
    pub positions: Vec<usize>,
}

impl CutPointReport {
    pub fn count(&self) -> usize {
        self.positions.len()
    }
}

/// Cut points of a configuration on `{0, .., m-1}`, by a prefix maximum of
/// right endpoints.
pub fn cut_points_d1(config: &Configuration) -> Result<CutPointReport> {
    let m = require_line(config)?;
    let edges = config.edges();
    let mut positions = Vec::new();
    let mut reach = 0usize;
    let mut next = 0;
    for w in 1..m.saturating_sub(1) {
        while next < edges.len() && edges[next].0 < w {
            reach = reach.max(edges[next].1);
            next += 1;
        }
        if reach <= w {
            positions.push(w);
        }
    }
    Ok(CutPointReport { m, positions })
}

/// Cut points by checking every edge against every position.
pub fn cut_points_naive(config: &Configuration) -> Result<Vec<usize>> {
    let m = require_line(config)?;
    Ok((1..m.saturating_sub(1))
        .filter(|&w| !config.edges().iter().any(|&(u, v)| u < w && w < v))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutPointBound {
    pub beta: f64,
    pub m: usize,
    /// `Σ_{w=1}^{m-2} ((w+1)(m-w)/m)^{-β}`.
    pub expected: f64,
    pub bound: f64,
    pub branch: &'static str,
    /// The bound is derived for `β <= 2`; larger `β` use the constant branch.
    pub derived_range: bool,
}

impl CutPointBound {
    pub fn holds(&self) -> bool {
        self.expected <= self.bound
    }
}

/// Probability that `w` is a cut point of `{0, .., m-1}` under the exact
/// kernel.
pub fn cut_point_probability(beta: f64, m: usize, w: usize) -> f64 {
    let (w, m) = (w as f64, m as f64);
    ((w + 1.0) * (m - w) / m).powf(-beta)
}

pub fn cut_point_count_bound(beta: f64, m: usize) -> Result<CutPointBound> {
    if !(beta.is_finite() && beta >= 0.0) || m < 3 {
        return Err(invalid("need beta >= 0 and m >= 3"));
    }
    let expected = (1..m - 1).map(|w| cut_point_probability(beta, m, w)).sum();
    let mf = m as f64;
    let (bound, branch) = if beta < 1.0 {
        (20.0 / (1.0 - beta) * mf.powf(1.0 - beta), "20/(1-beta) m^(1-beta)")
    } else if beta <= 2.0 {
        (10.0 + 8.0 * mf.ln(), "10 + 8 ln m")
    } else {
        (20.0, "20")
    };
    Ok(CutPointBound {
        beta,
        m,
        expected,
        bound,
        branch,
        derived_range: beta <= 2.0,
    })
}

/// Odd block indices `w in 1..M-1` (with `M = m / block`) whose block
/// `V_w` has no long edge to blocks at distance >= 2 and which no long edge
/// jumps over. With `block = 1` these are the separation points.
pub fn separation_points_d1(config: &Configuration, block: usize) -> Result<Vec<usize>> {
    let m = require_line(config)?;
    if block == 0 || m % block != 0 {
        return Err(invalid("block scale must divide the segment length"));
    }
    let blocks = m / block;
    if blocks < 3 {
        return Ok(Vec::new());
    }
    // killed[w] counts violated conditions; a difference array handles the
    // jumped-over ranges.
    let mut jump = vec![0i64; blocks + 1];
    let mut touched = vec![false; blocks];
    for &(a, b) in config.edges() {
        let (ba, bb) = (a / block, b / block);
        if bb >= ba + 2 {
            jump[ba + 1] += 1;
            jump[bb] -= 1;
            touched[ba] = true;
            touched[bb] = true;
        }
    }
    let mut out = Vec::new();
    let mut run = 0i64;
    for (w, &delta) in jump.iter().enumerate().take(blocks - 1) {
        run += delta;
        if w >= 1 && w % 2 == 1 && run == 0 && !touched[w] {
            out.push(w);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectedSetSurvey {
    pub k: usize,
    /// Number of connected `k`-sets containing the root.
    pub count: EstimateCI,
    /// Indicator that some such set has average degree `>= threshold`.
    pub degree_event: EstimateCI,
    pub threshold: f64,
}

/// Connected-set counts around `root` over independent configurations of
/// `box_spec`, for every size `1..=k_max`.
pub fn connected_set_survey(
    kernel: &KernelSpec,
    box_spec: &BoxSpec,
    root: &[i64],
    k_max: usize,
    threshold: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<ConnectedSetSurvey>> {
    let r = box_spec.index_of(root)?;
    let sampler = BoxSampler::new(*kernel, box_spec.clone())?;
    let rows: Vec<Result<Vec<ConnectedSetReport>>> = replicate(replicates, 0, |i, _| {
        let config = sampler.sample(replica_seed(seed, Purpose::ConnectedSets, box_spec.n as u64, i as u64));
        enumerate_connected_sets(&LatticeGraph::new(&config), r, k_max)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    (0..k_max)
        .map(|j| {
            let counts: Vec<f64> = rows.iter().map(|r| r[j].count as f64).collect();
            let events: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[j].degree_event(threshold)))).collect();
            Ok(ConnectedSetSurvey {
                k: j + 1,
                count: EstimateCI::from_samples(format!("|CS_{}|", j + 1), &counts, seed)?,
                degree_event: EstimateCI::from_samples(format!("avg deg >= {threshold}"), &events, seed)?,
                threshold,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutPointSurvey {
    pub beta: f64,
    pub m: usize,
    pub w: usize,
    /// Indicator that `w` is a cut point.
    pub cut_at_w: EstimateCI,
    pub cut_count: EstimateCI,
    /// Indicator that `w` is a separation point; `None` for even `w`.
    pub separation_at_w: Option<EstimateCI>,
}

/// Cut and separation statistics of `{0, .., m-1}` under the exact kernel.
pub fn cut_point_survey(beta: f64, m: usize, w: usize, replicates: usize, seed: u64) -> Result<CutPointSurvey> {
    if m < 3 || w < 1 || w + 2 > m {
        return Err(invalid("need 1 <= w <= m - 2"));
    }
    let sampler = BoxSampler::new(KernelSpec::exact(beta), BoxSpec::new(1, m)?)?;
    let rows: Vec<Result<(f64, f64, f64)>> = replicate(replicates, 0, |i, _| {
        let config = sampler.sample(replica_seed(seed, Purpose::CutPoints, m as u64, i as u64));
        let cuts = cut_points_d1(&config)?;
        let sep = separation_points_d1(&config, 1)?;
        Ok((
            f64::from(u8::from(cuts.positions.binary_search(&w).is_ok())),
            cuts.count() as f64,
            f64::from(u8::from(sep.binary_search(&w).is_ok())),
        ))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Ok(CutPointSurvey {
        beta,
        m,
        w,
        cut_at_w: EstimateCI::from_samples(format!("P({w} is a cut point)"), &col(|r| r.0), seed)?,
        cut_count: EstimateCI::from_samples("cut points", &col(|r| r.1), seed)?,
        separation_at_w: if w % 2 == 1 {
            Some(EstimateCI::from_samples(format!("P({w} is a separation point)"), &col(|r| r.2), seed)?)
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, edges: &[(usize, usize)]) -> Configuration {
        Configuration::from_edges(
            BoxSpec::new(1, n).unwrap(),
            KernelSpec::exact(1.0),
            0,
            edges.iter().copied(),
        )
        .unwrap()
    }

    #[test]
    fn cut_points_examples() {
        assert_eq!(cut_points_d1(&line(5, &[])).unwrap().positions, vec![1, 2, 3]);
        assert_eq!(cut_points_d1(&line(5, &[(0, 4)])).unwrap().count(), 0);
        assert_eq!(cut_points_d1(&line(6, &[(1, 3)])).unwrap().positions, vec![1, 3, 4]);
    }

    #[test]
    fn separation_examples() {
        assert_eq!(separation_points_d1(&line(7, &[]), 1).unwrap(), vec![1, 3, 5]);
        // (2, 4) touches neither 1 nor 5 but jumps over 3.
        assert_eq!(separation_points_d1(&line(7, &[(2, 4)]), 1).unwrap(), vec![1, 5]);
        // (0, 3) jumps over 1 and touches 3.
        assert_eq!(separation_points_d1(&line(7, &[(0, 3)]), 1).unwrap(), vec![5]);
    }

    #[test]
    fn two_bernoulli_conditional_mean() {
        let c = ConditionedEdgeCount::from_probabilities(&[0.3, 0.5]);
        let positive = 1.0 - 0.7 * 0.5;
        assert!((c.conditional_mean.unwrap() - 0.8 / positive).abs() < 1e-15);
        assert!(c.bound_holds());
        let one = ConditionedEdgeCount::from_probabilities(&[0.2]);
        assert!((one.conditional_mean.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ConditionedEdgeCount::from_probabilities(&[0.0]).conditional_mean, None);
    }

    #[test]
    fn intervals_through_the_origin() {
        let g = LatticeGraph::from_edges(BoxSpec::new(1, 8).unwrap(), &[]);
        let counts: Vec<u64> = enumerate_connected_sets(&g, 0, 5)
            .unwrap()
            .iter()
            .map(|r| r.count)
            .collect();
        assert_eq!(counts, vec![1; 5]);
        let counts: Vec<u64> = enumerate_connected_sets(&g, 4, 4)
            .unwrap()
            .iter()
            .map(|r| r.count)
            .collect();
        assert_eq!(counts, vec![1, 2, 3, 4]);
        assert!(enumerate_connected_sets(&g, 0, 7).is_err());
    }

    #[test]
    fn cut_bound_branches() {
        assert_eq!(cut_point_count_bound(0.0, 9).unwrap().expected, 7.0);
        let b = cut_point_count_bound(1.0, 8).unwrap();
        assert_eq!(b.branch, "10 + 8 ln m");
        assert!(b.holds());
        assert_eq!(cut_point_count_bound(3.0, 8).unwrap().bound, 20.0);
    }
}
