//! Sampling of percolation configurations on boxes, of the continuum Poisson
//! cloud, and of coupled configurations.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelSpec;
use crate::lattice::{sup_norm, BoxSpec};
use crate::rng::{open01, stream, Purpose};

/// Default memory budget for a single configuration.
pub const DEFAULT_MEMORY_BYTES: u64 = 4 << 30;
/// Rough per-vertex footprint of a configuration plus its graph and BFS
/// scratch space.
const BYTES_PER_VERTEX: u64 = 64;

/// A sampled edge set on a box. Edges with `|u - v|_∞ = 1` are implicit and
/// never stored; every stored pair `(a, b)` of row-major indices has `a < b`,
/// and the list is sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub box_spec: BoxSpec,
    pub kernel: KernelSpec,
    pub seed: u64,
    edges: Vec<(usize, usize)>,
}

impl Configuration {
    /// Builds a configuration from explicit long edges, validating every pair
    /// and canonicalising order and duplicates.
    pub fn from_edges(
        box_spec: BoxSpec,
        kernel: KernelSpec,
        seed: u64,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let nv = box_spec.num_vertices();
        let mut out = Vec::new();
        for (a, b) in edges {
            if a >= nv || b >= nv {
                return Err(invalid(format!("edge ({a}, {b}) has an endpoint outside the box")));
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let gap = sup_norm(&difference(&box_spec, lo, hi));
            if gap < 2 {
                return Err(invalid(format!(
                    "edge ({a}, {b}) has ∞-distance {gap}; only long edges are stored"
                )));
            }
            out.push((lo, hi));
        }
        out.sort_unstable();
        out.dedup();
        Ok(Self {
            box_spec,
            kernel,
            seed,
            edges: out,
        })
    }

    pub(crate) fn from_sorted_unchecked(
        box_spec: BoxSpec,
        kernel: KernelSpec,
        seed: u64,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        Self {
            box_spec,
            kernel,
            seed,
            edges,
        }
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_long_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }

    /// `true` when every long edge of `self` is also present in `other`.
    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.edges.iter().all(|&(a, b)| other.has_edge(a, b))
    }
}

fn difference(b: &BoxSpec, lo: usize, hi: usize) -> Vec<i64> {
    let x = b.coords(lo);
    let y = b.coords(hi);
    x.iter().zip(&y).map(|(p, q)| q - p).collect()
}

/// All pairs `{u, u + k}` of a box sharing one displacement vector `k`.
#[derive(Debug, Clone)]
struct DisplacementGroup {
    offset: Vec<i64>,
    /// Local coordinates of the first base vertex.
    base_lo: Vec<usize>,
    /// Number of admissible base positions per axis.
    extent: Vec<usize>,
    count: usize,
    /// Linear index difference between partner and base.
    index_delta: usize,
}

impl DisplacementGroup {
    fn base_index(&self, n: usize, mut j: usize) -> usize {
        // Mixed radix over `extent`, last axis fastest, then row-major.
        let d = self.extent.len();
        let mut local = [0usize; 8];
        let mut local_vec;
        let coords: &mut [usize] = if d <= 8 {
            &mut local[..d]
        } else {
            local_vec = vec![0usize; d];
            &mut local_vec
        };
        for a in (0..d).rev() {
            coords[a] = self.base_lo[a] + j % self.extent[a];
            j /= self.extent[a];
        }
        coords.iter().fold(0usize, |acc, &c| acc * n + c)
    }
}

/// Displacement vectors `k` with first nonzero component positive and
/// `|k|_∞ >= 2`, in lexicographic order.
fn displacement_groups(b: &BoxSpec) -> Vec<DisplacementGroup> {
    let n = b.n as i64;
    let d = b.d;
    let side = (2 * n - 1) as usize;
    let mut groups = Vec::new();
    let mut offset = vec![0i64; d];
    for flat in 0..side.pow(d as u32) {
        let mut rem = flat;
        for a in (0..d).rev() {
            offset[a] = (rem % side) as i64 - (n - 1);
            rem /= side;
        }
        let first = offset.iter().find(|&&c| c != 0);
        if !matches!(first, Some(&c) if c > 0) || sup_norm(&offset) < 2 {
            continue;
        }
        let base_lo: Vec<usize> = offset.iter().map(|&c| (-c).max(0) as usize).collect();
        let extent: Vec<usize> = offset.iter().map(|&c| (n - c.abs()) as usize).collect();
        let index_delta = offset.iter().fold(0i64, |acc, &c| acc * n + c) as usize;
        groups.push(DisplacementGroup {
            offset: offset.clone(),
            count: extent.iter().product(),
            base_lo,
            extent,
            index_delta,
        });
    }
    groups
}

fn check_budget(b: &BoxSpec, memory_bytes: u64) -> Result<()> {
    let need = b.num_vertices() as u128 * BYTES_PER_VERTEX as u128;
    if need > memory_bytes as u128 {
        return Err(Error::CapExceeded {
            what: "configuration memory (bytes)",
            requested: need,
            limit: memory_bytes as u128,
        });
    }
    Ok(())
}

/// Number of Bernoulli failures before the next success, `p in (0, 1)`.
fn geometric_skip(rng: &mut impl RngCore, ln_closed: f64) -> f64 {
    (open01(rng.next_u64()).ln() / ln_closed).floor()
}

/// Reusable sampler for one kernel on one box; the per-displacement
/// probabilities are computed once.
#[derive(Debug, Clone)]
pub struct BoxSampler {
    kernel: KernelSpec,
    box_spec: BoxSpec,
    groups: Vec<(DisplacementGroup, f64)>,
}

impl BoxSampler {
    pub fn new(kernel: KernelSpec, box_spec: BoxSpec) -> Result<Self> {
        Self::with_budget(kernel, box_spec, DEFAULT_MEMORY_BYTES)
    }

    pub fn with_budget(kernel: KernelSpec, box_spec: BoxSpec, memory_bytes: u64) -> Result<Self> {
        check_budget(&box_spec, memory_bytes)?;
        let groups = displacement_groups(&box_spec)
            .into_iter()
            .filter_map(|g| {
                let p = kernel.probability(&g.offset);
                (p > 0.0).then_some((g, p))
            })
            .collect();
        Ok(Self {
            kernel,
            box_spec,
            groups,
        })
    }

    pub fn box_spec(&self) -> &BoxSpec {
        &self.box_spec
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Expected number of long edges.
    pub fn expected_edges(&self) -> f64 {
        self.groups.iter().map(|(g, p)| g.count as f64 * p).sum()
    }

    /// Draws a configuration. Within a displacement group all pairs share one
    /// probability, so open pairs are located by geometric skipping.
    pub fn sample(&self, seed: u64) -> Configuration {
        let n = self.box_spec.n;
        let mut rng = stream(seed, Purpose::BoxEdges, 0);
        let mut edges = Vec::new();
        for (g, p) in &self.groups {
            if *p >= 1.0 {
                for j in 0..g.count {
                    let a = g.base_index(n, j);
                    edges.push((a, a + g.index_delta));
                }
                continue;
            }
            let ln_closed = (-p).ln_1p();
            let count = g.count as f64;
            let mut j = geometric_skip(&mut rng, ln_closed);
            while j < count {
                let a = g.base_index(n, j as usize);
                edges.push((a, a + g.index_delta));
                j += 1.0 + geometric_skip(&mut rng, ln_closed);
            }
        }
        edges.sort_unstable();
        Configuration::from_sorted_unchecked(self.box_spec.clone(), self.kernel, seed, edges)
    }
}

/// Samples one configuration; see [`BoxSampler`] for repeated draws.
pub fn sample_box(kernel: &KernelSpec, box_spec: &BoxSpec, seed: u64) -> Result<Configuration> {
    Ok(BoxSampler::new(*kernel, box_spec.clone())?.sample(seed))
}

/// Configurations for several kernels driven by one uniform per candidate
/// pair: a pair is open under a kernel iff its uniform is below that
/// kernel's probability. The uniform of a pair depends only on the seed, the
/// box and the pair, never on the kernels.
pub fn sample_coupled(
    kernels: &[KernelSpec],
    box_spec: &BoxSpec,
    seed: u64,
) -> Result<Vec<Configuration>> {
    check_budget(box_spec, DEFAULT_MEMORY_BYTES)?;
    let n = box_spec.n;
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); kernels.len()];
    for (ordinal, g) in displacement_groups(box_spec).iter().enumerate() {
        let probs: Vec<f64> = kernels.iter().map(|k| k.probability(&g.offset)).collect();
        if probs.iter().all(|&p| p <= 0.0) {
            continue;
        }
        let mut rng = stream(seed, Purpose::PairUniforms, ordinal as u64);
        for j in 0..g.count {
            let u = open01(rng.next_u64());
            let a = g.base_index(n, j);
            for (list, &p) in edges.iter_mut().zip(&probs) {
                if u < p {
                    list.push((a, a + g.index_delta));
                }
            }
        }
    }
    Ok(kernels
        .iter()
        .zip(edges)
        .map(|(k, mut e)| {
            e.sort_unstable();
            Configuration::from_sorted_unchecked(box_spec.clone(), *k, seed, e)
        })
        .collect())
}

/// Harris-coupled pair of configurations.
pub fn sample_coupled_kernels(
    kernel_a: &KernelSpec,
    kernel_b: &KernelSpec,
    box_spec: &BoxSpec,
    seed: u64,
) -> Result<(Configuration, Configuration)> {
    let mut v = sample_coupled(&[*kernel_a, *kernel_b], box_spec, seed)?;
    let b = v.pop().expect("two configurations");
    let a = v.pop().expect("two configurations");
    Ok((a, b))
}

/// A draw of the Poisson process on `[0,1)^d × [0,1)^d` with intensity
/// `β / (2 |t - s|^{2d})`, restricted to `|t - s|_∞ >= epsilon`. The process
/// is symmetrised: each stored pair `(t, s)` also stands for `(s, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonCloud {
    pub d: usize,
    pub beta: f64,
    pub min_separation: f64,
    pub seed: u64,
    pub symmetrized: bool,
    /// `t` then `s` for each point, `2d` numbers per point.
    coords: Vec<f64>,
}

impl PoissonCloud {
    pub fn len(&self) -> usize {
        self.coords.len() / (2 * self.d)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn pair(&self, i: usize) -> (&[f64], &[f64]) {
        let w = 2 * self.d;
        let p = &self.coords[i * w..(i + 1) * w];
        p.split_at(self.d)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.coords.chunks_exact(2 * self.d).map(|p| p.split_at(self.d))
    }

    /// Largest box side whose discretisation loses no long edge.
    pub fn max_scale(&self) -> usize {
        (1.0 / self.min_separation * (1.0 + 1e-12)).floor() as usize
    }
}

/// Weight `∫ Π (1 - |r_i|) dr` of the cube `|r|_∞ < b`.
fn cube_weight(d: usize, b: f64) -> f64 {
    (2.0 * b - b * b).powi(d as i32)
}

/// `|x|` on `[0, b]` with density proportional to `1 - x`.
fn triangular_abs(rng: &mut impl Rng, b: f64) -> f64 {
    let c = b - 0.5 * b * b;
    let u: f64 = rng.random();
    1.0 - (1.0 - 2.0 * c * u).max(0.0).sqrt()
}

pub fn sample_poisson_cloud(d: usize, beta: f64, epsilon: f64, seed: u64) -> Result<PoissonCloud> {
    if d == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    let mut coords = Vec::new();
    if beta > 0.0 {
        let mut r = vec![0.0; d];
        let mut t = vec![0.0; d];
        let mut s = vec![0.0; d];
        let mut inner = epsilon;
        let mut shell = 0u64;
        // Dyadic shells inner <= |r|_∞ < outer. Proposals come from the
        // constant envelope β / (2 inner^{2d}) and are thinned to the target.
        while inner < 1.0 {
            let outer = (2.0 * inner).min(1.0);
            let weight = cube_weight(d, outer) - cube_weight(d, inner);
            let mass = 0.5 * beta * inner.powi(-2 * d as i32) * weight;
            let mut rng = stream(seed, Purpose::PoissonCloud, shell);
            let proposals = if mass > 0.0 {
                Poisson::new(mass).expect("positive mean").sample(&mut rng) as u64
            } else {
                0
            };
            for _ in 0..proposals {
                loop {
                    for x in r.iter_mut() {
                        let a = triangular_abs(&mut rng, outer);
                        *x = if rng.random::<bool>() { a } else { -a };
                    }
                    if r.iter().any(|x| x.abs() >= inner) {
                        break;
                    }
                }
                let norm2: f64 = r.iter().map(|x| x * x).sum();
                let accept = (inner * inner / norm2).powi(d as i32);
                if rng.random::<f64>() >= accept {
                    continue;
                }
                for i in 0..d {
                    let lo = r[i].max(0.0);
                    let hi = (1.0 + r[i]).min(1.0);
                    t[i] = lo + (hi - lo) * rng.random::<f64>();
                    s[i] = (t[i] - r[i]).clamp(0.0, 1.0 - f64::EPSILON);
                }
                let sep = t.iter().zip(&s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if sep < epsilon {
                    continue;
                }
                coords.extend_from_slice(&t);
                coords.extend_from_slice(&s);
            }
            inner = outer;
            shell += 1;
        }
    }
    Ok(PoissonCloud {
        d,
        beta,
        min_separation: epsilon,
        seed,
        symmetrized: true,
        coords,
    })
}

/// Expected number of stored points, `(β/2) ∫∫_{|t-s|_∞ >= ε} |t-s|^{-2d}`,
/// by quadrature over the difference `r = t - s`.
pub fn cloud_expected_points(d: usize, beta: f64, epsilon: f64) -> f64 {
    // ∫_{ε <= |r|_∞ <= 1} Π(1 - |r_i|) |r|^{-2d} dr, integrated over dyadic
    // shells split into faces where |r_1| is the largest component, times d
    // by symmetry, times 2^d sign patterns.
    let mut total = 0.0;
    let mut inner = epsilon;
    while inner < 1.0 {
        let outer = (2.0 * inner).min(1.0);
        // Region: r_1 in [inner, outer), |r_j| <= r_1 for j > 1 (r_j >= 0 by
        // symmetry). Substitute r_j = r_1 * y_j with y_j in [0, 1].
        let f = |x: &[f64]| {
            let r1 = x[0];
            let mut w = 1.0 - r1;
            let mut norm2 = r1 * r1;
            for &y in &x[1..] {
                let rj = r1 * y;
                w *= 1.0 - rj;
                norm2 += rj * rj;
            }
            w * r1.powi(d as i32 - 1) / norm2.powi(d as i32)
        };
        let mut lo = vec![0.0; d];
        let mut hi = vec![1.0; d];
        lo[0] = inner;
        hi[0] = outer;
        let (v, _) = crate::quadrature::integrate_box(&f, &lo, &hi, 1e-12, 64);
        total += v;
        inner = outer;
    }
    // Faces where a unique coordinate attains the max: d choices, 2^d signs.
    0.5 * beta * total * d as f64 * 2f64.powi(d as i32)
}

/// Lattice configuration at scale `n`: `{u, v}` is open iff some cloud pair
/// falls in the cells of `u` and `v`.
pub fn discretize_cloud(cloud: &PoissonCloud, n: usize) -> Result<Configuration> {
    if n == 0 {
        return Err(invalid("scale must be >= 1"));
    }
    if n > cloud.max_scale() {
        return Err(Error::CapExceeded {
            what: "discretisation scale (1 / min_separation)",
            requested: n as u128,
            limit: cloud.max_scale() as u128,
        });
    }
    let box_spec = BoxSpec::new(cloud.d, n)?;
    let kernel = KernelSpec::exact(cloud.beta);
    let cell = |x: &[f64]| -> Vec<i64> {
        x.iter()
            .map(|&c| ((c * n as f64).floor() as i64).min(n as i64 - 1))
            .collect()
    };
    let mut edges = Vec::new();
    for (t, s) in cloud.pairs() {
        let u = cell(t);
        let v = cell(s);
        let gap = u.iter().zip(&v).map(|(a, b)| (a - b).unsigned_abs()).max().unwrap_or(0);
        if gap >= 2 {
            let a = box_spec.index_unchecked(&u);
            let b = box_spec.index_unchecked(&v);
            edges.push(if a < b { (a, b) } else { (b, a) });
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(Configuration::from_sorted_unchecked(box_spec, kernel, cloud.seed, edges))
}

/// Discretisations of one shared cloud at several scales.
pub fn couple_scales(cloud: &PoissonCloud, scales: &[usize]) -> Result<Vec<Configuration>> {
    scales.iter().map(|&n| discretize_cloud(cloud, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_has_no_long_edges() {
        let c = sample_box(&KernelSpec::exact(0.0), &BoxSpec::new(2, 10).unwrap(), 3).unwrap();
        assert_eq!(c.num_long_edges(), 0);
        let cloud = sample_poisson_cloud(2, 0.0, 0.1, 3).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let k = KernelSpec::exact(2.0);
        let b = BoxSpec::new(2, 12).unwrap();
        assert_eq!(sample_box(&k, &b, 9).unwrap(), sample_box(&k, &b, 9).unwrap());
        assert_ne!(sample_box(&k, &b, 9).unwrap(), sample_box(&k, &b, 10).unwrap());
        let c1 = sample_poisson_cloud(1, 1.0, 0.05, 5).unwrap();
        let c2 = sample_poisson_cloud(1, 1.0, 0.05, 5).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn stored_edges_are_long_and_sorted() {
        let b = BoxSpec::new(2, 9).unwrap();
        let c = sample_box(&KernelSpec::truncated(3.0), &b, 1).unwrap();
        assert!(c.num_long_edges() > 0);
        for w in c.edges().windows(2) {
            assert!(w[0] < w[1]);
        }
        for &(a, bb) in c.edges() {
            assert!(a < bb);
            assert!(sup_norm(&difference(&b, a, bb)) >= 2);
        }
    }

    #[test]
    fn saturated_kernel_opens_everything() {
        let b = BoxSpec::new(1, 6).unwrap();
        let c = sample_box(&KernelSpec::truncated(1e6), &b, 0).unwrap();
        // All pairs at distance >= 2: C(6,2) - 5.
        assert_eq!(c.num_long_edges(), 10);
    }

    #[test]
    fn from_edges_validates() {
        let b = BoxSpec::new(1, 5).unwrap();
        let k = KernelSpec::exact(1.0);
        assert!(Configuration::from_edges(b.clone(), k, 0, [(0, 1)]).is_err());
        assert!(Configuration::from_edges(b.clone(), k, 0, [(0, 7)]).is_err());
        let c = Configuration::from_edges(b, k, 0, [(4, 0), (0, 4), (1, 3)]).unwrap();
        assert_eq!(c.edges(), &[(0, 4), (1, 3)]);
    }

    #[test]
    fn memory_budget_is_enforced() {
        let b = BoxSpec::new(2, 1000).unwrap();
        let err = BoxSampler::with_budget(KernelSpec::exact(1.0), b, 1 << 20).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn cloud_respects_min_separation() {
        for d in [1, 2] {
            let cloud = sample_poisson_cloud(d, 3.0, 1.0 / 16.0, 11).unwrap();
            assert!(!cloud.is_empty());
            for (t, s) in cloud.pairs() {
                let sep = t.iter().zip(s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(sep >= cloud.min_separation);
                assert!(t.iter().chain(s).all(|&x| (0.0..1.0).contains(&x)));
            }
        }
    }

    #[test]
    fn cloud_rejects_bad_epsilon() {
        assert!(sample_poisson_cloud(1, 1.0, 0.0, 0).is_err());
        assert!(sample_poisson_cloud(1, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn discretisation_guards_scale() {
        let cloud = sample_poisson_cloud(1, 1.0, 1.0 / 8.0, 0).unwrap();
        assert!(discretize_cloud(&cloud, 8).is_ok());
        assert!(matches!(discretize_cloud(&cloud, 9), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn expected_points_closed_form_d1() {
        let eps: f64 = 1.0 / 16.0;
        let exact = 1.0 / eps - 1.0 + eps.ln();
        let q = cloud_expected_points(1, 1.0, eps);
        assert!((q - exact).abs() < 1e-9, "{q} vs {exact}");
        assert!((exact - 12.227_411_277_760_22).abs() < 1e-9);
    }

    #[test]
    fn coupled_identical_kernels_agree() {
        let b = BoxSpec::new(1, 40).unwrap();
        let k = KernelSpec::exact(1.5);
        let (x, y) = sample_coupled_kernels(&k, &k, &b, 4).unwrap();
        assert_eq!(x, y);
    }
}
