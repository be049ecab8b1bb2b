//! Exact answers on tiny instances, computed by exhaustive enumeration or by
//! closed forms with an independent numerical cross-check.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{DiameterMode, LatticeGraph};
use crate::kernel::{cube_interaction, quadrature_interaction, KernelSpec};
use crate::lattice::{sup_norm, BoxSpec, Displacement};

/// Default cap on the number of random candidate edges.
pub const DEFAULT_ENUMERATION_CAP: usize = 22;
/// Default cap on the number of subsets checked by
/// [`brute_force_connected_sets`].
pub const DEFAULT_SUBSET_CAP: u128 = 1_000_000;

/// Exact law of an integer statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactLaw {
    /// `(value, probability)` in increasing value order.
    pub support: Vec<(u32, f64)>,
    pub expectation: f64,
    pub second_moment: f64,
    /// Number of enumerated configurations.
    pub configurations: u64,
}

impl ExactLaw {
    fn from_masses(masses: BTreeMap<u32, f64>, configurations: u64) -> Self {
        let support: Vec<(u32, f64)> = masses.into_iter().filter(|&(_, p)| p > 0.0).collect();
        let expectation = support.iter().map(|&(v, p)| v as f64 * p).sum();
        let second_moment = support.iter().map(|&(v, p)| (v as f64).powi(2) * p).sum();
        Self {
            support,
            expectation,
            second_moment,
            configurations,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|p| p.1).sum()
    }

    pub fn probability_of(&self, value: u32) -> f64 {
        self.support
            .iter()
            .find(|p| p.0 == value)
            .map_or(0.0, |p| p.1)
    }
}

type Edge = (usize, usize);

/// Candidate long edges in lexicographic order, split into those open with
/// certainty and those open with probability in `(0, 1)`.
fn candidates(kernel: &KernelSpec, box_spec: &BoxSpec) -> (Vec<Edge>, Vec<(Edge, f64)>) {
    let nv = box_spec.num_vertices();
    let mut sure = Vec::new();
    let mut random = Vec::new();
    for a in 0..nv {
        let x = box_spec.coords(a);
        for b in a + 1..nv {
            let y = box_spec.coords(b);
            let diff: Vec<i64> = y.iter().zip(&x).map(|(p, q)| p - q).collect();
            if sup_norm(&diff) < 2 {
                continue;
            }
            let p = kernel.probability(&diff);
            if p >= 1.0 {
                sure.push((a, b));
            } else if p > 0.0 {
                random.push(((a, b), p));
            }
        }
    }
    (sure, random)
}

/// Law of `stat` over all configurations of the box, by enumerating every
/// subset of the random candidate edges. Masks are split into contiguous
/// chunks whose partial sums are combined in chunk order.
pub fn enumerate_law(
    kernel: &KernelSpec,
    box_spec: &BoxSpec,
    cap: usize,
    stat: impl Fn(&LatticeGraph) -> Result<u32> + Sync,
) -> Result<ExactLaw> {
    let (sure, random) = candidates(kernel, box_spec);
    if random.len() > cap.min(40) {
        return Err(Error::CapExceeded {
            what: "random candidate edges",
            requested: random.len() as u128,
            limit: cap.min(40) as u128,
        });
    }
    let r = random.len();
    let total: u64 = 1 << r;
    let chunk_bits = r.min(8);
    let chunks = 1u64 << chunk_bits;
    let per_chunk = total / chunks;
    let partials: Vec<Result<BTreeMap<u32, f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut masses = BTreeMap::new();
            let mut edges = Vec::with_capacity(sure.len() + r);
            for mask in c * per_chunk..(c + 1) * per_chunk {
                edges.clear();
                edges.extend_from_slice(&sure);
                let mut weight = 1.0;
                for (i, &(e, p)) in random.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        weight *= p;
                        edges.push(e);
                    } else {
                        weight *= 1.0 - p;
                    }
                }
                let g = LatticeGraph::from_edges(box_spec.clone(), &edges);
                *masses.entry(stat(&g)?).or_insert(0.0) += weight;
            }
            Ok(masses)
        })
        .collect();
    let mut masses = BTreeMap::new();
    for part in partials {
        for (v, p) in part? {
            *masses.entry(v).or_insert(0.0) += p;
        }
    }
    Ok(ExactLaw::from_masses(masses, total))
}

/// Exact law of `D(u, v)` on the box.
pub fn exact_expected_distance(
    kernel: &KernelSpec,
    box_spec: &BoxSpec,
    u: &[i64],
    v: &[i64],
    cap: usize,
) -> Result<ExactLaw> {
    let a = box_spec.index_of(u)?;
    let b = box_spec.index_of(v)?;
    enumerate_law(kernel, box_spec, cap, |g| Ok(g.distance_between(a, b)))
}

/// Exact law of the diameter of the box.
pub fn exact_diameter_law(kernel: &KernelSpec, box_spec: &BoxSpec, cap: usize) -> Result<ExactLaw> {
    enumerate_law(kernel, box_spec, cap, |g| {
        Ok(g.diameter(DiameterMode::default())?.value)
    })
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Number of connected `k`-sets containing `root`, by testing every
/// `k`-subset that contains it.
pub fn brute_force_connected_sets(g: &LatticeGraph, root: usize, k: usize, cap: u128) -> Result<u64> {
    let nv = g.num_vertices();
    if root >= nv {
        return Err(Error::OutsideBox(vec![root as i64]));
    }
    if k == 0 || k > nv {
        return Ok(0);
    }
    let subsets = binomial(nv as u128 - 1, k as u128 - 1);
    if subsets > cap {
        return Err(Error::CapExceeded {
            what: "subsets to test",
            requested: subsets,
            limit: cap,
        });
    }
    let others: Vec<usize> = (0..nv).filter(|&v| v != root).collect();
    let mut member = vec![false; nv];
    let mut pick: Vec<usize> = (0..k - 1).collect();
    let mut count = 0u64;
    let mut stack = Vec::with_capacity(k);
    let mut seen = Vec::with_capacity(k);
    loop {
        let set: Vec<usize> = std::iter::once(root).chain(pick.iter().map(|&i| others[i])).collect();
        for &v in &set {
            member[v] = true;
        }
        stack.clear();
        seen.clear();
        stack.push(root);
        seen.push(root);
        while let Some(v) = stack.pop() {
            g.for_each_neighbor(v, |w| {
                if member[w] && !seen.contains(&w) {
                    seen.push(w);
                    stack.push(w);
                }
            });
        }
        if seen.len() == k {
            count += 1;
        }
        for &v in &set {
            member[v] = false;
        }
        // Next combination of `k - 1` indices out of `others.len()`.
        let m = others.len();
        let mut i = k - 1;
        loop {
            if i == 0 {
                return Ok(count);
            }
            i -= 1;
            if pick[i] < m - (k - 1 - i) {
                break;
            }
        }
        pick[i] += 1;
        for j in i + 1..k - 1 {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

fn check_line_position(m: usize, w: usize) -> Result<()> {
    if m < 3 || w < 1 || w + 2 > m {
        return Err(invalid(format!("need 1 <= w <= m - 2, got w = {w}, m = {m}")));
    }
    Ok(())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `P(w is a cut point of {0..m-1})` under the exact kernel,
/// `((w+1)(m-w)/m)^{-β}`. The exponent `ln((w+1)(m-w)/m)` is checked
/// against a sum of quadrature interactions over all straddling pairs.
pub fn exact_cut_point_probability(beta: f64, m: usize, w: usize) -> Result<f64> {
    check_line_position(m, w)?;
    let closed = (((w + 1) * (m - w)) as f64 / m as f64).ln();
    let mut sum = 0.0;
    for u in 0..w {
        for v in w + 1..m {
            sum += quadrature_interaction(&Displacement::new(vec![(v - u) as i64])?);
        }
    }
    if !rel_close(closed, sum, 1e-10) {
        return Err(Error::CrossCheck(format!(
            "cut-point exponent: closed form {closed}, quadrature {sum}"
        )));
    }
    Ok((-beta * closed).exp())
}

/// `J` summed over pairs `u in us`, `v in vs` on the line, via the kernel's
/// per-pair interaction.
fn pair_sum(us: std::ops::Range<usize>, vs: std::ops::Range<usize>) -> Result<f64> {
    let mut s = 0.0;
    for u in us {
        for v in vs.clone() {
            let k = v as i64 - u as i64;
            s += cube_interaction(1, &Displacement::new(vec![k])?)?.value;
        }
    }
    Ok(s)
}

/// `P(w is a separation point of {0..M-1})` under the exact kernel: the
/// product of the probabilities that `w` has no long edge to the left, none
/// to the right, and that no edge jumps over `w`.
pub fn exact_separation_probability(beta: f64, big_m: usize, w: usize) -> Result<f64> {
    check_line_position(big_m, w)?;
    let (wf, mf) = (w as f64, big_m as f64);
    let left = ((wf + 1.0) / (2.0 * wf)).powf(beta);
    let right = ((mf - wf) / (2.0 * (mf - 1.0 - wf))).powf(beta);
    let bridge = ((wf + 1.0) * (mf - wf) / mf).powf(-beta);
    let closed = left * right * bridge;
    let exponent = pair_sum(0..w.saturating_sub(1), w..w + 1)?
        + pair_sum(w..w + 1, w + 2..big_m)?
        + pair_sum(0..w, w + 1..big_m)?;
    let direct = (-beta * exponent).exp();
    if !rel_close(closed, direct, 1e-10) {
        return Err(Error::CrossCheck(format!(
            "separation probability: product form {closed}, pair sum {direct}"
        )));
    }
    Ok(closed)
}

/// `P(0 ∼ S_{>=k})` on the line under the exact kernel, optionally only
/// counting partners with `|x| <= window`: `1 - (P(no edge to one side))^2`.
pub fn exact_sphere_probability_d1(beta: f64, k: u64, window: Option<u64>) -> Result<f64> {
    if k < 2 {
        return Err(invalid("sphere radius must be >= 2"));
    }
    let kf = k as f64;
    // ∫_0^1 ∫_k^{R+1} (y - x)^{-2} dy dx = ln(k/(k-1)) - ln((R+1)/R).
    let mut side = (kf / (kf - 1.0)).ln();
    if let Some(r) = window {
        if r < k {
            return Err(invalid("window must contain the sphere"));
        }
        side -= ((r as f64 + 1.0) / r as f64).ln();
    }
    Ok(-(-2.0 * beta * side).exp_m1())
}

/// Expected degree of vertex `v` inside the box: the sum of the connection
/// probabilities to every other vertex.
pub fn expected_degree_in_box(kernel: &KernelSpec, box_spec: &BoxSpec, v: &[i64]) -> Result<f64> {
    let c = box_spec.index_of(v)?;
    let mut total = 0.0;
    for u in 0..box_spec.num_vertices() {
        if u == c {
            continue;
        }
        let diff: Vec<i64> = box_spec.coords(u).iter().zip(v).map(|(a, b)| a - b).collect();
        total += kernel.probability(&diff);
    }
    Ok(total)
}

/// Expected number of long edges in the box, summed pair by pair.
pub fn expected_long_edges(kernel: &KernelSpec, box_spec: &BoxSpec) -> f64 {
    let (sure, random) = candidates(kernel, box_spec);
    sure.len() as f64 + random.iter().map(|r| r.1).sum::<f64>()
}
