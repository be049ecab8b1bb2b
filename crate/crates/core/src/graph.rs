//! Hop-count distances on sampled configurations.
//!
//! Edges at `∞`-distance 1 are generated on the fly during traversal; only
//! long edges are stored, in compressed adjacency form. Unreachable targets
//! are reported as `None`, never as a large number.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{unit_offsets, BoxSpec};
use crate::sampler::Configuration;

/// Default cap on the vertex count for exact diameters.
pub const DEFAULT_DIAMETER_CAP: usize = 100_000;

#[derive(Debug, Clone)]
pub struct LatticeGraph {
    box_spec: BoxSpec,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    units: Vec<Vec<i64>>,
    unit_deltas: Vec<isize>,
}

impl LatticeGraph {
    pub fn new(config: &Configuration) -> Self {
        Self::from_edges(config.box_spec.clone(), config.edges())
    }

    /// Graph on `box_spec` with the given long edges (row-major indices).
    pub fn from_edges(box_spec: BoxSpec, edges: &[(usize, usize)]) -> Self {
        let nv = box_spec.num_vertices();
        let mut degree = vec![0usize; nv + 1];
        for &(a, b) in edges {
            debug_assert!(a != b);
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; nv + 1];
        for v in 0..nv {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0usize; offsets[nv]];
        for &(a, b) in edges {
            targets[fill[a]] = b;
            fill[a] += 1;
            targets[fill[b]] = a;
            fill[b] += 1;
        }
        let units = unit_offsets(box_spec.d);
        let n = box_spec.n as isize;
        let unit_deltas = units
            .iter()
            .map(|u| u.iter().fold(0isize, |acc, &c| acc * n + c as isize))
            .collect();
        Self {
            box_spec,
            offsets,
            targets,
            units,
            unit_deltas,
        }
    }

    pub fn box_spec(&self) -> &BoxSpec {
        &self.box_spec
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn long_neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Calls `f` for every neighbour of `v`, implicit ones first.
    #[inline]
    pub fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize)) {
        let n = self.box_spec.n;
        let d = self.box_spec.d;
        if d == 1 {
            if v > 0 {
                f(v - 1);
            }
            if v + 1 < n {
                f(v + 1);
            }
        } else {
            let mut local = [0usize; 8];
            let mut heap;
            let coords: &mut [usize] = if d <= 8 {
                &mut local[..d]
            } else {
                heap = vec![0usize; d];
                &mut heap
            };
            self.box_spec.local_coords_into(v, coords);
            'units: for (unit, &delta) in self.units.iter().zip(&self.unit_deltas) {
                for (c, &s) in coords.iter().zip(unit) {
                    if (s < 0 && *c == 0) || (s > 0 && *c + 1 == n) {
                        continue 'units;
                    }
                }
                f((v as isize + delta) as usize);
            }
        }
        for &w in self.long_neighbors(v) {
            f(w);
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        let mut k = 0;
        self.for_each_neighbor(v, |_| k += 1);
        k
    }

    fn index(&self, x: &[i64]) -> Result<usize> {
        self.box_spec.index_of(x)
    }

    /// `D(u, v)`; always finite because implicit edges connect the box.
    pub fn distance(&self, u: &[i64], v: &[i64]) -> Result<u32> {
        let (a, b) = (self.index(u)?, self.index(v)?);
        Ok(self.distance_between(a, b))
    }

    pub fn distance_between(&self, a: usize, b: usize) -> u32 {
        let mut bfs = Bfs::new(self.num_vertices());
        bfs.run(self, &[a], |_| true, |_, _| false, |w| w == b)
            .expect("box graphs are connected")
    }

    /// Distance using only vertices accepted by `keep`; `None` if `u` and `v`
    /// are disconnected inside the subset.
    pub fn distance_restricted(
        &self,
        keep: impl Fn(&[i64]) -> bool,
        u: &[i64],
        v: &[i64],
    ) -> Result<Option<u32>> {
        let (a, b) = (self.index(u)?, self.index(v)?);
        if !keep(u) || !keep(v) {
            return Err(Error::OutsideSubset);
        }
        let mask: Vec<bool> = (0..self.num_vertices())
            .map(|i| keep(&self.box_spec.coords(i)))
            .collect();
        let mut bfs = Bfs::new(self.num_vertices());
        Ok(bfs.run(self, &[a], |w| mask[w], |_, _| false, |w| w == b))
    }

    /// `min_{a ∈ A, b ∈ B} D(a, b)` by multi-source search from `A`.
    pub fn distance_sets(&self, a: &[usize], b: &[usize]) -> Result<u32> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet);
        }
        let target = self.membership(b)?;
        self.membership(a)?;
        let mut bfs = Bfs::new(self.num_vertices());
        Ok(bfs
            .run(self, a, |_| true, |_, _| false, |w| target[w])
            .expect("box graphs are connected"))
    }

    /// Shortest `A → B` path that does not use a direct edge between `A` and
    /// `B` (implicit nearest-neighbour edges included).
    pub fn indirect_distance(&self, a: &[usize], b: &[usize]) -> Result<Option<u32>> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet);
        }
        let in_a = self.membership(a)?;
        let in_b = self.membership(b)?;
        if a.iter().any(|&v| in_b[v]) {
            return Err(Error::OverlappingSets);
        }
        let mut bfs = Bfs::new(self.num_vertices());
        Ok(bfs.run(
            self,
            a,
            |_| true,
            |from, to| in_a[from] && in_b[to],
            |w| in_b[w],
        ))
    }

    fn membership(&self, set: &[usize]) -> Result<Vec<bool>> {
        let nv = self.num_vertices();
        let mut m = vec![false; nv];
        for &v in set {
            if v >= nv {
                return Err(Error::OutsideBox(vec![v as i64]));
            }
            m[v] = true;
        }
        Ok(m)
    }

    /// Hop counts from `source` to every vertex.
    pub fn distances_from(&self, source: usize) -> Vec<u32> {
        let mut bfs = Bfs::new(self.num_vertices());
        bfs.run(self, &[source], |_| true, |_, _| false, |_| false);
        (0..self.num_vertices())
            .map(|v| bfs.get(v).expect("connected"))
            .collect()
    }

    pub fn diameter(&self, mode: DiameterMode) -> Result<Diameter> {
        let nv = self.num_vertices();
        let mut bfs = Bfs::new(nv);
        match mode {
            DiameterMode::Exact { cap } => {
                if nv > cap {
                    return Err(Error::CapExceeded {
                        what: "exact diameter vertex count",
                        requested: nv as u128,
                        limit: cap as u128,
                    });
                }
                let mut best = 0;
                for s in 0..nv {
                    bfs.run(self, &[s], |_| true, |_, _| false, |_| false);
                    best = best.max(bfs.max_reached());
                }
                Ok(Diameter {
                    value: best,
                    exact: true,
                })
            }
            DiameterMode::SampledLowerBound { sweeps } => {
                let corners = 1usize << self.box_spec.d.min(16);
                let mut best = 0;
                for i in 0..sweeps.max(1) {
                    let dir: Vec<bool> = (0..self.box_spec.d)
                        .map(|a| (i % corners) >> a & 1 == 1)
                        .collect();
                    let start = self.box_spec.corner_index(&dir);
                    bfs.run(self, &[start], |_| true, |_, _| false, |_| false);
                    let far = bfs.farthest();
                    bfs.run(self, &[far], |_| true, |_, _| false, |_| false);
                    best = best.max(bfs.max_reached());
                }
                Ok(Diameter {
                    value: best,
                    exact: false,
                })
            }
        }
    }

    pub fn degree_profile(&self) -> DegreeProfile {
        let n = self.box_spec.n;
        let d = self.box_spec.d;
        let mut local = vec![0usize; d];
        let mut degrees = Vec::with_capacity(self.num_vertices());
        let mut interior = Vec::with_capacity(self.num_vertices());
        for v in 0..self.num_vertices() {
            degrees.push(self.degree(v) as u32);
            self.box_spec.local_coords_into(v, &mut local);
            interior.push(local.iter().all(|&c| c > 0 && c + 1 < n));
        }
        DegreeProfile { degrees, interior }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterMode {
    /// Maximum eccentricity over all vertices.
    Exact { cap: usize },
    /// Best of `sweeps` double sweeps; a lower bound only.
    SampledLowerBound { sweeps: usize },
}

impl Default for DiameterMode {
    fn default() -> Self {
        DiameterMode::Exact {
            cap: DEFAULT_DIAMETER_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Diameter {
    pub value: u32,
    /// `false` means `value` is only a lower bound.
    pub exact: bool,
}

impl Diameter {
    pub fn label(&self) -> &'static str {
        if self.exact {
            "exact"
        } else {
            "lower bound"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeProfile {
    pub degrees: Vec<u32>,
    /// Vertices whose full `∞`-neighbourhood lies inside the box.
    pub interior: Vec<bool>,
}

impl DegreeProfile {
    /// `(degree, count)` pairs in increasing degree order.
    pub fn histogram(&self) -> Vec<(u32, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for &k in &self.degrees {
            *h.entry(k).or_insert(0usize) += 1;
        }
        h.into_iter().collect()
    }
}

/// Breadth-first search with reusable scratch space; a visitation epoch
/// avoids clearing between runs.
#[derive(Debug, Clone)]
pub struct Bfs {
    dist: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<usize>,
}

impl Bfs {
    pub fn new(num_vertices: usize) -> Self {
        Self {
            dist: vec![0; num_vertices],
            stamp: vec![0; num_vertices],
            epoch: 0,
            queue: Vec::with_capacity(num_vertices),
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Multi-source search. `allow` filters vertices, `forbid` filters
    /// directed edge traversals, and the search stops at the first vertex
    /// satisfying `stop`, returning its distance.
    pub fn run(
        &mut self,
        g: &LatticeGraph,
        sources: &[usize],
        allow: impl Fn(usize) -> bool,
        forbid: impl Fn(usize, usize) -> bool,
        stop: impl Fn(usize) -> bool,
    ) -> Option<u32> {
        self.next_epoch();
        self.queue.clear();
        for &s in sources {
            if !allow(s) || self.stamp[s] == self.epoch {
                continue;
            }
            if stop(s) {
                return Some(0);
            }
            self.stamp[s] = self.epoch;
            self.dist[s] = 0;
            self.queue.push(s);
        }
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            let next = self.dist[v] + 1;
            let mut found = false;
            g.for_each_neighbor(v, |w| {
                if found || self.stamp[w] == self.epoch || !allow(w) || forbid(v, w) {
                    return;
                }
                self.stamp[w] = self.epoch;
                self.dist[w] = next;
                self.queue.push(w);
                if stop(w) {
                    found = true;
                }
            });
            if found {
                return Some(next);
            }
        }
        None
    }

    /// Distance recorded by the last run, `None` if not reached.
    pub fn get(&self, v: usize) -> Option<u32> {
        (self.stamp[v] == self.epoch).then(|| self.dist[v])
    }

    fn max_reached(&self) -> u32 {
        self.queue.last().map_or(0, |&v| self.dist[v])
    }

    fn farthest(&self) -> usize {
        *self.queue.last().expect("nonempty search")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;

    fn graph(d: usize, n: usize, edges: &[(usize, usize)]) -> LatticeGraph {
        LatticeGraph::from_edges(BoxSpec::new(d, n).unwrap(), edges)
    }

    #[test]
    fn pure_lattice_distance_is_sup_norm() {
        let g = graph(2, 7, &[]);
        let b = g.box_spec().clone();
        for i in 0..b.num_vertices() {
            let x = b.coords(i);
            let expect = x.iter().map(|c| c.unsigned_abs()).max().unwrap() as u32;
            assert_eq!(g.distance(&[0, 0], &x).unwrap(), expect);
        }
        assert_eq!(g.distance(&[3, 3], &[3, 3]).unwrap(), 0);
    }

    #[test]
    fn direct_edge_shortcut() {
        let g = graph(1, 5, &[(0, 4)]);
        assert_eq!(g.distance(&[0], &[4]).unwrap(), 1);
        assert!(g.distance(&[0], &[5]).is_err());
    }

    #[test]
    fn restricted_distances() {
        let g = graph(1, 5, &[]);
        let whole = g.distance_restricted(|_| true, &[0], &[4]).unwrap();
        assert_eq!(whole, Some(4));
        let gap = g
            .distance_restricted(|x| x[0] == 0 || x[0] == 2, &[0], &[2])
            .unwrap();
        assert_eq!(gap, None);
        assert!(matches!(
            g.distance_restricted(|x| x[0] == 0, &[0], &[2]),
            Err(Error::OutsideSubset)
        ));

        // Left half of a 2-d box behaves as the half box itself.
        let g = graph(2, 6, &[]);
        let left = |x: &[i64]| x[0] < 3;
        assert_eq!(
            g.distance_restricted(left, &[0, 0], &[2, 5]).unwrap(),
            Some(5)
        );
    }

    #[test]
    fn set_distances() {
        let g = graph(2, 9, &[]);
        let b = g.box_spec().clone();
        let origin = b.index_of(&[4, 4]).unwrap();
        let ring: Vec<usize> = (0..b.num_vertices())
            .filter(|&i| {
                let x = b.coords(i);
                (x[0] - 4).abs().max((x[1] - 4).abs()) == 3
            })
            .collect();
        assert_eq!(g.distance_sets(&[origin], &ring).unwrap(), 3);
        assert_eq!(g.distance_sets(&[origin, 1], &[1, 2]).unwrap(), 0);
        assert_eq!(g.distance_sets(&[0], &[80]).unwrap(), g.distance_between(0, 80));
        assert!(matches!(g.distance_sets(&[], &[1]), Err(Error::EmptySet)));
    }

    #[test]
    fn indirect_distance_examples() {
        let g = graph(1, 3, &[]);
        assert_eq!(g.indirect_distance(&[0], &[2]).unwrap(), Some(2));
        let g = graph(1, 2, &[]);
        assert_eq!(g.indirect_distance(&[0], &[1]).unwrap(), None);
        let g = graph(1, 6, &[(0, 5)]);
        assert_eq!(g.distance_sets(&[0], &[5]).unwrap(), 1);
        assert_eq!(g.indirect_distance(&[0], &[5]).unwrap(), Some(5));
        assert!(matches!(
            g.indirect_distance(&[0, 1], &[1]),
            Err(Error::OverlappingSets)
        ));
    }

    #[test]
    fn diameter_examples() {
        for (d, n) in [(1, 6), (2, 5), (3, 3)] {
            let g = graph(d, n, &[]);
            assert_eq!(g.diameter(DiameterMode::default()).unwrap().value, n as u32 - 1);
        }
        assert_eq!(graph(2, 1, &[]).diameter(DiameterMode::default()).unwrap().value, 0);
        let g = graph(1, 4, &[(0, 3)]);
        assert_eq!(g.diameter(DiameterMode::default()).unwrap().value, 2);
        let lb = g
            .diameter(DiameterMode::SampledLowerBound { sweeps: 2 })
            .unwrap();
        assert!(!lb.exact && lb.value <= 2);
        assert_eq!(lb.label(), "lower bound");
        assert!(graph(2, 20, &[])
            .diameter(DiameterMode::Exact { cap: 100 })
            .is_err());
    }

    #[test]
    fn degree_profile_counts_implicit_neighbours() {
        let p = graph(1, 5, &[]).degree_profile();
        assert_eq!(p.degrees, vec![1, 2, 2, 2, 1]);
        assert_eq!(p.interior, vec![false, true, true, true, false]);
        let p = graph(2, 5, &[(0, 24)]).degree_profile();
        assert_eq!(p.degrees[12], 8);
        assert_eq!(p.degrees[0], 4);
        assert_eq!(p.histogram().iter().map(|(_, c)| c).sum::<usize>(), 25);
    }

    #[test]
    fn distance_field_is_lipschitz_across_edges() {
        let b = BoxSpec::new(2, 10).unwrap();
        let c = crate::sampler::sample_box(&KernelSpec::exact(2.0), &b, 3).unwrap();
        let g = LatticeGraph::new(&c);
        let field = g.distances_from(0);
        assert_eq!(field[0], 0);
        for v in 0..g.num_vertices() {
            g.for_each_neighbor(v, |w| {
                assert!(field[v].abs_diff(field[w]) <= 1);
            });
        }
    }
}
