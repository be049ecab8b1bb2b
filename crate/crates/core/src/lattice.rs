//! Lattice geometry: displacements between vertices and axis-aligned boxes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer offset `u - v` between two lattice vertices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Displacement(Vec<i64>);

impl Displacement {
    pub fn new(components: Vec<i64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter(
                "displacement needs dimension >= 1".into(),
            ));
        }
        Ok(Self(components))
    }

    /// Offset `v - u`.
    pub fn between(u: &[i64], v: &[i64]) -> Self {
        debug_assert_eq!(u.len(), v.len());
        Self(u.iter().zip(v).map(|(a, b)| b - a).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn sup_norm(&self) -> u64 {
        sup_norm(&self.0)
    }

    pub fn norm2_sq(&self) -> f64 {
        self.0.iter().map(|&c| (c as f64) * (c as f64)).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.norm2_sq().sqrt()
    }

    /// Sorted absolute components. Every kernel in this crate depends on the
    /// displacement only through this class.
    pub fn canonical(&self) -> Vec<u32> {
        canonical_class(&self.0)
    }

    pub fn scaled(&self, factor: i64) -> Self {
        Self(self.0.iter().map(|c| c * factor).collect())
    }
}

pub fn sup_norm(v: &[i64]) -> u64 {
    v.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

pub fn canonical_class(v: &[i64]) -> Vec<u32> {
    let mut c: Vec<u32> = v.iter().map(|x| x.unsigned_abs() as u32).collect();
    c.sort_unstable();
    c
}

/// The box `origin + {0, .., n-1}^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxSpec {
    pub d: usize,
    pub n: usize,
    pub origin: Vec<i64>,
}

impl BoxSpec {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        Self::with_origin(n, vec![0; d])
    }

    pub fn with_origin(n: usize, origin: Vec<i64>) -> Result<Self> {
        let d = origin.len();
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("box side must be >= 1".into()));
        }
        if (n as u128).checked_pow(d as u32).is_none_or(|v| v > usize::MAX as u128) {
            return Err(Error::CapExceeded {
                what: "box vertex count",
                requested: u128::MAX,
                limit: usize::MAX as u128,
            });
        }
        Ok(Self { d, n, origin })
    }

    /// The `∞`-ball `{x : |x - center|_∞ <= radius}`.
    pub fn ball(center: &[i64], radius: usize) -> Result<Self> {
        let origin = center.iter().map(|c| c - radius as i64).collect();
        Self::with_origin(2 * radius + 1, origin)
    }

    pub fn num_vertices(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.d
            && x.iter()
                .zip(&self.origin)
                .all(|(&c, &o)| c >= o && c < o + self.n as i64)
    }

    /// Row-major linear index (first coordinate most significant).
    pub fn index_of(&self, x: &[i64]) -> Result<usize> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(Error::OutsideBox(x.to_vec()));
        }
        Ok(self.index_unchecked(x))
    }

    pub(crate) fn index_unchecked(&self, x: &[i64]) -> usize {
        x.iter()
            .zip(&self.origin)
            .fold(0usize, |acc, (&c, &o)| acc * self.n + (c - o) as usize)
    }

    /// Offsets from the origin corner, written into `out`.
    pub(crate) fn local_coords_into(&self, mut index: usize, out: &mut [usize]) {
        for slot in out.iter_mut().rev() {
            *slot = index % self.n;
            index /= self.n;
        }
    }

    pub fn coords(&self, index: usize) -> Vec<i64> {
        let mut local = vec![0usize; self.d];
        self.local_coords_into(index, &mut local);
        local
            .iter()
            .zip(&self.origin)
            .map(|(&l, &o)| o + l as i64)
            .collect()
    }

    /// Index of `origin + (n-1) * direction` for a 0/1 direction vector.
    pub fn corner_index(&self, direction: &[bool]) -> usize {
        let corner: Vec<i64> = self
            .origin
            .iter()
            .zip(direction)
            .map(|(&o, &on)| if on { o + self.n as i64 - 1 } else { o })
            .collect();
        self.index_unchecked(&corner)
    }

    /// Number of vertices at `∞`-distance 1 from an interior vertex.
    pub fn interior_degree(&self) -> usize {
        3usize.pow(self.d as u32) - 1
    }
}

/// All offsets `δ ∈ {-1,0,1}^d \ {0}`.
pub fn unit_offsets(d: usize) -> Vec<Vec<i64>> {
    let total = 3usize.pow(d as u32);
    (0..total)
        .map(|mut code| {
            (0..d)
                .map(|_| {
                    let c = (code % 3) as i64 - 1;
                    code /= 3;
                    c
                })
                .collect::<Vec<i64>>()
        })
        .filter(|v| v.iter().any(|&c| c != 0))
        .collect()
}
