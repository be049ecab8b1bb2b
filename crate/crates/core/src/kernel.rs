//! Connection-probability kernels.
//!
//! The exact kernel opens `{u, v}` with probability `1 - exp(-β J(u - v))`,
//! where `J(k) = ∫_{[0,1)^d} ∫_{k+[0,1)^d} |x - y|^{-2d} dy dx` is the
//! interaction between two unit cells. `J` is homogeneous of degree `-2d`,
//! so the block of `n^d` cells at block offset `k` interacts with its partner
//! block exactly as the single cells do. Two simplified families replace `J`
//! by `|k|^{-2d}` (Euclidean norm).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{LazyLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{canonical_class, Displacement};
use crate::quadrature::integrate_box;

const QUAD_REL_TOL: f64 = 1e-12;
/// Classes with a component beyond this are evaluated but not cached.
const CACHE_RADIUS: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `1 - exp(-β J)` with the cube-pair interaction `J`.
    ExactCube,
    /// `min(β / |k|^{2d}, 1)`.
    TruncatedPower,
    /// `1 - exp(-β / |k|^{2d})`.
    ExponentialPower,
}

impl KernelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::ExactCube => "exact_cube",
            KernelFamily::TruncatedPower => "truncated_power",
            KernelFamily::ExponentialPower => "exponential_power",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_cube" | "exact" => Ok(KernelFamily::ExactCube),
            "truncated_power" | "truncated" => Ok(KernelFamily::TruncatedPower),
            "exponential_power" | "exponential" => Ok(KernelFamily::ExponentialPower),
            other => Err(invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub beta: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(invalid(format!("beta must be finite and >= 0, got {beta}")));
        }
        Ok(Self { family, beta })
    }

    pub fn exact(beta: f64) -> Self {
        Self::new(KernelFamily::ExactCube, beta).expect("valid beta")
    }

    pub fn truncated(beta: f64) -> Self {
        Self::new(KernelFamily::TruncatedPower, beta).expect("valid beta")
    }

    pub fn exponential(beta: f64) -> Self {
        Self::new(KernelFamily::ExponentialPower, beta).expect("valid beta")
    }

    /// Probability for a raw offset vector.
    pub fn probability(&self, offset: &[i64]) -> f64 {
        let sup = crate::lattice::sup_norm(offset);
        if sup <= 1 {
            return 1.0;
        }
        if self.beta == 0.0 {
            return 0.0;
        }
        let d = offset.len() as i32;
        match self.family {
            KernelFamily::ExactCube => {
                let j = interaction_of_class(&canonical_class(offset));
                -(-self.beta * j).exp_m1()
            }
            KernelFamily::TruncatedPower => {
                let r2: f64 = offset.iter().map(|&c| (c * c) as f64).sum();
                (self.beta / r2.powi(d)).min(1.0)
            }
            KernelFamily::ExponentialPower => {
                let r2: f64 = offset.iter().map(|&c| (c * c) as f64).sum();
                -(-self.beta / r2.powi(d)).exp_m1()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(beta={})", self.family, self.beta)
    }
}

/// Cube-pair interaction `J` for a displacement; `value` is `f64::INFINITY`
/// exactly when the cells touch (`|k|_∞ <= 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub displacement: Displacement,
    pub value: f64,
}

impl Interaction {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

static INTERACTIONS: LazyLock<RwLock<HashMap<Vec<u32>, f64>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

/// `J` for a displacement, checked against the expected dimension.
pub fn cube_interaction(d: usize, disp: &Displacement) -> Result<Interaction> {
    if disp.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: disp.dim(),
        });
    }
    Ok(Interaction {
        displacement: disp.clone(),
        value: interaction_of_class(&disp.canonical()),
    })
}

/// `J` for a canonical class (sorted absolute components). d = 1 uses the
/// closed form `ln(k^2 / (k^2 - 1))`; higher dimensions use quadrature.
pub(crate) fn interaction_of_class(class: &[u32]) -> f64 {
    let sup = class.last().copied().unwrap_or(0);
    if sup <= 1 {
        return f64::INFINITY;
    }
    if class.len() == 1 {
        let k = sup as f64;
        return -(-1.0 / (k * k)).ln_1p();
    }
    if let Some(v) = INTERACTIONS.read().expect("cache lock").get(class) {
        return *v;
    }
    let v = quadrature_interaction_class(class);
    if sup <= CACHE_RADIUS {
        INTERACTIONS
            .write()
            .expect("cache lock")
            .insert(class.to_vec(), v);
    }
    v
}

/// `J` by tensor-product quadrature, in any dimension (no closed form, no
/// cache). Returns `+∞` for touching cells.
pub fn quadrature_interaction(disp: &Displacement) -> f64 {
    let class = disp.canonical();
    if class.last().copied().unwrap_or(0) <= 1 {
        return f64::INFINITY;
    }
    quadrature_interaction_class(&class)
}

fn quadrature_interaction_class(class: &[u32]) -> f64 {
    let d = class.len();
    let k: Vec<f64> = class.iter().map(|&c| c as f64).collect();
    // J(k) = ∫_{[-1,1]^d} Π(1 - |r_i|) |k + r|^{-2d} dr, split at r_i = 0 so
    // every piece is smooth.
    let integrand = |r: &[f64]| {
        let mut weight = 1.0;
        let mut norm2 = 0.0;
        for i in 0..d {
            weight *= 1.0 - r[i].abs();
            let x = k[i] + r[i];
            norm2 += x * x;
        }
        weight / norm2.powi(d as i32)
    };
    let max_panels = match d {
        1 => 256,
        2 => 32,
        3 => 8,
        _ => 4,
    };
    let mut total = 0.0;
    for piece in 0..(1usize << d) {
        let lo: Vec<f64> = (0..d)
            .map(|i| if piece >> i & 1 == 0 { -1.0 } else { 0.0 })
            .collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + 1.0).collect();
        let (v, _) = integrate_box(&integrand, &lo, &hi, QUAD_REL_TOL, max_panels);
        total += v;
    }
    total
}

pub fn connection_probability(kernel: &KernelSpec, disp: &Displacement) -> f64 {
    kernel.probability(disp.components())
}

/// Lower bound, probability and upper bound for one displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub lower: f64,
    pub probability: f64,
    pub upper: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.lower <= self.probability && self.probability <= self.upper
    }
}

/// `min((4d)^{-2d} β / |k|_∞^{2d}, 1/2) <= p <= 2^{2d} β / |k|_∞^{2d}` for the
/// exact kernel.
pub fn check_probability_bounds(beta: f64, disp: &Displacement) -> Result<BoundReport> {
    let sup = disp.sup_norm();
    if sup < 2 {
        return Err(invalid("bounds need |k|_∞ >= 2"));
    }
    let kernel = KernelSpec::new(KernelFamily::ExactCube, beta)?;
    let d = disp.dim() as i32;
    let scale = beta / (sup as f64).powi(2 * d);
    let report = BoundReport {
        lower: ((4.0 * d as f64).powi(-2 * d) * scale).min(0.5),
        probability: connection_probability(&kernel, disp),
        upper: 4f64.powi(d) * scale,
    };
    Ok(report)
}

/// Probability that the blocks `V_0^n` and `V_k^n` share at least one edge,
/// `1 - Π (1 - p)` over all `n^{2d}` cell pairs.
pub fn block_connection_probability(
    kernel: &KernelSpec,
    block_disp: &Displacement,
    n: usize,
) -> Result<f64> {
    if block_disp.sup_norm() < 2 {
        return Err(invalid("block displacement needs |k|_∞ >= 2"));
    }
    if n == 0 {
        return Err(invalid("block side must be >= 1"));
    }
    let d = block_disp.dim();
    let centre = block_disp.scaled(n as i64);
    // Offsets δ = b - a ∈ (-n, n)^d occur Π (n - |δ_i|) times.
    let side = 2 * n - 1;
    let mut log_closed = 0.0;
    let mut offset = vec![0i64; d];
    for flat in 0..side.pow(d as u32) {
        let mut rem = flat;
        let mut count = 1.0;
        for (i, slot) in offset.iter_mut().enumerate() {
            let delta = (rem % side) as i64 - (n as i64 - 1);
            rem /= side;
            *slot = centre.components()[i] + delta;
            count *= (n as i64 - delta.abs()) as f64;
        }
        let p = kernel.probability(&offset);
        if p >= 1.0 {
            return Ok(1.0);
        }
        log_closed += count * (-p).ln_1p();
    }
    Ok(-log_closed.exp_m1())
}

/// Expected degree of a vertex of `Z^d`, truncated at `|u|_∞ <= radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedDegree {
    /// `3^d - 1 + Σ_{2 <= |u|_∞ <= radius} p(u)`.
    pub value: f64,
    /// Upper end of the rigorous bracket `[0, β 50^d (radius+1)^{-d}]` for the
    /// omitted tail.
    pub tail_upper: f64,
    /// `max(⌈β⌉, 1) 3^{5d}`.
    pub bound: f64,
}

impl ExpectedDegree {
    pub fn within_bound(&self) -> bool {
        self.value + self.tail_upper <= self.bound
    }
}

pub fn expected_degree(kernel: &KernelSpec, d: usize, radius: u32) -> Result<ExpectedDegree> {
    if radius < 2 {
        return Err(invalid("truncation radius must be >= 2"));
    }
    if d == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    let mut sum = 0.0;
    for_each_class(d, radius, &mut |class, multiplicity| {
        if class[d - 1] >= 2 {
            let offset: Vec<i64> = class.iter().map(|&c| c as i64).collect();
            sum += multiplicity as f64 * kernel.probability(&offset);
        }
    });
    let di = d as i32;
    Ok(ExpectedDegree {
        value: (3f64.powi(di) - 1.0) + sum,
        tail_upper: kernel.beta * 50f64.powi(di) * (radius as f64 + 1.0).powi(-di),
        bound: kernel.beta.ceil().max(1.0) * 3f64.powi(5 * di),
    })
}

/// Visits every sorted class `0 <= c_1 <= .. <= c_d <= radius` with the number
/// of signed permutations that realise it.
pub(crate) fn for_each_class(d: usize, radius: u32, visit: &mut impl FnMut(&[u32], u64)) {
    fn rec(
        d: usize,
        radius: u32,
        class: &mut Vec<u32>,
        visit: &mut impl FnMut(&[u32], u64),
    ) {
        if class.len() == d {
            visit(class, signed_permutations(class));
            return;
        }
        let start = class.last().copied().unwrap_or(0);
        for c in start..=radius {
            class.push(c);
            rec(d, radius, class, visit);
            class.pop();
        }
    }
    let mut class = Vec::with_capacity(d);
    rec(d, radius, &mut class, visit);
}

fn signed_permutations(class: &[u32]) -> u64 {
    let d = class.len() as u64;
    let mut perms: u64 = (1..=d).product();
    let mut i = 0;
    while i < class.len() {
        let mut j = i;
        while j < class.len() && class[j] == class[i] {
            j += 1;
        }
        perms /= (1..=(j - i) as u64).product::<u64>();
        i = j;
    }
    let nonzero = class.iter().filter(|&&c| c != 0).count() as u32;
    perms << nonzero
}

/// `|p_exact - p_truncated| · |k|_2^{2d+1}`.
pub fn kernel_gap(disp: &Displacement, beta: f64) -> Result<f64> {
    if disp.sup_norm() < 2 {
        return Err(invalid("kernel gap needs |k|_∞ >= 2"));
    }
    let exact = KernelSpec::new(KernelFamily::ExactCube, beta)?;
    let truncated = KernelSpec::new(KernelFamily::TruncatedPower, beta)?;
    let gap = (connection_probability(&exact, disp) - connection_probability(&truncated, disp)).abs();
    Ok(gap * disp.norm2().powi(2 * disp.dim() as i32 + 1))
}
