//! Tensor-product Gauss–Legendre quadrature with panel doubling.

use std::f64::consts::PI;
use std::sync::OnceLock;

const RULE_ORDER: usize = 12;

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn default_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(RULE_ORDER))
}

/// Composite rule with `panels` equal panels per axis over the box `[lo, hi]`.
pub fn composite<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], hi: &[f64], panels: usize) -> f64 {
    let d = lo.len();
    let (nodes, weights) = default_rule();
    let m = nodes.len();
    let per_axis = panels * m;
    // Flattened 1-D abscissae and weights per axis.
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|a| {
            let h = (hi[a] - lo[a]) / panels as f64;
            let mut xs = Vec::with_capacity(per_axis);
            let mut ws = Vec::with_capacity(per_axis);
            for p in 0..panels {
                let left = lo[a] + h * p as f64;
                for (x, w) in nodes.iter().zip(weights) {
                    xs.push(left + 0.5 * h * (x + 1.0));
                    ws.push(0.5 * h * w);
                }
            }
            (xs, ws)
        })
        .collect();
    let total = per_axis.pow(d as u32);
    let mut point = vec![0.0; d];
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for a in (0..d).rev() {
            let j = rem % per_axis;
            rem /= per_axis;
            point[a] = axes[a].0[j];
            weight *= axes[a].1[j];
        }
        sum += weight * f(&point);
    }
    sum
}

/// Integrates a smooth `f` over `[lo, hi]`, doubling panels until two
/// successive estimates agree to `rel_tol`. Returns the finer estimate and
/// whether the tolerance was met before `max_panels`.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> (f64, bool) {
    let mut panels = 1;
    let mut coarse = composite(f, lo, hi, panels);
    while panels * 2 <= max_panels {
        panels *= 2;
        let fine = composite(f, lo, hi, panels);
        if (fine - coarse).abs() <= rel_tol * fine.abs() {
            return (fine, true);
        }
        coarse = fine;
    }
    (coarse, false)
}
