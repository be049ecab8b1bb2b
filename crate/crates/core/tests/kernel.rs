use lrp_core::kernel::{
    block_connection_probability, check_probability_bounds, connection_probability, cube_interaction,
    expected_degree, kernel_gap, quadrature_interaction,
};
use lrp_core::{Displacement, KernelFamily, KernelSpec};

fn disp(v: &[i64]) -> Displacement {
    Displacement::new(v.to_vec()).unwrap()
}

const FAMILIES: [KernelFamily; 3] = [
    KernelFamily::ExactCube,
    KernelFamily::TruncatedPower,
    KernelFamily::ExponentialPower,
];

#[test]
fn line_quadrature_matches_closed_form() {
    for k in 2..=64i64 {
        let closed = ((k * k) as f64 / (k * k - 1) as f64).ln();
        let quad = quadrature_interaction(&disp(&[k]));
        assert!(((quad - closed) / closed).abs() < 1e-8, "k = {k}: {quad} vs {closed}");
    }
}

#[test]
fn touching_cells_are_infinite() {
    for v in [[1i64, 0], [1, 1], [0, -1]] {
        assert!(cube_interaction(2, &disp(&v)).unwrap().is_infinite());
    }
    assert!(cube_interaction(3, &disp(&[2, 0])).is_err());
}

#[test]
fn interaction_is_symmetric() {
    let base = cube_interaction(3, &disp(&[2, -1, 3])).unwrap().value;
    for v in [[3, 2, 1], [-1, -3, 2], [1, 3, -2], [-2, 1, -3]] {
        assert_eq!(cube_interaction(3, &disp(&v)).unwrap().value, base);
    }
}

#[test]
fn blocks_behave_like_cells() {
    for d in 1..=2usize {
        for sup in 2..=3i64 {
            let mut v = vec![0i64; d];
            v[0] = sup;
            if d == 2 {
                v[1] = 1;
            }
            let k = KernelSpec::exact(1.0);
            let single = connection_probability(&k, &disp(&v));
            for n in 2..=4 {
                let block = block_connection_probability(&k, &disp(&v), n).unwrap();
                assert!(((block - single) / single).abs() < 1e-8, "d={d} v={v:?} n={n}");
            }
        }
    }
    let p = block_connection_probability(&KernelSpec::exact(1.0), &disp(&[3]), 4).unwrap();
    assert!((p - 1.0 / 9.0).abs() < 1e-12);
    let zero = block_connection_probability(&KernelSpec::exact(0.0), &disp(&[2, 2]), 3).unwrap();
    assert_eq!(zero, 0.0);
}

#[test]
fn probability_examples() {
    assert!((connection_probability(&KernelSpec::exact(1.0), &disp(&[2])) - 0.25).abs() < 1e-15);
    assert!((connection_probability(&KernelSpec::truncated(1.0), &disp(&[2])) - 0.25).abs() < 1e-15);
    for f in FAMILIES {
        let k = KernelSpec::new(f, 0.0).unwrap();
        assert_eq!(connection_probability(&k, &disp(&[5, 3])), 0.0);
        assert_eq!(connection_probability(&k, &disp(&[1, -1])), 1.0);
    }
}

#[test]
fn monotone_in_beta_and_distance() {
    for f in FAMILIES {
        for ray in [[1i64, 0], [1, 1], [2, 1]] {
            let mut last = f64::INFINITY;
            for t in 2..40 {
                let v = [ray[0] * t, ray[1] * t];
                let p = connection_probability(&KernelSpec::new(f, 2.0).unwrap(), &disp(&v));
                assert!(p <= last, "{f} ray {ray:?} t {t}");
                last = p;
                let lo = connection_probability(&KernelSpec::new(f, 1.0).unwrap(), &disp(&v));
                assert!(lo <= p);
            }
        }
    }
}

#[test]
fn bounds_hold_everywhere() {
    for beta in [0.5, 1.0, 4.0] {
        for k in 2..=64i64 {
            assert!(check_probability_bounds(beta, &disp(&[k])).unwrap().holds());
        }
        for a in -64..=64i64 {
            for b in [0i64, 1, 7, 33, 64] {
                if a.abs().max(b) < 2 {
                    continue;
                }
                let r = check_probability_bounds(beta, &disp(&[a, b])).unwrap();
                assert!(r.holds(), "beta {beta} ({a}, {b}): {r:?}");
            }
        }
    }
}

#[test]
fn scaled_gap_is_bounded() {
    for k in 2..=64i64 {
        assert!(kernel_gap(&disp(&[k]), 1.0).unwrap() < 1e-12);
        let g2 = kernel_gap(&disp(&[k]), 2.0).unwrap();
        assert!((g2 - 1.0 / k as f64).abs() < 1e-9, "k {k}: {g2}");
        assert!(g2 <= 0.5 + 1e-12);
    }
    assert_eq!(kernel_gap(&disp(&[3, 4]), 0.0).unwrap(), 0.0);
}

#[test]
fn expected_degree_on_the_line() {
    let e = expected_degree(&KernelSpec::exact(1.0), 1, 10_000).unwrap();
    let basel = 2.0 + 2.0 * (std::f64::consts::PI.powi(2) / 6.0 - 1.0);
    assert!((e.value + e.tail_upper - basel).abs() < 2e-4 + e.tail_upper);
    assert!(e.value <= basel && e.value + e.tail_upper >= basel);
    assert!(e.within_bound());
    assert_eq!(e.bound, 243.0);
    let zero = expected_degree(&KernelSpec::exact(0.0), 2, 10).unwrap();
    assert_eq!(zero.value, 8.0);
    assert!(zero.within_bound());
}
