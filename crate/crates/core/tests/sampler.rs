use lrp_core::graph::LatticeGraph;
use lrp_core::oracle::expected_long_edges;
use lrp_core::rng::{derive_seed, Purpose};
use lrp_core::sampler::{
    cloud_expected_points, couple_scales, discretize_cloud, sample_box, sample_coupled,
    sample_coupled_kernels, sample_poisson_cloud,
};
use lrp_core::stats::{covariance, mean_var};
use lrp_core::{BoxSampler, BoxSpec, KernelSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn seed(i: usize) -> u64 {
    derive_seed(2024, Purpose::Generic, i as u64)
}

#[test]
fn long_edge_count_on_the_line() {
    let b = BoxSpec::new(1, 64).unwrap();
    let k = KernelSpec::exact(1.0);
    let exact: f64 = (2..64).map(|j| (64 - j) as f64 / (j * j) as f64).sum();
    assert!((expected_long_edges(&k, &b) - exact).abs() < 1e-10);
    let sampler = BoxSampler::new(k, b).unwrap();
    assert!((sampler.expected_edges() - exact).abs() < 1e-10);
    let counts: Vec<f64> = (0..10_000).map(|i| sampler.sample(seed(i)).num_long_edges() as f64).collect();
    let (mean, var) = mean_var(&counts);
    let se = (var / counts.len() as f64).sqrt();
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} vs {exact} (se {se})");
}

#[test]
fn single_pair_marginal() {
    // Pairs at displacement (2, 1) in a 3 x 2 box: exactly one such pair
    // (and its mirror (2, -1)).
    let b = BoxSpec::new(2, 3).unwrap();
    let k = KernelSpec::exact(1.0);
    let p = k.probability(&[2, 1]);
    let u = b.index_of(&[0, 0]).unwrap();
    let v = b.index_of(&[2, 1]).unwrap();
    let sampler = BoxSampler::new(k, b).unwrap();
    let reps = 100_000;
    let hits = (0..reps).filter(|&i| sampler.sample(seed(i)).has_edge(u, v)).count() as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((hits / reps as f64 - p).abs() <= 4.0 * se);
}

#[test]
fn marginals_on_a_grid() {
    let reps = 100_000;
    for (d, n) in [(1usize, 6usize), (2, 4)] {
        let b = BoxSpec::new(d, n).unwrap();
        let k = KernelSpec::exact(1.5);
        let sampler = BoxSampler::new(k, b.clone()).unwrap();
        let far: Vec<i64> = vec![n as i64 - 1; d];
        let targets: Vec<(usize, f64)> = [vec![2i64; d], far.clone(), {
            let mut v = vec![0i64; d];
            v[0] = 3;
            v
        }]
        .iter()
        .map(|x| (b.index_of(x).unwrap(), k.probability(x)))
        .collect();
        let mut hits = vec![0usize; targets.len()];
        for i in 0..reps {
            let c = sampler.sample(seed(i));
            for (h, &(t, _)) in hits.iter_mut().zip(&targets) {
                *h += c.has_edge(0, t) as usize;
            }
        }
        for (h, &(_, p)) in hits.iter().zip(&targets) {
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((*h as f64 / reps as f64 - p).abs() <= 4.0 * se, "d {d}: {h} vs {p}");
        }
    }
}

#[test]
fn displacement_classes_are_independent() {
    let b = BoxSpec::new(1, 16).unwrap();
    let sampler = BoxSampler::new(KernelSpec::exact(2.0), b).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..10_000 {
        let c = sampler.sample(seed(i));
        x.push(c.edges().iter().filter(|e| e.1 - e.0 == 2).count() as f64);
        y.push(c.edges().iter().filter(|e| e.1 - e.0 == 3).count() as f64);
    }
    let cov = covariance(&x, &y);
    let (_, vx) = mean_var(&x);
    let (_, vy) = mean_var(&y);
    let se = (vx * vy / x.len() as f64).sqrt();
    assert!(cov.abs() <= 4.0 * se, "cov {cov}, se {se}");
}

#[test]
fn cloud_point_count() {
    let eps: f64 = 1.0 / 16.0;
    let exact = 1.0 / eps - 1.0 + eps.ln();
    assert!((exact - (15.0 - 16f64.ln())).abs() < 1e-12);
    assert!((cloud_expected_points(1, 1.0, eps) - exact).abs() < 1e-9);
    let counts: Vec<f64> = (0..10_000)
        .map(|i| sample_poisson_cloud(1, 1.0, eps, seed(i)).unwrap().len() as f64)
        .collect();
    let (mean, var) = mean_var(&counts);
    let se = (var / counts.len() as f64).sqrt();
    assert!((mean - exact).abs() <= 4.0 * se, "{mean} vs {exact}");
}

#[test]
fn cloud_pairs_respect_separation() {
    for d in 1..=2 {
        let c = sample_poisson_cloud(d, 3.0, 0.1, 5).unwrap();
        assert!(c.symmetrized);
        for (t, s) in c.pairs() {
            let sep = t.iter().zip(s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(sep >= 0.1);
        }
    }
    assert!(sample_poisson_cloud(1, 1.0, 0.0, 1).is_err());
    assert!(sample_poisson_cloud(1, 1.0, 1.0, 1).is_err());
}

#[test]
fn discretised_cloud_marginal() {
    let reps = 100_000;
    let hits = (0..reps)
        .filter(|&i| {
            let cloud = sample_poisson_cloud(1, 1.0, 1.0 / 64.0, seed(i)).unwrap();
            discretize_cloud(&cloud, 8).unwrap().has_edge(0, 3)
        })
        .count() as f64;
    let p = 1.0 / 9.0;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    assert!((hits / reps as f64 - p).abs() <= 4.0 * se, "{hits}");
}

#[test]
fn cloud_and_direct_sampling_agree() {
    let reps = 10_000;
    let b = BoxSpec::new(1, 8).unwrap();
    let sampler = BoxSampler::new(KernelSpec::exact(1.0), b).unwrap();
    let bins = 6;
    let mut direct = vec![0f64; bins];
    let mut cloud = vec![0f64; bins];
    for i in 0..reps {
        let a = sampler.sample(seed(i)).num_long_edges().min(bins - 1);
        let c = sample_poisson_cloud(1, 1.0, 1.0 / 8.0, seed(reps + i)).unwrap();
        let e = discretize_cloud(&c, 8).unwrap().num_long_edges().min(bins - 1);
        direct[a] += 1.0;
        cloud[e] += 1.0;
    }
    // Two-sample chi-square with equal sample sizes.
    let mut stat = 0.0;
    let mut dof = 0.0;
    for (x, y) in direct.iter().zip(&cloud) {
        if x + y > 0.0 {
            stat += (x - y).powi(2) / (x + y);
            dof += 1.0;
        }
    }
    let p = 1.0 - ChiSquared::new(dof - 1.0).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square {stat} on {dof} bins, p = {p}");
}

#[test]
fn coarse_edges_have_fine_witnesses() {
    for i in 0..50 {
        let cloud = sample_poisson_cloud(1, 2.0, 1.0 / 16.0, seed(i)).unwrap();
        let scales = couple_scales(&cloud, &[16, 8]).unwrap();
        assert_eq!(scales[1], discretize_cloud(&cloud, 8).unwrap());
        for &(a, b) in scales[1].edges() {
            let witness = cloud.pairs().any(|(t, s)| {
                let (x, y) = ((t[0] * 8.0) as usize, (s[0] * 8.0) as usize);
                (x, y) == (a, b) || (x, y) == (b, a)
            });
            assert!(witness);
        }
    }
    let cloud = sample_poisson_cloud(1, 1.0, 0.25, 1).unwrap();
    assert!(discretize_cloud(&cloud, 5).is_err());
}

#[test]
fn coupling_inequality_on_pure_lattices() {
    let cloud = sample_poisson_cloud(2, 0.0, 1.0 / 8.0, 3).unwrap();
    let v = couple_scales(&cloud, &[8, 4]).unwrap();
    let fine = LatticeGraph::new(&v[0]);
    let coarse = LatticeGraph::new(&v[1]);
    for a in 0..64 {
        for b in 0..64 {
            let (x, y) = (fine.box_spec().coords(a), fine.box_spec().coords(b));
            let xc: Vec<i64> = x.iter().map(|c| c / 2).collect();
            let yc: Vec<i64> = y.iter().map(|c| c / 2).collect();
            let dc = coarse.distance(&xc, &yc).unwrap() as i64;
            let df = fine.distance(&x, &y).unwrap() as i64;
            let sup = xc.iter().zip(&yc).map(|(p, q)| (p - q).abs()).max().unwrap();
            assert_eq!(dc, sup);
            assert!(dc <= 3 * df);
        }
    }
}

#[test]
fn harris_coupling_is_monotone() {
    let b = BoxSpec::new(2, 10).unwrap();
    for i in 0..20 {
        let v = sample_coupled(
            &[KernelSpec::exact(0.5), KernelSpec::exact(1.0), KernelSpec::exact(3.0)],
            &b,
            seed(i),
        )
        .unwrap();
        assert!(v[0].is_subset_of(&v[1]) && v[1].is_subset_of(&v[2]));
        let (a, c) = sample_coupled_kernels(&KernelSpec::exact(1.0), &KernelSpec::exact(1.0), &b, seed(i)).unwrap();
        assert_eq!(a.edges(), c.edges());
    }
    let line = BoxSpec::new(1, 200).unwrap();
    for i in 0..20 {
        let (a, c) =
            sample_coupled_kernels(&KernelSpec::exact(1.0), &KernelSpec::truncated(1.0), &line, seed(i)).unwrap();
        assert_eq!(a.edges(), c.edges());
    }
}

#[test]
fn sampling_is_reproducible() {
    let k = KernelSpec::exponential(1.5);
    let b = BoxSpec::new(2, 20).unwrap();
    assert_eq!(sample_box(&k, &b, 77).unwrap(), sample_box(&k, &b, 77).unwrap());
    assert_eq!(
        sample_poisson_cloud(2, 1.5, 0.05, 77).unwrap(),
        sample_poisson_cloud(2, 1.5, 0.05, 77).unwrap()
    );
    let tiny = BoxSpec::new(2, 100).unwrap();
    assert!(BoxSampler::with_budget(k, tiny, 1000).is_err());
}
